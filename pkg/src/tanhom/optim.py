"""Matrix-free minimizers used by the cell solver.

Both stop on the same contract: gradient norm below tol * (1 + initial
gradient norm).  The conjugate-gradient path assumes the objective is an
exact quadratic so that the Hessian action can be read off from gradient
differences; the limited-memory quasi-Newton path only needs values and
gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class MinimizeResult:
    x: np.ndarray
    iterations: int
    grad_norm: float
    converged: bool


def cg_quadratic(
    apply_hessian: Callable[[np.ndarray], np.ndarray],
    grad0: np.ndarray,
    tol: float,
    max_iters: int,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    recompute_every: int = 50,
) -> MinimizeResult:
    """Minimize 0.5 x^T H x + g0^T x from x = 0 by conjugate gradients.

    ``project`` (when given) restricts iterates to a subspace orthogonal to a
    known null space of H, e.g. constant shifts under periodic boundary
    conditions.  Residuals are recomputed from scratch periodically to keep
    round-off in check.
    """

    def proj(v):
        return project(v) if project is not None else v

    x = np.zeros_like(grad0)
    r = proj(-grad0)
    target = tol * (1.0 + float(np.linalg.norm(grad0)))
    if float(np.linalg.norm(r)) <= target:
        return MinimizeResult(x, 0, float(np.linalg.norm(r)), True)

    d = r.copy()
    delta = float(r @ r)
    for k in range(1, max_iters + 1):
        hd = proj(apply_hessian(d))
        dhd = float(d @ hd)
        if dhd <= 0.0:
            # Curvature lost to round-off; the current iterate is the best answer.
            return MinimizeResult(x, k, float(np.sqrt(delta)), False)
        step = delta / dhd
        x = x + step * d
        if k % recompute_every == 0:
            r = proj(-(grad0 + apply_hessian(x)))
        else:
            r = r - step * hd
        delta_new = float(r @ r)
        if np.sqrt(delta_new) <= target:
            return MinimizeResult(x, k, float(np.sqrt(delta_new)), True)
        d = r + (delta_new / delta) * d
        delta = delta_new
    return MinimizeResult(x, max_iters, float(np.sqrt(delta)), False)


def lbfgs(
    value_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    tol: float,
    max_iters: int,
    memory: int = 10,
    armijo_c: float = 1e-4,
    max_backtracks: int = 40,
    target_norm: float | None = None,
) -> MinimizeResult:
    """Limited-memory quasi-Newton descent with Armijo backtracking.

    Returns the best iterate seen.  ``converged`` reflects the gradient-norm
    stopping test, not merely running out of iterations.  ``target_norm``
    overrides the relative stopping target with an absolute one (used when a
    caller anchors the tolerance at a different reference point).
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = value_and_grad(x)
    if target_norm is None:
        target = tol * (1.0 + float(np.linalg.norm(g)))
    else:
        target = target_norm

    best_x, best_f = x.copy(), f
    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []
    rho_list: list[float] = []

    for k in range(1, max_iters + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= target:
            return MinimizeResult(best_x, k - 1, gnorm, True)

        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
            a = rho * float(s @ q)
            alphas.append(a)
            q -= a * y
        if y_list:
            y_last = y_list[-1]
            gamma = float(s_list[-1] @ y_last) / max(float(y_last @ y_last), 1e-300)
            q *= gamma
        for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
            b = rho * float(y @ q)
            q += (a - b) * s
        direction = -q

        # Near kinks the curvature pairs can produce astronomically scaled
        # directions; cap them so the line search stays in floating range.
        dnorm = float(np.linalg.norm(direction))
        cap = 1e8 * max(1.0, gnorm)
        if dnorm > cap:
            direction *= cap / dnorm

        slope = float(g @ direction)
        if slope >= 0.0:
            direction = -g
            slope = -gnorm * gnorm

        step = 1.0 if y_list else 1.0 / max(gnorm, 1.0)
        accepted = False
        for _ in range(max_backtracks):
            x_try = x + step * direction
            f_try, g_try = value_and_grad(x_try)
            if f_try <= f + armijo_c * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return MinimizeResult(best_x, k, gnorm, gnorm <= target)

        s_vec = x_try - x
        y_vec = g_try - g
        x, f, g = x_try, f_try, g_try
        if f < best_f:
            best_x, best_f = x.copy(), f
        sy = float(s_vec @ y_vec)
        if sy > 1e-12 * float(np.linalg.norm(s_vec)) * float(np.linalg.norm(y_vec)):
            s_list.append(s_vec)
            y_list.append(y_vec)
            rho_list.append(1.0 / sy)
            if len(s_list) > memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)

    return MinimizeResult(best_x, max_iters, float(np.linalg.norm(g)), False)
