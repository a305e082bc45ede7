"""Periodic energy densities with declared growth data, plus their extensions.

An integrand is a callable pair (value, gradient) over (y, xi) together with
its growth exponent p and two-sided growth constants.  All callables are
vectorized: ``y`` has shape (..., N), ``xi`` has shape (..., d, N) and values
come back with shape (...,).  The leading batch axes are what make the cell
solver fast, so custom integrands must follow the same convention.

Two extension constructions are provided for a fixed base point on the
manifold: one that projects the gradient argument onto the tangent space and
penalizes the normal remainder with its p-th power, and a linear-growth
variant defined on the whole ambient space through a cutoff of the
nearest-point projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    HypothesisViolated,
    InvalidProfile,
    UnsupportedGrowth,
)
from .manifold import EmbeddedManifold


@dataclass(frozen=True)
class StepProfile:
    """1-periodic piecewise-constant profile on [0, 1).

    ``breakpoints`` are the interior cut points in (0, 1), strictly increasing;
    ``values`` has one entry per interval, so ``len(values) == len(breakpoints) + 1``.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        breaks = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", breaks)
        object.__setattr__(self, "values", vals)
        if len(vals) != len(breaks) + 1:
            raise InvalidProfile(
                f"need {len(breaks) + 1} values for {len(breaks)} breakpoints, got {len(vals)}"
            )
        if any(v <= 0 for v in vals):
            raise InvalidProfile("profile values must be positive")
        if any(not (0.0 < b < 1.0) for b in breaks):
            raise InvalidProfile("breakpoints must lie strictly inside (0, 1)")
        if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise InvalidProfile("breakpoints must be strictly increasing")

    @classmethod
    def constant(cls, value: float) -> "StepProfile":
        return cls((), (value,))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        frac = y - np.floor(y)
        idx = np.searchsorted(np.asarray(self.breakpoints), frac, side="right")
        return np.asarray(self.values)[idx]

    def min_value(self) -> float:
        return min(self.values)

    def max_value(self) -> float:
        return max(self.values)

    def _interval_lengths(self) -> np.ndarray:
        edges = np.concatenate(([0.0], self.breakpoints, [1.0]))
        return np.diff(edges)

    def integral(self) -> float:
        """Exact value of the integral over one period."""
        return float(np.dot(self._interval_lengths(), self.values))

    def reciprocal_integral(self) -> float:
        """Exact value of the integral of 1/profile over one period."""
        return float(np.dot(self._interval_lengths(), 1.0 / np.asarray(self.values)))

    def to_config(self) -> dict:
        return {"breaks": list(self.breakpoints), "values": list(self.values)}


@dataclass(frozen=True)
class Integrand:
    """Periodic energy density f(y, xi) with declared growth data.

    ``eval`` and ``grad_xi`` follow the batched convention described in the
    module docstring.  ``smoothed``, when present, maps a regularization
    parameter mu to a (value, gradient) pair usable by gradient-based solvers
    when the exact density is nonsmooth (linear growth).
    """

    eval: Callable
    p: float
    alpha: float
    beta: float
    dims: tuple[int, int]  # (N, d)
    grad_xi: Callable | None = None
    lipschitz_L: float | None = None
    quadratic: bool = False
    smoothed: Callable[[float], tuple[Callable, Callable]] | None = None
    describe: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.p < 1:
            raise UnsupportedGrowth("growth exponent must satisfy p >= 1")
        if self.alpha <= 0 or self.beta < self.alpha:
            raise ValueError("growth constants must satisfy 0 < alpha <= beta")
        if self.p == 1 and self.lipschitz_L is None:
            raise ValueError("linear-growth integrands must declare lipschitz_L")

    def gradient(self, y, xi, h: float = 1e-6):
        """Analytic gradient when available, central differences otherwise."""
        if self.grad_xi is not None:
            return self.grad_xi(y, xi)
        return finite_difference_grad(self, y, xi, h)

    def solver_forms(self, mu: float) -> tuple[Callable, Callable]:
        """(value, gradient) pair for minimization; smoothed when declared."""
        if self.smoothed is not None:
            return self.smoothed(mu)
        grad = self.grad_xi
        if grad is None:
            grad = lambda y, xi: finite_difference_grad(self, y, xi)
        return self.eval, grad


def finite_difference_grad(f: Integrand, y, xi, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of f in xi, entry by entry."""
    if h <= 0:
        raise ValueError("finite difference step must be positive")
    xi = np.asarray(xi, dtype=float)
    grad = np.empty_like(xi)
    d, n = xi.shape[-2:]
    for a in range(d):
        for j in range(n):
            bump = np.zeros_like(xi)
            bump[..., a, j] = h
            grad[..., a, j] = (f.eval(y, xi + bump) - f.eval(y, xi - bump)) / (2.0 * h)
    return grad


def make_isotropic_quadratic(N: int, d: int) -> Integrand:
    """Constant-coefficient density |xi|^2 (squared Frobenius norm)."""

    def ev(y, xi):
        xi = np.asarray(xi, dtype=float)
        return np.sum(xi * xi, axis=(-2, -1))

    def gr(y, xi):
        return 2.0 * np.asarray(xi, dtype=float)

    return Integrand(
        eval=ev,
        grad_xi=gr,
        p=2,
        alpha=1.0,
        beta=1.0,
        dims=(N, d),
        quadratic=True,
        describe={"kind": "isotropic_quadratic", "N": N, "d": d},
    )


def make_laminate_quadratic(a: StepProfile, b: StepProfile, N: int) -> Integrand:
    """Rank-one laminate on R^{2 x N}: sum_j a(y_1) xi_{1j}^2 + b(y_1) xi_{2j}^2.

    The coefficients oscillate in the first coordinate only, which is the
    classical setting where harmonic and arithmetic means give the effective
    behavior in closed form.
    """
    if N < 1:
        raise ValueError("need at least one gradient column")

    def ev(y, xi):
        y = np.asarray(y, dtype=float)
        xi = np.asarray(xi, dtype=float)
        wa = a(y[..., 0])
        wb = b(y[..., 0])
        return wa * np.sum(xi[..., 0, :] ** 2, axis=-1) + wb * np.sum(
            xi[..., 1, :] ** 2, axis=-1
        )

    def gr(y, xi):
        y = np.asarray(y, dtype=float)
        xi = np.asarray(xi, dtype=float)
        out = np.empty_like(xi)
        out[..., 0, :] = 2.0 * a(y[..., 0])[..., None] * xi[..., 0, :]
        out[..., 1, :] = 2.0 * b(y[..., 0])[..., None] * xi[..., 1, :]
        return out

    alpha = min(a.min_value(), b.min_value())
    beta = max(a.max_value(), b.max_value())
    return Integrand(
        eval=ev,
        grad_xi=gr,
        p=2,
        alpha=alpha,
        beta=beta,
        dims=(N, 2),
        quadratic=True,
        describe={"kind": "laminate", "a": a.to_config(), "b": b.to_config(), "N": N},
    )


def _huber(r, mu):
    """C^1 regularization of r -> r for r >= 0; exact beyond mu, bias <= mu/2."""
    r = np.asarray(r, dtype=float)
    return np.where(r <= mu, r * r / (2.0 * mu), r - 0.5 * mu)


def make_norm_linear(c: StepProfile, N: int, d: int = 2) -> Integrand:
    """Linear-growth density c(y_1) |xi| with |.| the Frobenius norm."""

    def ev(y, xi):
        y = np.asarray(y, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return c(y[..., 0]) * np.sqrt(np.sum(xi * xi, axis=(-2, -1)))

    def gr(y, xi):
        y = np.asarray(y, dtype=float)
        xi = np.asarray(xi, dtype=float)
        norm = np.sqrt(np.sum(xi * xi, axis=(-2, -1)))
        safe = np.maximum(norm, 1e-300)
        return (c(y[..., 0]) / safe)[..., None, None] * xi

    def smoothed(mu):
        def ev_mu(y, xi):
            y = np.asarray(y, dtype=float)
            xi = np.asarray(xi, dtype=float)
            norm = np.sqrt(np.sum(xi * xi, axis=(-2, -1)))
            return c(y[..., 0]) * _huber(norm, mu)

        def gr_mu(y, xi):
            y = np.asarray(y, dtype=float)
            xi = np.asarray(xi, dtype=float)
            norm = np.sqrt(np.sum(xi * xi, axis=(-2, -1)))
            return (c(y[..., 0]) / np.maximum(norm, mu))[..., None, None] * xi

        return ev_mu, gr_mu

    return Integrand(
        eval=ev,
        grad_xi=gr,
        p=1,
        alpha=c.min_value(),
        beta=c.max_value(),
        dims=(N, d),
        lipschitz_L=c.max_value(),
        smoothed=smoothed,
        describe={"kind": "norm_linear", "c": c.to_config(), "N": N, "d": d},
    )


@dataclass(frozen=True)
class ExtendedIntegrand:
    """Density (y, s, xi) -> value for a base point s, with derived growth data.

    ``alpha`` and ``beta`` are growth constants of the extension itself; they
    are derived from the base integrand, not quoted from anywhere.  The
    optional Lipschitz fields are recorded for the ambient-space extension.
    """

    eval: Callable
    grad_xi: Callable
    p: float
    alpha: float
    beta: float
    dims: tuple[int, int]
    base: Integrand
    manifold: EmbeddedManifold
    quadratic: bool = False
    smoothed: Callable[[float], tuple[Callable, Callable]] | None = None
    s_lipschitz: float | None = None
    xi_lipschitz: float | None = None
    delta0: float | None = None

    def solver_forms(self, mu: float) -> tuple[Callable, Callable]:
        if self.smoothed is not None:
            return self.smoothed(mu)
        return self.eval, self.grad_xi


def make_fbar(f: Integrand, M: EmbeddedManifold) -> ExtendedIntegrand:
    """Extend f to non-tangent arguments at a base point on the manifold.

    The gradient argument is split into its tangent projection, fed to f, and
    the normal remainder, penalized by its p-th power.  On tangent arguments
    the extension coincides with f, and minimizing it over unconstrained
    fields reproduces the tangentially constrained minimum.
    """
    p = f.p

    def _split(s, xi):
        P = M.tangent_projector(np.asarray(s, dtype=float))
        xi = np.asarray(xi, dtype=float)
        tang = np.einsum("ab,...bn->...an", P, xi)
        return P, tang, xi - tang

    def ev(y, s, xi):
        _, tang, perp = _split(s, xi)
        pen = np.sum(perp * perp, axis=(-2, -1)) ** (p / 2.0)
        return f.eval(y, tang) + pen

    def gr(y, s, xi):
        P, tang, perp = _split(s, xi)
        gf = f.gradient(y, tang)
        out = np.einsum("ab,...bn->...an", P, gf)
        if p == 2:
            out = out + 2.0 * perp
        else:
            norm = np.sqrt(np.sum(perp * perp, axis=(-2, -1)))
            safe = np.maximum(norm, 1e-300)
            out = out + (p * norm ** (p - 1.0) / safe)[..., None, None] * perp
        return out

    smoothed = None
    if p == 1:

        def smoothed(mu):
            f_ev, f_gr = f.solver_forms(mu)

            def ev_mu(y, s, xi):
                _, tang, perp = _split(s, xi)
                norm = np.sqrt(np.sum(perp * perp, axis=(-2, -1)))
                return f_ev(y, tang) + _huber(norm, mu)

            def gr_mu(y, s, xi):
                P, tang, perp = _split(s, xi)
                out = np.einsum("ab,...bn->...an", P, f_gr(y, tang))
                norm = np.sqrt(np.sum(perp * perp, axis=(-2, -1)))
                return out + (1.0 / np.maximum(norm, mu))[..., None, None] * perp

            return ev_mu, gr_mu

    # Coercivity: splitting |xi|^p across the tangent and normal parts costs a
    # factor 2^(1-p); the penalty term carries constant 1.
    alpha_ext = min(f.alpha, 2.0 ** (1.0 - p) * min(f.alpha, 1.0))
    beta_ext = f.beta + 1.0
    return ExtendedIntegrand(
        eval=ev,
        grad_xi=gr,
        p=p,
        alpha=alpha_ext,
        beta=beta_ext,
        dims=f.dims,
        base=f,
        manifold=M,
        quadratic=bool(f.quadratic and p == 2),
        smoothed=smoothed,
    )


def make_g_extension(
    f: Integrand, M: EmbeddedManifold, delta0: float = 0.5
) -> ExtendedIntegrand:
    """Ambient-space extension of a linear-growth density.

    Defined for every s in R^d through a cutoff of the nearest-point
    projection: the gradient argument is projected onto the tangent space at
    the projected base point, scaled by the cutoff, fed to f, and the
    remainder is penalized by its norm.  Outside the cutoff support the value
    is simply ``f(y, 0) + |xi|``.  The recorded Lipschitz constants are safe
    upper bounds, checked by sampling in the test suite.
    """
    if f.p != 1:
        raise UnsupportedGrowth("ambient extension requires linear growth (p = 1)")
    if not (0.0 < delta0 <= M.tubular_radius):
        raise ValueError("delta0 must lie in (0, tubular_radius]")
    L = float(f.lipschitz_L)

    def _blend(s, xi):
        s = np.asarray(s, dtype=float)
        xi = np.asarray(xi, dtype=float)
        chi = M.cutoff(s, delta0)
        if chi == 0.0:
            return 0.0, None, np.zeros_like(xi)
        P = M.tangent_projector(M.project(s))
        return chi, P, chi * np.einsum("ab,...bn->...an", P, xi)

    def ev(y, s, xi):
        chi, _, proj = _blend(s, xi)
        rem = np.asarray(xi, dtype=float) - proj
        return f.eval(y, proj) + np.sqrt(np.sum(rem * rem, axis=(-2, -1)))

    def _pen_grad(chi, P, rem, scale):
        u = rem / scale[..., None, None]
        if chi == 0.0:
            return u
        return u - chi * np.einsum("ab,...bn->...an", P, u)

    def gr(y, s, xi):
        chi, P, proj = _blend(s, xi)
        rem = np.asarray(xi, dtype=float) - proj
        norm = np.sqrt(np.sum(rem * rem, axis=(-2, -1)))
        out = _pen_grad(chi, P, rem, np.maximum(norm, 1e-300))
        if chi != 0.0:
            gf = f.gradient(y, proj)
            out = out + chi * np.einsum("ab,...bn->...an", P, gf)
        return out

    def smoothed(mu):
        f_ev, f_gr = f.solver_forms(mu)

        def ev_mu(y, s, xi):
            chi, _, proj = _blend(s, xi)
            rem = np.asarray(xi, dtype=float) - proj
            norm = np.sqrt(np.sum(rem * rem, axis=(-2, -1)))
            return f_ev(y, proj) + _huber(norm, mu)

        def gr_mu(y, s, xi):
            chi, P, proj = _blend(s, xi)
            rem = np.asarray(xi, dtype=float) - proj
            norm = np.sqrt(np.sum(rem * rem, axis=(-2, -1)))
            out = _pen_grad(chi, P, rem, np.maximum(norm, mu))
            if chi != 0.0:
                out = out + chi * np.einsum("ab,...bn->...an", P, f_gr(y, proj))
            return out

        return ev_mu, gr_mu

    # Cutoff slope 7.5/delta0; the projector field along the nearest-point
    # projection is 2/(1 - 3 delta0/4)-Lipschitz on the cutoff support.
    proj_lip = 7.5 / delta0 + 2.0 / (1.0 - 0.75 * delta0)
    return ExtendedIntegrand(
        eval=ev,
        grad_xi=gr,
        p=1,
        alpha=min(f.alpha, 0.5 * min(f.alpha, 1.0)),
        beta=f.beta + 1.0,
        dims=f.dims,
        base=f,
        manifold=M,
        quadratic=False,
        smoothed=smoothed,
        s_lipschitz=(L + 1.0) * proj_lip,
        xi_lipschitz=L + 1.0,
        delta0=delta0,
    )


@dataclass
class HypothesisReport:
    """Worst-case residuals of the sampled structural checks."""

    samples: int
    periodicity_residual: float
    coercivity_margin: float
    growth_margin: float
    lipschitz_margin: float | None
    passed: bool = True

    def summary(self) -> str:
        lines = [
            f"samples: {self.samples}",
            f"periodicity residual: {self.periodicity_residual:.3e}",
            f"coercivity margin:    {self.coercivity_margin:.3e}",
            f"growth margin:        {self.growth_margin:.3e}",
        ]
        if self.lipschitz_margin is not None:
            lines.append(f"lipschitz margin:     {self.lipschitz_margin:.3e}")
        return "\n".join(lines)


def verify_hypotheses(f: Integrand, sample_count: int, seed: int) -> HypothesisReport:
    """Sampled check of periodicity, the growth sandwich and the Lipschitz bound.

    Deterministic for a given seed.  Raises ``HypothesisViolated`` with the
    worst offending (y, xi) pair if any declared property fails; otherwise
    returns the worst-case residuals.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    N, d = f.dims
    rng = np.random.default_rng(seed)
    y = rng.uniform(-3.0, 3.0, size=(sample_count, N))
    radii = rng.uniform(0.0, 10.0, size=sample_count)
    xi = rng.standard_normal((sample_count, d, N))
    xi_norm = np.maximum(np.sqrt(np.sum(xi * xi, axis=(-2, -1))), 1e-12)
    xi = xi * (radii / xi_norm)[:, None, None]

    vals = np.asarray(f.eval(y, xi), dtype=float)
    scale = 1.0 + np.abs(vals)

    per_res = 0.0
    per_worst = 0
    for i in range(N):
        shift = np.zeros(N)
        shift[i] = 1.0
        res = np.abs(np.asarray(f.eval(y + shift, xi)) - vals) / scale
        if float(res.max()) > per_res:
            per_res = float(res.max())
            per_worst = int(np.argmax(res))
    if per_res > 1e-9:
        raise HypothesisViolated(
            f"periodicity violated: relative residual {per_res:.3e}",
            sample=(y[per_worst], xi[per_worst]),
        )

    xi_p = np.sum(xi * xi, axis=(-2, -1)) ** (f.p / 2.0)
    lower_gap = f.alpha * xi_p - vals
    upper_gap = vals - f.beta * (1.0 + xi_p)
    tol = 1e-12 * scale
    if np.any(lower_gap > tol):
        worst = int(np.argmax(lower_gap))
        raise HypothesisViolated(
            f"coercivity violated: f = {vals[worst]:.6g} < "
            f"alpha |xi|^p = {f.alpha * xi_p[worst]:.6g}",
            sample=(y[worst], xi[worst]),
        )
    if np.any(upper_gap > tol):
        worst = int(np.argmax(upper_gap))
        raise HypothesisViolated(
            f"growth violated: f = {vals[worst]:.6g} > "
            f"beta (1 + |xi|^p) = {f.beta * (1 + xi_p[worst]):.6g}",
            sample=(y[worst], xi[worst]),
        )

    lip_margin = None
    if f.lipschitz_L is not None:
        xi2 = xi + rng.standard_normal(xi.shape) * rng.uniform(
            0.0, 2.0, size=(sample_count, 1, 1)
        )
        diff = np.abs(np.asarray(f.eval(y, xi2)) - vals)
        dist = np.sqrt(np.sum((xi2 - xi) ** 2, axis=(-2, -1)))
        excess = diff - f.lipschitz_L * dist
        lip_margin = float(np.max(excess / (1.0 + diff)))
        if lip_margin > 1e-9:
            worst = int(np.argmax(excess))
            raise HypothesisViolated(
                f"xi-Lipschitz bound violated by {excess[worst]:.3e}",
                sample=(y[worst], xi[worst]),
            )

    return HypothesisReport(
        samples=sample_count,
        periodicity_residual=per_res,
        coercivity_margin=float(np.max(lower_gap / scale)),
        growth_margin=float(np.max(upper_gap / scale)),
        lipschitz_margin=lip_margin,
    )


def verify_extension_bounds(
    ext: ExtendedIntegrand, sample_count: int, seed: int
) -> HypothesisReport:
    """Sampled check that an extension restricts to its base on tangent data,
    satisfies its derived growth sandwich, and honors declared Lipschitz bounds.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    M = ext.manifold
    N, d = ext.dims
    rng = np.random.default_rng(seed)

    restriction = 0.0
    growth_lo = 0.0
    growth_hi = 0.0
    lip_s = 0.0
    lip_xi = 0.0
    for _ in range(sample_count):
        y = rng.uniform(0.0, 1.0, size=N)
        s = M.random_point(rng)
        coeffs = rng.uniform(-3.0, 3.0, size=(M.intrinsic_dim, N))
        xi_t = M.tangent_from_coeffs(s, coeffs)
        v_ext = float(ext.eval(y, s, xi_t))
        v_base = float(ext.base.eval(y, xi_t))
        restriction = max(restriction, abs(v_ext - v_base))

        xi = rng.standard_normal((d, N)) * rng.uniform(0.0, 5.0)
        v = float(ext.eval(y, s, xi))
        xi_p = float(np.sum(xi * xi) ** (ext.p / 2.0))
        growth_lo = max(growth_lo, ext.alpha * xi_p - v)
        growth_hi = max(growth_hi, v - ext.beta * (1.0 + xi_p))

        if ext.s_lipschitz is not None:
            s2 = s + rng.standard_normal(d) * rng.uniform(0.0, 0.5)
            dv = abs(float(ext.eval(y, s2, xi)) - v)
            bound = ext.s_lipschitz * np.linalg.norm(s2 - s) * np.sqrt(np.sum(xi * xi))
            lip_s = max(lip_s, dv - bound)
        if ext.xi_lipschitz is not None:
            xi2 = xi + rng.standard_normal((d, N)) * rng.uniform(0.0, 2.0)
            dv = abs(float(ext.eval(y, s, xi2)) - v)
            bound = ext.xi_lipschitz * np.linalg.norm(xi2 - xi)
            lip_xi = max(lip_xi, dv - bound)

    if restriction > 1e-12:
        raise HypothesisViolated(
            f"extension does not restrict to its base: residual {restriction:.3e}"
        )
    if growth_lo > 1e-12 or growth_hi > 1e-12:
        raise HypothesisViolated(
            f"extension growth sandwich violated (lo {growth_lo:.3e}, hi {growth_hi:.3e})"
        )
    if max(lip_s, lip_xi) > 1e-9:
        raise HypothesisViolated(
            f"extension Lipschitz bound violated (s {lip_s:.3e}, xi {lip_xi:.3e})"
        )
    return HypothesisReport(
        samples=sample_count,
        periodicity_residual=restriction,
        coercivity_margin=growth_lo,
        growth_margin=growth_hi,
        lipschitz_margin=max(lip_s, lip_xi),
    )


def integrand_from_config(cfg: dict) -> Integrand:
    """Build an integrand from its JSON description."""
    from .errors import ConfigError

    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("integrand config must be an object with a 'kind' key")
    kind = cfg["kind"]

    def profile(key):
        sub = cfg.get(key)
        if not isinstance(sub, dict):
            raise ConfigError(f"integrand config needs a profile object {key!r}")
        extra = set(sub) - {"breaks", "values"}
        if extra:
            raise ConfigError(f"unknown key {sorted(extra)[0]!r} in profile {key!r}")
        return StepProfile(tuple(sub.get("breaks", ())), tuple(sub["values"]))

    if kind == "laminate":
        extra = set(cfg) - {"kind", "a", "b", "N"}
        if extra:
            raise ConfigError(f"unknown key {sorted(extra)[0]!r} in integrand config")
        return make_laminate_quadratic(profile("a"), profile("b"), int(cfg.get("N", 1)))
    if kind == "isotropic_quadratic":
        extra = set(cfg) - {"kind", "N", "d"}
        if extra:
            raise ConfigError(f"unknown key {sorted(extra)[0]!r} in integrand config")
        return make_isotropic_quadratic(int(cfg.get("N", 1)), int(cfg.get("d", 2)))
    if kind == "norm_linear":
        extra = set(cfg) - {"kind", "c", "N", "d"}
        if extra:
            raise ConfigError(f"unknown key {sorted(extra)[0]!r} in integrand config")
        return make_norm_linear(profile("c"), int(cfg.get("N", 1)), int(cfg.get("d", 2)))
    raise ConfigError(f"unknown integrand kind {kind!r}")
