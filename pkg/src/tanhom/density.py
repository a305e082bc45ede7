"""Homogenized-density evaluation, closed-form references and verifiers.

``tf_hom`` drives the cell solver along a sequence of cube sizes and reports
the last value together with its convergence trace.  For laminate densities
on the circle the effective coefficients are known exactly (harmonic mean in
the oscillation direction, arithmetic mean across it), which provides the
independent reference used throughout the test suite.  Density tables sample
the homogenized density on an angle x coefficient grid and interpolate
multilinearly; coefficients outside the table clamp with a warning count.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .cell import (
    DIRICHLET,
    PERIODIC,
    CellProblemSpec,
    solve_cell,
    solve_cell_unconstrained,
)
from .errors import GrowthViolation, NotTangent, ShapeMismatch
from .grid import UniformGrid
from .integrand import Integrand, StepProfile, make_fbar, make_g_extension
from .manifold import EmbeddedManifold, Sphere, circle_point


@dataclass(frozen=True)
class TfOptions:
    """Options threaded from the density drivers into the cell solver."""

    t_list: tuple[int, ...] = (1, 2, 4)
    n: int = 16
    boundary: str = DIRICHLET
    rel_tol: float = 5e-3
    solver: str = "auto"
    tol_grad: float = 1e-8
    max_iters: int | None = None
    huber_mu: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "t_list", tuple(int(t) for t in self.t_list))
        if not self.t_list:
            raise ValueError("t_list must not be empty")

    def cell_spec(self, M, s, xi, t) -> CellProblemSpec:
        return CellProblemSpec(
            manifold=M,
            s=s,
            xi=xi,
            t=t,
            nodes_per_period=self.n,
            boundary=self.boundary,
            solver=self.solver,
            tol_grad=self.tol_grad,
            max_iters=self.max_iters,
            huber_mu=self.huber_mu,
        )


@dataclass
class TfTraceEntry:
    t: int
    value: float
    iterations: int
    converged: bool


@dataclass
class TfHomResult:
    value: float
    trace: list[TfTraceEntry]
    rel_change: float
    converged: bool
    solver_converged: bool

    @property
    def values(self) -> list[float]:
        return [e.value for e in self.trace]


def tf_hom(
    f: Integrand,
    M: EmbeddedManifold,
    s,
    xi,
    opts: TfOptions | None = None,
) -> TfHomResult:
    """Estimate the tangentially homogenized density at (s, xi).

    Runs the cell solver for every cube size in ``opts.t_list`` and returns
    the last value.  If the relative change between the last two sizes
    exceeds ``rel_tol`` the result is flagged unconverged but still returned.
    No extrapolation is applied; a flat trace is the expected signature for
    the convex shipped examples.
    """
    opts = opts or TfOptions()
    trace: list[TfTraceEntry] = []
    solver_ok = True
    for t in opts.t_list:
        res = solve_cell(f, opts.cell_spec(M, s, xi, t))
        solver_ok = solver_ok and res.converged
        trace.append(TfTraceEntry(t, res.value, res.iterations, res.converged))
    if len(trace) >= 2:
        rel = abs(trace[-1].value - trace[-2].value) / (1.0 + abs(trace[-1].value))
    else:
        rel = 0.0
    return TfHomResult(
        value=trace[-1].value,
        trace=trace,
        rel_change=rel,
        converged=rel <= opts.rel_tol,
        solver_converged=solver_ok,
    )


# -- closed-form laminate reference ------------------------------------------


def _merged_weight(a: StepProfile, b: StepProfile, s1sq: float, s2sq: float):
    """Piecewise-constant weight a(t) s2^2 + b(t) s1^2 with exact intervals."""
    edges = np.unique(np.concatenate(([0.0], a.breakpoints, b.breakpoints, [1.0])))
    mids = 0.5 * (edges[:-1] + edges[1:])
    vals = a(mids) * s2sq + b(mids) * s1sq
    lengths = np.diff(edges)
    return vals, lengths


def laminate_oracle(a: StepProfile, b: StepProfile, s, xi) -> float:
    """Exact homogenized value for the circle-valued laminate.

    The weight seen along the oscillation direction is the piecewise-constant
    ``a(t) s2^2 + b(t) s1^2``; the first gradient column feels its harmonic
    mean, every other column its arithmetic mean.  Integrals are evaluated in
    closed form from the step profiles.
    """
    M = Sphere(2)
    s = M.check_point(s)
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 2 or xi.shape[0] != 2:
        raise ShapeMismatch(f"xi must be a (2, N) matrix, got {xi.shape}")
    if M.tangency_residual(s, xi) > 1e-9:
        raise NotTangent("laminate reference needs tangent columns")
    vals, lengths = _merged_weight(a, b, s[0] ** 2, s[1] ** 2)
    harmonic = 1.0 / float(np.dot(lengths, 1.0 / vals))
    arithmetic = float(np.dot(lengths, vals))
    col_sq = np.sum(xi * xi, axis=0)
    weights = np.full(xi.shape[1], arithmetic)
    weights[0] = harmonic
    return float(np.dot(weights, col_sq))


# -- verifiers ----------------------------------------------------------------


@dataclass
class EquivalenceEntry:
    s: np.ndarray
    xi: np.ndarray
    constrained: float
    unconstrained: float
    rel_gap: float


@dataclass
class EquivalenceReport:
    extension: str
    entries: list[EquivalenceEntry]

    @property
    def max_rel_gap(self) -> float:
        return max((e.rel_gap for e in self.entries), default=0.0)


def verify_equivalence_fbar(
    f: Integrand,
    M: EmbeddedManifold,
    samples: Iterable[tuple[np.ndarray, np.ndarray]],
    opts: TfOptions | None = None,
    delta0: float = 0.5,
) -> EquivalenceReport:
    """Compare tangentially constrained and extended unconstrained cell minima.

    For each sampled (s, xi) the constrained value comes from ``tf_hom`` and
    the unconstrained one from minimizing the matching extension over full
    ambient correctors on the same grids.  Superlinear growth uses the
    tangent-projection extension; linear growth uses the ambient cutoff
    extension (solved through its smoothed forms, evaluated unsmoothed).
    """
    opts = opts or TfOptions()
    if f.p == 1:
        ext = make_g_extension(f, M, delta0)
        ext_name = "ambient_cutoff"
    else:
        ext = make_fbar(f, M)
        ext_name = "tangent_projection"

    entries = []
    for s, xi in samples:
        constrained = tf_hom(f, M, s, xi, opts).value
        value_u = None
        for t in opts.t_list:
            value_u = solve_cell_unconstrained(ext, opts.cell_spec(M, s, xi, t)).value
        rel = abs(constrained - value_u) / (1.0 + abs(constrained))
        entries.append(
            EquivalenceEntry(np.asarray(s), np.asarray(xi), constrained, value_u, rel)
        )
    return EquivalenceReport(extension=ext_name, entries=entries)


@dataclass
class QuasiconvexityReport:
    s: np.ndarray
    xi: np.ndarray
    reference: float
    residuals: np.ndarray
    tolerance: float

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance


def check_tangential_quasiconvexity(
    f: Integrand,
    M: EmbeddedManifold,
    s,
    xi,
    trial_count: int,
    seed: int,
    opts: TfOptions | None = None,
    trial_grid: int = 4,
    tolerance_scale: float = 1e-3,
) -> QuasiconvexityReport:
    """Jensen-type test of the homogenized density against trial fields.

    Draws compactly supported piecewise-multilinear tangent-valued trials on
    the unit cube (interior nodal coordinates uniform in [-1, 1]), evaluates
    the density at the trial's element-center gradients, and reports the
    residual reference - average.  Nonpositive residuals (up to solver noise)
    certify the inequality; the zero trial gives residual exactly zero.
    """
    opts = opts or TfOptions()
    s = M.check_point(s)
    xi = np.asarray(xi, dtype=float)
    m = M.intrinsic_dim
    N = xi.shape[1]
    basis = M.tangent_basis(s)
    grid = UniformGrid(N, trial_grid, 1.0 / trial_grid, periodic=False)
    rng = np.random.default_rng(seed)

    cache: dict[bytes, float] = {}

    def density_at(xi_arg: np.ndarray) -> float:
        key = xi_arg.tobytes()
        if key not in cache:
            cache[key] = tf_hom(f, M, s, xi_arg, opts).value
        return cache[key]

    reference = density_at(xi)
    residuals = np.zeros(trial_count)
    interior = (slice(None),) + grid.interior()
    for trial in range(trial_count):
        V = np.zeros((m,) + grid.node_shape)
        if trial > 0:  # keep the zero trial as an exact identity check
            V[interior] = rng.uniform(-1.0, 1.0, size=V[interior].shape)
        G = grid.center_gradient(V)
        amb = xi + np.einsum("md,mn...->...dn", basis, G)
        flat = amb.reshape(-1, *xi.shape)
        avg = float(np.mean([density_at(entry) for entry in flat]))
        residuals[trial] = reference - avg
    tol = tolerance_scale * (1.0 + float(np.sum(xi * xi)))
    return QuasiconvexityReport(s, xi, reference, residuals, tol)


@dataclass
class GrowthLipschitzReport:
    samples: int
    fitted_constant: float
    ratios: np.ndarray
    sandwich_lower_margin: float
    sandwich_upper_margin: float


def check_growth_lipschitz(
    f: Integrand,
    M: EmbeddedManifold,
    sample_count: int,
    seed: int,
    opts: TfOptions | None = None,
    coeff_radius: float = 5.0,
) -> GrowthLipschitzReport:
    """Sandwich and Lipschitz-in-xi diagnostics of the homogenized density.

    Every sampled value must satisfy alpha |xi|^p <= value <= beta (1+|xi|^p)
    exactly as declared; violations raise ``GrowthViolation`` since they can
    only come from a solver defect.  For pairs at a shared base point the
    ratio |dv| / ((1 + |xi|^{p-1} + |xi'|^{p-1}) |xi - xi'|) is collected and
    its maximum reported as the fitted constant.  Samples are drawn one at a
    time, so a longer run extends a shorter one with the same seed.
    """
    opts = opts or TfOptions()
    rng = np.random.default_rng(seed)
    m = M.intrinsic_dim
    N, d = f.dims

    ratios = []
    lower_margin = -np.inf
    upper_margin = -np.inf

    def sandwich(v: float, norm: float, s, xi) -> tuple[float, float]:
        lo = f.alpha * norm**f.p - v
        hi = v - f.beta * (1.0 + norm**f.p)
        if lo > 0.0 or hi > 0.0:
            raise GrowthViolation(
                f"homogenized value {v:.6g} escapes the sandwich at |xi| = {norm:.4g}",
                sample=(s, xi),
            )
        return lo, hi

    for _ in range(sample_count):
        s = M.random_point(rng)
        z = rng.standard_normal((m, N))
        z *= rng.uniform(0.0, coeff_radius) / max(float(np.linalg.norm(z)), 1e-12)
        direction = rng.standard_normal((m, N))
        direction /= max(float(np.linalg.norm(direction)), 1e-12)
        radius = 10.0 ** rng.uniform(-3.0, np.log10(2.0))
        z2 = z + radius * direction

        xi = M.tangent_from_coeffs(s, z)
        xi2 = M.tangent_from_coeffs(s, z2)
        v1 = tf_hom(f, M, s, xi, opts).value
        v2 = tf_hom(f, M, s, xi2, opts).value

        n1 = float(np.linalg.norm(xi))
        n2 = float(np.linalg.norm(xi2))
        lo1, hi1 = sandwich(v1, n1, s, xi)
        lo2, hi2 = sandwich(v2, n2, s, xi2)
        lower_margin = max(lower_margin, lo1, lo2)
        upper_margin = max(upper_margin, hi1, hi2)

        dist = float(np.linalg.norm(xi - xi2))
        if dist > 0.0:
            denom = (1.0 + n1 ** (f.p - 1.0) + n2 ** (f.p - 1.0)) * dist
            ratios.append(abs(v1 - v2) / denom)

    ratios = np.asarray(ratios)
    return GrowthLipschitzReport(
        samples=sample_count,
        fitted_constant=float(np.max(ratios)) if ratios.size else 0.0,
        ratios=ratios,
        sandwich_lower_margin=lower_margin,
        sandwich_upper_margin=upper_margin,
    )


# -- density tables -----------------------------------------------------------


@dataclass(frozen=True)
class CoefficientLattice:
    """Uniform lattice of tangent coefficients applied to every column."""

    minimum: float
    maximum: float
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("lattice count must be nonnegative")
        if self.count > 1 and self.maximum <= self.minimum:
            raise ValueError("lattice needs maximum > minimum")

    def values(self) -> np.ndarray:
        return np.linspace(self.minimum, self.maximum, self.count)


@dataclass
class DensityTable:
    """Homogenized-density samples on an angle x coefficient grid of the circle.

    ``values`` has shape (len(thetas), *[len(axis) for each gradient column]).
    Interpolation is multilinear, periodic in the angle, clamping in the
    coefficients.  ``rel_changes`` stores the final trace change per entry.
    """

    thetas: np.ndarray
    coeff_axes: tuple[np.ndarray, ...]
    values: np.ndarray
    converged: np.ndarray
    rel_changes: np.ndarray
    p: float
    alpha: float
    beta: float
    integrand_config: dict = field(default_factory=dict)
    manifold_config: dict = field(default_factory=dict)
    t_list: tuple[int, ...] = (1,)
    nodes_per_period: int = 16
    boundary: str = PERIODIC
    entry_errors: list[str] = field(default_factory=list)

    @property
    def n_columns(self) -> int:
        return len(self.coeff_axes)

    def coeff_range(self) -> list[tuple[float, float]]:
        return [(float(ax[0]), float(ax[-1])) for ax in self.coeff_axes]

    def interpolate(self, theta, coeffs, count_clamped: bool = False):
        """Multilinear lookup at angles ``theta`` and coefficients ``coeffs``.

        ``coeffs`` has shape (..., n_columns); out-of-range coefficients are
        clamped to the table edge.  With ``count_clamped`` the number of
        clamped queries is returned alongside the values.
        """
        theta = np.asarray(theta, dtype=float)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != self.n_columns:
            raise ShapeMismatch(
                f"expected {self.n_columns} coefficient columns, got {coeffs.shape[-1]}"
            )
        S = len(self.thetas)
        step = 2.0 * np.pi / S
        pos = np.mod(theta, 2.0 * np.pi) / step
        i0 = np.floor(pos).astype(int) % S
        w_theta = pos - np.floor(pos)

        out_shape = np.broadcast(theta, coeffs[..., 0]).shape
        idx_lo: list[np.ndarray] = []
        weights: list[np.ndarray] = []
        clamped = np.zeros(out_shape, dtype=bool)
        for c, axis in enumerate(self.coeff_axes):
            q = coeffs[..., c]
            clamped |= (q < axis[0]) | (q > axis[-1])
            q = np.clip(q, axis[0], axis[-1])
            j = np.clip(np.searchsorted(axis, q, side="right") - 1, 0, max(len(axis) - 2, 0))
            if len(axis) > 1:
                w = (q - axis[j]) / (axis[j + 1] - axis[j])
            else:
                w = np.zeros_like(q)
            idx_lo.append(j)
            weights.append(w)

        out = np.zeros(out_shape)
        for corner in itertools.product((0, 1), repeat=1 + self.n_columns):
            w_total = np.where(corner[0], w_theta, 1.0 - w_theta)
            ti = (i0 + corner[0]) % S
            gather = [ti]
            for c in range(self.n_columns):
                axis_len = len(self.coeff_axes[c])
                j = np.minimum(idx_lo[c] + corner[1 + c], axis_len - 1)
                gather.append(j)
                w_total = w_total * np.where(
                    corner[1 + c], weights[c], 1.0 - weights[c]
                )
            out = out + w_total * self.values[tuple(gather)]
        if count_clamped:
            return out, int(np.count_nonzero(clamped))
        return out

    def check_sandwich(self) -> tuple[bool, float, float]:
        """Exact sandwich check on every finite entry.

        Returns (ok, worst lower margin, worst upper margin); positive margins
        mean a violation.
        """
        grids = np.meshgrid(*self.coeff_axes, indexing="ij") if self.coeff_axes else []
        if grids:
            norm = np.sqrt(np.sum([g**2 for g in grids], axis=0))
        else:
            norm = np.zeros(())
        norm_p = norm**self.p
        finite = np.isfinite(self.values)
        lo = self.alpha * norm_p[None, ...] - self.values
        hi = self.values - self.beta * (1.0 + norm_p)[None, ...]
        lo_m = float(np.max(lo[finite])) if finite.any() else -np.inf
        hi_m = float(np.max(hi[finite])) if finite.any() else -np.inf
        return (lo_m <= 0.0 and hi_m <= 0.0), lo_m, hi_m

    # -- serialization --------------------------------------------------------

    def csv_rows(self):
        header = ["s0", "s1"]
        header += [f"z{c}" for c in range(self.n_columns)]
        header += ["value", "converged"]
        yield header
        shape = self.values.shape[1:]
        for i, theta in enumerate(self.thetas):
            point = circle_point(theta)
            for idx in np.ndindex(shape) if shape else [()]:
                row = [f"{point[0]:.17g}", f"{point[1]:.17g}"]
                row += [f"{self.coeff_axes[c][idx[c]]:.17g}" for c in range(len(idx))]
                row += [
                    f"{self.values[(i,) + idx]:.17g}",
                    "1" if self.converged[(i,) + idx] else "0",
                ]
                yield row

    def metadata(self) -> dict:
        return {
            "s_count": int(len(self.thetas)),
            "coeff_axes": [[float(v) for v in ax] for ax in self.coeff_axes],
            "p": self.p,
            "alpha": self.alpha,
            "beta": self.beta,
            "integrand": self.integrand_config,
            "manifold": self.manifold_config,
            "t_list": list(self.t_list),
            "nodes_per_period": self.nodes_per_period,
            "boundary": self.boundary,
            "max_rel_change": float(np.nanmax(self.rel_changes))
            if self.rel_changes.size
            else 0.0,
            "entry_errors": self.entry_errors,
        }

    def save(self, csv_path, json_path) -> None:
        import csv as _csv
        import json as _json

        with open(csv_path, "w", newline="") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            for row in self.csv_rows():
                writer.writerow(row)
        with open(json_path, "w") as fh:
            _json.dump(self.metadata(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, csv_path, json_path) -> "DensityTable":
        import csv as _csv
        import json as _json

        with open(json_path) as fh:
            meta = _json.load(fh)
        axes = tuple(np.asarray(ax, dtype=float) for ax in meta["coeff_axes"])
        s_count = int(meta["s_count"])
        shape = (s_count,) + tuple(len(ax) for ax in axes)
        values = np.full(shape, np.nan)
        converged = np.zeros(shape, dtype=bool)
        with open(csv_path, newline="") as fh:
            reader = _csv.reader(fh)
            next(reader)
            flat_vals = []
            flat_conv = []
            for row in reader:
                flat_vals.append(float(row[-2]))
                flat_conv.append(row[-1] == "1")
        values.flat[: len(flat_vals)] = flat_vals
        converged.flat[: len(flat_conv)] = flat_conv
        thetas = 2.0 * np.pi * np.arange(s_count) / s_count
        return cls(
            thetas=thetas,
            coeff_axes=axes,
            values=values,
            converged=converged,
            rel_changes=np.zeros(shape),
            p=float(meta["p"]),
            alpha=float(meta["alpha"]),
            beta=float(meta["beta"]),
            integrand_config=meta.get("integrand", {}),
            manifold_config=meta.get("manifold", {}),
            t_list=tuple(meta.get("t_list", [1])),
            nodes_per_period=int(meta.get("nodes_per_period", 16)),
            boundary=meta.get("boundary", PERIODIC),
            entry_errors=list(meta.get("entry_errors", [])),
        )


def build_density_table(
    f: Integrand,
    M: EmbeddedManifold,
    s_count: int,
    lattice: CoefficientLattice,
    opts: TfOptions | None = None,
    workers: int = 1,
) -> DensityTable:
    """Sample the homogenized density on a uniform angle x coefficient grid.

    Entries are independent ``tf_hom`` calls in a deterministic order; a
    worker pool only changes wall time, never content.  Per-entry failures
    are recorded (value NaN, converged False) without aborting the sweep.
    """
    if not isinstance(M, Sphere) or M.ambient_dim != 2:
        raise ValueError("density tables are defined on the circle S^1")
    if s_count < 1:
        raise ValueError("need at least one angle")
    opts = opts or TfOptions()
    N, d = f.dims

    thetas = 2.0 * np.pi * np.arange(s_count) / s_count
    axis = lattice.values()
    axes = tuple(axis.copy() for _ in range(N))
    shape = (s_count,) + (len(axis),) * N
    values = np.full(shape, np.nan)
    converged = np.zeros(shape, dtype=bool)
    rel_changes = np.full(shape, np.nan)
    errors: list[str] = []

    tasks = [
        (i, idx) for i in range(s_count) for idx in np.ndindex(shape[1:])
    ]

    def run(task):
        i, idx = task
        s = circle_point(thetas[i])
        coeffs = np.array([[axes[c][idx[c]] for c in range(N)]])
        xi = M.tangent_from_coeffs(s, coeffs)
        return tf_hom(f, M, s, xi, opts)

    def store(task, outcome):
        i, idx = task
        if isinstance(outcome, Exception):
            errors.append(f"entry theta_index={i} idx={idx}: {outcome}")
            return
        values[(i,) + idx] = outcome.value
        converged[(i,) + idx] = outcome.converged and outcome.solver_converged
        rel_changes[(i,) + idx] = outcome.rel_change

    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(
                pool.map(lambda tk: _capture(run, tk), tasks)
            )
        for task, outcome in zip(tasks, outcomes):
            store(task, outcome)
    else:
        for task in tasks:
            store(task, _capture(run, task))

    return DensityTable(
        thetas=thetas,
        coeff_axes=axes,
        values=values,
        converged=converged,
        rel_changes=rel_changes,
        p=f.p,
        alpha=f.alpha,
        beta=f.beta,
        integrand_config=dict(f.describe),
        manifold_config={"kind": "sphere", "d": 2},
        t_list=opts.t_list,
        nodes_per_period=opts.n,
        boundary=opts.boundary,
        entry_errors=errors,
    )


def _capture(fn, arg):
    try:
        return fn(arg)
    except Exception as exc:  # recorded per entry, sweep continues
        return exc
