"""Steady and time-dependent solvers for the complement-valued boundary problems.

Dirichlet problems prescribe the solution on the whole complement of the
domain; the solver eliminates the complement through the operator splitting
and solves a symmetric positive definite system on the interior nodes.

Neumann problems prescribe the operator value on the complement.  Their weak
form integrates test functions over the whole line, so the discrete unknowns
extend onto an exterior collar of lattice nodes; the bilinear form is a graph
Laplacian over interior-plus-collar nodes, which makes the interior mass an
exactly conserved quantity in the reflecting case.

Time stepping is the implicit Euler scheme with per-step time averages of the
data; the step matrix is constant, so transient runs factorize it once and
back-substitute (a per-step iterative solve at 1e-10 would let conservation
drift across hundreds of steps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lu_factor, lu_solve, toeplitz
from scipy.sparse.linalg import LinearOperator, cg

from .operators import (
    DiscreteOperator,
    ExteriorData,
    Grid1D,
    OperatorSpec,
    _cell_weights,
    assemble,
    check_growth,
)
from .registry import exterior_indicator, exterior_one

__all__ = [
    "SolverError",
    "DirichletProblem",
    "NeumannProblem",
    "SolveReport",
    "FluxField",
    "solve_steady_dirichlet",
    "escape_probability",
    "step_implicit",
    "solve_transient",
    "flux_field",
    "dirichlet_uniqueness_check",
]

_GAUSS4_NODES = np.array([-0.8611363115940526, -0.3399810435848563,
                          0.3399810435848563, 0.8611363115940526])
_GAUSS4_WEIGHTS = np.array([0.3478548451374538, 0.6521451548625461,
                            0.6521451548625461, 0.3478548451374538])


class SolverError(RuntimeError):
    """Linear solve failed; carries the achieved residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class DirichletProblem:
    """Steady or transient problem with the solution prescribed outside.

    ``f`` is a forcing callable ``f(x_nodes, t) -> array`` or None; ``p0``
    holds initial interior values for transient runs.
    """

    opr: DiscreteOperator
    g: ExteriorData
    f: Callable[..., np.ndarray] | None = None
    p0: np.ndarray | None = None
    g_time_dependent: bool = False

    def __post_init__(self):
        chk = check_growth(self.g, self.opr.spec, self.opr.grid.width)
        if not chk.passed:
            raise ValueError(
                f"complement data violates its growth envelope at radius "
                f"{chk.witness_radius:g}"
            )
        if self.p0 is not None and len(self.p0) != self.opr.size:
            raise ValueError("initial values do not match the grid")


@dataclass(frozen=True)
class NeumannProblem:
    """Transient problem with the operator value prescribed outside.

    ``g_ext`` gives the prescribed operator values on the complement
    (None or identically zero means reflecting).  Unknowns extend onto an
    exterior collar of ``collar_factor`` domain-widths per side.
    """

    opr: DiscreteOperator
    g_ext: ExteriorData | None = None
    f: Callable[..., np.ndarray] | None = None
    p0: np.ndarray | None = None
    collar_factor: float = 1.0
    g_time_dependent: bool = False

    @property
    def reflecting(self) -> bool:
        return self.g_ext is None

    def __post_init__(self):
        if self.p0 is not None and len(self.p0) != self.opr.size:
            raise ValueError("initial values do not match the grid")
        if self.collar_factor <= 0:
            raise ValueError("collar factor must be positive")


@dataclass
class SolveReport:
    """Solution values plus residual, conservation, and energy diagnostics."""

    solution: np.ndarray
    residual_norm: float
    iterations: int
    mass_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    energy_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    seminorm_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    trajectory: np.ndarray | None = None
    collar_positions: np.ndarray | None = None
    collar_values: np.ndarray | None = None


def _forcing_vector(f, nodes: np.ndarray, t: float) -> np.ndarray:
    if f is None:
        return np.zeros_like(nodes)
    return np.asarray(f(nodes, t), dtype=float)


def _steady_system(opr: DiscreteOperator) -> np.ndarray:
    """The steady matrix diag(tail) - A (definite; sign follows the kernel)."""
    S = -opr.interior_matrix.copy()
    S[np.diag_indices_from(S)] += opr.diagonal_tail
    return S


def _cg_solve(S: np.ndarray, rhs: np.ndarray, rtol: float = 1e-10
              ) -> tuple[np.ndarray, int, float]:
    """Jacobi-preconditioned CG; the system is negated if the kernel
    coefficient made it negative definite."""
    sign = 1.0 if S[0, 0] > 0 else -1.0
    Ssol = sign * S
    bsol = sign * rhs
    inv_diag = 1.0 / np.diag(Ssol)
    M = LinearOperator(S.shape, matvec=lambda v: inv_diag * v)
    count = {"n": 0}

    def cb(_):
        count["n"] += 1

    x, info = cg(Ssol, bsol, rtol=rtol, atol=0.0, maxiter=10 * S.shape[0],
                 M=M, callback=cb)
    scale = np.linalg.norm(rhs)
    resid = np.linalg.norm(S @ x - rhs) / (scale if scale > 0 else 1.0)
    if info != 0:
        raise SolverError(
            f"conjugate gradients did not converge within {10 * S.shape[0]} "
            f"iterations (relative residual {resid:.3e})",
            residual=resid,
        )
    return x, count["n"], resid


def solve_steady_dirichlet(prob: DirichletProblem, rtol: float = 1e-10
                           ) -> SolveReport:
    """Solve (diag(tail) - A) p = source(g) + f on the interior nodes."""
    opr = prob.opr
    S = _steady_system(opr)
    nodes = opr.grid.nodes if isinstance(opr.grid, Grid1D) else None
    rhs = opr.source_builder(prob.g, 0.0)
    if prob.f is not None:
        if nodes is None:
            raise ValueError("forcing callables are supported on 1D grids")
        rhs = rhs + _forcing_vector(prob.f, nodes, 0.0)
    x, iters, resid = _cg_solve(S, rhs, rtol)
    return SolveReport(solution=x, residual_norm=resid, iterations=iters)


def escape_probability(grid: Grid1D, spec: OperatorSpec,
                       H: Sequence[tuple[float, float]] | tuple[float, float]
                       ) -> SolveReport:
    """Probability of landing in H on first exit: steady solve with g = 1_H."""
    cells = [H] if np.isscalar(H[0]) else list(H)
    for lo, hi in cells:
        if not lo < hi:
            raise ValueError(f"empty escape cell ({lo}, {hi})")
        if max(lo, grid.a) < min(hi, grid.b):
            raise ValueError(
                f"escape cell ({lo}, {hi}) overlaps the domain "
                f"({grid.a}, {grid.b})"
            )
    parts = [exterior_indicator(lo, hi) for lo, hi in cells]

    def ev(point, t):
        return sum(p(point, t) for p in parts)

    pts = tuple(q for p in parts for q in p.breakpoints)
    g = ExteriorData(ev, "polynomial", breakpoints=pts)
    opr = assemble(grid, spec)
    return solve_steady_dirichlet(DirichletProblem(opr, g))


def _factorize(M: np.ndarray):
    """Cholesky when positive definite, LU otherwise."""
    try:
        c = cho_factor(M)
        return lambda b: cho_solve(c, b)
    except np.linalg.LinAlgError:
        pass
    except Exception:
        pass
    lu = lu_factor(M)
    return lambda b: lu_solve(lu, b)


def step_implicit(opr: DiscreteOperator, prev: np.ndarray, tau: float,
                  f_k: np.ndarray | None = None,
                  source_k: np.ndarray | None = None,
                  tau_cap: float | None = 0.5) -> np.ndarray:
    """One implicit Euler step of the Dirichlet evolution.

    Solves ``(I/tau + diag(tail) - A) p = prev/tau + f_k + source_k`` where
    ``source_k`` is the complement-data source averaged over the step.  The
    default cap on tau is a stand-in for the stability threshold of the
    underlying estimate; pass ``tau_cap=None`` to lift it (e.g. for the
    large-tau steady-state limit).
    """
    if tau <= 0:
        raise ValueError(f"time step must be positive, got {tau}")
    if tau_cap is not None and tau > tau_cap:
        raise ValueError(
            f"time step {tau} exceeds the configured cap {tau_cap}; "
            "pass tau_cap=None to override"
        )
    prev = np.asarray(prev, dtype=float)
    M = _steady_system(opr)
    M[np.diag_indices_from(M)] += 1.0 / tau
    rhs = prev / tau
    if f_k is not None:
        rhs = rhs + f_k
    if source_k is not None:
        rhs = rhs + source_k
    return _factorize(M)(rhs)


def _time_average_forcing(f, nodes: np.ndarray, t0: float, t1: float
                          ) -> np.ndarray:
    """(1/tau) int_{t0}^{t1} f dt by 4-point Gauss-Legendre."""
    if f is None:
        return np.zeros_like(nodes)
    mid, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
    out = np.zeros_like(nodes)
    for xi, w in zip(_GAUSS4_NODES, _GAUSS4_WEIGHTS):
        out += 0.5 * w * np.asarray(f(nodes, mid + half * xi), dtype=float)
    return out


def _time_averaged_exterior(g: ExteriorData, t0: float, t1: float
                            ) -> ExteriorData:
    mid, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)

    def ev(point, _t):
        return sum(0.5 * w * g(point, mid + half * xi)
                   for xi, w in zip(_GAUSS4_NODES, _GAUSS4_WEIGHTS))

    return ExteriorData(ev, g.growth_kind, g.growth_margin,
                        g.truncation_radius, g.breakpoints)


def _check_transient_args(T: float, tau: float, tau_cap: float | None):
    if T <= 0 or tau <= 0:
        raise ValueError("need T > 0 and tau > 0")
    n_steps = round(T / tau)
    if n_steps < 1 or abs(n_steps * tau - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T/tau must be integral, got T={T}, tau={tau}")
    if tau_cap is not None and tau > tau_cap:
        raise ValueError(f"time step {tau} exceeds the cap {tau_cap}")
    return n_steps


def _solve_transient_dirichlet(prob: DirichletProblem, T: float, tau: float,
                               tau_cap, keep_trajectory: bool) -> SolveReport:
    opr = prob.opr
    n_steps = _check_transient_args(T, tau, tau_cap)
    nodes = opr.grid.nodes
    h = opr.grid.h

    S = _steady_system(opr)
    M = S.copy()
    M[np.diag_indices_from(M)] += 1.0 / tau
    solve = _factorize(M)

    p = np.array(prob.p0, dtype=float) if prob.p0 is not None \
        else np.zeros(opr.size)
    static_source = None
    if not prob.g_time_dependent:
        static_source = opr.source_builder(prob.g, 0.0)

    mass = [h * p.sum()]
    energy = [h * float(p @ p)]
    seminorm = [h * float(p @ (S @ p))]
    traj = [p.copy()] if keep_trajectory else None

    for k in range(1, n_steps + 1):
        t0, t1 = (k - 1) * tau, k * tau
        f_k = _time_average_forcing(prob.f, nodes, t0, t1)
        if static_source is not None:
            s_k = static_source
        else:
            s_k = opr.source_builder(_time_averaged_exterior(prob.g, t0, t1), 0.0)
        p = solve(p / tau + f_k + s_k)
        mass.append(h * p.sum())
        energy.append(h * float(p @ p))
        seminorm.append(h * float(p @ (S @ p)))
        if traj is not None:
            traj.append(p.copy())

    return SolveReport(
        solution=p, residual_norm=0.0, iterations=n_steps,
        mass_history=np.array(mass), energy_history=np.array(energy),
        seminorm_history=np.array(seminorm),
        trajectory=np.array(traj) if traj is not None else None,
    )


@dataclass(frozen=True)
class _NeumannLayout:
    """Lattice layout for the collar-extended Neumann unknowns."""

    grid: Grid1D
    collar: int  # nodes per side

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-(self.collar - 1), self.grid.N + self.collar + 1)

    @property
    def positions(self) -> np.ndarray:
        return self.grid.a + self.grid.h * self.indices

    @property
    def interior_mask(self) -> np.ndarray:
        return (self.indices >= 1) & (self.indices <= self.grid.N)

    @property
    def size(self) -> int:
        return self.grid.N + 2 * self.collar


def _neumann_form(layout: _NeumannLayout, spec: OperatorSpec) -> np.ndarray:
    """Energy bilinear form over interior-plus-collar lattice nodes.

    Graph Laplacian with the same kernel cell weights as the interior
    assembly, scaled by the kernel coefficient and the node measure h; its
    row sums vanish, which is what makes the reflecting case conservative.
    """
    n_tot = layout.size
    h = layout.grid.h
    weights = _cell_weights(spec, h, n_tot - 1)
    first_col = np.concatenate(([0.0], spec.coeff * h * weights))
    B = -toeplitz(first_col)
    np.fill_diagonal(B, -B.sum(axis=1))
    return B


def _solve_transient_neumann(prob: NeumannProblem, T: float, tau: float,
                             tau_cap, keep_trajectory: bool) -> SolveReport:
    opr = prob.opr
    grid = opr.grid
    n_steps = _check_transient_args(T, tau, tau_cap)
    h = grid.h
    collar = max(2, round(prob.collar_factor * (grid.N + 1)))
    layout = _NeumannLayout(grid, collar)
    interior = layout.interior_mask
    positions = layout.positions

    mu = np.where(interior, h, 0.0)
    ext_weight = np.where(interior, 0.0, h)
    # the two lattice points on the domain boundary carry half cells
    for i in (0, grid.N + 1):
        ext_weight[layout.indices == i] = h / 2.0

    B = _neumann_form(layout, opr.spec)
    M = B.copy()
    M[np.diag_indices_from(M)] += mu / tau
    solve = _factorize(M)

    p = np.zeros(layout.size)
    if prob.p0 is not None:
        p[interior] = prob.p0

    def g_values(t0: float, t1: float) -> np.ndarray:
        if prob.g_ext is None:
            return np.zeros(layout.size)
        mid, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
        vals = np.zeros(layout.size)
        for j in np.nonzero(~interior)[0]:
            vals[j] = sum(
                0.5 * w * prob.g_ext(positions[j], mid + half * xi)
                for xi, w in zip(_GAUSS4_NODES, _GAUSS4_WEIGHTS)
            )
        return vals

    static_g = None
    if not prob.g_time_dependent:
        static_g = g_values(0.0, tau)

    def record(dest_mass, dest_energy, dest_semi, vec):
        pin = vec[interior]
        dest_mass.append(h * pin.sum())
        dest_energy.append(h * float(pin @ pin))
        dest_semi.append(float(vec @ (B @ vec)))

    mass: list[float] = []
    energy: list[float] = []
    seminorm: list[float] = []
    record(mass, energy, seminorm, p)
    traj = [p[interior].copy()] if keep_trajectory else None

    x_int = positions[interior]
    for k in range(1, n_steps + 1):
        t0, t1 = (k - 1) * tau, k * tau
        rhs = mu * p / tau
        if prob.f is not None:
            rhs[interior] += h * _time_average_forcing(prob.f, x_int, t0, t1)
        gk = static_g if static_g is not None else g_values(t0, t1)
        rhs -= ext_weight * gk
        p = solve(rhs)
        record(mass, energy, seminorm, p)
        if traj is not None:
            traj.append(p[interior].copy())

    return SolveReport(
        solution=p[interior], residual_norm=0.0, iterations=n_steps,
        mass_history=np.array(mass), energy_history=np.array(energy),
        seminorm_history=np.array(seminorm),
        trajectory=np.array(traj) if traj is not None else None,
        collar_positions=positions[~interior], collar_values=p[~interior],
    )


def solve_transient(prob: DirichletProblem | NeumannProblem, T: float,
                    tau: float, tau_cap: float | None = 0.5,
                    keep_trajectory: bool = False) -> SolveReport:
    """Implicit Euler evolution to time T with per-step data averages.

    Records the interior mass, the squared L2 norm, and the operator
    quadratic form at every step (initial state included).
    """
    if isinstance(prob, NeumannProblem):
        return _solve_transient_neumann(prob, T, tau, tau_cap, keep_trajectory)
    return _solve_transient_dirichlet(prob, T, tau, tau_cap, keep_trajectory)


@dataclass(frozen=True)
class FluxField:
    """Nonlocal flux on staggered positions across the domain."""

    positions: np.ndarray
    values: np.ndarray

    @property
    def left_endpoint(self) -> float:
        return float(self.values[0])

    @property
    def right_endpoint(self) -> float:
        return float(self.values[-1])


def flux_field(grid: Grid1D, spec: OperatorSpec, p: np.ndarray,
               g: ExteriorData | None = None,
               exterior_divergence: Callable[[float], float] | None = None,
               t: float = 0.0,
               divergence: np.ndarray | None = None) -> FluxField:
    """Antiderivative flux: j(x) = -integral of the operator action up to x.

    The divergence defaults to the assembled operator applied to (p, g); in
    a transient run the discrete time derivative of the state may be passed
    instead (``divergence=``), which is the quantity for which the discrete
    continuity relation holds by construction.  The left base value folds in
    the prescribed exterior divergence over the left complement (zero for
    absorbing/reflecting setups).  Positions run from the left domain
    endpoint through the node midpoints to the right endpoint, so
    ``values[0]``/``values[-1]`` are the boundary fluxes.
    """
    if divergence is not None:
        div = np.asarray(divergence, dtype=float)
    else:
        opr = assemble(grid, spec)
        div = opr.apply(np.asarray(p, dtype=float), g, t)
    base = 0.0
    if exterior_divergence is not None:
        from scipy.integrate import quad
        radius = 50.0 * grid.width
        val, _ = quad(exterior_divergence, grid.a - radius, grid.a, limit=200)
        base = -val
    h = grid.h
    inner = grid.nodes[:-1] + 0.5 * h if grid.N > 1 else np.zeros(0)
    positions = np.concatenate(([grid.a], inner, [grid.b]))
    values = base - h * np.concatenate(([0.0], np.cumsum(div)))
    return FluxField(positions, values)


def dirichlet_uniqueness_check(prob: DirichletProblem,
                               prob_alt: DirichletProblem) -> float:
    """Max solution difference for two data sets that agree off the domain.

    The two exterior data must coincide on the complement (spot-checked on
    dyadic sample radii); any disagreement inside the domain is invisible to
    a well-posed solver, so the returned difference should sit at solver
    tolerance.
    """
    grid = prob.opr.grid
    samples = [grid.a - d for d in (1e-3, 0.1, 1.0, 10.0)] + \
              [grid.b + d for d in (1e-3, 0.1, 1.0, 10.0)]
    for x in samples:
        va, vb = prob.g(x, 0.0), prob_alt.g(x, 0.0)
        if not math.isclose(va, vb, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError(
                f"exterior data disagree on the complement at x={x}: "
                f"{va} vs {vb}"
            )
    pa = solve_steady_dirichlet(prob).solution
    pb = solve_steady_dirichlet(prob_alt).solution
    return float(np.max(np.abs(pa - pb)))
