"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
report lines; tolerances and runtime caps are asserted, not just printed.
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from fraclevy.operators import ExteriorData, Grid1D, OperatorSpec, assemble
from fraclevy.registry import exterior_indicator, exterior_one, exterior_zero
from fraclevy.solvers import (
    DirichletProblem,
    NeumannProblem,
    dirichlet_uniqueness_check,
    escape_probability,
    solve_steady_dirichlet,
    solve_transient,
)
from fraclevy.spectral import reference_apply, verify_tempered_identity
from fraclevy.stochastic import (
    berry_esseen_bound,
    crossover_experiment,
    flight_positions,
    mc_escape_partition,
    mc_escape_probability,
    moment,
    moment_quadrature,
    power_jump_law,
    tempered_jump_law,
)

K_GRID = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)


def _spec(beta: float, lam: float) -> OperatorSpec:
    if lam == 0.0:
        return OperatorSpec("fractional", beta)
    return OperatorSpec("tempered", beta, lam)


def report(num: int, message: str) -> None:
    print(f"\n[criterion {num:02d}] PASS {message}")


def test_criterion_01_constant_solution_identity():
    worst = 0.0
    for beta in (0.5, 1.2, 1.8):
        for lam in (0.0, 0.5):
            start = time.perf_counter()
            grid = Grid1D(0.0, 1.0, 200)
            opr = assemble(grid, _spec(beta, lam))
            rep = solve_steady_dirichlet(DirichletProblem(opr, exterior_one()))
            err = float(np.max(np.abs(rep.solution - 1.0)))
            elapsed = time.perf_counter() - start
            assert err <= 1e-9, (beta, lam, err)
            assert elapsed < 5.0, (beta, lam, elapsed)
            worst = max(worst, err)
    report(1, f"steady solution of unit complement data is unit: "
              f"max node error {worst:.2e} over 6 operator settings")


def test_criterion_02_solver_monte_carlo_agreement():
    start = time.perf_counter()
    grid = Grid1D(0.0, 1.0, 399)
    rep = escape_probability(grid, OperatorSpec("fractional", 1.2), (1.0, 2.0))
    pde = float(rep.solution[119])  # node at x = 0.3
    assert abs(grid.nodes[119] - 0.3) < 1e-12

    law = power_jump_law(1.2, r_min=1e-3)
    mc = mc_escape_probability((0.0, 1.0), (1.0, 2.0), law, 0.3, 100_000,
                               seed=20260810)
    elapsed = time.perf_counter() - start
    gap = abs(mc.estimate - pde)
    assert gap <= 3.0 * mc.stderr, (pde, mc.estimate, mc.stderr)
    assert elapsed < 60.0, elapsed
    report(2, f"escape into (1,2) from 0.3: solver {pde:.5f} vs Monte Carlo "
              f"{mc.estimate:.5f} +- {mc.stderr:.5f} "
              f"(gap {gap:.5f} <= {3 * mc.stderr:.5f}; {elapsed:.1f}s)")


def test_criterion_03_tempered_symbol_identity():
    start = time.perf_counter()
    worst_1d = 0.0
    for beta in (0.3, 0.5, 0.8, 1.2, 1.5, 1.8):
        for lam in (0.1, 1.0, 10.0):
            worst_1d = max(worst_1d,
                           verify_tempered_identity(1, beta, lam, K_GRID))
    assert worst_1d <= 1e-6, worst_1d
    worst_2d = max(verify_tempered_identity(2, 0.5, 1.0, (0.5, 2.0)),
                   verify_tempered_identity(2, 1.5, 0.3, (0.5, 2.0)))
    assert worst_2d <= 1e-5, worst_2d
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, elapsed
    report(3, f"closed-form tempered multiplier vs quadrature: "
              f"1D worst {worst_1d:.2e} (18 settings x 6 wavenumbers), "
              f"2D worst {worst_2d:.2e} ({elapsed:.1f}s)")


def test_criterion_04_operator_vs_spectral_consistency():
    sig = 0.1

    def gauss(x):
        return np.exp(-((np.asarray(x, dtype=float) - 0.5) / sig) ** 2 / 2.0)

    tails = ExteriorData(
        lambda p, t: float(np.exp(-((p - 0.5) / sig) ** 2 / 2.0)),
        "polynomial")

    lines = []
    for spec in (OperatorSpec("fractional", 1.2),
                 OperatorSpec("tempered", 0.8, 1.0)):
        errs = []
        for N in (100, 200, 400):
            grid = Grid1D(0.0, 1.0, N)
            opr = assemble(grid, spec)
            got = opr.apply(gauss(grid.nodes), tails)
            ref = reference_apply(gauss, spec, grid.nodes, (-31.5, 32.5),
                                  1 << 15)
            errs.append(float(np.max(np.abs(got - ref))))
        assert errs[0] > errs[1] > errs[2], errs
        order = math.log2(errs[0] / errs[2]) / 2.0
        assert order >= 1.0, (spec, errs, order)
        lines.append(f"{spec.kind} beta={spec.beta}: "
                     f"errors {errs[0]:.2e}/{errs[1]:.2e}/{errs[2]:.2e}, "
                     f"order {order:.2f}")
    report(4, "smooth-field operator matches the Fourier reference under "
              "refinement: " + "; ".join(lines))


def test_criterion_05_reflecting_mass_conservation():
    grid = Grid1D(0.0, 1.0, 200)
    opr = assemble(grid, OperatorSpec("fractional", 1.2))
    p0 = np.exp(-((grid.nodes - 0.4) / 0.12) ** 2)
    rep = solve_transient(NeumannProblem(opr, None, p0=p0), 1.0, 0.01)
    rel = np.max(np.abs(rep.mass_history - rep.mass_history[0])) \
        / rep.mass_history[0]
    assert rel <= 1e-8, rel
    report(5, f"reflecting run keeps interior mass constant: "
              f"relative drift {rel:.2e} over {len(rep.mass_history) - 1} steps")


def test_criterion_06_absorbing_energy_decay():
    settings = [(0.5, 0.0), (1.2, 0.0), (0.8, 0.5)]
    for beta, lam in settings:
        grid = Grid1D(0.0, 1.0, 120)
        opr = assemble(grid, _spec(beta, lam))
        p0 = np.exp(-((grid.nodes - 0.45) / 0.1) ** 2)
        rep = solve_transient(DirichletProblem(opr, exterior_zero(), p0=p0),
                              0.5, 0.01)
        norms = np.sqrt(rep.energy_history)
        assert np.all(np.diff(norms) <= 1e-12), (beta, lam)
    report(6, "absorbing runs have non-increasing L2 norm at every step "
              f"for (beta, lam) in {settings}")


def test_criterion_07_berry_esseen_crossover():
    start = time.perf_counter()
    rep = crossover_experiment(0.8, [0.05, 0.1, 0.2, 0.4], threshold=0.05,
                               n_samples=100_000, seed=20240811)
    elapsed = time.perf_counter() - start
    assert not rep.unresolved.any()
    assert abs(rep.fitted_slope - (-0.8)) <= 0.15 * 0.8, rep.fitted_slope
    assert elapsed < 300.0, elapsed
    report(7, f"Gaussian-crossover step counts {np.round(rep.m_star).astype(int)} "
              f"scale with slope {rep.fitted_slope:.3f} "
              f"(target -0.8 +- 0.12; {elapsed:.0f}s)")


def test_criterion_08_moment_identities():
    law = tempered_jump_law(0.8, 0.2, r_min=1e-3)
    for order in (2, 3):
        analytic = moment(law, order)
        direct = moment_quadrature(law, order)
        assert analytic == pytest.approx(direct, rel=1e-8), order

    m = 1000
    m2 = moment(law, 2, ignore_cutoff=True)
    m3 = moment(law, 3, ignore_cutoff=True)
    via_moments = 2.5 * m3 / m2 ** 1.5 / math.sqrt(m)
    bound = berry_esseen_bound(0.8, 0.2, law.C, m)
    assert bound == pytest.approx(via_moments, rel=1e-12)
    report(8, f"moments match quadrature to 1e-8 and the convergence bound "
              f"equals (5/2)<|X|^3>/<|X|^2>^(3/2)/sqrt(m) to 1e-12 "
              f"({bound:.6g})")


def _jump_cf(law, k: float) -> float:
    if k == 0.0:
        return 1.0
    k = abs(k)
    window = 400.0 / k if law.lam == 0 else 50.0 / law.lam
    dens = lambda r: 2.0 * law.C * math.exp(-law.lam * r) \
        * r ** (-law.beta - 1.0)
    val, _ = quad(dens, law.r_min, window, weight="cos", wvar=k, limit=1000)
    tail = -math.sin(k * window) * dens(window) / k
    return val + tail


def test_criterion_09_characteristic_function():
    n = 100_000
    law = power_jump_law(1.2, r_min=1e-3)
    X = flight_positions(law, zeta=1.0, t=1.0, n=n, rng=20260809)
    worst = 0.0
    for k in np.linspace(-5.0, 5.0, 41):
        ecf = complex(np.mean(np.exp(1j * k * X)))
        expect = math.exp(1.0 * (_jump_cf(law, float(k)) - 1.0))
        worst = max(worst, abs(ecf - expect))
    allowance = 5.0 / math.sqrt(n)
    assert worst <= allowance, worst
    report(9, f"empirical flight characteristic function: max modulus error "
              f"{worst:.4f} <= {allowance:.4f} on 41 wavenumbers in [-5, 5]")


def test_criterion_10_exterior_only_dependence():
    grid = Grid1D(0.0, 1.0, 100)
    opr = assemble(grid, OperatorSpec("fractional", 1.2))
    base = exterior_indicator(1.0, 2.0)
    rng = np.random.default_rng(20260812)
    worst = 0.0
    for _ in range(10):
        amp = float(rng.uniform(-10.0, 10.0))
        freq = float(rng.uniform(0.5, 30.0))

        def ev(p, t, amp=amp, freq=freq):
            if 0.0 < p < 1.0:
                return amp * math.sin(freq * p)
            return base(p, t)

        alt = ExteriorData(ev, "polynomial", breakpoints=base.breakpoints)
        diff = dirichlet_uniqueness_check(
            DirichletProblem(opr, base), DirichletProblem(opr, alt))
        assert diff <= 1e-9, diff
        worst = max(worst, diff)
    report(10, f"10 random interior rewrites of the data leave the solution "
               f"unchanged: worst difference {worst:.2e}")


def test_criterion_11_escape_partition():
    cells = [(-np.inf, -1.0), (-1.0, 0.0), (1.0, 2.0), (2.0, np.inf)]

    grid = Grid1D(0.0, 1.0, 100)
    spec = OperatorSpec("fractional", 1.2)
    total = np.zeros(grid.N)
    for cell in cells:
        total += escape_probability(grid, spec, cell).solution
    solver_gap = float(np.max(np.abs(total - 1.0)))
    assert solver_gap <= 1e-8, solver_gap

    law = power_jump_law(1.2, r_min=1e-3)
    n_walkers = 20_000
    counts, capped = mc_escape_partition((0.0, 1.0), cells, law, 0.3,
                                         n_walkers, seed=20260813)
    assert capped == 0
    assert sum(counts.values()) == n_walkers
    report(11, f"escape probabilities over a 4-cell partition: solver sums "
               f"to 1 within {solver_gap:.2e}; Monte Carlo tallies sum to "
               f"{sum(counts.values())}/{n_walkers} exactly")
