"""Microscopic jump-process simulators and their closed-form statistics.

Jump magnitudes follow a power law ``r**(-beta-1)`` or its exponentially
tempered version ``exp(-lam*r) * r**(-beta-1)`` above an inner cutoff
``r_min`` (the bare density is not normalizable at zero, so the cutoff is
what turns it into a genuine compound-Poisson jump law).  The normalization
``C`` uses the whole-line convention: the sampled density is
``C * w(|x|) * |x|**(-beta-1)`` on ``|x| > r_min``.

Walkers are independent; the simulators run them in fixed-size chunks, one
counter-based random stream per chunk, so results are reproducible and
independent of how many threads process the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.stats import kstest

from .special import gamma, upper_incomplete_gamma

__all__ = [
    "JumpLaw",
    "power_jump_law",
    "tempered_jump_law",
    "Walker",
    "Trajectory",
    "EscapeResult",
    "CrossoverReport",
    "sample_jump",
    "sample_jumps",
    "simulate_flight",
    "flight_positions",
    "mc_escape_probability",
    "mc_escape_partition",
    "moment",
    "berry_esseen_bound",
    "ks_distance_to_normal",
    "steps_to_gaussian",
    "crossover_experiment",
]

POWER_LAW = "power_law"
TEMPERED_POWER_LAW = "tempered_power_law"

_CHUNK = 8192


@dataclass(frozen=True)
class JumpLaw:
    """Signed jump-length law with computed normalization.

    ``C`` normalizes the line density C * w(|x|) |x|^(-beta-1) on its support
    |x| > r_min.  Power laws have divergent second moment; tempered laws have
    every moment finite.
    """

    kind: str
    beta: float
    lam: float
    r_min: float
    C: float

    def __post_init__(self):
        if self.kind not in (POWER_LAW, TEMPERED_POWER_LAW):
            raise ValueError(f"unknown jump law kind {self.kind!r}")
        if not 0.0 < self.beta < 2.0:
            raise ValueError(f"tail index must lie in (0, 2), got {self.beta}")
        if self.r_min <= 0.0:
            raise ValueError("inner cutoff must be positive")
        if (self.kind == POWER_LAW) != (self.lam == 0.0):
            raise ValueError("lam must be 0 exactly for the pure power law")


def power_jump_law(beta: float, r_min: float = 1e-3) -> JumpLaw:
    """Pure power-law jumps above the cutoff; C = beta r_min^beta / 2."""
    return JumpLaw(POWER_LAW, beta, 0.0, r_min, beta * r_min ** beta / 2.0)


def tempered_jump_law(beta: float, lam: float, r_min: float = 1e-3) -> JumpLaw:
    """Exponentially tempered power-law jumps above the cutoff."""
    if lam <= 0.0:
        raise ValueError("tempering rate must be positive")
    mass = 2.0 * lam ** beta * upper_incomplete_gamma(-beta, lam * r_min)
    return JumpLaw(TEMPERED_POWER_LAW, beta, lam, r_min, 1.0 / mass)


@dataclass
class Walker:
    """State of one walker: position, accumulated clock, and its own stream."""

    position: float
    clock: float = 0.0
    alive: bool = True
    rng_stream: np.random.Generator | None = None


class Trajectory(NamedTuple):
    times: np.ndarray
    positions: np.ndarray


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(rng))


def _sample_magnitudes(law: JumpLaw, size: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Vectorized magnitudes; rejection against exp(-lam r) for tempered."""
    if law.kind == POWER_LAW:
        u = rng.random(size)
        return law.r_min * (1.0 - u) ** (-1.0 / law.beta)
    out = np.empty(size)
    have = 0
    while have < size:
        want = size - have
        r = law.r_min * (1.0 - rng.random(want)) ** (-1.0 / law.beta)
        keep = rng.random(want) < np.exp(-law.lam * r)
        kept = r[keep]
        take = min(kept.size, want)
        out[have:have + take] = kept[:take]
        have += take
    return out


def sample_jumps(law: JumpLaw, size: int, rng) -> np.ndarray:
    """Signed jumps: sampled magnitude with a fair sign."""
    rng = _as_generator(rng)
    mags = _sample_magnitudes(law, size, rng)
    signs = rng.random(size) < 0.5
    return np.where(signs, mags, -mags)


def sample_jump(law: JumpLaw, rng) -> float:
    """Single signed jump."""
    return float(sample_jumps(law, 1, rng)[0])


def acceptance_rate(law: JumpLaw) -> float:
    """Expected acceptance probability of the tempered rejection sampler."""
    if law.kind == POWER_LAW:
        return 1.0
    pareto_mass = law.r_min ** (-law.beta) / law.beta  # of r^(-1-beta) above cutoff
    tempered_mass = law.lam ** law.beta * upper_incomplete_gamma(
        -law.beta, law.lam * law.r_min)
    return float(tempered_mass / pareto_mass)


def simulate_flight(law: JumpLaw, zeta: float, t_end: float, rng) -> Trajectory:
    """One compound-Poisson path on [0, t_end].

    Waiting times are exponential with rate zeta; the position is piecewise
    constant between jumps.  Returns the jump epochs (starting at 0) and the
    position after each.
    """
    if zeta <= 0 or t_end <= 0:
        raise ValueError("need zeta > 0 and t_end > 0")
    rng = _as_generator(rng)
    walker = Walker(position=0.0, rng_stream=rng)
    times = [0.0]
    positions = [0.0]
    while True:
        wait = rng.exponential(1.0 / zeta)
        if walker.clock + wait > t_end:
            break
        walker.clock += wait
        walker.position += sample_jump(law, rng)
        times.append(walker.clock)
        positions.append(walker.position)
    return Trajectory(np.array(times), np.array(positions))


def flight_positions(law: JumpLaw, zeta: float, t: float, n: int, rng
                     ) -> np.ndarray:
    """Positions of n independent flights at time t (vectorized)."""
    rng = _as_generator(rng)
    counts = rng.poisson(zeta * t, size=n)
    total = int(counts.sum())
    jumps = sample_jumps(law, total, rng)
    out = np.zeros(n)
    starts = np.concatenate(([0], np.cumsum(counts)))[:-1]
    nz = counts > 0
    out[nz] = np.add.reduceat(jumps, starts[nz])
    return out


@dataclass(frozen=True)
class EscapeResult:
    """Monte Carlo escape estimate with its binomial error."""

    estimate: float
    stderr: float
    n_walkers: int
    hits: int
    capped: int = 0

    @property
    def flagged(self) -> bool:
        return self.capped > 1e-4 * self.n_walkers


def _classify_cells(cells: Sequence[tuple[float, float]], omega) -> None:
    a, b = omega
    for lo, hi in cells:
        if not lo < hi:
            raise ValueError(f"empty cell ({lo}, {hi})")
        if max(lo, a) < min(hi, b):
            raise ValueError(f"cell ({lo}, {hi}) overlaps the domain {omega}")


def _escape_chunk(omega, cell_edges_left, cell_edges_right, law, x0, size,
                  rng, jump_cap) -> tuple[np.ndarray, np.ndarray, int]:
    """Run one chunk of walkers to first exit; tally landing cells per side.

    The boundary points themselves count as exterior: an exact hit on an
    endpoint (measure zero, but possible in floating point) exits and is
    tallied on its own side.
    """
    a, b = omega
    pos = np.full(size, x0)
    active = np.arange(size)
    exits = np.empty(size)
    jumps_taken = 0
    capped = 0
    while active.size:
        if jumps_taken >= jump_cap:
            capped = active.size
            exits_idx = active
            exits[exits_idx] = np.nan
            break
        pos[active] += sample_jumps(law, active.size, rng)
        out = ~((pos[active] > a) & (pos[active] < b))
        exited = active[out]
        exits[exited] = pos[exited]
        active = active[~out]
        jumps_taken += 1
    left = exits[exits <= a]
    right = exits[exits >= b]
    tl = np.histogram(left, bins=cell_edges_left)[0] if cell_edges_left is not None \
        else np.zeros(0, dtype=int)
    tr = np.histogram(right, bins=cell_edges_right)[0] if cell_edges_right is not None \
        else np.zeros(0, dtype=int)
    return tl, tr, capped


def _side_edges(cells, a, b):
    """Split partition cells by side and build histogram edges.

    Left-side cells are keyed by their upper edge (x = a belongs to the cell
    touching the boundary), right-side cells by their lower edge.
    """
    left = sorted([c for c in cells if c[1] <= a], key=lambda c: c[0])
    right = sorted([c for c in cells if c[0] >= b], key=lambda c: c[0])
    if len(left) + len(right) != len(cells):
        raise ValueError("every cell must lie on one side of the domain")
    eL = None
    if left:
        eL = np.array([left[0][0]] + [c[1] for c in left])
        eL[-1] = np.nextafter(eL[-1], np.inf)  # make x = a land inside
    eR = None
    if right:
        eR = np.array([right[0][0]] + [c[1] for c in right])
    return left, right, eL, eR


def mc_escape_partition(omega: tuple[float, float],
                        cells: Sequence[tuple[float, float]],
                        law: JumpLaw, x0: float, n_walkers: int, seed,
                        threads: int = 1, jump_cap: int = 10 ** 7
                        ) -> tuple[dict, int]:
    """Tally first-exit landing cells over a partition of the complement.

    Each walker jumps from x0 until its position leaves the open domain; the
    landing point is binned into the cells (which must tile each side of the
    complement for the counts to sum to n_walkers).  Returns the per-cell
    counts and the number of walkers that hit the jump cap.
    """
    a, b = omega
    if not a < x0 < b:
        raise ValueError(f"start point {x0} is not inside {omega}")
    _classify_cells(cells, omega)
    left, right, eL, eR = _side_edges(cells, a, b)

    chunks = [_CHUNK] * (n_walkers // _CHUNK)
    if n_walkers % _CHUNK:
        chunks.append(n_walkers % _CHUNK)
    streams = [np.random.Generator(np.random.Philox(s))
               for s in np.random.SeedSequence(seed).spawn(len(chunks))]

    def work(i):
        return _escape_chunk(omega, eL, eR, law, x0, chunks[i], streams[i],
                             jump_cap)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(len(chunks))))
    else:
        results = [work(i) for i in range(len(chunks))]

    tl = sum(r[0] for r in results)
    tr = sum(r[1] for r in results)
    capped = sum(r[2] for r in results)
    counts = {}
    for cell, cnt in zip(left, np.atleast_1d(tl)):
        counts[cell] = int(cnt)
    for cell, cnt in zip(right, np.atleast_1d(tr)):
        counts[cell] = int(cnt)
    return counts, capped


def mc_escape_probability(omega: tuple[float, float], H, law: JumpLaw,
                          x0: float, n_walkers: int, seed,
                          zeta: float = 1.0, threads: int = 1,
                          jump_cap: int = 10 ** 7) -> EscapeResult:
    """Estimate the probability of landing in H on first exit from the domain.

    H is an interval or a list of intervals in the complement.  The Poisson
    clock rate ``zeta`` does not influence where a walker lands (positions
    are constant between jumps), so the walk is simulated jump-by-jump.
    """
    cells = [tuple(H)] if np.isscalar(H[0]) else [tuple(c) for c in H]
    a, b = omega
    # complete the partition so the tallies remain exhaustive
    full = list(cells)
    covered_l = sorted([c for c in cells if c[1] <= a])
    covered_r = sorted([c for c in cells if c[0] >= b])
    lo = -math.inf
    for c in covered_l:
        if c[0] > lo:
            full.append((lo, c[0]))
        lo = c[1]
    if lo < a:
        full.append((lo, a))
    lo = b
    for c in covered_r:
        if c[0] > lo:
            full.append((lo, c[0]))
        lo = c[1]
    if lo < math.inf:
        full.append((lo, math.inf))

    counts, capped = mc_escape_partition(omega, full, law, x0, n_walkers,
                                         seed, threads, jump_cap)
    hits = sum(counts[c] for c in map(tuple, cells))
    est = hits / n_walkers
    stderr = math.sqrt(max(est * (1.0 - est), 1.0 / n_walkers) / n_walkers)
    return EscapeResult(est, stderr, n_walkers, hits, capped)


def moment(law: JumpLaw, order: int, ignore_cutoff: bool = False) -> float:
    """Absolute moment <|X|^order> of the jump law, order in {2, 3}.

    Tempered laws have the closed form 2 C lam^(beta-order) Gamma(order-beta)
    on full support; with the inner cutoff the gamma function is replaced by
    its upper incomplete version at lam * r_min.  Pass ``ignore_cutoff`` to
    get the full-support value.  Power laws diverge for order >= beta.
    """
    if order not in (2, 3):
        raise ValueError(f"supported moment orders are 2 and 3, got {order}")
    if law.kind == POWER_LAW:
        if order >= law.beta:
            raise ValueError(
                f"moment of order {order} diverges for a power law with "
                f"tail index {law.beta}"
            )
        raise AssertionError("unreachable: orders 2,3 always exceed beta < 2")
    a = order - law.beta
    if ignore_cutoff:
        return 2.0 * law.C * law.lam ** (law.beta - order) * gamma(a)
    return 2.0 * law.C * law.lam ** (law.beta - order) \
        * float(upper_incomplete_gamma(a, law.lam * law.r_min))


def berry_esseen_bound(beta: float, lam: float, C: float, m: int) -> float:
    """CDF distance bound for the normalized m-jump sum of a tempered law.

    Evaluates ``(5 / (2 sqrt(2C))) * Gamma(3-beta) / Gamma(2-beta)^(3/2)
    * lam^(-beta/2) / sqrt(m)``, which equals
    ``(5/2) <|X|^3> / <|X|^2>^(3/2) / sqrt(m)`` for the full-support moments.
    """
    if m < 1:
        raise ValueError("need at least one summand")
    if lam <= 0:
        raise ValueError("tempering rate must be positive")
    return (5.0 / (2.0 * math.sqrt(2.0 * C)) * gamma(3.0 - beta)
            / gamma(2.0 - beta) ** 1.5 * lam ** (-beta / 2.0) / math.sqrt(m))


def moment_quadrature(law: JumpLaw, order: int) -> float:
    """Moment by adaptive quadrature of the defining integral (oracle)."""
    w = (lambda r: math.exp(-law.lam * r)) if law.kind == TEMPERED_POWER_LAW \
        else (lambda r: 1.0)
    f = lambda r: 2.0 * law.C * r ** order * w(r) * r ** (-law.beta - 1.0)
    val, _ = quad(f, law.r_min, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def ks_distance_to_normal(samples: np.ndarray) -> float:
    """Kolmogorov-Smirnov sup distance to the standard normal CDF."""
    return float(kstest(samples, "norm").statistic)


def steps_to_gaussian(draw: Callable[[int, np.random.Generator], np.ndarray],
                      variance: float, threshold: float, n_samples: int,
                      rng, m_cap: int = 200_000,
                      ratio: float = 1.25) -> tuple[float, list]:
    """Smallest number of summands whose normalized sum passes a KS threshold.

    Maintains n_samples running sums, adds draws one step at a time, and
    measures the KS distance of ``sums / sqrt(variance * m)`` at a geometric
    grid of checkpoints.  The crossing is interpolated in log-log between the
    bracketing checkpoints.  Returns ``nan`` if the cap is reached.
    """
    rng = _as_generator(rng)
    sums = np.zeros(n_samples)
    trace: list[tuple[int, float]] = []
    checkpoints: list[int] = []
    m = 1
    while m <= m_cap:
        checkpoints.append(m)
        m = max(m + 1, int(round(m * ratio)))
    prev = (None, None)
    m_done = 0
    for cp in checkpoints:
        while m_done < cp:
            sums += draw(n_samples, rng)
            m_done += 1
        d = ks_distance_to_normal(sums / math.sqrt(variance * cp))
        trace.append((cp, d))
        if d < threshold:
            if prev[0] is None:
                return float(cp), trace
            m0, d0 = prev
            # log-log interpolation of the threshold crossing
            t = (math.log(d0) - math.log(threshold)) / \
                (math.log(d0) - math.log(d))
            return float(math.exp(math.log(m0) + t * (math.log(cp) - math.log(m0)))), trace
        prev = (cp, d)
    return float("nan"), trace


@dataclass(frozen=True)
class CrossoverReport:
    """Per-tempering step counts to Gaussian behavior and the fitted scaling."""

    lambda_grid: np.ndarray
    m_star: np.ndarray
    fitted_slope: float
    threshold: float
    traces: list = field(default_factory=list, repr=False)

    @property
    def unresolved(self) -> np.ndarray:
        return np.isnan(self.m_star)


def crossover_experiment(beta: float, lambda_grid: Sequence[float],
                         threshold: float, n_samples: int, seed,
                         r_min: float = 1e-3, m_cap: int = 200_000
                         ) -> CrossoverReport:
    """Measure how the Gaussian crossover scales with the tempering rate.

    For each tempering rate, finds the number of summed jumps after which
    the KS distance to the standard normal drops below the threshold, then
    fits the log-log slope of that count against the rate.  The expected
    scaling is lam^(-beta).
    """
    lams = np.asarray(lambda_grid, dtype=float)
    streams = np.random.SeedSequence(seed).spawn(len(lams))
    m_star = np.empty(len(lams))
    traces = []
    for i, lam in enumerate(lams):
        law = tempered_jump_law(beta, lam, r_min)
        var = moment(law, 2)
        rng = np.random.Generator(np.random.Philox(streams[i]))
        ms, trace = steps_to_gaussian(
            lambda n, g: sample_jumps(law, n, g), var, threshold,
            n_samples, rng, m_cap)
        m_star[i] = ms
        traces.append(trace)
    ok = ~np.isnan(m_star)
    if ok.sum() >= 2:
        slope = float(np.polyfit(np.log(lams[ok]), np.log(m_star[ok]), 1)[0])
    else:
        slope = float("nan")
    return CrossoverReport(lams, m_star, slope, threshold, traces)
