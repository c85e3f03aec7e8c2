"""Weighted L1-equivalent distance between two piecewise-constant profiles.

At every ``x`` the states ``u(x)`` and ``v(x)`` are joined by Hugoniot
coordinates ``q``; the distance integrates ``sum_i |q_i| W_i`` over a window,
where the weights ``W_i = 1 + kappa1 A_i + kappa2 (Q(u) + Q(v))`` count the
waves of both profiles that approach the ``i``-th wave at ``x``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from frontlab.errors import RiemannSolverError, UsageError
from frontlab.models import SHOCK, GasParameters, Profile, State, StateBox
from frontlab.physics.waves import hugoniot_coordinates
from frontlab.functionals.glimm import glimm
from frontlab.tracking.tracker import TrajectoryRecord, rh_speed

logger = logging.getLogger(__name__)

#: Windows shorter than this many sample steps are not used for slopes.
MIN_WINDOW_SAMPLES: int = 10
PHI_JUMP_TOL: float = 1e-12


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WaveDecomposition:
    """``q`` with ``v = S3(q3) o S2(q2) o S1(q1)(u)``."""

    u: State
    v: State
    q: np.ndarray
    residual: float

    @property
    def total(self) -> float:
        return float(np.abs(self.q).sum())

    @property
    def ratio(self) -> float:
        """``sum |q_i| / |v - u|`` (1 when ``u = v``)."""
        jump = float(np.linalg.norm(self.v.as_array() - self.u.as_array()))
        return 1.0 if jump == 0.0 else self.total / jump

    def to_dict(self) -> dict:
        return {"u": self.u.to_dict(), "v": self.v.to_dict(), "q": self.q.tolist(), "residual": self.residual}


def decompose(u: State, v: State, gas: GasParameters, box: StateBox | None = None) -> WaveDecomposition:
    """Hugoniot coordinates of *v* relative to *u*.

    Raises:
        RiemannSolverError: If the states are too far apart or the iteration
            does not converge.
    """
    if box is not None:
        distance = box.distance(u, v)
        if distance > box.solvability_threshold:
            raise RiemannSolverError(
                f"states are {distance:.3g} apart in box units, above the solvability threshold",
                residual=distance,
            )
    q, residual = hugoniot_coordinates(u, v, gas)
    return WaveDecomposition(u=u, v=v, q=q, residual=residual)


@dataclass(frozen=True)
class EquivalenceConstant:
    """Empirical ``K`` with ``|v - u| / K <= sum |q_i| <= K |v - u|``."""

    K: float
    min_ratio: float
    max_ratio: float
    n_pairs: int

    def to_dict(self) -> dict:
        return {"K": self.K, "min_ratio": self.min_ratio, "max_ratio": self.max_ratio, "n_pairs": self.n_pairs}


def calibrate_k(
    box: StateBox, gas: GasParameters, n_pairs: int = 400, radius: float = 0.1, seed: int = 0
) -> EquivalenceConstant:
    """Sample pairs at box distance up to *radius* and report the smallest admissible ``K``."""
    rng = np.random.default_rng(seed)
    bases = box.sample(rng, n_pairs)
    offsets = rng.uniform(-radius, radius, size=(n_pairs, 3)) * box.widths
    ratios = []
    for base, offset in zip(bases, offsets):
        other = base + offset
        if not box.contains(other) or other[2] - 0.5 * other[1] ** 2 <= 0.0:
            continue
        try:
            ratios.append(decompose(State.from_array(base), State.from_array(other), gas).ratio)
        except RiemannSolverError:
            logger.debug("skipped pair %s -> %s", base.tolist(), other.tolist())
    if not ratios:
        raise UsageError("no decomposable pairs sampled; widen the box or the radius")
    lo, hi = min(ratios), max(ratios)
    k = max(hi, 1.0 / lo)
    logger.info("calibrated equivalence K=%.4g over %d pairs", k, len(ratios))
    return EquivalenceConstant(K=k, min_ratio=lo, max_ratio=hi, n_pairs=len(ratios))


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlyWeights:
    """Weights on the cells of a common refinement.

    Attributes:
        A: ``(m, 3)`` approaching-wave sums per cell.
        W: ``(m, 3)`` weights per cell.
        potential: ``Q(u) + Q(v)``.
    """

    kappa1: float
    kappa2: float
    A: np.ndarray
    W: np.ndarray
    potential: float

    @property
    def max_weight(self) -> float:
        return float(self.W.max()) if self.W.size else 1.0


def _front_table(profile: Profile, source: int) -> np.ndarray:
    """Rows ``(position, family, strength, source)``."""
    rows = [(f.position, f.family, f.strength, source) for f in profile.fronts]
    return np.array(rows, dtype=float).reshape(-1, 4)


def a_fields(x: np.ndarray, u: Profile, v: Profile, q: np.ndarray) -> np.ndarray:
    """``A_i`` at the points *x* given ``q(x)`` (shape ``(m, 3)``).

    A front of family ``k`` left of ``x`` counts towards ``A_i`` when
    ``k > i``, one right of ``x`` when ``k < i``. For the genuinely
    nonlinear families the same-family fronts count from ``u`` on the left
    and ``v`` on the right where ``q_i < 0``, and the other way round where
    ``q_i >= 0``. Non-physical fronts count as family 4.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    q = np.asarray(q, dtype=float).reshape(-1, 3)
    table = np.vstack([_front_table(u, 0), _front_table(v, 1)])
    out = np.zeros((x.size, 3))
    if table.size == 0:
        return out
    pos, fam, strength, source = table.T
    left = pos[None, :] < x[:, None]
    right = pos[None, :] > x[:, None]
    from_u = source == 0
    for i in (1, 2, 3):
        crossing = (left & (fam > i)[None, :]) | (right & (fam < i)[None, :])
        total = (crossing * strength[None, :]).sum(axis=1)
        if i != 2:
            same = fam == i
            neg_terms = (left & (same & from_u)[None, :]) | (right & (same & ~from_u)[None, :])
            pos_terms = (left & (same & ~from_u)[None, :]) | (right & (same & from_u)[None, :])
            negative = q[:, i - 1] < 0.0
            chosen = np.where(negative[:, None], neg_terms, pos_terms)
            total = total + (chosen * strength[None, :]).sum(axis=1)
        out[:, i - 1] = total
    return out


def bly_weights(x: np.ndarray, u: Profile, v: Profile, q: np.ndarray, kappa1: float, kappa2: float) -> BlyWeights:
    a = a_fields(x, u, v, q)
    potential = glimm(u, 0.0).Q + glimm(v, 0.0).Q
    w = 1.0 + kappa1 * a + kappa2 * potential
    return BlyWeights(kappa1=kappa1, kappa2=kappa2, A=a, W=w, potential=potential)


# ---------------------------------------------------------------------------
# Distance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhiEvaluation:
    """``Phi`` with its cell-level breakdown on the common refinement.

    Attributes:
        edges: ``m + 1`` cell edges covering the window.
        q: ``(m, 3)`` Hugoniot coordinates per cell.
        weights: The weights per cell.
        l1: ``int |u - v| dx`` over the window.
    """

    value: float
    edges: np.ndarray
    q: np.ndarray
    weights: BlyWeights
    l1: float

    def to_dict(self) -> dict:
        return {
            "phi": self.value,
            "l1": self.l1,
            "edges": self.edges.tolist(),
            "q": self.q.tolist(),
            "W": self.weights.W.tolist(),
            "A": self.weights.A.tolist(),
        }


def common_refinement(profiles: Sequence[Profile], window: tuple[float, float]) -> np.ndarray:
    a, b = window
    if not b > a:
        raise UsageError(f"empty window {window}")
    inner = [p.positions[(p.positions > a) & (p.positions < b)] for p in profiles]
    return np.unique(np.concatenate([[a, b], *inner]))


def phi_breakdown(
    u: Profile,
    v: Profile,
    window: tuple[float, float],
    kappa1: float,
    kappa2: float,
    gas: GasParameters,
) -> PhiEvaluation:
    """Evaluate ``Phi(u, v)`` exactly on the common refinement of both profiles.

    Raises:
        RiemannSolverError: Naming the cell where the decomposition failed.
    """
    edges = common_refinement((u, v), window)
    lengths = np.diff(edges)
    mids = 0.5 * (edges[1:] + edges[:-1])
    q = np.zeros((mids.size, 3))
    l1 = 0.0
    for k, x in enumerate(mids):
        left, right = u.state_at(float(x)), v.state_at(float(x))
        try:
            q[k] = decompose(left, right, gas).q
        except RiemannSolverError as exc:
            raise RiemannSolverError(
                f"decomposition failed in cell [{edges[k]:.12g}, {edges[k + 1]:.12g}]: {exc}",
                residual=exc.residual,
                iterations=exc.iterations,
            ) from exc
        l1 += lengths[k] * float(np.linalg.norm(right.as_array() - left.as_array()))
    weights = bly_weights(mids, u, v, q, kappa1, kappa2)
    value = float((np.abs(q) * weights.W * lengths[:, None]).sum())
    return PhiEvaluation(value=value, edges=edges, q=q, weights=weights, l1=l1)


def phi(
    u: Profile,
    v: Profile,
    window: tuple[float, float],
    kappa1: float,
    kappa2: float,
    gas: GasParameters,
) -> float:
    return phi_breakdown(u, v, window, kappa1, kappa2, gas).value


def l1_distance(u: Profile, v: Profile, window: tuple[float, float]) -> float:
    edges = common_refinement((u, v), window)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        x = 0.5 * (a + b)
        total += (b - a) * float(np.linalg.norm(v.state_at(x).as_array() - u.state_at(x).as_array()))
    return total


@dataclass(frozen=True)
class EquivalenceReport:
    passed: bool
    K: float
    checked: int
    max_weight: float
    min_weight: float
    violations: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": "phi_equivalence",
            "passed": self.passed,
            "K": self.K,
            "checked": self.checked,
            "max_weight": self.max_weight,
            "min_weight": self.min_weight,
            "violations": list(self.violations),
        }


def equivalence_report(
    pairs: Sequence[tuple[Profile, Profile]],
    window: tuple[float, float],
    kappa1: float,
    kappa2: float,
    k: float,
    gas: GasParameters,
) -> EquivalenceReport:
    """``l1 / K <= Phi <= 2 K l1`` and ``1 <= W_i <= 2`` on every pair."""
    violations = []
    w_max, w_min = 1.0, 1.0
    for index, (u, v) in enumerate(pairs):
        evaluation = phi_breakdown(u, v, window, kappa1, kappa2, gas)
        lo, hi = evaluation.l1 / k, 2.0 * k * evaluation.l1
        if not lo * (1.0 - 1e-12) <= evaluation.value <= hi * (1.0 + 1e-12) + 1e-300:
            violations.append(f"pair {index}: Phi={evaluation.value:.6g} outside [{lo:.6g}, {hi:.6g}]")
        if evaluation.weights.W.size:
            w_max = max(w_max, float(evaluation.weights.W.max()))
            w_min = min(w_min, float(evaluation.weights.W.min()))
    if w_max > 2.0:
        violations.append(f"weights reach {w_max:.6g} > 2")
    return EquivalenceReport(not violations, k, len(pairs), w_max, w_min, tuple(violations))


def calibrate_bly_kappas(
    pairs: Sequence[tuple[Profile, Profile]],
    window: tuple[float, float],
    gas: GasParameters,
    kappa1: float = 1.0,
    kappa2: float = 1.0,
    max_halvings: int = 20,
) -> tuple[float, float, float]:
    """Halve both coefficients until every weight stays at most 2; returns ``(kappa1, kappa2, max W)``."""
    start = (kappa1, kappa2)
    worst = 1.0
    for _ in range(max_halvings + 1):
        worst = 1.0
        for u, v in pairs:
            worst = max(worst, phi_breakdown(u, v, window, kappa1, kappa2, gas).weights.max_weight)
        if worst <= 2.0:
            break
        kappa1, kappa2 = 0.5 * kappa1, 0.5 * kappa2
    if (kappa1, kappa2) != start:
        logger.info("shrunk kappa1, kappa2 from %s to (%g, %g)", start, kappa1, kappa2)
    return kappa1, kappa2, worst


# ---------------------------------------------------------------------------
# Time monitors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlopeWindow:
    """Largest forward-difference slope of ``Phi`` in one interaction-free window."""

    start: float
    end: float
    slope: float
    shift_term: float

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "slope": self.slope, "shift_term": self.shift_term}


@dataclass(frozen=True)
class PhiSlopeReport:
    """Sampled ``Phi`` and its slope and jump verdicts.

    Attributes:
        samples: ``(t, Phi)`` pairs.
        windows: Slope summaries of the interaction-free windows used.
        jumps: ``(t, Phi(t-), Phi(t+))`` at every event time of either trajectory.
        skipped: Windows shorter than the minimum length.
        k_required: Smallest ``K`` making every window meet the bound with ``C``.
        c: The ``C`` used (given, or calibrated as ``max slope / nu``).
    """

    samples: tuple[tuple[float, float], ...]
    windows: tuple[SlopeWindow, ...]
    jumps: tuple[tuple[float, float, float], ...]
    skipped: int
    nu: float
    c: float
    k_required: float
    k: float | None
    violations: tuple[str, ...] = ()

    @property
    def max_slope(self) -> float:
        return max((w.slope for w in self.windows), default=0.0)

    @property
    def passed(self) -> bool:
        return not self.violations

    def csv_rows(self) -> list[list]:
        return [[t, value] for t, value in self.samples]

    def to_dict(self) -> dict:
        return {
            "name": "phi_slope",
            "passed": self.passed,
            "nu": self.nu,
            "C": self.c,
            "K": self.k,
            "k_required": self.k_required,
            "max_slope": self.max_slope,
            "skipped_windows": self.skipped,
            "windows": [w.to_dict() for w in self.windows],
            "jumps": [list(j) for j in self.jumps],
            "violations": list(self.violations),
        }


def shift_term(psi: TrajectoryRecord, t: float, gas: GasParameters) -> float:
    """``sum over shocks |psi(h+) - psi(h-)| |h' - h'_true|`` at time *t*."""
    total = 0.0
    for front in psi.profile_at(t).fronts:
        if front.kind != SHOCK:
            continue
        total += front.jump * abs(front.speed - rh_speed(front, gas))
    return total


def phi_slope_monitor(
    u: TrajectoryRecord,
    psi: TrajectoryRecord,
    window: tuple[float, float],
    kappa1: float,
    kappa2: float,
    gas: GasParameters,
    sample_dt: float,
    *,
    k: float | None = None,
    c: float | None = None,
) -> PhiSlopeReport:
    """Sample ``Phi(u(t), psi(t))`` and check its slope and its jumps.

    Interaction-free windows are delimited by the event and speed-change
    times of both trajectories. Within a window the slope must satisfy
    ``dPhi/dt <= K shift_term + C nu``; across an event time ``Phi`` must not
    increase.
    """
    if sample_dt <= 0.0:
        raise UsageError("sample_dt must be positive")
    t0 = max(u.t_start, psi.t_start)
    t1 = min(u.t_final, psi.t_final)
    nu = max(u.params.nu, psi.params.nu)
    breaks = sorted(
        {t0, t1}
        | {t for t in u.event_times() if t0 < t < t1}
        | {t for t in psi.event_times() if t0 < t < t1}
        | {s.time for s in psi.shift_updates if t0 < s.time < t1}
    )

    def value(t: float, side: str = "+") -> float:
        return phi(u.profile_at(t, side), psi.profile_at(t, side), window, kappa1, kappa2, gas)

    samples: list[tuple[float, float]] = []
    raw_windows: list[tuple[float, float, float, float]] = []
    skipped = 0
    for a, b in zip(breaks, breaks[1:]):
        if b - a < MIN_WINDOW_SAMPLES * sample_dt:
            skipped += 1
            continue
        n = max(int(math.floor((b - a) / sample_dt)), 2)
        grid = np.linspace(a, b, n + 1)[1:-1]
        values = [value(float(t)) for t in grid]
        samples.extend(zip(grid.tolist(), values))
        slopes = np.diff(values) / np.diff(grid)
        raw_windows.append((a, b, float(slopes.max()), shift_term(psi, 0.5 * (a + b), gas)))
    if skipped:
        logger.info("skipped %d slope windows shorter than %d samples", skipped, MIN_WINDOW_SAMPLES)

    jumps = []
    violations = []
    for t in breaks[1:-1]:
        before, after = value(t, "-"), value(t, "+")
        jumps.append((t, before, after))
        if after > before * (1.0 + PHI_JUMP_TOL) + PHI_JUMP_TOL:
            violations.append(f"Phi increased across t={t:.12g}: {before:.6g} -> {after:.6g}")

    if c is None:
        unshifted = [s for _, _, s, term in raw_windows if term <= nu]
        c = max([0.0, *unshifted]) / nu
    k_required = 0.0
    for _, _, slope, term in raw_windows:
        excess = slope - c * nu
        if excess > 0.0:
            k_required = max(k_required, excess / term if term > 0.0 else math.inf)
    if k is not None:
        for a, b, slope, term in raw_windows:
            if slope > k * term + c * nu + 1e-12:
                violations.append(f"slope {slope:.6g} on [{a:.6g}, {b:.6g}] exceeds {k * term + c * nu:.6g}")
    return PhiSlopeReport(
        samples=tuple(samples),
        windows=tuple(SlopeWindow(*w) for w in raw_windows),
        jumps=tuple(jumps),
        skipped=skipped,
        nu=nu,
        c=c,
        k_required=k_required,
        k=k,
        violations=tuple(violations),
    )


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares fit of ``log y`` against ``log x``."""

    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float
    n: int
    points: tuple[tuple[float, float], ...] = field(default=())

    def within(self, target: float, tol: float) -> bool:
        return abs(self.slope - target) <= tol

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "ci": [self.ci_low, self.ci_high],
            "n": self.n,
            "points": [list(p) for p in self.points],
        }


def loglog_fit(xs: Sequence[float], ys: Sequence[float], confidence: float = 0.95) -> SlopeFit:
    """Fit a power law through the positive points of ``(xs, ys)``.

    Raises:
        UsageError: With fewer than two positive points.
    """
    points = [(float(x), float(y)) for x, y in zip(xs, ys) if x > 0.0 and y > 0.0]
    if len(points) < 2:
        raise UsageError("a log-log fit needs at least two positive points")
    lx = np.log([p[0] for p in points])
    ly = np.log([p[1] for p in points])
    result = stats.linregress(lx, ly)
    if len(points) > 2:
        spread = float(stats.t.ppf(0.5 + 0.5 * confidence, len(points) - 2)) * float(result.stderr)
    else:
        spread = 0.0
    return SlopeFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        stderr=float(result.stderr),
        ci_low=float(result.slope) - spread,
        ci_high=float(result.slope) + spread,
        n=len(points),
        points=tuple(points),
    )


def nu_sweep_slope(max_slopes: dict[float, float]) -> SlopeFit:
    """Log-log fit of the largest un-shifted slope against ``nu``."""
    nus = sorted(max_slopes)
    return loglog_fit(nus, [max_slopes[nu] for nu in nus])
