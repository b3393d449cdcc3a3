"""Total variation distance, empirical mixing times and their analytic bounds.

Distances use ``sum_i |P_i - Q_i|`` with no factor 1/2, so they range over
``[0, 2]`` and every threshold ``epsilon`` is on that scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InfiniteBoundError, ParameterError
from .evolve import Trajectory

__all__ = [
    "tv_distance",
    "tv_to_uniform",
    "tv_envelope",
    "MixingTime",
    "instantaneous_mixing_time",
    "instantaneous_bound",
    "cycle_instantaneous_bound",
    "average_distribution",
    "average_mixing_time",
    "average_lower_bound",
    "MixingReport",
    "mixing_report",
    "envelope_violations",
]

MODES = {"first_crossing": "first_crossing", "first": "first_crossing",
         "permanent_crossing": "permanent_crossing", "permanent": "permanent_crossing"}


def tv_distance(P, Q) -> float:
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape:
        raise ParameterError(f"distribution lengths differ: {P.shape} vs {Q.shape}")
    for name, d in (("P", P), ("Q", Q)):
        if abs(d.sum() - 1.0) > 1e-6:
            raise ParameterError(f"{name} is not normalised (sum={d.sum()!r})")
    return float(np.abs(P - Q).sum())


def tv_to_uniform(distributions) -> np.ndarray:
    """Distance of each row to the uniform distribution (vectorised, unchecked)."""
    d = np.asarray(distributions, dtype=float)
    return np.abs(d - 1.0 / d.shape[-1]).sum(axis=-1)


def tv_envelope(N: int, gamma: float, t) -> np.ndarray | float:
    """Upper envelope ``N exp(-gamma (N-1) t / N)`` of the distance to uniform."""
    if gamma < 0:
        raise ParameterError(f"gamma must be >= 0, got {gamma!r}")
    out = N * np.exp(-gamma * (N - 1) / N * np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _check_epsilon(epsilon: float) -> None:
    if not 0 < epsilon < 1:
        raise ParameterError(f"epsilon must satisfy 0 < epsilon < 1, got {epsilon!r}")


def _check_gamma_positive(gamma: float) -> None:
    if gamma < 0:
        raise ParameterError(f"gamma must be >= 0, got {gamma!r}")
    if gamma == 0:
        raise InfiniteBoundError("mixing-time bound is infinite for gamma = 0")


def instantaneous_bound(N: int, gamma: float, epsilon: float) -> float:
    """Time after which the envelope is below ``epsilon`` (ring lattice, ``l >= 2``)."""
    _check_gamma_positive(gamma)
    return math.log(N / epsilon) / gamma * (1 + 1 / (N - 1))


def cycle_instantaneous_bound(N: int, gamma: float, epsilon: float) -> float:
    """Reference bound for the plain cycle, ``(1/gamma) ln(N/eps) (1 + 2/(N-2))``."""
    _check_gamma_positive(gamma)
    if N <= 2:
        raise ParameterError(f"cycle bound needs N > 2, got N={N}")
    return math.log(N / epsilon) / gamma * (1 + 2 / (N - 2))


def average_lower_bound(N: int, gamma: float, epsilon: float) -> float:
    _check_gamma_positive(gamma)
    _check_epsilon(epsilon)
    bound = N / (gamma * epsilon)
    # formula assumes gamma * T >> 1 at T = bound
    if gamma * bound < 10:
        warnings.warn(
            f"gamma*T = {gamma * bound:.3g} at the bound; the large gamma*T regime does not apply",
            RuntimeWarning,
            stacklevel=2,
        )
    return bound


@dataclass(frozen=True)
class MixingTime:
    value: float | None  # None when not reached
    reached: bool
    mode: str
    final_tv: float  # distance at the trajectory horizon
    resolution: float  # time precision of ``value``

    def __float__(self) -> float:
        return math.inf if self.value is None else float(self.value)


def _tv_at(traj: Trajectory, t: float) -> float:
    return float(tv_to_uniform(traj.at(np.array([t])))[0])


def _bisect(traj: Trajectory, lo: float, hi: float, epsilon: float, rel: float) -> float:
    # invariant: tv(lo) >= epsilon > tv(hi)
    while hi - lo > rel * max(hi, 1e-300):
        mid = 0.5 * (lo + hi)
        if _tv_at(traj, mid) < epsilon:
            hi = mid
        else:
            lo = mid
    return hi


def instantaneous_mixing_time(
    trajectory: Trajectory, epsilon: float, mode: str = "first_crossing", rel_precision: float = 1e-6
) -> MixingTime:
    """First (or first permanent) time the distance to uniform drops below ``epsilon``.

    Samples locate the crossing; it is then bisected on the trajectory's dense
    output (or linear interpolation) to ``rel_precision``.
    """
    _check_epsilon(epsilon)
    try:
        mode = MODES[mode]
    except KeyError:
        raise ParameterError(f"unknown mode {mode!r}; expected first or permanent") from None
    if trajectory.times.size == 0:
        raise ParameterError("empty trajectory")
    times = trajectory.times
    tv = tv_to_uniform(trajectory.distributions)
    below = tv < epsilon
    final = float(tv[-1])

    if mode == "first_crossing":
        hits = np.flatnonzero(below)
        if hits.size == 0:
            return MixingTime(None, False, mode, final, 0.0)
        i = int(hits[0])
    else:
        above = np.flatnonzero(~below)
        if above.size == 0:
            i = 0
        elif above[-1] == times.size - 1:
            return MixingTime(None, False, mode, final, 0.0)
        else:
            i = int(above[-1]) + 1
    if i == 0:
        return MixingTime(float(times[0]), True, mode, final, 0.0)
    t = _bisect(trajectory, float(times[i - 1]), float(times[i]), epsilon, rel_precision)
    return MixingTime(t, True, mode, final, rel_precision * t)


def _quadrature_grid(traj: Trajectory, t_stop: float, max_dt: float | None) -> np.ndarray:
    times = traj.times[traj.times < t_stop]
    grid = np.append(times, t_stop)
    if traj.dense is None or max_dt is None:
        return grid
    pieces = [grid[:1]]
    for a, b in zip(grid[:-1], grid[1:]):
        k = max(1, int(math.ceil((b - a) / max_dt - 1e-12)))
        pieces.append(np.linspace(a, b, k + 1)[1:])
    return np.concatenate(pieces)


def _running_integral(traj: Trajectory, t_stop: float, max_dt: float | None):
    grid = _quadrature_grid(traj, t_stop, max_dt)
    values = traj.at(grid)
    steps = np.diff(grid)[:, None] * 0.5 * (values[1:] + values[:-1])
    cumulative = np.vstack([np.zeros((1, values.shape[1])), np.cumsum(steps, axis=0)])
    return grid, values, cumulative


def average_distribution(trajectory: Trajectory, tau: float, max_dt: float | None = 0.05) -> np.ndarray:
    """Time average ``(1/tau) int_0^tau P(t) dt`` by composite trapezoid.

    With dense output the sample grid is refined to spacing ``<= max_dt``.
    """
    if tau < 0:
        raise ParameterError(f"tau must be >= 0, got {tau!r}")
    if tau > trajectory.horizon * (1 + 1e-12):
        raise ParameterError(f"tau={tau!r} exceeds trajectory horizon {trajectory.horizon!r}")
    t0 = float(trajectory.times[0])
    if tau <= t0:
        return trajectory.at(np.array([t0]))[0]
    _, _, cumulative = _running_integral(trajectory, tau, max_dt)
    return cumulative[-1] / (tau - t0)


def average_mixing_time(
    trajectory: Trajectory,
    epsilon: float,
    horizon: float | None = None,
    max_dt: float | None = 0.05,
) -> MixingTime:
    """Smallest ``T`` after which the running average stays within ``epsilon`` of uniform.

    The running average is checked at every node of the quadrature grid up
    to ``horizon``; ``resolution`` is the grid spacing at the crossing.
    """
    _check_epsilon(epsilon)
    if trajectory.times.size == 0:
        raise ParameterError("empty trajectory")
    horizon = trajectory.horizon if horizon is None else float(horizon)
    if horizon > trajectory.horizon * (1 + 1e-12):
        raise ParameterError(f"horizon={horizon!r} exceeds trajectory horizon {trajectory.horizon!r}")
    grid, values, cumulative = _running_integral(trajectory, horizon, max_dt)
    elapsed = grid - grid[0]
    running = np.empty_like(values)
    running[0] = values[0]
    running[1:] = cumulative[1:] / elapsed[1:, None]
    tv = tv_to_uniform(running)
    final = float(tv[-1])
    above = np.flatnonzero(tv >= epsilon)
    if above.size == 0:
        return MixingTime(float(grid[0]), True, "average", final, 0.0)
    v = int(above[-1])
    if v == grid.size - 1:
        return MixingTime(None, False, "average", final, 0.0)
    return MixingTime(float(grid[v + 1]), True, "average", final, float(grid[v + 1] - grid[v]))


def envelope_violations(trajectory: Trajectory, gamma: float, slack: float = 1e-9) -> int:
    tv = tv_to_uniform(trajectory.distributions)
    env = tv_envelope(trajectory.N, gamma, trajectory.times)
    return int(np.count_nonzero(tv > env + slack))


@dataclass(frozen=True)
class MixingReport:
    N: int
    l: int
    gamma: float
    epsilon: float
    mode: str
    source: str
    horizon: float
    m_inst_empirical: float | None
    m_inst_final_tv: float
    m_inst_bound: float | None
    m_inst_cycle_bound: float | None
    m_ave_empirical: float | None
    m_ave_tv_at_horizon: float
    m_ave_resolution: float
    m_ave_lower_bound: float | None
    tv_envelope_violations: int

    def as_dict(self) -> dict:
        return asdict(self)


def mixing_report(
    trajectory: Trajectory,
    l: int,
    gamma: float,
    epsilon: float,
    mode: str = "first_crossing",
    max_dt: float | None = 0.05,
) -> MixingReport:
    """Empirical mixing times next to the analytic bounds for one parameter point.

    Bounds are ``None`` when they diverge (``gamma == 0``).
    """
    _check_epsilon(epsilon)
    N = trajectory.N
    inst = instantaneous_mixing_time(trajectory, epsilon, mode)
    ave = average_mixing_time(trajectory, epsilon, max_dt=max_dt)
    if gamma > 0:
        bound = instantaneous_bound(N, gamma, epsilon)
        cycle = cycle_instantaneous_bound(N, gamma, epsilon)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ave_bound = average_lower_bound(N, gamma, epsilon)
    else:
        bound = cycle = ave_bound = None
    return MixingReport(
        N=N,
        l=l,
        gamma=gamma,
        epsilon=epsilon,
        mode=inst.mode,
        source=trajectory.source,
        horizon=trajectory.horizon,
        m_inst_empirical=inst.value,
        m_inst_final_tv=inst.final_tv,
        m_inst_bound=bound,
        m_inst_cycle_bound=cycle,
        m_ave_empirical=ave.value,
        m_ave_tv_at_horizon=ave.final_tv,
        m_ave_resolution=ave.resolution,
        m_ave_lower_bound=ave_bound,
        tv_envelope_violations=envelope_violations(trajectory, gamma),
    )
