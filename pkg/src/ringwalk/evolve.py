"""Walker dynamics: coherent, classical, exact dephasing and first-order closed form.

Time units follow the Hamiltonian preset. The coherent walk lives in
``section2`` units (unit bonds); the dephasing master equation and its
closed form live in ``gurvitz`` units (quarter bonds). ``Trajectory.time_scale``
converts a trajectory's clock to section2 time: ``t_section2 = time_scale * t``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError, UnsupportedCaseError
from .integrate import DOPRI5, Step
from .network import NetworkSpec, PRESETS, preset_hamiltonian
from .spectral import (
    CorrectionRule,
    bloch_system,
    classify_degeneracies,
    corrections,
    momentum_eigenvalues,
    resolve_sign,
)

__all__ = [
    "DensityMatrix",
    "Trajectory",
    "MasterResult",
    "DenseDiagonal",
    "coherent_amplitude",
    "coherent_amplitudes",
    "quantum_probability",
    "classical_probability",
    "classical_probabilities",
    "coherent_trajectory",
    "classical_trajectory",
    "integrate_master",
    "perturbative_density",
    "perturbative_distribution",
    "perturbative_trajectory",
    "sample_times",
]

WEAK_DEPHASING_LIMIT = 0.1  # gamma * N above which the first-order form is unreliable


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ParameterError(f"density matrix must be square, got shape {rho.shape}")
        object.__setattr__(self, "entries", rho)

    @classmethod
    def point(cls, N: int, node: int = 0) -> "DensityMatrix":
        if not 0 <= node < N:
            raise ParameterError(f"initial node must satisfy 0 <= node < N={N}, got {node}")
        rho = np.zeros((N, N), dtype=complex)
        rho[node, node] = 1.0
        return cls(rho)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def trace_error(self) -> float:
        return float(abs(np.trace(self.entries) - 1.0))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.entries + self.entries.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.entries)).copy()

    def validate(self, *, check_positivity: bool = False) -> None:
        if self.hermiticity_error() > 1e-12:
            raise ParameterError(f"density matrix not Hermitian ({self.hermiticity_error():.3g})")
        if self.trace_error() > 1e-9:
            raise ParameterError(f"density matrix trace off by {self.trace_error():.3g}")
        if check_positivity and self.min_eigenvalue() < -1e-9:
            raise ParameterError(f"density matrix has eigenvalue {self.min_eigenvalue():.3g}")


@dataclass
class Trajectory:
    """Node-occupation distributions sampled at strictly increasing times."""

    times: np.ndarray
    distributions: np.ndarray  # shape (len(times), N)
    source: str  # exact | perturbative | coherent | classical
    time_scale: float = 1.0
    dense: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.distributions = np.asarray(self.distributions, dtype=float)
        if self.times.ndim != 1 or self.distributions.shape[0] != self.times.size:
            raise ParameterError("times and distributions must have matching length")
        if np.any(np.diff(self.times) <= 0):
            raise ParameterError("trajectory times must be strictly increasing")

    @property
    def N(self) -> int:
        return self.distributions.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def at(self, t) -> np.ndarray:
        """Distribution(s) at arbitrary times, via dense output when available."""
        t = np.asarray(t, dtype=float)
        if self.dense is not None:
            return self.dense(t)
        cols = [np.interp(t, self.times, self.distributions[:, j]) for j in range(self.N)]
        return np.stack(cols, axis=-1)

    def normalization_error(self) -> float:
        return float(np.max(np.abs(self.distributions.sum(axis=1) - 1.0)))

    def min_probability(self) -> float:
        return float(self.distributions.min())


def sample_times(t_end: float, stride: float) -> np.ndarray:
    """``0, stride, 2 stride, ...`` up to and including ``t_end``."""
    if t_end < 0:
        raise ParameterError(f"t_end must be >= 0, got {t_end!r}")
    if t_end == 0:
        return np.zeros(1)
    if not stride > 0:
        raise ParameterError(f"stride must be > 0, got {stride!r}")
    count = int(np.floor(t_end / stride + 1e-9))
    times = stride * np.arange(count + 1)
    if t_end - times[-1] > 1e-9 * max(1.0, t_end):
        times = np.append(times, t_end)
    else:
        times[-1] = min(times[-1], t_end)
    return times


# -- coherent and classical walks (section2 units) ------------------------------


def coherent_amplitudes(spec: NetworkSpec, j: int, t: float) -> np.ndarray:
    """``alpha_(k,j)(t) = <k| exp(-iHt) |j>`` for every ``k``."""
    E = bloch_system(spec).energies
    kernel = np.fft.fft(np.exp(-1j * t * E)) / spec.N  # indexed by (k - j) mod N
    return np.roll(kernel, j)


def coherent_amplitude(spec: NetworkSpec, k: int, j: int, t: float) -> complex:
    return complex(coherent_amplitudes(spec, j, t)[k])


def quantum_probability(spec: NetworkSpec, k: int, j: int, t: float) -> float:
    return float(abs(coherent_amplitude(spec, k, j, t)) ** 2)


def classical_probabilities(spec: NetworkSpec, gamma_rate: float, j: int, t: float) -> np.ndarray:
    """Continuous-time random walk occupation ``p_(k,j)(t)`` for every ``k``.

    Transfer matrix ``T = gamma_rate * (A - D)``; its negated eigenvalues
    ``-gamma_rate * E_n`` are the non-negative decay rates.
    """
    if gamma_rate < 0:
        raise ParameterError(f"gamma_rate must be >= 0, got {gamma_rate!r}")
    E = bloch_system(spec).energies
    kernel = np.fft.fft(np.exp(gamma_rate * t * E)).real / spec.N
    return np.roll(kernel, j)


def classical_probability(spec: NetworkSpec, gamma_rate: float, k: int, j: int, t: float) -> float:
    return float(classical_probabilities(spec, gamma_rate, j, t)[k])


def _spectral_trajectory(spec, times, kernel_fn, source, node, meta) -> Trajectory:
    def dense(t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        out = np.roll(kernel_fn(flat), node, axis=1)
        return out.reshape(t.shape + (spec.N,))

    times = np.asarray(times, dtype=float)
    return Trajectory(times, dense(times), source, 1.0, dense, meta)


def coherent_trajectory(spec: NetworkSpec, times: Sequence[float], initial_node: int = 0) -> Trajectory:
    E = bloch_system(spec).energies
    N = spec.N

    def kernel(t):
        return np.abs(np.fft.fft(np.exp(-1j * np.outer(t, E)), axis=1) / N) ** 2

    meta = {"preset": "section2"}
    return _spectral_trajectory(spec, times, kernel, "coherent", initial_node, meta)


def classical_trajectory(
    spec: NetworkSpec, gamma_rate: float, times: Sequence[float], initial_node: int = 0
) -> Trajectory:
    if gamma_rate < 0:
        raise ParameterError(f"gamma_rate must be >= 0, got {gamma_rate!r}")
    E = bloch_system(spec).energies
    N = spec.N

    def kernel(t):
        return np.fft.fft(np.exp(gamma_rate * np.outer(t, E)), axis=1).real / N

    meta = {"gamma_rate": gamma_rate}
    return _spectral_trajectory(spec, times, kernel, "classical", initial_node, meta)


# -- exact dephasing master equation --------------------------------------------


class DenseDiagonal:
    """Piecewise quartic interpolant of the populations between accepted steps."""

    def __init__(self, t_old, h, y_old, Q):
        self.t_old = np.asarray(t_old)
        self.h = np.asarray(h)
        self.y_old = np.asarray(y_old)  # (steps, N)
        self.Q = np.asarray(Q)  # (steps, N, 4)
        self.t_end = float(self.t_old[-1] + self.h[-1]) if self.t_old.size else 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        if self.t_old.size == 0:
            raise ParameterError("dense output is empty")
        idx = np.clip(np.searchsorted(self.t_old, flat, side="right") - 1, 0, self.t_old.size - 1)
        x = (flat - self.t_old[idx]) / self.h[idx]
        powers = np.stack([x, x**2, x**3, x**4], axis=-1)
        vals = self.y_old[idx] + self.h[idx, None] * np.einsum("snk,sk->sn", self.Q[idx], powers)
        return vals.reshape(t.shape + (self.y_old.shape[1],))


@dataclass
class MasterResult:
    trajectory: Trajectory
    final: DensityMatrix
    checkpoints: list[tuple[float, DensityMatrix]]
    max_hermiticity_drift: float  # largest pre-correction |rho - rho^dagger| over steps
    max_trace_drift: float  # largest pre-correction |Tr rho - 1| over steps
    n_steps: int
    n_rejected: int


def integrate_master(
    spec: NetworkSpec,
    gamma: float,
    rho0: DensityMatrix | None = None,
    t_end: float = 10.0,
    dt_max: float = np.inf,
    *,
    times: Sequence[float] | None = None,
    stride: float = 0.5,
    checkpoints: Sequence[float] = (),
    preset: str = "gurvitz",
    rtol: float = 1e-9,
    atol: float = 1e-10,
    dense_output: bool = True,
) -> MasterResult:
    """Integrate ``drho/dt = -i[H, rho] - gamma (rho - diag rho)``.

    Populations are recorded at ``times`` (default: every ``stride``) using
    the integrator's dense output. After every accepted step the state is
    re-Hermitised and its trace renormalised; the drift removed by that
    cleanup is tracked in the result.
    """
    if gamma < 0:
        raise ParameterError(f"gamma must be >= 0, got {gamma!r}")
    if not dt_max > 0:
        raise ParameterError(f"dt_max must be > 0, got {dt_max!r}")
    N = spec.N
    rho0 = rho0 if rho0 is not None else DensityMatrix.point(N)
    if rho0.dim != N:
        raise ParameterError(f"initial state has dimension {rho0.dim}, network has N={N}")
    rho0.validate()
    times = sample_times(t_end, stride) if times is None else np.asarray(times, dtype=float)
    if times.size == 0 or times[0] < 0 or times[-1] > t_end or np.any(np.diff(times) <= 0):
        raise ParameterError("sample times must be strictly increasing within [0, t_end]")
    checkpoints = sorted(float(c) for c in checkpoints)
    if checkpoints and (checkpoints[0] < 0 or checkpoints[-1] > t_end):
        raise ParameterError("checkpoints must lie within [0, t_end]")

    H = preset_hamiltonian(N, spec.l, preset)
    off = 1.0 - np.eye(N)
    time_scale = PRESETS[preset].hopping / PRESETS["section2"].hopping
    meta = {"preset": preset, "gamma": gamma, "rtol": rtol, "atol": atol}

    def rhs(t, rho):
        return -1j * (H @ rho - rho @ H) - gamma * (off * rho)

    drift = {"herm": 0.0, "trace": 0.0}

    def project(rho):
        drift["herm"] = max(drift["herm"], float(np.max(np.abs(rho - rho.conj().T))))
        tr = np.trace(rho)
        drift["trace"] = max(drift["trace"], float(abs(tr - 1.0)))
        rho = 0.5 * (rho + rho.conj().T)
        return rho / np.real(np.trace(rho))

    dists = np.empty((times.size, N))
    saved: list[tuple[float, DensityMatrix]] = []
    ti = ci = 0
    rho = rho0.entries.copy()

    def record_upto(t_hi, state_at):
        nonlocal ti, ci
        while ti < times.size and times[ti] <= t_hi:
            dists[ti] = np.real(np.diag(state_at(times[ti])))
            ti += 1
        while ci < len(checkpoints) and checkpoints[ci] <= t_hi:
            # raw integrator state, so conservation checks see the actual drift
            saved.append((checkpoints[ci], DensityMatrix(np.array(state_at(checkpoints[ci])))))
            ci += 1

    record_upto(0.0, lambda t: rho)

    dense_parts: list[Step] = []
    n_steps = n_rej = 0
    if t_end > 0:
        solver = DOPRI5(rhs, 0.0, rho, rtol=rtol, atol=atol, max_step=dt_max,
                        project=project, t_bound=t_end)
        while solver.t < t_end:
            step = solver.step()
            record_upto(step.t_new, lambda t, s=step: s.y_new if t == s.t_new else s(t))
            if dense_output:
                dense_parts.append(
                    (step.t_old, step.h, np.real(np.diag(step.y_old)),
                     np.real(np.einsum("iik->ik", step.Q)))
                )
        rho = solver.y
        n_steps, n_rej = solver.n_accepted, solver.n_rejected

    dense = None
    if dense_output and dense_parts:
        t_old, h, y_old, Q = zip(*dense_parts)
        dense = DenseDiagonal(np.array(t_old), np.array(h), np.array(y_old), np.array(Q))
    elif dense_output:
        p0 = np.real(np.diag(rho))
        dense = lambda t: np.broadcast_to(p0, np.shape(t) + (N,)).copy()  # noqa: E731

    traj = Trajectory(times, dists, "exact", time_scale, dense, meta)
    return MasterResult(
        trajectory=traj,
        final=DensityMatrix(rho),
        checkpoints=saved,
        max_hermiticity_drift=drift["herm"],
        max_trace_drift=drift["trace"],
        n_steps=n_steps,
        n_rejected=n_rej,
    )


# -- first-order closed form (gurvitz units) ------------------------------------


def _closed_form_rates(spec: NetworkSpec, gamma: float, rule: CorrectionRule):
    if spec.l < 2:
        raise UnsupportedCaseError(
            "the closed form covers l >= 2 only; use integrate_master for the cycle (l = 1)"
        )
    if gamma < 0:
        raise ParameterError(f"gamma must be >= 0, got {gamma!r}")
    if gamma * spec.N > WEAK_DEPHASING_LIMIT:
        warnings.warn(
            f"gamma*N = {gamma * spec.N:.3g} exceeds {WEAK_DEPHASING_LIMIT}; "
            "first-order dephasing theory may be inaccurate",
            RuntimeWarning,
            stacklevel=3,
        )
    N = spec.N
    sigma = resolve_sign(spec)
    lam = momentum_eigenvalues(N, spec.l)
    corr = corrections(spec, gamma, rule, classify_degeneracies(spec))
    rates = 1j * sigma * lam + corr
    m, n = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    keep = (m + n) % N != 0
    return rates, keep, sigma


def perturbative_density(
    spec: NetworkSpec, gamma: float, t: float, rule: CorrectionRule = "classes"
) -> DensityMatrix:
    """First-order density matrix for the walker started on node 0.

    ``rho(t) = I/N + (1/N^2) sum_{m+n != 0 mod N} exp(t r_mn) exp(2 pi i (m alpha + n beta)/N)``.
    With ``rule="printed"`` every rate carries the nondegenerate correction
    ``-gamma (N-1)/N``; ``"classes"`` uses the uniform-combination correction
    of the degenerate class each plane wave belongs to.
    """
    rates, keep, _ = _closed_form_rates(spec, gamma, rule)
    W = np.where(keep, np.exp(t * rates), 0.0)
    rho = np.eye(spec.N) / spec.N + np.fft.ifft2(W)
    return DensityMatrix(rho)


def _closed_form_populations(spec, gamma, times, rule):
    rates, keep, sigma = _closed_form_rates(spec, gamma, rule)
    N = spec.N
    m = np.arange(N)
    # group plane waves by s = (m + n) mod N; row s lists the N pairs (m, s - m)
    group_rates = np.stack([rates[m, (s - m) % N] for s in range(N)])
    group_keep = np.stack([keep[m, (s - m) % N] for s in range(N)])
    times = np.asarray(times, dtype=float).ravel()
    out = np.empty((times.size, N), dtype=complex)
    chunk = max(1, 4_000_000 // (N * N))
    for start in range(0, times.size, chunk):
        tt = times[start:start + chunk]
        e = np.exp(tt[:, None, None] * group_rates[None]) * group_keep[None]
        c = e.sum(axis=2)  # (T, s)
        out[start:start + chunk] = 1.0 / N + np.fft.ifft(c, axis=1) / N
    return out, sigma


def perturbative_distribution(
    spec: NetworkSpec, gamma: float, t, rule: CorrectionRule = "classes", initial_node: int = 0
) -> np.ndarray:
    """Closed-form populations ``P_j(t)``; shape ``(N,)`` or ``t.shape + (N,)``.

    Other start nodes follow from translation covariance of the ring.
    """
    P, _ = _closed_form_populations(spec, gamma, t, rule)
    shape = np.shape(t) + (spec.N,)
    return np.roll(P.real, initial_node, axis=-1).reshape(shape)


def perturbative_trajectory(
    spec: NetworkSpec,
    gamma: float,
    times: Sequence[float],
    rule: CorrectionRule = "classes",
    initial_node: int = 0,
) -> Trajectory:
    if not 0 <= initial_node < spec.N:
        raise ParameterError(f"initial node must satisfy 0 <= node < N={spec.N}, got {initial_node}")
    times = np.asarray(times, dtype=float)
    P, sigma = _closed_form_populations(spec, gamma, times, rule)
    P = np.roll(P, initial_node, axis=-1)
    time_scale = PRESETS["gurvitz"].hopping / PRESETS["section2"].hopping
    meta = {
        "preset": "gurvitz",
        "gamma": gamma,
        "rule": rule,
        "sigma": sigma,
        "imag_residue": float(np.max(np.abs(P.imag))) if P.size else 0.0,
    }

    def dense(t):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return perturbative_distribution(spec, gamma, t, rule, initial_node)

    return Trajectory(times, P.real, "perturbative", time_scale, dense, meta)
