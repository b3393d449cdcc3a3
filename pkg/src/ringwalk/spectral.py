"""Bloch spectrum of the ring Hamiltonian and the momentum-space Liouvillian.

The dephasing generator acts on vectorised density matrices. Its coherent
part is diagonal in the plane-wave basis

    V^(m,n)_(mu,nu) = exp(2 pi i (m mu + n nu) / N) / N

with eigenvalue ``lambda_(m,n) = sum_z sin(pi z (m+n)/N) sin(pi z (m-n)/N)``.
The dephasing part only couples plane waves with equal ``(m + n) mod N``, so
first-order corrections are computed class by class inside each such group.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import CapacityError, ParameterError
from .network import NetworkSpec

__all__ = [
    "BlochSystem",
    "bloch_system",
    "bloch_vector",
    "momentum_eigenvalue",
    "momentum_eigenvalues",
    "momentum_vector",
    "perturbation_element",
    "l1_partner",
    "DegeneracyClass",
    "DegeneracyReport",
    "classify_degeneracies",
    "corrections",
    "liouvillian_dense",
    "liouvillian_action",
    "resolve_sign",
    "LiouvilleSpectrum",
    "liouville_spectrum",
    "DEGENERACY_TOL",
]

DEGENERACY_TOL = 1e-9

CorrectionRule = Literal["printed", "classes", "block"]


@dataclass(frozen=True)
class BlochSystem:
    N: int
    l: int
    thetas: np.ndarray
    energies: np.ndarray


def bloch_system(spec: NetworkSpec) -> BlochSystem:
    """Energies ``E_n = -2l + 2 sum_j cos(j theta_n)`` of the section2 Hamiltonian."""
    n = np.arange(spec.N)
    thetas = 2 * np.pi * n / spec.N
    j = np.arange(1, spec.l + 1)
    energies = -2.0 * spec.l + 2.0 * np.cos(np.outer(thetas, j)).sum(axis=1)
    # exact zero at theta=0 instead of a rounding residue
    energies[0] = 0.0
    return BlochSystem(spec.N, spec.l, thetas, energies)


def bloch_vector(N: int, n: int) -> np.ndarray:
    if not 0 <= n < N:
        raise ParameterError(f"Bloch index must satisfy 0 <= n < N={N}, got n={n}")
    j = np.arange(N)
    return np.exp(-2j * np.pi * n * j / N) / np.sqrt(N)


def momentum_eigenvalue(N: int, l: int, m: int, n: int) -> float:
    z = np.arange(1, l + 1)
    return float(
        np.sum(np.sin(np.pi * z * (n + m) / N) * np.sin(np.pi * z * (m - n) / N))
    )


def momentum_eigenvalues(N: int, l: int) -> np.ndarray:
    """``lambda_(m,n)`` for all pairs as an ``N x N`` array indexed ``[m, n]``.

    Antisymmetry ``lam[m, n] == -lam[n, m]`` holds exactly because the
    second sine factor is odd and evaluated on negated arguments.
    """
    m, n = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    z = np.arange(1, l + 1)[:, None, None]
    lam = np.sin(np.pi * z * (m + n) / N) * np.sin(np.pi * z * (m - n) / N)
    lam = lam.sum(axis=0)
    lam[m == n] = 0.0
    return lam


def momentum_vector(N: int, m: int, n: int) -> np.ndarray:
    """Plane-wave eigen-operator ``V^(m,n)`` as an ``N x N`` matrix."""
    mu = np.arange(N)
    return np.exp(2j * np.pi * (m * mu[:, None] + n * mu[None, :]) / N) / N


def perturbation_element(N: int, gamma: float, m: int, n: int, m2: int, n2: int) -> float:
    """Matrix element of the dephasing operator between ``V^(m,n)`` and ``V^(m2,n2)``."""
    same = gamma * (m == m2 and n == n2)
    coupled = gamma / N * (((m2 - m) + (n2 - n)) % N == 0)
    return float(-same + coupled)


def l1_partner(N: int, m: int, n: int) -> tuple[int, int]:
    """Partner ``(m', n')`` of ``(m, n)`` under the cycle (l = 1) pairing rules.

    Only defined for even ``N``.
    """
    if N % 2:
        raise ParameterError(f"cycle pairing rules need even N, got N={N}")
    h = N // 2
    if m >= h and n >= h:
        return n - h, m - h
    if m < h and n < h:
        return n + h, m + h
    if m >= h:
        return n + h, m - h
    return n - h, m + h


@dataclass(frozen=True)
class DegeneracyClass:
    """Plane waves sharing ``(m+n) mod N`` and (numerically) ``lambda``."""

    label: str  # diagonal | zero_mode | l1_quadruple | nondegenerate | unexpected_degeneracy
    group: int  # (m + n) mod N
    lam: float
    members: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def excluded_from_initial_state(self) -> bool:
        return self.label == "zero_mode"


@dataclass(frozen=True)
class DegeneracyReport:
    N: int
    l: int
    tol: float
    classes: tuple[DegeneracyClass, ...]
    class_index: np.ndarray = field(repr=False)

    def label_of(self, m: int, n: int) -> str:
        return self.classes[self.class_index[m, n]].label

    def class_of(self, m: int, n: int) -> DegeneracyClass:
        return self.classes[self.class_index[m, n]]

    @property
    def unexpected(self) -> tuple[DegeneracyClass, ...]:
        return tuple(c for c in self.classes if c.label == "unexpected_degeneracy")

    def by_label(self, label: str) -> tuple[DegeneracyClass, ...]:
        return tuple(c for c in self.classes if c.label == label)


def _cluster(values: np.ndarray, tol: float) -> list[list[int]]:
    order = np.argsort(values, kind="stable")
    groups: list[list[int]] = []
    for idx in order:
        if groups:
            ref = values[groups[-1][-1]]
            if abs(values[idx] - ref) < tol * max(1.0, abs(ref)):
                groups[-1].append(int(idx))
                continue
        groups.append([int(idx)])
    return groups


def _label(N: int, l: int, group: int, members: list[tuple[int, int]]) -> str:
    if group == 0:
        return "zero_mode"
    if len(members) == 1:
        m, n = members[0]
        return "diagonal" if m == n else "nondegenerate"
    if l == 1 and N % 2 == 0 and len(members) == 2:
        a, b = members
        if l1_partner(N, *a) == b and l1_partner(N, *b) == a:
            return "l1_quadruple"
    return "unexpected_degeneracy"


def classify_degeneracies(spec: NetworkSpec, tol: float = DEGENERACY_TOL) -> DegeneracyReport:
    """Partition all ``(m, n)`` into degenerate classes inside each ``m+n`` group.

    Every group is scanned numerically; the analytic expectations (no
    degeneracy for ``l >= 2``, pairings for the cycle) are checked against the
    scan rather than assumed, and mismatches surface as
    ``unexpected_degeneracy``.
    """
    if not tol > 0:
        raise ParameterError(f"tol must be > 0, got {tol!r}")
    N, l = spec.N, spec.l
    lam = momentum_eigenvalues(N, l)
    classes: list[DegeneracyClass] = []
    class_index = np.empty((N, N), dtype=np.int64)
    for s in range(N):
        ms = np.arange(N)
        ns = (s - ms) % N
        values = lam[ms, ns]
        found = []
        for idx in _cluster(values, tol):
            members = sorted((int(ms[i]), int(ns[i])) for i in idx)
            found.append(members)
        found.sort()
        for members in found:
            cls = DegeneracyClass(
                label=_label(N, l, s, members),
                group=s,
                lam=float(lam[members[0]]),
                members=tuple(members),
            )
            for m, n in members:
                class_index[m, n] = len(classes)
            classes.append(cls)
    return DegeneracyReport(N, l, tol, tuple(classes), class_index)


def corrections(
    spec: NetworkSpec,
    gamma: float,
    rule: CorrectionRule = "classes",
    report: DegeneracyReport | None = None,
) -> np.ndarray:
    """First-order dephasing corrections ``lambda~_(m,n)`` as an ``N x N`` array.

    ``rule`` selects how degenerate classes are treated:

    ``"printed"``
        the closed-form values: ``-gamma (N-1)/N`` everywhere except cycle
        pair classes, which get ``-gamma (N-2)/N``.
    ``"classes"``
        the uniform-combination value for each scanned class of size ``k``,
        ``sum_{k' in class} U_(m,n),(k')``, i.e. ``-gamma (N-k)/N``. This is
        the rate the initial point state actually feels.
    ``"block"``
        eigenvalues of the dephasing operator restricted to each class
        (degenerate first-order theory). Within a class the least negative
        value goes to the first member in canonical order.
    """
    if gamma < 0:
        raise ParameterError(f"gamma must be >= 0, got {gamma!r}")
    N = spec.N
    report = report or classify_degeneracies(spec)
    out = np.full((N, N), -gamma * (N - 1) / N)
    if rule == "printed":
        for cls in report.by_label("l1_quadruple"):
            for p in cls.members:
                out[p] = -gamma * (N - 2) / N
        return out
    if rule not in ("classes", "block"):
        raise ParameterError(f"unknown correction rule {rule!r}")
    for cls in report.classes:
        block = np.array(
            [[perturbation_element(N, gamma, *a, *b) for b in cls.members] for a in cls.members]
        )
        if rule == "classes":
            values = np.full(cls.size, block[0].sum())
        else:
            values = np.sort(np.linalg.eigvalsh(block))[::-1]
        for p, v in zip(cls.members, values):
            out[p] = v
    return out


def liouvillian_dense(
    spec: NetworkSpec, gamma: float, max_nodes: int = 64, hopping: float = 0.25
) -> np.ndarray:
    """Dense ``N^2 x N^2`` generator ``iL + U`` acting on row-major ``vec(rho)``.

    Row index ``alpha*N + beta``, column index ``mu*N + nu``.
    """
    N = spec.N
    if N > max_nodes:
        raise CapacityError(
            f"dense Liouvillian needs N^4 = {N**4} entries; N={N} exceeds max_nodes={max_nodes}"
        )
    # hopping operator summed over z = -l..l (z=0 cancels in the commutator)
    K = np.zeros((N, N))
    for z in range(-spec.l, spec.l + 1):
        K += np.roll(np.eye(N), z, axis=1)
    I = np.eye(N)
    # (L rho)_(a,b) = h * sum_z (rho_(a,b+z) - rho_(a+z,b))
    L = hopping * (np.kron(I, K) - np.kron(K, I))
    U = -gamma * np.diag((1.0 - I).ravel())
    return 1j * L + U


def liouvillian_action(rho: np.ndarray, l: int, gamma: float, hopping: float = 0.25) -> np.ndarray:
    """Right-hand side of the dephasing master equation, without forming matrices."""
    drho = np.zeros_like(rho, dtype=complex)
    for z in range(1, l + 1):
        drho += np.roll(rho, -z, axis=1) + np.roll(rho, z, axis=1)
        drho -= np.roll(rho, -z, axis=0) + np.roll(rho, z, axis=0)
    drho *= 1j * hopping
    off = rho - np.diag(np.diag(rho))
    return drho - gamma * off


def resolve_sign(spec: NetworkSpec) -> int:
    """Sign ``sigma`` with ``L V^(m,n) = sigma * lambda_(m,n) V^(m,n)``.

    Determined by applying the coherent generator to plane waves, not by
    reading it off the closed form.
    """
    N, l = spec.N, spec.l
    lam = momentum_eigenvalues(N, l)
    m, n = np.unravel_index(np.argmax(np.abs(lam)), lam.shape)
    V = momentum_vector(N, int(m), int(n))
    LV = liouvillian_action(V, l, 0.0) / 1j
    for sigma in (1, -1):
        if np.linalg.norm(LV - sigma * lam[m, n] * V) < 1e-10:
            return sigma
    raise RuntimeError("plane waves are not eigen-operators of the coherent generator")


@dataclass(frozen=True)
class LiouvilleSpectrum:
    N: int
    l: int
    gamma: float
    sigma: int
    rule: str
    lambdas: np.ndarray = field(repr=False)
    corrections: np.ndarray = field(repr=False)
    report: DegeneracyReport = field(repr=False)

    def eigenvalues(self) -> np.ndarray:
        """Predicted generator eigenvalues ``sigma i lambda + lambda~`` (flattened)."""
        return (1j * self.sigma * self.lambdas + self.corrections).ravel()


def liouville_spectrum(
    spec: NetworkSpec, gamma: float, rule: CorrectionRule = "classes"
) -> LiouvilleSpectrum:
    report = classify_degeneracies(spec)
    return LiouvilleSpectrum(
        N=spec.N,
        l=spec.l,
        gamma=gamma,
        sigma=resolve_sign(spec),
        rule=rule,
        lambdas=momentum_eigenvalues(spec.N, spec.l),
        corrections=corrections(spec, gamma, rule, report),
        report=report,
    )
