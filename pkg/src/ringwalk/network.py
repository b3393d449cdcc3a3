"""Ring-lattice topology: adjacency, Laplacian and walker Hamiltonians.

A one-dimension regular network is a ring of ``N`` nodes in which every node
is bonded to its ``l`` nearest neighbours on either side. All matrices built
here are real-symmetric circulants returned as dense complex arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "NetworkSpec",
    "Preset",
    "PRESETS",
    "adjacency",
    "laplacian",
    "hamiltonian",
    "preset_hamiltonian",
    "spec_for_preset",
]


@dataclass(frozen=True)
class NetworkSpec:
    """Ring of ``N`` nodes, each bonded to ``l`` neighbours per side."""

    N: int
    l: int
    hopping: float = 1.0

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)):
            raise ParameterError(f"N must be an integer, got {self.N!r}")
        if isinstance(self.l, bool) or not isinstance(self.l, (int, np.integer)):
            raise ParameterError(f"l must be an integer, got {self.l!r}")
        if self.N < 3:
            raise ParameterError(f"N must satisfy N >= 3, got N={self.N}")
        lmax = (self.N - 1) // 2
        if not 1 <= self.l <= lmax:
            raise ParameterError(
                f"l must satisfy 1 <= l <= floor((N-1)/2) = {lmax}, got l={self.l}"
            )
        if not (np.isfinite(self.hopping) and self.hopping > 0):
            raise ParameterError(f"hopping must be > 0, got {self.hopping!r}")

    @property
    def degree(self) -> int:
        return 2 * self.l

    def neighbour_offsets(self) -> np.ndarray:
        """Offsets ``(i - j) mod N`` that count as a bond."""
        z = np.arange(1, self.l + 1)
        return np.concatenate([z, self.N - z])


@dataclass(frozen=True)
class Preset:
    name: str
    hopping: float
    shift_per_range: float  # diagonal = shift_per_range * l

    def diagonal_shift(self, l: int) -> float:
        return self.shift_per_range * l


# "section2": unit bonds with the -2l diagonal of the coherent Bloch analysis.
# "gurvitz": quarter-amplitude bonds, no on-site energy (dephasing analysis).
PRESETS = {
    "section2": Preset("section2", hopping=1.0, shift_per_range=-2.0),
    "gurvitz": Preset("gurvitz", hopping=0.25, shift_per_range=0.0),
}


def _preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ParameterError(
            f"unknown preset {name!r}; expected one of {sorted(PRESETS)}"
        ) from None


def spec_for_preset(N: int, l: int, preset: str) -> NetworkSpec:
    return NetworkSpec(N, l, hopping=_preset(preset).hopping)


def _integer_adjacency(spec: NetworkSpec) -> np.ndarray:
    N = spec.N
    diff = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
    return np.isin(diff, spec.neighbour_offsets()).astype(np.int64)


def adjacency(spec: NetworkSpec) -> np.ndarray:
    """0/1 adjacency matrix; every row sums to ``2l``."""
    return _integer_adjacency(spec).astype(complex)


def laplacian(spec: NetworkSpec) -> np.ndarray:
    """Graph Laplacian ``A - D`` (negative semidefinite, zero row sums)."""
    A = _integer_adjacency(spec)
    lap = A - np.diag(A.sum(axis=1))
    return lap.astype(complex)


def hamiltonian(spec: NetworkSpec, diagonal_shift: float = 0.0) -> np.ndarray:
    """``spec.hopping`` on every bond and ``diagonal_shift`` on the diagonal."""
    H = spec.hopping * _integer_adjacency(spec).astype(complex)
    H[np.diag_indices(spec.N)] = diagonal_shift
    return H


def preset_hamiltonian(N: int, l: int, preset: str = "gurvitz") -> np.ndarray:
    p = _preset(preset)
    spec = NetworkSpec(N, l, hopping=p.hopping)
    return hamiltonian(spec, p.diagonal_shift(l))
