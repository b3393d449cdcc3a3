"""Dormand-Prince 5(4) stepper with quartic dense output.

Written against complex state arrays of any shape. A ``project`` hook runs
on every accepted state so callers can strip round-off (re-Hermitising a
density matrix, for instance) without touching the error control.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IntegrationError

__all__ = ["DOPRI5", "Step"]

C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
# 5th-order minus embedded 4th-order weights
E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Hairer's continuous extension, columns are coefficients of x, x^2, x^3, x^4
P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


@dataclass
class Step:
    """One accepted step; ``Q`` holds the dense-output polynomial coefficients."""

    t_old: float
    t_new: float
    y_old: np.ndarray
    y_new: np.ndarray
    Q: np.ndarray  # shape y.shape + (4,)

    @property
    def h(self) -> float:
        return self.t_new - self.t_old

    def __call__(self, t: float) -> np.ndarray:
        x = (t - self.t_old) / self.h
        powers = np.cumprod(np.full(4, x))
        return self.y_old + self.h * (self.Q @ powers)


class DOPRI5:
    """Adaptive explicit integrator for ``y' = fun(t, y)``.

    Step acceptance is deterministic: identical inputs give identical step
    sequences.
    """

    def __init__(
        self,
        fun: Callable[[float, np.ndarray], np.ndarray],
        t0: float,
        y0: np.ndarray,
        rtol: float = 1e-9,
        atol: float = 1e-10,
        max_step: float = np.inf,
        project: Callable[[np.ndarray], np.ndarray] | None = None,
        t_bound: float = np.inf,
    ):
        self.fun = fun
        self.t = float(t0)
        self.y = np.array(y0, dtype=complex)
        self.rtol = rtol
        self.atol = atol
        self.max_step = max_step
        self.project = project
        self.t_bound = float(t_bound)
        self.f = fun(self.t, self.y)
        self.h = min(self._initial_step(), max_step)
        self.n_accepted = 0
        self.n_rejected = 0

    def _norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(np.mean(np.abs(x) ** 2)))

    def _initial_step(self) -> float:
        # Hairer, Norsett & Wanner, section II.4
        scale = self.atol + np.abs(self.y) * self.rtol
        d0 = self._norm(self.y / scale)
        d1 = self._norm(self.f / scale)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        y1 = self.y + h0 * self.f
        f1 = self.fun(self.t + h0, y1)
        d2 = self._norm((f1 - self.f) / scale) / h0
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1)

    def _stages(self, h: float) -> np.ndarray:
        K = np.empty((7,) + self.y.shape, dtype=complex)
        K[0] = self.f
        for i in range(1, 6):
            dy = sum(a * K[j] for j, a in enumerate(A[i]) if a)
            K[i] = self.fun(self.t + C[i] * h, self.y + h * dy)
        return K

    def step(self) -> Step:
        """Advance by one accepted step (shrinking ``h`` as needed)."""
        if self.t >= self.t_bound:
            raise IntegrationError("integration already reached t_bound", self.t)
        h = min(self.h, self.t_bound - self.t)
        rejected = False
        while True:
            min_step = 10 * np.abs(np.nextafter(self.t, np.inf) - self.t)
            if h < min_step:
                raise IntegrationError("step size underflow", self.t)
            K = self._stages(h)
            t_new = self.t + h if h < self.t_bound - self.t else self.t_bound
            y_new = self.y + h * np.tensordot(B[:6], K[:6], axes=1)
            K[6] = self.fun(t_new, y_new)
            err = h * np.tensordot(E, K, axes=1)
            scale = self.atol + np.maximum(np.abs(self.y), np.abs(y_new)) * self.rtol
            err_norm = self._norm(err / scale)
            if err_norm <= 1.0:
                break
            self.n_rejected += 1
            rejected = True
            h *= max(MIN_FACTOR, SAFETY * err_norm ** (-1 / 5))

        if err_norm == 0:
            factor = MAX_FACTOR
        else:
            factor = min(MAX_FACTOR, SAFETY * err_norm ** (-1 / 5))
        if rejected:
            factor = min(1.0, factor)
        Q = np.moveaxis(np.tensordot(P.T, K, axes=(1, 0)), 0, -1)
        step = Step(self.t, t_new, self.y, y_new, Q)
        if self.project is not None:
            y_new = self.project(y_new)
            step.y_new = y_new
        self.t = t_new
        self.y = y_new
        self.f = self.fun(t_new, y_new) if self.project is not None else K[6]
        self.h = min(h * factor, self.max_step)
        self.n_accepted += 1
        return step
