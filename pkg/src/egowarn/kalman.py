"""Constant-velocity Kalman filtering shared by the smoother and predictor.

The horizontal axes are decoupled: each axis runs an independent [pos, vel]
filter, but because both axes share the process/measurement noise and the
same gap pattern, the covariance recursion is identical for all axes and is
computed once. Every output is a linear function of the measurements
(initialization included), which is what makes the semi-local shortcut exact
for this predictor.

Measurements are (n, d) arrays; a row of NaN marks a slot with no
measurement (the filter propagates through it without an update).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EYE2 = np.eye(2)
_H_ROW = np.array([1.0, 0.0])


def cv_transition(dt: float) -> np.ndarray:
    return np.array([[1.0, dt], [0.0, 1.0]])


def cv_process_noise(dt: float, sigma_a: float) -> np.ndarray:
    """White-noise-acceleration process noise."""
    q = sigma_a * sigma_a
    return q * np.array([[dt**4 / 4.0, dt**3 / 2.0], [dt**3 / 2.0, dt**2]])


@dataclass
class SlotEstimate:
    """Filter output for one slot."""

    slot: int
    position: np.ndarray  # (d,)
    velocity: np.ndarray  # (d,)
    covariance: np.ndarray  # (2, 2)
    predicted_covariance: np.ndarray | None  # P_{k|k-1}; None for the init slot


class CausalCvFilter:
    """Streaming forward CV filter over uniformly spaced slots.

    State is initialized from the first valid measurement with velocity from
    the first difference, covariance diag(sigma_m^2, 1). The estimate for the
    first slot can therefore only be emitted once the second valid measurement
    arrives; `step` returns zero or more SlotEstimates, so that feeding slots
    one at a time reproduces `forward_filter` exactly.
    """

    def __init__(self, dt: float, sigma_a: float, sigma_m: float):
        self.dt = dt
        self.F = cv_transition(dt)
        self.Q = cv_process_noise(dt, sigma_a)
        self.R = sigma_m * sigma_m
        self.P0 = np.diag([sigma_m * sigma_m, 1.0])
        self.x: np.ndarray | None = None  # (2, d) once initialized
        self.P: np.ndarray | None = None
        self._pending: tuple[int, np.ndarray] | None = None  # first valid (slot, z)
        self._pending_age = 0
        self._slot = -1

    def step(self, z: np.ndarray | None) -> list[SlotEstimate]:
        self._slot += 1
        slot = self._slot
        if self.x is None:
            if self._pending is None:
                if z is None:
                    return []
                self._pending = (slot, np.asarray(z, dtype=float))
                self._pending_age = 0
                return []
            self._pending_age += 1
            if z is None:
                return []
            # second valid measurement: initialize at the first one, then
            # filter forward through the intervening gaps up to this slot
            slot0, z0 = self._pending
            v0 = (np.asarray(z, dtype=float) - z0) / (self.dt * self._pending_age)
            self.x = np.stack([z0, v0])
            self.P = self.P0.copy()
            out = [SlotEstimate(slot0, self.x[0].copy(), self.x[1].copy(), self.P.copy(), None)]
            for s in range(slot0 + 1, slot + 1):
                out.append(self._advance(s, z if s == slot else None))
            self._pending = None
            return out
        return [self._advance(slot, None if z is None else np.asarray(z, dtype=float))]

    def _advance(self, slot: int, z: np.ndarray | None) -> SlotEstimate:
        self.x = self.F @ self.x
        self.P = self.F @ self.P @ self.F.T + self.Q
        predicted = self.P.copy()
        if z is not None:
            innovation = z - self.x[0]
            s = self.P[0, 0] + self.R
            k = self.P[:, 0] / s  # (2,)
            self.x = self.x + np.outer(k, innovation)
            ikh = _EYE2 - np.outer(k, _H_ROW)
            self.P = ikh @ self.P @ ikh.T + self.R * np.outer(k, k)
        return SlotEstimate(slot, self.x[0].copy(), self.x[1].copy(), self.P.copy(), predicted)


@dataclass
class ForwardResult:
    """Causal filter pass over a whole track, plus what RTS needs."""

    positions: np.ndarray  # (n, d), NaN where no estimate exists
    velocities: np.ndarray  # (n, d)
    covariances: np.ndarray  # (n, 2, 2), shared across axes
    predicted_covariances: np.ndarray  # (n, 2, 2); P_{k|k-1}, NaN for the init slot
    first_valid: int | None


def forward_filter(zs: np.ndarray, dt: float, sigma_a: float, sigma_m: float) -> ForwardResult:
    """Run the causal CV filter over all slots of `zs` ((n, d), NaN = gap)."""
    zs = np.asarray(zs, dtype=float)
    n, d = zs.shape
    positions = np.full((n, d), np.nan)
    velocities = np.full((n, d), np.nan)
    covariances = np.full((n, 2, 2), np.nan)
    predicted = np.full((n, 2, 2), np.nan)
    filt = CausalCvFilter(dt, sigma_a, sigma_m)
    first_valid: int | None = None
    for i in range(n):
        row = zs[i]
        z = None if np.isnan(row).any() else row
        for est in filt.step(z):
            positions[est.slot] = est.position
            velocities[est.slot] = est.velocity
            covariances[est.slot] = est.covariance
            if est.predicted_covariance is not None:
                predicted[est.slot] = est.predicted_covariance
            if first_valid is None:
                first_valid = est.slot
    if first_valid is None and n > 0:
        # a single valid measurement never initializes the filter; report it
        # as a zero-velocity estimate so degenerate tracks stay usable
        valid = ~np.isnan(zs).any(axis=1)
        if valid.sum() == 1:
            i = int(np.flatnonzero(valid)[0])
            positions[i] = zs[i]
            velocities[i] = 0.0
            covariances[i] = np.diag([sigma_m * sigma_m, 1.0])
            first_valid = i
    return ForwardResult(positions, velocities, covariances, predicted, first_valid)


def rts_smooth(result: ForwardResult, dt: float, sigma_a: float) -> tuple[np.ndarray, np.ndarray]:
    """Backward Rauch-Tung-Striebel pass over a forward_filter result.

    Returns smoothed (positions, velocities), same shapes as the inputs.
    """
    F = cv_transition(dt)
    n = result.positions.shape[0]
    pos = result.positions.copy()
    vel = result.velocities.copy()
    if result.first_valid is None or n - result.first_valid < 2:
        return pos, vel
    xs = np.stack([pos, vel], axis=1)  # (n, 2, d)
    ps = result.covariances.copy()
    for k in range(n - 2, result.first_valid - 1, -1):
        if np.isnan(xs[k]).any() or np.isnan(xs[k + 1]).any():
            continue
        p_pred = result.predicted_covariances[k + 1]
        gain = result.covariances[k] @ F.T @ np.linalg.inv(p_pred)
        xs[k] = xs[k] + gain @ (xs[k + 1] - F @ xs[k])
        ps[k] = result.covariances[k] + gain @ (ps[k + 1] - p_pred) @ gain.T
    return xs[:, 0, :], xs[:, 1, :]


def extrapolate(position: np.ndarray, velocity: np.ndarray, step: float, horizon: int) -> np.ndarray:
    """Roll the final state out: p_i = p + v * step * i for i = 1..horizon."""
    steps = np.arange(1, horizon + 1, dtype=float)[:, None]
    return position[None, :] + steps * step * velocity[None, :]
