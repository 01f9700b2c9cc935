"""Trajectory predictor contract and the constant-velocity Kalman predictor.

The predictor maps an observed window of horizontal positions to a fixed
future horizon. The stock predictor fits a causal CV Kalman filter over the
window (same model and initialization as the smoother's forward pass) and
rolls the final state out. It is linear in its inputs, which is exactly what
makes predicting in the ego-centered frame equivalent to predicting
pedestrian and ego separately in the world frame and subtracting.

A nonlinear predictor can be plugged in behind the same contract; its
`is_linear` flag must then be False, and the equivalence harness will report
the approximation residual instead of asserting it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kalman
from .preprocess import STEP, SemiLocalTrack

SEMILOCAL = "semilocal"
WORLD = "world"


class InsufficientHistoryError(ValueError):
    """Fewer observations than the predictor needs; caller should wait."""


@dataclass(frozen=True)
class PredictorContract:
    """Window/horizon shape of a predictor plus its declared linearity.

    `is_linear` is a claim, not a fact: tests verify f(a - b) == f(a) - f(b)
    on random inputs before the equivalence guarantees are relied on.
    """

    observe_window: int = 6
    horizon: int = 12
    step: float = STEP
    is_linear: bool = True

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.observe_window < 2:
            raise ValueError(f"observe_window must be >= 2, got {self.observe_window}")


@dataclass(frozen=True)
class PredictedTrajectory:
    points: np.ndarray  # (horizon, 2) horizontal positions
    frame: str  # SEMILOCAL or WORLD, inherited from the input track
    t0: float  # timestamp of the last observed sample
    step: float


@dataclass
class PredictorConfig:
    kind: str = "cv"  # "cv" or "saturating_cv"
    observe_window: int = 6
    horizon: int = 12
    sigma_a: float = 0.5
    sigma_m: float = 0.1
    max_speed: float = 1.5  # saturating_cv only


def predict_cv(
    observed: np.ndarray,
    contract: PredictorContract,
    sigma_a: float = 0.5,
    sigma_m: float = 0.1,
) -> np.ndarray:
    """CV-Kalman fit over the observed window, then linear rollout.

    `observed` is (n, d) at uniform `contract.step` spacing; returns
    (horizon, d) future positions.
    """
    observed = np.asarray(observed, dtype=float)
    if observed.ndim != 2 or observed.shape[0] < 2:
        raise InsufficientHistoryError(
            f"need at least 2 observations, got shape {observed.shape}"
        )
    if np.isnan(observed).any():
        raise InsufficientHistoryError("observed window contains gaps")
    result = kalman.forward_filter(observed, contract.step, sigma_a, sigma_m)
    pos = result.positions[-1]
    vel = result.velocities[-1]
    return kalman.extrapolate(pos, vel, contract.step, contract.horizon)


class CvKalmanPredictor:
    """The stock linear predictor."""

    def __init__(self, contract: PredictorContract | None = None,
                 sigma_a: float = 0.5, sigma_m: float = 0.1):
        self.contract = contract or PredictorContract(is_linear=True)
        self.sigma_a = sigma_a
        self.sigma_m = sigma_m

    def predict_window(self, observed: np.ndarray) -> np.ndarray:
        return predict_cv(observed, self.contract, self.sigma_a, self.sigma_m)


class SaturatingCvPredictor:
    """CV predictor with a hard speed cap; deliberately nonlinear.

    Exists so the equivalence harness has a nonlinear predictor to measure
    the semi-local approximation residual against.
    """

    def __init__(self, contract: PredictorContract | None = None,
                 max_speed: float = 1.5, sigma_a: float = 0.5, sigma_m: float = 0.1):
        base = contract or PredictorContract()
        self.contract = PredictorContract(
            observe_window=base.observe_window,
            horizon=base.horizon,
            step=base.step,
            is_linear=False,
        )
        self.max_speed = max_speed
        self.sigma_a = sigma_a
        self.sigma_m = sigma_m

    def predict_window(self, observed: np.ndarray) -> np.ndarray:
        observed = np.asarray(observed, dtype=float)
        if observed.ndim != 2 or observed.shape[0] < 2:
            raise InsufficientHistoryError(
                f"need at least 2 observations, got shape {observed.shape}"
            )
        result = kalman.forward_filter(observed, self.contract.step, self.sigma_a, self.sigma_m)
        pos = result.positions[-1]
        vel = result.velocities[-1]
        speed = float(np.linalg.norm(vel))
        if speed > self.max_speed:
            vel = vel * (self.max_speed / speed)
        return kalman.extrapolate(pos, vel, self.contract.step, self.contract.horizon)


Predictor = CvKalmanPredictor | SaturatingCvPredictor


def build_predictor(cfg: PredictorConfig) -> Predictor:
    contract = PredictorContract(
        observe_window=cfg.observe_window,
        horizon=cfg.horizon,
        is_linear=(cfg.kind == "cv"),
    )
    if cfg.kind == "cv":
        return CvKalmanPredictor(contract, cfg.sigma_a, cfg.sigma_m)
    if cfg.kind == "saturating_cv":
        return SaturatingCvPredictor(contract, cfg.max_speed, cfg.sigma_a, cfg.sigma_m)
    raise ValueError(f"unknown predictor kind {cfg.kind!r}")


def predict(track: SemiLocalTrack, predictor: Predictor) -> PredictedTrajectory | None:
    """Predict from the track's trailing window; None while history is short.

    The window is the last `observe_window` samples' horizontal components;
    a window containing gaps also yields None (the caller waits for the
    smoother to fill them or for fresh samples).
    """
    contract = predictor.contract
    if len(track.samples) < contract.observe_window:
        return None
    tail = track.samples[-contract.observe_window:]
    if any(s.point is None for s in tail):
        return None
    window = np.array([(s.point.x, s.point.y) for s in tail])
    points = predictor.predict_window(window)
    return PredictedTrajectory(
        points=points, frame=SEMILOCAL, t0=tail[-1].t, step=contract.step
    )


def verify_linearity(
    predictor: Predictor,
    rng: np.random.Generator,
    trials: int = 50,
    atol: float = 1e-9,
) -> float:
    """Max |f(a - b) - (f(a) - f(b))| over random CV-ish windows.

    Raises AssertionError if the predictor declares linearity it doesn't have.
    """
    n = predictor.contract.observe_window
    worst = 0.0
    for _ in range(trials):
        base_a = rng.uniform(-10, 10, size=2)
        base_b = rng.uniform(-10, 10, size=2)
        vel_a = rng.uniform(-2, 2, size=2)
        vel_b = rng.uniform(-2, 2, size=2)
        steps = np.arange(n)[:, None] * predictor.contract.step
        a = base_a + steps * vel_a + rng.normal(0, 0.3, size=(n, 2))
        b = base_b + steps * vel_b + rng.normal(0, 0.3, size=(n, 2))
        lhs = predictor.predict_window(a - b)
        rhs = predictor.predict_window(a) - predictor.predict_window(b)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    if predictor.contract.is_linear and worst > atol:
        raise AssertionError(
            f"predictor declares is_linear but violates it by {worst:.3e} m"
        )
    return worst


def shift_equivariance_residual(
    predictor: Predictor, observed: np.ndarray, offset: np.ndarray
) -> float:
    """|f(observed + c) - (f(observed) + c)|_max, a cheap linearity probe."""
    shifted = predictor.predict_window(np.asarray(observed) + offset)
    direct = predictor.predict_window(observed) + offset
    return float(np.abs(shifted - direct).max())
