"""Seeded synthetic scenarios: recordings plus ground truth, at desk scale.

Three presets ladder the difficulty the way the capture regimes they emulate
do: `easy` walks slowly with mild head sway, `hard` keeps the same pedestrian
density but swings the head fast and wide, `uncontrolled` raises the track
density roughly 2.5-3x with crossing pedestrians. Sensor noise follows the
stereo camera's published depth-accuracy envelope (<2% up to 3 m, <4% up to
15 m) read as 3-sigma bounds, plus pixel jitter and Bernoulli dropout.

Everything is a pure function of (spec, seed): identical inputs produce
byte-identical recordings and truth files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .formats import (
    CollisionInterval,
    FrameRecord,
    GroundTruth,
    PedTruth,
    RecordingHeader,
)
from .geometry import CameraIntrinsics, CameraPoint, Pose, Quaternion, WorldPoint, project
from .tracking import Detection


class ScenarioError(ValueError):
    """Infeasible or inconsistent scenario specification."""


# camera-optical-to-level-world rotation: camera z (forward) -> world +x,
# camera x (right) -> world -y, camera y (down) -> world -z
_Q_LEVEL = Quaternion.from_axis_angle((0.0, 0.0, 1.0), -math.pi / 2) * Quaternion.from_axis_angle(
    (1.0, 0.0, 0.0), -math.pi / 2
)


@dataclass(frozen=True)
class CameraRig:
    """Sensor geometry: 1920x1080 at 30 Hz with a 90 deg horizontal FOV."""

    intrinsics: CameraIntrinsics = CameraIntrinsics(
        fx=960.0, fy=960.0, cx=960.0, cy=540.0, width=1920, height=1080
    )
    fps: int = 30
    depth_min: float = 0.5
    depth_max: float = 25.0
    height: float = 1.7  # camera above ground, meters
    ped_height: float = 0.9  # representative point (bbox-center proxy)
    ped_width: float = 0.7  # detected-box width incl. gait spread
    ped_extent: float = 1.7  # full bbox height in meters


@dataclass
class NoiseConfig:
    """Detection noise model; `scale` multiplies the geometric sigmas."""

    depth_rel_near: float = 0.02  # 3-sigma relative error inside near_range
    depth_rel_far: float = 0.04  # 3-sigma relative error at/beyond far_range
    near_range: float = 3.0
    far_range: float = 15.0
    pixel_jitter: float = 2.0  # additive sigma on the detected center, pixels
    dropout: float = 0.0  # P(detection missing entirely)
    depth_dropout: float = 0.0  # P(detection present but depth invalid)
    conf_mean: float = 0.85
    conf_sigma: float = 0.06
    low_conf_rate: float = 0.05  # P(detection demoted to the low-confidence band)
    scale: float = 1.0

    def rel_sigma(self, depth: float) -> float:
        """1-sigma relative depth error at a given range."""
        near = self.depth_rel_near / 3.0
        far = self.depth_rel_far / 3.0
        if depth <= self.near_range:
            rel = near
        elif depth >= self.far_range:
            rel = far
        else:
            frac = (depth - self.near_range) / (self.far_range - self.near_range)
            rel = near + frac * (far - near)
        return rel * self.scale

    def noisy_depth(self, depth: float, rng: np.random.Generator) -> float:
        rel = self.rel_sigma(depth)
        if rel <= 0:
            return depth
        return max(depth * (1.0 + rng.normal(0.0, rel)), 1e-3)

    def noisy_pixel(self, u: float, v: float, rng: np.random.Generator) -> tuple[float, float]:
        jitter = self.pixel_jitter * self.scale
        if jitter <= 0:
            return u, v
        return u + rng.normal(0.0, jitter), v + rng.normal(0.0, jitter)


@dataclass(frozen=True)
class EgoSpec:
    speed: float = 0.8  # m/s along the waypoint polyline
    waypoints: tuple[tuple[float, float], ...] = ((0.0, 0.0), (50.0, 0.0))
    yaw_amp_deg: float = 5.0  # head sway amplitude
    yaw_freq_hz: float = 0.2


@dataclass(frozen=True)
class PedSpec:
    spawn_time: float
    start: tuple[float, float]
    velocity: tuple[float, float]
    # piecewise-constant velocity changes: (seconds after spawn, vx, vy)
    turns: tuple[tuple[float, float, float], ...] = ()


@dataclass
class ScenarioSpec:
    preset: str
    duration: float
    seed: int
    ego: EgoSpec
    pedestrians: list[PedSpec]
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    rig: CameraRig = field(default_factory=CameraRig)
    radius_gt: float = 0.5


def _validate(spec: ScenarioSpec) -> None:
    if spec.duration <= 0:
        raise ScenarioError(f"duration must be positive, got {spec.duration}")
    if spec.ego.speed < 0:
        raise ScenarioError(f"ego speed must be >= 0, got {spec.ego.speed}")
    if len(spec.ego.waypoints) < 1:
        raise ScenarioError("ego path needs at least one waypoint")
    if not 0.0 <= spec.noise.dropout < 1.0:
        raise ScenarioError(f"dropout must be in [0, 1), got {spec.noise.dropout}")
    if not 0.0 <= spec.noise.depth_dropout < 1.0:
        raise ScenarioError(f"depth_dropout must be in [0, 1), got {spec.noise.depth_dropout}")
    if spec.noise.scale < 0:
        raise ScenarioError(f"noise scale must be >= 0, got {spec.noise.scale}")
    for i, ped in enumerate(spec.pedestrians):
        if ped.spawn_time < 0:
            raise ScenarioError(f"pedestrian {i} spawn_time must be >= 0")
        if ped.spawn_time >= spec.duration:
            raise ScenarioError(f"pedestrian {i} spawns after the scenario ends")


def _ego_state(ego: EgoSpec, t: float) -> tuple[float, float, float]:
    """Position and path heading at time t along the waypoint polyline."""
    wps = ego.waypoints
    if len(wps) == 1 or ego.speed == 0.0:
        x, y = wps[0]
        heading = 0.0
        if len(wps) > 1:
            heading = math.atan2(wps[1][1] - wps[0][1], wps[1][0] - wps[0][0])
        return x, y, heading
    s = ego.speed * t
    for (x0, y0), (x1, y1) in zip(wps[:-1], wps[1:]):
        seg = math.hypot(x1 - x0, y1 - y0)
        if seg == 0.0:
            continue
        if s <= seg:
            frac = s / seg
            return x0 + frac * (x1 - x0), y0 + frac * (y1 - y0), math.atan2(y1 - y0, x1 - x0)
        s -= seg
    # past the last waypoint: stand still, keep the final heading
    (x0, y0), (x1, y1) = wps[-2], wps[-1]
    return x1, y1, math.atan2(y1 - y0, x1 - x0)


def _ped_position(ped: PedSpec, t: float) -> tuple[float, float]:
    """Piecewise-constant-velocity position at absolute time t >= spawn."""
    rel = t - ped.spawn_time
    x, y = ped.start
    vx, vy = ped.velocity
    prev = 0.0
    for turn_t, nvx, nvy in ped.turns:
        if rel <= turn_t:
            break
        x += vx * (turn_t - prev)
        y += vy * (turn_t - prev)
        vx, vy = nvx, nvy
        prev = turn_t
    x += vx * (rel - prev)
    y += vy * (rel - prev)
    return x, y


def ego_pose(spec: ScenarioSpec, t: float) -> Pose:
    """Pose at time t: position on the path, heading plus sinusoidal head yaw."""
    x, y, heading = _ego_state(spec.ego, t)
    yaw = math.radians(spec.ego.yaw_amp_deg) * math.sin(2.0 * math.pi * spec.ego.yaw_freq_hz * t)
    q = Quaternion.from_axis_angle((0.0, 0.0, 1.0), heading + yaw) * _Q_LEVEL
    return Pose(rotation=q, translation=WorldPoint(x, y, spec.rig.height))


def generate(spec: ScenarioSpec) -> tuple[RecordingHeader, list[FrameRecord], GroundTruth]:
    """Simulate the scenario into a recording and its ground truth."""
    _validate(spec)
    rig = spec.rig
    noise = spec.noise
    rng = np.random.default_rng([spec.seed, 0xD0_0D])
    n_frames = int(round(spec.duration * rig.fps))
    metadata = {
        "preset": spec.preset,
        "seed": spec.seed,
        "duration": spec.duration,
        "generator": f"egowarn {__version__}",
    }
    header = RecordingHeader(intrinsics=rig.intrinsics, native_fps=rig.fps, metadata=metadata)

    ts = np.zeros(n_frames)
    ego = np.zeros((n_frames, 3))
    spawn_frames = [
        min(n_frames, max(0, int(math.ceil(p.spawn_time * rig.fps - 1e-9))))
        for p in spec.pedestrians
    ]
    ped_positions: list[list[tuple[float, float, float]]] = [[] for _ in spec.pedestrians]

    frames: list[FrameRecord] = []
    for k in range(n_frames):
        t = k / rig.fps
        pose = ego_pose(spec, t)
        ts[k] = t
        tr = pose.translation
        ego[k] = (tr.x, tr.y, tr.z)

        detections: list[Detection] = []
        for pid, ped in enumerate(spec.pedestrians):
            if k < spawn_frames[pid]:
                continue
            px, py = _ped_position(ped, t)
            world = WorldPoint(px, py, rig.ped_height)
            ped_positions[pid].append((px, py, rig.ped_height))

            # noiseless visibility test: depth range and image bounds
            dx, dy, dz = pose.rotation.rotate_inverse((world.x - tr.x, world.y - tr.y, world.z - tr.z))
            if not (rig.depth_min <= dz <= rig.depth_max):
                continue
            pix = project(CameraPoint(dx, dy, dz), rig.intrinsics)
            if not (0 <= pix.u < rig.intrinsics.width and 0 <= pix.v < rig.intrinsics.height):
                continue

            if noise.dropout > 0 and rng.random() < noise.dropout:
                continue
            cu, cv = noise.noisy_pixel(pix.u, pix.v, rng)
            depth = noise.noisy_depth(dz, rng)
            if noise.depth_dropout > 0 and rng.random() < noise.depth_dropout:
                center_depth = None
            else:
                center_depth = float(depth)

            half_w = rig.intrinsics.fx * rig.ped_width / dz / 2.0
            half_h = rig.intrinsics.fy * rig.ped_extent / dz / 2.0
            u_min = max(0.0, cu - half_w)
            v_min = max(0.0, cv - half_h)
            u_max = min(float(rig.intrinsics.width), cu + half_w)
            v_max = min(float(rig.intrinsics.height), cv + half_h)
            if u_min >= u_max or v_min >= v_max:
                continue

            conf = float(np.clip(rng.normal(noise.conf_mean, noise.conf_sigma), 0.05, 0.99))
            if noise.low_conf_rate > 0 and rng.random() < noise.low_conf_rate:
                conf = float(np.clip(rng.normal(0.3, 0.05), 0.11, 0.49))
            detections.append(
                Detection(
                    bbox=(float(u_min), float(v_min), float(u_max), float(v_max)),
                    confidence=conf,
                    center_depth=center_depth,
                )
            )
        frames.append(FrameRecord(frame=k, t=float(t), pose=pose, detections=detections))

    peds = {
        pid: PedTruth(
            ped_id=pid,
            spawn_frame=spawn_frames[pid],
            positions=np.array(ped_positions[pid], dtype=float).reshape(-1, 3),
        )
        for pid in range(len(spec.pedestrians))
        if ped_positions[pid]
    }
    truth = GroundTruth(
        t=ts,
        ego=ego,
        peds=peds,
        intervals=[],
        radius_gt=spec.radius_gt,
        native_fps=rig.fps,
        metadata=metadata,
    )
    truth.intervals = label_collisions(truth, spec.radius_gt)
    return header, frames, truth


def label_collisions(truth: GroundTruth, radius_gt: float) -> list[CollisionInterval]:
    """Brute-force per-frame distance test; maximal runs below the radius."""
    intervals: list[CollisionInterval] = []
    for ped_id in sorted(truth.peds):
        ped = truth.peds[ped_id]
        n = len(ped.positions)
        if n == 0:
            continue
        lo = ped.spawn_frame
        ego_xy = truth.ego[lo : lo + n, :2]
        d = np.hypot(ped.positions[:, 0] - ego_xy[:, 0], ped.positions[:, 1] - ego_xy[:, 1])
        below = d < radius_gt
        start = None
        for j in range(n + 1):
            inside = j < n and below[j]
            if inside and start is None:
                start = j
            elif not inside and start is not None:
                intervals.append(
                    CollisionInterval(
                        ped_id=ped_id,
                        frame_start=lo + start,
                        frame_end=lo + j - 1,
                        t_start=float(truth.t[lo + start]),
                        t_end=float(truth.t[lo + j - 1]),
                    )
                )
                start = None
    intervals.sort(key=lambda iv: (iv.t_start, iv.ped_id))
    return intervals


# ---------------------------------------------------------------------------
# presets

PRESET_DURATIONS = {"easy": 20.0, "hard": 20.0, "uncontrolled": 30.0}


def expand_preset(
    preset: str,
    seed: int,
    duration: float | None = None,
    noise: NoiseConfig | None = None,
) -> ScenarioSpec:
    """Build a concrete per-seed scenario for one of the named presets."""
    if preset not in PRESET_DURATIONS:
        raise ScenarioError(f"unknown preset {preset!r}")
    duration = PRESET_DURATIONS[preset] if duration is None else float(duration)
    if duration <= 0:
        raise ScenarioError(f"duration must be positive, got {duration}")
    rng = np.random.default_rng([seed, 0x5CE0])

    if preset == "easy":
        noise = noise or NoiseConfig(dropout=0.0, depth_dropout=0.0)
        ego = EgoSpec(
            speed=0.8,
            waypoints=((0.0, 0.0), (0.8 * duration + 5.0, 0.0)),
            yaw_amp_deg=5.0,
            yaw_freq_hz=0.2,
        )
        peds = _easy_pedestrians(rng)
    elif preset == "hard":
        noise = noise or NoiseConfig(dropout=0.03, depth_dropout=0.02)
        ego = EgoSpec(
            speed=0.8,
            waypoints=((0.0, 0.0), (0.8 * duration + 5.0, 0.0)),
            yaw_amp_deg=40.0,
            yaw_freq_hz=0.7,
        )
        peds = _hard_pedestrians(rng, duration)
    else:  # uncontrolled
        noise = noise or NoiseConfig(dropout=0.05, depth_dropout=0.02)
        ego = EgoSpec(
            speed=1.0,
            waypoints=((0.0, 0.0), (duration + 5.0, 0.0)),
            yaw_amp_deg=30.0,
            yaw_freq_hz=0.5,
        )
        peds = _crowd(rng, duration)

    return ScenarioSpec(
        preset=preset,
        duration=duration,
        seed=seed,
        ego=ego,
        pedestrians=peds,
        noise=noise,
    )


def _easy_pedestrians(rng: np.random.Generator) -> list[PedSpec]:
    """A head-on collider plus a parallel passer that never gets close."""
    collider = PedSpec(
        spawn_time=0.0,
        start=(float(rng.uniform(10.0, 14.0)), float(rng.uniform(-0.15, 0.15))),
        velocity=(-float(rng.uniform(0.9, 1.3)), 0.0),
    )
    passer = PedSpec(
        spawn_time=0.0,
        start=(float(rng.uniform(12.0, 16.0)), float(rng.uniform(2.0, 2.5))),
        velocity=(-float(rng.uniform(1.0, 1.4)), 0.0),
    )
    return [collider, passer]


def _hard_pedestrians(rng: np.random.Generator, duration: float) -> list[PedSpec]:
    """Collider plus a receding near-lane walker, both inside the frustum
    through the full +-40 deg yaw swing (otherwise boxes blink in and out at
    every swing extreme and no IoU gate can hold identity)."""
    collider = PedSpec(
        spawn_time=0.0,
        start=(float(rng.uniform(8.5, 10.5)), float(rng.uniform(-0.15, 0.15))),
        velocity=(-float(rng.uniform(0.5, 0.7)), 0.0),
    )
    spawn = min(float(rng.uniform(6.0, 8.0)), max(0.0, duration - 6.0))
    side = 1.0 if rng.random() < 0.5 else -1.0
    walker = PedSpec(
        spawn_time=spawn,
        start=(0.8 * spawn + float(rng.uniform(9.0, 12.0)), side * float(rng.uniform(0.5, 0.65))),
        velocity=(float(rng.uniform(0.85, 0.95)), 0.0),
    )
    return [collider, walker]


def _crowd(rng: np.random.Generator, duration: float) -> list[PedSpec]:
    """Collider + long-lived escorts + crossers; >= 8 concurrent in view."""
    peds = [
        PedSpec(
            spawn_time=0.0,
            start=(float(rng.uniform(12.0, 15.0)), float(rng.uniform(-0.15, 0.15))),
            velocity=(-float(rng.uniform(1.0, 1.4)), 0.0),
        )
    ]
    lanes = (-2.5, -1.7, -0.9, 0.9, 1.7, 2.5, 0.0)
    for lane in lanes:
        x0 = float(rng.uniform(12.0, 18.0)) if lane == 0.0 else float(rng.uniform(6.0, 18.0))
        peds.append(
            PedSpec(
                spawn_time=0.0,
                start=(x0, lane + float(rng.uniform(-0.15, 0.15))),
                velocity=(float(rng.uniform(0.55, 0.9)), float(rng.uniform(-0.05, 0.05))),
            )
        )
    for i, spawn in enumerate((float(rng.uniform(3.0, 6.0)), float(rng.uniform(12.0, 16.0)))):
        spawn = min(spawn, max(0.0, duration - 5.0))
        side = 1.0 if i % 2 == 0 else -1.0
        peds.append(
            PedSpec(
                spawn_time=spawn,
                start=(spawn * 1.0 + float(rng.uniform(9.0, 13.0)), side * float(rng.uniform(4.5, 5.5))),
                velocity=(float(rng.uniform(0.4, 0.8)), -side * float(rng.uniform(0.7, 1.0))),
            )
        )
    return peds


# ---------------------------------------------------------------------------
# custom specs as JSON documents (used by the CLI's --spec)


def spec_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "preset": spec.preset,
        "duration": spec.duration,
        "seed": spec.seed,
        "radius_gt": spec.radius_gt,
        "ego": {
            "speed": spec.ego.speed,
            "waypoints": [list(w) for w in spec.ego.waypoints],
            "yaw_amp_deg": spec.ego.yaw_amp_deg,
            "yaw_freq_hz": spec.ego.yaw_freq_hz,
        },
        "pedestrians": [
            {
                "spawn_time": p.spawn_time,
                "start": list(p.start),
                "velocity": list(p.velocity),
                "turns": [list(turn) for turn in p.turns],
            }
            for p in spec.pedestrians
        ],
    }


def spec_from_dict(obj: dict, noise: NoiseConfig | None = None) -> ScenarioSpec:
    try:
        ego = obj.get("ego", {})
        spec = ScenarioSpec(
            preset=obj.get("preset", "custom"),
            duration=float(obj["duration"]),
            seed=int(obj.get("seed", 0)),
            ego=EgoSpec(
                speed=float(ego.get("speed", 0.8)),
                waypoints=tuple(tuple(w) for w in ego.get("waypoints", ((0.0, 0.0), (50.0, 0.0)))),
                yaw_amp_deg=float(ego.get("yaw_amp_deg", 0.0)),
                yaw_freq_hz=float(ego.get("yaw_freq_hz", 0.0)),
            ),
            pedestrians=[
                PedSpec(
                    spawn_time=float(p.get("spawn_time", 0.0)),
                    start=tuple(p["start"]),
                    velocity=tuple(p["velocity"]),
                    turns=tuple(tuple(turn) for turn in p.get("turns", ())),
                )
                for p in obj.get("pedestrians", [])
            ],
            radius_gt=float(obj.get("radius_gt", 0.5)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad scenario document: {exc}") from exc
    if noise is not None:
        spec.noise = noise
    return spec


def simulate(
    preset_or_spec: str | ScenarioSpec,
    seed: int,
    duration: float | None = None,
    noise: NoiseConfig | None = None,
) -> tuple[RecordingHeader, list[FrameRecord], GroundTruth]:
    """Preset name or full spec in, (header, frames, truth) out."""
    if isinstance(preset_or_spec, ScenarioSpec):
        spec = replace(preset_or_spec, seed=seed)
        if noise is not None:
            spec.noise = noise
    else:
        spec = expand_preset(preset_or_spec, seed=seed, duration=duration, noise=noise)
    return generate(spec)
