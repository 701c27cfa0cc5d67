"""Procedural synthetic diving-style corpus.

Each sample is a bright ellipse (the "athlete") moving over a dim static
texture. The motion has three phases separated by the annotated transitions:

  1. rise     — slow drift up from the start point, fixed orientation
  2. flight   — faster travel across the canvas while spinning at a constant
                rate omega (rad/frame)
  3. drop     — fast vertical descent holding the entry orientation
                pi/2 + entry_dev

Velocity kinks at both transitions and the spin start/stop make the phase
changes visible; an intensity gradient along the ellipse's major axis makes
the orientation and spin direction visible. The per-frame mask is exactly
the rendered ellipse support. Frames are quantized to 1/255 steps at render
time so disk round-trips through the packed uint8 format are bit-exact.

The score is a smooth deterministic function of (entry_dev, omega) plus
bounded uniform noise, so it is learnable from pixels. On normalized
parameters the noiseless score has per-coordinate slopes bounded by
SCORE_LIPSCHITZ_BOUND.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .data import VideoSample, transition_bins
from .errors import ConfigError

# score = SCORE_BASE + SCORE_DEV_WEIGHT*(1 - dev^2) + SCORE_SPIN_WEIGHT*(1 - spin^2)
# on dev, spin in [-1, 1]; |d score/d dev| <= 2*SCORE_DEV_WEIGHT etc.
SCORE_BASE = 20.0
SCORE_DEV_WEIGHT = 50.0
SCORE_SPIN_WEIGHT = 30.0
SCORE_LIPSCHITZ_BOUND = 2.0 * max(SCORE_DEV_WEIGHT, SCORE_SPIN_WEIGHT)

_FOREGROUND_COLOR = (0.95, 0.80, 0.45)


@dataclass(frozen=True)
class SyntheticConfig:
    count: int = 200
    frames: int = 96
    height: int = 32
    width: int = 32
    num_transitions: int = 2
    seed: int = 0
    score_noise: float = 0.5
    rotation_range: tuple[float, float] = (0.15, 0.45)  # rad/frame during flight
    entry_deviation_max: float = 0.7  # rad from vertical at entry
    semi_major_range: tuple[float, float] = (6.0, 8.5)
    semi_minor_range: tuple[float, float] = (2.4, 3.4)
    action_types: tuple[str, ...] = ("travel_right", "travel_left")

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ConfigError("count must be >= 0")
        if min(self.frames, self.height, self.width) < 8:
            raise ConfigError("frames/height/width must each be >= 8")
        if self.num_transitions < 1 or self.num_transitions >= self.frames:
            raise ConfigError("need 1 <= num_transitions < frames")
        if self.score_noise < 0:
            raise ConfigError("score_noise must be >= 0")
        for lo, hi in (self.rotation_range, self.semi_major_range, self.semi_minor_range):
            if not 0 < lo <= hi:
                raise ConfigError("ranges must satisfy 0 < lo <= hi")
        if self.entry_deviation_max <= 0:
            raise ConfigError("entry_deviation_max must be > 0")
        if not self.action_types:
            raise ConfigError("need at least one action type")


@dataclass(frozen=True)
class MotionParams:
    """Everything that determines one rendered sample (except the config)."""

    action_type: str
    transitions: tuple[int, ...]
    theta0: float  # orientation during the rise phase
    omega: float  # spin rate in flight, signed
    entry_dev: float  # entry orientation minus vertical
    semi_major: float
    semi_minor: float
    waypoints: tuple[tuple[float, float], ...]  # (x, y) at t=0, t1, t2, T
    background_grid: np.ndarray  # coarse [gh, gw, 3] texture seed values
    score_noise: float


def score_from_params(entry_dev_norm: float, omega_norm: float) -> float:
    """Noiseless judged score on normalized parameters in [-1, 1].

    Smooth (quadratic) and Lipschitz: per-coordinate slope magnitude is at
    most SCORE_LIPSCHITZ_BOUND. Peak score 100 at a perfectly vertical entry
    and mid-range spin rate.
    """
    return (
        SCORE_BASE
        + SCORE_DEV_WEIGHT * (1.0 - entry_dev_norm**2)
        + SCORE_SPIN_WEIGHT * (1.0 - omega_norm**2)
    )


def normalized_motion(cfg: SyntheticConfig, params: MotionParams) -> tuple[float, float]:
    lo, hi = cfg.rotation_range
    mid, half = (lo + hi) / 2.0, max((hi - lo) / 2.0, 1e-9)
    dev_norm = params.entry_dev / cfg.entry_deviation_max
    omega_norm = (abs(params.omega) - mid) / half
    return dev_norm, omega_norm


def sample_motion_params(cfg: SyntheticConfig, rng: np.random.Generator) -> MotionParams:
    action_type = cfg.action_types[int(rng.integers(len(cfg.action_types)))]
    direction = -1.0 if "left" in action_type else 1.0

    transitions = []
    for lo, hi in transition_bins(cfg.frames, cfg.num_transitions):
        width = hi - lo
        margin = max(1, int(round(0.2 * width)))
        t_lo = min(lo + margin, hi)
        t_hi = max(hi - margin, t_lo)
        transitions.append(int(rng.integers(t_lo, t_hi + 1)))

    theta0 = float(rng.uniform(0.0, np.pi))
    omega = direction * float(rng.uniform(*cfg.rotation_range))
    entry_dev = float(rng.uniform(-cfg.entry_deviation_max, cfg.entry_deviation_max))

    w, h = cfg.width, cfg.height
    x0 = w / 2 - direction * w * 0.25 + float(rng.uniform(-1.5, 1.5))
    y0 = h * 0.35 + float(rng.uniform(-1.5, 1.5))
    x1 = x0 + direction * float(rng.uniform(0.05, 0.10)) * w
    y1 = y0 - float(rng.uniform(0.10, 0.18)) * h
    x2 = x1 + direction * float(rng.uniform(0.20, 0.32)) * w
    y2 = y1 + float(rng.uniform(0.22, 0.35)) * h
    x3 = x2 + direction * float(rng.uniform(0.0, 0.05)) * w
    y3 = h * 0.85

    return MotionParams(
        action_type=action_type,
        transitions=tuple(transitions),
        theta0=theta0,
        omega=omega,
        entry_dev=entry_dev,
        semi_major=float(rng.uniform(*cfg.semi_major_range)),
        semi_minor=float(rng.uniform(*cfg.semi_minor_range)),
        waypoints=((x0, y0), (x1, y1), (x2, y2), (x3, y3)),
        background_grid=rng.uniform(0.03, 0.30, size=(5, 5, 3)).astype(np.float32),
        score_noise=float(rng.uniform(-cfg.score_noise, cfg.score_noise)),
    )


def _phase_of(t: int, transitions: tuple[int, ...]) -> int:
    for k, tk in enumerate(transitions):
        if t <= tk:
            return k
    return len(transitions)


def trajectory(cfg: SyntheticConfig, params: MotionParams, t: int) -> tuple[float, float, float]:
    """Ellipse center (x, y) and orientation theta at 1-indexed frame t."""
    bounds = (0, *params.transitions, cfg.frames)
    # waypoints beyond the configured phase count are interpolated linearly
    n_phases = len(bounds) - 1
    pts = list(params.waypoints)
    while len(pts) < n_phases + 1:
        pts.append(pts[-1])
    phase = _phase_of(t, params.transitions)
    a, b = bounds[phase], bounds[phase + 1]
    frac = (t - a) / max(b - a, 1)
    (xa, ya), (xb, yb) = pts[min(phase, 3)], pts[min(phase + 1, 3)]
    x = xa + (xb - xa) * frac
    y = ya + (yb - ya) * frac

    t1 = params.transitions[0]
    t_last = params.transitions[-1]
    if t <= t1:
        theta = params.theta0
    elif t <= t_last:
        theta = params.theta0 + params.omega * (t - t1)
    else:
        theta = np.pi / 2 + params.entry_dev
    return x, y, float(theta)


def render_sample(cfg: SyntheticConfig, params: MotionParams, sample_id: str) -> VideoSample:
    """Render frames + exact ellipse-support masks for one parameter set."""
    h, w, T = cfg.height, cfg.width, cfg.frames
    ys = np.arange(h, dtype=np.float32)[:, None] + 0.5
    xs = np.arange(w, dtype=np.float32)[None, :] + 0.5

    # coarse grid -> full-resolution static background via bilinear sampling
    grid = params.background_grid
    gy = np.linspace(0, grid.shape[0] - 1, h, dtype=np.float32)
    gx = np.linspace(0, grid.shape[1] - 1, w, dtype=np.float32)
    y0i = np.clip(gy.astype(np.int64), 0, grid.shape[0] - 2)
    x0i = np.clip(gx.astype(np.int64), 0, grid.shape[1] - 2)
    fy = (gy - y0i)[:, None, None]
    fx = (gx - x0i)[None, :, None]
    bg = (
        grid[y0i][:, x0i] * (1 - fy) * (1 - fx)
        + grid[y0i][:, x0i + 1] * (1 - fy) * fx
        + grid[y0i + 1][:, x0i] * fy * (1 - fx)
        + grid[y0i + 1][:, x0i + 1] * fy * fx
    )

    frames = np.empty((T, h, w, 3), dtype=np.float32)
    masks = np.empty((T, h, w), dtype=np.uint8)
    color = np.asarray(_FOREGROUND_COLOR, dtype=np.float32)
    for t in range(1, T + 1):
        cx, cy, theta = trajectory(cfg, params, t)
        dx, dy = xs - cx, ys - cy
        c, s = np.cos(theta), np.sin(theta)
        u = dx * c + dy * s
        v = -dx * s + dy * c
        inside = (u / params.semi_major) ** 2 + (v / params.semi_minor) ** 2 <= 1.0
        # brighter toward the leading tip so orientation and spin are visible
        shade = 0.72 + 0.28 * np.clip(u / params.semi_major, -1.0, 1.0)
        frame = np.where(inside[..., None], shade[..., None] * color, bg)
        frames[t - 1] = frame
        masks[t - 1] = inside.astype(np.uint8)
    frames = np.round(frames * 255.0).astype(np.uint8).astype(np.float32) / 255.0

    dev_norm, omega_norm = normalized_motion(cfg, params)
    score = max(score_from_params(dev_norm, omega_norm) + params.score_noise, 0.0)
    lo, hi = cfg.rotation_range
    difficulty = round(2.0 + 1.5 * (abs(params.omega) - lo) / max(hi - lo, 1e-9), 1)
    return VideoSample(
        sample_id=sample_id,
        frames=frames,
        masks=masks,
        action_type=params.action_type,
        difficulty=difficulty,
        score=float(score),
        transitions=params.transitions,
    )


def iter_synthetic(cfg: SyntheticConfig) -> Iterator[tuple[MotionParams, VideoSample]]:
    rng = np.random.default_rng(cfg.seed)
    for i in range(cfg.count):
        params = sample_motion_params(cfg, rng)
        yield params, render_sample(cfg, params, f"syn-{i:04d}")


def generate_synthetic(cfg: SyntheticConfig) -> list[VideoSample]:
    """Generate the corpus; bit-identical for identical configs."""
    return [sample for _, sample in iter_synthetic(cfg)]
