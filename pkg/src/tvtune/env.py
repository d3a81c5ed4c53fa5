"""Episodic MDP around the plant and the torque-vectoring controller.

The agent acts every ``agent_sample_time`` seconds by choosing the four
control-effort weights ``w_df``; between agent steps the controller runs at
``sim_dt`` with those weights held constant.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import dynamics as dyn
from .controller import (W_DF_MAX, W_DF_MIN, ControllerConfig, allocate_kernel,
                         cim_kernel, jacobian_kernel, performance_kernel)
from .dynamics import TireParams, VehicleParams, VehicleState
from .errors import ConfigError, UsageError

KMH = 1.0 / 3.6
SIDESLIP_LIMIT = math.radians(8.0)
ERROR_THRESHOLD = 200.0
STEERING_RATIO = 16.0

OBS_FIELDS = ("ex", "ey", "emz", "vx", "vy", "yaw", "yaw_rate", "pos_x", "pos_y")

# hold_kernel status codes
RUNNING, TERM_SIDESLIP, TERM_FAULT = 0, 1, 2

TRACE_FIELDS = (
    "time", "vx", "vy", "yaw", "yaw_rate", "pos_x", "pos_y",
    "omega_fl", "omega_fr", "omega_rl", "omega_rr",
    "ex", "ey", "emz",
    "wdf_fl", "wdf_fr", "wdf_rl", "wdf_rr",
    "dT_fl", "dT_fr", "dT_rl", "dT_rr",
    "perf_index",
)


@dataclass(frozen=True)
class Observation:
    ex: float
    ey: float
    emz: float
    vx: float
    vy: float
    yaw: float
    yaw_rate: float
    pos_x: float
    pos_y: float

    @classmethod
    def from_array(cls, a) -> "Observation":
        return cls(*(float(v) for v in a))

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in OBS_FIELDS])


def clamp_action(action) -> np.ndarray:
    a = np.asarray(action, dtype=float).reshape(4)
    return np.clip(a, W_DF_MIN, W_DF_MAX)


@dataclass(frozen=True)
class DriverProfile:
    """Steering (road-wheel angle) and total drive torque as functions of time.

    Torque is piecewise linear through ``torque_times``/``torque_values``;
    steering is either a sine or a step starting at ``steer_start``.
    """
    steer_kind: str = "sine"
    steer_amplitude: float = math.radians(5.0) / STEERING_RATIO
    steer_period: float = 6.0
    steer_start: float = 1.0
    torque_times: tuple = ()
    torque_values: tuple = ()
    duration: float = 15.0

    def __post_init__(self):
        if self.steer_kind not in ("sine", "step"):
            raise ConfigError(f"unknown steer profile {self.steer_kind!r}")
        if len(self.torque_times) != len(self.torque_values) or len(self.torque_times) < 2:
            raise ConfigError("torque schedule needs matching times/values, at least two knots")
        if np.any(np.diff(self.torque_times) < 0):
            raise ConfigError("torque knots must be sorted in time")

    @staticmethod
    def _torque_knots(ramp: float):
        # accelerate, brake, re-accelerate; each change ramps linearly over `ramp` s
        segments = [(1.0, 400.0), (8.0, -600.0), (9.5, 400.0), (11.0, 0.0)]
        times = [0.0]
        values = [0.0]
        for t, v in segments:
            times += [t, t + ramp]
            values += [values[-1], v]
        times.append(15.0)
        values.append(0.0)
        return tuple(times), tuple(values)

    @classmethod
    def training(cls, handwheel_deg: float = 5.0, ratio: float = STEERING_RATIO,
                 ramp: float = 0.3) -> "DriverProfile":
        """Sine steer of ``handwheel_deg`` at the handwheel, 6 s period, from t = 1 s."""
        t, v = cls._torque_knots(ramp)
        return cls("sine", math.radians(handwheel_deg) / ratio, 6.0, 1.0, t, v)

    @classmethod
    def generalization(cls, handwheel_deg: float = 50.0, ratio: float = STEERING_RATIO,
                       ramp: float = 0.3) -> "DriverProfile":
        t, v = cls._torque_knots(ramp)
        return cls("step", math.radians(handwheel_deg) / ratio, 0.0, 1.0, t, v)

    def steer_array(self) -> np.ndarray:
        return np.array([0.0 if self.steer_kind == "sine" else 1.0,
                         self.steer_amplitude, self.steer_period, self.steer_start])

    def __call__(self, t: float) -> tuple[float, float]:
        if not 0.0 <= t <= self.duration:
            raise UsageError(f"profile queried at t={t} outside [0, {self.duration}]")
        s, q = profile_kernel(float(t), self.steer_array(),
                              np.asarray(self.torque_times, float),
                              np.asarray(self.torque_values, float))
        return s, q


def driver_profile_default(t: float, generalization: bool = False) -> tuple[float, float]:
    prof = DriverProfile.generalization() if generalization else DriverProfile.training()
    return prof(t)


@dataclass(frozen=True)
class EpisodeConfig:
    initial_speed: float = 100.0     # km/h
    mu: float = 0.4
    maneuver: DriverProfile = field(default_factory=DriverProfile.training)
    episode_length: float = 15.0
    agent_sample_time: float = 0.5
    sim_dt: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not self.initial_speed > 0:
            raise ConfigError("initial_speed must be positive")
        if not 0.0 < self.mu <= 1.0:
            raise ConfigError("mu must lie in (0, 1]")
        if self.sim_dt <= 0 or self.agent_sample_time <= 0 or self.episode_length <= 0:
            raise ConfigError("time constants must be positive")
        n = self.episode_length / self.agent_sample_time
        if abs(n - round(n)) > 1e-9:
            raise ConfigError("episode_length must be a whole number of agent steps")
        m = self.agent_sample_time / self.sim_dt
        if abs(m - round(m)) > 1e-6:
            raise ConfigError("agent_sample_time must be a whole number of sim steps")

    @property
    def n_agent_steps(self) -> int:
        return int(round(self.episode_length / self.agent_sample_time))

    @property
    def ticks_per_step(self) -> int:
        return int(round(self.agent_sample_time / self.sim_dt))

    @classmethod
    def randomized(cls, rng: np.random.Generator, speed_range=(80.0, 130.0),
                   mu_range=(0.4, 0.6), **kw) -> "EpisodeConfig":
        v0 = rng.uniform(*speed_range)
        mu = rng.uniform(*mu_range)
        return cls(initial_speed=float(v0), mu=float(mu), **kw)


@dataclass(frozen=True)
class RewardTerms:
    quadratic_penalty: float
    survival: int
    threshold_bonus: int
    total: float


def reward_terms(ex: float, ey: float, emz: float, terminated: bool) -> RewardTerms:
    penalty = (10.0 * ex * ex + 5.0 * ey * ey + 5.0 * emz * emz) * 0.01
    m = 0 if terminated else 1
    n = 1 if (abs(ex) < ERROR_THRESHOLD and abs(ey) < ERROR_THRESHOLD) else 0
    return RewardTerms(penalty, m, n, -penalty + 6.0 * m + n)


@dataclass(frozen=True)
class StepInfo:
    terms: RewardTerms
    time: float
    terminated: bool          # sideslip limit or simulation fault
    truncated: bool           # reached episode_length
    reason: str
    max_abs_ex: float         # over the hold window, every sim tick
    perf_integral: float      # time integral of the performance index over the window


# ---------------------------------------------------------------------------
# kernels

@njit(cache=True)
def profile_kernel(t, sp, tt, tv):
    if t < sp[3]:
        steer = 0.0
    elif sp[0] == 0.0:
        steer = sp[1] * np.sin(2.0 * np.pi * (t - sp[3]) / sp[2])
    else:
        steer = sp[1]
    return steer, np.interp(t, tt, tv)


@njit(cache=True)
def errors_kernel(x, steer, torque, veh, tire, ctl, E):
    fx = np.empty(4)
    fy = np.empty(4)
    st = dyn.tire_force_kernel(x, steer, veh, tire, fx, fy)
    if st != dyn.OK:
        return st
    Fx, Fy, Gz = dyn.cg_force_kernel(fx, fy, steer, veh)
    fxd, fyd, mzd = cim_kernel(steer, torque, x[0], x[3], veh, ctl)
    E[0] = fxd - Fx
    E[1] = fyd - Fy
    E[2] = mzd - Gz
    return dyn.OK


@njit(cache=True)
def hold_kernel(x, tick0, n_ticks, dt, w_df, sp, tt, tv, veh, tire, ctl,
                stats, trace, record, corr):
    """Run up to ``n_ticks`` controller/plant ticks in place on ``x``.

    stats <- [ex, ey, emz (at the final instant), perf integral, max|ex|,
              mean ex^2, mean ey^2, mean emz^2, ticks run]
    """
    E = np.empty(3)
    J = np.empty((3, 4))
    df = np.zeros(4)
    torques = np.empty(4)
    xn = np.empty(x.shape[0])
    w_e = ctl[0:3]
    lever = ctl[7] != 0.0
    incremental = ctl[8] != 0.0
    corr_max = ctl[9]
    R = veh[dyn.V_REFF]
    status = RUNNING
    p_int = 0.0
    max_ex = 0.0
    s0 = 0.0
    s1 = 0.0
    s2 = 0.0
    ran = 0
    for k in range(n_ticks):
        t = (tick0 + k) * dt
        steer, torque = profile_kernel(t, sp, tt, tv)
        if errors_kernel(x, steer, torque, veh, tire, ctl, E) != dyn.OK:
            status = TERM_FAULT
            break
        jacobian_kernel(steer, veh, lever, J)
        if allocate_kernel(E, J, w_e, w_df, df) != 0:
            df[:] = 0.0
        p = performance_kernel(E, J, df, w_e, w_df)
        p_int += p * dt
        max_ex = max(max_ex, abs(E[0]))
        s0 += E[0] * E[0]
        s1 += E[1] * E[1]
        s2 += E[2] * E[2]
        for i in range(4):
            if incremental:
                corr[i] += R * df[i]
                if corr[i] > corr_max:
                    corr[i] = corr_max
                elif corr[i] < -corr_max:
                    corr[i] = -corr_max
                torques[i] = 0.25 * torque + corr[i]
            else:
                torques[i] = 0.25 * torque + R * df[i]
        if record:
            row = trace[k]
            row[0] = t
            for i in range(10):
                row[1 + i] = x[i]
            for i in range(3):
                row[11 + i] = E[i]
            for i in range(4):
                row[14 + i] = w_df[i]
                row[18 + i] = corr[i] if incremental else R * df[i]
            row[22] = p
        if dyn.rk4_kernel(x, steer, torques, veh, tire, dt, xn) != dyn.OK:
            status = TERM_FAULT
            break
        x[:] = xn
        ran += 1
        if abs(np.arctan(x[1] / x[0])) > SIDESLIP_LIMIT:
            status = TERM_SIDESLIP
            break
    n = max(ran, 1)
    stats[3] = p_int
    stats[4] = max_ex
    stats[5] = s0 / n
    stats[6] = s1 / n
    stats[7] = s2 / n
    stats[8] = ran
    if status != TERM_FAULT:
        t = (tick0 + ran) * dt
        steer, torque = profile_kernel(t, sp, tt, tv)
        if errors_kernel(x, steer, torque, veh, tire, ctl, E) != dyn.OK:
            status = TERM_FAULT
    if status != TERM_FAULT:
        stats[0] = E[0]
        stats[1] = E[1]
        stats[2] = E[2]
    return status


# ---------------------------------------------------------------------------

class TorqueVectoringEnv:
    """Torque-vectoring MDP; ``reset`` then ``step`` with a 4-vector of weights.

    Observations are 9-element arrays ordered as ``OBS_FIELDS``.
    """
    obs_dim = len(OBS_FIELDS)
    act_dim = 4
    action_low = W_DF_MIN
    action_high = W_DF_MAX
    # forces [N], moment [N m], speeds [m/s], angles [rad], positions [m]
    obs_scale = np.array([1000.0, 1000.0, 1000.0, 40.0, 40.0, 1.0, 1.0, 500.0, 500.0])

    def __init__(self, vehicle: VehicleParams = VehicleParams(),
                 controller: ControllerConfig = ControllerConfig(),
                 tire: TireParams | None = None,
                 config: EpisodeConfig | None = None,
                 seed: int | None = None,
                 speed_range=(80.0, 130.0), mu_range=(0.4, 0.6),
                 reward_mode: str = "instant",
                 record_trace: bool = False):
        if reward_mode not in ("instant", "window"):
            raise ConfigError(f"unknown reward_mode {reward_mode!r}")
        self.vehicle = vehicle
        self.controller = controller
        self.tire_template = tire or TireParams.for_vehicle(vehicle)
        self.base_config = config
        self.speed_range = speed_range
        self.mu_range = mu_range
        self.reward_mode = reward_mode
        self.record_trace = record_trace
        self.rng = np.random.default_rng(seed)
        self._veh = vehicle.as_array()
        self._ctl = controller.as_array(vehicle)
        self.config: EpisodeConfig | None = None
        self.done = True
        self.trace: list[np.ndarray] = []
        self.rewards: list[float] = []

    # -- episode control ---------------------------------------------------
    def reset(self, config: EpisodeConfig | None = None, seed: int | None = None) -> np.ndarray:
        """Start an episode; with no config the speed and friction are randomised."""
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        if config is None:
            config = self.base_config
            extra = {}
            if config is not None:
                extra = dict(maneuver=config.maneuver, episode_length=config.episode_length,
                             agent_sample_time=config.agent_sample_time, sim_dt=config.sim_dt)
            config = EpisodeConfig.randomized(self.rng, self.speed_range, self.mu_range, **extra)
        if not isinstance(config, EpisodeConfig):
            raise ConfigError("reset() needs an EpisodeConfig")
        self.config = config
        self._tire = self.tire_template.with_mu(config.mu).as_array()
        prof = config.maneuver
        self._sp = prof.steer_array()
        self._tt = np.asarray(prof.torque_times, dtype=float)
        self._tv = np.asarray(prof.torque_values, dtype=float)
        self.x = VehicleState.rolling(config.initial_speed * KMH, self.vehicle).as_array()
        self.tick = 0
        self.steps = 0
        self.correction = np.zeros(4)
        self.done = False
        self.trace = []
        self.rewards = []
        self.last_errors = self._errors_now()
        return self._observe(self.last_errors)

    @property
    def time(self) -> float:
        return self.tick * (self.config.sim_dt if self.config else 0.0)

    def _errors_now(self) -> np.ndarray:
        E = np.zeros(3)
        steer, torque = profile_kernel(self.time, self._sp, self._tt, self._tv)
        errors_kernel(self.x, steer, torque, self._veh, self._tire, self._ctl, E)
        return E

    def _observe(self, E) -> np.ndarray:
        return np.concatenate([E, self.x[:6]])

    def step(self, action):
        if self.done:
            raise UsageError("step() called on a finished episode; call reset()")
        cfg = self.config
        w_df = clamp_action(action)
        n = cfg.ticks_per_step
        stats = np.zeros(9)
        trace = np.zeros((n, len(TRACE_FIELDS)) if self.record_trace else (1, len(TRACE_FIELDS)))
        x_before = self.x.copy()
        status = hold_kernel(self.x, self.tick, n, cfg.sim_dt, w_df, self._sp, self._tt,
                             self._tv, self._veh, self._tire, self._ctl, stats, trace,
                             self.record_trace, self.correction)
        ran = int(stats[8])
        self.tick += ran
        self.steps += 1
        if status == TERM_FAULT and not np.all(np.isfinite(self.x)):
            self.x = x_before
        if status == TERM_FAULT:
            E = self.last_errors
        else:
            E = stats[0:3].copy()
        terminated = status != RUNNING
        truncated = (not terminated) and self.steps >= cfg.n_agent_steps
        if self.reward_mode == "window":
            re = np.sqrt(stats[5:8])
        else:
            re = E
        terms = reward_terms(re[0], re[1], re[2], terminated)
        self.last_errors = E
        self.done = terminated or truncated
        reason = {RUNNING: "time_limit" if truncated else "",
                  TERM_SIDESLIP: "sideslip", TERM_FAULT: "fault"}[status]
        if self.record_trace:
            rows = trace[:max(ran, 0)]
            self.trace.append(rows)
        self.rewards.append(terms.total)
        info = StepInfo(terms, self.time, terminated, truncated, reason,
                        float(stats[4]), float(stats[3]))
        return self._observe(E), terms.total, self.done, info

    # -- traces ------------------------------------------------------------
    def trace_array(self) -> np.ndarray:
        """Per-tick trace rows plus a final ``reward`` column (NaN off agent ticks)."""
        if not self.trace:
            return np.zeros((0, len(TRACE_FIELDS) + 1))
        blocks = []
        for rows, r in zip(self.trace, self.rewards):
            col = np.full((rows.shape[0], 1), np.nan)
            if rows.shape[0]:
                col[-1, 0] = r
            blocks.append(np.hstack([rows, col]))
        return np.vstack(blocks)

    def write_trace_csv(self, path) -> None:
        data = self.trace_array()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow((*TRACE_FIELDS, "reward"))
            for row in data:
                w.writerow(["" if np.isnan(v) else repr(float(v)) for v in row])


def run_fixed(w_df, config: EpisodeConfig, vehicle: VehicleParams = VehicleParams(),
              controller: ControllerConfig = ControllerConfig(), policy=None,
              record_trace: bool = False, tire: TireParams | None = None, env=None):
    """Roll out one episode with constant weights (or a ``policy(obs)`` callable).

    Returns (env, summary dict).
    """
    if env is None:
        env = TorqueVectoringEnv(vehicle, controller, tire, config=config,
                                 record_trace=record_trace)
    obs = env.reset(config)
    total = 0.0
    max_ex = 0.0
    p_int = 0.0
    cost = 0.0
    done = False
    info = None
    while not done:
        a = policy(obs) if policy is not None else w_df
        obs, r, done, info = env.step(a)
        total += r
        max_ex = max(max_ex, info.max_abs_ex)
        p_int += info.perf_integral
        cost += info.terms.quadratic_penalty * config.agent_sample_time
    summary = dict(reward=total, max_abs_ex=max_ex, perf_integral=p_int,
                   terminated=bool(info.terminated), reason=info.reason,
                   steps=env.steps, time=env.time, error_cost=cost)
    return env, summary


__all__ = [
    "DriverProfile", "EpisodeConfig", "Observation", "RewardTerms", "StepInfo",
    "TorqueVectoringEnv", "clamp_action", "driver_profile_default", "reward_terms",
    "run_fixed", "OBS_FIELDS", "TRACE_FIELDS", "KMH", "SIDESLIP_LIMIT",
]
