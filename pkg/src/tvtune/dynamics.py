"""Planar four-wheel vehicle model with Pacejka tyres and a fixed-step RK4 integrator.

State vector layout (10 floats)::

    0 vx        body longitudinal velocity [m/s]
    1 vy        body lateral velocity [m/s]
    2 yaw       heading [rad]
    3 yaw_rate  [rad/s]
    4 pos_x     inertial X [m]
    5 pos_y     inertial Y [m]
    6..9        wheel spin speeds FL, FR, RL, RR [rad/s]

Axes: x forward, y left, z up, yaw counter-clockwise positive. The hot
kernels are numba-compiled and take parameters packed into flat arrays
(see ``VehicleParams.as_array`` and ``TireParams.as_array``); the
dataclass-level functions below are thin wrappers for interactive use
and tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np
from numba import njit

from .errors import DegenerateSpeedError, SimulationFault

GRAVITY = 9.81
MIN_SPEED = 0.1
N_STATES = 10

# status codes returned by kernels
OK = 0
FAULT_SPEED = 1
FAULT_NONFINITE = 2

# VehicleParams.as_array() layout
V_MASS, V_IZ, V_REFF, V_LF, V_LR, V_TRACK, V_IW, V_CF, V_CR = range(9)
# TireParams.as_array() layout; normal loads follow at T_FZ..T_FZ+3
T_B, T_C, T_E, T_MU, T_FZ = range(5)


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 1360.0
    yaw_inertia: float = 2050.0
    wheel_radius_eff: float = 0.3
    dist_front: float = 1.43
    dist_rear: float = 1.21
    track_width: float = 1.5
    wheel_spin_inertia: float = 1.2
    cornering_stiffness_front: float = 16000.0
    cornering_stiffness_rear: float = 16000.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"VehicleParams.{f.name} must be > 0, got {value!r}")

    @property
    def wheelbase(self) -> float:
        return self.dist_front + self.dist_rear

    def as_array(self) -> np.ndarray:
        return np.array([
            self.mass, self.yaw_inertia, self.wheel_radius_eff,
            self.dist_front, self.dist_rear, self.track_width,
            self.wheel_spin_inertia, self.cornering_stiffness_front,
            self.cornering_stiffness_rear,
        ])


def static_normal_loads(params: VehicleParams) -> tuple[float, float, float, float]:
    """Per-wheel static loads (FL, FR, RL, RR) from the axle weight split."""
    L = params.wheelbase
    front = params.mass * GRAVITY * params.dist_rear / (2.0 * L)
    rear = params.mass * GRAVITY * params.dist_front / (2.0 * L)
    return (front, front, rear, rear)


@dataclass(frozen=True)
class TireParams:
    stiffness_factor: float = 10.0
    shape_factor: float = 1.9
    curvature_factor: float = 0.97
    mu: float = 0.9
    normal_force: tuple[float, float, float, float] = field(
        default_factory=lambda: static_normal_loads(VehicleParams()))

    def __post_init__(self):
        if not 0.0 < self.mu <= 1.0:
            raise ValueError(f"friction coefficient must lie in (0, 1], got {self.mu}")
        if self.stiffness_factor <= 0 or self.shape_factor <= 0:
            raise ValueError("Pacejka B and C must be positive")
        if len(self.normal_force) != 4 or min(self.normal_force) <= 0:
            raise ValueError("need four positive normal loads")

    @classmethod
    def for_vehicle(cls, params: VehicleParams, mu: float = 0.9, **kw) -> "TireParams":
        return cls(mu=mu, normal_force=static_normal_loads(params), **kw)

    def with_mu(self, mu: float) -> "TireParams":
        return TireParams(self.stiffness_factor, self.shape_factor,
                          self.curvature_factor, mu, tuple(self.normal_force))

    def as_array(self) -> np.ndarray:
        return np.array([self.stiffness_factor, self.shape_factor,
                         self.curvature_factor, self.mu, *self.normal_force])


@dataclass(frozen=True)
class VehicleState:
    vx: float
    vy: float = 0.0
    yaw: float = 0.0
    yaw_rate: float = 0.0
    pos_x: float = 0.0
    pos_y: float = 0.0
    wheel_speed: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    @classmethod
    def rolling(cls, vx: float, params: VehicleParams, **kw) -> "VehicleState":
        """Straight-ahead state with every wheel free-rolling at ``vx``."""
        w = vx / params.wheel_radius_eff
        return cls(vx=vx, wheel_speed=(w, w, w, w), **kw)

    @classmethod
    def from_array(cls, x) -> "VehicleState":
        x = np.asarray(x, dtype=float)
        return cls(*(float(v) for v in x[:6]), wheel_speed=tuple(float(v) for v in x[6:10]))

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.yaw, self.yaw_rate,
                         self.pos_x, self.pos_y, *self.wheel_speed])

    def rigid_body(self) -> np.ndarray:
        """The six observed states ``[vx, vy, yaw, yaw_rate, X, Y]``."""
        return self.as_array()[:6]


@dataclass(frozen=True)
class TireForceVector:
    fx: np.ndarray
    fy: np.ndarray

    def flat(self) -> np.ndarray:
        """x-block then y-block, ``[fx1..fx4, fy1..fy4]``."""
        return np.concatenate([self.fx, self.fy])


@dataclass(frozen=True)
class CgForces:
    fx_total: float
    fy_total: float
    yaw_moment: float

    def as_array(self) -> np.ndarray:
        return np.array([self.fx_total, self.fy_total, self.yaw_moment])


# ---------------------------------------------------------------------------
# kernels

@njit(cache=True)
def pacejka_kernel(slip, peak, B, C, E):
    bs = B * slip
    return peak * np.sin(C * np.arctan(bs - E * (bs - np.arctan(bs))))


@njit(cache=True)
def wheel_geometry(veh):
    """Longitudinal (x) and lateral (y) wheel positions, FL FR RL RR; y left."""
    lf = veh[V_LF]
    lr = veh[V_LR]
    h = 0.5 * veh[V_TRACK]
    px = np.array([lf, lf, -lr, -lr])
    py = np.array([h, -h, h, -h])
    return px, py


@njit(cache=True)
def slip_kernel(x, steer, veh, alpha, kappa):
    vx = x[0]
    if not vx > MIN_SPEED:
        return FAULT_SPEED
    vy = x[1]
    r = x[3]
    lf = veh[V_LF]
    lr = veh[V_LR]
    R = veh[V_REFF]
    h = 0.5 * veh[V_TRACK]
    a_front = steer - np.arctan((vy + lf * r) / vx)
    a_rear = -np.arctan((vy - lr * r) / vx)
    alpha[0] = a_front
    alpha[1] = a_front
    alpha[2] = a_rear
    alpha[3] = a_rear
    c = np.cos(steer)
    s = np.sin(steer)
    for i in range(4):
        if i < 2:
            px = lf
            ci = c
            si = s
        else:
            px = -lr
            ci = 1.0
            si = 0.0
        py = h if i % 2 == 0 else -h
        # contact-point velocity projected on the wheel heading
        v_long = (vx - r * py) * ci + (vy + r * px) * si
        denom = max(abs(v_long), MIN_SPEED)
        kappa[i] = (R * x[6 + i] - v_long) / denom
    return OK


@njit(cache=True)
def tire_force_kernel(x, steer, veh, tire, fx, fy):
    alpha = np.empty(4)
    kappa = np.empty(4)
    status = slip_kernel(x, steer, veh, alpha, kappa)
    if status != OK:
        return status
    B = tire[T_B]
    C = tire[T_C]
    E = tire[T_E]
    mu = tire[T_MU]
    for i in range(4):
        peak = mu * tire[T_FZ + i]
        fxi = pacejka_kernel(kappa[i], peak, B, C, E)
        fyi = pacejka_kernel(alpha[i], peak, B, C, E)
        mag = np.sqrt(fxi * fxi + fyi * fyi)
        if mag > peak:
            scale = peak / mag
            fxi *= scale
            fyi *= scale
        fx[i] = fxi
        fy[i] = fyi
    for i in range(4):
        if not (np.isfinite(fx[i]) and np.isfinite(fy[i])):
            return FAULT_NONFINITE
    return OK


@njit(cache=True)
def cg_force_kernel(fx, fy, steer, veh):
    lf = veh[V_LF]
    lr = veh[V_LR]
    h = 0.5 * veh[V_TRACK]
    c = np.cos(steer)
    s = np.sin(steer)
    Fx = 0.0
    Fy = 0.0
    Gz = 0.0
    for i in range(4):
        if i < 2:
            ci = c
            si = s
            px = lf
        else:
            ci = 1.0
            si = 0.0
            px = -lr
        # left wheels carry a negative lever for longitudinal force
        lever = -h if i % 2 == 0 else h
        bx = fx[i] * ci - fy[i] * si
        by = fx[i] * si + fy[i] * ci
        Fx += bx
        Fy += by
        Gz += px * by + lever * bx
    return Fx, Fy, Gz


@njit(cache=True)
def derivative_kernel(x, steer, torques, veh, tire, dx):
    fx = np.empty(4)
    fy = np.empty(4)
    status = tire_force_kernel(x, steer, veh, tire, fx, fy)
    if status != OK:
        return status
    Fx, Fy, Gz = cg_force_kernel(fx, fy, steer, veh)
    m = veh[V_MASS]
    vx = x[0]
    vy = x[1]
    yaw = x[2]
    r = x[3]
    cy = np.cos(yaw)
    sy = np.sin(yaw)
    dx[0] = Fx / m + r * vy
    dx[1] = Fy / m - r * vx
    dx[2] = r
    dx[3] = Gz / veh[V_IZ]
    dx[4] = vx * cy - vy * sy
    dx[5] = vx * sy + vy * cy
    R = veh[V_REFF]
    Iw = veh[V_IW]
    for i in range(4):
        dx[6 + i] = (torques[i] - R * fx[i]) / Iw
    for i in range(N_STATES):
        if not np.isfinite(dx[i]):
            return FAULT_NONFINITE
    return OK


@njit(cache=True)
def rk4_kernel(x, steer, torques, veh, tire, dt, out):
    """Classical RK4 step with inputs held over ``dt``; writes into ``out``."""
    n = x.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    st = derivative_kernel(x, steer, torques, veh, tire, k1)
    if st != OK:
        return st
    for i in range(n):
        tmp[i] = x[i] + 0.5 * dt * k1[i]
    st = derivative_kernel(tmp, steer, torques, veh, tire, k2)
    if st != OK:
        return st
    for i in range(n):
        tmp[i] = x[i] + 0.5 * dt * k2[i]
    st = derivative_kernel(tmp, steer, torques, veh, tire, k3)
    if st != OK:
        return st
    for i in range(n):
        tmp[i] = x[i] + dt * k3[i]
    st = derivative_kernel(tmp, steer, torques, veh, tire, k4)
    if st != OK:
        return st
    for i in range(n):
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if not np.isfinite(out[i]):
            return FAULT_NONFINITE
    return OK


def rk4_generic(f, x, dt):
    """One RK4 step of an autonomous system ``x' = f(x)``; pure numpy."""
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


# ---------------------------------------------------------------------------
# dataclass-level API

def _raise_for(status: int, what: str):
    if status == FAULT_SPEED:
        raise DegenerateSpeedError(f"{what}: vx must exceed {MIN_SPEED} m/s")
    if status != OK:
        raise SimulationFault(f"{what}: non-finite value")


def _state_array(state) -> np.ndarray:
    if isinstance(state, VehicleState):
        return state.as_array()
    return np.asarray(state, dtype=float)


def pacejka(slip, peak: float, tire: TireParams):
    """Magic-formula force for a slip angle or slip ratio; vectorised over ``slip``."""
    if peak < 0:
        raise ValueError("peak force must be non-negative")
    bs = tire.stiffness_factor * np.asarray(slip, dtype=float)
    E = tire.curvature_factor
    out = peak * np.sin(tire.shape_factor * np.arctan(bs - E * (bs - np.arctan(bs))))
    return out if out.ndim else float(out)


def slip_quantities(state, steer: float, params: VehicleParams):
    """Per-wheel slip angles [rad] and slip ratios, FL FR RL RR."""
    alpha = np.empty(4)
    kappa = np.empty(4)
    _raise_for(slip_kernel(_state_array(state), float(steer), params.as_array(), alpha, kappa),
               "slip_quantities")
    return alpha, kappa


def tire_forces(state, steer: float, tire: TireParams, params: VehicleParams) -> TireForceVector:
    fx = np.empty(4)
    fy = np.empty(4)
    _raise_for(tire_force_kernel(_state_array(state), float(steer), params.as_array(),
                                 tire.as_array(), fx, fy), "tire_forces")
    return TireForceVector(fx, fy)


def cg_forces(tires: TireForceVector, steer: float, params: VehicleParams) -> CgForces:
    Fx, Fy, Gz = cg_force_kernel(np.asarray(tires.fx, float), np.asarray(tires.fy, float),
                                 float(steer), params.as_array())
    return CgForces(Fx, Fy, Gz)


def derivatives(state, steer: float, wheel_torques, tire: TireParams,
                params: VehicleParams) -> np.ndarray:
    """Time derivative of the 10-element state array."""
    dx = np.empty(N_STATES)
    _raise_for(derivative_kernel(_state_array(state), float(steer),
                                 np.asarray(wheel_torques, dtype=float),
                                 params.as_array(), tire.as_array(), dx), "derivatives")
    return dx


def step_rk4(state, steer: float, wheel_torques, tire: TireParams,
             params: VehicleParams, dt: float = 1e-3):
    """Advance the plant by ``dt``; returns the same type it was given."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    out = np.empty(N_STATES)
    _raise_for(rk4_kernel(_state_array(state), float(steer),
                          np.asarray(wheel_torques, dtype=float),
                          params.as_array(), tire.as_array(), float(dt), out), "step_rk4")
    if isinstance(state, VehicleState):
        return VehicleState.from_array(out)
    return out


def sideslip(state) -> float:
    x = _state_array(state)
    if not x[0] > MIN_SPEED:
        raise DegenerateSpeedError(f"sideslip: vx must exceed {MIN_SPEED} m/s")
    return float(np.arctan(x[1] / x[0]))
