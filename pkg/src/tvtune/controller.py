"""Command interpreter (reference C.G. forces) and the torque-vectoring allocator.

The allocator minimises, over longitudinal tyre-force corrections ``df``::

    P = 0.5 * [(E - J df)^T W_E (E - J df) + df^T W_df df]

whose unique minimiser is ``df = (W_df + J^T W_E J)^{-1} J^T W_E E``.
Only longitudinal corrections are produced; lateral corrections are zero.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dynamics import (GRAVITY, MIN_SPEED, V_IZ, V_LF, V_LR, V_MASS, V_REFF,
                       V_TRACK, VehicleParams)
from .errors import AllocationError, DegenerateSpeedError

log = logging.getLogger(__name__)

W_DF_MIN = 40.0
W_DF_MAX = 1000.0
MAX_CONDITION = 1e12

# ControllerConfig.as_array() layout
C_WE, C_KUS, C_MU_NOM, C_ACC_FRAC, C_TREF, C_STEER_LEVER = 0, 3, 4, 5, 6, 7


def understeer_gradient(params: VehicleParams) -> float:
    """Linear-bicycle understeer gradient [s^2/m] from the axle stiffnesses.

    Negative values (oversteer) are floored at zero so the reference yaw
    rate never changes sign above a critical speed.
    """
    k = params.mass / params.wheelbase * (
        params.dist_rear / params.cornering_stiffness_front
        - params.dist_front / params.cornering_stiffness_rear)
    return max(k, 0.0)


@dataclass(frozen=True)
class ControllerConfig:
    w_e: tuple[float, float, float] = (0.4, 0.02, 1500.0)
    understeer_gradient: float | None = None
    mu_nominal: float = 0.9
    accel_fraction: float = 0.85
    t_ref: float = 0.25
    steer_lever: bool = True
    incremental: bool = True
    max_correction: float = 1e9

    def __post_init__(self):
        if len(self.w_e) != 3 or min(self.w_e) <= 0:
            raise ValueError("w_e needs three positive entries")
        if self.t_ref <= 0 or self.mu_nominal <= 0 or self.accel_fraction <= 0:
            raise ValueError("CIM constants must be positive")

    def as_array(self, params: VehicleParams) -> np.ndarray:
        kus = (understeer_gradient(params) if self.understeer_gradient is None
               else self.understeer_gradient)
        return np.array([*self.w_e, kus, self.mu_nominal, self.accel_fraction,
                         self.t_ref, 1.0 if self.steer_lever else 0.0,
                         1.0 if self.incremental else 0.0, self.max_correction])


@dataclass(frozen=True)
class ReferenceForces:
    fx_des: float
    fy_des: float
    mz_des: float

    def as_array(self) -> np.ndarray:
        return np.array([self.fx_des, self.fy_des, self.mz_des])


@dataclass(frozen=True)
class CgError:
    ex: float
    ey: float
    emz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.ex, self.ey, self.emz])


@dataclass(frozen=True)
class Weights:
    w_e: tuple = (0.4, 0.02, 1500.0)
    w_df: tuple = (100.0, 100.0, 100.0, 100.0)

    def __post_init__(self):
        if len(self.w_e) != 3 or len(self.w_df) != 4:
            raise ValueError("Weights need 3 w_e and 4 w_df entries")
        if min(self.w_e) <= 0 or min(self.w_df) <= 0:
            raise ValueError("weights must be positive")


@dataclass(frozen=True)
class CorrectiveForces:
    dfx: np.ndarray
    torque: np.ndarray


# ---------------------------------------------------------------------------
# kernels

@njit(cache=True)
def cim_kernel(steer, drive_torque, vx, yaw_rate, veh, ctl):
    m = veh[V_MASS]
    L = veh[V_LF] + veh[V_LR]
    fx_des = drive_torque / veh[V_REFF]
    r_des = vx * steer / (L + ctl[C_KUS] * vx * vx)
    r_max = ctl[C_ACC_FRAC] * GRAVITY * ctl[C_MU_NOM] / vx
    if r_des > r_max:
        r_des = r_max
    elif r_des < -r_max:
        r_des = -r_max
    fy_des = m * vx * r_des
    mz_des = veh[V_IZ] * (r_des - yaw_rate) / ctl[C_TREF]
    return fx_des, fy_des, mz_des


@njit(cache=True)
def jacobian_kernel(steer, veh, steer_lever, J):
    c = np.cos(steer)
    s = np.sin(steer)
    h = 0.5 * veh[V_TRACK]
    lf = veh[V_LF]
    lev = lf * s if steer_lever else 0.0
    J[0, 0] = c
    J[0, 1] = c
    J[0, 2] = 1.0
    J[0, 3] = 1.0
    J[1, 0] = s
    J[1, 1] = s
    J[1, 2] = 0.0
    J[1, 3] = 0.0
    J[2, 0] = lev - h * c
    J[2, 1] = lev + h * c
    J[2, 2] = -h
    J[2, 3] = h


@njit(cache=True)
def allocate_kernel(E, J, w_e, w_df, df):
    """Solve (W_df + J^T W_E J) df = J^T W_E E by Cholesky; 0 on success."""
    A = np.zeros((4, 4))
    b = np.zeros(4)
    for i in range(4):
        for k in range(3):
            wj = w_e[k] * J[k, i]
            b[i] += wj * E[k]
            for j in range(4):
                A[i, j] += wj * J[k, j]
        A[i, i] += w_df[i]
    # A >= diag(w_df): cheap condition bound before paying for eigenvalues
    wmin = w_df[0]
    trace = 0.0
    for i in range(4):
        wmin = min(wmin, w_df[i])
        trace += A[i, i]
    if not (wmin > 0.0 and trace / wmin < MAX_CONDITION):
        ev = np.linalg.eigvalsh(A)
        if not (ev[0] > 0.0 and ev[3] / ev[0] < MAX_CONDITION):
            return 1
    Lm = np.zeros((4, 4))
    for i in range(4):
        for j in range(i + 1):
            acc = A[i, j]
            for k in range(j):
                acc -= Lm[i, k] * Lm[j, k]
            if i == j:
                if acc <= 0.0:
                    return 1
                Lm[i, i] = np.sqrt(acc)
            else:
                Lm[i, j] = acc / Lm[j, j]
    y = np.zeros(4)
    for i in range(4):
        acc = b[i]
        for k in range(i):
            acc -= Lm[i, k] * y[k]
        y[i] = acc / Lm[i, i]
    for i in range(3, -1, -1):
        acc = y[i]
        for k in range(i + 1, 4):
            acc -= Lm[k, i] * df[k]
        df[i] = acc / Lm[i, i]
    return 0


@njit(cache=True)
def performance_kernel(E, J, df, w_e, w_df):
    p = 0.0
    for k in range(3):
        res = E[k]
        for i in range(4):
            res -= J[k, i] * df[i]
        p += w_e[k] * res * res
    for i in range(4):
        p += w_df[i] * df[i] * df[i]
    return 0.5 * p


# ---------------------------------------------------------------------------
# dataclass-level API

def cim_reference(driver_steer: float, driver_torque: float, state, params: VehicleParams,
                  config: ControllerConfig = ControllerConfig()) -> ReferenceForces:
    """Desired C.G. forces under nominal (high-friction) assumptions.

    ``driver_torque`` is the total drive torque over all four wheels.
    """
    x = state.as_array() if hasattr(state, "as_array") else np.asarray(state, float)
    if not x[0] > MIN_SPEED:
        raise DegenerateSpeedError(f"cim_reference: vx must exceed {MIN_SPEED} m/s")
    fx, fy, mz = cim_kernel(float(driver_steer), float(driver_torque), x[0], x[3],
                            params.as_array(), config.as_array(params))
    return ReferenceForces(fx, fy, mz)


def cg_error(ref: ReferenceForces, actual) -> CgError:
    a = actual.as_array() if hasattr(actual, "as_array") else np.asarray(actual, float)
    return CgError(ref.fx_des - a[0], ref.fy_des - a[1], ref.mz_des - a[2])


def jacobian(steer: float, params: VehicleParams, steer_lever: bool = True) -> np.ndarray:
    """3x4 partials of (Fx, Fy, Gz) with respect to (fx1..fx4)."""
    J = np.empty((3, 4))
    jacobian_kernel(float(steer), params.as_array(), steer_lever, J)
    return J


def _as_vec(v, n):
    if hasattr(v, "as_array"):
        v = v.as_array()
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"expected {n} entries, got shape {v.shape}")
    return v


def allocate(error, jac, weights: Weights, wheel_radius: float = 0.3) -> CorrectiveForces:
    """Closed-form minimiser of the weighted allocation objective.

    Raises AllocationError when the system matrix is singular or its
    condition number exceeds 1e12; see ``allocate_or_zero`` for the
    fail-safe variant used in closed loop.
    """
    E = _as_vec(error, 3)
    J = np.asarray(jac, dtype=float)
    w_e = np.asarray(weights.w_e, dtype=float)
    w_df = np.asarray(weights.w_df, dtype=float)
    A = np.diag(w_df) + J.T @ np.diag(w_e) @ J
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise AllocationError(f"allocation matrix condition number {cond:.3g}")
    df = np.empty(4)
    if allocate_kernel(E, J, w_e, w_df, df) != 0:
        raise AllocationError("allocation matrix is not positive definite")
    return CorrectiveForces(df, wheel_radius * df)


def allocate_or_zero(error, jac, weights: Weights, wheel_radius: float = 0.3) -> CorrectiveForces:
    try:
        return allocate(error, jac, weights, wheel_radius)
    except AllocationError as exc:
        log.warning("allocation failed, passing driver command through: %s", exc)
        return CorrectiveForces(np.zeros(4), np.zeros(4))


def performance_index(error, jac, df, weights: Weights) -> float:
    E = _as_vec(error, 3)
    d = df.dfx if isinstance(df, CorrectiveForces) else np.asarray(df, dtype=float)
    return float(performance_kernel(E, np.asarray(jac, dtype=float), d,
                                    np.asarray(weights.w_e, float),
                                    np.asarray(weights.w_df, float)))
