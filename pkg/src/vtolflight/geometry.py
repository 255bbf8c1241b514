"""Geometric primitives shared by the controllers and the plant.

Vectors are float64 arrays of shape (3,). An attitude (body frame) is a 3x3
rotation matrix whose columns are the body axes i, j, k expressed in the
inertial NED frame, so ``R @ x_body`` gives inertial coordinates.

The kernels are compiled with numba so they can be called both from Python
and from the other compiled kernels of the package.
"""

import math

import numpy as np
from numba import njit

ORTHO_TOL = 1e-12
GEOM_TOL = 1e-10

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])  # k0, points down


@njit(cache=True)
def cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@njit(cache=True)
def norm(a):
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


@njit(cache=True)
def skew(v):
    """Matrix S(v) such that ``S(v) @ w == cross(v, w)``."""
    out = np.zeros((3, 3))
    out[0, 1] = -v[2]
    out[0, 2] = v[1]
    out[1, 0] = v[2]
    out[1, 2] = -v[0]
    out[2, 0] = -v[1]
    out[2, 1] = v[0]
    return out


@njit(cache=True)
def sat_scalar(x, lo, hi):
    if lo > hi:
        raise ValueError("sat_scalar: lower bound above upper bound")
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


@njit(cache=True)
def sat_norm(v, vmax):
    """Scale ``v`` down to norm ``vmax`` if it is longer, keeping its direction."""
    n = norm(v)
    if n <= vmax:
        return v.copy()
    return v * (vmax / n)


@njit(cache=True)
def project_orthogonal(u, v):
    """Component of ``v`` orthogonal to the unit vector ``u``."""
    if abs(norm(u) - 1.0) > 1e-9:
        raise ValueError("project_orthogonal: u must be a unit vector")
    return v - dot(v, u) * u


@njit(cache=True)
def frame_error_vector(R, Rr):
    """Sum of the axis cross products i x i_r + j x j_r + k x k_r.

    Equals 2 sin(angle) * axis for the rotation taking ``R`` onto ``Rr``;
    it vanishes both at alignment and at a half-turn error.
    """
    out = np.zeros(3)
    for c in range(3):
        out += cross(R[:, c], Rr[:, c])
    return out


@njit(cache=True)
def orthonormalize(R):
    """Nearest right-handed orthonormal frame, by Gram-Schmidt on i then j.

    The i axis keeps its direction; j is made orthogonal to it and k is
    rebuilt as i x j.
    """
    i = R[:, 0].copy()
    ni = norm(i)
    if ni < 1e-12:
        raise ValueError("orthonormalize: degenerate i axis")
    i = i / ni
    j = R[:, 1] - dot(R[:, 1], i) * i
    nj = norm(j)
    if nj < 1e-9 * max(1.0, norm(R[:, 1])):
        raise ValueError("orthonormalize: collinear axes")
    j = j / nj
    k = cross(i, j)
    out = np.empty((3, 3))
    out[:, 0] = i
    out[:, 1] = j
    out[:, 2] = k
    return out


@njit(cache=True)
def rotation_about(axis, angle):
    """Rodrigues rotation matrix for a unit axis and an angle in radians."""
    K = skew(axis)
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


@njit(cache=True)
def unit_or_hold(v, previous, eps):
    """Normalise ``v``; fall back to ``previous`` when |v| is below ``eps``.

    Above the threshold the normalisation is damped as v |v| / (|v|^2 + 1e-9)
    and then renormalised, which keeps it smooth near the guard.
    """
    n = norm(v)
    if n < eps:
        return previous.copy(), True
    w = v * (n / (n * n + 1e-9))
    return w / norm(w), False


def frame_from_axes(i, j, k):
    return np.column_stack((i, j, k)).astype(float)


def axis_angle(R, Rr):
    """Axis-angle (unit axis in inertial coordinates, angle in [0, pi]) of the
    rotation taking frame ``R`` onto ``Rr``."""
    Q = Rr @ R.T
    c = np.clip((np.trace(Q) - 1.0) / 2.0, -1.0, 1.0)
    angle = math.acos(c)
    w = np.array([Q[2, 1] - Q[1, 2], Q[0, 2] - Q[2, 0], Q[1, 0] - Q[0, 1]])
    s = np.linalg.norm(w)
    if s > 1e-9:
        return w / s, angle
    if angle < 1e-6:
        return E1.copy(), 0.0
    # half-turn: axis from the symmetric part
    B = (Q + np.eye(3)) / 2.0
    col = int(np.argmax(np.diag(B)))
    axis = B[:, col] / math.sqrt(B[col, col])
    return axis / np.linalg.norm(axis), angle


def euler_from_frame(R):
    """(roll, pitch, yaw) in radians of a body frame, ZYX convention."""
    roll = math.atan2(R[2, 1], R[2, 2])
    pitch = -math.asin(max(-1.0, min(1.0, R[2, 0])))
    yaw = math.atan2(R[1, 0], R[0, 0])
    return roll, pitch, yaw


def frame_from_euler(roll, pitch, yaw):
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])
