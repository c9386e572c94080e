"""Vertical-plane model of a rail vehicle on a two-tier suspension.

Three rigid bodies (carriage and two trolleys), each with heave and pitch,
give six generalized coordinates and twelve first-order phase variables.
The state vector is interleaved displacement/velocity pairs in the order of
``STATE_NAMES``.  Everything is SI.

The right-hand side is written out term by term (``rhs`` and the per-body
``*_accel`` helpers); ``assemble_system`` builds the same equations as
matrices.  The two forms are kept independent on purpose so one can check
the other.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
import scipy.linalg

__all__ = [
    "STATE_NAMES",
    "COORD_NAMES",
    "CARRIAGE_COORDS",
    "ParameterError",
    "AnalysisError",
    "VehicleParams",
    "VehicleState",
    "TrackExcitation",
    "ExcitationSample",
    "SystemMatrices",
    "excitation",
    "carriage_accel",
    "trolley_accel",
    "rhs",
    "assemble_system",
    "undamped_frequencies",
    "modal_analysis",
]

STATE_NAMES = (
    "z_k", "v_zk", "phi_k", "w_phik",
    "z_1", "v_z1", "phi_1", "w_phi1",
    "z_2", "v_z2", "phi_2", "w_phi2",
)
COORD_NAMES = STATE_NAMES[0::2]
CARRIAGE_COORDS = (0, 1)

# 70 tf*m*s^2 expressed in kg*m^2
_TF_M_S2 = 9.80665e3


class ParameterError(ValueError):
    """A model parameter violates its physical invariant."""


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class VehicleParams:
    m_k: float = 57_000.0
    j_k: float = 70.0 * _TF_M_S2
    m_t: float = 9_000.0
    j_t: float = 5_000.0
    a_k: float = 3.725
    a_t: float = 1.25
    c_k: float = 2.66e6
    b_k: float = 1.0e5
    c_t: float = 3.04e6
    b_t: float = 3.0e4

    def validate(self) -> "VehicleParams":
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{f.name}: must be a finite number, got {value!r}")
        for name in ("m_k", "j_k", "m_t", "j_t", "c_k", "c_t"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name}: must be > 0, got {getattr(self, name)!r}")
        for name in ("b_k", "b_t"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name}: must be >= 0, got {getattr(self, name)!r}")
        if self.a_t <= 0:
            raise ParameterError(f"a_t: must be > 0, got {self.a_t!r}")
        if self.a_k <= self.a_t:
            raise ParameterError(f"a_k: must exceed a_t ({self.a_t}), got {self.a_k!r}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, slots=True)
class VehicleState:
    z_k: float = 0.0
    v_zk: float = 0.0
    phi_k: float = 0.0
    w_phik: float = 0.0
    z_1: float = 0.0
    v_z1: float = 0.0
    phi_1: float = 0.0
    w_phi1: float = 0.0
    z_2: float = 0.0
    v_z2: float = 0.0
    phi_2: float = 0.0
    w_phi2: float = 0.0

    def __post_init__(self):
        for name in STATE_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name}: state must be finite, got {value!r}")

    @classmethod
    def from_sequence(cls, values) -> "VehicleState":
        values = [float(v) for v in values]
        if len(values) != 12:
            raise ParameterError(f"state needs 12 values, got {len(values)}")
        return cls(*values)

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in STATE_NAMES)


@dataclass(frozen=True, slots=True)
class TrackExcitation:
    a1: float = 0.005
    a2: float = 0.002
    l_rail: float = 25.0
    v: float = 20.0

    def __post_init__(self):
        for name in ("a1", "a2", "l_rail", "v"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name}: must be a finite number, got {value!r}")
        if self.l_rail <= 0:
            raise ParameterError(f"l_rail: must be > 0, got {self.l_rail!r}")
        if self.v <= 0:
            raise ParameterError(f"v: must be > 0, got {self.v!r}")
        if self.a1 < 0:
            raise ParameterError(f"a1: must be >= 0, got {self.a1!r}")
        if self.a2 < 0:
            raise ParameterError(f"a2: must be >= 0, got {self.a2!r}")

    @property
    def w(self) -> float:
        return 2.0 * math.pi * self.v / self.l_rail

    def delays(self, a_k: float, a_t: float) -> tuple[float, float, float, float]:
        """Arrival delay of each wheelset behind the leading one."""
        v = self.v
        return (0.0, 2.0 * a_t / v, 2.0 * a_k / v, (2.0 * a_k + 2.0 * a_t) / v)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, slots=True)
class ExcitationSample:
    """Rail displacement and velocity under the four wheelsets.

    Order: front trolley front/rear, rear trolley front/rear.
    """

    eta: tuple[float, float, float, float]
    eta_dot: tuple[float, float, float, float]


def wheelset_input(t: float, delay: float, a1: float, a2: float, w: float) -> tuple[float, float]:
    tau = t - delay
    if tau < 0.0:
        return 0.0, 0.0
    wt = w * tau
    eta = a1 * math.sin(wt) + a2 * math.sin(2.0 * wt)
    eta_dot = a1 * w * math.cos(wt) + 2.0 * a2 * w * math.cos(2.0 * wt)
    return eta, eta_dot


def excitation(t: float, track: TrackExcitation, a_k: float, a_t: float) -> ExcitationSample:
    if not t >= 0.0:
        raise ParameterError(f"t: must be >= 0, got {t!r}")
    w = track.w
    pairs = [wheelset_input(t, d, track.a1, track.a2, w) for d in track.delays(a_k, a_t)]
    return ExcitationSample(
        eta=tuple(e for e, _ in pairs),
        eta_dot=tuple(ed for _, ed in pairs),
    )


def carriage_accel(s, p: VehicleParams) -> tuple[float, float]:
    """Carriage heave and pitch accelerations for state sequence ``s``."""
    z_k, v_zk, phi_k, w_k = s[0], s[1], s[2], s[3]
    z_1, v_1, z_2, v_2 = s[4], s[5], s[8], s[9]
    f_z = -(p.b_k * (2.0 * v_zk - v_1 - v_2) + p.c_k * (2.0 * z_k - z_1 - z_2))
    m_phi = -p.a_k * (
        p.b_k * (2.0 * p.a_k * w_k - v_1 + v_2) + p.c_k * (2.0 * p.a_k * phi_k - z_1 + z_2)
    )
    return f_z / p.m_k, m_phi / p.j_k


def trolley_accel(which: int, s, eta_a: float, eta_b: float, ed_a: float, ed_b: float,
                  p: VehicleParams) -> tuple[float, float]:
    """Heave and pitch accelerations of trolley ``which`` (1 = front, 2 = rear).

    ``eta_a``/``eta_b`` are the rail inputs under the trolley's front and rear
    wheelsets, ``ed_a``/``ed_b`` their rates.
    """
    z_k, v_zk, phi_k, w_k = s[0], s[1], s[2], s[3]
    if which == 1:
        z, v, phi, w, arm = s[4], s[5], s[6], s[7], p.a_k
    else:
        z, v, phi, w, arm = s[8], s[9], s[10], s[11], -p.a_k
    f_z = (
        p.b_k * (v_zk - v + arm * w_k)
        + p.c_k * (z_k - z + arm * phi_k)
        - 2.0 * p.b_t * v
        - 2.0 * p.c_t * z
        + p.b_t * (ed_a + ed_b)
        + p.c_t * (eta_a + eta_b)
    )
    a2 = p.a_t * p.a_t
    m_phi = (
        -2.0 * a2 * p.b_t * w
        - 2.0 * a2 * p.c_t * phi
        + p.a_t * (p.b_t * (ed_a - ed_b) + p.c_t * (eta_a - eta_b))
    )
    return f_z / p.m_t, m_phi / p.j_t


def _as_values(state) -> tuple[float, ...]:
    return state.as_tuple() if isinstance(state, VehicleState) else tuple(state)


def rhs(state, exc: ExcitationSample, p: VehicleParams) -> tuple[float, ...]:
    """Time derivative of the 12 phase variables."""
    s = _as_values(state)
    eta, ed = exc.eta, exc.eta_dot
    if not all(math.isfinite(x) for x in s) or not all(math.isfinite(x) for x in eta + ed):
        raise ParameterError("rhs: non-finite state or excitation")
    a_zk, a_phik = carriage_accel(s, p)
    a_z1, a_phi1 = trolley_accel(1, s, eta[0], eta[1], ed[0], ed[1], p)
    a_z2, a_phi2 = trolley_accel(2, s, eta[2], eta[3], ed[2], ed[3], p)
    return (
        s[1], a_zk, s[3], a_phik,
        s[5], a_z1, s[7], a_phi1,
        s[9], a_z2, s[11], a_phi2,
    )


@dataclass(frozen=True)
class SystemMatrices:
    """``diag(m_diag) q'' + c q' + k q = b_c eta' + b_k eta`` with q = COORD_NAMES."""

    m_diag: np.ndarray
    c: np.ndarray
    k: np.ndarray
    b_c: np.ndarray
    b_k: np.ndarray

    def accelerations(self, q, qdot, eta, eta_dot) -> np.ndarray:
        force = -self.c @ qdot - self.k @ q + self.b_c @ eta_dot + self.b_k @ eta
        return force / self.m_diag


def _coupling(stiff: float, tier2: float, a_k: float, a_t: float) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient matrix for one spring/damper family plus its rail input map.

    ``stiff`` is the first-tier coefficient, ``tier2`` the second-tier one.
    """
    m = np.zeros((6, 6))
    # carriage heave / pitch
    m[0, 0] = 2.0 * tier2
    m[0, 2] = m[0, 4] = -tier2
    m[1, 1] = 2.0 * a_k * a_k * tier2
    m[1, 2] = -a_k * tier2
    m[1, 4] = a_k * tier2
    # trolleys: second tier to carriage attachment point, first tier to wheelsets
    for row, arm in ((2, a_k), (4, -a_k)):
        m[row, 0] = -tier2
        m[row, 1] = -arm * tier2
        m[row, row] = tier2 + 2.0 * stiff
        m[row + 1, row + 1] = 2.0 * a_t * a_t * stiff
    b = np.zeros((6, 4))
    b[2, 0] = b[2, 1] = stiff
    b[3, 0], b[3, 1] = a_t * stiff, -a_t * stiff
    b[4, 2] = b[4, 3] = stiff
    b[5, 2], b[5, 3] = a_t * stiff, -a_t * stiff
    return m, b


def assemble_system(p: VehicleParams, strict: bool = True) -> SystemMatrices:
    if strict:
        p.validate()
    c, b_c = _coupling(p.b_t, p.b_k, p.a_k, p.a_t)
    k, b_k = _coupling(p.c_t, p.c_k, p.a_k, p.a_t)
    m_diag = np.array([p.m_k, p.j_k, p.m_t, p.j_t, p.m_t, p.j_t], dtype=float)
    return SystemMatrices(m_diag=m_diag, c=c, k=k, b_c=b_c, b_k=b_k)


def modal_analysis(sys: SystemMatrices) -> tuple[np.ndarray, np.ndarray]:
    """Undamped natural frequencies [Hz] (ascending) and mass-normalized mode shapes."""
    if np.any(sys.m_diag <= 0):
        raise AnalysisError("mass matrix must be positive")
    k = 0.5 * (sys.k + sys.k.T)
    try:
        np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        raise AnalysisError("stiffness matrix is not positive definite") from None
    lam, vecs = scipy.linalg.eigh(k, np.diag(sys.m_diag))
    return np.sqrt(lam) / (2.0 * np.pi), vecs


def undamped_frequencies(sys: SystemMatrices) -> np.ndarray:
    return modal_analysis(sys)[0]


def carriage_energy_fraction(sys: SystemMatrices, shapes: np.ndarray) -> np.ndarray:
    """Share of each mode's kinetic energy carried by the carriage body."""
    ke = sys.m_diag[:, None] * shapes**2
    return ke[list(CARRIAGE_COORDS)].sum(axis=0) / ke.sum(axis=0)
