"""
Engineering System Net: state transition and steady-state LCA.

Places are (operand, buffer) rows of the incidence matrix, transitions are
capabilities. Two transition modes:

- stepped:        Q_B' = Q_B + M+ U+ dT - M- U- dT ;  Q_E' = Q_E - U+ dT + U- dT
- instantaneous:  Q_B' = Q_B + M U dT  (U- = U+ = U, Q_E constant)

The steady-state solve partitions M = [A; B] and returns dE = B A^-1 dY.
"""

import json
import logging
from dataclasses import dataclass
import numpy as np
import pandas as pd
from scipy import linalg
from core.errors import InputError, NumericalError
from core.hfgt import IncidenceMatrix, PartitionedMatrix

logger = logging.getLogger(__name__)

# Solves are rejected above this 2-norm condition number
MAX_CONDITION = 1e12


# ============================================================
# Domain types
# ============================================================
@dataclass(frozen=True)
class Marking:
    q_b: np.ndarray
    q_e: np.ndarray


@dataclass(frozen=True)
class FiringSchedule:
    """K firing vectors per direction, shape (K, |E_S|), applied for dt hours each."""

    u_minus: np.ndarray
    u_plus: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        u_minus = np.atleast_2d(np.asarray(self.u_minus, dtype=np.float64))
        u_plus = np.atleast_2d(np.asarray(self.u_plus, dtype=np.float64))
        if u_minus.shape != u_plus.shape:
            raise InputError(f"schedule shape mismatch: u_minus {u_minus.shape}, u_plus {u_plus.shape}")
        if self.dt <= 0:
            raise InputError(f"dt must be positive, got {self.dt}")
        if (u_minus < 0).any() or (u_plus < 0).any():
            raise InputError("firing vectors must be non-negative")
        object.__setattr__(self, "u_minus", u_minus)
        object.__setattr__(self, "u_plus", u_plus)

    @property
    def steps(self) -> int:
        return self.u_minus.shape[0]

    @classmethod
    def instantaneous(cls, u: np.ndarray, dt: float = 1.0) -> "FiringSchedule":
        u = np.atleast_2d(np.asarray(u, dtype=np.float64))
        return cls(u_minus=u, u_plus=u.copy(), dt=dt)


@dataclass(frozen=True)
class EngineeringSystemNet:
    places: tuple[tuple[str, str], ...]
    transitions: tuple[str, ...]
    m_plus: np.ndarray
    m_minus: np.ndarray
    initial: Marking

    @property
    def incidence(self) -> np.ndarray:
        return self.m_plus - self.m_minus

    @classmethod
    def from_matrix(cls, m: IncidenceMatrix, q_b0=None, q_e0=None) -> "EngineeringSystemNet":
        """Build a net whose arcs come from M+ and M- (split from M when they are absent)."""
        values = m.dense()
        if m.plus is not None and m.minus is not None:
            m_plus, m_minus = m.plus.toarray(), m.minus.toarray()
        else:
            m_plus, m_minus = np.clip(values, 0, None), np.clip(-values, 0, None)
        return cls.from_arrays(m_plus, m_minus, m.row_map, m.col_map, q_b0, q_e0)

    @classmethod
    def from_arrays(cls, m_plus, m_minus, places=None, transitions=None, q_b0=None, q_e0=None):
        m_plus = np.asarray(m_plus, dtype=np.float64)
        m_minus = np.asarray(m_minus, dtype=np.float64)
        if m_plus.shape != m_minus.shape or m_plus.ndim != 2:
            raise InputError(f"M+ {m_plus.shape} and M- {m_minus.shape} must be equal-shaped matrices")
        n_places, n_trans = m_plus.shape
        if places is None:
            places = tuple((f"p{i}", "") for i in range(n_places))
        if transitions is None:
            transitions = tuple(f"t{j}" for j in range(n_trans))

        q_b = np.zeros(n_places) if q_b0 is None else np.asarray(q_b0, dtype=np.float64)
        q_e = np.zeros(n_trans) if q_e0 is None else np.asarray(q_e0, dtype=np.float64)
        if q_b.shape != (n_places,) or q_e.shape != (n_trans,):
            raise InputError(
                f"initial marking shape ({q_b.shape}, {q_e.shape}) does not match net ({n_places}, {n_trans})"
            )
        return cls(tuple(places), tuple(transitions), m_plus, m_minus, Marking(q_b, q_e))

    def place_index(self, operand: str, buffer: str) -> int:
        try:
            return self.places.index((operand, buffer))
        except ValueError:
            raise InputError(f"no place {operand} @ {buffer}") from None

    def transition_index(self, capability: str) -> int:
        try:
            return self.transitions.index(capability)
        except ValueError:
            raise InputError(f"no transition '{capability}'") from None


@dataclass(frozen=True)
class LCAResult:
    delta_e: np.ndarray
    firing: np.ndarray
    condition: float
    negative_firing: bool


# ============================================================
# State transition
# ============================================================
def _as_vector(u, n: int, label: str) -> np.ndarray:
    vec = np.asarray(u, dtype=np.float64).ravel()
    if vec.shape != (n,):
        raise InputError(f"{label} has length {vec.size}, net has {n} transitions")
    return vec


def _transition(net: EngineeringSystemNet, marking: Marking, u_minus, u_plus, dt: float) -> Marking:
    q_b = marking.q_b + (net.m_plus @ u_plus) * dt - (net.m_minus @ u_minus) * dt
    q_e = marking.q_e + (u_minus - u_plus) * dt
    return Marking(q_b, q_e)


def step(net: EngineeringSystemNet, u_minus, u_plus, dt: float = 1.0, marking: Marking | None = None) -> Marking:
    """
    Apply one stepped transition.

    Args:
        net: Engineering system net
        u_minus: Input firing vector (transitions started this step)
        u_plus: Output firing vector (transitions completed this step)
        dt: Step duration in hours
        marking: Current marking (default: the net's initial marking)

    Returns:
        The next Marking
    """
    if dt <= 0:
        raise InputError(f"dt must be positive, got {dt}")
    marking = net.initial if marking is None else marking
    n = len(net.transitions)
    if marking.q_b.shape != (len(net.places),) or marking.q_e.shape != (n,):
        raise InputError("marking dimensions do not match the net")
    return _transition(net, marking, _as_vector(u_minus, n, "u_minus"), _as_vector(u_plus, n, "u_plus"), dt)


def simulate(
    net: EngineeringSystemNet,
    schedule: FiringSchedule,
    instantaneous: bool = False,
    marking: Marking | None = None,
) -> list[Marking]:
    """
    Run a firing schedule and return the K+1 markings (initial included).

    In instantaneous mode every step must fire u_minus == u_plus; Q_E is
    then carried through unchanged.
    """
    marking = net.initial if marking is None else marking
    n = len(net.transitions)
    if schedule.u_minus.shape[1] != n:
        raise InputError(f"schedule has {schedule.u_minus.shape[1]} transitions, net has {n}")
    if instantaneous and not np.array_equal(schedule.u_minus, schedule.u_plus):
        raise InputError("instantaneous mode requires u_minus == u_plus at every step")

    trajectory = [marking]
    for k in range(schedule.steps):
        if instantaneous:
            nxt = _transition(net, marking, schedule.u_plus[k], schedule.u_plus[k], schedule.dt)
            marking = Marking(nxt.q_b, marking.q_e)
        else:
            marking = step(net, schedule.u_minus[k], schedule.u_plus[k], schedule.dt, marking)
        trajectory.append(marking)

    logger.debug("Simulated %d steps (%s mode)", schedule.steps, "instantaneous" if instantaneous else "stepped")
    return trajectory


# ============================================================
# Steady-state LCA
# ============================================================
def solve_firing(A: np.ndarray, delta_y: np.ndarray) -> tuple[np.ndarray, float]:
    """LU-solve A x = dY with partial pivoting; reject ill-conditioned A."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NumericalError(f"A must be square, got {A.shape}")
    if delta_y.shape != (A.shape[0],):
        raise InputError(f"delta_y has length {delta_y.size}, A has {A.shape[0]} rows")
    if A.shape[0] == 0:
        return np.zeros(0), 1.0

    condition = float(np.linalg.cond(A))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise NumericalError(f"A is singular or ill-conditioned (condition estimate {condition:.3e})")

    lu, piv = linalg.lu_factor(A)
    return linalg.lu_solve((lu, piv), delta_y), condition


def steady_state_lca(part: PartitionedMatrix, delta_y) -> LCAResult:
    """
    Change in environmental aspects for a change in products: dE = B A^-1 dY.

    Args:
        part: Partitioned incidence matrix (A square)
        delta_y: Product change, one entry per product row

    Returns:
        LCAResult with dE, the implied firing vector x and the condition estimate

    Raises:
        NumericalError: A singular or condition estimate above MAX_CONDITION
    """
    delta_y = np.asarray(delta_y, dtype=np.float64).ravel()
    firing, condition = solve_firing(part.A, delta_y)
    delta_e = part.B @ firing

    negative = bool((firing < -1e-12).any())
    if negative:
        reversed_caps = [part.col_map[j] for j in np.flatnonzero(firing < -1e-12)]
        logger.warning("Negative firing (reversed process) for: %s", ", ".join(reversed_caps))

    return LCAResult(delta_e=delta_e, firing=firing, condition=condition, negative_firing=negative)


def lca_consistency_check(part: PartitionedMatrix, delta_y, tol: float = 1e-9, result: LCAResult | None = None) -> bool:
    """
    Forward-simulate the solved firing vector for one instantaneous step
    and compare the product/aspect rows with dY/dE (max-abs within tol).

    Pass a previously computed result to check it against a different matrix.
    """
    delta_y = np.asarray(delta_y, dtype=np.float64).ravel()
    if result is None:
        result = steady_state_lca(part, delta_y)

    # Reversed transitions fire |x| with their arcs swapped
    signs = np.where(result.firing < 0, -1.0, 1.0)
    m = part.reassemble() * signs
    net = EngineeringSystemNet.from_arrays(np.clip(m, 0, None), np.clip(-m, 0, None))
    final = simulate(net, FiringSchedule.instantaneous(np.abs(result.firing)), instantaneous=True)[-1]

    y_err = np.abs(final.q_b[list(part.product_rows)] - delta_y)
    e_err = np.abs(final.q_b[list(part.aspect_rows)] - result.delta_e)
    worst = max(y_err.max(initial=0.0), e_err.max(initial=0.0))
    logger.debug("LCA consistency max-abs error %.3e (tol %.1e)", worst, tol)
    return bool(worst <= tol)


# ============================================================
# Trajectory export
# ============================================================
def _place_label(place: tuple[str, str]) -> str:
    operand, buffer = place
    return f"{operand}@{buffer}" if buffer else operand


def trajectory_frame(net: EngineeringSystemNet, trajectory: list[Marking]) -> pd.DataFrame:
    """Long-format place markings: step, place, value."""
    labels = [_place_label(p) for p in net.places]
    rows = [
        (k, label, float(value))
        for k, marking in enumerate(trajectory)
        for label, value in zip(labels, marking.q_b)
    ]
    return pd.DataFrame(rows, columns=["step", "place", "value"])


def export_trajectory_csv(net: EngineeringSystemNet, trajectory: list[Marking], path: str) -> str:
    trajectory_frame(net, trajectory).to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path


def export_trajectory_json(net: EngineeringSystemNet, trajectory: list[Marking], path: str) -> str:
    payload = {
        "places": [_place_label(p) for p in net.places],
        "transitions": list(net.transitions),
        "steps": [
            {"step": k, "q_b": m.q_b.tolist(), "q_e": m.q_e.tolist()}
            for k, m in enumerate(trajectory)
        ],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
    return path
