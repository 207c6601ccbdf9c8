"""Noise, loss, and adversary models.

Three imperfections are modeled, composed in a fixed order:

1. an optional intercept-and-resend attacker sitting on the receiver's arm,
   built from the unambiguous-discrimination POVM,
2. depolarization of the receiver's qubit, and
3. finite detection efficiency on each side, expressed as an extra vacuum
   outcome appended to each measurement rather than as a state map.

A no-click branch produced by the attacker (the discrimination failed, so
nothing is resent) is carried as a classical flag next to the surviving
two-qubit part instead of a third Hilbert-space dimension; downstream code
only ever needs click/no-click statistics from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .qcore import (
    ATOL_DERIVED,
    DensityMatrix,
    Operator,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    Povm,
    apply_channel,
)
from .states import ProtocolAngle, conjugate_state, entangled_state, signal_state

_ATTACKERS = ("none", "usd")


@dataclass(frozen=True)
class ChannelModel:
    """Channel and detector parameters for one session.

    eta_a and eta_b are per-side detection efficiencies in [0, 1]; depol_p is
    the depolarization probability in [0, 1]; attacker is "none" or "usd".
    """

    eta_a: float = 1.0
    eta_b: float = 1.0
    depol_p: float = 0.0
    attacker: str = "none"

    def __post_init__(self):
        for name in ("eta_a", "eta_b", "depol_p"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {getattr(self, name)!r}")
            object.__setattr__(self, name, v)
        if self.attacker not in _ATTACKERS:
            raise ValueError(f"attacker must be one of {_ATTACKERS}, got {self.attacker!r}")


@dataclass(frozen=True)
class AttackOutcome:
    """One branch of the attacker's measure-and-resend strategy.

    ``index`` is the 1-based POVM element number; ``resend`` names what goes
    back out on the wire: "signal_1", "signal_0", or "vacuum".
    """

    index: int
    resend: str

    _MAPPING = {1: "signal_1", 2: "signal_0", 3: "vacuum", 4: "vacuum"}

    def __post_init__(self):
        expected = self._MAPPING.get(self.index)
        if expected is None:
            raise ValueError(f"attack outcome index must be 1..4, got {self.index!r}")
        if self.resend != expected:
            raise ValueError(f"outcome {self.index} must resend {expected!r}, got {self.resend!r}")


ATTACK_OUTCOMES = tuple(AttackOutcome(i, AttackOutcome._MAPPING[i]) for i in (1, 2, 3, 4))


@dataclass(frozen=True)
class JointState:
    """A two-qubit state plus the attacker's no-click branch.

    ``qubit`` is the (possibly subnormalized) two-qubit density matrix of the
    rounds where the receiver gets a photon. ``receiver_vacuum``, when
    present, is the sender-side reduced state of the rounds where the
    attacker suppressed the photon; its trace is that branch's weight. Branch
    weights must sum to 1.
    """

    qubit: DensityMatrix
    receiver_vacuum: Optional[DensityMatrix] = None

    def __post_init__(self):
        if self.qubit.dim != 4:
            raise ValueError("qubit branch must be a two-qubit state")
        total = self.qubit.trace
        if self.receiver_vacuum is not None:
            if self.receiver_vacuum.dim != 2:
                raise ValueError("vacuum branch must be a single-qubit state")
            total += self.receiver_vacuum.trace
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"branch weights must sum to 1, got {total!r}")

    @property
    def vacuum_weight(self) -> float:
        return 0.0 if self.receiver_vacuum is None else self.receiver_vacuum.trace


def _depolarizing_kraus(p: float, dim: int):
    ops = [
        math.sqrt(1.0 - p) * np.eye(2, dtype=complex),
        math.sqrt(p / 3.0) * PAULI_X,
        math.sqrt(p / 3.0) * PAULI_Y,
        math.sqrt(p / 3.0) * PAULI_Z,
    ]
    if dim == 2:
        return ops
    eye = np.eye(2, dtype=complex)
    return [np.kron(eye, k) for k in ops]


def depolarize(rho: DensityMatrix, p: float) -> DensityMatrix:
    """Depolarizing map (1-p) rho + (p/3) sum_i sigma_i rho sigma_i.

    On a two-qubit input the map acts on the second (receiver) factor only.
    Bloch vectors shrink by the factor (1 - 4p/3); p = 3/4 sends every qubit
    state to the maximally mixed one.
    """
    p = float(p)
    if not math.isfinite(p) or not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarization probability must lie in [0, 1], got {p!r}")
    return apply_channel(rho, _depolarizing_kraus(p, rho.dim))


def lossy_povm(m: Povm, eta: float) -> Povm:
    """Attach a detection-efficiency vacuum outcome to a projective POVM.

    Every original element is scaled by eta and a ``(1-eta) * identity``
    element labeled "vacuum" is appended, so completeness is preserved
    exactly and each original click probability is eta times the ideal one.
    """
    eta = float(eta)
    if not math.isfinite(eta) or not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta!r}")
    for op in m.elements:
        mm = op.matrix
        if not np.allclose(mm @ mm, mm, atol=ATOL_DERIVED, rtol=0.0):
            raise ValueError("lossy_povm requires a projective POVM")
    dim = m.dim
    elements = [Operator(eta * op.matrix) for op in m.elements]
    elements.append(Operator((1.0 - eta) * np.eye(dim, dtype=complex)))
    return Povm(elements, labels=m.labels + ("vacuum",))


def usd_povm(angle: ProtocolAngle) -> Povm:
    """The attacker's four-outcome unambiguous-discrimination POVM.

    Elements 1 and 2 project onto the kets orthogonal to signal 0 and
    signal 1 respectively, so a click identifies the other signal with
    certainty. Elements 3 and 4 are the ambiguous failures. Each carries
    weight 1/2, which makes the four sum to the identity.
    """
    halves = [
        0.5 * _proj(conjugate_state(0, angle)),
        0.5 * _proj(conjugate_state(1, angle)),
        0.5 * _proj(signal_state(0, angle)),
        0.5 * _proj(signal_state(1, angle)),
    ]
    return Povm(halves, labels=("identified_1", "identified_0", "ambiguous_0", "ambiguous_1"))


def _proj(v) -> np.ndarray:
    amp = v.amplitudes
    return np.outer(amp, amp.conj())


def _trace_out_receiver(rho4: np.ndarray, element: np.ndarray) -> np.ndarray:
    # Tr_B[rho (I x E)] as a sender-side 2x2 block
    return np.einsum("ikjl,kl->ij", rho4.reshape(2, 2, 2, 2), element.T)


def resend_states(angle: ProtocolAngle):
    """Kets the attacker resends per POVM outcome; None marks suppressed rounds."""
    return (signal_state(1, angle), signal_state(0, angle), None, None)


def usd_attack_channel(joint: DensityMatrix, angle: ProtocolAngle) -> JointState:
    """Apply the intercept-and-resend attack to the receiver's arm.

    The attacker measures the flying qubit with :func:`usd_povm`. On an
    identifying click she forwards a fresh copy of the identified signal; on
    an ambiguous click she suppresses the round, which the receiver sees as a
    loss. The output is separable by construction: the surviving branch is a
    convex sum of product states, so no Bell inequality can be violated
    downstream.
    """
    if joint.dim != 4:
        raise ValueError("attack input must be a two-qubit state")
    rho = joint.matrix
    qubit = np.zeros((4, 4), dtype=complex)
    sender_vac = np.zeros((2, 2), dtype=complex)
    for element, chi in zip(usd_povm(angle).elements, resend_states(angle)):
        cond = _trace_out_receiver(rho, element.matrix)
        if chi is None:
            sender_vac += cond
        else:
            qubit += np.kron(cond, _proj(chi))
    return JointState(
        qubit=DensityMatrix(qubit, subnormalized=True),
        receiver_vacuum=DensityMatrix(sender_vac, subnormalized=True),
    )


def analytic_pipeline_state(angle: ProtocolAngle, channel: ChannelModel) -> JointState:
    """Source state pushed through the attacker and the depolarizer.

    Composition order is fixed: source, then attacker (if configured), then
    depolarization of the receiver qubit. Detection efficiencies are not
    applied here; they belong to the measurement POVMs.
    """
    source = entangled_state(angle).to_density()
    if channel.attacker == "usd":
        state = usd_attack_channel(source, angle)
    else:
        state = JointState(qubit=source)
    if channel.depol_p > 0.0:
        state = JointState(
            qubit=depolarize(state.qubit, channel.depol_p),
            receiver_vacuum=state.receiver_vacuum,
        )
    return state
