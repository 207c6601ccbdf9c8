"""Correlation tables and Bell functionals.

The Bell test uses two settings per party. For every setting pair the full
3x3 outcome grid is stored -- {target, orthogonal, vacuum} on each side --
because the correlator form of the inequality folds vacuum events into the
orthogonal outcome and therefore needs every cell, and because Monte-Carlo
estimation produces all cells anyway.

Two functionals are provided. The probability form

    S_CH = P(a1,b1) + P(a0,b1) + P(a1,b0) - P(a0,b0) - P(a1) - P(b1)

uses single-party marginals taken regardless of the partner's outcome
(vacuum included), with local-realist bound S_CH <= 0. The correlator form
S_CHSH, local bound 2, counts a vacuum as a click on the orthogonal outcome.
The two are affinely related, S_CHSH = 4 S_CH + 2, and that bridge survives
vacuum mass; it is exact whenever the table is non-signaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channels import ChannelModel, JointState, lossy_povm
from .qcore import DensityMatrix, Operator, Povm, born_probabilities
from .states import SettingPairSpec

OUTCOME_LABELS = ("target", "orthogonal", "vacuum")
PAIR_KEYS = ("00", "01", "10", "11")

# largest s for which the gain expression 1 - 4s - 4s^2 stays nonnegative
CH_QUANTUM_MAX = 0.5 * (math.sqrt(2.0) - 1.0)

_MARGINAL_ATOL = 1e-9

# correlator signs with vacuum folded onto the orthogonal outcome
_CHSH_SIGNS = np.array([[1.0, -1.0, -1.0],
                        [-1.0, 1.0, 1.0],
                        [-1.0, 1.0, 1.0]])


@dataclass(frozen=True)
class BellValue:
    """A Bell functional estimate with its standard error (0 when analytic)."""

    value: float
    standard_error: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("Bell value must be finite")
        if not math.isfinite(self.standard_error) or self.standard_error < 0.0:
            raise ValueError("standard error must be finite and nonnegative")


class CorrelationTable:
    """Outcome statistics for the four setting pairs of the Bell test.

    ``grids`` has shape (2, 2, 3, 3): axes are (sender setting, receiver
    setting, sender outcome, receiver outcome) with outcomes ordered
    (target, orthogonal, vacuum). In probability mode every 3x3 grid sums to
    1 within 1e-9; in count mode the grids hold nonnegative integers and the
    per-pair totals are their sums.
    """

    def __init__(self, mode: str, grids, totals=None):
        if mode not in ("probability", "count"):
            raise ValueError(f'mode must be "probability" or "count", got {mode!r}')
        arr = np.asarray(grids, dtype=float)
        if arr.shape != (2, 2, 3, 3):
            raise ValueError(f"grids must have shape (2, 2, 3, 3), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid entries must be finite")
        if mode == "count":
            if np.any(arr < 0) or not np.allclose(arr, np.round(arr), atol=0.0, rtol=0.0):
                raise ValueError("count-mode grids must hold nonnegative integers")
            counts = np.round(arr).astype(np.int64)
            derived = counts.sum(axis=(2, 3))
            if totals is not None and not np.array_equal(np.asarray(totals, dtype=np.int64), derived):
                raise ValueError("totals must equal per-pair count sums")
            self._grids = counts
            self._totals = derived
        else:
            if np.any(arr < -_MARGINAL_ATOL):
                raise ValueError("probabilities must be nonnegative")
            sums = arr.sum(axis=(2, 3))
            if np.any(np.abs(sums - 1.0) > _MARGINAL_ATOL):
                raise ValueError("each probability grid must sum to 1 within 1e-9")
            self._grids = np.clip(arr, 0.0, None)
            self._totals = None if totals is None else np.asarray(totals, dtype=np.int64).reshape(2, 2).copy()
        self._grids.setflags(write=False)
        if self._totals is not None:
            self._totals.setflags(write=False)
        self._mode = mode

    @property
    def mode(self) -> str:
        return self._mode

    @property
    def grids(self) -> np.ndarray:
        return self._grids

    @property
    def totals(self) -> Optional[np.ndarray]:
        return self._totals

    def pair(self, i: int, j: int) -> np.ndarray:
        """The 3x3 grid for sender setting i, receiver setting j."""
        return self._grids[i, j]

    def pair_probabilities(self, i: int, j: int) -> np.ndarray:
        """The pair grid as probabilities (count mode divides by the total)."""
        if self._mode == "probability":
            return self._grids[i, j]
        n = self._totals[i, j]
        if n == 0:
            raise ValueError(f"setting pair ({i},{j}) has no rounds")
        return self._grids[i, j] / float(n)

    def merge(self, other: "CorrelationTable") -> "CorrelationTable":
        """Cell-wise sum of two count-mode tables (associative, commutative)."""
        if self._mode != "count" or other._mode != "count":
            raise ValueError("merge is defined for count-mode tables only")
        return CorrelationTable("count", self._grids + other._grids)

    def to_probabilities(self) -> "CorrelationTable":
        """Convert count mode to probability mode, keeping the totals."""
        if self._mode == "probability":
            return self
        if np.any(self._totals == 0):
            raise ValueError("cannot convert: some setting pair has no rounds")
        probs = self._grids / self._totals[:, :, None, None].astype(float)
        return CorrelationTable("probability", probs, totals=self._totals)

    def to_json_dict(self) -> dict:
        pairs = {}
        for i in (0, 1):
            for j in (0, 1):
                grid = self._grids[i, j]
                flat = [int(v) for v in grid.ravel()] if self._mode == "count" else [float(v) for v in grid.ravel()]
                pairs[f"{i}{j}"] = flat
        totals = None
        if self._totals is not None:
            totals = {f"{i}{j}": int(self._totals[i, j]) for i in (0, 1) for j in (0, 1)}
        return {"mode": self._mode, "pairs": pairs, "totals": totals}

    @classmethod
    def from_json_dict(cls, data: dict) -> "CorrelationTable":
        grids = np.zeros((2, 2, 3, 3))
        for key in PAIR_KEYS:
            flat = np.asarray(data["pairs"][key], dtype=float)
            if flat.shape != (9,):
                raise ValueError(f"pair {key} must hold 9 values")
            grids[int(key[0]), int(key[1])] = flat.reshape(3, 3)
        totals = data.get("totals")
        if totals is not None:
            totals = np.array([[totals["00"], totals["01"]], [totals["10"], totals["11"]]], dtype=np.int64)
        return cls(data["mode"], grids, totals=totals)

    def __repr__(self) -> str:
        return f"CorrelationTable(mode={self._mode!r})"


def _target_row_marginal(grid: np.ndarray) -> float:
    return float(grid[0, :].sum())


def _target_col_marginal(grid: np.ndarray) -> float:
    return float(grid[:, 0].sum())


def _check_no_signaling(p: dict) -> None:
    # cross-pair consistency of the four target marginals
    gaps = (
        abs(_target_row_marginal(p[0, 0]) - _target_row_marginal(p[0, 1])),
        abs(_target_row_marginal(p[1, 0]) - _target_row_marginal(p[1, 1])),
        abs(_target_col_marginal(p[0, 0]) - _target_col_marginal(p[1, 0])),
        abs(_target_col_marginal(p[0, 1]) - _target_col_marginal(p[1, 1])),
    )
    worst = max(gaps)
    if worst > _MARGINAL_ATOL:
        raise ValueError(f"setting marginals disagree across pairs by {worst:.3e}")


def _pair_probs(table: CorrelationTable) -> dict:
    return {(i, j): table.pair_probabilities(i, j) for i in (0, 1) for j in (0, 1)}


def _ch_coefficients(table: CorrelationTable) -> dict:
    """Per-pair coefficient grids whose weighted sum is S_CH.

    In count mode the pooled single-party marginals weight each pair by its
    round count; in probability mode the two contributing pairs weigh
    equally.
    """
    coeff = {(i, j): np.zeros((3, 3)) for i in (0, 1) for j in (0, 1)}
    coeff[1, 1][0, 0] += 1.0
    coeff[0, 1][0, 0] += 1.0
    coeff[1, 0][0, 0] += 1.0
    coeff[0, 0][0, 0] -= 1.0
    if table.mode == "count":
        n = table.totals.astype(float)
        wa = n[1, 0] + n[1, 1]
        wb = n[0, 1] + n[1, 1]
        if wa <= 0 or wb <= 0:
            raise ValueError("marginal settings have no rounds")
        w_a10, w_a11 = n[1, 0] / wa, n[1, 1] / wa
        w_b01, w_b11 = n[0, 1] / wb, n[1, 1] / wb
    else:
        w_a10 = w_a11 = w_b01 = w_b11 = 0.5
    coeff[1, 0][0, :] -= w_a10
    coeff[1, 1][0, :] -= w_a11
    coeff[0, 1][:, 0] -= w_b01
    coeff[1, 1][:, 0] -= w_b11
    return coeff


def ch_value(table: CorrelationTable) -> BellValue:
    """Probability-form Bell functional of a table; local bound 0.

    Single-party marginals pool the two setting pairs that measured the
    relevant setting (count-weighted in count mode). The standard error is a
    multinomial delta-method estimate; analytic tables get 0.
    """
    p = _pair_probs(table)
    if table.mode == "probability":
        _check_no_signaling(p)
    coeff = _ch_coefficients(table)
    value = sum(float((coeff[k] * p[k]).sum()) for k in p)
    stderr = 0.0
    if table.mode == "count":
        var = 0.0
        for k in p:
            n = float(table.totals[k])
            mean = float((coeff[k] * p[k]).sum())
            second = float((coeff[k] ** 2 * p[k]).sum())
            var += max(second - mean * mean, 0.0) / n
        stderr = math.sqrt(var)
    return BellValue(value, stderr)


def chsh_value(table: CorrelationTable) -> BellValue:
    """Correlator-form Bell functional; vacuum counts as the orthogonal click.

    Each correlator is E_ij = sum of the pair grid weighted by +-1, with the
    target outcome positive and both other outcomes negative on each side.
    Local bound |S| <= 2.
    """
    p = _pair_probs(table)
    if table.mode == "probability":
        _check_no_signaling(p)
    corr = {k: float((_CHSH_SIGNS * p[k]).sum()) for k in p}
    value = corr[1, 1] + corr[0, 1] + corr[1, 0] - corr[0, 0]
    stderr = 0.0
    if table.mode == "count":
        var = 0.0
        for k in p:
            n = float(table.totals[k])
            var += max(1.0 - corr[k] ** 2, 0.0) / n
        stderr = math.sqrt(var)
    return BellValue(value, stderr)


def chsh_from_ch(s: BellValue) -> BellValue:
    """Map a probability-form value to the correlator form: S -> 4S + 2."""
    return BellValue(4.0 * s.value + 2.0, 4.0 * s.standard_error)


def _check_theta_range(theta: float) -> float:
    theta = float(theta)
    if not math.isfinite(theta) or not 0.0 <= theta <= math.pi / 2:
        raise ValueError(f"theta must lie in [0, pi/2], got {theta!r}")
    return theta


def analytic_ch(theta: float) -> float:
    """Closed-form S_CH of the source state with the standard settings.

    Equals cos(theta)(1 - cos(theta))/2: positive on the open interval,
    zero at both endpoints, maximal (1/8) at theta = pi/3.
    """
    theta = _check_theta_range(theta)
    c = math.cos(theta)
    return 0.5 * c * (1.0 - c)


def analytic_ch_max(theta: float):
    """Best achievable S_CH for the source state, and the setting angle used.

    Returns ``(value, bob_angle)`` where value = (sqrt(sin^2 theta + 1) - 1)/2
    and the receiver's conclusive kets are built at bob_angle satisfying
    tan(bob_angle) = sin(theta). Reaches the quantum maximum (sqrt(2)-1)/2 at
    theta = pi/2.
    """
    theta = _check_theta_range(theta)
    s = math.sin(theta)
    value = 0.5 * (math.sqrt(s * s + 1.0) - 1.0)
    return value, math.atan(s)


def ch_with_loss(theta: float, eta_a: float, eta_b: float) -> float:
    """Closed-form S_CH with per-side detection efficiencies.

    (eta_a - 1/2) eta_b sin^2(theta) - eta_a sin^2(theta/2); reduces to
    analytic_ch at unit efficiencies. Monotone nondecreasing in both
    efficiencies.
    """
    theta = _check_theta_range(theta)
    for name, eta in (("eta_a", eta_a), ("eta_b", eta_b)):
        if not math.isfinite(float(eta)) or not 0.0 <= float(eta) <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {eta!r}")
    s = math.sin(theta)
    return (eta_a - 0.5) * eta_b * s * s - eta_a * math.sin(theta / 2.0) ** 2


def table_from_state(joint, settings: SettingPairSpec, channel: ChannelModel) -> CorrelationTable:
    """Exact Born-rule probability table for a state under lossy detection.

    ``joint`` is a JointState (or a plain two-qubit DensityMatrix, treated as
    one with no vacuum branch). Detection efficiencies from ``channel`` are
    attached to the setting POVMs; the attacker's no-click branch, when
    present, lands in the receiver-vacuum column with the sender still
    measuring normally.
    """
    if isinstance(joint, DensityMatrix):
        joint = JointState(qubit=joint)
    elif not isinstance(joint, JointState):
        raise ValueError("joint must be a DensityMatrix or JointState")
    alice = [lossy_povm(settings.alice[i], channel.eta_a) for i in (0, 1)]
    bob = [lossy_povm(settings.bob[j], channel.eta_b) for j in (0, 1)]
    grids = np.zeros((2, 2, 3, 3))
    for i in (0, 1):
        for j in (0, 1):
            product = Povm(
                [Operator(np.kron(a.matrix, b.matrix)) for a in alice[i].elements for b in bob[j].elements],
                labels=tuple(f"{la}|{lb}" for la in alice[i].labels for lb in bob[j].labels),
            )
            grid = born_probabilities(joint.qubit, product).reshape(3, 3)
            if joint.receiver_vacuum is not None:
                grid[:, 2] += born_probabilities(joint.receiver_vacuum, alice[i])
            grids[i, j] = grid
    return CorrelationTable("probability", grids)
