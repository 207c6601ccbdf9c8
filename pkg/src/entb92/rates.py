"""Device-independent key-rate pipeline and threshold solvers.

The security argument runs entirely on observed statistics: a correlator
Bell value S bounds the adversary's information, and the error-correction
cost is the binary entropy of the observed error rate. The secure gain per
conclusive event is

    R = -log2(1/2 + 1/2 sqrt(2 - S^2 / 4)) - h(Q)

with S the correlator-form value; substituting the probability-form value s
via S = 4s + 2 gives the equivalent expression

    R = 1 - log2(1 + sqrt(1 - 4s - 4s^2)) - h(Q).

On top of the closed-form channel curves this module provides the solvers:
optimal source angle at a given depolarization, maximum tolerable
depolarization, and minimum detection efficiencies for a positive Bell
value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .bell import CH_QUANTUM_MAX, analytic_ch, analytic_ch_max, ch_with_loss
from .channels import ChannelModel, depolarize
from .qcore import born_probabilities
from .states import ProtocolAngle, bob_basis, signal_state

_CHSH_QUANTUM_MAX = 2.0 * math.sqrt(2.0)
_SLACK = 1e-9

STRATEGIES = ("fixed_settings", "ch_max")

# schematic prepare-and-measure comparison line: linear from its p=0 rate
# down through the zero crossing; only the crossing is a meaningful datum
PM_REFERENCE_MAX_DEPOL = 0.034
PM_REFERENCE_RATE_AT_ZERO = 0.3355


@dataclass(frozen=True)
class RateReport:
    """Everything the rate pipeline knows about one operating point.

    ``gain`` is secret bits per conclusive event; ``rate`` scales it by the
    number of conclusive events (for analytic reports, per detected pair, so
    it coincides with ``normalized_rate``); ``normalized_rate`` is per
    detected event. Negative gains are preserved: they carry the threshold
    information.
    """

    s_ch: float
    s_chsh: float
    qber: float
    conclusive_fraction: float
    gain: float
    rate: float
    normalized_rate: float

    def __post_init__(self):
        if not all(math.isfinite(getattr(self, f)) for f in
                   ("s_ch", "s_chsh", "qber", "conclusive_fraction", "gain", "rate", "normalized_rate")):
            raise ValueError("rate report fields must be finite")
        if not -_SLACK <= self.qber <= 1.0 + _SLACK:
            raise ValueError(f"qber must lie in [0, 1], got {self.qber!r}")
        if not -_SLACK <= self.conclusive_fraction <= 1.0 + _SLACK:
            raise ValueError(f"conclusive_fraction must lie in [0, 1], got {self.conclusive_fraction!r}")
        if self.gain > 1.0 + _SLACK:
            raise ValueError(f"gain cannot exceed 1, got {self.gain!r}")
        if self.normalized_rate > self.conclusive_fraction + _SLACK:
            raise ValueError("normalized_rate cannot exceed conclusive_fraction")

    def to_json_dict(self) -> dict:
        return {
            "s_ch": self.s_ch,
            "s_chsh": self.s_chsh,
            "qber": self.qber,
            "conclusive_fraction": self.conclusive_fraction,
            "gain": self.gain,
            "rate": self.rate,
            "normalized_rate": self.normalized_rate,
        }


@dataclass(frozen=True)
class ThresholdResult:
    """Output of a one-dimensional threshold solver."""

    parameter: str
    value: float
    bracket: Tuple[float, float]
    tolerance: float

    def __post_init__(self):
        lo, hi = self.bracket
        if not lo <= self.value <= hi:
            raise ValueError("critical value must lie inside its bracket")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")

    def to_json_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "value": self.value,
            "bracket": list(self.bracket),
            "tolerance": self.tolerance,
        }


def binary_entropy(q: float) -> float:
    """h(q) = -q log2 q - (1-q) log2(1-q), extended by continuity at 0 and 1."""
    q = float(q)
    if not math.isfinite(q) or not 0.0 <= q <= 1.0:
        raise ValueError(f"binary entropy argument must lie in [0, 1], got {q!r}")
    if q == 0.0 or q == 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def gain_from_chsh(s_chsh: float, q: float) -> float:
    """Secure gain from a correlator-form Bell value and an error rate.

    Returns -log2(1/2 + 1/2 sqrt(2 - s^2/4)) - h(q); may be negative. Values
    beyond the quantum bound 2 sqrt(2) are rejected as unphysical.
    """
    s = float(s_chsh)
    if not math.isfinite(s) or abs(s) > _CHSH_QUANTUM_MAX + 1e-12:
        raise ValueError(f"correlator value {s_chsh!r} exceeds the quantum bound 2*sqrt(2)")
    inner = max(2.0 - s * s / 4.0, 0.0)
    return -math.log2(0.5 + 0.5 * math.sqrt(inner)) - binary_entropy(q)


def gain_from_ch(s_ch: float, q: float) -> float:
    """Secure gain from a probability-form Bell value and an error rate.

    Equals gain_from_chsh(4 s + 2, q); defined while 1 - 4s - 4s^2 >= 0,
    i.e. s <= (sqrt(2) - 1)/2.
    """
    s = float(s_ch)
    if not math.isfinite(s) or not -(1.0 + math.sqrt(2.0)) / 2.0 - 1e-12 <= s <= CH_QUANTUM_MAX + 1e-12:
        raise ValueError(f"Bell value {s_ch!r} lies outside the gain domain (max {CH_QUANTUM_MAX:.6f})")
    radicand = max(1.0 - 4.0 * s - 4.0 * s * s, 0.0)
    return 1.0 - math.log2(1.0 + math.sqrt(radicand)) - binary_entropy(q)


def key_rate(n_con: float, gain: float) -> float:
    """Total secret bits: conclusive events times gain (may be negative)."""
    if n_con < 0:
        raise ValueError("conclusive count cannot be negative")
    return float(n_con) * float(gain)


def depolarized_ch(s_ch: float, p: float) -> float:
    """Probability-form Bell value after depolarization of the receiver qubit.

    The map shrinks every receiver-side Bloch vector by (1 - 4p/3), which
    turns any rank-1-settings value s into (1 - 4p/3) s - 2p/3. Fully
    depolarizing (p = 3/4) lands on -1/2, the value of uncorrelated noise.
    """
    p = float(p)
    if not math.isfinite(p) or not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarization probability must lie in [0, 1], got {p!r}")
    return (1.0 - 4.0 * p / 3.0) * float(s_ch) - 2.0 * p / 3.0


def _as_angle(theta) -> ProtocolAngle:
    return theta if isinstance(theta, ProtocolAngle) else ProtocolAngle(float(theta))


def qber_and_conclusive(theta, channel: ChannelModel, bob_theta: Optional[float] = None):
    """Error rate and conclusive fraction of the key rounds, analytically.

    Sender measures Z, receiver picks basis B_0/B_1 uniformly; the returned
    fraction is P(conclusive | both detected) and the error rate is
    P(decoded bit wrong | conclusive). Detection efficiencies cancel under
    the conditioning, so only ``depol_p`` matters. ``bob_theta`` rebuilds the
    receiver's bases at a different angle (used by the max-violation
    strategy, which pays for its larger Bell value with a larger error
    rate).
    """
    if channel.attacker != "none":
        raise ValueError("analytic error rates are defined for attack-free channels")
    angle = _as_angle(theta)
    receiver_angle = angle if bob_theta is None else ProtocolAngle(float(bob_theta))
    p_con = 0.0
    p_err = 0.0
    for j in (0, 1):
        rho = depolarize(signal_state(j, angle).to_density(), channel.depol_p)
        for k in (0, 1):
            # joint weight: sender bit j (1/2) x receiver basis k (1/2)
            pc = 0.25 * float(born_probabilities(rho, bob_basis(k, receiver_angle))[0])
            p_con += pc
            if k == j:
                p_err += pc
    if p_con <= 0.0:
        raise ValueError("conclusive probability vanished; error rate undefined")
    return p_err / p_con, p_con


def normalized_rate(theta, p: float, strategy: str = "fixed_settings") -> RateReport:
    """Full rate report for a source angle and depolarization level.

    ``fixed_settings`` uses the protocol's own settings; ``ch_max`` estimates
    the Bell value with the violation-maximizing receiver angle, trading a
    larger Bell value against a larger error rate. An analytic report's
    ``rate`` equals its ``normalized_rate`` (per detected pair).
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    angle = _as_angle(theta)
    if strategy == "fixed_settings":
        s_clean = analytic_ch(angle.theta)
        bob_theta = None
    else:
        s_clean, bob_theta = analytic_ch_max(angle.theta)
    s = depolarized_ch(s_clean, p)
    q, f_con = qber_and_conclusive(angle, ChannelModel(depol_p=p), bob_theta=bob_theta)
    gain = gain_from_ch(s, q)
    r_norm = f_con * gain
    return RateReport(
        s_ch=s,
        s_chsh=4.0 * s + 2.0,
        qber=q,
        conclusive_fraction=f_con,
        gain=gain,
        rate=r_norm,
        normalized_rate=r_norm,
    )


def golden_section_max(fn: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-8) -> Tuple[float, float]:
    """Maximize a unimodal function on [lo, hi] to within tol in x."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - ratio * (b - a), a + ratio * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


_THETA_LO = 1e-4
_THETA_HI = math.pi / 2 - 1e-4


def optimal_theta(p: float, strategy: str = "fixed_settings"):
    """Source angle maximizing the secure gain at depolarization p.

    Coarse 200-point scan of (0, pi/2) followed by golden-section refinement
    well below 1e-6 radians. Returns ``(theta_star, report)``; the report may
    carry a nonpositive rate when p is beyond the tolerable noise.
    """

    def objective(t: float) -> float:
        return normalized_rate(t, p, strategy).gain

    grid = np.linspace(_THETA_LO, _THETA_HI, 200)
    values = [objective(t) for t in grid]
    i = int(np.argmax(values))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    theta_star, _ = golden_section_max(objective, lo, hi, tol=1e-8)
    return theta_star, normalized_rate(theta_star, p, strategy)


def max_depolarization(strategy: str = "fixed_settings") -> ThresholdResult:
    """Largest depolarization with a positive secure rate, by bisection.

    The objective g(p) is the normalized rate at the per-p optimal angle;
    g(0) must be positive and g at the upper bracket edge negative.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    lo, hi = 0.0, 0.05
    tol = 1e-5

    def g(p: float) -> float:
        return optimal_theta(p, strategy)[1].normalized_rate

    if not g(lo) > 0.0:
        raise ValueError("no positive rate at zero noise; bracket invalid")
    if not g(hi) < 0.0:
        raise ValueError("rate still positive at the upper bracket edge")
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        if g(mid) > 0.0:
            a = mid
        else:
            b = mid
    return ThresholdResult(parameter="depol_p", value=0.5 * (a + b), bracket=(a, b), tolerance=tol)


_EFFICIENCY_MODES = ("alice_perfect", "bob_perfect", "symmetric")

# the supremum over theta sits in the theta -> 0 limit near threshold, so
# the scan grid is log-spaced down to 1e-4 radians
_SUP_THETA_GRID = np.logspace(math.log10(1e-4), math.log10(math.pi / 2 - 1e-4), 600)


def _best_loss_ch(eta_a: float, eta_b: float) -> float:
    return max(ch_with_loss(t, eta_a, eta_b) for t in _SUP_THETA_GRID)


def efficiency_threshold(mode: str) -> ThresholdResult:
    """Minimum detection efficiency for a positive Bell value, by bisection.

    Modes: ``alice_perfect`` solves for the receiver efficiency with a
    perfect sender (threshold 1/2), ``bob_perfect`` the reverse (2/3), and
    ``symmetric`` ties both together (3/4).
    """
    if mode == "alice_perfect":
        objective = lambda e: _best_loss_ch(1.0, e)
        parameter = "eta_b"
    elif mode == "bob_perfect":
        objective = lambda e: _best_loss_ch(e, 1.0)
        parameter = "eta_a"
    elif mode == "symmetric":
        objective = lambda e: _best_loss_ch(e, e)
        parameter = "eta"
    else:
        raise ValueError(f"mode must be one of {_EFFICIENCY_MODES}, got {mode!r}")
    lo, hi = 0.3, 1.0
    tol = 1e-4
    if not objective(lo) < 0.0 < objective(hi):
        raise ValueError("efficiency bracket does not straddle the threshold")
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        if objective(mid) > 0.0:
            b = mid
        else:
            a = mid
    return ThresholdResult(parameter=parameter, value=0.5 * (a + b), bracket=(a, b), tolerance=tol)


def pm_reference_rate(p: float) -> float:
    """Schematic prepare-and-measure comparison rate, linear in p.

    Anchored at PM_REFERENCE_RATE_AT_ZERO for p = 0 and crossing zero at
    PM_REFERENCE_MAX_DEPOL; only the crossing is quantitative.
    """
    p = float(p)
    if not math.isfinite(p) or p < 0.0:
        raise ValueError(f"depolarization probability must be nonnegative, got {p!r}")
    return PM_REFERENCE_RATE_AT_ZERO * (1.0 - p / PM_REFERENCE_MAX_DEPOL)
