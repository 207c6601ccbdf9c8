"""Seeded Monte-Carlo engine for two-party key-distribution sessions.

Each round consumes exactly four uniform variates from a counter-based
generator keyed by (seed, round index): sender basis choice, receiver basis
choice, and two outcome draws (the second one only used on attacked rounds,
where the resent qubit is measured separately). Because the variates for
round r live at a fixed offset in the keyed stream, any partition of rounds
into chunks -- and any assignment of chunks to worker threads -- reproduces
the same per-round outcomes, and the integer tallies merge associatively.
Results are therefore bit-identical across worker counts.

Round outcomes are sampled from the exact Born distributions of the
channel-processed state, precomputed once per session for each basis pair.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .bell import BellValue, CH_QUANTUM_MAX, CorrelationTable, ch_value, table_from_state
from .channels import (
    ChannelModel,
    analytic_pipeline_state,
    depolarize,
    lossy_povm,
    resend_states,
    usd_povm,
)
from .qcore import born_probabilities
from .rates import RateReport, gain_from_ch, key_rate
from .states import ProtocolAngle, ch_settings

_BOB_OUTCOMES = ("conclusive", "inconclusive", "vacuum")
_CH_DOMAIN_LO = -(1.0 + math.sqrt(2.0)) / 2.0


@dataclass(frozen=True)
class SessionConfig:
    """Parameters of one simulated session.

    ``test_fraction`` is the probability that the sender measures X (the
    rounds feeding the a1 statistics); it must be strictly between 0 and 1
    so every setting pair accumulates counts. ``chunk_size`` only shapes the
    parallel decomposition and cannot affect results.
    """

    angle: ProtocolAngle
    n_rounds: int
    test_fraction: float = 0.25
    channel: ChannelModel = field(default_factory=ChannelModel)
    seed: int = 0
    abort_threshold: float = 0.0
    chunk_size: int = 65536

    def __post_init__(self):
        if int(self.n_rounds) < 1:
            raise ValueError(f"n_rounds must be at least 1, got {self.n_rounds!r}")
        object.__setattr__(self, "n_rounds", int(self.n_rounds))
        tf = float(self.test_fraction)
        if not math.isfinite(tf) or not 0.0 < tf < 1.0:
            raise ValueError(f"test_fraction must lie strictly inside (0, 1), got {self.test_fraction!r}")
        object.__setattr__(self, "test_fraction", tf)
        seed = int(self.seed)
        if not 0 <= seed < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "seed", seed)
        if not math.isfinite(float(self.abort_threshold)):
            raise ValueError("abort_threshold must be finite")
        if int(self.chunk_size) < 1:
            raise ValueError(f"chunk_size must be positive, got {self.chunk_size!r}")
        object.__setattr__(self, "chunk_size", int(self.chunk_size))

    def to_json_dict(self) -> dict:
        return {
            "theta": self.angle.theta,
            "theta_degrees": self.angle.degrees,
            "n_rounds": self.n_rounds,
            "test_fraction": self.test_fraction,
            "channel": {
                "eta_a": self.channel.eta_a,
                "eta_b": self.channel.eta_b,
                "depol_p": self.channel.depol_p,
                "attacker": self.channel.attacker,
            },
            "seed": self.seed,
            "abort_threshold": self.abort_threshold,
            "chunk_size": self.chunk_size,
        }


@dataclass(frozen=True)
class RoundRecord:
    """One protocol round as both parties (and the simulator) see it.

    ``key_bit`` is the (sender bit, decoded bit) pair, present exactly when
    the sender measured Z and clicked while the receiver got a conclusive
    click. ``eve_outcome`` is simulator-side bookkeeping: the attacker's
    1-based measurement branch, None on attack-free rounds.
    """

    alice_basis: str
    alice_outcome: object
    bob_basis: int
    bob_outcome: str
    key_bit: Optional[Tuple[int, int]] = None
    eve_outcome: Optional[int] = None

    def __post_init__(self):
        if self.alice_basis not in ("Z", "X"):
            raise ValueError('alice_basis must be "Z" or "X"')
        if self.alice_outcome not in (0, 1, "vacuum"):
            raise ValueError('alice_outcome must be 0, 1 or "vacuum"')
        if self.bob_basis not in (0, 1):
            raise ValueError("bob_basis must be 0 or 1")
        if self.bob_outcome not in _BOB_OUTCOMES:
            raise ValueError(f"bob_outcome must be one of {_BOB_OUTCOMES}")
        should_have_key = (
            self.alice_basis == "Z"
            and self.alice_outcome in (0, 1)
            and self.bob_outcome == "conclusive"
        )
        if should_have_key != (self.key_bit is not None):
            raise ValueError("key_bit must be present exactly on conclusive Z rounds")
        if self.eve_outcome is not None and self.eve_outcome not in (1, 2, 3, 4):
            raise ValueError("eve_outcome must be 1..4 when present")


@dataclass(frozen=True)
class SessionResult:
    """Aggregate outcome of a session.

    On insufficient statistics (no conclusive events, or some setting pair
    never sampled) the estimate, error rate, and rate reports are None and
    the session counts as aborted.
    """

    config: SessionConfig
    table: CorrelationTable
    s_ch_estimate: Optional[BellValue]
    qber: Optional[float]
    n_con: int
    n_err: int
    n_detected: int
    rate_report: Optional[RateReport]
    rate_report_extrapolated: Optional[RateReport]
    aborted: bool
    insufficient_statistics: bool

    def __post_init__(self):
        if not 0 <= self.n_err <= self.n_con <= self.n_detected <= self.config.n_rounds:
            raise ValueError("count ordering violated: need n_err <= n_con <= n_detected <= n_rounds")

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "table": self.table.to_json_dict(),
            "s_ch_estimate": None if self.s_ch_estimate is None else {
                "value": self.s_ch_estimate.value,
                "standard_error": self.s_ch_estimate.standard_error,
            },
            "qber": self.qber,
            "n_con": self.n_con,
            "n_err": self.n_err,
            "n_detected": self.n_detected,
            "rate_report": None if self.rate_report is None else self.rate_report.to_json_dict(),
            "rate_report_extrapolated": None if self.rate_report_extrapolated is None
            else self.rate_report_extrapolated.to_json_dict(),
            "aborted": self.aborted,
            "insufficient_statistics": self.insufficient_statistics,
        }


class _Distributions:
    """Per-session sampling tables: cumulative Born distributions per basis pair.

    Attack-free sessions sample one 9-cell joint grid per basis pair. With
    the attacker on, stage 1 samples the 12-cell joint of (sender outcome,
    attacker branch) and stage 2 the receiver outcome given the resent
    (and depolarized) qubit.
    """

    __slots__ = ("test_fraction", "joint_cum", "stage1_cum", "stage2_cum")

    def __init__(self, config: SessionConfig):
        angle, channel = config.angle, config.channel
        self.test_fraction = config.test_fraction
        settings = ch_settings(angle)
        if channel.attacker == "none":
            state = analytic_pipeline_state(angle, channel)
            grids = table_from_state(state, settings, channel).grids
            self.joint_cum = np.cumsum(grids.reshape(2, 2, 9), axis=2)
            self.stage1_cum = None
            self.stage2_cum = None
            return
        source = analytic_pipeline_state(angle, ChannelModel()).qubit
        alice = [lossy_povm(settings.alice[i], channel.eta_a) for i in (0, 1)]
        bob = [lossy_povm(settings.bob[j], channel.eta_b) for j in (0, 1)]
        eve = usd_povm(angle)
        stage1 = np.zeros((2, 3, 4))
        rho = source.matrix
        for i in (0, 1):
            for a, a_el in enumerate(alice[i].elements):
                for e, e_el in enumerate(eve.elements):
                    stage1[i, a, e] = max(float(np.trace(np.kron(a_el.matrix, e_el.matrix) @ rho).real), 0.0)
        stage2 = np.zeros((4, 2, 3))
        for e, chi in enumerate(resend_states(angle)):
            if chi is None:
                stage2[e, :, 2] = 1.0  # suppressed round: receiver sees vacuum
                continue
            resent = depolarize(chi.to_density(), channel.depol_p)
            for j in (0, 1):
                stage2[e, j] = born_probabilities(resent, bob[j])
        self.joint_cum = None
        self.stage1_cum = np.cumsum(stage1.reshape(2, 12), axis=1)
        self.stage2_cum = np.cumsum(stage2, axis=2)


def _tally_chunk(uniforms: np.ndarray, dist: _Distributions) -> np.ndarray:
    """Count-mode (2,2,3,3) tally for one block of per-round uniform draws."""
    tally = np.zeros((2, 2, 3, 3), dtype=np.int64)
    i_set = (uniforms[:, 0] < dist.test_fraction).astype(np.int64)
    j_set = (uniforms[:, 1] >= 0.5).astype(np.int64)
    if dist.joint_cum is not None:
        for i in (0, 1):
            for j in (0, 1):
                mask = (i_set == i) & (j_set == j)
                if not mask.any():
                    continue
                idx = np.searchsorted(dist.joint_cum[i, j], uniforms[mask, 2], side="right")
                np.clip(idx, 0, 8, out=idx)
                tally[i, j] += np.bincount(idx, minlength=9).reshape(3, 3)
        return tally
    for i in (0, 1):
        mask_i = i_set == i
        if not mask_i.any():
            continue
        idx12 = np.searchsorted(dist.stage1_cum[i], uniforms[mask_i, 2], side="right")
        np.clip(idx12, 0, 11, out=idx12)
        rows = idx12 // 4
        eves = idx12 % 4
        j_sub = j_set[mask_i]
        u3 = uniforms[mask_i, 3]
        for j in (0, 1):
            for e in range(4):
                mask2 = (j_sub == j) & (eves == e)
                if not mask2.any():
                    continue
                if e >= 2:  # ambiguous branch resends nothing: forced vacuum

                    cols = np.full(int(mask2.sum()), 2, dtype=np.int64)
                else:
                    cols = np.searchsorted(dist.stage2_cum[e, j], u3[mask2], side="right")
                    np.clip(cols, 0, 2, out=cols)
                tally[i, j] += np.bincount(rows[mask2] * 3 + cols, minlength=9).reshape(3, 3)
    return tally


def _record_from_cells(i: int, j: int, row: int, col: int, eve: Optional[int]) -> RoundRecord:
    basis = "Z" if i == 0 else "X"
    if row == 2:
        outcome: object = "vacuum"
    else:
        outcome = row if i == 0 else 1 - row  # X target row holds outcome 1
    bob_outcome = _BOB_OUTCOMES[col]
    key_bit = None
    if basis == "Z" and row < 2 and col == 0:
        key_bit = (row, 1 - j)  # conclusive in B_j decodes j XOR 1
    return RoundRecord(
        alice_basis=basis,
        alice_outcome=outcome,
        bob_basis=j,
        bob_outcome=bob_outcome,
        key_bit=key_bit,
        eve_outcome=eve,
    )


def sample_round(rng_state: np.random.Generator, config: SessionConfig,
                 _dist: Optional[_Distributions] = None) -> RoundRecord:
    """Draw one round; consumes exactly four variates from ``rng_state``.

    Passing ``Generator(Philox(key=seed, counter=r))`` reproduces round r of
    the session with that seed, independent of any other round.
    """
    dist = _Distributions(config) if _dist is None else _dist
    u = rng_state.random(4)
    i = 1 if u[0] < dist.test_fraction else 0
    j = 1 if u[1] >= 0.5 else 0
    if dist.joint_cum is not None:
        idx = min(int(np.searchsorted(dist.joint_cum[i, j], u[2], side="right")), 8)
        return _record_from_cells(i, j, idx // 3, idx % 3, None)
    idx12 = min(int(np.searchsorted(dist.stage1_cum[i], u[2], side="right")), 11)
    row, e = idx12 // 4, idx12 % 4
    if e >= 2:
        col = 2
    else:
        col = min(int(np.searchsorted(dist.stage2_cum[e, j], u[3], side="right")), 2)
    return _record_from_cells(i, j, row, col, e + 1)


class SiftSummary(NamedTuple):
    key_bits: List[int]
    n_con: int
    n_err: int
    table: CorrelationTable


_ROW_OF = {("Z", 0): 0, ("Z", 1): 1, ("X", 1): 0, ("X", 0): 1}


def estimate_table(records) -> CorrelationTable:
    """Count-mode table from an iterable of round records."""
    counts = np.zeros((2, 2, 3, 3), dtype=np.int64)
    for r in records:
        i = 0 if r.alice_basis == "Z" else 1
        row = 2 if r.alice_outcome == "vacuum" else _ROW_OF[(r.alice_basis, r.alice_outcome)]
        col = _BOB_OUTCOMES.index(r.bob_outcome)
        counts[i, r.bob_basis, row, col] += 1
    return CorrelationTable("count", counts)


def sift(records) -> SiftSummary:
    """Extract the key and its error count from a record stream.

    Key rounds are sender-Z, sender-detected, receiver-conclusive; the
    decoded bit is the complement of the receiver's basis index, and an
    error is a decoded bit disagreeing with the sender's. The comparison
    uses simulator omniscience; only the error fraction feeds the rate.
    """
    records = list(records)
    bits: List[int] = []
    n_err = 0
    for r in records:
        if r.key_bit is None:
            continue
        sent, decoded = r.key_bit
        bits.append(sent)
        if sent != decoded:
            n_err += 1
    return SiftSummary(key_bits=bits, n_con=len(bits), n_err=n_err, table=estimate_table(records))


def _result_from_table(table: CorrelationTable, config: SessionConfig) -> SessionResult:
    g = table.grids
    n_detected = int(g[:, :, 0:2, 0:2].sum())
    n_detected_z = int(g[0, :, 0:2, 0:2].sum())
    n_con = int(g[0, :, 0:2, 0].sum())
    n_err = int(g[0, 0, 0, 0] + g[0, 1, 1, 0])
    insufficient = n_con == 0 or bool(np.any(table.totals == 0))
    if insufficient:
        return SessionResult(
            config=config, table=table, s_ch_estimate=None, qber=None,
            n_con=n_con, n_err=n_err, n_detected=n_detected,
            rate_report=None, rate_report_extrapolated=None,
            aborted=True, insufficient_statistics=True,
        )
    estimate = ch_value(table)
    qber = n_err / n_con
    # finite-sample estimates can stray outside the gain formula's domain
    s_eff = min(max(estimate.value, _CH_DOMAIN_LO), CH_QUANTUM_MAX)
    gain = gain_from_ch(s_eff, qber)
    rate = key_rate(n_con, gain)
    f_raw = n_con / n_detected
    reports = []
    for f_con in (f_raw, n_con / n_detected_z if n_detected_z else f_raw):
        reports.append(RateReport(
            s_ch=estimate.value,
            s_chsh=4.0 * estimate.value + 2.0,
            qber=qber,
            conclusive_fraction=f_con,
            gain=gain,
            rate=rate,
            normalized_rate=f_con * gain,
        ))
    return SessionResult(
        config=config, table=table, s_ch_estimate=estimate, qber=qber,
        n_con=n_con, n_err=n_err, n_detected=n_detected,
        rate_report=reports[0], rate_report_extrapolated=reports[1],
        aborted=bool(estimate.value <= config.abort_threshold),
        insufficient_statistics=False,
    )


def run_session(config: SessionConfig, workers: int = 1) -> SessionResult:
    """Run every round and aggregate. Deterministic in (config.seed) alone.

    Rounds are processed in chunks of ``config.chunk_size``; ``workers`` > 1
    distributes chunks over threads. Neither parameter can change any count:
    each round's variates come from its own counter block.
    """
    if workers is None:
        workers = 1
    if int(workers) < 1:
        raise ValueError(f"workers must be positive, got {workers!r}")
    dist = _Distributions(config)
    starts = list(range(0, config.n_rounds, config.chunk_size))

    def work(start: int) -> np.ndarray:
        n = min(config.chunk_size, config.n_rounds - start)
        gen = np.random.Generator(np.random.Philox(key=config.seed, counter=start))
        uniforms = gen.random(4 * n).reshape(n, 4)
        return _tally_chunk(uniforms, dist)

    if int(workers) > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            tallies = list(pool.map(work, starts))
    else:
        tallies = [work(s) for s in starts]
    counts = np.zeros((2, 2, 3, 3), dtype=np.int64)
    for t in tallies:
        counts += t
    return _result_from_table(CorrelationTable("count", counts), config)
