"""Entanglement-based B92 key distribution: analytics, rates, and simulation."""

from .qcore import (
    ATOL_CONSTRUCT,
    ATOL_DERIVED,
    DensityMatrix,
    Operator,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    Povm,
    StateVector,
    apply_channel,
    born_probabilities,
    identity,
    partial_trace,
    tensor,
)
from .states import (
    ProtocolAngle,
    SettingPairSpec,
    basis_state_x,
    basis_state_z,
    bob_basis,
    ch_settings,
    conjugate_state,
    entangled_state,
    signal_mixture,
    signal_state,
    steered_state,
    uninformative_states,
)
from .channels import (
    ATTACK_OUTCOMES,
    AttackOutcome,
    ChannelModel,
    JointState,
    analytic_pipeline_state,
    depolarize,
    lossy_povm,
    resend_states,
    usd_attack_channel,
    usd_povm,
)
from .bell import (
    BellValue,
    CH_QUANTUM_MAX,
    CorrelationTable,
    analytic_ch,
    analytic_ch_max,
    ch_value,
    ch_with_loss,
    chsh_from_ch,
    chsh_value,
    table_from_state,
)
from .rates import (
    RateReport,
    ThresholdResult,
    binary_entropy,
    depolarized_ch,
    efficiency_threshold,
    gain_from_ch,
    gain_from_chsh,
    golden_section_max,
    key_rate,
    max_depolarization,
    normalized_rate,
    optimal_theta,
    pm_reference_rate,
    qber_and_conclusive,
)
from .session import (
    RoundRecord,
    SessionConfig,
    SessionResult,
    SiftSummary,
    estimate_table,
    run_session,
    sample_round,
    sift,
)

__version__ = "0.1.0"

__all__ = [
    "ATOL_CONSTRUCT",
    "ATOL_DERIVED",
    "ATTACK_OUTCOMES",
    "AttackOutcome",
    "BellValue",
    "CH_QUANTUM_MAX",
    "ChannelModel",
    "CorrelationTable",
    "DensityMatrix",
    "JointState",
    "Operator",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "Povm",
    "ProtocolAngle",
    "RateReport",
    "RoundRecord",
    "SessionConfig",
    "SessionResult",
    "SettingPairSpec",
    "SiftSummary",
    "StateVector",
    "ThresholdResult",
    "analytic_ch",
    "analytic_ch_max",
    "analytic_pipeline_state",
    "apply_channel",
    "basis_state_x",
    "basis_state_z",
    "binary_entropy",
    "bob_basis",
    "born_probabilities",
    "ch_settings",
    "ch_value",
    "ch_with_loss",
    "chsh_from_ch",
    "chsh_value",
    "conjugate_state",
    "depolarize",
    "depolarized_ch",
    "efficiency_threshold",
    "entangled_state",
    "estimate_table",
    "gain_from_ch",
    "gain_from_chsh",
    "golden_section_max",
    "identity",
    "key_rate",
    "lossy_povm",
    "max_depolarization",
    "normalized_rate",
    "optimal_theta",
    "partial_trace",
    "pm_reference_rate",
    "qber_and_conclusive",
    "resend_states",
    "run_session",
    "sample_round",
    "sift",
    "signal_mixture",
    "signal_state",
    "steered_state",
    "table_from_state",
    "tensor",
    "uninformative_states",
    "usd_attack_channel",
    "usd_povm",
]
