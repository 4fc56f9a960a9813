"""Secret sharing from correlated randomness and rate-limited public
communication: polar-code vector quantization, block-Markov chaining
over monotone access structures, and universal-hash privacy
amplification, plus exact evaluation of the achievable-rate formulas."""

from .access import AccessStructure, validate_access_structure
from .amplify import (
    HashSpec,
    SecretBundle,
    SecretScheme,
    ShareReport,
    build_scheme,
    leakage_exact_tiny,
    run_share_trials,
    secret_length,
    share_secret,
    uniformity_report,
)
from .chain import (
    BlockPlan,
    ChainCodec,
    ChainFrame,
    decode_backward,
    decode_forward,
    encode_chain,
    plan_blocks,
)
from .gf2 import FieldSpec, field_for, gf_mul, hash_to_bits
from .info import exact_info, joint_model, y_group
from .layered import layered_decode, layered_encode
from .polar import (
    EntropyProfile,
    IndexSets,
    PolarParams,
    build_index_sets,
    entropy_profile_exact,
    entropy_profile_mc,
    sc_decode,
    sc_probability,
    transform,
)
from .quantize import (
    QuantizedBlocks,
    RandomBudget,
    decode_single,
    encode_single,
    make_budget,
    quantize,
    quantize_decoupled,
)
from .rates import (
    RatePoint,
    capacity_all_participants,
    rate_prop1,
    rate_two_layer,
    skc_no_eavesdropper,
    skc_with_eavesdropper,
    sweep_binary_auxiliary,
    upper_envelope,
)
from .sources import (
    JointSource,
    SampleBlock,
    TestChannel,
    bsc_channel,
    identity_channel,
    independent_channel,
    make_bss_source,
    make_layered_channel,
    sample,
)

__version__ = "0.1.0"
