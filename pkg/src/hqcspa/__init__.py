"""Carry-less multiplication kernels, leakage simulation, and single-trace
recovery of the scanned operand, with an evaluation and benchmark CLI."""

from .attack import (
    AttackConfig,
    KeyRecoveryReport,
    PeakSet,
    RecoveryReport,
    WindowClassificationError,
    classify_window_drop,
    classify_window_secondary,
    crop_window,
    find_peaks,
    recover_key,
    recover_limb,
)
from .evaluate import (
    CALIBRATED_DROP_FRACTION,
    CALIBRATED_NOISE_SIGMA,
    BenchResult,
    ConfusionMatrix,
    EvaluationResult,
    calibrate_sigma,
    calibrated_attack,
    calibrated_leakage,
    export_plot_data,
    run_bench,
    run_evaluation,
)
from .gf2x import (
    GF2Poly,
    WideProduct,
    base_mul,
    base_mul2,
    base_mul3,
    cyclic_reduce,
    karatsuba_base_calls,
    karatsuba_mul,
    make_lookup_table,
    masked_mul,
    resolve_kernel,
    schoolbook_oracle,
)
from .hqc import (
    Ciphertext,
    RingParams,
    SecretKey,
    decrypt_mul,
    random_ciphertext,
    sample_secret,
)
from .leakage import (
    LeakageParams,
    Trace,
    TraceLayout,
    TraceMeta,
    key_recovery_traces,
    read_trace,
    simulate_trace,
    write_trace,
)

__version__ = "0.1.0"
