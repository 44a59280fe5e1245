"""Power-analysis workbench: leakage simulation, DPA/CPA, and multi-linear
attacks decoded in the first-order Reed-Muller code."""

from .approx import (
    ApproximationSet,
    LinearApproximation,
    data_complexity,
    estimate_bias_exhaustive,
    estimate_bias_from_traces,
    estimate_bias_monte_carlo,
    evaluate_parity,
    load_corpus,
    multi_data_complexity,
    parse_approximation,
    save_corpus,
    search_approximations,
    serialize_approximation,
)
from .attack import (
    MlpaResult,
    build_codeword,
    mlpa_attack,
    partition_counts,
    success_rate,
)
from .bits import BitVector, bit_at, hamming_weight, inner_product
from .leakage import (
    Campaign,
    DeviceConfig,
    RegisterTarget,
    Trace,
    power_to_hw_bits,
    register_target,
    sbox_target,
    simulate_campaign,
    simulate_trace,
)
from .rmcode import KeyRanking, NoisyCodeword, decode, fwht
from .traceio import (
    CsvColumns,
    DpaScan,
    Given,
    MaxVariance,
    import_csv,
    locate_register_sample,
    read_campaign,
    write_campaign,
)

__version__ = "0.1.0"
