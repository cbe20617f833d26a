"""One-shot broadcast joint source-channel coding with codebook diversity.

Exact achievability-bound evaluation, Monte-Carlo simulation of the
Poisson-codebook coding schemes, second-order (dispersion) rate conditions,
and achievable-rate curves over the binary symmetric channel.
"""

__version__ = "0.1.0"

from .bounds import (
    JsccInstance,
    SchemeDescriptor,
    WzInstance,
    baseline_bound,
    baseline_scheme,
    bsc_bound,
    disjoint_bound,
    disjoint_scheme,
    hybrid_bound,
    hybrid_scheme,
    lossless_bound,
    min_binomial_pmf,
    near_lossless_bsc_instance,
    side_info_bound,
    slepian_wolf_bound,
)
from .probability import (
    DistortionMatrix,
    InfoDensityTable,
    Kernel,
    Pmf,
    bsc,
    channel_dispersion,
    distortion_ball_mass,
    hamming_distortion,
    information_density,
    mutual_information,
    posterior,
    product_channel,
    uniform,
)
from .rate_search import RatePoint, max_rate, max_rate_hybrid_opt, rate_curve
from .second_order import (
    ConditionResult,
    GaussianMaxSpec,
    RateDistortionSolution,
    SecondOrderQuantities,
    disjoint_condition,
    gaussian_max_cdf,
    gaussian_max_quantile,
    hybrid_condition,
    rate_distortion,
    tilted_information,
)
from .simulate import (
    CondListMatchingResult,
    ListMatchingResult,
    StreamCodebook,
    TrialBatchResult,
    simulate_conditional_list_matching,
    simulate_list_matching,
    simulate_scheme,
    simulate_side_info_scheme,
    stream_select,
    two_sample_z,
)

__all__ = [name for name in dir() if not name.startswith("_")]
