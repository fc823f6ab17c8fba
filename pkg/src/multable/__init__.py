"""Counting the distinct products in the n x n multiplication table.

Exact counts by direct sieving, by tabulating delta(n) with
M(n) = M(n-1) + n - delta(n), and by prime chains; Monte Carlo estimates
from uniformly random factored integers.
"""

from .analysis import C, crossover_log2, normalized_ratio, phi
from .direct import SegmentPlan, brute_force_m, m_direct, m_direct_segmented, m_exact_direct
from .errors import CapacityError, ContractError, DomainError, MultableError, StaleCheckpointError
from .incremental import (
    DeltaRecord,
    WheelConfig,
    compute_deltas,
    constructed_count,
    delta,
    delta_value,
    delta_wheel,
    tabulate_m,
)
from .montecarlo import (
    EstimateReport,
    bernoulli_estimate,
    count_divisors_in_range,
    divisor_in_range,
    exact_variance_check,
    product_estimate,
)
from .numtheory import (
    BitVector,
    DivisorPairList,
    SpfTable,
    divisor_pairs,
    largest_prime_factor,
    primes_in,
    spf_table,
    tau_plus,
)
from .primality import is_perfect_power, is_prime_power, is_probable_prime
from .rng import RandomStream
from .sampler import FactoredInt, SamplerStats, bach_b, bach_r, kalai_sample, sampler_benchmark
from .shapes import render_shape
from .subquadratic import ChainSpec, SmoothSplit, delta_chain_step, l_function, run_chain, tabulate_m_subquadratic
from .tabulation import TabulationResult, run_tabulation

__version__ = "0.1.0"
