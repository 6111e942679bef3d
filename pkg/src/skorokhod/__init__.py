"""Skorokhod embeddings of non-centred targets in Brownian motion.

Builds stopping rules that embed an atomic target law while maximising
the law of the running maximum (or minimum, or of ``sup |h(B)|``),
simulates them exactly or on a time grid, and checks embedding,
optimality and minimality statistically. Diffusions are handled through
their scale function.
"""

from .errors import *  # noqa: F401,F403
from .measure import TargetMeasure, from_atoms, mean, quantile_split, reflect, shift
from .potential import (
    PotentialFunction,
    TangentFrame,
    barrier_b,
    barrier_table,
    build_potential,
    eval_c,
    max_law_bound,
    normalize_h,
    tangent_frame,
    theta_zero,
)
from .rules import (
    StoppingRule,
    compile_naive,
    compile_tmax,
    compile_tmin,
    compile_tmod,
    first_exit,
    hitting,
    non_minimal_control,
    stop_decision,
)
from .simulate import RandomStream, SampleSet, euler_path, exact_walk, monte_carlo
from .exprlang import parse
from .diffusion import DiffusionSpec, classify_embeddable, scale_function, simulate_diffusion
from .verify import VerificationReport, ks_distance, max_law_sharpness, minimality_diagnostic

__version__ = "0.1.0"
