"""Sequential projective measurements: simulation, union bounds, sequential decoding."""

from .bounds import (
    AngleVector,
    BoundReport,
    check_appendix_b_w,
    check_corollary1,
    check_hayashi_nagaoka,
    check_lemma1,
    check_lemma2,
    check_povm_repeat,
    check_sen,
    check_t1a,
    check_t1b,
    check_wilde4th,
    lemma2_a,
    lemma2_minimizer_scan,
)
from .config import DEFAULT_CAPS, DEFAULT_TOL, ResourceCaps, Tolerances
from .errors import QuboundError, ResourceError, ShapeError, ValidationError, VanishingBranchError
from .hunt import GeneratorConfig, hunt_violations
from .qstate import (
    DensityOperator,
    Effect,
    Projector,
    PureState,
    lift_projector,
    purify,
    random_density,
    random_projector,
    random_pure_state,
    rng_stream,
    von_neumann_entropy,
    zeno_family,
)
from .seqchain import (
    ChainTrace,
    MeasurementChain,
    apply_projector,
    extract_angles,
    run_back_and_forth,
    run_chain,
)
from .seqdecode import (
    CqChannel,
    TypicalSpec,
    conditional_typical_projector,
    decoding_experiment,
    holevo_quantity,
    pgm_decode,
    random_codebook,
    sequential_decode,
    typical_projector,
    typicality_audit,
)

__version__ = "0.1.0"
