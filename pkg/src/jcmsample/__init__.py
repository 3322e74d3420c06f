"""Sampling colored multigraphs with a fixed degree sequence and joint color matrix."""

from .classify import Case, SwapProposal, classify, enumerate_swaps
from .graph import (
    ColoredMultigraph,
    DegenerateClassError,
    EdgeInstance,
    GraphInputError,
    apply_swap,
    build,
    jcm,
    sample_instance,
)
from .io import load_graph, write_graph, write_trace
from .metrics import (
    UndefinedStatisticError,
    color_assortativity,
    degree_assortativity,
    relative_error,
    same_ensemble,
)
from .samplers import (
    ChainConfig,
    ChainTrace,
    EdgeWeightTarget,
    Mode,
    StepOutcome,
    UniformTarget,
    cm_step,
    polaris_b_step,
    polaris_c_step,
    rho_b,
    rho_c,
    run_chain,
)

__version__ = "0.1.0"
