"""Labstates on Heisenberg nets, semi-unitary stages and path summation."""

from .basis import (
    ANNIHILATED,
    apply_signal_annihilation,
    apply_signal_creation,
    class_size,
    computational_index,
    occupation_of,
    signal_set_of,
)
from .dsl import ExperimentSpec, StageSpec, elaborate, parse, serialize, validate
from .errors import (
    ClassCollisionError,
    DomainError,
    NormalizationError,
    ParseError,
    PathBudgetError,
    RankCapError,
    ResourceError,
    SFQMError,
    ValidationError,
)
from .evolution import (
    SemiUnitary,
    ValidationReport,
    apply,
    check_schrodinger,
    compose,
    conjugate_signal_operator,
    extend_one_signal,
    make_stage,
    reverse_stage,
)
from .labstate import (
    Labstate,
    OutcomeTable,
    born_probability,
    class_probability,
    general_state,
    lift_signal_creation,
    one_signal_state,
    outcome_table,
    void_state,
)
from .pathsum import StageChain, amplitude, amplitude_by_paths, conservation_check, evolve_chain
from .sampling import sample_outcomes

__version__ = "0.1.0"
