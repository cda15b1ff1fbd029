"""Coherence layer over language-model output distributions.

Compute answers for negated prompts from positive queries only: formula
evaluation over a base measure, NLI label propagation under negation,
cloze reranking and yes/no flipping, plus auditing tools that measure how
far a raw model distribution is from any coherent one.
"""

from .adapters import AltDistribution, MkrResult, QAQuery, mkr_rerank, qa_answer
from .audit import (
    ChainDecayResult,
    CoherenceReport,
    StringDist,
    WorldModel,
    audit,
    axiom_audit,
    chain_decay,
    dutch_book_margin,
    load_stringdist,
)
from .datasets import (
    EvalReport,
    MkrRecord,
    NliRecord,
    QaRecord,
    generate_syn,
    load_dataset,
    read_report,
    write_report,
)
from .errors import (
    CapExceededError,
    CohlayerError,
    ContextBoundError,
    DataFormatError,
    DivisionByCertaintyError,
    FixtureMissError,
    IncoherentBaseError,
    InvariantViolationError,
    MeasureZeroError,
    MissingLabelError,
    ParseError,
    ProviderError,
)
from .evaluator import (
    AdmissibilityReport,
    BaseMeasure,
    EvalContext,
    Evaluator,
    HashBaseMeasure,
    TableBaseMeasure,
    check_admissibility,
    cond_on_negated,
    evaluate,
)
from .formulas import Atom, Formula, Implies, Not, Seq, parse_formula, serialize_formula
from .nli import (
    ConfigPrediction,
    Label2,
    Label3,
    PairLabels,
    flip3,
    rte_scoped,
    rte_unscoped,
    snli_basic,
    snli_scoped,
    to_label2,
)
from .providers import (
    CachingProvider,
    FixtureProvider,
    PredictionRequest,
    PredictionResponse,
    RemoteProvider,
    make_provider,
    validate_payload,
)
from .structures import (
    Embedding,
    ScopedContext,
    Structure,
    check_satisfaction,
    find_embedding,
    merge,
    parse_structure,
    serialize_structure,
)
from .cli import RunConfig, eval_formula, run_eval

__version__ = "0.1.0"
