"""Distance-guided genetic algorithm for distributed data-intensive service composition."""

from .bench import ExperimentPlan, emit_report, run_plan, wilcoxon_signed_rank
from .data import Dataset, GenSpec, generate, load, save
from .decode import (
    END,
    START,
    CompositionDag,
    DecodeResult,
    Edge,
    InfeasibleSequence,
    backward_decode,
    export_dag,
    reduce,
    validate,
)
from .engine import CrossoverKind, GaConfig, Individual, RunResult, evolve
from .model import (
    Concept,
    DataBinding,
    DataItem,
    LinkAttrs,
    Location,
    Repository,
    Service,
    Task,
    Taxonomy,
    WeightVector,
    satisfies,
    service_distance,
    subsumes,
)
from .qos import NormBounds, QosBreakdown, fitness, norm_bounds, total_cost, total_time

__version__ = "0.1.0"
