"""Maximum inaccuracies of indirectly measured quantities in first and second
degree of approximation, the quadric surfaces they describe, and the
dimensionless accuracy scale."""

from .expr import differentiate, evaluate, parse, second_partial, simplify, to_text
from .measure import (
    EvaluationPoint,
    Experiment,
    InfluenceSet,
    MeasurementError,
    Mode,
    ObservationSeries,
    delta_first,
    delta_second,
    delta_total,
    influence_first,
    influence_second,
    influences,
    representative_inaccuracy,
    sample_mean,
)
from .quadric import (
    Kind,
    QuadricModel,
    SurfaceKind,
    build_quadric,
    canonicalize,
    classify,
    eigen_symmetric,
    signature_class,
)
from .scale import accuracy_first, accuracy_second, gradient_at_mean

__version__ = "0.1.0"
