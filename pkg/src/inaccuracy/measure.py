"""Influence coefficients and maximum-inaccuracy functionals.

An :class:`InfluenceSet` holds the first-order coefficients ``A_i`` and the
second-order coefficients ``A_ij`` (one per unordered pair ``i <= j``).  The
second-order functional sums each unordered pair once::

    delta_second(p) = sum_{i <= j} A_ij p_i p_j
    delta_total(p)  = delta_first(p) + delta_second(p) / 2
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from . import expr as ex


class MeasurementError(Exception):
    """Invalid observations or a singular evaluation in the measurement layer."""


class Mode(str, Enum):
    ABSOLUTE = "absolute"
    RELATIVE = "relative"


class EvaluationPoint(str, Enum):
    """Where the m-th term of a coefficient mean is evaluated.

    ``OTHERS_AT_MEAN``: variable i at its m-th observation, every other
    variable at its sample mean.  Total for unequal series lengths.
    ``JOINT``: every variable at its m-th observation; needs equal lengths.
    """

    OTHERS_AT_MEAN = "others-at-mean"
    JOINT = "joint"


@dataclass(frozen=True)
class ObservationSeries:
    name: str
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise MeasurementError(f"series {self.name!r} is empty")
        if not all(math.isfinite(v) for v in self.values):
            raise MeasurementError(f"series {self.name!r} has non-finite values")

    def __len__(self):
        return len(self.values)


def sample_mean(s: ObservationSeries) -> float:
    if len(s.values) == 0:
        raise MeasurementError(f"series {s.name!r} is empty")
    return math.fsum(s.values) / len(s.values)


def mean_abs_deviation(s: ObservationSeries) -> float:
    m = sample_mean(s)
    return math.fsum(abs(x - m) for x in s.values) / len(s.values)


def max_deviation(s: ObservationSeries) -> float:
    m = sample_mean(s)
    return max(abs(x - m) for x in s.values)


ESTIMATORS: dict[str, Callable[[ObservationSeries], float]] = {
    "mean-abs-deviation": mean_abs_deviation,
    "max-deviation": max_deviation,
}


def representative_inaccuracy(
    s: ObservationSeries,
    mode: Mode | str = Mode.RELATIVE,
    estimator: str | Callable[[ObservationSeries], float] = "mean-abs-deviation",
) -> float:
    """Typical |Delta X| of a series, divided by |mean| in relative mode."""
    mode = Mode(mode)
    fn = ESTIMATORS[estimator] if isinstance(estimator, str) else estimator
    spread = fn(s)
    if mode is Mode.ABSOLUTE:
        return spread
    m = sample_mean(s)
    if m == 0:
        raise MeasurementError(f"series {s.name!r} has zero mean in relative mode")
    return spread / abs(m)


@dataclass(frozen=True)
class Experiment:
    formula: ex.Expr
    variables: tuple[ObservationSeries, ...]
    constants: Mapping[str, float] = field(default_factory=dict)
    mode: Mode = Mode.RELATIVE
    evaluation_point: EvaluationPoint = EvaluationPoint.OTHERS_AT_MEAN

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "evaluation_point", EvaluationPoint(self.evaluation_point))
        names = [s.name for s in self.variables]
        if len(set(names)) != len(names):
            raise MeasurementError(f"duplicate variable names in {names}")
        missing = ex.variables_of(self.formula) - set(names)
        if missing:
            raise MeasurementError(f"formula variables without observations: {sorted(missing)}")
        unbound = ex.free_symbols(self.formula) - set(names) - set(self.constants)
        if unbound:
            raise MeasurementError(f"formula constants without values: {sorted(unbound)}")
        if self.evaluation_point is EvaluationPoint.JOINT:
            if len({len(s) for s in self.variables}) > 1:
                raise MeasurementError("joint evaluation needs equal series lengths")
        if self.mode is Mode.RELATIVE:
            for s in self.variables:
                if sample_mean(s) == 0:
                    raise MeasurementError(
                        f"series {s.name!r} has zero mean in relative mode"
                    )

    @classmethod
    def from_text(
        cls,
        formula: str,
        observations: Mapping[str, Sequence[float]],
        constants: Mapping[str, float] | None = None,
        mode: Mode | str = Mode.RELATIVE,
        evaluation_point: EvaluationPoint | str = EvaluationPoint.OTHERS_AT_MEAN,
    ) -> "Experiment":
        constants = dict(constants or {})
        e = ex.parse(formula, observations.keys(), constants.keys())
        series = tuple(ObservationSeries(k, tuple(v)) for k, v in observations.items())
        return cls(e, series, constants, Mode(mode), EvaluationPoint(evaluation_point))

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.variables]

    @property
    def n(self) -> int:
        return len(self.variables)

    def means(self) -> list[float]:
        return [sample_mean(s) for s in self.variables]


@dataclass(frozen=True)
class InfluenceSet:
    """First-order ``first[i]`` and second-order ``second[(i, j)]``, ``i <= j``.

    Indices are zero-based.  Missing pairs are zero.
    """

    first: tuple[float, ...]
    second: Mapping[tuple[int, int], float] = field(default_factory=dict)
    mode: Mode = Mode.RELATIVE

    def __post_init__(self):
        first = tuple(float(a) for a in self.first)
        n = len(first)
        if n == 0:
            raise MeasurementError("influence set needs at least one variable")
        second: dict[tuple[int, int], float] = {}
        for (i, j), a in dict(self.second).items():
            i, j = (i, j) if i <= j else (j, i)
            if not (0 <= i < n and 0 <= j < n):
                raise MeasurementError(f"pair {(i, j)} out of range for n={n}")
            second[(i, j)] = float(a)
        values = first + tuple(second.values())
        if any(not math.isfinite(a) for a in values):
            raise MeasurementError("influence coefficients must be finite")
        if any(a < 0 for a in values):
            raise MeasurementError("influence coefficients must be nonnegative")
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)
        object.__setattr__(self, "mode", Mode(self.mode))

    @property
    def n(self) -> int:
        return len(self.first)

    def a(self, i: int, j: int) -> float:
        return self.second.get((min(i, j), max(i, j)), 0.0)

    def second_matrix(self) -> np.ndarray:
        """Symmetric n x n array with ``A_ij`` in both triangles."""
        m = np.zeros((self.n, self.n))
        for (i, j), a in self.second.items():
            m[i, j] = m[j, i] = a
        return m

    @property
    def degenerate(self) -> bool:
        return not any(self.first) and not any(self.second.values())

    @property
    def is_linear(self) -> bool:
        return not any(self.second.values())

    @classmethod
    def from_matrix(cls, first: Sequence[float], second, mode: Mode | str = Mode.RELATIVE):
        m = np.asarray(second, dtype=float)
        n = len(first)
        if m.shape != (n, n):
            raise MeasurementError(f"second-order matrix has shape {m.shape}, expected {(n, n)}")
        if not np.array_equal(m, m.T):
            raise MeasurementError("second-order matrix is not symmetric")
        pairs = {(i, j): m[i, j] for i in range(n) for j in range(i, n) if m[i, j] != 0}
        return cls(tuple(first), pairs, Mode(mode))


# --------------------------------------------------------------------------
# Coefficients from observations


def _bindings(experiment: Experiment, overrides: Mapping[int, float], m: int | None):
    b = dict(experiment.constants)
    for k, s in enumerate(experiment.variables):
        if k in overrides:
            b[s.name] = overrides[k]
        elif m is not None:
            b[s.name] = s.values[m]
        else:
            b[s.name] = sample_mean(s)
    return b


def _eval(e: ex.Expr, bindings) -> float:
    try:
        return ex.evaluate(e, bindings)
    except ex.EvaluationError as err:
        raise MeasurementError(f"singular evaluation at {dict(bindings)}: {err}") from err


def _term(experiment: Experiment, deriv: ex.Expr, bindings, scale: float) -> float:
    d = _eval(deriv, bindings)
    if experiment.mode is Mode.ABSOLUTE:
        return abs(d)
    f = _eval(experiment.formula, bindings)
    if f == 0:
        raise MeasurementError(f"formula evaluates to 0 at {dict(bindings)} in relative mode")
    return abs(scale / f * d)


def influence_first(experiment: Experiment, i: int) -> float:
    s = experiment.variables[i]
    deriv = ex.differentiate(experiment.formula, s.name)
    joint = experiment.evaluation_point is EvaluationPoint.JOINT
    terms = []
    for m, x in enumerate(s.values):
        b = _bindings(experiment, {i: x}, m if joint else None)
        terms.append(_term(experiment, deriv, b, x))
    return math.fsum(terms) / len(terms)


def influence_second(experiment: Experiment, i: int, j: int) -> float:
    """Mean of the (scaled) second partial over the pairing scheme.

    Diagonal pairs average over the observations of ``X_i``.  Cross pairs
    average over every (m, l) combination of the two series, unless the
    evaluation point is ``JOINT``, in which case they pair index with index.
    """
    i, j = min(i, j), max(i, j)
    si, sj = experiment.variables[i], experiment.variables[j]
    deriv = ex.second_partial(experiment.formula, si.name, sj.name)
    joint = experiment.evaluation_point is EvaluationPoint.JOINT
    terms = []
    if i == j:
        for m, x in enumerate(si.values):
            b = _bindings(experiment, {i: x}, m if joint else None)
            terms.append(_term(experiment, deriv, b, x * x))
    elif joint:
        for m, (x, y) in enumerate(zip(si.values, sj.values)):
            b = _bindings(experiment, {i: x, j: y}, m)
            terms.append(_term(experiment, deriv, b, x * y))
    else:
        for x, y in itertools.product(si.values, sj.values):
            b = _bindings(experiment, {i: x, j: y}, None)
            terms.append(_term(experiment, deriv, b, x * y))
    return math.fsum(terms) / len(terms)


def influences(experiment: Experiment) -> InfluenceSet:
    n = experiment.n
    first = tuple(influence_first(experiment, i) for i in range(n))
    second = {
        (i, j): influence_second(experiment, i, j) for i in range(n) for j in range(i, n)
    }
    return InfluenceSet(first, {k: v for k, v in second.items() if v != 0}, experiment.mode)


def representative_point(
    experiment: Experiment,
    estimator: str | Callable[[ObservationSeries], float] = "mean-abs-deviation",
) -> np.ndarray:
    return np.array(
        [representative_inaccuracy(s, experiment.mode, estimator) for s in experiment.variables]
    )


# --------------------------------------------------------------------------
# Functionals


def _point(inf: InfluenceSet, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (inf.n,):
        raise MeasurementError(f"point has shape {p.shape}, expected ({inf.n},)")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise MeasurementError("inaccuracy magnitudes must be finite and nonnegative")
    return p


def delta_first(inf: InfluenceSet, p) -> float:
    p = _point(inf, p)
    return math.fsum(a * x for a, x in zip(inf.first, p))


def delta_second(inf: InfluenceSet, p) -> float:
    p = _point(inf, p)
    return math.fsum(a * p[i] * p[j] for (i, j), a in sorted(inf.second.items()))


def delta_total(inf: InfluenceSet, p) -> float:
    return delta_first(inf, p) + 0.5 * delta_second(inf, p)
