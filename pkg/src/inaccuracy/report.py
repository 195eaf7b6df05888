"""Request loading, the end-to-end analysis pipeline, and report rendering."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import expr as ex
from . import measure, quadric, scale
from .measure import EvaluationPoint, InfluenceSet, Mode

BUILTIN_PREFIX = "builtin:"

OPTION_DEFAULTS = {
    "rank_tolerance": quadric.DEFAULT_RANK_TOL,
    "estimator": "mean-abs-deviation",
    "evaluation_point": EvaluationPoint.OTHERS_AT_MEAN.value,
}

NOTES = [
    "mean gradient over observations equals the gradient at the mean point "
    "because the surface is at most quadratic",
    "quadric normalised with last linear coefficient -1/2 so its zero set is "
    "exactly y_{n+1} = delta_total; the alternative -1 normalisation yields the "
    "same kind and type",
]


class InputError(Exception):
    """Request or coefficient file does not satisfy the input schema."""


REQUEST_SCHEMA = {
    "type": "object",
    "required": ["formula", "variables"],
    "properties": {
        "title": {"type": "string"},
        "formula": {"type": "string", "minLength": 1},
        "mode": {"enum": ["absolute", "relative"]},
        "data": {"type": "string"},
        "constants": {"type": "object", "additionalProperties": {"type": "number"}},
        "variables": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name"],
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z_0-9]*$"},
                    "values": {"type": "array", "minItems": 1, "items": {"type": "number"}},
                    "column": {"type": "string"},
                    "inaccuracy": {"type": "number", "minimum": 0},
                },
                "additionalProperties": False,
            },
        },
        "options": {
            "type": "object",
            "properties": {
                "rank_tolerance": {"type": "number", "exclusiveMinimum": 0},
                "estimator": {"enum": ["mean-abs-deviation", "max-deviation", "user"]},
                "evaluation_point": {"enum": [e.value for e in EvaluationPoint]},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

COEFFICIENT_SCHEMA = {
    "type": "object",
    "required": ["first"],
    "properties": {
        "names": {"type": "array", "items": {"type": "string"}},
        "mode": {"enum": ["absolute", "relative"]},
        "first": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "second": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number", "minimum": 0}},
        },
    },
    "additionalProperties": False,
}


def _field_path(err: jsonschema.ValidationError) -> str:
    out = ""
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<document>"


def _validate(doc: Any, schema: dict, what: str):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as err:
        raise InputError(f"{what}: field {_field_path(err)}: {err.message}") from None


# --------------------------------------------------------------------------
# Requests


@dataclass
class AnalysisRequest:
    formula: str
    variables: dict[str, list[float]]
    constants: dict[str, float] = field(default_factory=dict)
    mode: str = "relative"
    options: dict[str, Any] = field(default_factory=lambda: dict(OPTION_DEFAULTS))
    inaccuracies: dict[str, float] | None = None
    title: str | None = None

    def experiment(self) -> measure.Experiment:
        return measure.Experiment.from_text(
            self.formula,
            self.variables,
            self.constants,
            self.mode,
            self.options["evaluation_point"],
        )

    def echo(self) -> dict:
        d = {
            "formula": self.formula,
            "mode": self.mode,
            "variables": [{"name": k, "values": v} for k, v in self.variables.items()],
            "constants": self.constants,
            "options": self.options,
        }
        if self.title:
            d["title"] = self.title
        if self.inaccuracies is not None:
            for block in d["variables"]:
                block["inaccuracy"] = self.inaccuracies[block["name"]]
        return d


def resolve_path(path: str | Path) -> Path:
    s = str(path)
    if s.startswith(BUILTIN_PREFIX):
        name = s[len(BUILTIN_PREFIX):]
        ref = resources.files("inaccuracy.data") / f"{name}.json"
        if not ref.is_file():
            raise InputError(f"no bundled dataset named {name!r}")
        return Path(str(ref))
    return Path(path)


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except json.JSONDecodeError as err:
        raise InputError(f"{path}: invalid JSON at line {err.lineno}: {err.msg}") from None


def _read_columns(path: Path, delimiter: str = ",") -> dict[str, list[float]]:
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise InputError(f"data file {path}: no such file") from None
    reader = csv.DictReader(io.StringIO(text), delimiter=delimiter)
    cols: dict[str, list[float]] = {name.strip(): [] for name in reader.fieldnames or []}
    for lineno, row in enumerate(reader, start=2):
        for name, cell in row.items():
            if name is None or cell is None or not cell.strip():
                continue
            try:
                cols[name.strip()].append(float(cell))
            except ValueError:
                raise InputError(
                    f"data file {path}: line {lineno}, column {name!r}: not a number: {cell!r}"
                ) from None
    return cols


def request_from_dict(doc: Any, base: Path | None = None) -> AnalysisRequest:
    _validate(doc, REQUEST_SCHEMA, "request")
    options = {**OPTION_DEFAULTS, **doc.get("options", {})}
    columns = None
    if "data" in doc:
        data_path = Path(doc["data"])
        if base is not None and not data_path.is_absolute():
            data_path = base / data_path
        columns = _read_columns(data_path)

    variables: dict[str, list[float]] = {}
    inaccuracies: dict[str, float] = {}
    for k, block in enumerate(doc["variables"]):
        name = block["name"]
        if name in variables:
            raise InputError(f"request: field variables[{k}].name: duplicate {name!r}")
        if "values" in block:
            values = block["values"]
        elif columns is not None:
            col = block.get("column", name)
            if col not in columns:
                raise InputError(f"request: field variables[{k}].column: {col!r} not in data file")
            values = columns[col]
            if not values:
                raise InputError(f"request: field variables[{k}].column: {col!r} is empty")
        else:
            raise InputError(f"request: field variables[{k}]: needs 'values' or a 'data' file")
        variables[name] = [float(v) for v in values]
        if "inaccuracy" in block:
            inaccuracies[name] = float(block["inaccuracy"])

    if options["estimator"] == "user":
        missing = [n for n in variables if n not in inaccuracies]
        if missing:
            raise InputError(
                f"request: field variables: estimator 'user' needs 'inaccuracy' for {missing}"
            )
    return AnalysisRequest(
        formula=doc["formula"],
        variables=variables,
        constants={k: float(v) for k, v in doc.get("constants", {}).items()},
        mode=doc.get("mode", "relative"),
        options=options,
        inaccuracies=inaccuracies if options["estimator"] == "user" else None,
        title=doc.get("title"),
    )


def load_request(path: str | Path) -> AnalysisRequest:
    path = resolve_path(path)
    return request_from_dict(_read_json(path), base=path.parent)


def influences_from_dict(doc: Any) -> tuple[InfluenceSet, list[str]]:
    _validate(doc, COEFFICIENT_SCHEMA, "coefficients")
    first = doc["first"]
    n = len(first)
    second = doc.get("second", [[0.0] * n for _ in range(n)])
    if len(second) != n or any(len(row) != n for row in second):
        raise InputError(f"coefficients: field second: expected a {n}x{n} matrix")
    m = np.array(second, dtype=float)
    if not np.array_equal(m, m.T):
        raise InputError("coefficients: field second: matrix is not symmetric")
    names = doc.get("names") or [f"x{i + 1}" for i in range(n)]
    if len(names) != n:
        raise InputError(f"coefficients: field names: expected {n} names, got {len(names)}")
    return InfluenceSet.from_matrix(first, m, doc.get("mode", "relative")), names


def load_influences(path: str | Path) -> tuple[InfluenceSet, list[str]]:
    return influences_from_dict(_read_json(resolve_path(path)))


# --------------------------------------------------------------------------
# Reports


def _lists(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {k: _lists(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_lists(v) for v in x]
    return x


@dataclass
class AnalysisReport:
    """Everything the pipeline produced, as plain JSON-compatible data."""

    request: dict | None
    variables: list[str]
    mode: str
    surface: dict
    quadric: dict
    eigenvalues: list[float]
    rank: int
    canonical: dict | None
    influence: dict
    k_first: float
    sample_means: list[float] | None = None
    representative_inaccuracies: list[float] | None = None
    estimator: str | None = None
    deltas_at_mean: dict | None = None
    k_second: float | None = None
    gradient_at_mean: list[float] | None = None
    criterion_sum: float | None = None
    warnings: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return _lists(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisReport":
        return cls(**d)

    def to_text(self) -> str:
        return render_text(self)


def _canonical_dict(cf: quadric.CanonicalForm) -> dict:
    return {
        "equation": cf.describe(),
        "rank": cf.rank,
        "eigenvalues": cf.eigenvalues,
        "signs": cf.signs,
        "parameters": cf.parameters,
        "rotation": cf.rotation,
        "translation": cf.translation,
        "linear": cf.linear,
        "q": cf.q,
        "concentrated": cf.concentrated,
        "residual_constant": cf.residual_constant,
    }


def _surface_part(inf: InfluenceSet, tol: float):
    model = quadric.build_quadric(inf)
    kind = quadric.classify(model, tol)
    eig = quadric.eigen_symmetric(model.quadratic_block, tol)
    canonical = None
    if kind.kind not in (quadric.Kind.HYPERPLANE, quadric.Kind.LINE):
        canonical = _canonical_dict(quadric.canonicalize(model, tol))
    warnings = []
    if inf.degenerate:
        warnings.append("all influence coefficients are zero: the surface is the ideal plane")
    thr = quadric.zero_threshold(eig.values, tol)
    for lam in eig.values:
        if lam != 0 and thr / 1e3 < abs(lam) < thr * 1e3:
            warnings.append(
                f"eigenvalue {lam:.3e} is within three decades of the rank threshold "
                f"{thr:.3e}; the classification is tolerance-sensitive"
            )
    surface = {"kind": kind.kind.value, "type": kind.type, "label": str(kind), "n": kind.n}
    quad = {"A": model.A, "b": model.b}
    return surface, quad, eig, canonical, warnings


def _influence_dict(inf: InfluenceSet) -> dict:
    return {"first": list(inf.first), "second": inf.second_matrix()}


def analyze_request(req: AnalysisRequest) -> AnalysisReport:
    experiment = req.experiment()
    names = experiment.names
    inf = measure.influences(experiment)
    if req.options["estimator"] == "user":
        point = np.array([req.inaccuracies[n] for n in names])
    else:
        point = measure.representative_point(experiment, req.options["estimator"])
    tol = float(req.options["rank_tolerance"])
    surface, quad, eig, canonical, warnings = _surface_part(inf, tol)
    acc = scale.accuracy_report(inf, point)
    d1 = measure.delta_first(inf, point)
    d2 = measure.delta_second(inf, point)
    report = AnalysisReport(
        request=req.echo(),
        variables=names,
        mode=experiment.mode.value,
        sample_means=experiment.means(),
        representative_inaccuracies=point,
        estimator=req.options["estimator"],
        influence=_influence_dict(inf),
        deltas_at_mean={"first": d1, "second": d2, "total": d1 + 0.5 * d2},
        quadric=quad,
        eigenvalues=eig.values,
        rank=eig.rank,
        surface=surface,
        canonical=canonical,
        k_first=acc.k_first,
        k_second=acc.k_second,
        gradient_at_mean=acc.gradient_at_mean,
        criterion_sum=acc.criterion_sum,
        warnings=warnings,
        notes=list(NOTES),
    )
    return AnalysisReport.from_dict(report.to_dict())


def classify_influences(
    inf: InfluenceSet, names: list[str], tol: float = quadric.DEFAULT_RANK_TOL
) -> AnalysisReport:
    surface, quad, eig, canonical, warnings = _surface_part(inf, tol)
    report = AnalysisReport(
        request=None,
        variables=names,
        mode=inf.mode.value,
        influence=_influence_dict(inf),
        quadric=quad,
        eigenvalues=eig.values,
        rank=eig.rank,
        surface=surface,
        canonical=canonical,
        k_first=scale.accuracy_first(inf),
        warnings=warnings,
        notes=[NOTES[1]],
    )
    return AnalysisReport.from_dict(report.to_dict())


# --------------------------------------------------------------------------
# Human-readable rendering


def _g(x) -> str:
    if x is None:
        return "-"
    return f"{x:.4g}"


def _vec(xs) -> str:
    return "(" + ", ".join(_g(x) for x in xs) + ")"


def render_text(r: AnalysisReport) -> str:
    out = []
    w = out.append
    if r.request and r.request.get("title"):
        w(r.request["title"])
    if r.request:
        w(f"formula            {r.request['formula']}")
    w(f"mode               {r.mode}")
    w(f"variables          {', '.join(r.variables)}")
    if r.sample_means is not None:
        w(f"sample means       {_vec(r.sample_means)}")
        w(f"inaccuracies       {_vec(r.representative_inaccuracies)}  [{r.estimator}]")
    w("")
    w("influence coefficients")
    w(f"  first order      {_vec(r.influence['first'])}")
    for i, row in enumerate(r.influence["second"]):
        label = "  second order     " if i == 0 else "                   "
        w(label + _vec(row))
    if r.deltas_at_mean is not None:
        d = r.deltas_at_mean
        w("")
        w("inaccuracy at the mean point")
        w(f"  first degree     {_g(d['first'])}")
        w(f"  second order     {_g(d['second'])}")
        w(f"  total            {_g(d['total'])}")
    w("")
    w("quadric  y^T A y + 2 b^T y = 0")
    for i, row in enumerate(r.quadric["A"]):
        w(("  A = " if i == 0 else "      ") + _vec(row))
    w(f"  b = {_vec(r.quadric['b'])}")
    w(f"  eigenvalues      {_vec(r.eigenvalues)}")
    w(f"  rank             {r.rank}")
    w(f"  surface          {r.surface['label']}")
    if r.canonical is not None:
        c = r.canonical
        w(f"  canonical form   {c['equation']}")
        w(f"  parameters       {_vec(c['parameters'])}")
        w(f"  signs            {_vec(c['signs'])}")
        w(f"  rotated linear   {_vec(c['linear'])}")
        w(f"  q                {_g(c['q'])}")
        w(f"  translation      {_vec(c['translation'])}")
        for i, row in enumerate(c["rotation"]):
            w(("  rotation         " if i == 0 else "                   ") + _vec(row))
    w("")
    w("accuracy")
    w(f"  k (first degree)  {_g(r.k_first)}")
    if r.k_second is not None:
        w(f"  k (second degree) {_g(r.k_second)}")
        w(f"  gradient at mean  {_vec(r.gradient_at_mean)}")
        w(f"  criterion sum     {_g(r.criterion_sum)}")
    for msg in r.warnings:
        w(f"warning: {msg}")
    for msg in r.notes:
        w(f"note: {msg}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# Surface samples


def grid_axes(n: int, lower, upper, points) -> list[np.ndarray]:
    def expand(x, what):
        xs = list(np.atleast_1d(np.asarray(x, dtype=float)))
        if len(xs) == 1:
            xs = xs * n
        if len(xs) != n:
            raise InputError(f"grid: {what} has {len(xs)} entries, expected 1 or {n}")
        return xs

    lo, hi = expand(lower, "lower"), expand(upper, "upper")
    pts = [int(p) for p in expand(points, "points")]
    axes = []
    for k in range(n):
        if pts[k] < 1:
            raise InputError("grid: resolution must be positive")
        if not (math.isfinite(lo[k]) and math.isfinite(hi[k])) or lo[k] > hi[k]:
            raise InputError(f"grid: invalid bounds [{lo[k]}, {hi[k]}] on axis {k + 1}")
        if lo[k] < 0:
            raise InputError("grid: inaccuracy magnitudes are nonnegative; lower bound < 0")
        if pts[k] == 1 and lo[k] != hi[k]:
            raise InputError(f"grid: one point needs equal bounds on axis {k + 1}")
        axes.append(np.linspace(lo[k], hi[k], pts[k]))
    return axes


def surface_grid(inf: InfluenceSet, lower, upper, points) -> np.ndarray:
    """Rows ``(p_1, ..., p_n, delta_total)`` over a tensor grid, last axis fastest."""
    axes = grid_axes(inf.n, lower, upper, points)
    mesh = np.meshgrid(*axes, indexing="ij")
    P = np.column_stack([m.ravel() for m in mesh])
    heights = np.array([measure.delta_total(inf, p) for p in P])
    return np.column_stack([P, heights])


def write_grid(rows: np.ndarray, names: list[str], stream, delimiter: str = ",") -> None:
    writer = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
    writer.writerow([*names, "delta_total"])
    for row in rows:
        writer.writerow([repr(float(x)) for x in row])
