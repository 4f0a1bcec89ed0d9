"""Manifest files: a TOML document describing a chart, sample points and tasks.

    [manifold]
    name = "plane wave"
    coordinates = ["u", "v", "x", "y"]

    [parameters]
    b = 1.0

    [metric]
    g_uv = "1"
    g_uu = "2*(u*x^2 - u*y^2)"
    g_xx = "1"
    g_yy = "1"

    [points]
    values = [[0.5, 0.0, 0.2, -0.1]]
    box = { u = [-1, 1], v = [-1, 1], x = [-1, 1], y = [-1, 1] }
    count = 4
    seed = 0

    [[tasks]]
    task = "check"
    kind = "r_symmetric"
    r = 2

Metric keys name the two coordinates of the component (``g_uv``); omitted
components are zero.  ``points.values`` lists explicit points; a ``box``
adds ``count`` uniformly drawn points from a seeded generator.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from . import expr as ex
from . import geometry as geo

TASK_KINDS = ("classify", "check", "model", "penrose", "report")


class ManifestError(ValueError):
    pass


@dataclass
class Manifest:
    name: str
    coordinates: tuple
    parameters: dict
    metric: dict  # "g_ab" -> source string
    points: list
    box: dict | None
    count: int
    seed: int
    tasks: list = field(default_factory=list)
    source: str = ""

    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    @property
    def has_chart(self) -> bool:
        return bool(self.metric)

    def chart(self) -> geo.ChartSpec:
        if not self.metric:
            raise ManifestError("manifest has no [metric] section")
        comps = {}
        for key, src in self.metric.items():
            i, j = split_metric_key(key, self.coordinates)
            comps[(i, j)] = src
        try:
            return geo.ChartSpec.from_components(self.coordinates, comps, self.parameters, self.name)
        except ex.UnknownIdentifier as e:
            raise ManifestError(f"metric references undeclared identifier '{e.name}'") from e
        except ex.ExprSyntaxError as e:
            raise ManifestError(f"metric expression: {e}") from e

    def sample_points(self, count: int | None = None, seed: int | None = None) -> list:
        """Explicit points followed by box samples; ``count`` resamples the box only."""
        if count is not None:
            if self.box is None:
                raise ManifestError("--points needs a [points] box to sample from")
            return _box_points(self.box, self.coordinates, count, self.seed if seed is None else seed)
        pts = [tuple(float(x) for x in p) for p in self.points]
        if self.box is not None and self.count > 0:
            pts += _box_points(self.box, self.coordinates, self.count,
                               self.seed if seed is None else seed)
        return pts


def split_metric_key(key: str, coordinates) -> tuple:
    if not key.startswith("g_"):
        raise ManifestError(f"metric key {key!r} must look like g_<a><b>")
    body = key[2:]
    splits = [(a, body[len(a):]) for a in coordinates if body.startswith(a)]
    found = [(coordinates.index(a), coordinates.index(b)) for a, b in splits if b in coordinates]
    if not found:
        raise ManifestError(f"metric key {key!r} does not name two declared coordinates")
    if len(found) > 1:
        raise ManifestError(f"metric key {key!r} is ambiguous for these coordinate names")
    return found[0]


def _box_points(box, coordinates, count, seed):
    rng = np.random.default_rng(seed)
    lo = np.array([float(box[c][0]) for c in coordinates])
    hi = np.array([float(box[c][1]) for c in coordinates])
    return [tuple(map(float, lo + (hi - lo) * rng.random(len(coordinates)))) for _ in range(count)]


def _validate(m: Manifest) -> None:
    coords = m.coordinates
    if len(set(coords)) != len(coords):
        raise ManifestError("coordinate names must be distinct")
    for c in coords:
        if not c.isidentifier():
            raise ManifestError(f"coordinate name {c!r} is not an identifier")
    seen = set()
    for key, src in m.metric.items():
        i, j = split_metric_key(key, coords)
        pair = (min(i, j), max(i, j))
        if pair in seen:
            raise ManifestError(f"metric component {key!r} given twice")
        seen.add(pair)
        if not isinstance(src, (str, int, float)):
            raise ManifestError(f"metric component {key!r} must be a string or number")
        try:
            ex.parse(str(src), coords, list(m.parameters))
        except ex.UnknownIdentifier as e:
            raise ManifestError(f"{key}: undeclared identifier '{e.name}'") from e
        except ex.ExprSyntaxError as e:
            raise ManifestError(f"{key}: {e}") from e
    for p in m.points:
        if len(p) != len(coords):
            raise ManifestError(f"point {p} has {len(p)} coordinates, expected {len(coords)}")
    if m.box is not None:
        missing = [c for c in coords if c not in m.box]
        if missing:
            raise ManifestError(f"points box lacks ranges for {missing}")
        extra = [c for c in m.box if c not in coords]
        if extra:
            raise ManifestError(f"points box names undeclared coordinate '{extra[0]}'")
    for k, t in enumerate(m.tasks):
        kind = t.get("task")
        if kind not in TASK_KINDS:
            raise ManifestError(f"task {k}: unknown task {kind!r}; expected one of {TASK_KINDS}")
        if kind in ("classify", "check", "report", "penrose") and not m.metric:
            raise ManifestError(f"task {k} ({kind}) needs a [metric] section")
        if kind in ("classify", "check", "report") and not (m.points or m.box):
            raise ManifestError(f"task {k} ({kind}) needs at least one point")


def loads(text: str) -> Manifest:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ManifestError(f"parse error: {e}") from e
    known = {"manifold", "parameters", "metric", "points", "tasks"}
    unknown = set(doc) - known
    if unknown:
        raise ManifestError(f"unknown section(s): {sorted(unknown)}")
    manifold = doc.get("manifold", {})
    coords = tuple(manifold.get("coordinates", ()))
    if doc.get("metric") and not coords:
        raise ManifestError("[manifold] must declare coordinates")
    dim = manifold.get("dimension")
    if dim is not None and dim != len(coords):
        raise ManifestError(f"dimension {dim} does not match {len(coords)} coordinates")
    params = {str(k): float(v) for k, v in doc.get("parameters", {}).items()}
    metric = {k: str(v) for k, v in doc.get("metric", {}).items()}
    pts = doc.get("points", {})
    m = Manifest(
        name=str(manifold.get("name", "")),
        coordinates=coords,
        parameters=params,
        metric=metric,
        points=[list(p) for p in pts.get("values", [])],
        box=pts.get("box"),
        count=int(pts.get("count", 0 if "values" in pts else 3)),
        seed=int(pts.get("seed", 0)),
        tasks=list(doc.get("tasks", [])),
        source=text,
    )
    _validate(m)
    return m


def load_manifest(path) -> Manifest:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ManifestError(f"cannot read manifest: {e}") from e
    return loads(text)


def to_document(m: Manifest) -> dict:
    doc = {"manifold": {"name": m.name, "dimension": m.dimension,
                        "coordinates": list(m.coordinates)}}
    if m.parameters:
        doc["parameters"] = dict(m.parameters)
    if m.metric:
        doc["metric"] = dict(m.metric)
    pts = {}
    if m.points:
        pts["values"] = [list(map(float, p)) for p in m.points]
    if m.box is not None:
        pts["box"] = {k: list(v) for k, v in m.box.items()}
        pts["count"] = m.count
        pts["seed"] = m.seed
    if pts:
        doc["points"] = pts
    if m.tasks:
        doc["tasks"] = m.tasks
    return doc


def dumps(m: Manifest) -> str:
    return tomli_w.dumps(to_document(m))


def chart_manifest(chart: geo.ChartSpec, points=(), tasks=(), box=None, count=0) -> Manifest:
    """Manifest for a chart whose components are all expressions."""
    metric = {}
    n = chart.dimension
    for i in range(n):
        for j in range(i, n):
            comp = chart.metric[i][j]
            if not geo._is_expr(comp):
                raise ManifestError("chart has a non-expression metric component")
            if isinstance(comp, ex.Const) and comp.value == 0:
                continue
            metric[f"g_{chart.coordinates[i]}{chart.coordinates[j]}"] = ex.to_source(comp)
    return Manifest(chart.label, tuple(chart.coordinates), dict(chart.parameters), metric,
                    [list(p) for p in points], box, count, 0, list(tasks))
