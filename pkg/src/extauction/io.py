"""Instance files, report serialization.

Instance files are JSON with a versioned schema (``"schema": 1``); unknown
fields are rejected so fixtures stay honest.  Loading validates the domain
conditions for n <= 12; larger instances must carry ``declared_L``.
Report emission is deterministic: stable column order, floats at 12
significant digits, identical inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

from .experiments import ExperimentReport
from .sets import mask_of, members
from .valuations import (
    SHAPES,
    AdditiveModel,
    DegreeWeight,
    GraphConcaveModel,
    LinearModel,
    Model,
    ScalarModel,
    TableModel,
    TableWeight,
    ValuationProfile,
    Weight,
    check_conditions,
)

SCHEMA_VERSION = 1


class InstanceError(ValueError):
    """Malformed or invalid instance file."""


def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise InstanceError(f"{where}: unknown fields {sorted(unknown)} (strict schema)")
    missing = required - set(obj)
    if missing:
        raise InstanceError(f"{where}: missing fields {sorted(missing)}")


def _set_key(mask: int) -> str:
    return ",".join(str(i) for i in members(mask))


def _parse_set_key(key: str, n: int, where: str) -> int:
    if key.strip() == "":
        raise InstanceError(f"{where}: empty set key cannot contain the agent")
    try:
        ids = [int(p) for p in key.split(",")]
    except ValueError:
        raise InstanceError(f"{where}: bad set key {key!r}") from None
    if any(i < 0 or i >= n for i in ids):
        raise InstanceError(f"{where}: set key {key!r} out of range for n={n}")
    return mask_of(ids)


def _weight_to_json(w: Weight) -> dict:
    if isinstance(w, DegreeWeight):
        return {"kind": "degree", "base": w.base, "scale": w.scale, "shape": w.shape}
    if isinstance(w, TableWeight):
        return {"kind": "table", "values": {_set_key(m): v for m, v in sorted(w.values.items())}}
    raise InstanceError(f"unserializable weight {w!r}")


def _weight_from_json(obj: dict, n: int, where: str) -> Weight:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InstanceError(f"{where}: weight must be an object with a 'kind'")
    if obj["kind"] == "degree":
        _require_keys(obj, {"kind", "base", "scale", "shape"}, {"kind"}, where)
        shape = obj.get("shape", "linear")
        if shape not in SHAPES:
            raise InstanceError(f"{where}: unknown shape {shape!r} (want one of {sorted(SHAPES)})")
        return DegreeWeight(
            base=float(obj.get("base", 1.0)),
            scale=float(obj.get("scale", 1.0)),
            shape=shape,
        )
    if obj["kind"] == "table":
        _require_keys(obj, {"kind", "values"}, {"kind", "values"}, where)
        values = {
            _parse_set_key(k, n, where): float(v) for k, v in obj["values"].items()
        }
        return TableWeight(values)
    raise InstanceError(f"{where}: unknown weight kind {obj['kind']!r}")


def _model_to_json(m: Model) -> dict:
    if isinstance(m, TableModel):
        return {
            "model": "table",
            "values": {_set_key(s): v for s, v in sorted(m.values.items())},
        }
    if isinstance(m, AdditiveModel):
        return {"model": "additive", "t": m.t, "weight": _weight_to_json(m.weight)}
    if isinstance(m, ScalarModel):
        return {"model": "scalar", "t": m.t, "weight": _weight_to_json(m.weight)}
    if isinstance(m, LinearModel):
        return {
            "model": "linear",
            "t": m.t,
            "weight": _weight_to_json(m.weight),
            "offset": _weight_to_json(m.offset),
        }
    if isinstance(m, GraphConcaveModel):
        return {"model": "graph_concave", "t": m.t, "beta": m.beta, "shape": m.shape}
    raise InstanceError(f"unserializable model {m!r}")


def _model_from_json(obj: dict, i: int, n: int) -> Model:
    where = f"agents[{i}]"
    if not isinstance(obj, dict) or "model" not in obj:
        raise InstanceError(f"{where}: agent entry must be an object with a 'model'")
    kind = obj["model"]
    if kind == "table":
        _require_keys(obj, {"model", "values"}, {"model", "values"}, where)
        values = {}
        for k, v in obj["values"].items():
            mask = _parse_set_key(k, n, where)
            if not (mask >> i) & 1:
                raise InstanceError(f"{where}: table key {k!r} does not contain agent {i}")
            values[mask] = float(v)
        return TableModel(values)
    if kind == "additive":
        _require_keys(obj, {"model", "t", "weight"}, {"model", "t", "weight"}, where)
        return AdditiveModel(float(obj["t"]), _weight_from_json(obj["weight"], n, where))
    if kind == "scalar":
        _require_keys(obj, {"model", "t", "weight"}, {"model", "t", "weight"}, where)
        return ScalarModel(float(obj["t"]), _weight_from_json(obj["weight"], n, where))
    if kind == "linear":
        _require_keys(
            obj, {"model", "t", "weight", "offset"}, {"model", "t", "weight", "offset"}, where
        )
        return LinearModel(
            float(obj["t"]),
            _weight_from_json(obj["weight"], n, where),
            _weight_from_json(obj["offset"], n, where),
        )
    if kind == "graph_concave":
        _require_keys(obj, {"model", "t", "beta", "shape"}, {"model", "t"}, where)
        shape = obj.get("shape", "sqrt")
        if shape not in SHAPES:
            raise InstanceError(f"{where}: unknown shape {shape!r} (want one of {sorted(SHAPES)})")
        return GraphConcaveModel(float(obj["t"]), float(obj.get("beta", 1.0)), shape)
    raise InstanceError(f"{where}: unknown model {kind!r}")


def _instance_doc(profile: ValuationProfile) -> dict:
    doc = {
        "schema": SCHEMA_VERSION,
        "n": profile.n,
        "agents": [_model_to_json(m) for m in profile.models],
    }
    if profile.graph is not None:
        doc["graph"] = [list(nb) for nb in profile.graph]
    if profile.declared_L is not None:
        doc["declared_L"] = profile.declared_L
    return doc


def instance_digest(profile: ValuationProfile) -> str:
    """Content hash of the canonical instance document, for replayable reports."""
    payload = json.dumps(_instance_doc(profile), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def save_instance(profile: ValuationProfile, path) -> None:
    Path(path).write_text(json.dumps(_instance_doc(profile), indent=2, sort_keys=True) + "\n")


def load_instance(path, validate: bool = True) -> ValuationProfile:
    """Load and validate an instance file.

    Raises :class:`InstanceError` on schema mismatch, malformed entries, or
    (for n <= 12) domain-condition violations, naming the witness sets.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as e:
        raise InstanceError(f"cannot read instance file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InstanceError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise InstanceError(f"{path}: top level must be an object")
    _require_keys(
        doc,
        {"schema", "n", "agents", "graph", "declared_L", "name"},
        {"schema", "n", "agents"},
        str(path),
    )
    if doc["schema"] != SCHEMA_VERSION:
        raise InstanceError(
            f"{path}: schema version {doc['schema']!r} unsupported (want {SCHEMA_VERSION})"
        )
    n = doc["n"]
    if not isinstance(n, int) or n < 1:
        raise InstanceError(f"{path}: n must be a positive integer")
    agents = doc["agents"]
    if len(agents) != n:
        raise InstanceError(f"{path}: {len(agents)} agent entries for n={n}")
    graph = doc.get("graph")
    if graph is not None:
        if len(graph) != n:
            raise InstanceError(f"{path}: adjacency list length != n")
        for i, nb in enumerate(graph):
            for j in nb:
                if not isinstance(j, int) or j < 0 or j >= n or j == i:
                    raise InstanceError(f"{path}: bad neighbor {j!r} of agent {i}")
                if i not in graph[j]:
                    raise InstanceError(f"{path}: graph must be symmetric ({i}-{j})")
    models = [_model_from_json(a, i, n) for i, a in enumerate(agents)]
    profile = ValuationProfile(models, graph=graph, declared_L=doc.get("declared_L"))
    if validate and n <= 12:
        violations = check_conditions(profile)
        if violations:
            listing = "; ".join(v.describe() for v in violations[:5])
            raise InstanceError(
                f"{path}: instance violates the valuation conditions: {listing}"
            )
    return profile


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def _render(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def emit_report(report: ExperimentReport, fmt: str, path) -> None:
    """Write a report as CSV rows or a JSON document, deterministically."""
    path = Path(path)
    try:
        if fmt == "csv":
            lines = [",".join(report.columns)]
            for row in report.rows:
                lines.append(",".join(_render(x) for x in row))
            path.write_text("\n".join(lines) + "\n")
        elif fmt == "json":
            doc = {
                "schema": SCHEMA_VERSION,
                "columns": list(report.columns),
                "rows": [[_render(x) if isinstance(x, float) else x for x in row] for row in report.rows],
                "summary": {k: _render(v) if isinstance(v, float) else v
                            for k, v in sorted(report.summary.items())},
            }
            path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    except OSError as e:
        raise OSError(f"cannot write report to {path}: {e}") from e
