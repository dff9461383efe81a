"""Problem files, solution records and shell geometry on disk.

Problem file (JSON)::

    {
      "name": "barrel-vault",
      "sigma": 1.0, "rho_g": 1.5,
      "nodes": [{"x": 0.0, "y": 0.0, "support": "pin_xyz"},
                {"x": 0.5, "y": 0.0, "load": [0, 0, -1]}, ...],
      "elements": [[0, 1], ...],                        (optional)
      "exclusions": [{"type": "disk", "center": [0.5, 0.5], "radius": 0.1}]
    }

``load`` is ``[fx, fy, fz]`` with ``fz`` positive up.  Instead of ``nodes`` a
file may name a standard builder: ``"builder": {"name": "square-distributed",
"args": {"divisions": 10}}``.

CSV node tables use the fixed columns ``node_id,x,y,z,w,label``; floats are
written with ``repr`` so they read back bit for bit.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import jsonschema
import numpy as np

from . import problems
from .geometry import FREE, SUPPORT_KINDS, GeometryError, ProblemSpec, shape_from_dict

CSV_COLUMNS = ("node_id", "x", "y", "z", "w", "label")

_NUMBER = {"type": "number"}
_POINT = {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}
SCHEMA = {
    "type": "object",
    "required": ["sigma", "rho_g"],
    "properties": {
        "name": {"type": "string"},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "rho_g": {"type": "number", "minimum": 0},
        "nodes": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "required": ["x", "y"],
                "properties": {
                    "id": {"type": "integer"},
                    "x": _NUMBER, "y": _NUMBER,
                    "support": {"enum": list(SUPPORT_KINDS)},
                    "load": {"type": "array", "items": _NUMBER, "minItems": 3, "maxItems": 3},
                },
                "additionalProperties": False,
            },
        },
        "elements": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer", "minimum": 0},
                      "minItems": 2, "maxItems": 2},
        },
        "exclusions": {
            "type": "array",
            "items": {"oneOf": [
                {"type": "object", "required": ["type", "center", "radius"],
                 "properties": {"type": {"const": "disk"}, "center": _POINT,
                                "radius": {"type": "number", "exclusiveMinimum": 0}}},
                {"type": "object", "required": ["type", "vertices"],
                 "properties": {"type": {"const": "polygon"},
                                "vertices": {"type": "array", "items": _POINT, "minItems": 3}}},
            ]},
        },
        "builder": {
            "type": "object", "required": ["name"],
            "properties": {"name": {"enum": sorted(problems.BUILDERS)},
                           "args": {"type": "object"}},
        },
    },
    "oneOf": [{"required": ["nodes"]}, {"required": ["builder"]}],
}


class ProblemFileError(ValueError):
    """Schema or consistency violation, with the offending location."""


def _where(path):
    out = "$"
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def problem_from_dict(data, source="<problem>"):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            if not e.absolute_path and e.validator == "required":
                lines.append(f"{source}: {e.message} (sigma and rho_g fix the unit system)")
            elif not e.absolute_path and e.validator == "oneOf":
                lines.append(f"{source}: give exactly one of 'nodes' or 'builder'")
            else:
                lines.append(f"{source}: {_where(e.absolute_path)}: {e.message}")
        raise ProblemFileError("\n".join(lines))
    sigma, rho_g = float(data["sigma"]), float(data["rho_g"])
    try:
        if "builder" in data:
            b = data["builder"]
            spec = problems.BUILDERS[b["name"]](**b.get("args", {}))
            return ProblemSpec(spec.nodes, spec.supports, spec.loads, sigma, rho_g,
                               spec.exclusions, spec.elements, data.get("name", spec.name))
        nodes = data["nodes"]
        for i, nd in enumerate(nodes):
            if "id" in nd and nd["id"] != i:
                raise ProblemFileError(
                    f"{source}: $.nodes[{i}].id: expected {i}, ids must follow list order")
        xy = np.array([[nd["x"], nd["y"]] for nd in nodes], dtype=float)
        supports = [nd.get("support", FREE) for nd in nodes]
        loads = np.array([nd.get("load", [0.0, 0.0, 0.0]) for nd in nodes], dtype=float)
        elements = data.get("elements")
        if elements is not None:
            elements = np.array(elements, dtype=np.int64).reshape(-1, 2)
            bad = np.flatnonzero(elements.max(axis=1) >= len(nodes)) if elements.size else []
            if len(bad):
                raise ProblemFileError(
                    f"{source}: $.elements[{int(bad[0])}]: node index out of range")
        shapes = [shape_from_dict(d) for d in data.get("exclusions", [])]
        return ProblemSpec(xy, supports, loads, sigma, rho_g, shapes, elements,
                           data.get("name", Path(source).stem))
    except (GeometryError, TypeError) as exc:
        raise ProblemFileError(f"{source}: {exc}") from exc


def parse_problem(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return problem_from_dict(data, str(path))


def problem_to_dict(spec: ProblemSpec):
    nodes = []
    for i in range(spec.n):
        nd = {"x": float(spec.nodes[i, 0]), "y": float(spec.nodes[i, 1])}
        if spec.supports[i] != FREE:
            nd["support"] = str(spec.supports[i])
        if np.any(spec.loads[i] != 0.0):
            nd["load"] = [float(v) for v in spec.loads[i]]
        nodes.append(nd)
    out = {"name": spec.name, "sigma": spec.sigma, "rho_g": spec.rho_g, "nodes": nodes}
    if spec.elements is not None:
        out["elements"] = spec.elements.tolist()
    if spec.exclusions:
        out["exclusions"] = [s.to_dict() for s in spec.exclusions]
    return out


def dump_problem(spec: ProblemSpec, path):
    """Write ``spec`` as JSON, one node or element per line."""
    doc = problem_to_dict(spec)
    head = {k: v for k, v in doc.items() if k not in ("nodes", "elements", "exclusions")}
    lines = ["{"] + [f" {json.dumps(k)}: {json.dumps(v)}," for k, v in head.items()]
    blocks = [(k, doc[k]) for k in ("nodes", "elements", "exclusions") if k in doc]
    for bi, (key, items) in enumerate(blocks):
        body = ",\n".join("  " + json.dumps(it) for it in items)
        tail = "" if bi == len(blocks) - 1 else ","
        lines.append(f" {json.dumps(key)}: [\n{body}\n ]{tail}")
    Path(path).write_text("\n".join(lines) + "\n}\n")


# --------------------------------------------------------------------------- shells

def _mkdir(out):
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    return out


def write_nodes_csv(path, nodes, z, w, labels):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for i in range(len(nodes)):
            wr.writerow([i, repr(float(nodes[i, 0])), repr(float(nodes[i, 1])),
                         repr(float(z[i])), repr(float(w[i])), labels[i]])


def read_nodes_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: expected columns {','.join(CSV_COLUMNS)}")
    col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
    return {"node_id": np.array([int(r["node_id"]) for r in rows], dtype=int),
            "x": col("x"), "y": col("y"), "z": col("z"), "w": col("w"),
            "label": [r["label"] for r in rows]}


def export_shell(shell, out_dir, formats=("obj", "json", "csv"), stem="shell"):
    """Write ``stem.obj`` / ``stem.json`` / ``stem.csv``; returns the paths."""
    out = _mkdir(out_dir)
    paths = {}
    if "obj" in formats:
        p = out / f"{stem}.obj"
        lines = ["# grid-shell centrelines, one polyline per element"]
        base = 1
        for poly in shell.polylines:
            lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in poly.tolist()]
        for poly in shell.polylines:
            lines.append("l " + " ".join(str(base + i) for i in range(len(poly))))
            base += len(poly)
        p.write_text("\n".join(lines) + "\n")
        paths["obj"] = p
    if "json" in formats:
        p = out / f"{stem}.json"
        doc = {
            "volume": shell.volume,
            "arbitrary_elevation": shell.arbitrary_elevation,
            "elements": [int(e) for e in shell.elements],
            "areas": [a.tolist() for a in shell.areas],
            "lumped_mass": shell.lumped_mass.tolist(),
            "labels": list(map(str, shell.labels)),
        }
        p.write_text(json.dumps(doc, indent=1) + "\n")
        paths["json"] = p
    if "csv" in formats:
        p = out / f"{stem}.csv"
        w = shell.w if shell.w is not None else np.zeros(len(shell.z))
        write_nodes_csv(p, shell.nodes, shell.z, w, shell.labels)
        paths["csv"] = p
    return paths


def read_obj_polylines(path):
    verts, polys = [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("v "):
            verts.append([float(t) for t in line.split()[1:4]])
        elif line.startswith("l "):
            polys.append([int(t) - 1 for t in line.split()[1:]])
    verts = np.array(verts).reshape(-1, 3)
    return [verts[idx] for idx in polys]


# --------------------------------------------------------------------------- solutions

def write_solution(result, out_dir, extra=None):
    """Solution record: status, volume and per-element / per-node fields."""
    out = _mkdir(out_dir)
    doc = {"status": result.status, "kind": result.kind, "volume": result.volume,
           "sigma": result.spec.sigma, "rho_g": result.spec.rho_g,
           "backend": result.solution.backend, "iterations": result.solution.iterations,
           "residuals": {k: float(v) for k, v in result.solution.residuals.items()},
           "pairs": result.gs.pairs.tolist()}
    if result.primal is not None:
        doc["primal"] = {k: np.asarray(v).tolist() for k, v in result.primal.items()}
        doc["dual"] = {k: np.asarray(v).tolist() for k, v in result.dual.items()}
    if result.solution.ray is not None:
        doc["certificate"] = {k: (np.asarray(v).tolist() if np.ndim(v) else float(v))
                              for k, v in result.solution.ray.items()}
    if extra:
        doc.update(extra)
    p = out / "solution.json"
    p.write_text(json.dumps(doc) + "\n")
    return p


def read_solution(out_dir):
    doc = json.loads((Path(out_dir) / "solution.json").read_text())
    for part in ("primal", "dual"):
        if part in doc:
            doc[part] = {k: np.asarray(v, dtype=float) for k, v in doc[part].items()}
    doc["pairs"] = np.asarray(doc["pairs"], dtype=np.int64).reshape(-1, 2)
    return doc
