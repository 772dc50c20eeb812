"""Problem spec parsing and byte-stable JSON/CSV output.

Complex numbers in specs are either plain numbers or ``[re, im]`` pairs.
Floats are always written with 17 significant digits so identical runs
produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from numbers import Number

import numpy as np

from .errors import DimensionMismatch, InputError, InvalidMatrix
from .limits import LimitModel
from .problem import Problem


def fmt_float(x: float) -> str:
    return "%.17g" % x


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def parse_complex(x) -> complex:
    if isinstance(x, bool):
        raise InvalidMatrix(f"expected a number, got {x!r}")
    if isinstance(x, Number):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
            isinstance(v, Number) and not isinstance(v, bool) for v in x):
        return complex(float(x[0]), float(x[1]))
    raise InvalidMatrix(f"expected a number or an [re, im] pair, got {x!r}")


def parse_vector(obj) -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise InvalidMatrix("vector must be a non-empty list")
    return np.array([parse_complex(v) for v in obj], dtype=np.complex128)


def parse_matrix(obj) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(row, list) for row in obj):
        raise InvalidMatrix("matrix must be a non-empty list of rows")
    rows = [parse_vector(row) for row in obj]
    if len({r.size for r in rows}) != 1:
        raise DimensionMismatch("matrix rows have different lengths")
    return np.vstack(rows)


def _parse_a(obj) -> np.ndarray:
    if isinstance(obj, dict):
        if set(obj) != {"diagonal"}:
            raise InputError(f"unknown A shorthand keys {sorted(obj)}")
        return np.diag(parse_vector(obj["diagonal"]))
    return parse_matrix(obj)


def _parse_b(obj, n: int) -> np.ndarray:
    if isinstance(obj, dict):
        if len(obj) != 1:
            raise InputError(f"B shorthand must have exactly one key, got {sorted(obj)}")
        (kind, body), = obj.items()
        if kind == "rank_one":
            e = parse_vector(body["e"])
            if e.size != n:
                raise DimensionMismatch(f"e has length {e.size}, A is {n} x {n}")
            scale = parse_complex(body.get("scale", 1.0))
            return Problem.rank_one(np.zeros((n, n)), e, scale=scale).b
        if kind == "rank_k":
            vecs = [parse_vector(v) for v in body["vectors"]]
            if any(v.size != n for v in vecs):
                raise DimensionMismatch("rank_k vectors must match the size of A")
            return Problem.from_vectors(np.zeros((n, n)), vecs).b
        raise InputError(f"unknown B shorthand {kind!r}")
    return parse_matrix(obj)


@dataclass
class ProblemSpec:
    problem: Problem
    run: dict = field(default_factory=dict)
    name: str = ""


def problem_from_dict(spec: dict) -> ProblemSpec:
    if not isinstance(spec, dict) or "A" not in spec or "B" not in spec:
        raise InputError("problem spec needs keys 'A' and 'B'")
    a = _parse_a(spec["A"])
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"A must be square, got {a.shape}")
    b = _parse_b(spec["B"], a.shape[0])
    sector = spec.get("sector") or {}
    problem = Problem(a, b, sigma1=sector.get("sigma1"), sigma2=sector.get("sigma2"))
    run = spec.get("run") or {}
    if not isinstance(run, dict):
        raise InputError("'run' must be an object")
    return ProblemSpec(problem, run, str(spec.get("name", "")))


def parse_density(obj) -> LimitModel:
    if obj in ("uniform", None):
        return LimitModel.uniform()
    if obj == "linear":
        return LimitModel.linear()
    if isinstance(obj, dict) and "grid" in obj:
        return LimitModel.from_grid(obj["grid"]["nodes"], obj["grid"]["values"])
    raise InputError(f"unknown density {obj!r}")


@dataclass
class FamilySpec:
    model: LimitModel
    n: int
    epsilon: float = 1e-8
    r: float = 100.0
    levels: tuple = (0.01, 0.02, 0.03, 0.04, 0.05)
    box: tuple | None = None     # (re0, re1, im0, im1, nx, ny)


def family_from_dict(spec: dict) -> FamilySpec:
    if not isinstance(spec, dict):
        raise InputError("family spec must be an object")
    fam = spec.get("family", spec)
    n = int(fam.get("N", 100))
    box = spec.get("grid")
    return FamilySpec(parse_density(fam.get("density", "uniform")), n,
                      float(spec.get("epsilon", 1e-8)), float(spec.get("r", 100.0)),
                      tuple(float(v) for v in spec.get("levels", (0.01, 0.02, 0.03, 0.04, 0.05))),
                      None if box is None else parse_box(box))


def parse_box(obj) -> tuple:
    """``re0,re1,im0,im1[,nx[,ny]]`` as a string or list; grid sizes default to 41."""
    parts = obj.split(",") if isinstance(obj, str) else list(obj)
    if len(parts) not in (4, 5, 6):
        raise InputError("grid box needs re0,re1,im0,im1[,nx[,ny]]")
    try:
        vals = [float(p) for p in parts[:4]]
        nx = int(parts[4]) if len(parts) > 4 else 41
        ny = int(parts[5]) if len(parts) > 5 else nx
    except ValueError as exc:
        raise InputError(f"bad grid box {obj!r}") from exc
    if not (vals[0] < vals[1] and vals[2] < vals[3]) or nx < 2 or ny < 2:
        raise InputError(f"degenerate grid box {obj!r}")
    return (*vals, nx, ny)


def load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------

def _to_jsonable(obj):
    """Plain containers with floats pre-rendered as ``%.17g`` tokens."""
    if isinstance(obj, (bool, np.bool_)) or obj is None or isinstance(obj, str):
        return bool(obj) if isinstance(obj, np.bool_) else obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return _Raw(fmt_float(x)) if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [_to_jsonable(obj.real), _to_jsonable(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_to_jsonable(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


class _Raw(str):
    pass


def dumps(obj) -> str:
    """Deterministic JSON: insertion-ordered keys, 2-space indent, ``%.17g`` floats."""
    def render(v, indent):
        pad = "  " * (indent + 1)
        end = "  " * indent
        if isinstance(v, _Raw):
            return str(v)
        if isinstance(v, dict):
            if not v:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {render(x, indent + 1)}" for k, x in v.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(v, list):
            if not v:
                return "[]"
            if all(not isinstance(x, (dict, list)) for x in v):
                return "[" + ", ".join(render(x, indent + 1) for x in v) + "]"
            return "[\n" + ",\n".join(pad + render(x, indent + 1) for x in v) + "\n" + end + "]"
        return json.dumps(v)
    return render(_to_jsonable(obj), 0) + "\n"


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(fmt_float(float(v)))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RunReport:
    """Hypothesis checklist plus a manifest of the files a command wrote."""

    command: str
    status: str = "ok"
    hypotheses: dict | None = None
    outputs: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    message: str = ""

    def record(self, path: str, text: str):
        self.outputs.append({"path": os.path.basename(path), "sha256": sha256_text(text),
                             "bytes": len(text.encode("utf-8"))})

    def as_dict(self) -> dict:
        return {"command": self.command, "status": self.status, "message": self.message,
                "hypotheses": self.hypotheses, "details": self.details, "outputs": self.outputs}


def write_text(path: str, text: str, report: RunReport | None = None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    if report is not None:
        report.record(path, text)
