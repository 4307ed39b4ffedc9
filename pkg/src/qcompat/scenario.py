"""JSON scenario files: parsing, validation, execution and report/CSV output.

Complex numbers are ``[re, im]`` pairs, vectors are arrays of complex numbers
and matrices are arrays of rows. Each task draws its randomness from a seed
derived from ``(seed, task_index)``, so a report depends only on the file.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import __version__
from ._validation import Tolerances, derive_seed
from .compat import (
    classify,
    density_corollary_check,
    eigenspace_weight,
    measure_zero_probe,
    restriction_witness,
    theorem1_audit,
    theorem2_audit,
)
from .delayed_choice import InterferometerConfig, mz_probabilities, mz_sample
from .measure_model import MeasurementSetup, PointerAssignment, von_neumann_unitary
from .qcore import BipartiteSplit, Observable, StateVector, UnitaryOperator

__all__ = [
    "SCHEMA_VERSION",
    "ScenarioError",
    "ScenarioParseError",
    "SetupError",
    "ScenarioFile",
    "TaskSpec",
    "parse_scenario",
    "scenario_to_dict",
    "dump_scenario",
    "run_scenario",
    "dump_report",
    "strip_timing",
    "emit_csv",
    "write_atomic",
]

SCHEMA_VERSION = "1"
SETUP_KINDS = ("von_neumann", "explicit", "mach_zehnder")
QUANTUM_TASKS = ("classify", "theorem1_audit", "theorem2_audit", "witness", "measure_zero",
                 "density_corollary")
MZ_TASKS = ("mz_sweep", "mz_sample")
CSV_COLUMNS = ("phase", "p_A", "p_B")
TIMING_KEYS = frozenset({"wall_clock_s", "total_wall_clock_s"})


class ScenarioError(ValueError):
    """Validation failure; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ScenarioParseError(ScenarioError):
    """Input is not valid UTF-8 JSON; ``offset`` is the byte position."""

    def __init__(self, offset: int, message: str):
        self.offset = offset
        super().__init__("", f"invalid JSON at byte {offset}: {message}")


class SetupError(RuntimeError):
    """The scenario's setup could not be constructed."""


class TaskError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class ScenarioFile:
    schema_version: str
    seed: int
    tolerances: Tolerances
    setup: dict
    tasks: tuple[TaskSpec, ...]
    tolerance_overrides: dict = field(default_factory=dict)
    source_sha256: str | None = None

    @property
    def setup_kind(self) -> str:
        return self.setup["kind"]

    def with_overrides(self, seed: int | None = None, tolerances: dict | None = None) -> "ScenarioFile":
        out = self
        if seed is not None:
            out = replace(out, seed=_as_int(seed, "seed"))
        if tolerances:
            merged = {**self.tolerance_overrides, **tolerances}
            out = replace(out, tolerances=_parse_tolerances(merged, "tolerances"),
                          tolerance_overrides=merged)
        return out


# -- decoding helpers -------------------------------------------------------

def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _as_int(x, path: str, minimum: int | None = None) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ScenarioError(path, f"expected an integer, got {x!r}")
    if minimum is not None and x < minimum:
        raise ScenarioError(path, f"must be >= {minimum}, got {x}")
    return x


def _as_real(x, path: str) -> float:
    if not _is_number(x) or not math.isfinite(x):
        raise ScenarioError(path, f"expected a finite number, got {x!r}")
    return float(x)


def _as_complex(x, path: str) -> complex:
    if not isinstance(x, list) or len(x) != 2:
        raise ScenarioError(path, "complex entry must be a two-element [re, im] array")
    return complex(_as_real(x[0], f"{path}[0]"), _as_real(x[1], f"{path}[1]"))


def _as_vector(x, path: str, dim: int | None = None) -> np.ndarray:
    if not isinstance(x, list) or not x:
        raise ScenarioError(path, "vector must be a non-empty array of [re, im] pairs")
    vec = np.array([_as_complex(v, f"{path}[{i}]") for i, v in enumerate(x)], dtype=complex)
    if dim is not None and vec.size != dim:
        raise ScenarioError(path, f"expected dimension {dim}, got {vec.size}")
    return vec


def _as_state(x, path: str, dim: int | None = None) -> np.ndarray:
    vec = _as_vector(x, path, dim)
    if abs(np.linalg.norm(vec) - 1.0) > 1e-9:
        raise ScenarioError(path, f"state is not normalized (norm {np.linalg.norm(vec)!r})")
    return vec


def _as_matrix(x, path: str, dim: int | None = None) -> np.ndarray:
    if not isinstance(x, list) or not x or not all(isinstance(r, list) for r in x):
        raise ScenarioError(path, "matrix must be a non-empty array of rows")
    width = len(x[0])
    for i, row in enumerate(x):
        if len(row) != width:
            raise ScenarioError(f"{path}[{i}]", f"row has {len(row)} entries, expected {width}")
    mat = np.array([[_as_complex(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)]
                    for i, row in enumerate(x)], dtype=complex)
    if mat.shape[0] != mat.shape[1]:
        raise ScenarioError(path, f"matrix must be square, got {mat.shape[0]}x{mat.shape[1]}")
    if dim is not None and mat.shape[0] != dim:
        raise ScenarioError(path, f"expected a {dim}x{dim} matrix, got {mat.shape[0]}x{mat.shape[1]}")
    return mat


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ScenarioError(_join(path, key), "missing required field")
    return obj[key]


def _check_keys(obj: dict, allowed: set, path: str):
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ScenarioError(_join(path, extra[0]), "unknown field")


def _parse_tolerances(raw, path: str) -> Tolerances:
    if raw is None:
        return Tolerances()
    if not isinstance(raw, dict):
        raise ScenarioError(path, "must be an object")
    values = {}
    for key, value in raw.items():
        name = key if key.startswith("tol_") else f"tol_{key}"
        if name not in Tolerances.names():
            raise ScenarioError(f"{path}.{key}", "unknown tolerance")
        v = _as_real(value, f"{path}.{key}")
        if v < 0:
            raise ScenarioError(f"{path}.{key}", "must be non-negative")
        values[name] = v
    return Tolerances().override(**values)


def _parse_setup(raw, path: str = "setup") -> dict:
    if not isinstance(raw, dict):
        raise ScenarioError(path, "must be an object")
    kind = _require(raw, "kind", path)
    if kind not in SETUP_KINDS:
        raise ScenarioError(f"{path}.kind", f"unknown setup kind {kind!r}; expected one of {SETUP_KINDS}")

    if kind == "von_neumann":
        _check_keys(raw, {"kind", "observable", "apparatus_dim", "ready", "pointers", "eigenbasis"}, path)
        obs = _as_matrix(_require(raw, "observable", path), f"{path}.observable")
        d_mu = _as_int(_require(raw, "apparatus_dim", path), f"{path}.apparatus_dim", 1)
        ready = _as_state(_require(raw, "ready", path), f"{path}.ready", d_mu)
        pointers_raw = _require(raw, "pointers", path)
        if not isinstance(pointers_raw, list):
            raise ScenarioError(f"{path}.pointers", "must be an array of vectors")
        if len(pointers_raw) != obs.shape[0]:
            raise ScenarioError(f"{path}.pointers", f"expected {obs.shape[0]} pointer states, got {len(pointers_raw)}")
        pointers = [_as_state(p, f"{path}.pointers[{i}]", d_mu) for i, p in enumerate(pointers_raw)]
        eigenbasis = None
        if raw.get("eigenbasis") is not None:
            eb = raw["eigenbasis"]
            if not isinstance(eb, list) or len(eb) != obs.shape[0]:
                raise ScenarioError(f"{path}.eigenbasis", f"expected {obs.shape[0]} vectors")
            eigenbasis = [_as_state(v, f"{path}.eigenbasis[{i}]", obs.shape[0]) for i, v in enumerate(eb)]
        return {"kind": kind, "observable": obs, "apparatus_dim": d_mu, "ready": ready,
                "pointers": pointers, "eigenbasis": eigenbasis}

    if kind == "explicit":
        _check_keys(raw, {"kind", "U", "split", "ready", "observable"}, path)
        split_raw = _require(raw, "split", path)
        if not isinstance(split_raw, list) or len(split_raw) != 2:
            raise ScenarioError(f"{path}.split", "must be [dim_apparatus, dim_system]")
        d_mu = _as_int(split_raw[0], f"{path}.split[0]", 1)
        d_psi = _as_int(split_raw[1], f"{path}.split[1]", 1)
        U = _as_matrix(_require(raw, "U", path), f"{path}.U", d_mu * d_psi)
        ready = _as_state(_require(raw, "ready", path), f"{path}.ready", d_mu)
        obs = _as_matrix(_require(raw, "observable", path), f"{path}.observable", d_psi)
        return {"kind": kind, "U": U, "split": [d_mu, d_psi], "ready": ready, "observable": obs}

    _check_keys(raw, {"kind", "phase_grid", "setting", "shots"}, path)
    grid = _require(raw, "phase_grid", path)
    if not isinstance(grid, list):
        raise ScenarioError(f"{path}.phase_grid", "must be an array of numbers")
    phases = [_as_real(p, f"{path}.phase_grid[{i}]") for i, p in enumerate(grid)]
    setting = raw.get("setting", "both_ways")
    if setting not in ("both_ways", "which_way", True, False):
        raise ScenarioError(f"{path}.setting", "must be 'both_ways', 'which_way' or a boolean")
    both = setting in ("both_ways", True)
    shots = _as_int(raw.get("shots", 0), f"{path}.shots", 0)
    return {"kind": kind, "phase_grid": phases, "setting": "both_ways" if both else "which_way",
            "shots": shots}


def _system_dim(setup: dict) -> int | None:
    if setup["kind"] == "von_neumann":
        return setup["observable"].shape[0]
    if setup["kind"] == "explicit":
        return setup["split"][1]
    return None


def _parse_count(value, path: str) -> int:
    if isinstance(value, dict):
        _check_keys(value, {"n"}, path)
        return _as_int(_require(value, "n", path), f"{path}.n", 1)
    return _as_int(value, path, 1)


def _parse_task(raw, index: int, setup: dict) -> TaskSpec:
    path = f"tasks[{index}]"
    if not isinstance(raw, dict) or len(raw) != 1:
        raise ScenarioError(path, "task must be an object with exactly one key")
    (kind, value), = raw.items()
    path = f"{path}.{kind}"
    if kind in QUANTUM_TASKS and setup["kind"] == "mach_zehnder":
        raise ScenarioError(path, "task requires a von_neumann or explicit setup")
    if kind in MZ_TASKS and setup["kind"] != "mach_zehnder":
        raise ScenarioError(path, "task requires a mach_zehnder setup")
    d = _system_dim(setup)

    if kind == "classify":
        states = value.get("states") if isinstance(value, dict) else value
        if not isinstance(states, list):
            raise ScenarioError(path, "expected an array of state vectors")
        return TaskSpec(kind, {"states": [_as_state(s, f"{path}[{i}]", d) for i, s in enumerate(states)]})
    if kind in ("theorem1_audit", "theorem2_audit", "measure_zero"):
        return TaskSpec(kind, {"n": _parse_count(value, path)})
    if kind == "witness":
        if value not in (None, True, {}):
            raise ScenarioError(path, "takes no parameters")
        return TaskSpec(kind, {})
    if kind == "density_corollary":
        if not isinstance(value, dict):
            raise ScenarioError(path, "expected an object with weights and states")
        _check_keys(value, {"weights", "states"}, path)
        weights = _require(value, "weights", path)
        states = _require(value, "states", path)
        if not isinstance(weights, list) or not isinstance(states, list) or len(weights) != len(states) or not states:
            raise ScenarioError(path, "weights and states must be non-empty arrays of equal length")
        w = [_as_real(x, f"{path}.weights[{i}]") for i, x in enumerate(weights)]
        if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ScenarioError(f"{path}.weights", "must be a probability vector")
        vecs = [_as_state(s, f"{path}.states[{i}]", d) for i, s in enumerate(states)]
        return TaskSpec(kind, {"weights": w, "states": vecs})
    if kind == "mz_sweep":
        if value not in (None, True, {}):
            raise ScenarioError(path, "takes no parameters")
        return TaskSpec(kind, {})
    if kind == "mz_sample":
        if value in (None, True, {}):
            return TaskSpec(kind, {})
        if not isinstance(value, dict):
            raise ScenarioError(path, "expected an object")
        _check_keys(value, {"shots"}, path)
        return TaskSpec(kind, {"shots": _as_int(value["shots"], f"{path}.shots", 0)})
    raise ScenarioError(path, f"unknown task type {kind!r}")


def parse_scenario(data: bytes | str) -> ScenarioFile:
    """Parse and validate a scenario document.

    Raises
    ------
    ScenarioParseError
        Malformed UTF-8 or JSON (with the byte offset).
    ScenarioError
        Schema violations, naming the offending field path.
    """
    raw_bytes = data.encode("utf-8") if isinstance(data, str) else bytes(data)
    try:
        text = raw_bytes.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ScenarioParseError(exc.start, "input is not UTF-8") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(len(text[:exc.pos].encode("utf-8")), exc.msg) from None

    if not isinstance(doc, dict):
        raise ScenarioError("", "scenario must be a JSON object")
    _check_keys(doc, {"schema_version", "seed", "tolerances", "setup", "tasks"}, "")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError("schema_version", f"unrecognized schema version {version!r}")
    seed = _as_int(_require(doc, "seed", ""), "seed")
    if not -(1 << 63) <= seed < (1 << 64):
        raise ScenarioError("seed", "must fit in 64 bits")
    overrides = doc.get("tolerances") or {}
    tolerances = _parse_tolerances(overrides, "tolerances")
    setup = _parse_setup(_require(doc, "setup", ""))
    tasks_raw = _require(doc, "tasks", "")
    if not isinstance(tasks_raw, list):
        raise ScenarioError("tasks", "must be an array")
    tasks = tuple(_parse_task(t, i, setup) for i, t in enumerate(tasks_raw))
    return ScenarioFile(
        schema_version=version,
        seed=seed,
        tolerances=tolerances,
        setup=setup,
        tasks=tasks,
        tolerance_overrides=dict(overrides),
        source_sha256=hashlib.sha256(raw_bytes).hexdigest(),
    )


# -- encoding ---------------------------------------------------------------

def _encode(obj):
    """Recursively turn numpy/complex values into JSON-compatible data."""
    if isinstance(obj, StateVector):
        obj = obj.amplitudes
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return [_encode(x) for x in obj.tolist()]
        return obj.tolist()
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(x) for x in obj]
    return obj


def scenario_to_dict(s: ScenarioFile) -> dict:
    setup = {k: v for k, v in s.setup.items() if v is not None}
    tasks = []
    for t in s.tasks:
        if t.kind in ("theorem1_audit", "theorem2_audit", "measure_zero"):
            tasks.append({t.kind: t.params["n"]})
        elif t.kind == "classify":
            tasks.append({t.kind: t.params["states"]})
        else:
            tasks.append({t.kind: dict(t.params)})
    return _encode({
        "schema_version": s.schema_version,
        "seed": s.seed,
        "tolerances": s.tolerances.as_dict(),
        "setup": setup,
        "tasks": tasks,
    })


def dump_scenario(s: ScenarioFile) -> bytes:
    return (json.dumps(scenario_to_dict(s), indent=2) + "\n").encode("utf-8")


# -- execution --------------------------------------------------------------

def _build_setup(s: ScenarioFile) -> MeasurementSetup | None:
    cfg = s.setup
    tols = s.tolerances
    try:
        if cfg["kind"] == "von_neumann":
            observable = Observable.from_matrix(cfg["observable"], tol_eig=tols.tol_eig, tol_herm=tols.tol_herm)
            eigenbasis = None
            if cfg["eigenbasis"] is not None:
                eigenbasis = tuple(StateVector(v) for v in cfg["eigenbasis"])
            assignment = PointerAssignment(StateVector(cfg["ready"]),
                                           tuple(StateVector(p) for p in cfg["pointers"]), eigenbasis)
            split = BipartiteSplit(cfg["apparatus_dim"], observable.dim)
            return von_neumann_unitary(observable, assignment, split)
        if cfg["kind"] == "explicit":
            d_mu, d_psi = cfg["split"]
            return MeasurementSetup(
                split=BipartiteSplit(d_mu, d_psi),
                ready=StateVector(cfg["ready"]),
                observable=Observable.from_matrix(cfg["observable"], tol_eig=tols.tol_eig, tol_herm=tols.tol_herm),
                unitary=UnitaryOperator(cfg["U"], tol_unitary=tols.tol_unitary),
            )
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SetupError(f"setup: {exc}") from exc
    return None


def _run_task(task: TaskSpec, s: ScenarioFile, setup: MeasurementSetup | None, seed: int) -> dict:
    tols = s.tolerances
    kind = task.kind
    if kind == "classify":
        return {"verdicts": [classify(setup, psi, tols).to_dict() for psi in task.params["states"]]}
    if kind == "theorem1_audit":
        return theorem1_audit(setup, task.params["n"], seed, tols).to_dict()
    if kind == "theorem2_audit":
        if setup.assignment is None:
            raise TaskError("unsupported_setup", "theorem2_audit needs a von_neumann setup")
        a = setup.assignment
        return theorem2_audit(setup.observable, a, setup.split, task.params["n"], seed, tols).to_dict()
    if kind == "witness":
        w = restriction_witness(setup, seed, tols)
        if w is None:
            return {"found": False}
        return {"found": True, "state": w.state, "verdict": w.verdict.to_dict(), "attempts": w.attempts}
    if kind == "measure_zero":
        n = task.params["n"]
        return {"n": n, "tol_product": tols.tol_product,
                "compatible_fraction": measure_zero_probe(setup, n, seed, tols=tols)}
    if kind == "density_corollary":
        weights, states = task.params["weights"], task.params["states"]
        holds = density_corollary_check(setup, weights, states, tols)
        eigenvalue = classify(setup, states[0], tols).eigenvalue
        return {"holds": holds, "eigenvalue": eigenvalue,
                "eigenspace_weight": eigenspace_weight(setup, weights, states, eigenvalue)}
    both = s.setup["setting"] == "both_ways"
    if kind == "mz_sweep":
        rows = []
        for phi in s.setup["phase_grid"]:
            p_a, p_b = mz_probabilities(InterferometerConfig(phi, both))
            rows.append([phi, p_a, p_b])
        return {"setting": s.setup["setting"], "table": {"columns": list(CSV_COLUMNS), "rows": rows}}
    if kind == "mz_sample":
        shots = task.params.get("shots", s.setup["shots"])
        records = []
        for k, phi in enumerate(s.setup["phase_grid"]):
            rec = mz_sample(InterferometerConfig(phi, both), shots, derive_seed(seed, k))
            records.append({"phase": phi, "shots": rec.shots, "counts_A": rec.counts_A,
                            "counts_B": rec.counts_B, "analytic_pA": rec.analytic_pA,
                            "analytic_pB": rec.analytic_pB})
        return {"setting": s.setup["setting"], "records": records}
    raise TaskError("unknown_task", f"unknown task type {kind!r}")


def run_scenario(s: ScenarioFile) -> dict:
    """Execute every task in order and assemble the report.

    Per-task failures are recorded with a machine-readable ``code``; a setup
    that cannot be built raises :class:`SetupError`.
    """
    start = time.perf_counter()
    setup = _build_setup(s)
    results = []
    for index, task in enumerate(s.tasks):
        t0 = time.perf_counter()
        entry: dict[str, Any] = {"index": index, "type": task.kind}
        try:
            entry["result"] = _run_task(task, s, setup, derive_seed(s.seed, index))
            entry["status"] = "ok"
        except TaskError as exc:
            entry.update(status="error", error={"code": exc.code, "message": str(exc)})
        except (ValueError, np.linalg.LinAlgError) as exc:
            entry.update(status="error", error={"code": "invalid_input", "message": str(exc)})
        except Exception as exc:  # noqa: BLE001 - isolate tasks from each other
            entry.update(status="error", error={"code": "internal_error",
                                                "message": f"{type(exc).__name__}: {exc}"})
        entry["wall_clock_s"] = time.perf_counter() - t0
        results.append(entry)
    report = {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "scenario": {
            "seed": s.seed,
            "setup_kind": s.setup_kind,
            "n_tasks": len(s.tasks),
            "source_sha256": s.source_sha256,
            "setup": setup.summary() if setup is not None else
            {k: v for k, v in s.setup.items() if k != "kind"},
        },
        "tolerances": s.tolerances.as_dict(),
        "ok": all(r["status"] == "ok" for r in results),
        "tasks": results,
        "total_wall_clock_s": time.perf_counter() - start,
    }
    return _encode(report)


def dump_report(report: dict) -> bytes:
    return (json.dumps(report, indent=2, allow_nan=False) + "\n").encode("utf-8")


def strip_timing(report):
    """Copy of ``report`` without wall-clock fields."""
    if isinstance(report, dict):
        return {k: strip_timing(v) for k, v in report.items() if k not in TIMING_KEYS}
    if isinstance(report, list):
        return [strip_timing(x) for x in report]
    return report


def _fmt(x) -> str:
    return format(float(x), ".17g")


def emit_csv(section) -> bytes:
    """Render a sweep table as ``phase,p_A,p_B`` CSV with 17 significant digits.

    ``section`` may be a task entry from a report, its ``result``, or the
    ``table`` itself.
    """
    table = section
    for key in ("result", "table"):
        if isinstance(table, dict) and key in table:
            table = table[key]
    if not isinstance(table, dict) or list(table.get("columns", ())) != list(CSV_COLUMNS):
        raise ValueError("section is not a phase,p_A,p_B sweep table")
    lines = [",".join(CSV_COLUMNS)]
    for row in table["rows"]:
        if len(row) != len(CSV_COLUMNS):
            raise ValueError(f"row {row!r} does not have {len(CSV_COLUMNS)} columns")
        lines.append(",".join(_fmt(x) for x in row))
    return ("\n".join(lines) + "\n").encode("ascii")


def write_atomic(path: str | os.PathLike, payload: bytes) -> None:
    """Write via a temporary file in the target directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
