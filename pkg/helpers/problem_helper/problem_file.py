import json
import logging
import os

import numpy as np

from helpers.exceptions import InputError, ProblemFileError
from helpers.problem_helper.structured_problem import (
    AffineConstraint,
    QuadraticConstraint,
    StructuredProblem,
)

log = logging.getLogger("problem")


def _line_of(text, key):
    """First line (1-based) mentioning "key", used to point errors at a field."""
    if text is None:
        return None
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return lineno
    return None


def _matrix(value, n, what):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (n, n):
        raise InputError(f"{what} must be {n}x{n}, got shape {arr.shape}")
    return arr


def _vector(value, n, what):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise InputError(f"{what} must have length {n}, got shape {arr.shape}")
    return arr


def _parse_constraint(entry, n, i):
    if not isinstance(entry, dict):
        raise InputError(f"constraints[{i}] must be an object, got {type(entry).__name__}")
    kind = entry.get("type")
    if kind == "quadratic":
        return QuadraticConstraint(
            A=_matrix(entry["A"], n, f"constraints[{i}].A"),
            b=_vector(entry.get("b", 0.0), n, f"constraints[{i}].b"),
            d=float(entry.get("d", 0.0)),
        )
    if kind == "affine":
        return AffineConstraint(
            a=_vector(entry["a"], n, f"constraints[{i}].a"),
            beta=float(entry.get("beta", 0.0)),
        )
    raise InputError(f"constraints[{i}].type must be 'quadratic' or 'affine', got {kind!r}")


DECLARABLE = ("mu", "l_smooth", "constraint_smoothness")


def _declared_constants(value, m):
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise InputError(f"declared_constants must be an object, got {type(value).__name__}")
    unknown = sorted(set(value) - set(DECLARABLE))
    if unknown:
        raise InputError(f"declared_constants has unknown keys {unknown}, expected a subset of {list(DECLARABLE)}")
    declared = {}
    for key in ("mu", "l_smooth"):
        if key in value:
            try:
                declared[key] = float(value[key])
            except (TypeError, ValueError):
                raise InputError(f"declared_constants.{key} must be a number, got {value[key]!r}") from None
            if not declared[key] >= 0:
                raise InputError(f"declared_constants.{key} must be non-negative, got {value[key]!r}")
    if "constraint_smoothness" in value:
        try:
            pairs = np.asarray(value["constraint_smoothness"], dtype=float)
        except (TypeError, ValueError):
            raise InputError("declared_constants.constraint_smoothness must be a list of [L, B] number pairs") from None
        if pairs.shape != (m, 2):
            raise InputError(f"declared_constants.constraint_smoothness needs {m} [L, B] pairs, got shape {pairs.shape}")
        if not np.all(pairs >= 0):
            raise InputError("declared_constants.constraint_smoothness entries must be non-negative")
        declared["constraint_smoothness"] = tuple((float(L), float(B)) for L, B in pairs)
    return declared


def parse_problem(data, name=""):
    """Build a StructuredProblem from the decoded JSON document."""
    if not isinstance(data, dict):
        raise InputError("problem file must contain a JSON object")
    if data.get("type") == "powerflow":
        from helpers.powerflow_helper import build_powerflow_instance

        instance = build_powerflow_instance(
            data["S"],
            p_v=data.get("p_v"),
            radius=data.get("radius"),
        )
        return instance.problem
    n = int(data["n"])
    if n < 1:
        raise InputError(f"n must be positive, got {n}")
    objective = data["objective"]
    entries = data["constraints"]
    if not isinstance(entries, list):
        raise InputError(f"constraints must be a list, got {type(entries).__name__}")
    constraints = tuple(_parse_constraint(entry, n, i) for i, entry in enumerate(entries))
    box = data.get("box")
    lo = hi = None
    if box is not None:
        lo = _vector(box["lo"], n, "box.lo")
        hi = _vector(box["hi"], n, "box.hi")
    return StructuredProblem(
        H=_matrix(objective["H"], n, "objective.H"),
        c=_vector(objective.get("c", 0.0), n, "objective.c"),
        r=float(objective.get("r", 0.0)),
        constraints=constraints,
        box_lo=lo,
        box_hi=hi,
        declared=_declared_constants(data.get("declared_constants"), len(constraints)),
        name=data.get("name", name),
    )


def load_problem_file(path):
    """Read and validate a problem file; every failure becomes a ProblemFileError."""
    print_name = os.path.basename(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except (OSError, UnicodeDecodeError) as e:
        raise ProblemFileError(f"cannot read {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemFileError(f"{print_name}: invalid JSON ({e.msg}, column {e.colno})", line=e.lineno) from e
    try:
        problem = parse_problem(data, name=os.path.splitext(print_name)[0])
    except KeyError as e:
        key = e.args[0]
        raise ProblemFileError(f"{print_name}: missing field {key!r}", line=_line_of(text, key)) from e
    except (InputError, TypeError, ValueError) as e:
        message = str(e)
        field_name = message.split(" ", 1)[0].split(".")[0].split("[")[0]
        raise ProblemFileError(f"{print_name}: {message}", line=_line_of(text, field_name)) from e
    log.debug(f"loaded {print_name}: n={problem.n}, m={problem.m}")
    return problem
