"""JSON and CSV formats for hoops, test fields, measures and samples.

Hoop::

    {"loops": [{"weight": 1, "vertices": [[x, y, z], ...]}, ...]}

Family: ``{"family": [<hoop>, ...]}``, a bare list of hoops, or a single
hoop (one family member).

Test field::

    {"terms": [{"weight": 0.5, "scale": 0.4, "hoop": <hoop>}, ...]}
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, DegenerateLoop
from .formfactor import Mollifier
from .kernels import CovarianceModel, TestField
from .lab import ExperimentConfig
from .loops import Hoop, make_loop
from .measures import CylindricalMeasure, CylSample


def load_json(path, field: str = "config") -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(field, f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(field, f"invalid JSON in {path}: {exc}") from None


def hoop_from_json(obj, field: str = "hoop") -> Hoop:
    if not isinstance(obj, dict) or "loops" not in obj:
        raise ConfigError(field, "expected an object with a 'loops' list")
    terms = []
    for i, item in enumerate(obj["loops"]):
        where = f"{field}.loops[{i}]"
        try:
            w = item.get("weight", 1)
            if int(w) != w:
                raise ConfigError(f"{where}.weight", "weight must be an integer")
            terms.append((make_loop(item["vertices"]), int(w)))
        except DegenerateLoop as exc:
            raise ConfigError(f"{where}.vertices", str(exc)) from None
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(where, f"malformed loop ({exc})") from None
    return Hoop(terms)


def hoop_to_json(h: Hoop) -> dict:
    return {"loops": [{"weight": w, "vertices": lp.vertices.tolist()} for lp, w in h.terms]}


def family_from_json(obj, field: str = "family") -> list[Hoop]:
    if isinstance(obj, dict) and "family" in obj:
        obj = obj["family"]
    if isinstance(obj, dict):
        return [hoop_from_json(obj, field)]
    if not isinstance(obj, list) or not obj:
        raise ConfigError(field, "expected a non-empty list of hoops")
    return [hoop_from_json(h, f"{field}[{i}]") for i, h in enumerate(obj)]


def testfield_from_json(obj, field: str = "lambda") -> TestField:
    if obj is None:
        return TestField()
    if not isinstance(obj, dict):
        raise ConfigError(field, "expected an object with a 'terms' list")
    terms = []
    for i, t in enumerate(obj.get("terms", [])):
        where = f"{field}.terms[{i}]"
        try:
            s = float(t["scale"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"{where}.scale", "missing or non-numeric scale") from None
        if not s > 0:
            raise ConfigError(f"{where}.scale", "scale must be positive")
        terms.append((float(t.get("weight", 1.0)), hoop_from_json(t.get("hoop"), f"{where}.hoop"), s))
    return TestField(tuple(terms))


def testfield_to_json(lam: TestField) -> dict:
    return {"terms": [{"weight": w, "scale": s, "hoop": hoop_to_json(h)} for w, h, s in lam.terms]}


def measure_to_json(m: CylindricalMeasure) -> dict:
    out: dict = {"kind": m.kind, "family": [hoop_to_json(h) for h in m.family]}
    if not m.is_haar:
        out.update(mean=m.mean.tolist(), covariance=m.sigma.tolist(), r=m.cov.r,
                   convention=m.cov.conv.value, tol=m.cov.tol)
    return out


def measure_from_json(obj, field: str = "measure") -> CylindricalMeasure:
    family = family_from_json(obj.get("family"), f"{field}.family")
    kind = obj.get("kind", "gaussian")
    if kind == "haar":
        return CylindricalMeasure.haar(family)
    try:
        cov = CovarianceModel(family, float(obj["r"]), Mollifier.parse(obj.get("convention", "paper")),
                              np.asarray(obj["covariance"], dtype=float), float(obj.get("tol", 1e-8)))
    except KeyError as exc:
        raise ConfigError(f"{field}.{exc.args[0]}", "missing") from None
    return CylindricalMeasure.gaussian(cov, obj.get("mean"))


def experiment_config_from_json(obj, field: str = "config") -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError(field, "expected an object")
    if "base_hoop" not in obj:
        raise ConfigError(f"{field}.base_hoop", "missing")
    try:
        return ExperimentConfig(
            base_hoop=hoop_from_json(obj["base_hoop"], f"{field}.base_hoop"),
            r_values=tuple(obj.get("r_values", (0.3, 0.6))),
            family_size_max=int(obj.get("family_size_max", 50)),
            separation=float(obj.get("separation", 20.0)),
            draws=int(obj.get("draws", 1000)),
            seed=int(obj.get("seed", 0)),
            conv=Mollifier.parse(obj.get("mollifier", obj.get("conv", "paper"))),
            tol=float(obj.get("tol", 1e-8)),
            direction=tuple(obj.get("direction", (1.0, 0.0, 0.0))),
        )
    except ValueError as exc:
        raise ConfigError(field, str(exc)) from None


def write_samples_csv(path, smp: CylSample) -> None:
    n = smp.angles.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"theta_{i}" for i in range(n)])
        for row in smp.angles:
            w.writerow([repr(float(x)) for x in row])


def read_samples_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_matrix_csv(path, mat: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in np.atleast_2d(mat):
            w.writerow([repr(float(x)) for x in row])


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, default=_default) + "\n")


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
