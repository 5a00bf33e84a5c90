"""TOML model files.

Schema version 1::

    schema_version = 1
    family = "finite-linear"      # or "geometric-countable", "lorenz-template"
    name = "doubling"             # optional

    [base]
    lo = 0.0
    hi = 1.0

    [branches]                    # keys depend on the family, see FAMILY_KEYS
    widths = [1, 1]
    roofs = [1, 1]
    r_min = 0.5                   # optional declared roof lower bound
    roof_holder = [0.0, 1.0]      # optional (kappa, gamma)

    [potential]
    kind = "affine"               # V = const + x*X + t*T + s*S + ss*S^2
    const = 0.0
    singular_value = -0.3         # optional V(sigma)
    holder = [1.0, 0.0]           # optional (alpha, C_V)
    # kind = "branchwise" takes values = [v1, v2, ...] instead

    [skew]                        # optional
    stable_rate = 1.0
    stable_shift = 0.5
"""
from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .exceptions import InducedFlowError, ModelError
from .families import BaseInterval, FiniteLinear, GeometricCountable, LorenzTemplate
from .model import PotentialSpec, SuspensionSystem

__all__ = ["SCHEMA_VERSION", "FAMILY_KEYS", "LoadedModel", "load_model", "parse_model", "model_from_dict"]

SCHEMA_VERSION = 1

_COMMON_BRANCH_KEYS = {"r_min", "roof_holder"}
FAMILY_KEYS = {
    "finite-linear": ({"widths", "roofs"}, {"roof_slopes", "offsets", "orientations"}),
    "geometric-countable": (set(), {"roof_scale", "roof_shift", "log_coeff", "const_offset"}),
    "lorenz-template": (set(), {"ratio", "roof_base", "unstable_rate"}),
}
_FAMILY_CLS = {
    "finite-linear": FiniteLinear,
    "geometric-countable": GeometricCountable,
    "lorenz-template": LorenzTemplate,
}
_AFFINE = {"const", "x", "t", "s", "ss"}


@dataclass(frozen=True)
class LoadedModel:
    system: SuspensionSystem
    potential: PotentialSpec
    sha256: str
    source: str


def _table(doc, key, required=True):
    val = doc.get(key)
    if val is None:
        if required:
            raise ModelError(f"missing [{key}] table")
        return {}
    if not isinstance(val, dict):
        raise ModelError(f"[{key}] must be a table")
    return val


def _reject_unknown(table, allowed, where):
    extra = sorted(set(table) - set(allowed))
    if extra:
        raise ModelError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _pair(val, where):
    if not (isinstance(val, list) and len(val) == 2):
        raise ModelError(f"{where} must be a two-element array")
    return float(val[0]), float(val[1])


def _potential(tab):
    kind = tab.get("kind", "affine")
    sv = tab.get("singular_value")
    sv = None if sv is None else float(sv)
    holder = tab.get("holder")
    if kind == "affine":
        _reject_unknown(tab, _AFFINE | {"kind", "singular_value", "holder"}, "[potential]")
        coef = {k: float(tab.get(k, 0.0)) for k in _AFFINE}
        kw = {}
        if holder is not None:
            kw["alpha"], kw["holder_constant"] = _pair(holder, "potential.holder")
        return PotentialSpec.affine(**coef, singular_value=sv, **kw)
    if kind == "branchwise":
        _reject_unknown(tab, {"kind", "values", "singular_value"}, "[potential]")
        vals = tab.get("values")
        if not isinstance(vals, list) or not vals:
            raise ModelError("branchwise potential needs a non-empty 'values' array")
        return PotentialSpec.branchwise([float(v) for v in vals], singular_value=sv)
    raise ModelError(f"unknown potential kind {kind!r}")


def model_from_dict(doc: dict):
    """Build ``(system, potential)`` from a parsed model document.

    Raises
    ------
    ModelError
        On any schema violation or invalid parameter.
    """
    _reject_unknown(doc, {"schema_version", "family", "name", "base", "branches", "potential", "skew"},
                    "model file")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ModelError(f"schema_version must be {SCHEMA_VERSION}")
    family = doc.get("family")
    if family not in FAMILY_KEYS:
        raise ModelError(f"family must be one of {sorted(FAMILY_KEYS)}, got {family!r}")
    try:
        base_t = _table(doc, "base")
        _reject_unknown(base_t, {"lo", "hi"}, "[base]")
        base = BaseInterval(float(base_t["lo"]), float(base_t["hi"]))
        br = dict(_table(doc, "branches", required=family == "finite-linear"))
        required, optional = FAMILY_KEYS[family]
        _reject_unknown(br, required | optional | _COMMON_BRANCH_KEYS, "[branches]")
        missing = sorted(required - set(br))
        if missing:
            raise ModelError(f"[branches] is missing {', '.join(missing)}")
        r_min = br.pop("r_min", None)
        holder = br.pop("roof_holder", None)
        fam = _FAMILY_CLS[family](base, **br)
        skew = _table(doc, "skew", required=False)
        _reject_unknown(skew, {"stable_rate", "stable_shift"}, "[skew]")
        system = SuspensionSystem(
            fam,
            stable_rate=float(skew.get("stable_rate", 0.0)),
            stable_shift=float(skew.get("stable_shift", 0.0)),
            r_min=None if r_min is None else float(r_min),
            roof_holder=(0.0, 1.0) if holder is None else _pair(holder, "branches.roof_holder"),
            name=str(doc.get("name", "")),
        )
        potential = _potential(_table(doc, "potential"))
    except ModelError:
        raise
    except (KeyError, TypeError, ValueError, InducedFlowError) as exc:
        raise ModelError(f"invalid model: {exc}") from exc
    if system.countable and (not potential.is_affine or potential.coefficients["t"] != 0):
        raise ModelError("countable families need an affine potential without a t term")
    if potential.kind == "branchwise" and len(potential.coefficients["values"]) != system.n_branches:
        raise ModelError("branchwise potential needs one value per branch")
    return system, potential


def parse_model(text: str):
    """Parse model file contents; see the module docstring for the schema."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ModelError(f"malformed model file: {exc}") from exc
    return model_from_dict(doc)


def load_model(path) -> LoadedModel:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ModelError(f"model file is not UTF-8: {exc}") from exc
    system, potential = parse_model(text)
    return LoadedModel(system, potential, hashlib.sha256(raw).hexdigest(), str(path))
