"""Configuration, curve and model (de)serialization.

Configs are JSON, curves are CSV with header
``tenor_date,riskfree_bond,defaultable_bond`` (one row per tenor date,
ascending, decimal dot, UTF-8, LF), and calibrated models round-trip through
JSON with full-precision floats.
"""
from __future__ import annotations

import csv
import io
import json
import os
from typing import Any

import numpy as np

from .affine import AffineComponentSpec, ProductAffineSpec
from .calibration import CalibratedModel, InitialCurves, TenorGrid, assemble
from .errors import ValidationError
from .fourier import DampingVector, QuadratureConfig
from .simulation import SimConfig

__all__ = [
    "load_config",
    "build_driver",
    "build_grid",
    "build_sim_config",
    "load_curves_csv",
    "write_curves_csv",
    "model_to_dict",
    "model_from_dict",
    "dump_json",
]

_COMPONENT_KEYS = ("lambda", "theta", "eta", "ell", "mu", "x0")
_CURVE_HEADER = ["tenor_date", "riskfree_bond", "defaultable_bond"]


def dump_json(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, two-space indent, newline end."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def load_config(path: str) -> dict:
    """Parse and structurally validate a model configuration file.

    Raises:
        ValidationError: on JSON syntax errors (with line/column) or on a
            missing/ill-typed section.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"{path}: JSON parse error at line {exc.lineno}, "
            f"column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError(f"{path}: top-level JSON must be an object")
    for key in ("driver", "tenor", "curves"):
        if key not in cfg:
            raise ValidationError(f"{path}: missing required section {key!r}")
    cfg["_dir"] = os.path.dirname(os.path.abspath(path))
    return cfg


def _component_from_dict(block: dict, where: str) -> AffineComponentSpec:
    if not isinstance(block, dict):
        raise ValidationError(f"{where}: component must be an object")
    unknown = set(block) - set(_COMPONENT_KEYS)
    if unknown:
        raise ValidationError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return AffineComponentSpec(
            lam=float(block.get("lambda", 0.0)),
            theta=float(block.get("theta", 0.0)),
            eta=float(block.get("eta", 0.0)),
            ell=float(block.get("ell", 0.0)),
            mu=float(block.get("mu", 0.0)),
            x0=float(block.get("x0", 1.0)))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def build_driver(cfg: dict) -> ProductAffineSpec:
    """Driver block -> ProductAffineSpec (risk_free components first)."""
    block = cfg["driver"]
    if not isinstance(block, dict) or \
            not {"risk_free", "spread"} <= set(block):
        raise ValidationError(
            "driver block needs 'risk_free' and 'spread' component lists")
    comps = []
    for name in ("risk_free", "spread"):
        lst = block[name]
        if not isinstance(lst, list) or not lst:
            raise ValidationError(f"driver.{name} must be a non-empty list")
        comps.extend(_component_from_dict(c, f"driver.{name}[{i}]")
                     for i, c in enumerate(lst))
    return ProductAffineSpec(components=tuple(comps),
                             d1=len(block["risk_free"]),
                             d2=len(block["spread"]))


def build_grid(cfg: dict) -> TenorGrid:
    """Tenor block -> TenorGrid; accepts explicit dates or N + delta."""
    block = cfg["tenor"]
    if not isinstance(block, dict):
        raise ValidationError("tenor block must be an object")
    if "dates" in block:
        return TenorGrid(dates=tuple(float(t) for t in block["dates"]))
    if {"n_periods", "delta"} <= set(block):
        n = int(block["n_periods"])
        delta = float(block["delta"])
        return TenorGrid(dates=tuple(delta * (k + 1) for k in range(n)))
    raise ValidationError("tenor block needs 'dates' or 'n_periods'+'delta'")


def build_sim_config(cfg: dict, seed: int | None = None) -> SimConfig:
    block = cfg.get("simulation", {})
    if not isinstance(block, dict):
        raise ValidationError("simulation block must be an object")
    return SimConfig(
        n_paths=int(block.get("n_paths", 100_000)),
        steps_per_period=int(block.get("steps_per_period", 64)),
        seed=int(seed if seed is not None else block.get("seed", 0)),
        scheme=str(block.get("scheme", "euler")))


def pricing_settings(cfg: dict) -> dict:
    """Damping and quadrature overrides from the pricing block, or {}."""
    block = cfg.get("pricing", {})
    if not isinstance(block, dict):
        raise ValidationError("pricing block must be an object")
    out: dict[str, Any] = {}
    if "damping_1d" in block:
        out["damping_1d"] = DampingVector(R=(float(block["damping_1d"]),))
    if "damping_2d" in block:
        r = block["damping_2d"]
        if not isinstance(r, list) or len(r) != 2:
            raise ValidationError("pricing.damping_2d must be a 2-list")
        out["damping_2d"] = DampingVector(R=(float(r[0]), float(r[1])))
    for dim in ("1d", "2d"):
        limit = block.get(f"quad_limit_{dim}")
        nodes = block.get(f"quad_nodes_{dim}")
        if limit is not None or nodes is not None:
            base = {"1d": (8000.0, 262144), "2d": (4000.0, 32768)}[dim]
            out[f"quad_{dim}"] = QuadratureConfig(
                limit=float(limit if limit is not None else base[0]),
                nodes=int(nodes if nodes is not None else base[1]),
                rule=str(block.get("rule", "gauss-legendre")))
    return out


def curves_path(cfg: dict) -> str:
    path = cfg["curves"]
    if not isinstance(path, str):
        raise ValidationError("curves must be a file path string")
    if not os.path.isabs(path):
        path = os.path.join(cfg.get("_dir", "."), path)
    if not os.path.exists(path):
        raise ValidationError(f"curve file not found: {path}")
    return path


def load_curves_csv(path: str, grid: TenorGrid | None = None) \
        -> tuple[TenorGrid, InitialCurves]:
    """Read a curve CSV, validating ordering, ranges and grid consistency.

    Raises:
        ValidationError: naming the offending row on malformed input.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ValidationError(f"cannot read curve file {path}: {exc}") from exc
    if not rows or rows[0] != _CURVE_HEADER:
        raise ValidationError(
            f"{path}: header must be {','.join(_CURVE_HEADER)}")
    dates, rf, df = [], [], []
    for idx, row in enumerate(rows[1:], start=1):
        if len(row) != 3:
            raise ValidationError(f"{path}: row {idx} has {len(row)} fields")
        try:
            t, b, bbar = (float(v) for v in row)
        except ValueError as exc:
            raise ValidationError(
                f"{path}: row {idx} is not numeric: {exc}") from exc
        if dates and t <= dates[-1]:
            raise ValidationError(
                f"{path}: row {idx}: tenor_date {t:g} not increasing")
        dates.append(t)
        rf.append(b)
        df.append(bbar)
    try:
        file_grid = TenorGrid(dates=tuple(dates))
        curves = InitialCurves(risk_free=tuple(rf), defaultable=tuple(df))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    if grid is not None:
        if grid.n != file_grid.n or any(
                abs(a - b) > 1e-12 for a, b in zip(grid.dates,
                                                   file_grid.dates)):
            raise ValidationError(
                f"{path}: tenor dates disagree with the config tenor block")
    return file_grid, curves


def write_curves_csv(grid: TenorGrid, curves: InitialCurves) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CURVE_HEADER)
    for k in range(1, grid.n + 1):
        writer.writerow([repr(grid.date(k)),
                         repr(curves.risk_free_at(k)),
                         repr(curves.defaultable_at(k))])
    return buf.getvalue()


def _driver_to_dict(driver: ProductAffineSpec) -> dict:
    def comp(c: AffineComponentSpec) -> dict:
        return {"lambda": c.lam, "theta": c.theta, "eta": c.eta,
                "ell": c.ell, "mu": c.mu, "x0": c.x0}

    return {"risk_free": [comp(c) for c in driver.components[:driver.d1]],
            "spread": [comp(c) for c in driver.components[driver.d1:]]}


def model_to_dict(model: CalibratedModel) -> dict:
    return {
        "tenor_dates": list(model.grid.dates),
        "curves": {"risk_free": list(model.curves.risk_free),
                   "defaultable": list(model.curves.defaultable)},
        "driver": _driver_to_dict(model.driver),
        "u_seq": model.u_seq.tolist(),
        "w_seq": model.w_seq.tolist(),
        "spread_direction": model.spread_direction[
            model.driver.d1:].tolist(),
        "v_seq": model.v_seq.tolist(),
    }


def model_from_dict(data: dict) -> CalibratedModel:
    """Rebuild a CalibratedModel from its serialized form.

    Assembly re-verifies every invariant, so a tampered file fails loudly.
    """
    try:
        grid = TenorGrid(dates=tuple(data["tenor_dates"]))
        curves = InitialCurves(
            risk_free=tuple(data["curves"]["risk_free"]),
            defaultable=tuple(data["curves"]["defaultable"]))
        block = data["driver"]
        comps = [_component_from_dict(c, "driver") for c in
                 list(block["risk_free"]) + list(block["spread"])]
        driver = ProductAffineSpec(components=tuple(comps),
                                   d1=len(block["risk_free"]),
                                   d2=len(block["spread"]))
        u_seq = np.array(data["u_seq"], dtype=float)
        w_seq = np.array(data["w_seq"], dtype=float)
        sdir = data.get("spread_direction")
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed model file: {exc}") from exc
    return assemble(driver, grid, curves, u_seq, w_seq, sdir)
