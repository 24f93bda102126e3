"""Command-line interface: calibrate, price, simulate, curves.

Exit codes: 0 success, 1 parse/validation failure, 2 calibration
infeasibility, 3 infeasible damping.  Outputs are deterministic for a fixed
seed (sorted JSON keys, full-precision floats).
"""
from __future__ import annotations

import argparse
import csv
import io
import sys

from . import fileio
from .calibration import calibrate, verify_conditions
from .errors import (AssemblyError, CalibrationError, DampingError,
                     DomainError, NumericalError, ParameterError,
                     ValidationError)
from .fourier import bond_option_price, cds_spread, \
    cds_spread_model_independent, vulnerable_option_price
from .rates import default_intensity, defaultable_libor, libor, spread, \
    survival_process
from .simulation import martingale_table, mc_price_bond_option, mc_price_cds, \
    mc_price_vulnerable_option, simulate, survival_table

_INSTRUMENTS = ("cds", "bond-option", "vulnerable")


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _write_output(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_model(args):
    cfg = fileio.load_config(args.config)
    grid = fileio.build_grid(cfg)
    _, curves = fileio.load_curves_csv(fileio.curves_path(cfg), grid)
    model_path = getattr(args, "model", None) or cfg.get("model_file")
    if model_path:
        import json
        try:
            with open(model_path, "r", encoding="utf-8") as fh:
                model = fileio.model_from_dict(json.load(fh))
        except OSError as exc:
            raise ValidationError(f"cannot read model file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(
                f"{model_path}: JSON parse error at line {exc.lineno}, "
                f"column {exc.colno}") from exc
        return cfg, model
    driver = fileio.build_driver(cfg)
    calib = cfg.get("calibration", {})
    model = calibrate(driver, grid, curves,
                      risk_free_direction=calib.get("risk_free_direction"),
                      spread_direction=calib.get("spread_direction"))
    return cfg, model


def cmd_calibrate(args) -> int:
    cfg = fileio.load_config(args.config)
    driver = fileio.build_driver(cfg)
    grid = fileio.build_grid(cfg)
    _, curves = fileio.load_curves_csv(fileio.curves_path(cfg), grid)
    calib = cfg.get("calibration", {})
    model = calibrate(driver, grid, curves,
                      risk_free_direction=calib.get("risk_free_direction"),
                      spread_direction=calib.get("spread_direction"))
    report = verify_conditions(model, [0.0] + list(grid.dates))
    payload = fileio.model_to_dict(model)
    payload["conditions"] = report.as_dict()
    _write_output(fileio.dump_json(payload), args.out)
    return 0


def _price_analytic(model, cfg, args):
    settings = fileio.pricing_settings(cfg)
    if args.instrument == "cds":
        value = cds_spread(model, args.maturity_index, args.recovery,
                           args.coupon)
        return {"price": value, "method": "closed-form",
                "model_independent": cds_spread_model_independent(
                    model.curves, args.maturity_index, args.recovery,
                    args.coupon)}
    if args.instrument == "bond-option":
        est = bond_option_price(model, args.expiry_index, args.bond_index,
                                args.strike, args.recovery,
                                damping=settings.get("damping_2d"),
                                quad=settings.get("quad_2d"))
    else:
        est = vulnerable_option_price(model, args.expiry_index,
                                      args.bond_index, args.strike,
                                      args.recovery,
                                      damping=settings.get("damping_1d"),
                                      quad=settings.get("quad_1d"))
    return {"price": est.value, "method": est.method,
            "quadrature_error": est.quadrature_error}


def _price_mc(model, cfg, args):
    sim = fileio.build_sim_config(cfg, seed=args.seed)
    bundle = simulate(model, sim)
    if args.instrument == "cds":
        res = mc_price_cds(model, bundle, args.maturity_index, args.recovery,
                           args.coupon)
        return {"price": res.spread.value, "method": "mc",
                "standard_error": res.spread.std_error,
                "fee_leg": res.fee_leg,
                "protection_leg": res.protection_leg.value,
                "protection_leg_se": res.protection_leg.std_error}
    if args.instrument == "bond-option":
        est = mc_price_bond_option(model, bundle, args.expiry_index,
                                   args.bond_index, args.strike,
                                   args.recovery)
    else:
        est = mc_price_vulnerable_option(model, bundle, args.expiry_index,
                                         args.bond_index, args.strike,
                                         args.recovery)
    return {"price": est.value, "method": "mc",
            "standard_error": est.std_error}


def cmd_price(args) -> int:
    if args.instrument not in _INSTRUMENTS:
        sys.stderr.write(
            f"unknown instrument {args.instrument!r}; "
            f"choose one of {', '.join(_INSTRUMENTS)}\n"
            "usage: alm price --config CFG --instrument "
            "{cds|bond-option|vulnerable} ...\n")
        return 1
    if args.instrument == "cds":
        if args.maturity_index is None:
            raise ValidationError("cds needs --maturity-index")
    else:
        if args.expiry_index is None or args.bond_index is None \
                or args.strike is None:
            raise ValidationError(
                f"{args.instrument} needs --expiry-index, --bond-index "
                "and --strike")
    cfg, model = _load_model(args)
    payload = {"instrument": args.instrument,
               "parameters": _echo_params(args)}
    if args.method in ("analytic", "both"):
        payload["analytic"] = _price_analytic(model, cfg, args)
    if args.method in ("mc", "both"):
        payload["mc"] = _price_mc(model, cfg, args)
    if args.method == "both":
        se = payload["mc"]["standard_error"]
        diff = payload["analytic"]["price"] - payload["mc"]["price"]
        payload["z_score"] = diff / se if se > 0 else 0.0
    if args.method != "both":
        single = payload.pop("analytic" if args.method == "analytic" else "mc")
        payload.update(single)
    _write_output(fileio.dump_json(payload), args.out)
    return 0


def _echo_params(args) -> dict:
    out = {"recovery": args.recovery}
    if args.instrument == "cds":
        out.update({"maturity_index": args.maturity_index,
                    "coupon": args.coupon})
    else:
        out.update({"expiry_index": args.expiry_index,
                    "bond_index": args.bond_index, "strike": args.strike})
    return out


def cmd_simulate(args) -> int:
    cfg, model = _load_model(args)
    sim = fileio.build_sim_config(cfg, seed=args.seed)
    bundle = simulate(model, sim)
    payload = {
        "config": {"n_paths": sim.n_paths,
                   "steps_per_period": sim.steps_per_period,
                   "seed": sim.seed, "scheme": sim.scheme},
        "survival": survival_table(model, bundle),
        "martingale_diagnostics": martingale_table(model, bundle),
    }
    _write_output(fileio.dump_json(payload), args.out)
    if args.dump_paths:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        d = model.driver.d
        writer.writerow(["path_id", "tenor_index"]
                        + [f"state_{j}" for j in range(d)]
                        + ["gamma", "tau"])
        for p in range(bundle.n_paths):
            tau = repr(float(bundle.defaults[p]))
            for k in range(model.n + 1):
                gamma = 0.0 if k == 0 else float(bundle.hazards[p, k - 1])
                writer.writerow([p, k]
                                + [repr(float(v)) for v in bundle.states[p, k]]
                                + [repr(gamma), tau])
        with open(args.dump_paths, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    return 0


def cmd_curves(args) -> int:
    _, model = _load_model(args)
    x0 = model.x0
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tenor_date", "L0", "Lbar0", "H0", "S0", "survival"])
    for k in range(1, model.n):
        row = [model.grid.date(k),
               float(libor(model, x0, 0.0, k)),
               float(defaultable_libor(model, x0, 0.0, k)),
               float(default_intensity(model, x0, 0.0, k)),
               float(spread(model, x0, 0.0, k)),
               float(survival_process(model, x0, 0.0, k - 1))]
        writer.writerow([repr(v) for v in row])
    _write_output(buf.getvalue(), args.out)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="alm",
                     description="Defaultable affine LIBOR model tools")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="model config JSON")
        p.add_argument("--seed", type=int, default=None,
                       help="override the simulation seed")
        p.add_argument("--out", default=None, help="output file (stdout)")

    p_cal = sub.add_parser("calibrate", help="fit curves, emit model JSON")
    common(p_cal)
    p_cal.set_defaults(func=cmd_calibrate)

    p_price = sub.add_parser("price", help="price an instrument")
    common(p_price)
    p_price.add_argument("--model", default=None,
                         help="calibrated model JSON (else calibrate)")
    p_price.add_argument("--instrument", required=True)
    p_price.add_argument("--method", choices=("analytic", "mc", "both"),
                         default="analytic")
    p_price.add_argument("--maturity-index", type=int, default=None,
                         help="CDS protection end index m")
    p_price.add_argument("--expiry-index", type=int, default=None,
                         help="option expiry tenor index")
    p_price.add_argument("--bond-index", type=int, default=None,
                         help="underlying bond maturity index")
    p_price.add_argument("--strike", type=float, default=None)
    p_price.add_argument("--recovery", type=float, default=0.0)
    p_price.add_argument("--coupon", type=float, default=0.0)
    p_price.set_defaults(func=cmd_price)

    p_sim = sub.add_parser("simulate", help="run the Monte Carlo diagnostics")
    common(p_sim)
    p_sim.add_argument("--model", default=None)
    p_sim.add_argument("--dump-paths", default=None,
                       help="write per-path CSV to this file")
    p_sim.set_defaults(func=cmd_simulate)

    p_cur = sub.add_parser("curves", help="emit model-implied term structures")
    common(p_cur)
    p_cur.add_argument("--model", default=None)
    p_cur.set_defaults(func=cmd_curves)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DampingError as exc:
        msg = f"infeasible damping: {exc}"
        if exc.suggestion is not None:
            msg += f" (try R = {list(exc.suggestion.R)})"
        sys.stderr.write(msg + "\n")
        return 3
    except (ValidationError, ParameterError, DomainError, AssemblyError,
            IndexError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except CalibrationError as exc:
        msg = f"calibration infeasible: {exc}"
        if exc.attained is not None:
            msg += f" [attained bound {exc.attained:.6g}]"
        sys.stderr.write(msg + "\n")
        return 2
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 4


if __name__ == "__main__":
    sys.exit(main())
