"""``mtdg`` command line: simulate, estimate, analyse, backtest, validate.

Every subcommand reads a flat ``key = value`` config (see ``mtdg.io.CONFIG_KEYS``),
writes its artifacts into ``--output`` and exits 0. Failures print one line
``error: <ErrorClass>: <message>`` to stderr and exit 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as mio
from . import seeding
from .backtest import (FixedModelPredictor, GmmPredictor, MlePredictor, UnconditionalPredictor,
                       UniformPredictor, rolling_backtest)
from .diagnostics import (SignatureConfig, correlation_report, fit_dlf, replica_correlations,
                          signature_plot)
from .errors import DomainError, MtdgError
from .gmm import fit_gmm
from .model import EventSequence, simulate, validate_model
from .moments import bootstrap_correlations, model_correlations
from .strong import build_strong_model, fit_mle

log = logging.getLogger("mtdg")


def _need(cfg, key):
    if not cfg.get(key):
        raise DomainError(f"config key {key!r} is required for this command")
    return cfg[key]


def _input(cfg) -> EventSequence:
    return mio.ingest_trades(_need(cfg, "input"))


def _plot(cfg, fn, *args, **kw):
    if cfg["plots"]:
        from . import plots

        getattr(plots, fn)(*args, **kw)


def cmd_simulate(cfg, out: Path):
    model = mio.load_model(_need(cfg, "model"))
    day_length = cfg["day_length"] or None
    seq = simulate(model, cfg["n_events"], seeding.sub_seed(cfg["seed"], seeding.SIMULATE),
                   day_length=day_length)
    labels = tuple(f"day{d:04d}" for d in range(seq.n_days))
    seq = EventSequence(seq.states, seq.day_offsets, seq.state_space, labels)
    if seq.state_space.event_map is not None:
        mio.export_trades(seq, out / "trades.csv")
    else:
        ids = seq.day_ids()
        mio.write_table(out / "states.csv", "mtdg-states/1", ["day", "state"],
                        ((labels[ids[t]], int(s) + 1) for t, s in enumerate(seq.states)))
    log.info("simulated %d events in %d days", len(seq), seq.n_days)


def cmd_estimate_mle(cfg, out: Path):
    seq = _input(cfg)
    p = cfg["p"]
    theta, report = fit_mle(seq, p, starts=cfg["starts"],
                            seed=seeding.sub_seed(cfg["seed"], seeding.MLE_STARTS),
                            eps_feas=cfg["eps_feas"], maxiter=cfg["maxiter"])
    model = build_strong_model(theta, p, cfg["eps_feas"])
    mio.save_model(model, out / "model.json", extra={"strong_params": theta.to_dict()})
    doc = report.to_dict()
    doc["seconds"] = None  # wall time would break byte-reproducibility
    mio.save_fit_report(doc, out / "fit_report.json")
    _plot(cfg, "plot_lag_weights", out / "lag_weights.png", model.lam, "fitted lag weights")
    log.info("log-likelihood %.6f, winner start %d", report.log_likelihood, report.winner)


def cmd_estimate_gmm(cfg, out: Path):
    seq = _input(cfg)
    p = cfg["p"]
    fit = fit_gmm(seq, p, symmetry=cfg["symmetry"], eps_feas=cfg["eps_feas"],
                  n_boot=cfg["n_boot"], seed=seeding.sub_seed(cfg["seed"], seeding.BOOTSTRAP),
                  block_days=cfg["block_days"])
    mio.save_model(fit.model, out / "model.json")
    mio.save_fit_report({**fit.to_trace(), "schema": "mtdg-gmm-trace"}, out / "solver_trace.json")
    a = fit.a_stack
    se = fit.stderr
    rows = []
    for g in range(p):
        for h in range(fit.model.m):
            for i in range(fit.model.m):
                rows.append((g + 1, h + 1, i + 1, float(a[g, h, i]),
                             float(se[g, h, i]) if se is not None else float("nan")))
    mio.write_table(out / "deviation.csv", "mtdg-deviation/1", ["lag", "from", "to", "a", "stderr"],
                    rows)
    if fit.factorization is not None:
        _plot(cfg, "plot_lag_weights", out / "lag_weights.png", fit.factorization.lam,
              "identified lag weights")
    log.info("status %s, residual %.3e", fit.status, fit.residual)


def _correlation_rows(emp, mod=None, table=None):
    if table is not None:
        return ["pi1", "pi2", "lag", "empirical", "model", "stderr", "z"], list(table.rows())
    return ["pi1", "pi2", "lag", "value", "stderr"], list(emp.rows())


def cmd_correlations(cfg, out: Path):
    seq = _input(cfg)
    emp = bootstrap_correlations(seq, cfg["max_lag"], n_boot=cfg["n_boot"],
                                 seed=seeding.sub_seed(cfg["seed"], seeding.BOOTSTRAP),
                                 symmetrize=cfg["symmetry"], block_days=cfg["block_days"])
    mod = table = None
    if cfg.get("model"):
        model = mio.load_model(cfg["model"])
        mod = model_correlations(model, cfg["max_lag"])
        reps = None
        if cfg["n_mc"] >= 2:
            day_len = max(1, len(seq) // seq.n_days)
            reps = replica_correlations(model, len(seq), cfg["max_lag"], cfg["n_mc"],
                                        seeding.sub_seed(cfg["seed"], seeding.REPLICAS),
                                        day_length=day_len, symmetrize=cfg["symmetry"])
        table = correlation_report(emp, mod, reps)
    cols, rows = _correlation_rows(emp, mod, table)
    mio.write_table(out / "correlations.csv", "mtdg-correlations/1", cols, rows,
                    {"p_c": emp.p_c, "p_nc": emp.p_nc, "max_lag": cfg["max_lag"]})
    _plot(cfg, "plot_correlations", out / "correlations.png", emp, mod)


def cmd_signature(cfg, out: Path):
    L = cfg["max_lag"]
    curves, emp_corr, model_corr = {}, None, None
    if cfg.get("input"):
        seq = _input(cfg)
        emp_corr = bootstrap_correlations(seq, L, n_boot=0, symmetrize=cfg["symmetry"])
    if cfg.get("model"):
        model_corr = model_correlations(mio.load_model(cfg["model"]), L)
    if emp_corr is None and model_corr is None:
        raise DomainError("signature needs an input trade file, a model, or both")
    d_lf_opt = cfg["d_lf"].strip().lower()
    if d_lf_opt == "fit":
        if emp_corr is None or model_corr is None:
            raise DomainError("d_lf = fit needs both an input trade file and a model")
        emp_d = signature_plot(emp_corr, SignatureConfig(cfg["g_c1"], 0.0, L))
        d_lf = fit_dlf(emp_d, model_corr, SignatureConfig(cfg["g_c1"], 0.0, L))
    else:
        try:
            d_lf = float(d_lf_opt)
        except ValueError:
            raise DomainError(f"d_lf must be a number or 'fit', got {cfg['d_lf']!r}") from None
    cfg_sig = SignatureConfig(cfg["g_c1"], d_lf, L)
    lags = np.arange(1, L + 1)
    cols = ["lag"]
    p_c = None
    if emp_corr is not None:
        curves["empirical"] = signature_plot(emp_corr, SignatureConfig(cfg["g_c1"], 0.0, L))
        cols.append("empirical")
        p_c = emp_corr.p_c
    if model_corr is not None:
        curves["model"] = signature_plot(model_corr, cfg_sig)
        cols.append("model")
        p_c = model_corr.p_c if p_c is None else p_c
    rows = [(int(lag), *(float(curves[c][k]) for c in cols[1:])) for k, lag in enumerate(lags)]
    mio.write_table(out / "signature.csv", "mtdg-signature/1", cols, rows,
                    {"g_c1": cfg["g_c1"], "d_lf": d_lf, "p_c": p_c})
    _plot(cfg, "plot_signature", out / "signature.png", lags, curves)


def _predictors(cfg):
    out = []
    for name in (s.strip() for s in cfg["predictors"].split(",") if s.strip()):
        if name == "uniform":
            out.append(UniformPredictor())
        elif name == "unconditional":
            out.append(UnconditionalPredictor())
        elif name == "gmm":
            out.append(GmmPredictor(cfg["p"], cfg["symmetry"], eps_feas=cfg["eps_feas"]))
        elif name == "mle":
            out.append(MlePredictor(cfg["p"], starts=cfg["starts"], eps_feas=cfg["eps_feas"],
                                    seed=seeding.sub_seed(cfg["seed"], seeding.MLE_STARTS)))
        elif name == "model":
            out.append(FixedModelPredictor(mio.load_model(_need(cfg, "model")), "model"))
        else:
            raise DomainError(f"unknown predictor {name!r} "
                              "(choose from uniform, unconditional, gmm, mle, model)")
    if not out:
        raise DomainError("no predictors configured")
    return out


def cmd_backtest(cfg, out: Path):
    seq = _input(cfg)
    rep = rolling_backtest(seq, _predictors(cfg), cfg["train_days"], cfg["test_days"],
                           cfg["step_days"])
    rows = [(n, s.epe, s.stderr, s.n_events, s.n_infinite) for n, s in rep.scores.items()]
    meta = {"train_days": rep.train_days, "test_days": rep.test_days,
            "step_days": rep.step_days, "windows": rep.n_windows, "skipped": len(rep.skipped)}
    mio.write_table(out / "epe.csv", "mtdg-epe/1",
                    ["predictor", "epe", "stderr", "n_events", "n_infinite"], rows, meta)
    day_rows = [(n, d, label, k, mean, n_inf) for n, s in rep.scores.items()
                for d, label, k, mean, n_inf in s.per_day]
    mio.write_table(out / "epe_days.csv", "mtdg-epe-days/1",
                    ["predictor", "day", "label", "n_events", "epe", "n_infinite"], day_rows)
    _plot(cfg, "plot_epe", out / "epe.png", rep)
    for s in rep.skipped:
        log.warning("skipped window %s", s)


def cmd_validate(cfg, out: Path):
    model = mio.load_model(_need(cfg, "model"))
    rep = validate_model(model, cfg["eps_feas"])
    mio.atomic_write_text(out / "validation.json", json.dumps(rep.to_dict(), indent=1) + "\n")
    if not rep.ok:
        raise DomainError(f"model invalid: {len(rep.violations)} violation(s); first: "
                          f"{rep.violations[0]}")
    print("model valid")


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate-mle": cmd_estimate_mle,
    "estimate-gmm": cmd_estimate_gmm,
    "correlations": cmd_correlations,
    "signature": cmd_signature,
    "backtest": cmd_backtest,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mtdg", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="flat key = value config file")
    ap.add_argument("--seed", type=int, help="root seed (overrides config)")
    ap.add_argument("--output", default="out", help="output directory (default: out)")
    ap.add_argument("--input", help="trade file (overrides config)")
    ap.add_argument("--model", help="model document (overrides config)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one config key; repeatable")
    ap.add_argument("--verbose", action="store_true")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
        text += "".join(f"\n{kv.replace('=', ' = ', 1)}" for kv in args.set)
        cfg = mio.parse_config(text)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.input:
            cfg["input"] = args.input
        if args.model:
            cfg["model"] = args.model
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out)
    except (MtdgError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())
