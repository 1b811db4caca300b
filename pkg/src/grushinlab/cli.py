"""Command-line front end.

Every command resolves its parameters from (in order) explicit flags, the
``params`` block of ``--config`` and built-in defaults, then embeds the
resolved configuration in the header of its output. Exit status is 0 on
success, 2 when an audit fails and 1 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import (ConfigError, RunConfig, cached_eigensolve, clean_json, csv_text, json_text,
                     output_header, parse_potential)
from .constants import (AssumptionParams, FreeConstants, HypothesisError, build_report, cobs_formula,
                        critical_power, exponent_table, proof_epsilon, spectral_exponent)
from .control_sets import (empty_indicator, full_indicator, indicator, make_distributed,
                           make_equidistributed, thickness)
from .grushin import (GrushinState, build_modes, direct_oracle, evolve, grushin_observability,
                      scan_scaled_observability)
from .spectral import Grid, export_spectrum
from .verify import (AuditError, VerificationReport, build_gramian, caccioppoli_audit,
                     gramian_observability, harmonic_lift_audit, localization_audit, spectral_ratio,
                     synthesize_control, weighted_norm_audit)

AUDITS = ("spectral-ineq", "localization", "weighted", "caccioppoli", "lift", "observability", "control")
FREE_CONSTANT_NAMES = tuple(FreeConstants.__dataclass_fields__)


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


# name -> (type, default, help)
_GRID = {
    "V": (str, "power:2", "potential: power:BETA[:C] or table:PATH"),
    "n": (int, 1, "space dimension"),
    "L": (float, 10.0, "box half-width"),
    "N": (int, 400, "interior nodes per dimension"),
}
_SET = {
    "set": (str, "equidistributed", "control set: equidistributed, distributed, full or empty"),
    "gamma": (float, 0.2, "set parameter gamma"),
    "sigma": (float, 0.0, "set parameter sigma"),
    "placement": (str, "cell_center", "cell_center or seeded_random"),
}
_PHYS = {
    "T": (float, 1.0, "time horizon"),
    "s": (float, 1.0, "fractional power"),
}
_CONST = {"const": (str, "", "free-constant overrides NAME=VALUE,NAME=VALUE")}

COMMANDS = {
    "constants": {
        "assumption": (str, "A1", "A1 or A2"),
        "c1": (float, 1.0, "lower growth constant"),
        "c2": (float, None, "upper growth constant (defaults to c1)"),
        "beta1": (float, 2.0, "lower growth exponent"),
        "beta2": (float, None, "upper growth exponent (defaults to beta1)"),
        "sigma": (float, 0.0, "set parameter sigma"),
        "gamma": (float, 0.25, "set parameter gamma"),
        "n": (int, 1, "space dimension"),
        "s": (float, None, "fractional power; enables the observability constants"),
        "T": (float, 1.0, "time horizon"),
        "epsilon": (float, None, "large-r exponent slack (defaults to the proof's choice)"),
        **_CONST,
    },
    "eigs": {**_GRID, "count": (int, 10, "number of eigenpairs"),
             "cutoff": (float, None, "eigenvalue cutoff instead of a count"),
             "vectors_out": (str, None, "write eigenvectors to this binary sidecar")},
    "sets": {"gamma": (float, 0.2, "set parameter gamma"), "sigma": (float, 0.0, "set parameter sigma"),
             "n": (int, 1, "space dimension"), "box": (str, "-5,5", "lattice cell range LO,HI"),
             "set": (str, "distributed", "equidistributed or distributed"),
             "placement": (str, "cell_center", "cell_center or seeded_random"),
             "L": (float, None, "grid half-width for the mask export"),
             "N": (int, None, "grid nodes for the mask export"),
             "mask_out": (str, None, "CSV path for the mask node indices")},
    "audit": {**_GRID, **_SET, **_PHYS, **_CONST,
              "audits": (str, "localization,observability", "comma list of " + ",".join(AUDITS)),
              "count": (int, 60, "eigenpairs to compute"),
              "lambdas": (str, "5,10,20", "spectral windows"),
              "rho": (float, 1.0, "ball radius for the Caccioppoli and lift audits"),
              "samples": (int, 10, "random coefficient vectors for the lift audit")},
    "grushin": {"V": _GRID["V"], "L": (float, 6.0, "box half-width"), "N": (int, 61, "x nodes"),
                "Ny": (int, 16, "y nodes for the oracle"), "M": (int, 2, "mode cap per y-dimension"),
                "count": (int, None, "eigenpairs per mode (default: all)"),
                **_SET, "T": (float, 0.5, "time horizon"), "s": (float, 1.0, "fractional power"),
                "oracle": (bool, False, "compare with the direct oracle"), **_CONST},
    "control": {**_GRID, **_SET, **_PHYS, "gamma": (float, 0.3, "set parameter gamma"),
                "count": (int, 30, "modes in the truncated span"),
                "u0": (str, "1,1", "initial eigen-coefficients"),
                "eps": (float, 1e-12, "Tikhonov regularization"),
                "times": (int, 11, "time samples of the control")},
    "scan-r": {**_GRID, **_SET, **_PHYS, **_CONST, "count": (int, 60, "eigenpairs per scale"),
               "r_values": (str, "0.25,0.5,1,2,4,8,16,32,64", "scale factors"),
               "additive": (str, None, "second potential added to r V")},
    "phase-diagram": {"beta_min": (float, 0.1, "smallest beta"), "beta_max": (float, 4.0, "largest beta"),
                      "resolution": (int, 40, "number of beta samples")},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


GLOBAL_FLAGS = {
    "config": (str, "JSON run configuration"),
    "out": (str, "output path (stdout when omitted)"),
    "seed": (int, "random seed"),
    "threads": (int, "worker threads"),
    "tolerance": (float, "relative slack for audit pass flags"),
}


def _global_flags(prefix: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    for name, (typ, helptext) in GLOBAL_FLAGS.items():
        p.add_argument("--" + name, dest=prefix + name, type=typ, default=None, help=helptext)
    return p


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    common = _global_flags("")
    parser = _Parser(prog="grushinlab", description=__doc__.splitlines()[0],
                     parents=[_global_flags("top_")])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name, parents=[common])
        for key, (typ, default, helptext) in opts.items():
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None, help=helptext)
            else:
                p.add_argument(flag, dest=key, type=typ, default=None, help=f"{helptext} (default {default})")
    return parser


def resolve(args) -> RunConfig:
    for name in GLOBAL_FLAGS:
        if getattr(args, name) is None:
            setattr(args, name, getattr(args, "top_" + name))
    file_cfg = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        base = RunConfig.from_dict(file_cfg)
        if base.command and base.command != args.command:
            raise ConfigError(f"config is for command {base.command!r}, not {args.command!r}")
        file_cfg = base.to_dict()
    fparams = file_cfg.get("params", {})
    opts = COMMANDS[args.command]
    unknown = set(fparams) - set(opts)
    if unknown:
        raise ConfigError(f"unknown parameters for {args.command}: {sorted(unknown)}")
    params = {}
    for key, (typ, default, _) in opts.items():
        val = getattr(args, key)
        if val is None:
            val = fparams.get(key, default)
        params[key] = val

    def pick(name, default):
        v = getattr(args, name)
        return v if v is not None else file_cfg.get(name, default)

    return RunConfig(args.command, params, int(pick("seed", 0) or 0), float(pick("tolerance", 0.0) or 0.0),
                     pick("threads", None), pick("out", None))


def _emit(text: str, cfg: RunConfig):
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _free_constants(spec: str) -> FreeConstants:
    kw = {}
    for item in filter(None, (x.strip() for x in (spec or "").split(","))):
        if "=" not in item:
            raise ConfigError(f"free constant override {item!r} is not NAME=VALUE")
        name, value = item.split("=", 1)
        if name not in FREE_CONSTANT_NAMES:
            raise ConfigError(f"unknown free constant {name!r}; choose from {FREE_CONSTANT_NAMES}")
        kw[name] = float(value)
    return FreeConstants(**kw)


def _grid(p, n=None) -> Grid:
    return Grid(int(n if n is not None else p.get("n", 1)), float(p["L"]), int(p["N"]))


def _potential_key(spec):
    if isinstance(spec, str) and spec.startswith("table:"):
        return {"spec": spec, "sha256": hashlib.sha256(Path(spec[6:]).read_bytes()).hexdigest()}
    return spec


def _mask(p, grid, seed):
    kind = p["set"]
    if kind == "full":
        return full_indicator(grid)
    if kind == "empty":
        return empty_indicator(grid)
    lo = -int(math.floor(grid.L))
    box = (lo, -lo)
    if kind == "equidistributed":
        d = make_equidistributed(p["gamma"], box, grid.n, p["placement"], seed)
    elif kind == "distributed":
        d = make_distributed(p["gamma"], p["sigma"], box, grid.n, p["placement"], seed)
    else:
        raise ConfigError(f"unknown set kind {kind!r}")
    return indicator(d, grid)


def _assumption_params(V, p) -> AssumptionParams:
    c1, c2, b1, b2 = V.params
    gamma = p["gamma"] if 0 < p["gamma"] < 0.5 else 0.25
    return AssumptionParams(V.assumption, c1, c2, b1, b2, p.get("sigma", 0.0), gamma, V.n)


# ----------------------------------------------------------------- commands


def cmd_constants(cfg: RunConfig) -> int:
    p = cfg.params
    try:
        params = AssumptionParams(p["assumption"], p["c1"], p["c2"] if p["c2"] is not None else p["c1"],
                                  p["beta1"], p["beta2"] if p["beta2"] is not None else p["beta1"],
                                  p["sigma"], p["gamma"], p["n"])
        report = build_report(params, s=p["s"], T=p["T"], free_constants=_free_constants(p["const"]),
                              epsilon=p["epsilon"])
    except (HypothesisError, ValueError) as exc:
        _emit(json_text({"error": {"type": type(exc).__name__, "message": str(exc),
                                   "hypothesis": "s > zeta" if "zeta" in str(exc) else None}}, cfg), cfg)
        return 1
    _emit(json_text({"report": report.to_dict()}, cfg), cfg)
    return 0


def cmd_eigs(cfg: RunConfig) -> int:
    p = cfg.params
    V = parse_potential(p["V"], p["n"])
    g = _grid(p)
    count = None if p["cutoff"] is not None else p["count"]
    S = cached_eigensolve(_potential_key(p["V"]), V, g, count=count, cutoff=p["cutoff"])
    rows = [{"index": k, "eigenvalue": float(v)} for k, v in enumerate(S.values)]
    _emit(csv_text(["index", "eigenvalue"], rows, cfg), cfg)
    if p["vectors_out"]:
        export_spectrum(S, Path(p["vectors_out"]).with_suffix(".csv"), p["vectors_out"])
    return 0


def cmd_sets(cfg: RunConfig) -> int:
    p = cfg.params
    lo, hi = (int(float(v)) for v in str(p["box"]).split(","))
    if p["set"] == "equidistributed":
        d = make_equidistributed(p["gamma"], (lo, hi), p["n"], p["placement"], cfg.seed)
    elif p["set"] == "distributed":
        d = make_distributed(p["gamma"], p["sigma"], (lo, hi), p["n"], p["placement"], cfg.seed)
    else:
        raise ConfigError("sets supports equidistributed or distributed")
    payload = {"set": d.to_dict()}
    if p["L"] is not None and p["N"] is not None:
        ind = indicator(d, Grid(p["n"], p["L"], p["N"]))
        payload["measure"] = ind.measure
        payload["thickness"] = thickness(ind, 1.0)
        if p["mask_out"]:
            ind.to_csv(p["mask_out"])
    _emit(json_text(payload, cfg), cfg)
    return 0


def _audit_reports(cfg: RunConfig) -> list:
    p = cfg.params
    names = [a.strip() for a in p["audits"].split(",") if a.strip()]
    bad = [a for a in names if a not in AUDITS]
    if bad:
        raise ConfigError(f"unknown audits {bad}; choose from {AUDITS}")
    V = parse_potential(p["V"], p["n"])
    g = _grid(p)
    fc = _free_constants(p["const"])
    params = _assumption_params(V, p)
    lambdas = _floats(p["lambdas"])
    if "observability" in names and not p["s"] > params.zeta:
        raise ConfigError(f"observability audit needs s > zeta = {params.zeta:g}")
    S = cached_eigensolve(_potential_key(p["V"]), V, g, count=p["count"])
    if max(lambdas) > S.cutoff:
        raise ConfigError(f"count={p['count']} reaches eigenvalue {S.cutoff:.4g} only; "
                          f"raise --count to cover lambda={max(lambdas):g}")
    mask = _mask(p, g, cfg.seed)
    tol = cfg.tolerance
    c1, beta1 = params.c1, params.beta1
    out = []
    meta = {"gamma": p["gamma"], "sigma": p["sigma"], "T": p["T"], "s": p["s"], "r": 1.0}
    for name in names:
        if name == "spectral-ineq":
            for lam in lambdas:
                r = spectral_ratio(S, lam, mask)["ratio"]
                expo = spectral_exponent(params, params.c1, params.c2, lam)["script_J"]
                bound = fc.C_spec * expo * math.log(1 / params.gamma)
                out.append(VerificationReport("log_spectral_ratio", math.log(r) if r < math.inf else math.inf,
                                              bound, tol, "upper", {**meta, "lambda": lam, "ratio": r}))
        elif name == "localization":
            for lam in lambdas:
                a = localization_audit(S, lam, c1, beta1)
                out.append(VerificationReport("localization_C_hat", a["C_hat_min"], fc.C_hat, tol, "upper",
                                              {**meta, "lambda": lam, "rho_min": a["rho_min"], "h": g.h}))
        elif name == "weighted":
            a = weighted_norm_audit(S, max(lambdas), c1, beta1)
            for row in a["rows"]:
                out.append(VerificationReport("weighted_norm", row["weighted"], row["bound"], tol, "upper",
                                              {**meta, "k": row["k"], "lambda": row["lambda"]}))
        elif name == "caccioppoli":
            for k in range(min(10, S.K)):
                a = caccioppoli_audit(S, k, p["rho"])
                out.append(VerificationReport("caccioppoli", a["constant_min"], a["bound"], tol, "upper",
                                              {**meta, "k": k, "rho": p["rho"]}))
        elif name == "lift":
            rng = np.random.default_rng(cfg.seed)
            lam = min(lambdas)
            size = int(np.count_nonzero((S.values > 0) & (S.values <= lam)))
            for i in range(p["samples"]):
                a = harmonic_lift_audit(S, rng.standard_normal(size), p["rho"], lam)
                m = {**meta, "lambda": lam, "rho": p["rho"], "sample": i}
                out.append(VerificationReport("lift_upper", a["H1_norm_sq"], a["upper"], tol, "upper", m))
                out.append(VerificationReport("lift_lower", a["H1_norm_sq"], a["lower"], tol, "lower", m))
        elif name == "observability":
            res = gramian_observability(build_gramian(S, mask, p["T"], p["s"]))
            table = exponent_table(params, proof_epsilon(params, p["s"]))
            bound = cobs_formula(p["T"], p["s"], 1.0, params, table, fc)
            out.append(VerificationReport("C_emp", res["C_emp"], bound, tol, "upper",
                                          {**meta, "condition": res["condition"], "note": res["reason"]}))
        elif name == "control":
            B = build_gramian(S, mask, p["T"], p["s"], truncate=False, modes=min(30, S.K))
            obs = gramian_observability(B)
            u0 = np.zeros(B.dim)
            u0[:2] = 1.0
            c = synthesize_control(B, u0, eps=1e-12, coefficients=True)
            norm0 = float(np.linalg.norm(u0))
            out.append(VerificationReport("hum_terminal_norm", c["terminal_norm"], 1e-6 * norm0, tol, "upper",
                                          {**meta, "eps": c["eps"]}))
            out.append(VerificationReport("hum_cost", c["cost"], obs["C_emp"] / p["T"] * norm0**2, tol, "upper",
                                          dict(meta)))
    return out


def cmd_audit(cfg: RunConfig) -> int:
    reports = _audit_reports(cfg)
    lines = [json.dumps({"header": output_header(cfg)}, sort_keys=True)]
    lines += [json.dumps(clean_json(r.to_dict()), sort_keys=True) for r in reports]
    _emit("\n".join(lines) + "\n", cfg)
    return 0 if all(r.passed for r in reports) else 2


def cmd_grushin(cfg: RunConfig) -> int:
    p = cfg.params
    V = parse_potential(p["V"], 1)
    g = Grid(1, p["L"], p["N"])
    if p["oracle"] and p["N"] * p["Ny"] > 10_000:
        raise ConfigError(f"oracle needs N*Ny <= 10000, got {p['N'] * p['Ny']}; lower --N or --Ny")
    if p["oracle"] and 2 * p["M"] >= p["Ny"]:
        raise ConfigError(f"oracle needs Ny > 2M; got Ny={p['Ny']}, M={p['M']}")
    fam = build_modes(V, g, p["M"], p["s"], count=p["count"], threads=cfg.threads)
    mask = _mask(p, g, cfg.seed)
    params = _assumption_params(V, p)
    fc = _free_constants(p["const"])
    use_params = params if p["s"] > params.zeta else None
    rep = grushin_observability(fam, mask, p["T"], p["s"], use_params, fc, threads=cfg.threads)
    payload = {"observability": rep.to_dict()}
    if p["oracle"]:
        rng = np.random.default_rng(cfg.seed)
        Ny = p["Ny"]
        y = 2 * np.pi * np.arange(Ny) / Ny
        x = g.axis
        u0 = np.zeros((g.N, Ny))
        for k in range(0, p["M"] + 1):
            a, b = rng.standard_normal(2)
            u0 += np.exp(-(x[:, None] - rng.uniform(-1, 1)) ** 2) * (a * np.cos(k * y) + b * np.sin(k * y))[None, :]
        state = GrushinState.from_physical(u0, g, fam.modes)
        by_modes = evolve(fam, state, p["T"]).to_physical(Ny).real
        direct = direct_oracle(V, g, Ny, p["T"], p["s"], u0)
        dev = float(np.linalg.norm(by_modes - direct) / np.linalg.norm(direct))
        payload["oracle"] = {"max_relative_deviation": dev, "Ny": Ny, "t": p["T"], "s": p["s"]}
    _emit(json_text(payload, cfg), cfg)
    return 0


def cmd_control(cfg: RunConfig) -> int:
    p = cfg.params
    V = parse_potential(p["V"], p["n"])
    g = _grid(p)
    S = cached_eigensolve(_potential_key(p["V"]), V, g, count=p["count"])
    mask = _mask(p, g, cfg.seed)
    B = build_gramian(S, mask, p["T"], p["s"], truncate=False)
    obs = gramian_observability(B)
    coeffs = np.zeros(B.dim)
    given = _floats(p["u0"])
    if len(given) > B.dim:
        raise ConfigError(f"u0 has {len(given)} coefficients but the span has {B.dim}")
    coeffs[:len(given)] = given
    res = synthesize_control(B, coeffs, eps=p["eps"], coefficients=True, n_times=p["times"])
    norm0 = float(np.linalg.norm(coeffs))
    payload = {
        "C_emp": obs["C_emp"],
        "terminal_norm": res["terminal_norm"],
        "initial_norm": norm0,
        "cost": res["cost"],
        "duality_bound": obs["C_emp"] / p["T"] * norm0**2,
        "eps": res["eps"],
        "times": res["times"],
        "control_l2_norms": [g.norm(h) for h in res["control"]],
    }
    _emit(json_text(payload, cfg), cfg)
    return 0


def cmd_scan_r(cfg: RunConfig) -> int:
    p = cfg.params
    V = parse_potential(p["V"], p["n"])
    Vt = parse_potential(p["additive"], p["n"]) if p["additive"] else None
    g = _grid(p)
    params = _assumption_params(V, p)
    if not p["s"] > params.zeta:
        raise ConfigError(f"scan needs s > zeta = {params.zeta:g}")
    mask = _mask(p, g, cfg.seed)
    rows = scan_scaled_observability(V, _floats(p["r_values"]), mask, p["T"], p["s"], Vt, p["count"],
                                     params, _free_constants(p["const"]), threads=cfg.threads)
    _emit(csv_text(["r", "C_emp", "bound", "log_bound"], rows, cfg), cfg)
    return 0


def phase_rows(beta_min: float, beta_max: float, resolution: int) -> list:
    """Boundary of the controllable region for ``V = |x|^beta``, with the ``beta = 1`` breakpoint."""
    if not (0 < beta_min < beta_max) or resolution < 2:
        raise ConfigError("need 0 < beta_min < beta_max and resolution >= 2")
    betas = set(np.linspace(beta_min, beta_max, resolution).round(12).tolist())
    if beta_min <= 1.0 <= beta_max:
        betas.add(1.0)
    rows = []
    for b in sorted(betas):
        assumption = "A2" if b < 1 else "A1"
        rows.append({"beta": b, "s_boundary": critical_power(assumption, b), "assumption": assumption,
                     "regime_above": "controllable", "regime_below": "unknown"})
    return rows


def cmd_phase_diagram(cfg: RunConfig) -> int:
    p = cfg.params
    rows = phase_rows(p["beta_min"], p["beta_max"], p["resolution"])
    _emit(csv_text(["beta", "s_boundary", "assumption", "regime_above", "regime_below"], rows, cfg), cfg)
    return 0


HANDLERS = {
    "constants": cmd_constants,
    "eigs": cmd_eigs,
    "sets": cmd_sets,
    "audit": cmd_audit,
    "grushin": cmd_grushin,
    "control": cmd_control,
    "scan-r": cmd_scan_r,
    "phase-diagram": cmd_phase_diagram,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args)
        return HANDLERS[cfg.command](cfg)
    except (ConfigError, HypothesisError, AuditError, ValueError, OSError) as exc:
        sys.stderr.write(f"grushinlab {args.command}: error: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
