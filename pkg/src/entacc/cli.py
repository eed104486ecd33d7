"""Command line front end: ``entacc {entropy,rate-curve,simulate,verify}``.

Exit codes: 0 success, 1 a verification violation was found, 2 bad
configuration or input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from . import eat, protocol, verification
from .convex import OptConfig
from .entropy import cond_renyi_down, cond_renyi_up, max_entropy, min_entropy, renyi_divergence
from .linalg import DensityMatrix, Operator, operator_from_dict

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2
RATE_COLUMNS = ("n", "alpha", "h", "g_eps", "V", "K_prime", "c1", "c0", "bound", "rate")


class ConfigError(Exception):
    pass


def _check_keys(obj: dict, required, optional=(), where="config"):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ConfigError(f"missing keys in {where}: {missing}")


def _load_config(path):
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _num(x):
    """JSON-safe float: infinities become strings."""
    x = float(x)
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _alpha(x):
    if isinstance(x, str):
        if x in ("inf", "+inf", "infinity"):
            return math.inf
        raise ConfigError(f"bad alpha {x!r}")
    return float(x)


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------


def _operator(obj, base: Path | None):
    if isinstance(obj, str):
        p = Path(obj) if base is None else base / obj
        try:
            obj = json.loads(p.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read operator file {obj}: {exc}") from exc
    return operator_from_dict(obj)


ENTROPY_QUANTITIES = ("renyi_divergence", "cond_renyi_down", "cond_renyi_up", "min_entropy", "max_entropy")


def cmd_entropy(cfg: dict, seed: int, tol: float | None, base: Path | None = None) -> dict:
    _check_keys(cfg, ["quantity", "state"], ["alpha", "sigma", "a_labels", "b_labels", "restarts"])
    q = cfg["quantity"]
    if q not in ENTROPY_QUANTITIES:
        raise ConfigError(f"unknown quantity {q!r}")
    op = _operator(cfg["state"], base)
    rho = DensityMatrix(op.layout, op.matrix, trace_tol=1e-8, psd_tol=1e-8)
    alpha = _alpha(cfg.get("alpha", 1.0))
    opt = OptConfig(restarts=int(cfg.get("restarts", 25)), seed=seed)
    if tol is not None:
        opt.certify_tol = tol
    out = {"quantity": q, "alpha": _num(alpha)}
    if q == "renyi_divergence":
        if "sigma" not in cfg:
            raise ConfigError("renyi_divergence needs sigma")
        sig = _operator(cfg["sigma"], base)
        out["value"] = _num(renyi_divergence(rho, Operator(sig.layout, sig.matrix), alpha))
        return out
    if "a_labels" not in cfg or "b_labels" not in cfg:
        raise ConfigError(f"{q} needs a_labels and b_labels")
    a, b = list(cfg["a_labels"]), list(cfg["b_labels"])
    if q == "cond_renyi_down":
        out["value"] = _num(cond_renyi_down(rho, a, b, alpha))
    elif q == "min_entropy":
        val, rep = min_entropy(rho, a, b)
        out["alpha"] = "+inf"
        out["value"] = _num(val)
        out["certificate"] = {k: _num(v) if isinstance(v, float) else v for k, v in rep.to_dict().items()}
    else:
        res = cond_renyi_up(rho, a, b, alpha, opt) if q == "cond_renyi_up" else max_entropy(rho, a, b, opt)
        if q == "max_entropy":
            out["alpha"] = 0.5
        out["value"] = _num(res.value)
        out["certificate"] = {"certified": bool(res.certified), "upper_bound": _num(res.upper_bound),
                              "restart_spread": _num(res.restart_spread)}
    return out


def _tradeoff(obj) -> eat.TradeoffFunction:
    _check_keys(obj, ["values"], where="g")
    vals = obj["values"]
    if isinstance(vals, dict):
        try:
            vals = {int(k): float(v) for k, v in vals.items()}
        except ValueError as exc:
            raise ConfigError(f"tradeoff symbols must be integers: {exc}") from exc
        return eat.TradeoffFunction(tuple(sorted(vals)), vals)
    return eat.TradeoffFunction(tuple(range(len(vals))), [float(v) for v in vals])


def _fmt(x) -> str:
    return repr(float(x))


def cmd_rate_curve(cfg: dict) -> tuple[str, list]:
    _check_keys(cfg, ["g", "gamma", "omega_exp", "delta", "eps_s", "eps_a", "n_grid"], ["d_a"])
    g = _tradeoff(cfg["g"])
    rows = eat.rate_curve(g, float(cfg["gamma"]), float(cfg["omega_exp"]), float(cfg["delta"]), float(cfg["eps_s"]),
                          float(cfg["eps_a"]), [int(n) for n in cfg["n_grid"]], int(cfg.get("d_a", 2)))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RATE_COLUMNS)
    errors = []
    for r in rows:
        if "error" in r:
            errors.append(r)
            w.writerow([r["n"]] + ["nan"] * (len(RATE_COLUMNS) - 1))
        else:
            w.writerow([r["n"]] + [_fmt(r[c]) for c in RATE_COLUMNS[1:]])
    return buf.getvalue(), errors


SIM_KEYS = ["n", "gamma", "omega_exp", "delta", "x_star", "y_star", "seed", "strategy"]


def cmd_simulate(cfg: dict, seed: int | None) -> tuple[str, dict]:
    _check_keys(cfg, SIM_KEYS, ["g", "eps_s", "eps_a"])
    st = cfg["strategy"]
    _check_keys(st, ["name"], ["noise_p"], where="strategy")
    if st["name"] not in protocol.BUILTIN_STRATEGIES:
        raise ConfigError(f"unknown strategy {st['name']!r}")
    strategy = protocol.BUILTIN_STRATEGIES[st["name"]](float(st.get("noise_p", 0.0)))
    s = int(cfg["seed"]) if seed is None else int(seed)
    pc = protocol.ProtocolConfig(int(cfg["n"]), float(cfg["gamma"]), float(cfg["omega_exp"]), float(cfg["delta"]),
                                 int(cfg["x_star"]), int(cfg["y_star"]), s)
    game = protocol.chsh_game()
    rec = protocol.run_protocol(strategy, game, pc)
    summary = rec.summary()
    summary["seed"] = s
    summary["chernoff_abort_bound"] = protocol.chernoff_abort_bound(pc)
    summary["win_rate"] = rec.wins / rec.tests if rec.tests else None
    if "g" in cfg:
        g = _tradeoff(cfg["g"])
        rate, bound, const = protocol.certified_rate(g, pc, float(cfg.get("eps_s", 1e-6)),
                                                     float(cfg.get("eps_a", 1e-6)))
        summary["certified_rate"] = {"rate": _num(rate), "bound": _num(bound), "c1": _num(const.c1),
                                     "c0": _num(const.c0)}
    return rec.to_csv(), summary


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed")
    common.add_argument("--out", help="output path (stdout if omitted)")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("--tol", type=float, default=None, help="tolerance override")
    p = argparse.ArgumentParser(prog="entacc", description="Entropy accumulation toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("entropy", parents=[common], help="evaluate a divergence or conditional entropy")
    sub.add_parser("rate-curve", parents=[common], help="certified rate versus n as CSV")
    sub.add_parser("simulate", parents=[common], help="simulate the blind randomness-expansion protocol")
    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("suite", help=", ".join(verification.SUITES))
    v.add_argument("--instances", type=int, default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.workers < 1:
        print("error: workers must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _load_config(args.config)
        base = Path(args.config).parent if args.config else None
        if args.command == "entropy":
            res = cmd_entropy(cfg, args.seed or 0, args.tol, base)
            _emit(json.dumps(res, sort_keys=True) + "\n", args.out)
        elif args.command == "rate-curve":
            text, errors = cmd_rate_curve(cfg)
            _emit(text, args.out)
            for e in errors:
                print(json.dumps(e), file=sys.stderr)
        elif args.command == "simulate":
            text, summary = cmd_simulate(cfg, args.seed)
            js = json.dumps(summary, sort_keys=True, indent=2) + "\n"
            if args.out:
                Path(args.out).write_text(text)
                Path(args.out).with_suffix(".json").write_text(js)
            else:
                sys.stdout.write(js)
        else:
            _check_keys(cfg, [], ["instances"])
            if args.suite not in verification.SUITES:
                raise ConfigError(f"unknown suite {args.suite!r}; choose from {', '.join(verification.SUITES)}")
            inst = args.instances if args.instances is not None else cfg.get("instances")
            reps = verification.run_suite(args.suite, args.seed or 0, inst, args.workers, args.tol)
            _emit(verification.reports_to_json(reps) + "\n", args.out)
            if any(not r.passed for r in reps):
                return EXIT_VIOLATION
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
