"""Command-line front end.

Subcommands: ``bounds`` (identification-region bounds), ``kappa`` (optimal
rule, minimax value and optional directional derivative), ``oracle``
(closed-form Gaussian expectations, for cross-checking the solver by
hand), ``adjust`` (one adjustment solve from an estimate), ``simulate``
(the replication harness). All randomness flows from a single seed; exit
codes are 0 on success, 1 on a domain error, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .adjust import AdjustProblem, lam_str, plug_in_str, solve_adjustment
from .errors import ConfigError, LamstrError
from .gauss import F_obj, G_obj, G_sup_s, GaussianLaw, SeededStream, expected_min_zero, mvn_sample
from .models import Theta, dtau, get_model
from .rules import (
    MODE_ESTIMATED,
    kappa,
    kappa_prime_from_derivatives,
    linear_spec,
    minimax_value,
    spec_from_model,
)
from .sim import SimConfig, run_experiment, write_csv

_GRID = "grid"
_FLAG = "flag"

# Single source of truth for the simulate config file: key -> (type, default, help).
# Defaults follow the reference experiment: truncation 1000, search box
# [-2,2]^k, support half-width n^(1/3), threshold n^(-1/3), 1000 draws,
# treated share 1/2, 5000 replications at n = 300.
CONFIG_KEYS: dict[str, tuple[object, str, str]] = {
    "n": (int, "300", "sample size per replication"),
    "reps": (int, "5000", "number of replications per h"),
    "draws": (int, "1000", "Monte Carlo draws for the adjustment solver"),
    "h_grid": (_GRID, "-2,-1.95,...,2", "comma-separated perturbation grid"),
    "trunc": (float, "1000", "truncation level of the loss"),
    "seed": (int, "0", "master seed; all streams derive from it"),
    "pi": (float, "0.5", "treated share among participants"),
    "eps_coef": (float, "1", "threshold coefficient: eps = eps_coef * n**eps_exp"),
    "eps_exp": (float, "-0.3333333333333333", "threshold exponent"),
    "lambda_coef": (float, "1", "support half-width coefficient: lambda = lambda_coef * n**lambda_exp"),
    "lambda_exp": (float, "0.3333333333333333", "support half-width exponent"),
    "k_m": (float, "2", "search-box half-width per coordinate"),
    "s_points": (int, "7", "inner grid points per axis"),
    "w_points": (int, "5", "outer grid points per axis"),
    "scale_sqrt_n": (_FLAG, "0", "report sqrt(n)-scaled RIMR"),
}


def parse_config(text: str) -> SimConfig:
    """Parse flat key=value lines ('#' comments allowed) into a SimConfig.

    Unknown keys are rejected; missing keys take the documented defaults.
    """
    overrides: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(
                f"line {lineno}: unknown key {key!r}; valid keys: {', '.join(CONFIG_KEYS)}"
            )
        kind = CONFIG_KEYS[key][0]
        try:
            if kind is _GRID:
                overrides[key] = tuple(float(tok) for tok in value.split(",") if tok.strip())
            elif kind is _FLAG:
                if value.lower() not in ("0", "1", "true", "false"):
                    raise ValueError(value)
                overrides[key] = value.lower() in ("1", "true")
            else:
                overrides[key] = kind(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: cannot parse {value!r} for key {key!r}") from None
    return SimConfig(**overrides)


@dataclass
class RunManifest:
    """Resolved parameters of a run, written next to its output artifact."""

    entries: dict[str, object]
    seed: int
    version: str
    duration: float

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"artifact_version={self.version}\n")
            fh.write(f"seed={self.seed}\n")
            for key, value in self.entries.items():
                fh.write(f"{key}={value}\n")
            # Wall-clock line goes last so byte comparisons can drop it.
            fh.write(f"duration_seconds={self.duration:.3f}\n")


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _parse_floats(text: str, expect: int | None = None, name: str = "value") -> np.ndarray:
    try:
        vals = np.array([float(tok) for tok in text.split(",") if tok.strip() != ""])
    except ValueError:
        raise ConfigError(f"cannot parse {name} list {text!r}") from None
    if expect is not None and vals.size != expect:
        raise ConfigError(f"{name} needs {expect} comma-separated reals, got {vals.size}")
    return vals


def _theta_from_args(args) -> Theta:
    rng = _parse_floats(args.range, 2, "range")
    vals = _parse_floats(args.theta, None, "theta")
    return Theta(vals, float(rng[0]), float(rng[1]))


def _cmd_bounds(args) -> int:
    model = get_model(args.model)
    bp = model.bounds(_theta_from_args(args))
    print(f"{_fmt(bp.lo)} {_fmt(bp.hi)}")
    return 0


def _cmd_kappa(args) -> int:
    if args.model is not None:
        model = get_model(args.model)
        theta = _theta_from_args(args)
        bp = model.bounds(theta)
        tau_lo, tau_hi = bp.lo, bp.hi
    elif args.tau_lo is not None and args.tau_hi is not None:
        tau_lo, tau_hi = args.tau_lo, args.tau_hi
    else:
        raise ConfigError("provide either --tauL/--tauU or --model/--theta")
    fields = [_fmt(kappa(tau_lo, tau_hi)), _fmt(minimax_value(tau_lo, tau_hi))]
    if args.direction is not None:
        if args.model is None:
            raise ConfigError("--direction needs --model/--theta to supply the derivative maps")
        b = _parse_floats(args.direction, model.dim, "direction")
        d_lo, d_hi = dtau(model, theta, b)
        # Only the bound values and branch mode matter once the bound
        # derivatives are evaluated, so a placeholder linear spec suffices.
        spec = linear_spec(tau_lo, tau_hi, np.zeros(model.dim), np.zeros(model.dim))
        fields.append(_fmt(kappa_prime_from_derivatives(spec, d_lo, d_hi)))
    print(" ".join(fields))
    return 0


def _cmd_oracle(args) -> int:
    printed = False
    if args.emin is not None:
        m, sd = _parse_floats(args.emin, 2, "emin")
        print(_fmt(expected_min_zero(m, sd)))
        printed = True
    if args.F is not None:
        w, s, sd = _parse_floats(args.F, 3, "F")
        print(_fmt(F_obj(w, s, sd)))
        printed = True
    if args.G is not None:
        w, s, sd = _parse_floats(args.G, 3, "G")
        print(_fmt(G_obj(w, s, sd)))
        printed = True
    if args.Gsup is not None:
        w, sd = _parse_floats(args.Gsup, 2, "Gsup")
        print(_fmt(G_sup_s(w, sd)))
        printed = True
    if not printed:
        raise ConfigError("nothing to evaluate: pass --emin, --F, --G or --Gsup")
    return 0


def _cmd_adjust(args) -> int:
    model = get_model(args.model)
    theta = _theta_from_args(args)
    sigma_vals = _parse_floats(args.sigma, None, "sigma")
    k = model.dim
    if sigma_vals.size == k:
        sigma = np.diag(sigma_vals)
    elif sigma_vals.size == k * k:
        sigma = sigma_vals.reshape(k, k)
    else:
        raise ConfigError(f"sigma needs {k} (diagonal) or {k * k} (full) entries")
    eps = args.eps_coef * args.n**args.eps_exp
    lam = args.lambda_coef * args.n**args.lambda_exp
    spec = spec_from_model(model, theta, mode=MODE_ESTIMATED, eps=eps)
    draws = mvn_sample(GaussianLaw(sigma), SeededStream(args.seed, 0), args.draws)
    problem = AdjustProblem(
        spec=spec,
        draws=draws,
        support=lam,
        search=args.k_m,
        trunc=args.trunc,
        s_points=args.s_points,
        w_points=args.w_points,
    )
    result = solve_adjustment(problem)
    print("w_hat " + " ".join(_fmt(v) for v in result.w_hat))
    print(f"objective {_fmt(result.objective)}")
    print(f"plugin {_fmt(plug_in_str(theta, model))}")
    print(f"lam {_fmt(lam_str(theta, result.w_hat, args.n, model))}")
    if not result.converged:
        print("warning: evaluation budget exhausted, best-effort result", file=sys.stderr)
    return 0


def _cmd_simulate(args) -> int:
    if args.list_config_keys:
        for key, (_, default, help_text) in CONFIG_KEYS.items():
            print(f"{key}\t{default}\t{help_text}")
        return 0
    text = ""
    if args.config is not None:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    config = parse_config(text)
    if args.seed is not None:
        config = SimConfig(**{**_config_dict(config), "seed": args.seed})
    if args.scale_sqrt_n:
        config = SimConfig(**{**_config_dict(config), "scale_sqrt_n": True})
    started = time.perf_counter()
    curves = run_experiment(config, workers=args.threads)
    write_csv(curves, args.out)
    entries = _config_dict(config)
    entries["h_grid"] = ",".join(_fmt(h) for h in config.h_grid)
    entries["threads"] = args.threads
    entries["out"] = args.out
    manifest = RunManifest(
        entries=entries,
        seed=config.seed,
        version=__version__,
        duration=time.perf_counter() - started,
    )
    manifest.write(str(args.out) + ".manifest.txt")
    print(args.out)
    return 0


def _config_dict(config: SimConfig) -> dict[str, object]:
    return {key: getattr(config, key) for key in CONFIG_KEYS}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lamstr",
        description="Minimax-regret treatment rules under partial identification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_theta_flags(p, required=True):
        p.add_argument("--model", choices=["ex1", "ex2", "ex3"], required=required)
        p.add_argument("--theta", required=required, help="comma-separated parameter vector")
        p.add_argument("--range", default="0,1", help="outcome range y_lo,y_hi (default 0,1)")

    p_bounds = sub.add_parser("bounds", help="identification-region bounds at a parameter")
    add_theta_flags(p_bounds)
    p_bounds.set_defaults(func=_cmd_bounds)

    p_kappa = sub.add_parser(
        "kappa", help="optimal rule and minimax value; prints 'kappa minimax [derivative]'"
    )
    p_kappa.add_argument("--tauL", dest="tau_lo", type=float, help="lower bound tau_L")
    p_kappa.add_argument("--tauU", dest="tau_hi", type=float, help="upper bound tau_U")
    add_theta_flags(p_kappa, required=False)
    p_kappa.add_argument("--direction", help="direction for the rule derivative (needs --model)")
    p_kappa.set_defaults(func=_cmd_kappa)

    p_oracle = sub.add_parser("oracle", help="closed-form Gaussian expectations")
    p_oracle.add_argument("--emin", help="m,sd -> E[min{N(m,sd^2),0}]")
    p_oracle.add_argument("--F", help="w,s,sd -> regret objective F")
    p_oracle.add_argument("--G", help="w,s,sd -> squared-error objective G")
    p_oracle.add_argument("--Gsup", help="w,sd -> sup over s of G (= w^2 + sd^2)")
    p_oracle.set_defaults(func=_cmd_oracle)

    p_adjust = sub.add_parser("adjust", help="solve the adjustment problem at an estimate")
    add_theta_flags(p_adjust)
    p_adjust.add_argument("--sigma", required=True, help="covariance: k diagonal or k*k entries")
    p_adjust.add_argument("--n", type=int, required=True, help="sample size behind the estimate")
    p_adjust.add_argument("--draws", "--L", dest="draws", type=int, default=1000)
    p_adjust.add_argument("--trunc", "--M", dest="trunc", type=float, default=1000.0)
    p_adjust.add_argument("--seed", type=int, default=0)
    p_adjust.add_argument("--eps-coef", type=float, default=1.0)
    p_adjust.add_argument("--eps-exp", type=float, default=-1.0 / 3.0)
    p_adjust.add_argument("--lambda-coef", type=float, default=1.0)
    p_adjust.add_argument("--lambda-exp", type=float, default=1.0 / 3.0)
    p_adjust.add_argument("--k-m", type=float, default=2.0)
    p_adjust.add_argument("--s-points", type=int, default=15)
    p_adjust.add_argument("--w-points", type=int, default=9)
    p_adjust.set_defaults(func=_cmd_adjust)

    p_sim = sub.add_parser(
        "simulate",
        help="run the replication harness",
        epilog="config keys: " + ", ".join(CONFIG_KEYS),
    )
    p_sim.add_argument("--config", help="flat key=value config file")
    p_sim.add_argument("--out", default="rimr.csv", help="output CSV path")
    p_sim.add_argument("--threads", type=int, default=1, help="worker processes")
    p_sim.add_argument("--seed", type=int, help="override the config seed")
    p_sim.add_argument("--scale-sqrt-n", action="store_true", help="report sqrt(n)-scaled RIMR")
    p_sim.add_argument(
        "--list-config-keys", action="store_true", help="print accepted config keys and exit"
    )
    p_sim.set_defaults(func=_cmd_simulate)
    return parser


def dispatch(argv) -> int:
    """Route argv to a subcommand; 0 ok, 1 domain error, 2 usage error."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except LamstrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
