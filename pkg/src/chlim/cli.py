"""``chlim``: command-line front end for the solver lab.

Configuration comes from an optional TOML file, overridden by flags::

    scheme = "LIM-LSS"
    tau = 1e-5

    [grid]
    N = 64

Exit status: 0 on success, 1 on a configuration error, 2 on a numerical
failure (a ``failure.json`` record is then written to the output directory).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields, replace

import tomli_w

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import lab
from .core import GridSpec
from .output import Table, emit_csv, emit_plot_script
from .report import ConfigurationError
from .schemes import NewtonConfig, SchemeId

COMMANDS = ("run", "stability-scan", "spectral-bound", "convergence", "efficiency")

# study defaults when the config leaves a list empty
DEFAULT_LISTS = {
    "stability-scan": {"schemes": tuple(s.value for s in SchemeId), "grids": (32, 64)},
    "spectral-bound": {"grids": (32, 64, 128, 256, 512), "eps_rules": ("grid:4", "fixed:4@64")},
    "convergence": {
        "schemes": ("LSS", "LIE", "LIM-LSS", "LIM-LIE"),
        "taus": (1e-4, 5e-5, 2.5e-5, 1e-5, 5e-6),
    },
    "efficiency": {
        "schemes": ("EE", "LSS", "LIM-LSS", "LIM-LIE"),
        "taus": (5e-5, 1e-5, 1e-6),
        "eps_rules": ("grid:4", "fixed:4@64"),
        "ic_modes": ("random", "smoothed"),
    },
}

# (toml section or "" for the top level, key) for each RunConfig field
_LAYOUT = {
    "scheme": ("", "scheme"),
    "tau": ("", "tau"),
    "seed": ("", "seed"),
    "ic": ("", "ic"),
    "tau_ref": ("", "tau_ref"),
    "grid_n": ("grid", "N"),
    "grids": ("grid", "sizes"),
    "final_time": ("model", "T"),
    "mobility": ("model", "M"),
    "eps_rule": ("model", "eps_rule"),
    "energy_growth_factor": ("model", "energy_growth_factor"),
    "newton_tol": ("newton", "rel_tol"),
    "newton_max_iters": ("newton", "max_iters"),
    "schemes": ("study", "schemes"),
    "taus": ("study", "taus"),
    "eps_rules": ("study", "eps_rules"),
    "ic_modes": ("study", "ic_modes"),
    "seeds": ("study", "seeds"),
    "tau_cap": ("study", "tau_cap"),
    "out": ("output", "dir"),
    "jobs": ("output", "jobs"),
}


@dataclass(frozen=True)
class RunConfig:
    """Everything one ``chlim`` invocation needs.

    ``seeds`` is the number of seeds a stability scan uses (``0 .. seeds-1``).
    Empty study lists mean "the subcommand's default" (see ``DEFAULT_LISTS``).
    """

    scheme: str = "LIM-LSS"
    tau: float = 1e-5
    seed: int = 0
    ic: str = "random"
    tau_ref: float | None = None
    grid_n: int = 64
    grids: tuple = ()
    final_time: float = 0.2
    mobility: float = 1.0
    eps_rule: str = "grid:4"
    energy_growth_factor: float = 1.01
    newton_tol: float = 1e-12
    newton_max_iters: int = 50
    schemes: tuple = ()
    taus: tuple = ()
    eps_rules: tuple = ()
    ic_modes: tuple = ()
    seeds: int = 5
    tau_cap: float = lab.TAU_CAP
    out: str = "."
    jobs: int = 1

    def validate(self):
        """Canonicalize names and raise one error listing every problem."""
        problems = []
        canon = {}

        def check(cond, message):
            if not cond:
                problems.append(message)

        def scheme_name(token):
            try:
                return SchemeId.parse(token).value
            except ConfigurationError as exc:
                problems.append(str(exc))
                return token

        def rule_name(token):
            try:
                return str(lab.EpsRule.parse(token))
            except ConfigurationError as exc:
                problems.append(str(exc))
                return token

        canon["scheme"] = scheme_name(self.scheme)
        canon["schemes"] = tuple(scheme_name(s) for s in self.schemes)
        canon["eps_rule"] = rule_name(self.eps_rule)
        canon["eps_rules"] = tuple(rule_name(r) for r in self.eps_rules)
        check(self.tau > 0, f"tau must be positive, got {self.tau}")
        check(all(t > 0 for t in self.taus), "study taus must be positive")
        check(self.final_time > 0, f"T must be positive, got {self.final_time}")
        check(self.mobility > 0, f"M must be positive, got {self.mobility}")
        check(self.grid_n >= 4, f"grid N must be >= 4, got {self.grid_n}")
        check(all(n >= 4 for n in self.grids), "grid sizes must be >= 4")
        check(self.ic in ("random", "smoothed"), f"ic must be random or smoothed, got {self.ic!r}")
        for mode in self.ic_modes:
            check(mode in ("random", "smoothed"), f"ic mode must be random or smoothed, got {mode!r}")
        check(self.tau_ref is None or self.tau_ref > 0, "tau_ref must be positive")
        check(self.energy_growth_factor >= 1, "energy_growth_factor must be >= 1")
        check(self.newton_tol > 0, "Newton rel_tol must be positive")
        check(self.newton_max_iters >= 1, "Newton max_iters must be >= 1")
        check(self.seeds >= 1, "seeds must be >= 1")
        check(self.tau_cap > 0, "tau_cap must be positive")
        check(self.jobs >= 1, "jobs must be >= 1")
        if problems:
            raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(problems))
        return replace(self, **canon)

    def list_for(self, command, name):
        value = getattr(self, name)
        return value or DEFAULT_LISTS.get(command, {}).get(name, ())

    def newton(self):
        return NewtonConfig(self.newton_tol, self.newton_max_iters)

    def spec(self, **overrides):
        fields_ = dict(
            grid=GridSpec(self.grid_n),
            scheme=self.scheme,
            tau=self.tau,
            eps_rule=self.eps_rule,
            final_time=self.final_time,
            seed=self.seed,
            ic_mode=self.ic,
            newton=self.newton(),
            energy_growth_factor=self.energy_growth_factor,
            mobility=self.mobility,
            tau_ref=self.tau_ref,
        )
        fields_.update(overrides)
        return lab.ExperimentSpec(**fields_)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, value, where):
    kind = _FIELD_TYPES[name]
    try:
        if kind == "tuple":
            items = value if isinstance(value, (list, tuple)) else str(value).split(",")
            items = [x.strip() if isinstance(x, str) else x for x in items]
            if name == "grids":
                return tuple(_as_int(x) for x in items if x != "")
            if name == "taus":
                return tuple(float(x) for x in items if x != "")
            return tuple(str(x) for x in items if x != "")
        if kind == "int":
            return _as_int(value)
        if kind in ("float", "float | None"):
            if value is None or value == "":
                if kind == "float":
                    raise ValueError("missing value")
                return None
            if isinstance(value, bool):
                raise ValueError("boolean is not a number")
            return float(value)
        if isinstance(value, (list, dict)):
            raise ValueError("expected a single value")
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{where}: bad value {value!r} ({exc})") from None


def _as_int(x):
    if isinstance(x, bool):
        raise ValueError("boolean is not an integer")
    if isinstance(x, float) and not x.is_integer():
        raise ValueError("not an integer")
    return int(x)


def config_from_mapping(doc, source="config"):
    """Build a RunConfig from a parsed TOML document; unknown keys are errors."""
    where_of = {v: k for k, v in _LAYOUT.items()}
    values, problems = {}, []
    for key, value in doc.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                name = where_of.get((key, sub))
                if name is None:
                    problems.append(f"{source}: unknown key {key}.{sub}")
                    continue
                try:
                    values[name] = _coerce(name, v, f"{source}: {key}.{sub}")
                except ConfigurationError as exc:
                    problems.append(str(exc))
        else:
            name = where_of.get(("", key))
            if name is None:
                problems.append(f"{source}: unknown key {key}")
                continue
            try:
                values[name] = _coerce(name, value, f"{source}: {key}")
            except ConfigurationError as exc:
                problems.append(str(exc))
    if problems:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(problems))
    return RunConfig(**values)


def load_config(path):
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ConfigurationError(f"{path}: {exc}") from None
    return config_from_mapping(doc, str(path))


def dump_config(cfg: RunConfig) -> str:
    doc = {}
    for name, (section, key) in _LAYOUT.items():
        value = getattr(cfg, name)
        if value is None:
            continue  # TOML has no null; absent means default
        if isinstance(value, tuple):
            value = list(value)
        (doc.setdefault(section, {}) if section else doc)[key] = value
    top = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    nested = {k: v for k, v in doc.items() if isinstance(v, dict)}
    return tomli_w.dumps({**top, **nested})


def parse_config(path=None, overrides=None):
    """Config file (if any) merged with flag overrides; flags win."""
    cfg = load_config(path) if path else RunConfig()
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    updates = {}
    for name, value in overrides.items():
        updates[name] = _coerce(name, value, f"--{name.replace('_', '-')}")
    return replace(cfg, **updates).validate()


# commands -------------------------------------------------------------------


class NumericalFailureExit(Exception):
    def __init__(self, record):
        super().__init__(record.get("message", "numerical failure"))
        self.record = record


def _out_dir(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def cmd_run(cfg: RunConfig):
    spec = cfg.spec()
    run = lab.integrate(spec)
    summary = {
        "scheme": spec.scheme.value,
        "N": spec.grid.n_cells,
        "tau": spec.tau,
        "T": spec.final_time,
        "eps_rule": str(spec.eps_rule),
        "seed": spec.seed,
        "ic": spec.ic_mode,
        "steps": run.steps,
        "matvecs": run.total_matvecs,
        "linear_solves": run.total_linear_solves,
        "newton_iters": run.total_newton_iters,
        "energy_initial": run.energy_trace[0],
        "energy_final": run.energy_trace[-1],
        "mass_drift": run.mass_drift,
        "gradient_stable": run.gradient_stable,
        "completed": run.completed,
    }
    out = _out_dir(cfg)
    if not run.completed:
        summary["message"] = run.failure
        raise NumericalFailureExit(summary)
    with open(os.path.join(out, "run.json"), "w", encoding="ascii") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for key in ("scheme", "N", "tau", "steps", "matvecs", "linear_solves", "newton_iters", "gradient_stable"):
        print(f"{key}: {summary[key]}")
    return summary


def cmd_stability_scan(cfg: RunConfig):
    table = Table(("scheme", "N", "tau_max", "unconditional"), key=("scheme", "N"))
    for n in cfg.list_for("stability-scan", "grids"):
        for scheme in cfg.list_for("stability-scan", "schemes"):
            res = lab.gradient_stability_scan(
                scheme,
                GridSpec(n),
                eps_rule=cfg.eps_rule,
                seeds=range(cfg.seeds),
                tau_cap=cfg.tau_cap,
                newton=cfg.newton(),
            )
            table.rows.append(
                {"scheme": res.scheme.value, "N": n, "tau_max": res.tau_max, "unconditional": res.unconditional}
            )
            print(f"{res.scheme.value:8s} N={n:<5d} tau_max={res.tau_max:.3e}{'  (unconditional)' if res.unconditional else ''}")
    emit_csv(table, os.path.join(_out_dir(cfg), "stability_scan.csv"))
    return table


def cmd_spectral_bound(cfg: RunConfig):
    table = Table(("N", "eps_rule", "lambda_inf", "tau_explicit_mode"), key=("eps_rule", "N"))
    for rule in cfg.list_for("spectral-bound", "eps_rules"):
        for n in cfg.list_for("spectral-bound", "grids"):
            lam, tau = lab.spectral_bound(GridSpec(n), rule)
            table.rows.append({"N": n, "eps_rule": str(lab.EpsRule.parse(rule)), "lambda_inf": lam, "tau_explicit_mode": tau})
    emit_csv(table, os.path.join(_out_dir(cfg), "spectral_bound.csv"))
    for row in table.sorted_rows():
        print(f"{row['eps_rule']:11s} N={row['N']:<5d} lambda_inf={row['lambda_inf']:.3e} tau={row['tau_explicit_mode']:.3e}")
    return table


def _study_table(result):
    return Table(lab.STUDY_COLUMNS, list(result.rows), key=("scheme", "N", "tau"))


def _write_study(cfg, stem, result, x_column):
    out = _out_dir(cfg)
    csv_path = os.path.join(out, stem + ".csv")
    emit_csv(_study_table(result), csv_path)
    series = sorted({r["scheme"] for r in result.rows})
    emit_plot_script(csv_path, os.path.join(out, stem + ".gp"), series, x_column)
    return csv_path


def cmd_convergence(cfg: RunConfig):
    result = lab.convergence_study(
        cfg.list_for("convergence", "schemes"),
        GridSpec(cfg.grid_n),
        cfg.eps_rule,
        cfg.list_for("convergence", "taus"),
        final_time=cfg.final_time,
        tau_ref=cfg.tau_ref,
        seed=cfg.seed,
        ic_mode=cfg.ic,
        jobs=cfg.jobs,
    )
    _write_study(cfg, "convergence", result, "tau")
    for scheme, slope in sorted(result.slopes.items()):
        print(f"{scheme:8s} slope={slope:.3f}")
    return result


def _safe(text):
    return str(text).replace(":", "").replace("@", "_")


def cmd_efficiency(cfg: RunConfig):
    results = lab.efficiency_study(
        cfg.list_for("efficiency", "schemes"),
        GridSpec(cfg.grid_n),
        eps_rules=cfg.list_for("efficiency", "eps_rules"),
        taus=cfg.list_for("efficiency", "taus"),
        ic_modes=cfg.list_for("efficiency", "ic_modes"),
        final_time=cfg.final_time,
        tau_ref=cfg.tau_ref,
        seed=cfg.seed,
        jobs=cfg.jobs,
    )
    for (rule, mode), result in sorted(results.items()):
        stem = f"efficiency_N{cfg.grid_n}_{_safe(rule)}_{mode}"
        _write_study(cfg, stem, result, "matvecs")
        print(f"{stem}: {len(result.rows)} rows")
    return results


_HANDLERS = {
    "run": cmd_run,
    "stability-scan": cmd_stability_scan,
    "spectral-bound": cmd_spectral_bound,
    "convergence": cmd_convergence,
    "efficiency": cmd_efficiency,
}


def _failure_record(exc):
    record = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("step", "iteration", "residual", "iterations"):
        value = getattr(exc, attr, None)
        if value is not None:
            record[attr] = value
    return record


def _write_failure(cfg, command, record):
    record = {"command": command, **record}
    path = os.path.join(_out_dir(cfg), "failure.json")
    with open(path, "w", encoding="ascii") as fh:
        json.dump(record, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


def run_command(command, cfg: RunConfig):
    """Run one subcommand; returns the exit status."""
    if command not in _HANDLERS:
        print(f"chlim: unknown command {command!r}", file=sys.stderr)
        return 1
    try:
        _HANDLERS[command](cfg)
    except ConfigurationError as exc:
        print(f"chlim: {exc}", file=sys.stderr)
        return 1
    except NumericalFailureExit as exc:
        path = _write_failure(cfg, command, exc.record)
        print(f"chlim: numerical failure: {exc} (details in {path})", file=sys.stderr)
        return 2
    except lab.NumericalFailure as exc:
        path = _write_failure(cfg, command, _failure_record(exc))
        print(f"chlim: numerical failure: {exc} (details in {path})", file=sys.stderr)
        return 2
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="chlim", description="1D Cahn-Hilliard solver lab")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", metavar="PATH", help="TOML configuration file")
    parser.add_argument("--grid-n", metavar="N", help="grid size, or a comma list for scans")
    parser.add_argument("--scheme", metavar="NAME", help="scheme, or a comma list for studies")
    parser.add_argument("--tau", metavar="X", help="step size, or a comma list for studies")
    parser.add_argument("--eps-rule", metavar="RULE", help="grid:4 or fixed:4@64")
    parser.add_argument("--T", dest="final_time", metavar="X", help="final time (default 0.2)")
    parser.add_argument("--seed", metavar="S")
    parser.add_argument("--ic", choices=("random", "smoothed"))
    parser.add_argument("--tau-ref", metavar="X", help="reference step size")
    parser.add_argument("--jobs", metavar="K", help="worker processes for studies")
    parser.add_argument("--out", metavar="DIR", help="output directory (default .)")
    return parser


def _flag_overrides(args):
    """Map flags to RunConfig fields.  A comma list also fills the study list."""
    over = {
        "eps_rule": args.eps_rule,
        "final_time": args.final_time,
        "seed": args.seed,
        "ic": args.ic,
        "tau_ref": args.tau_ref,
        "jobs": args.jobs,
        "out": args.out,
    }
    for flag, single, many in (("grid_n", "grid_n", "grids"), ("scheme", "scheme", "schemes"), ("tau", "tau", "taus")):
        value = getattr(args, flag)
        if value is None:
            continue
        items = [x.strip() for x in value.split(",") if x.strip()]
        if not items:
            raise ConfigurationError(f"--{flag.replace('_', '-')}: empty value")
        over[single] = items[0]
        if len(items) > 1 or args.command != "run":
            over[many] = items
    return over


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, _flag_overrides(args))
    except ConfigurationError as exc:
        print(f"chlim: {exc}", file=sys.stderr)
        return 1
    return run_command(args.command, cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
