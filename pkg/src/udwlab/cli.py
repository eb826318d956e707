"""Config-driven batch front end.

Subcommands ``diagnose``, ``dynamics``, ``thermal`` and ``validate`` read a
JSON run configuration (schema in ``config_schema.json``) and write reports
into ``--out``.  Exit codes: 0 success, 1 configuration error, 2 inconclusive
verdict, 3 failed validation rows or channel errors.
"""

import argparse
import contextlib
import csv
import io
import json
import math
import os
import random
import sys
import tempfile
from importlib import resources

import numpy as np

from . import diagnostics, dynamics, oracle, thermal
from .errors import ConfigError, InconclusiveError, UDWError
from .modespace import (
    CompactBump,
    CouplingFunction,
    Dispersion,
    Gaussian,
    Lorentzian,
    ModeSpace,
    Pointlike,
    PowerRegularized,
    Tabulated,
    TestFunction,
)

EXIT_OK, EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_FAILED = 0, 1, 2, 3
TASKS = ("diagnose", "dynamics", "thermal", "validate")


# ---------------------------------------------------------------------------
# Config


def load_schema():
    text = resources.files("udwlab").joinpath("config_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_config(config):
    """Schema-check ``config``; raise :class:`ConfigError` listing offending keys."""
    import jsonschema

    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(config), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        keys = sorted({"/".join(map(str, e.absolute_path)) or "<root>" for e in errors})
        detail = "; ".join(f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}"
                           for e in errors[:10])
        raise ConfigError(f"invalid configuration: {detail}", keys)
    return config


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", ["<file>"]) from exc
    return validate_config(config)


def _complex(value):
    if isinstance(value, list):
        return complex(value[0], value[1])
    return complex(value)


def build_profile(cfg, n, base_dir="."):
    family = cfg["family"]
    if family == "gaussian":
        return Gaussian(cfg.get("sigma", 1.0))
    if family == "lorentzian":
        return Lorentzian(cfg.get("sigma", 1.0))
    if family == "compact_bump":
        return CompactBump(cfg.get("rho", 1.0), n)
    if family == "pointlike":
        return Pointlike(cfg["cutoff"])
    if family == "power_regularized":
        return PowerRegularized(cfg["exponent"], build_profile(cfg["base"], n, base_dir))
    if family == "tabulated":
        return Tabulated.from_csv(os.path.join(base_dir, cfg["path"]))
    raise ConfigError(f"unknown profile family {family!r}", ["model/profile/family"])


def build_model(model, base_dir="."):
    """Continuum :class:`CouplingFunction` or :class:`oracle.DiscreteModes`."""
    if "modes" in model:
        m = model["modes"]
        if len(m["omega"]) != len(m["coupling"]):
            raise ConfigError("modes.omega and modes.coupling differ in length",
                              ["model/modes/coupling"])
        return oracle.DiscreteModes(m["omega"], [_complex(c) for c in m["coupling"]])
    disp = model["dispersion"]
    if disp["kind"] == "massive":
        if not disp.get("mass", 0) > 0:
            raise ConfigError("massive dispersion needs mass > 0", ["model/dispersion/mass"])
        dispersion = Dispersion.massive(disp["mass"])
    else:
        if disp.get("mass", 0) != 0:
            raise ConfigError("massless dispersion cannot carry a mass", ["model/dispersion/mass"])
        dispersion = Dispersion.massless()
    space = ModeSpace(model["n"], dispersion)
    return CouplingFunction(space, build_profile(model["profile"], model["n"], base_dir),
                            model.get("lambda", 1.0))


def build_test_function(cfg, space, base_dir="."):
    if cfg is None:
        cfg = {"amplitude": 0.5, "profile": {"family": "gaussian", "sigma": 1.0}}
    if "values" in cfg:
        values = [_complex(v) for v in cfg["values"]]
        if isinstance(space, oracle.DiscreteModes) and len(values) != space.size:
            raise ConfigError("g.values length differs from the mode count", ["g/values"])
        return TestFunction.discrete(values, label="g")
    amp = _complex(cfg.get("amplitude", 1.0))
    power = cfg.get("power", 0.0)
    n = getattr(space, "n", 3)
    prof = build_profile(cfg.get("profile", {"family": "gaussian"}), n, base_dir)
    return TestFunction.radial(lambda k: amp * k**power * prof(k),
                               breakpoints=prof.breakpoints, label="g")


def build_times(cfg):
    if isinstance(cfg, dict):
        times = np.linspace(cfg.get("start", 0.0), cfg["stop"], cfg["num"])
    else:
        times = np.asarray(cfg, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ConfigError("time grid must be strictly increasing", ["task/times"])
    return times


def _qubit_rho(cfg):
    if cfg is None or isinstance(cfg, str):
        v = oracle.qubit_vector(cfg or "g")
        return np.outer(v, v.conj())
    return np.array([[_complex(x) for x in row] for row in cfg])


# ---------------------------------------------------------------------------
# Output


def _clean(value):
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
        return value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    return value


def dumps(obj):
    """Deterministic JSON: insertion order, shortest round-trip floats."""
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x
                         for x in row])
    return buf.getvalue()


def write_outputs(out_dir, files):
    """Write all ``{name: text}`` only after every payload has been computed."""
    for name, text in files.items():
        atomic_write(os.path.join(out_dir, name), text)


# ---------------------------------------------------------------------------
# Tasks


def _require_continuum(space, task):
    if isinstance(space, oracle.DiscreteModes):
        raise ConfigError(f"{task} needs a continuum model (n, dispersion, profile)", ["model"])


def run_diagnose(config, out_dir, fmt="json", base_dir="."):
    model = config["model"]
    task = config["task"]["diagnose"]
    space = build_model(model, base_dir)
    _require_continuum(space, "diagnose")
    omega0 = task.get("omega0", diagnostics.DEFAULT_OMEGA0)
    delta = model.get("delta", 0.0)
    report = diagnostics.classify(space, delta, omega0)
    files = {"report.json": dumps(report.to_dict()), "summary.txt": summary_text(report)}
    sweep = task.get("sweep")
    if sweep:
        rows = []
        for value in sweep["values"]:
            sub = dict(model)
            if sweep["parameter"] == "mass":
                sub["dispersion"] = ({"kind": "massive", "mass": value} if value > 0
                                     else {"kind": "massless"})
            else:
                sub[sweep["parameter"]] = int(value) if sweep["parameter"] == "n" else value
            rep = diagnostics.classify(build_model(sub, base_dir), sub.get("delta", 0.0), omega0)
            rows.append([value, rep.classification.value] + [
                _verdict_cell(v) for v in (rep.r0, rep.r1, rep.r2)] + [
                "" if rep.ground_energy is None else rep.ground_energy])
        files["sweep.csv"] = csv_text([sweep["parameter"], "classification", "r0", "r1", "r2",
                                       "ground_energy"], rows)
    write_outputs(out_dir, files)
    return EXIT_OK, report


def _verdict_cell(v):
    if v.is_finite:
        return repr(float(v.value))
    return f"Divergent({v.end.value},{v.local_exponent:.4f})"


def summary_text(report):
    lines = [f"classification: {report.classification.value}"]
    for name in ("r0", "r1", "r2"):
        v = getattr(report, name)
        if v.is_finite:
            lines.append(f"{name}: finite {v.value!r} (+/- {v.error_estimate:.2e})")
        else:
            lines.append(f"{name}: divergent at {v.end.value} end, local exponent "
                         f"{v.local_exponent:.4f}")
    if report.ground_energy is not None:
        degen = " (two-fold degenerate)" if report.degenerate_ground else ""
        lines.append(f"ground energy: {report.ground_energy!r}{degen}")
    if report.mean_soft_bosons is not None:
        lines.append(f"mean soft bosons: {report.mean_soft_bosons!r}")
    lines.append(f"omega0: {report.omega0!r}")
    return "\n".join(lines) + "\n"


DEFAULT_CHANNELS = ("weyl", "sigma_x", "decoherence", "boson_number", "entropy")


def run_dynamics(config, out_dir, fmt="json", base_dir="."):
    model = config["model"]
    task = config["task"]["dynamics"]
    dynamics._require_gapless(model.get("gap", 0.0))
    space = build_model(model, base_dir)
    delta = model.get("delta", 0.0)
    times = build_times(task["times"])
    g = build_test_function(task.get("g"), space, base_dir)
    init_spec = task.get("initial", {})
    field_spec = init_spec.get("field", "vacuum")
    field_state = dynamics.Vacuum() if field_spec == "vacuum" else dynamics.Kms(
        field_spec["kms_beta"])
    initial = dynamics.ProductInitial(_qubit_rho(init_spec.get("qubit")), field_state)

    channels = {
        "weyl": lambda t: dynamics.state_expectation(
            initial, dynamics.evolve_weyl(space, g, t, delta), space),
        "sigma_x": lambda t: dynamics.state_expectation(
            initial, dynamics.evolve_sigma(space, "x", t, delta), space).real,
        "sigma_y": lambda t: dynamics.state_expectation(
            initial, dynamics.evolve_sigma(space, "y", t, delta), space).real,
        "sigma_z": lambda t: dynamics.state_expectation(
            initial, dynamics.evolve_sigma(space, "z", t, delta), space).real,
        "decoherence": lambda t: dynamics.decoherence(space, t),
        "boson_number": lambda t: dynamics.mean_boson_number(space, t),
        "entropy": lambda t: dynamics.reduced_qubit(space, initial, t, delta)[1],
    }
    results, errors = {}, {}
    for name in task.get("observables", DEFAULT_CHANNELS):
        try:
            results[name] = dynamics.sample(channels[name], times, observable=name)
        except UDWError as exc:
            errors[name] = f"{type(exc).__name__}: {exc}"
    files = {}
    if fmt == "csv":
        for name, series in results.items():
            files[f"{name}.csv"] = series.to_csv()
        if errors:
            files["errors.json"] = dumps(errors)
    else:
        files["dynamics.json"] = dumps({
            "channels": {name: s.to_dict() for name, s in results.items()},
            "errors": errors})
    write_outputs(out_dir, files)
    return (EXIT_FAILED if errors else EXIT_OK), (results, errors)


def _ground_reference(space, delta, g):
    if delta != 0:
        branch = dynamics.JointGround.for_delta(delta).branch
        return thermal.ground_weyl(space, branch, g)
    return 0.5 * (thermal.ground_weyl(space, dynamics.PLUS, g)
                  + thermal.ground_weyl(space, dynamics.MINUS, g))


def run_thermal(config, out_dir, fmt="csv", base_dir="."):
    model = config["model"]
    task = config["task"]["thermal"]
    space = build_model(model, base_dir)
    delta = model.get("delta", 0.0)
    g = build_test_function(task.get("g"), space, base_dir)
    branch = {"+": dynamics.PLUS, "-": dynamics.MINUS, None: None}[task.get("branch")]
    tol = task.get("ground_tolerance", 1e-8)
    betas = sorted(task["betas"])
    rows = thermal.beta_sweep(space, betas, delta, g, branch)
    ground = (thermal.ground_weyl(space, branch, g) if branch is not None
              else _ground_reference(space, delta, g))
    last = complex(rows[-1][3], rows[-1][4])
    converged = abs(last - ground) <= tol
    table = [row + (bool(converged) if i == len(rows) - 1 else False,)
             for i, row in enumerate(rows)]
    header = ["beta", "w_plus", "w_minus", "re", "im", "ground_converged"]
    files = {}
    if fmt == "csv":
        files["thermal.csv"] = csv_text(header, [[*r[:5], str(r[5]).lower()] for r in table])
    else:
        files["thermal.json"] = dumps({"rows": [dict(zip(header, r)) for r in table],
                                       "ground": [ground.real, ground.imag],
                                       "ground_tolerance": tol})
    write_outputs(out_dir, files)
    return EXIT_OK, table


def _row(quantity, closed, orc, tol, cause=None):
    closed = complex(closed)
    if orc is None:
        return {"quantity": quantity, "closed_form": [closed.real, closed.imag], "oracle": None,
                "abs_diff": None, "tolerance": tol, "pass": False, "cause": cause}
    orc = complex(orc)
    diff = abs(closed - orc)
    return {"quantity": quantity, "closed_form": [closed.real, closed.imag],
            "oracle": [orc.real, orc.imag], "abs_diff": diff, "tolerance": tol,
            "pass": bool(diff <= tol), "cause": cause}


def _guarded(fn):
    try:
        return fn(), None
    except UDWError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def validation_rows(modes, delta, g_values, times, tol, n_max="auto", betas=()):
    """Closed form versus oracle comparison table on a discrete mode set."""
    rows = []
    g = TestFunction.discrete(g_values)
    if n_max == "auto":
        system = oracle.auto_system(modes, delta)
    else:
        system = oracle.build_hamiltonian(modes, delta, n_max)
    energy, _ = oracle.ground_state(system, check=False)
    rows.append(_row("ground_energy", modes.ground_energy(delta), energy, tol))

    for branch, psi in oracle.ground_branches(system).items():
        closed = dynamics.state_expectation(dynamics.JointGround(branch),
                                            dynamics.WeylMatrix.weyl(g), modes)
        val, cause = _guarded(lambda: oracle.expectation(
            system, psi, oracle.WeylDisplacement(g_values)))
        rows.append(_row(f"ground_weyl[{'+' if branch > 0 else '-'}]", closed, val, tol, cause))

    initial = dynamics.ProductInitial.ground_qubit()
    psi0 = oracle.vacuum_state(system, "g")
    sx0 = dynamics.state_expectation(initial, dynamics.WeylMatrix.qubit(dynamics.sigma_pm("x")),
                                     modes)
    for t in times:
        psi = oracle.evolve(system, psi0, t)
        closed = dynamics.state_expectation(initial, dynamics.evolve_weyl(modes, g, t, delta), modes)
        val, cause = _guarded(lambda: oracle.expectation(
            system, psi, oracle.WeylDisplacement(g_values)))
        rows.append(_row(f"weyl(t={float(t)!r})", closed, val, tol, cause))
        val, cause = _guarded(lambda: oracle.expectation(system, psi, oracle.SigmaAxis("x")))
        rows.append(_row(f"sigma_x(t={float(t)!r})", sx0, val, tol, cause))
        _, s_closed = dynamics.reduced_qubit(modes, initial, t, delta)
        val, cause = _guarded(lambda: oracle.entropy(
            oracle.expectation(system, psi, oracle.QubitReduced())))
        rows.append(_row(f"entropy(t={float(t)!r})", s_closed, val, tol, cause))

    # Truncating the Gibbs sum costs about exp(-beta omega n_max), so each
    # thermal row doubles n_max until two successive values agree within tol/10.
    for beta in betas or ():
        closed = dynamics.state_expectation(dynamics.JointThermal(beta, delta),
                                            dynamics.WeylMatrix.weyl(g), modes)
        n, prev, val, cause = system.n_max, None, None, None
        while oracle.dimension(modes.size, n) <= oracle.DENSE_LIMIT:
            hot = system if n == system.n_max else oracle.build_hamiltonian(modes, delta, n)
            cur, cause = _guarded(lambda: oracle.expectation(
                hot, oracle.Thermal(beta), oracle.WeylDisplacement(g_values)))
            if cur is not None and prev is not None and abs(cur - prev) <= 0.1 * tol:
                val = cur
                break
            prev = cur
            n *= 2
        if val is None:
            cause = cause or (f"Gibbs sum not converged within {oracle.DENSE_LIMIT} dense "
                              f"states (last n_max {n // 2})")
        rows.append(_row(f"thermal_weyl(beta={float(beta)!r})", closed, val, tol, cause))
    return rows, system


def run_validate(config, out_dir, fmt="json", base_dir="."):
    model = config["model"]
    task = config["task"]["validate"]
    space = build_model(model, base_dir)
    delta = model.get("delta", 0.0)
    if isinstance(space, oracle.DiscreteModes):
        modes = space
    else:
        strat = task.get("strategy")
        if strat is None or "M" not in task:
            raise ConfigError("validate on a continuum model needs M and strategy",
                              ["task/validate/M", "task/validate/strategy"])
        cls = oracle.LinearGrid if strat["kind"] == "linear" else oracle.GaussPanels
        modes = oracle.discretize(space, task["M"], cls(strat["k_max"]))
    g = build_test_function(task.get("g"), modes, base_dir)
    g_values = g(modes.points())
    times = build_times(task.get("times", [0.0, 1.0]))
    rows, system = validation_rows(modes, delta, np.asarray(g_values), times,
                                   task.get("tolerance", 1e-8), task.get("n_max", "auto"),
                                   task.get("betas", ()))
    ok = all(r["pass"] for r in rows)
    payload = {"n_max": system.n_max, "dimension": system.dimension, "pass": ok, "rows": rows}
    files = {}
    if fmt == "csv":
        files["validate.csv"] = csv_text(
            ["quantity", "closed_form_re", "closed_form_im", "oracle_re", "oracle_im", "abs_diff",
             "tolerance", "pass", "cause"],
            [[r["quantity"], *r["closed_form"], *(r["oracle"] or ["", ""]),
              "" if r["abs_diff"] is None else r["abs_diff"], r["tolerance"],
              str(r["pass"]).lower(), r["cause"] or ""] for r in rows])
    else:
        files["validate.json"] = dumps(payload)
    write_outputs(out_dir, files)
    return (EXIT_OK if ok else EXIT_FAILED), payload


RUNNERS = {"diagnose": run_diagnose, "dynamics": run_dynamics, "thermal": run_thermal,
           "validate": run_validate}


# ---------------------------------------------------------------------------
# Entry point


_RNG_ENTRY_POINTS = {
    np.random: ("default_rng", "rand", "randn", "random", "random_sample", "randint",
                "normal", "uniform", "choice", "shuffle", "permutation", "seed"),
    random: ("random", "uniform", "randint", "choice", "shuffle", "gauss", "seed", "sample"),
}


@contextlib.contextmanager
def seedless():
    """Make every common RNG entry point raise for the duration of the block."""
    saved = []

    def forbidden(*_args, **_kwargs):
        raise RuntimeError("random number generation is forbidden in --seedless mode")

    for module, names in _RNG_ENTRY_POINTS.items():
        for name in names:
            if hasattr(module, name):
                saved.append((module, name, getattr(module, name)))
                setattr(module, name, forbidden)
    try:
        yield
    finally:
        for module, name, original in saved:
            setattr(module, name, original)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="udwlab", description="Gapless Unruh-DeWitt / spin-boson laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in TASKS:
        p = sub.add_parser(name, help=f"run the {name} task of a config file")
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (default: config output.dir or .)")
        p.add_argument("--format", choices=("json", "csv"), default=None)
        p.add_argument("--seedless", action="store_true",
                       help="fail if any random number generator is touched")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.command not in config["task"]:
            present = next(iter(config["task"]))
            raise ConfigError(f"config describes a {present!r} task, not {args.command!r}",
                              [f"task/{present}"])
        output = config.get("output", {})
        out_dir = args.out or output.get("dir", ".")
        fmt = args.format or output.get("format") or ("csv" if args.command == "thermal" else "json")
        base_dir = os.path.dirname(os.path.abspath(args.config))
        guard = seedless() if args.seedless else contextlib.nullcontext()
        with guard:
            code, _ = RUNNERS[args.command](config, out_dir, fmt, base_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        if exc.keys:
            print("offending keys: " + ", ".join(exc.keys), file=sys.stderr)
        return EXIT_CONFIG
    except InconclusiveError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(dumps(exc.diagnostics), file=sys.stderr, end="")
        return EXIT_INCONCLUSIVE
    except UDWError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return code


if __name__ == "__main__":
    sys.exit(main())
