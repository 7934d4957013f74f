"""Command-line front end: experiment runs in, CSV metric logs out.

Each subcommand owns a flat key/value schema. Values resolve in three
layers: built-in defaults, then a config file of ``key = value`` lines
(``#`` starts a comment), then command-line flags. Unknown config keys are
rejected. Seed sweeps (``--seeds A..B``) can fan out over processes with
``--jobs``; workers return their rows and the parent writes the CSV, so
row order never depends on scheduling.

Exit codes: 0 when every requested run completed (training runs that blow
up are logged with a failure flag and still count as completed), 2 for
configuration or validation problems, 1 for I/O failures.
"""

import argparse
import csv
import multiprocessing
import sys
import time

import numpy as np

from .data import (SinusoidForcing, gen_oscillator_series, load_csv_series,
                   sample_point_cloud, split_series)
from .models import (FAMILIES, RACE_OBJECTIVES, ModelSpec, hbode_race_rhs,
                     initial_state, linear_f_net, scalar_softplus)
from .nn import Activation, make_rng, mlp_init, split_rngs
from .odeint import BlowUpError, SolverConfig, StepLimitError, integrate
from .spectrum import BlockMatrixM, adjoint_norm_trace, eigenvalues, \
    verify_pairing
from .training import (TrainConfig, classifier_nfe_profile,
                       evaluate_ode_rnn, oscillator_rnn,
                       point_cloud_classifier, train_classifier,
                       train_ode_rnn, windows_from_series,
                       _gather_classifier, _scatter_classifier,
                       _solve_backward, _solve_forward, _resolve_fast)


class ConfigError(Exception):
    pass


# --- value parsers shared by config files and flags

def _family(s):
    if s not in FAMILIES:
        raise ValueError("unknown model family %r" % (s,))
    return s


def _objective(s):
    if s not in RACE_OBJECTIVES:
        raise ValueError("unknown objective %r" % (s,))
    return s


def _floats(s):
    vals = [float(v) for v in s.split(",") if v.strip()]
    if not vals:
        raise ValueError("expected a comma-separated list of numbers")
    return vals


def _strings(s):
    vals = [v.strip() for v in s.split(",") if v.strip()]
    if not vals:
        raise ValueError("expected a comma-separated list of names")
    return vals


def _seed_range(s):
    parts = s.split("..")
    if len(parts) != 2:
        raise ValueError("seed ranges look like A..B")
    lo, hi = int(parts[0]), int(parts[1])
    if hi < lo:
        raise ValueError("empty seed range %s" % s)
    return list(range(lo, hi + 1))


def _bool(s):
    low = s.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError("expected a boolean, got %r" % (s,))


def _field_kind(s):
    if s not in ("random", "linear-decay"):
        raise ValueError("field must be 'random' or 'linear-decay'")
    return s


# schema: key -> (parser, default). The same keys work as config-file
# entries and as --flags (dashes become underscores).
SCHEMAS = {
    "optimize-ode": {
        "objective": (_objective, "rosenbrock"),
        "gamma": (float, None),
        "step": (float, None),
        "horizon": (float, None),
        "out": (str, "optimize-ode.csv"),
    },
    "point-cloud": {
        "model": (_family, "hbnode"),
        "tol": (float, 1e-7),
        "epochs": (int, 200),
        "seed": (int, 0),
        "seeds": (_seed_range, None),
        "jobs": (int, 1),
        "hidden": (int, 20),
        "save_params": (str, None),
        "out": (str, "point-cloud.csv"),
    },
    "nfe-study": {
        "model": (_family, "hbnode"),
        "tolerances": (_floats, [1e-3, 1e-5, 1e-7]),
        "seed": (int, 0),
        "epochs": (int, 20),
        "hidden": (int, 20),
        "params": (str, None),
        "out": (str, "nfe-study.csv"),
    },
    "blowup-study": {
        "seed": (int, 0),
        "seeds": (_seed_range, None),
        "jobs": (int, 1),
        "horizon": (float, 30.0),
        "tol": (float, 1e-6),
        "dim": (int, 2),
        "zero_field": (_bool, False),
        "out": (str, "blowup-study.csv"),
    },
    "timeseries": {
        "model": (_family, "hbnode"),
        "tol": (float, 1e-5),
        "seed": (int, 0),
        "seeds": (_seed_range, None),
        "jobs": (int, 1),
        "epochs": (int, 40),
        "data": (str, "oscillator"),
        "time_column": (str, "t"),
        "value_columns": (_strings, ["x"]),
        "length": (int, 400),
        "window": (int, 16),
        "forecast": (int, 4),
        "stride": (int, 8),
        "lr": (float, 3e-3),
        "batch": (int, 16),
        "latent": (int, 3),
        "hidden": (int, 12),
        "out": (str, "timeseries.csv"),
    },
    "adjoint-trace": {
        "model": (_family, "hbnode"),
        "field": (_field_kind, "random"),
        "dim": (int, 2),
        "hidden": (int, 8),
        "horizon": (float, 20.0),
        "gaps": (_floats, None),
        "seed": (int, 0),
        "tol": (float, 1e-9),
        "out": (str, "adjoint-trace.csv"),
    },
    "grad-check": {
        "seed": (int, 0),
        "out": (str, "grad-check.csv"),
    },
    "spectrum": {
        "seed": (int, 0),
        "dim": (int, 3),
        "gamma": (float, 0.5),
        "span": (float, 2.0),
        "out": (str, "spectrum.csv"),
    },
}


def _parse_config_file(path):
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as err:
        raise ConfigError("cannot read config %s: %s" % (path, err))
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("%s line %d: expected key = value"
                              % (path, lineno))
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    return values


def _resolve(command, args):
    schema = SCHEMAS[command]
    settings = {key: default for key, (_, default) in schema.items()}
    config_path = getattr(args, "config", None)
    if config_path:
        for key, raw in _parse_config_file(config_path).items():
            if key not in schema:
                raise ConfigError("unknown config key %r for %s"
                                  % (key, command))
            try:
                settings[key] = schema[key][0](raw)
            except ValueError as err:
                raise ConfigError("config key %r: %s" % (key, err))
    for key in schema:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            settings[key] = flag_value
    return settings


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _run_tasks(worker, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with multiprocessing.Pool(processes=min(jobs, len(tasks))) as pool:
        return pool.map(worker, tasks)


def _sweep_seeds(settings):
    if settings.get("seeds"):
        return list(settings["seeds"])
    return [settings["seed"]]


# --- optimize-ode

_RACE_DEFAULTS = {
    "rosenbrock": {"gamma": 0.9, "step": 0.001, "horizon": 1.0},
    "beale": {"gamma": 0.7, "step": 0.01, "horizon": 2.0},
}


def cmd_optimize_ode(settings):
    objective = settings["objective"]
    defaults = _RACE_DEFAULTS[objective]
    gamma = defaults["gamma"] if settings["gamma"] is None \
        else settings["gamma"]
    step = defaults["step"] if settings["step"] is None else settings["step"]
    horizon = defaults["horizon"] if settings["horizon"] is None \
        else settings["horizon"]
    if step <= 0.0 or horizon <= 0.0:
        raise ValueError("step and horizon must be positive")
    objective_fn = RACE_OBJECTIVES[objective][0]
    n = int(round(horizon / step))
    times = np.linspace(0.0, horizon, n + 1)
    cfg = SolverConfig.rk4(step)
    rows = []
    for variant, y0 in (("gradient_flow", np.zeros(2)),
                        ("heavy_ball", np.zeros(4))):
        def rhs(t, s, _variant=variant):
            return hbode_race_rhs(objective, _variant, t, s, gamma=gamma)

        result = integrate(rhs, y0, times, cfg)
        for t, state in result.checkpoints:
            x, y = state[0], state[1]
            rows.append([variant, t, x, y, objective_fn(state[:2])])
    _write_csv(settings["out"], ["variant", "t", "x", "y",
                                 "objective_value"], rows)
    return 0


# --- point-cloud

def _point_cloud_worker(task):
    family, seed, tol, epochs, hidden = task
    cloud = sample_point_cloud(seed)
    cspec = point_cloud_classifier(family, hidden=hidden, seed=seed)
    cfg = TrainConfig.point_cloud(epochs=epochs, seed=seed, tolerance=tol)
    result = train_classifier(cspec, cloud, cfg)
    rows = []
    for rec in result.log:
        if rec["failed"]:
            rows.append([seed, rec["epoch"], "", "", "", "", "", True])
        else:
            rows.append([seed, rec["epoch"], rec["loss"], rec["accuracy"],
                        rec["forward_nfe"], rec["backward_nfe"],
                        rec["seconds"], False])
    return rows, _gather_classifier(cspec)


def cmd_point_cloud(settings):
    seeds = _sweep_seeds(settings)
    if settings["save_params"] and len(seeds) > 1:
        raise ValueError("save_params works with a single seed only")
    tasks = [(settings["model"], seed, settings["tol"], settings["epochs"],
              settings["hidden"]) for seed in seeds]
    results = _run_tasks(_point_cloud_worker, tasks, settings["jobs"])
    rows = [row for chunk, _ in results for row in chunk]
    _write_csv(settings["out"],
               ["seed", "iteration", "loss", "accuracy", "forward_nfe",
                "backward_nfe", "seconds", "failed"], rows)
    if settings["save_params"]:
        np.savetxt(settings["save_params"], results[0][1], fmt="%.17g")
    return 0


# --- nfe-study

def cmd_nfe_study(settings):
    seed = settings["seed"]
    cloud = sample_point_cloud(seed)
    cspec = point_cloud_classifier(settings["model"],
                                   hidden=settings["hidden"], seed=seed)
    if settings["params"]:
        try:
            flat = np.atleast_1d(np.loadtxt(settings["params"]))
        except OSError as err:
            raise ConfigError("cannot read params: %s" % err)
        expected = _gather_classifier(cspec).size
        if flat.shape != (expected,):
            raise ValueError("parameter file holds %d values, model needs %d"
                             % (flat.size, expected))
        _scatter_classifier(cspec, flat)
    elif settings["epochs"] > 0:
        cfg = TrainConfig.point_cloud(epochs=settings["epochs"], seed=seed,
                                      tolerance=1e-5)
        result = train_classifier(cspec, cloud, cfg)
        if result.failed:
            raise ValueError("preparatory training blew up; try another "
                             "seed or provide params")
    rows = []
    for rec in classifier_nfe_profile(cspec, cloud, settings["tolerances"]):
        rows.append([rec["tolerance"], rec["forward_nfe"],
                     rec["backward_nfe"], settings["model"]])
    _write_csv(settings["out"], ["tolerance", "forward_nfe", "backward_nfe",
                                 "family"], rows)
    return 0


# --- blowup-study

def _scaled_norm(v):
    # plain sqrt(sum of squares) overflows near the blow-up threshold
    m = float(np.max(np.abs(v)))
    if m == 0.0 or not np.isfinite(m):
        return m
    return m * float(np.linalg.norm(v / m))


def _blowup_rhs(family, field, dim, gamma, xi, sigma):
    if family in ("node", "anode"):
        return lambda t, y: field(y, t)
    if family == "sonode":
        def rhs(t, y):
            return np.concatenate([y[dim:], field(y[:dim], t)])
        return rhs
    if family == "hbnode":
        def rhs(t, y):
            h, m = y[:dim], y[dim:]
            return np.concatenate([m, -gamma * m + field(h, t)])
        return rhs

    def rhs(t, y):  # ghbnode
        h, m = y[:dim], y[dim:]
        dm = -gamma * m + field(h, t) - xi * h
        return np.concatenate([sigma.value(m), dm])
    return rhs


def _blowup_worker(task):
    seed, horizon, tol, dim, zero_field = task
    rng_a, rng_c, rng_h, rng_u = split_rngs(seed, 4)
    drive = SinusoidForcing().build(rng_u)
    # the origin is the common fixed point of every family, so the
    # field-off sanity mode starts there and any drift flags a leak
    h0 = np.zeros(dim) if zero_field else rng_h.standard_normal(dim)
    gamma = 1.0 / (1.0 + np.exp(3.0))
    xi = scalar_softplus(0.0)
    sigma = Activation("hardtanh", lo=-5.0, hi=5.0)
    cfg = SolverConfig.dopri45(tol)
    times = np.linspace(0.0, horizon, 241)
    rows = []
    for family in FAMILIES:
        d = dim + 1 if family == "anode" else dim
        a_mat = (rng_a.standard_normal((d, d)) / np.sqrt(d)
                 + 0.5 * np.eye(d))
        c_vec = rng_c.standard_normal(d)
        if zero_field:
            def field(h, t, _d=d):
                return np.zeros(_d)
        else:
            def field(h, t, _a=a_mat, _c=c_vec):
                return _a @ h + _c * drive(t)
        start = np.concatenate([h0, np.zeros(1)]) if family == "anode" \
            else h0
        if family in ("sonode", "hbnode", "ghbnode"):
            y0 = np.concatenate([start, np.zeros(d)])
        else:
            y0 = start.copy()
        rhs = _blowup_rhs(family, field, d, gamma, xi, sigma)
        try:
            result = integrate(rhs, y0, times, cfg)
            checkpoints = result.checkpoints
        except (BlowUpError, StepLimitError) as err:
            checkpoints = err.partial.checkpoints
        for t, state in checkpoints:
            rows.append([seed, t, _scaled_norm(state[:d]), family])
    return rows


def cmd_blowup_study(settings):
    if settings["dim"] < 1:
        raise ValueError("dim must be at least 1")
    seeds = _sweep_seeds(settings)
    tasks = [(seed, settings["horizon"], settings["tol"], settings["dim"],
              settings["zero_field"]) for seed in seeds]
    results = _run_tasks(_blowup_worker, tasks, settings["jobs"])
    rows = [row for chunk in results for row in chunk]
    _write_csv(settings["out"], ["seed", "t", "norm", "family"], rows)
    return 0


# --- timeseries

def _timeseries_worker(task):
    (family, seed, tol, epochs, data, time_column, value_columns, length,
     window, forecast, stride, lr, batch, latent, hidden) = task
    if data == "oscillator":
        series = gen_oscillator_series(seed, length=length)
    else:
        series = load_csv_series(data, time_column, value_columns)
    train_part, _, test_part = split_series(series)
    train_windows = windows_from_series(train_part, value_columns, window,
                                        forecast, stride)
    test_windows = windows_from_series(test_part, value_columns, window,
                                       forecast, stride)
    if not train_windows or not test_windows:
        raise ValueError("series too short for the requested windows")
    spec = oscillator_rnn(family, latent_dim=latent, hidden=hidden,
                          obs_dim=len(value_columns), seed=seed)
    cfg = TrainConfig(lr, batch, epochs, seed=seed,
                      solver=SolverConfig.dopri45(tol),
                      clip_threshold=100.0)
    result = train_ode_rnn(spec, train_windows, cfg)
    rows = []
    for rec in result.log:
        if rec["failed"]:
            rows.append([seed, "train", rec["epoch"], "", "", "", "", True])
        else:
            rows.append([seed, "train", rec["epoch"], rec["loss"],
                         rec["forward_nfe"], rec["backward_nfe"],
                         rec["seconds"], False])
    if not result.failed:
        started = time.perf_counter()
        ev = evaluate_ode_rnn(spec, test_windows,
                              SolverConfig.dopri45(tol))
        rows.append([seed, "test", "", ev["mse"], ev["forward_nfe"], "",
                     time.perf_counter() - started, False])
    return rows


def cmd_timeseries(settings):
    seeds = _sweep_seeds(settings)
    tasks = [(settings["model"], seed, settings["tol"], settings["epochs"],
              settings["data"], settings["time_column"],
              settings["value_columns"], settings["length"],
              settings["window"], settings["forecast"], settings["stride"],
              settings["lr"], settings["batch"], settings["latent"],
              settings["hidden"]) for seed in seeds]
    results = _run_tasks(_timeseries_worker, tasks, settings["jobs"])
    rows = [row for chunk in results for row in chunk]
    _write_csv(settings["out"],
               ["seed", "phase", "epoch", "loss", "forward_nfe",
                "backward_nfe", "seconds", "failed"], rows)
    return 0


# --- adjoint-trace

def _trace_model(settings):
    rng = make_rng(settings["seed"])
    dim = settings["dim"]
    family = settings["model"]
    if settings["field"] == "linear-decay":
        if family == "sonode":
            raise ValueError("linear-decay field covers first-order "
                             "inputs only")
        net = linear_f_net(-2.0 * np.eye(dim))
    else:
        f_in = 2 * dim if family == "sonode" else dim
        net = mlp_init([f_in, settings["hidden"], dim], Activation("tanh"),
                       rng=rng)
    x = rng.standard_normal(dim)
    spec = ModelSpec(family, net)
    return spec, initial_state(spec, x).packed


def cmd_adjoint_trace(settings):
    if settings["horizon"] <= 0.0:
        raise ValueError("horizon must be positive")
    spec, y0 = _trace_model(settings)
    gaps = settings["gaps"]
    if gaps is None:
        gaps = list(np.linspace(0.0, settings["horizon"], 41))
    cfg = SolverConfig.dopri45(settings["tol"],
                               atol=settings["tol"] * 1e-6)
    trace = adjoint_norm_trace(spec, y0, settings["horizon"], gaps, cfg)
    rows = [[gap, norm, settings["model"]] for gap, norm in trace]
    _write_csv(settings["out"], ["gap", "norm", "family"], rows)
    return 0


# --- grad-check

def _grad_check_fixture(family, seed):
    rng = make_rng(seed)
    tanh = Activation("tanh")
    if family == "sonode":
        net = mlp_init([6, 6, 3], tanh, rng=rng)
    else:
        net = mlp_init([3, 6, 3], tanh, rng=rng)
    kwargs = {"aug_dim": 1} if family == "anode" else {}
    spec = ModelSpec(family, net, **kwargs)
    y0 = 0.5 * rng.standard_normal(spec.state_dim)
    cot = rng.standard_normal(spec.state_dim)
    return spec, y0, cot


def _terminal_inner(spec, y0, span, cot, cfg, fast):
    result = _solve_forward(spec, y0, span, cfg, fast)
    return float(np.dot(cot, result.final_state))


def cmd_grad_check(settings):
    from .training import _ode_params, _set_ode_params
    span = (0.0, 1.0)
    cfg = SolverConfig.dopri45(1e-10)
    rows = []
    for offset, family in enumerate(FAMILIES):
        spec, y0, cot = _grad_check_fixture(family, settings["seed"] + offset)
        fast = _resolve_fast(spec, cfg, None)
        fwd = _solve_forward(spec, y0, span, cfg, fast)
        got = _solve_backward(spec, fwd, cot, cfg, None, fast).grad_params
        base = _ode_params(spec)
        fd = np.zeros_like(base)
        for i in range(base.size):
            h = 1e-6 * max(1.0, abs(base[i]))
            for sign, bucket in ((1.0, 0), (-1.0, 1)):
                shifted = base.copy()
                shifted[i] += sign * h
                _set_ode_params(spec, shifted)
                value = _terminal_inner(spec, y0, span, cot, cfg, fast)
                fd[i] += sign * value / (2.0 * h)
            _set_ode_params(spec, base)
        rel = np.max(np.abs(got - fd) / np.maximum(1e-5, np.abs(fd)))
        rows.append([family, float(rel), base.size])
    _write_csv(settings["out"], ["family", "max_rel_error", "n_params"],
               rows)
    return 0


# --- spectrum

def cmd_spectrum(settings):
    if settings["dim"] < 1:
        raise ValueError("dim must be at least 1")
    if settings["span"] <= 0.0:
        raise ValueError("span must be positive")
    if settings["gamma"] < 0.0:
        raise ValueError("gamma must be non-negative")
    rng = make_rng(settings["seed"])
    n = settings["dim"]
    f_bar = rng.standard_normal((n, n))
    m = BlockMatrixM(f_bar, np.eye(n), settings["gamma"],
                     (0.0, settings["span"]))
    report = verify_pairing(m)
    rows = []
    for val in eigenvalues(-m.matrix):
        rows.append(["eigenvalue", val.real, val.imag])
    rows.append(["pair_sum_target", report["target"], ""])
    rows.append(["max_pair_residual", report["max_pair_residual"], ""])
    rows.append(["threshold", report["threshold"], ""])
    rows.append(["eigenvalues_at_or_above",
                 report["eigenvalues_at_or_above"], ""])
    rows.append(["pairs_with_member_at_or_above",
                 report["pairs_with_member_at_or_above"], ""])
    _write_csv(settings["out"], ["row_type", "real", "imag"], rows)
    return 0


COMMANDS = {
    "optimize-ode": cmd_optimize_ode,
    "point-cloud": cmd_point_cloud,
    "nfe-study": cmd_nfe_study,
    "blowup-study": cmd_blowup_study,
    "timeseries": cmd_timeseries,
    "adjoint-trace": cmd_adjoint_trace,
    "grad-check": cmd_grad_check,
    "spectrum": cmd_spectrum,
}

_FLAG_HELP = {
    "model": "model family",
    "tol": "solver tolerance",
    "seed": "base random seed",
    "seeds": "inclusive seed range A..B (overrides --seed)",
    "jobs": "worker processes for seed sweeps",
    "epochs": "training iterations",
    "out": "output CSV path",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hbnode",
        description="Heavy-ball neural ODE experiments; results land in "
                    "CSV files.")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in SCHEMAS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", default=None,
                       help="key = value settings file")
        for key, (cast, _default) in schema.items():
            flag = "--" + key.replace("_", "-")
            if cast is _bool:
                p.add_argument(flag, dest=key, action="store_const",
                               const=True, default=None)
            else:
                p.add_argument(flag, dest=key, type=cast, default=None,
                               help=_FLAG_HELP.get(key))
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        settings = _resolve(args.command, args)
        return COMMANDS[args.command](settings)
    except ConfigError as err:
        print("error: %s" % err, file=sys.stderr)
        return 2
    except ValueError as err:
        print("error: %s" % err, file=sys.stderr)
        return 2
    except (BlowUpError, StepLimitError, OSError) as err:
        print("error: %s" % err, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
