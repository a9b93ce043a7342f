"""Scenario configuration files.

Configs are INI-style text with sections.  Every key has a default, so an
empty file is a valid scenario; unknown sections or keys are errors so a
mistyped gain name never silently falls back to its default.
"""

import configparser
import copy
import io

from .errors import ConfigError


def _floats(text):
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _strings(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_float(text):
    text = text.strip()
    return None if text in ("", "none") else float(text)


def _points(text):
    text = text.strip()
    if text == "random":
        return "random"
    pts = []
    for chunk in text.split(";"):
        if chunk.strip():
            xy = _floats(chunk)
            if len(xy) != 2:
                raise ValueError(f"expected 'x, y' pairs separated by ';', got {chunk!r}")
            pts.append(xy)
    return tuple(pts)


# section -> key -> (parser, default, help)
SCHEMA = {
    "scenario": {
        "algorithm": (str, "s1", "single | s1 | s2 | s3"),
        "agents": (int, 4, "number of mobile sensors"),
        "dt": (float, 1e-3, "fixed RK4 step (s)"),
        "control_period": (float, 1e-3, "waypoint and excitation decisions happen on this clock; a multiple of dt"),
        "duration": (float, 16.5, "run length (s) when run_after_excitation is unset"),
        "run_after_excitation": (_optional_float, None, "if set, run until excitation time + this (s)"),
        "excitation_timeout": (float, 120.0, "abort if excitation is not reached by this time (s)"),
        "seed": (int, 7, "global seed; split into per-purpose streams"),
        "initial_positions": (_points, "random", "'random' or 'x, y; x, y; ...'"),
        "min_separation": (float, 0.05, "minimum spacing of random initial positions"),
    },
    "field": {
        "kind": (str, "reference", "reference | three_bump | constant"),
        "value": (float, 1.0, "level of the constant field"),
        "a_max": (_optional_float, None, "parameter bound used in error radii; default max |a|"),
    },
    "basis": {
        "kind": (str, "field", "field (kernels of the true field) | grid"),
        "p": (int, 100, "grid basis size (perfect square)"),
        "sigma": (float, 0.05, "grid basis sigma"),
        "sigma_convention": (str, "std", "std: every sigma is a Gaussian standard deviation; width: the kernel width"),
    },
    "motion": {
        "gain": (float, 5.0, "proportional tracking gain"),
        "tour_mode": (str, "radius", "radius | dominance | sufficient"),
        "epsilon": (float, 0.5, "dominance level for dominance/sufficient tours"),
        "reach_radius": (float, 0.01, "waypoint reach distance in radius mode"),
    },
    "estimator": {
        "gamma": (_floats, (1.0,), "adaptation gain: one value or one per kernel"),
        "zeta": (float, 1.0, "consensus gain (s1)"),
        "edge_weight": (float, 1.0, "Laplacian edge weight"),
        "cross_weight": (float, 1.0, "directed consensus weight (s3)"),
        "excitation_threshold": (float, 1e-4, "minimum eigenvalue declaring excitation"),
        "check_interval": (int, 10, "steps between eigenvalue checks"),
        "require_full_lap": (_bool, True, "excitation also requires one full tour lap"),
        "freeze": (str, "auto", "auto | on | off: stop the integrators after excitation"),
        "alpha": (float, 0.99, "alpha used when reporting error radii"),
        "a_init": (float, 0.0, "initial value of every estimate"),
    },
    "centres": {
        "accuracy": (float, 0.0, "radius of the random centre perturbation"),
    },
    "partition": {
        "seeding": (str, "initial", "initial | lloyd"),
        "lloyd_iterations": (int, 500, "iteration cap of the uniform coverage pre-run"),
    },
    "output": {
        "dir": (str, "out", "output directory for run"),
        "trajectory_every": (int, 10, "steps between trajectory rows"),
        "estimate_every": (int, 100, "steps between estimate and error rows"),
        "grid_resolution": (int, 101, "nodes per axis of the reconstruction grid file"),
        "integral_resolution": (int, 200, "midpoint cells per axis for the integral error"),
    },
    "sweep": {
        "algorithms": (_strings, ("s1", "s2", "s3"), "algorithms to sweep"),
        "sigmas": (_floats, (0.05,), "grid basis widths to sweep"),
        "sizes": (_ints, (100,), "grid basis sizes to sweep"),
    },
}

CHOICES = {
    ("scenario", "algorithm"): ("single", "s1", "s2", "s3"),
    ("field", "kind"): ("reference", "three_bump", "constant"),
    ("basis", "kind"): ("field", "grid"),
    ("basis", "sigma_convention"): ("std", "width"),
    ("motion", "tour_mode"): ("radius", "dominance", "sufficient"),
    ("estimator", "freeze"): ("auto", "on", "off"),
    ("partition", "seeding"): ("initial", "lloyd"),
}


def defaults():
    return {sec: {k: v[1] for k, v in keys.items()} for sec, keys in SCHEMA.items()}


def _check(cfg):
    problems = []

    def positive(sec, key):
        if not cfg[sec][key] > 0:
            problems.append((f"{sec}.{key}", "must be positive"))

    for (sec, key), allowed in CHOICES.items():
        if cfg[sec][key] not in allowed:
            problems.append((f"{sec}.{key}", f"must be one of {', '.join(allowed)}"))
    for sec, key in [("scenario", "agents"), ("scenario", "dt"), ("scenario", "duration"),
                     ("scenario", "excitation_timeout"), ("motion", "gain"),
                     ("motion", "reach_radius"), ("estimator", "edge_weight"),
                     ("estimator", "cross_weight"), ("estimator", "excitation_threshold"),
                     ("estimator", "check_interval"), ("output", "trajectory_every"),
                     ("output", "estimate_every")]:
        positive(sec, key)
    positive("scenario", "control_period")
    dt, cp = cfg["scenario"]["dt"], cfg["scenario"]["control_period"]
    if dt > 0 and cp > 0 and (cp < dt * (1 - 1e-9) or abs(cp / dt - round(cp / dt)) > 1e-6):
        problems.append(("scenario.control_period", "must be a whole multiple of scenario.dt"))
    if cfg["estimator"]["zeta"] < 0:
        problems.append(("estimator.zeta", "must be nonnegative"))
    if any(g <= 0 for g in cfg["estimator"]["gamma"]) or not cfg["estimator"]["gamma"]:
        problems.append(("estimator.gamma", "must be positive"))
    if not 0 < cfg["motion"]["epsilon"] < 1:
        problems.append(("motion.epsilon", "must lie in (0, 1)"))
    if not 0 < cfg["estimator"]["alpha"] < 1:
        problems.append(("estimator.alpha", "must lie in (0, 1)"))
    if cfg["centres"]["accuracy"] < 0:
        problems.append(("centres.accuracy", "must be nonnegative"))
    if cfg["scenario"]["algorithm"] == "single" and cfg["scenario"]["agents"] != 1:
        problems.append(("scenario.agents", "the single algorithm needs exactly one agent"))
    if cfg["basis"]["kind"] == "field" and cfg["field"]["kind"] != "reference":
        problems.append(("basis.kind", "'field' needs a kernel-defined field; use 'grid'"))
    if cfg["basis"]["kind"] == "grid":
        positive("basis", "p")
        positive("basis", "sigma")
    if cfg["output"]["grid_resolution"] < 2:
        problems.append(("output.grid_resolution", "must be at least 2"))
    if cfg["output"]["integral_resolution"] < 2:
        problems.append(("output.integral_resolution", "must be at least 2"))
    pos = cfg["scenario"]["initial_positions"]
    if pos != "random" and len(pos) != cfg["scenario"]["agents"]:
        problems.append(("scenario.initial_positions", "need one position per agent"))
    rae = cfg["scenario"]["run_after_excitation"]
    if rae is not None and rae < 0:
        problems.append(("scenario.run_after_excitation", "must be nonnegative"))
    for alg in cfg["sweep"]["algorithms"]:
        if alg not in CHOICES[("scenario", "algorithm")]:
            problems.append(("sweep.algorithms", f"unknown algorithm {alg!r}"))
    if problems:
        raise ConfigError(problems)


def parse(text):
    """Parse config text into a fully resolved nested dict."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([("<file>", str(exc).splitlines()[0])]) from None
    cfg = defaults()
    problems = []
    for sec in parser.sections():
        if sec not in SCHEMA:
            problems.append((sec, "unknown section"))
            continue
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                problems.append((f"{sec}.{key}", "unknown key"))
                continue
            conv = SCHEMA[sec][key][0]
            try:
                cfg[sec][key] = conv(raw)
            except ValueError as exc:
                problems.append((f"{sec}.{key}", f"cannot parse {raw!r}: {exc}"))
    if problems:
        raise ConfigError(problems)
    _check(cfg)
    return cfg


def load(path):
    try:
        with open(path) as fh:
            return parse(fh.read())
    except OSError as exc:
        raise ConfigError([(str(path), exc.strerror or str(exc))]) from None


def override(cfg, **sections):
    """Copy of ``cfg`` with ``section={key: value}`` updates applied and re-checked."""
    out = copy.deepcopy(cfg)
    problems = []
    for sec, values in sections.items():
        if sec not in SCHEMA:
            problems.append((sec, "unknown section"))
            continue
        for key, val in values.items():
            if key not in SCHEMA[sec]:
                problems.append((f"{sec}.{key}", "unknown key"))
                continue
            out[sec][key] = val
    if problems:
        raise ConfigError(problems)
    _check(out)
    return out


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(", ".join(repr(v) for v in pt) for pt in value)
        return ", ".join(repr(v) if not isinstance(v, str) else v for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def dumps(cfg):
    """Render a resolved config back to text that :func:`parse` accepts."""
    buf = io.StringIO()
    for sec, keys in SCHEMA.items():
        buf.write(f"[{sec}]\n")
        for key in keys:
            buf.write(f"{key} = {_fmt(cfg[sec][key])}\n")
        buf.write("\n")
    return buf.getvalue()
