"""Run metrics recomputed from logs, plus cross-algorithm comparison."""

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import config as cfgmod
from .errors import InvalidArgument
from .field import integral_error

EXPECTED_ORDER = ("s1", "s3", "s2")


@dataclass
class MetricsReport:
    algorithm: str
    final_errors: np.ndarray
    times: np.ndarray
    mean_error: np.ndarray
    integral_error: float
    T: float
    bounds: list = field(default_factory=list)

    @property
    def max_param_error(self):
        return float(np.max(self.final_errors))

    @property
    def bounds_ok(self):
        return all(b["ok"] for b in self.bounds)

    def as_dict(self):
        return dict(algorithm=self.algorithm, T=self.T, max_param_error=self.max_param_error,
                    mean_param_error=float(np.mean(self.final_errors)),
                    integral_error=self.integral_error,
                    final_errors=[float(e) for e in self.final_errors],
                    bounds=self.bounds, bounds_ok=self.bounds_ok)


def report_from_record(record):
    """Report built from an in-memory run record."""
    times, mean = _mean_trace(record.errors)
    return MetricsReport(record.algorithm, np.array(record.final_errors), times, mean, record.metrics["integral_error"],
                         record.T, list(record.bounds))


def _mean_trace(rows):
    by_t = {}
    for t, _agent, err, *_ in rows:
        by_t.setdefault(t, []).append(err)
    times = np.array(sorted(by_t))
    return times, np.array([np.mean(by_t[t]) for t in times])


def _read_csv(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        return header, [row for row in rd]


def final_estimates_from_log(path):
    """``{agent: (indices, values)}`` at the last logged time of an estimates CSV."""
    _, rows = _read_csv(path)
    if not rows:
        raise InvalidArgument(f"{path} holds no estimate rows")
    t_last = max(float(r[0]) for r in rows)
    out = {}
    for t, agent, idx, val in rows:
        if float(t) == t_last:
            ids, vals = out.setdefault(int(agent), ([], []))
            ids.append(int(idx))
            vals.append(float(val))
    return {a: (np.array(i, dtype=np.int64), np.array(v)) for a, (i, v) in out.items()}


def composite_from_estimates(algorithm, finals, p, n_agents):
    """Network estimate: agent mean for full-vector algorithms, block union otherwise."""
    if algorithm in ("single", "s1"):
        full = np.zeros((n_agents, p))
        for a, (idx, vals) in finals.items():
            full[a, idx] = vals
        return full.mean(axis=0)
    out = np.zeros(p)
    for idx, vals in finals.values():
        out[idx] = vals
    return out


def metrics_from_logs(out_dir):
    """Recompute a :class:`MetricsReport` from the files a run wrote.

    Final errors and the integral error are recomputed from the logged
    estimates and the scenario truth; T and the bound radii come from the
    run summary since they are not recoverable from the logs alone.
    """
    from .engine import build_scenario

    needed = ["config.ini", "summary.json", "estimates.csv", "errors.csv"]
    for name in needed:
        if not os.path.exists(os.path.join(out_dir, name)):
            raise FileNotFoundError(os.path.join(out_dir, name))
    cfg = cfgmod.load(os.path.join(out_dir, "config.ini"))
    with open(os.path.join(out_dir, "summary.json")) as fh:
        summary = json.load(fh)
    scenario = build_scenario(cfg)
    basis = scenario.basis
    n = cfg["scenario"]["agents"]
    alg = cfg["scenario"]["algorithm"]
    finals = final_estimates_from_log(os.path.join(out_dir, "estimates.csv"))
    errs = np.zeros(n)
    for a, (idx, vals) in finals.items():
        errs[a] = np.linalg.norm(vals - scenario.a_true[idx])
    composite = composite_from_estimates(alg, finals, basis.p, n)
    ie = integral_error(scenario.field, basis, composite, cfg["output"]["integral_resolution"])
    _, rows = _read_csv(os.path.join(out_dir, "errors.csv"))
    times, mean = _mean_trace([(float(r[0]), int(r[1]), float(r[2])) for r in rows])
    T = summary["T"] if summary["T"] is not None else float("nan")
    return MetricsReport(alg, errs, times, mean, ie, T, summary.get("bounds", []))


def check_log_fidelity(out_dir, tol=1e-12):
    """Largest gap between recomputed and emitted metrics; raises if above ``tol``."""
    rep = metrics_from_logs(out_dir)
    with open(os.path.join(out_dir, "summary.json")) as fh:
        emitted = json.load(fh)["metrics"]
    gaps = {
        "max_param_error": abs(rep.max_param_error - emitted["max_param_error"]),
        "integral_error": abs(rep.integral_error - emitted["integral_error"]),
    }
    worst = max(gaps.values())
    if not worst <= tol:
        raise InvalidArgument(f"recomputed metrics differ from the run summary: {gaps}")
    return rep, gaps


# -- comparisons -------------------------------------------------------------


@dataclass
class Comparison:
    metric: str
    better: str
    worse: str
    value_better: float
    value_worse: float

    @property
    def relation(self):
        if self.value_better == self.value_worse:
            return "tie"
        return "<" if self.value_better < self.value_worse else ">"

    def passed(self, strict=False):
        if strict:
            return self.value_better < self.value_worse
        return self.value_better <= self.value_worse


@dataclass
class OrderingSummary:
    comparisons: list
    strict: bool = False

    @property
    def passed(self):
        return all(c.passed(self.strict) for c in self.comparisons)

    def lines(self):
        out = []
        for c in self.comparisons:
            flag = "ok" if c.passed(self.strict) else "FAIL"
            out.append(f"{c.metric}: {c.better}={c.value_better:.6g} {c.relation} "
                       f"{c.worse}={c.value_worse:.6g} [{flag}]")
        return out


def _entry(rec):
    if isinstance(rec, dict):
        return rec
    if isinstance(rec, MetricsReport):
        return dict(algorithm=rec.algorithm, max_param_error=rec.max_param_error,
                    integral_error=rec.integral_error)
    cfg = rec.config
    key = (cfg["field"]["kind"], cfg["basis"]["kind"], cfg["basis"]["p"], cfg["basis"]["sigma"],
           cfg["basis"]["sigma_convention"], cfg["centres"]["accuracy"],
           tuple(np.round(rec.generators, 12).ravel()))
    return dict(algorithm=rec.algorithm, max_param_error=rec.metrics["max_param_error"],
                integral_error=rec.metrics["integral_error"], key=key)


def compare_report(records, metrics=("max_param_error", "integral_error"), strict=False):
    """Pairwise comparisons along the expected ordering s1, s3, s2.

    ``records`` are run records or metric reports; plain dicts with an
    ``algorithm`` key also work.  Run records must share the field and basis as well as the
    partition generators.
    """
    entries = [_entry(r) for r in records]
    keys = {e.get("key") for e in entries if e.get("key") is not None}
    if len(keys) > 1:
        raise InvalidArgument("records differ in field, basis or partition")
    by_alg = {}
    for e in entries:
        if e["algorithm"] in by_alg:
            raise InvalidArgument(f"two records for algorithm {e['algorithm']!r}")
        by_alg[e["algorithm"]] = e
    present = [a for a in EXPECTED_ORDER if a in by_alg]
    if len(present) < 2:
        raise InvalidArgument("need records for at least two of s1, s2, s3")
    comps = []
    for metric in metrics:
        for lo, hi in zip(present, present[1:]):
            comps.append(Comparison(metric, lo, hi, float(by_alg[lo][metric]), float(by_alg[hi][metric])))
    return OrderingSummary(comps, strict)
