"""Experiment runner and reporting: policy comparison tables, index sweeps, condition reports.

Every CSV starts with ``# config: {...}`` holding the fully resolved input, so a
run can be repeated exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import presets
from .belief import TransitionMatrix
from .errors import BudgetError, ConfigError
from .index import (
    DEFAULT_ITERS,
    index,
    indexability_margin,
    monitor_index_monotonicity,
    threshold_beta_bound,
    threshold_structure_beta_bound,
)
from .models import ArmModel, BanditConfig
from .policies import IndexCache, joint_optimal_value
from .sim import Policy, monte_carlo

DEFAULT_M = 2
DEFAULT_HORIZONS = (5, 10, 20)
DEFAULT_EPISODES = 1000
DEFAULT_POLICIES = ("whittle", "myopic")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


def _header(fields: dict) -> str:
    return "# config: " + json.dumps(fields, sort_keys=True) + "\n"


@dataclass(frozen=True)
class ExperimentSpec:
    """Resolved description of a policy-comparison run."""

    config: BanditConfig  # horizon is ignored; each entry of ``horizons`` is run
    policies: tuple[str, ...] = DEFAULT_POLICIES
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    episodes: int = DEFAULT_EPISODES
    iters: int = DEFAULT_ITERS
    label: str = ""
    dp_limits: dict = field(default_factory=dict)

    def __post_init__(self):
        for p in self.policies:
            try:
                Policy.parse(p)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ConfigError("horizons must be positive integers")
        if self.episodes < 1:
            raise ConfigError("episodes must be at least 1")

    def to_dict(self) -> dict:
        d = self.config.to_dict()
        d.pop("horizon")
        d.update(policies=list(self.policies), horizons=list(self.horizons),
                 episodes=self.episodes, iters=self.iters, label=self.label)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentSpec:
        """Build from a mapping holding either inline ``arms``, a ``system`` id or an ``example`` id."""
        try:
            return cls._from_dict(dict(d))
        except ConfigError:
            raise
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad experiment config: {exc!r}") from None

    @classmethod
    def _from_dict(cls, d: dict) -> ExperimentSpec:
        label = d.get("label", "")
        if "example" in d:
            ex = presets.example(d["example"])
            d.setdefault("system", ex["system"])
            d.setdefault("eps", ex["eps"])
            d.setdefault("beta", ex["beta"])
            label = label or f"example-{d['example']}"
        if "arms" in d:
            arms = tuple(ArmModel.of(a["p01"], a["p11"], a.get("B", 1.0)) for a in d["arms"])
        elif "system" in d:
            arms = presets.system_arms(d["system"])
            if d.get("arm_subset"):
                arms = tuple(arms[i] for i in d["arm_subset"])
            label = label or f"system-{d['system']}"
        else:
            raise ConfigError("experiment needs one of: arms, system, example")
        for key in ("eps", "beta"):
            if d.get(key) is None:
                raise ConfigError(f"missing {key!r}")
        horizons = tuple(int(h) for h in d.get("horizons", DEFAULT_HORIZONS))
        try:
            config = BanditConfig(
                arms, int(d.get("M", DEFAULT_M)), float(d["eps"]), float(d["beta"]),
                max(horizons) if horizons else 1, int(d.get("seed", 0)),
                d.get("initial_beliefs"), d.get("delta"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cls(
            config,
            tuple(d.get("policies", DEFAULT_POLICIES)),
            horizons,
            int(d.get("episodes", DEFAULT_EPISODES)),
            int(d.get("iters", DEFAULT_ITERS)),
            label,
        )


def read_config(path) -> dict:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return d


def load_spec(path) -> ExperimentSpec:
    return ExperimentSpec.from_dict(read_config(path))


@dataclass(frozen=True)
class CellResult:
    policy: str
    horizon: int
    mean: float
    stderr: float
    dp_optimal: float | None  # None when out of budget


def _run_cell(args):
    config, policy, episodes = args
    res = monte_carlo(config, policy, episodes, cache=IndexCache())
    return res.mean, res.stderr


def _dp_cell(args):
    config, limits = args
    try:
        return joint_optimal_value(config, limits=limits)
    except BudgetError:
        return None


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> list[CellResult]:
    """Monte Carlo value of every (policy, horizon) cell, plus the exact DP optimum where affordable."""
    cells = []
    dp_jobs = []
    for h in spec.horizons:
        cfg = replace(spec.config, horizon=h)
        dp_jobs.append((cfg, spec.dp_limits))
        for p in spec.policies:
            pol = Policy.parse(p, spec.iters)
            cells.append((cfg, pol, spec.episodes))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            mc = list(pool.map(_run_cell, cells))
            dp = list(pool.map(_dp_cell, dp_jobs))
    else:
        mc = [_run_cell(c) for c in cells]
        dp = [_dp_cell(j) for j in dp_jobs]
    dp_by_h = dict(zip(spec.horizons, dp))
    return [CellResult(str(pol), cfg.horizon, mean, se, dp_by_h[cfg.horizon])
            for (cfg, pol, _), (mean, se) in zip(cells, mc)]


def experiment_csv(spec: ExperimentSpec, results: list[CellResult]) -> str:
    buf = io.StringIO()
    buf.write(_header(spec.to_dict()))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "horizon", "mean", "stderr", "dp_optimal"])
    for r in results:
        dp = "unavailable" if r.dp_optimal is None else _fmt(r.dp_optimal)
        w.writerow([r.policy, r.horizon, _fmt(r.mean), _fmt(r.stderr), dp])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# index sweep


def grid_points(step: float) -> np.ndarray:
    if not (0.0 < step <= 1.0):
        raise ConfigError(f"grid step must lie in (0, 1], got {step!r}")
    k = int(round(1.0 / step))
    if not math.isclose(k * step, 1.0, rel_tol=0, abs_tol=1e-9):
        raise ConfigError(f"grid step {step} does not divide [0, 1]")
    return np.linspace(0.0, 1.0, k + 1)


@dataclass(frozen=True)
class Sweep:
    grid: np.ndarray
    values: np.ndarray
    monotone: bool


def sweep_index(P: TransitionMatrix, eps: float, beta: float, B: float = 1.0,
                n: int = DEFAULT_ITERS, grid=0.01, tol: float = 1e-9) -> Sweep:
    g = grid_points(grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    if g.size < 2:
        raise ConfigError("an index sweep needs at least two grid points")
    W = np.array([index(w, P, eps, beta, B, n) for w in g])
    return Sweep(g, W, monitor_index_monotonicity(list(zip(g, W)), tol=tol))


def sweep_csv(sweep: Sweep, fields: dict) -> str:
    buf = io.StringIO()
    buf.write(_header(fields))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["w", "W"])
    for x, v in zip(sweep.grid, sweep.values):
        w.writerow([_fmt(x), _fmt(v)])
    buf.write(f"# monotone_nondecreasing: {'yes' if sweep.monotone else 'no'}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# condition report


@dataclass(frozen=True)
class ArmCertificate:
    arm: int
    P: TransitionMatrix
    beta_bound: float            # min(structure bound, 0.5)
    structure_bound: float       # threshold-structure bound alone
    threshold_ok: bool           # beta <= structure_bound
    indexability_ok: bool        # beta <= 0.5
    min_margin: float            # smallest passive-time ordering margin over the threshold grid
    margin_ok: bool
    online_monotone: bool        # index nondecreasing over the grid


@dataclass(frozen=True)
class Certificate:
    eps: float
    beta: float
    arms: tuple[ArmCertificate, ...]

    @property
    def threshold(self) -> bool:
        return all(a.threshold_ok for a in self.arms)

    @property
    def indexability(self) -> bool:
        return all(a.indexability_ok for a in self.arms)

    @property
    def numeric_indexability(self) -> bool:
        return all(a.margin_ok for a in self.arms)


def certify(arms, eps: float, beta: float, n: int = DEFAULT_ITERS, grid=0.01) -> Certificate:
    """Check the sufficient conditions per arm; the overall verdict is the conjunction over arms."""
    g = grid_points(grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    out = []
    for i, arm in enumerate(arms):
        P = arm.P if isinstance(arm, ArmModel) else arm
        sb = threshold_structure_beta_bound(P, eps)
        margins = np.array([indexability_margin(t, P, eps, beta, n) for t in g])
        W = [index(w, P, eps, beta, 1.0, n) for w in g]
        out.append(ArmCertificate(
            i, P, threshold_beta_bound(P, eps), sb, beta <= sb, beta <= 0.5,
            float(margins.min()), bool(np.all(margins > 0)),
            monitor_index_monotonicity(list(zip(g, W)), tol=1e-9),
        ))
    return Certificate(eps, beta, tuple(out))


def certificate_csv(cert: Certificate, fields: dict) -> str:
    yn = lambda b: "yes" if b else "no"
    buf = io.StringIO()
    buf.write(_header(fields))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["arm", "p01", "p11", "beta_bound", "structure_bound", "threshold_condition",
                "indexability_condition", "min_indexability_margin", "margin_positive",
                "online_monotone"])
    for a in cert.arms:
        w.writerow([a.arm, _fmt(a.P.p01), _fmt(a.P.p11), _fmt(a.beta_bound), _fmt(a.structure_bound),
                    yn(a.threshold_ok), yn(a.indexability_ok), _fmt(a.min_margin),
                    yn(a.margin_ok), yn(a.online_monotone)])
    buf.write(f"# threshold: {yn(cert.threshold)}\n")
    buf.write(f"# indexability: {yn(cert.indexability)}\n")
    buf.write(f"# numeric_indexability_margin: {yn(cert.numeric_indexability)}\n")
    buf.write("# verdicts are the conjunction over arms\n")
    return buf.getvalue()
