"""Declarative experiment runner behind the command-line interface.

A run is described by an INI file. Sections::

    [experiment]   kind, out, seeds
    [constraint]   kind = ball | smoothed_lp; radius, center, p, epsilon, lambda
    [target]       kind = trunc_gaussian | bayes_linear | bayes_logistic; ...
    [sampler]      eta, steps, thin, seed, chains, fallback, x0
    [field.LABEL]  kind = zero | constant_a | cross_s | block_cross | sublevel_curl
    [diagnostics]  checkpoint_every, reference_size, n_batches, burn_in, ...

Each ``[field.LABEL]`` section defines one method; ``LABEL`` is the method
name written to the metrics files. Every run directory receives metrics
CSVs, terminal samples, an assumption report, a copy of the config and a
``manifest.ini`` with content hashes.
"""

from __future__ import annotations

import configparser
import datetime as _dt
import logging
import re
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import pandas as pd

from . import data_io, diagnostics, fields, geometry, oracle, targets
from .samplers import GAUSSIAN_METHOD, SamplerConfig, run_ensemble

log = logging.getLogger(__name__)

KINDS = ("validate", "toy", "linear", "logistic", "variance", "scgf")
INIT_STREAM = 0x5EED
MANIFEST = "manifest.ini"
CONFIG_COPY = "config.cfg"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Typed access to config sections
# ---------------------------------------------------------------------------

class _Section:
    """Read typed values from one section, naming ``section.key`` in errors."""

    def __init__(self, name, mapping):
        self.name = name
        self.map = dict(mapping) if mapping is not None else {}
        self.present = mapping is not None

    def _raw(self, key, default):
        if key in self.map:
            return self.map[key].strip()
        if default is _REQUIRED:
            raise ConfigError(f"missing required key {self.name}.{key}")
        return default

    def _convert(self, key, fn, default, what):
        raw = self._raw(key, default)
        if raw is default and not isinstance(raw, str):
            return raw
        try:
            return fn(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.name}.{key}: cannot read {raw!r} as {what}") from exc

    def str(self, key, default=None):
        return self._raw(key, default)

    def float(self, key, default=None):
        return self._convert(key, float, default, "a number")

    def int(self, key, default=None):
        return self._convert(key, lambda v: int(float(v)) if float(v).is_integer() else int(v),
                             default, "an integer")

    def floats(self, key, default=None):
        return self._convert(key, _parse_floats, default, "a list of numbers")

    def choice(self, key, options, default=None):
        v = self.str(key, default)
        if v is not None and v not in options:
            raise ConfigError(f"{self.name}.{key}: expected one of {', '.join(options)}, got {v!r}")
        return v


_REQUIRED = object()


def _parse_floats(text):
    vals = [float(t) for t in re.split(r"[,\s]+", text.strip().strip("[]()")) if t]
    if not vals:
        raise ValueError("empty list")
    return np.array(vals)


def parse_seeds(text):
    """``"0,1,2"``, ``"0-9"`` or a mix such as ``"0-4, 10"``."""
    seeds = []
    for part in re.split(r"[,\s]+", str(text).strip()):
        if not part:
            continue
        m = re.fullmatch(r"(\d+)-(\d+)", part)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if hi < lo:
                raise ConfigError(f"bad seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            try:
                seeds.append(int(part))
            except ValueError:
                raise ConfigError(f"bad seed {part!r}") from None
    if not seeds:
        raise ConfigError("seed list is empty")
    return seeds


@dataclass
class RunConfig:
    kind: str
    out: Path
    seeds: list
    sections: dict
    field_labels: list
    source: Path | None = None
    text: str = ""
    threads: int = 1

    def section(self, name) -> _Section:
        return _Section(name, self.sections.get(name))

    @property
    def sampler(self):
        return self.section("sampler")

    @property
    def diag(self):
        return self.section("diagnostics")


def load_config(path, overrides=None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), source=path, overrides=overrides)


def parse_config(text, source=None, overrides=None) -> RunConfig:
    """Parse INI text; ``overrides`` may set kind, out, seeds, chains, threads."""
    overrides = overrides or {}
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(source or "<config>"))
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    sections = {s: dict(cp[s]) for s in cp.sections()}
    exp = _Section("experiment", sections.get("experiment", {}))
    kind = overrides.get("kind") or exp.str("kind")
    if kind is None:
        raise ConfigError("missing required key experiment.kind")
    if kind not in KINDS:
        raise ConfigError(f"experiment.kind: unknown kind {kind!r}")
    out = overrides.get("out") or exp.str("out", None)
    if out is None:
        raise ConfigError("missing required key experiment.out (or pass --out)")
    if overrides.get("seeds"):
        seeds = parse_seeds(overrides["seeds"])
    elif "seeds" in exp.map:
        seeds = parse_seeds(exp.map["seeds"])
    else:
        seeds = [_Section("sampler", sections.get("sampler", {})).int("seed", 0)]
    if overrides.get("chains") is not None:
        sections.setdefault("sampler", {})["chains"] = str(int(overrides["chains"]))
    labels = [s.split(".", 1)[1] for s in cp.sections() if s.startswith("field.")]
    if not labels and "field" in sections:
        labels = ["default"]
        sections["field.default"] = sections.pop("field")
    if not labels:
        raise ConfigError("no [field.LABEL] section defines a method")
    return RunConfig(kind, Path(out), seeds, sections, labels, source, text,
                     int(overrides.get("threads") or 1))


# ---------------------------------------------------------------------------
# Object construction
# ---------------------------------------------------------------------------

def build_constraint(cfg: RunConfig, dim: int):
    c = cfg.section("constraint")
    kind = c.choice("kind", ("ball", "smoothed_lp"), _REQUIRED)
    try:
        if kind == "ball":
            center = c.floats("center", None)
            center = np.zeros(dim) if center is None else center
            if center.size != dim:
                raise ConfigError(f"constraint.center must have {dim} entries")
            return geometry.Ball(center, c.float("radius", 1.0))
        return geometry.smoothed_lp_ball(c.float("p", _REQUIRED), c.float("epsilon", _REQUIRED),
                                         c.float("lambda", _REQUIRED), dim)
    except (geometry.GeometryError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"constraint: {exc}") from exc


def build_field(cfg: RunConfig, label: str, dim: int, constraint):
    f = cfg.section(f"field.{label}")
    kind = f.choice("kind", ("zero", "constant_a", "cross_s", "block_cross", "sublevel_curl"),
                    _REQUIRED)
    name = f"field.{label}"
    try:
        if kind == "zero":
            return fields.ZeroField(dim)
        if kind == "constant_a":
            return fields.ConstantTridiag(f.float("a", _REQUIRED), dim)
        if kind in ("cross_s", "block_cross"):
            s = f.floats("s", _REQUIRED)
            if dim == 3 and s.size == 1:
                return fields.Cross3D(float(s[0]))
            if s.size == 1:
                s = np.repeat(s, dim // 3)
            return fields.BlockCross(s, dim)
        # sublevel_curl: g defaults to the constraint's own level function
        base = constraint if isinstance(constraint, geometry.Sublevel) else None
        p = f.float("p", getattr(getattr(base, "g", None), "p", None))
        eps = f.float("epsilon", getattr(getattr(base, "g", None), "epsilon", None))
        lam = f.float("lambda", getattr(base, "level", None))
        if p is None or eps is None or lam is None:
            raise ConfigError(f"{name}: p, epsilon and lambda are required off a smoothed_lp set")
        h = f.choice("h", ("one", "one_plus_normsq"), "one")
        return fields.SublevelCurl(geometry.SmoothedLp(p, eps, dim), lam, f.floats("s", "1"), h)
    except ConfigError:
        raise
    except (ValueError, geometry.GeometryError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def build_fields(cfg, dim, constraint):
    return {lab: build_field(cfg, lab, dim, constraint) for lab in cfg.field_labels}


def sampler_config(cfg: RunConfig, fld, batch_size=None, thin=None) -> SamplerConfig:
    s = cfg.sampler
    try:
        return SamplerConfig(
            eta=s.float("eta", _REQUIRED),
            n_steps=s.int("steps", _REQUIRED),
            field=fld,
            batch_size=batch_size,
            fallback=s.choice("fallback", ("error", "euclidean"), "euclidean"),
            thin=s.int("thin", 1) if thin is None else thin,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"sampler: {exc}") from exc


def initial_points(cfg: RunConfig, constraint, n_chains, seed):
    """Starting batch from ``sampler.x0``: a point, ``center`` or ``uniform``.

    ``uniform`` draws each chain uniformly from the centered unit ball and
    projects it onto the constraint set if it falls outside.
    """
    dim = constraint.dim
    spec = cfg.sampler.str("x0", "center")
    if spec == "center":
        return np.broadcast_to(constraint.anchor, (n_chains, dim)).copy()
    if spec == "uniform":
        rng = np.random.default_rng([seed, INIT_STREAM])
        X = geometry.Ball.unit(dim).sample_uniform(n_chains, rng)
        return np.atleast_2d(geometry.project_euclidean(constraint, X))
    x0 = cfg.sampler.floats("x0")
    if x0.size != dim:
        raise ConfigError(f"sampler.x0 must have {dim} entries")
    if not geometry.contains(constraint, x0):
        raise ConfigError("sampler.x0 lies outside the constraint set")
    return np.broadcast_to(x0, (n_chains, dim)).copy()


def _target_dim(cfg: RunConfig):
    t = cfg.section("target")
    kind = t.str("kind")
    if kind == "trunc_gaussian":
        return t.floats("sigma_diag", _REQUIRED).size
    if kind == "bayes_linear":
        return targets.LINEAR_TRUTH.size
    if kind == "bayes_logistic":
        ds = t.str("dataset", "synthetic")
        if ds == "synthetic":
            return t.floats("beta_true", "1,-1,1").size
        return 9
    return cfg.section("constraint").int("dim", 3)


def _gaussian_target(cfg):
    t = cfg.section("target")
    t.choice("kind", ("trunc_gaussian",), _REQUIRED)
    try:
        return targets.QuadraticGaussian.from_cov_diag(t.floats("sigma_diag", _REQUIRED))
    except targets.DataError as exc:
        raise ConfigError(f"target.sigma_diag: {exc}") from exc


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _write_points(path, X):
    X = np.asarray(X)
    cols = [f"dim_{k}" for k in range(X.shape[1])]
    pd.DataFrame(X, columns=cols).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def read_points(path):
    return pd.read_csv(path).to_numpy(dtype=float)


def _write_assumptions(path, reports):
    rows = []
    for lab, rep in reports.items():
        row = {"method": lab}
        row.update(rep.as_dict())
        row["pass"] = rep.passes()
        rows.append(row)
    pd.DataFrame(rows).to_csv(path, index=False, float_format="%.6e", lineterminator="\n")


def _assumption_reports(cfg, flds, constraint):
    d = cfg.diag
    kw = dict(n_boundary=d.int("n_boundary", 1000), n_interior=d.int("n_interior", 200),
              fd_step=d.float("fd_step", 1e-5), rng_seed=d.int("validate_seed", 0))
    return {lab: fields.validate_assumptions(f, constraint, **kw) for lab, f in flds.items()}


def _map_jobs(fn, jobs, threads):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda j: fn(*j), jobs))


@dataclass
class RunResult:
    out: Path
    files: list = dc_field(default_factory=list)
    headline: dict = dc_field(default_factory=dict)
    inputs: dict = dc_field(default_factory=dict)
    ok: bool = True
    message: str = ""


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _run_validate(cfg: RunConfig, res: RunResult):
    dim = cfg.section("constraint").int("dim", None) or _target_dim(cfg)
    constraint = build_constraint(cfg, dim)
    flds = build_fields(cfg, dim, constraint)
    reports = _assumption_reports(cfg, flds, constraint)
    _write_assumptions(res.out / "assumptions.csv", reports)
    res.files.append("assumptions.csv")
    for lab, rep in reports.items():
        for k, v in rep.as_dict().items():
            res.headline[f"{lab}.{k}"] = v
        res.headline[f"{lab}.pass"] = rep.passes()
    failed = [lab for lab, rep in reports.items() if not rep.passes()]
    if failed:
        res.ok = False
        res.message = "assumption check failed for: " + ", ".join(failed)


def _run_toy(cfg: RunConfig, res: RunResult):
    pot = _gaussian_target(cfg)
    constraint = build_constraint(cfg, pot.dim)
    flds = build_fields(cfg, pot.dim, constraint)
    n_chains = cfg.sampler.int("chains", 5000)
    every = cfg.diag.int("checkpoint_every", 10)
    ref_n = cfg.diag.int("reference_size", n_chains)
    ref = oracle.rejection_sample(constraint, oracle.GaussianProposal.from_potential(pot),
                                  ref_n, cfg.diag.int("reference_seed", 20240101))
    _write_points(res.out / "reference.csv", ref.points)
    res.files.append("reference.csv")
    res.headline["reference.acceptance_rate"] = ref.acceptance_rate

    def job(label, seed):
        scfg = sampler_config(cfg, flds[label], thin=every)
        X0 = initial_points(cfg, constraint, n_chains, seed)
        ens = run_ensemble(X0, scfg, constraint, pot, n_chains, seed, record=True)
        return label, seed, ens

    jobs = [(lab, s) for lab in cfg.field_labels for s in cfg.seeds]
    all_series = []
    per_label = {lab: [] for lab in cfg.field_labels}
    for label, seed, ens in _map_jobs(job, jobs, cfg.threads):
        ser = diagnostics.w1_series(ens, ref.points, label, seed)
        per_label[label].extend(ser)
        all_series.extend(ser)
        res.headline[f"{label}.fallbacks.seed{seed}"] = int(ens.fallback_counts.sum())
        if seed == cfg.seeds[0]:
            _write_points(res.out / f"samples_{label}.csv", ens.terminal)
            res.files.append(f"samples_{label}.csv")
    for label, ser in per_label.items():
        diagnostics.write_metrics_csv(ser, res.out / f"metrics_{label}.csv")
        res.files.append(f"metrics_{label}.csv")
    _write_summary(res, all_series)


def _write_summary(res, series):
    summary = diagnostics.compare_methods(series)
    summary.to_csv(res.out / "summary.csv", index=False, float_format="%.10g", lineterminator="\n")
    res.files.append("summary.csv")
    last = summary[summary["checkpoint"] == summary.groupby(["method", "metric", "dim"])
                   ["checkpoint"].transform("max")]
    for row in last.itertuples(index=False):
        key = f"{row.method}.{row.metric}" + (f".dim{row.dim}" if row.dim != "" else "")
        res.headline[f"final.{key}"] = row.mean


def _run_linear(cfg: RunConfig, res: RunResult):
    t = cfg.section("target")
    t.choice("kind", ("bayes_linear",), _REQUIRED)
    n = t.int("n", 100000)
    pot, truth = targets.make_synthetic_linear(n, t.int("data_seed", 0),
                                               noise=t.str("noise", "true").lower() != "false")
    m = t.int("batch_size", 50)
    constraint = build_constraint(cfg, pot.dim)
    flds = build_fields(cfg, pot.dim, constraint)
    n_chains = cfg.sampler.int("chains", 100)
    every = cfg.diag.int("checkpoint_every", 10)
    mse_star = float(diagnostics.mse(truth, pot))
    res.headline["mse_at_truth"] = mse_star

    def job(label, seed):
        scfg = sampler_config(cfg, flds[label], batch_size=m, thin=every)
        X0 = initial_points(cfg, constraint, n_chains, seed)
        return label, seed, run_ensemble(X0, scfg, constraint, pot, n_chains, seed)

    jobs = [(lab, s) for lab in cfg.field_labels for s in cfg.seeds]
    per_label = {lab: [] for lab in cfg.field_labels}
    for label, seed, ens in _map_jobs(job, jobs, cfg.threads):
        vals = [float(np.mean(diagnostics.mse(ens.points[:, j], pot))) for j in range(ens.steps.size)]
        per_label[label].append(diagnostics.MetricSeries(label, "mse", ens.steps, vals, seed))
        if seed == cfg.seeds[0]:
            _write_points(res.out / f"samples_{label}.csv", ens.terminal)
            res.files.append(f"samples_{label}.csv")
    for label, ser in per_label.items():
        diagnostics.write_metrics_csv(ser, res.out / f"metrics_{label}.csv")
        res.files.append(f"metrics_{label}.csv")
    _write_summary(res, [s for ser in per_label.values() for s in ser])


def load_logistic_data(cfg: RunConfig, res: RunResult | None = None):
    """Train and test sets for a logistic run (synthetic, MAGIC or Titanic)."""
    t = cfg.section("target")
    t.choice("kind", ("bayes_logistic",), _REQUIRED)
    ds = t.choice("dataset", ("synthetic", "magic", "titanic"), "synthetic")
    spec = data_io.SplitSpec(t.float("test_fraction", 0.2), t.int("split_seed", 0))
    stats = t.choice("standardize_stats", ("full", "train"), "full")
    if ds == "synthetic":
        pot = targets.make_synthetic_logistic(t.int("n", 2000), t.floats("beta_true", "1,-1,1"),
                                              t.int("data_seed", 0))
        return data_io.split(data_io.synthetic_dataset(pot), spec)
    path = t.str("path", _REQUIRED)
    if not Path(path).is_absolute() and cfg.source is not None:
        cand = Path(cfg.source).parent / path
        path = cand if cand.exists() else Path(path)
    path = Path(path)
    if res is not None and path.is_file():
        res.inputs[str(path)] = data_io.sha256_file(path)
    raw = (data_io.load_magic(path, standardized=False) if ds == "magic"
           else data_io.load_titanic(path, standardized=False))
    return data_io.split_standardized(raw, spec, stats)


def _run_logistic(cfg: RunConfig, res: RunResult):
    train, test = load_logistic_data(cfg, res)
    res.headline["n_train"] = train.n
    res.headline["n_test"] = test.n
    pot = train.potential()
    m = cfg.section("target").int("batch_size", 50)
    m = min(m, train.n)
    constraint = build_constraint(cfg, pot.dim)
    flds = build_fields(cfg, pot.dim, constraint)
    n_chains = cfg.sampler.int("chains", 100)
    every = cfg.diag.int("checkpoint_every", 25)

    def job(label, seed):
        scfg = sampler_config(cfg, flds[label], batch_size=m, thin=every)
        X0 = initial_points(cfg, constraint, n_chains, seed)
        return label, seed, run_ensemble(X0, scfg, constraint, pot, n_chains, seed)

    jobs = [(lab, s) for lab in cfg.field_labels for s in cfg.seeds]
    per_label = {lab: [] for lab in cfg.field_labels}
    for label, seed, ens in _map_jobs(job, jobs, cfg.threads):
        for name, part in (("train_accuracy", train), ("test_accuracy", test)):
            vals = [float(np.mean(diagnostics.accuracy(ens.points[:, j], part)))
                    for j in range(ens.steps.size)]
            per_label[label].append(diagnostics.MetricSeries(label, name, ens.steps, vals, seed))
        if seed == cfg.seeds[0]:
            _write_points(res.out / f"samples_{label}.csv", ens.terminal)
            res.files.append(f"samples_{label}.csv")
    for label, ser in per_label.items():
        diagnostics.write_metrics_csv(ser, res.out / f"metrics_{label}.csv")
        res.files.append(f"metrics_{label}.csv")
    _write_summary(res, [s for ser in per_label.values() for s in ser])


def long_run_observable(x0, scfg, constraint, pot, seed, coord=0):
    """Record ``x[coord]`` along one chain of ``scfg.n_steps`` steps (start excluded)."""
    trace = np.empty(scfg.n_steps)

    def observe(k, X):
        if k > 0:
            trace[k - 1] = X[0, coord]

    run_ensemble(x0, scfg, constraint, pot, 1, seed, record=False, observer=observe)
    return trace


def _run_variance(cfg: RunConfig, res: RunResult):
    pot = _gaussian_target(cfg)
    constraint = build_constraint(cfg, pot.dim)
    flds = build_fields(cfg, pot.dim, constraint)
    coord = cfg.diag.int("coordinate", 0)
    burn = cfg.diag.float("burn_in", 0.2)
    nb = cfg.diag.int("n_batches", None)

    def job(label, seed):
        scfg = sampler_config(cfg, flds[label], thin=1)
        x0 = initial_points(cfg, constraint, 1, seed)[0]
        trace = diagnostics.discard_burn_in(long_run_observable(x0, scfg, constraint, pot, seed, coord), burn)
        return label, seed, trace

    rows = []
    n_steps = cfg.sampler.int("steps", _REQUIRED)
    for label, seed, trace in _map_jobs(job, [(lab, s) for lab in cfg.field_labels for s in cfg.seeds],
                                        cfg.threads):
        est = diagnostics.asymptotic_variance_batch_means(trace, nb)
        for metric, v in (("mean", trace.mean()), ("sigma2", est.sigma2_hat),
                          ("sigma2_stderr", est.standard_error), ("n_batches", est.n_batches),
                          ("batch_len", est.batch_len)):
            rows.append(diagnostics.MetricSeries(label, metric, [n_steps], [v], seed))
        res.headline[f"{label}.sigma2.seed{seed}"] = est.sigma2_hat
        res.headline[f"{label}.sigma2_stderr.seed{seed}"] = est.standard_error
    diagnostics.write_metrics_csv(rows, res.out / "metrics.csv")
    res.files.append("metrics.csv")


_NUM = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_TERM = re.compile(rf"\s*([+-])?\s*(?:({_NUM})\s*\*?\s*)?(?:x(\d+))?\s*")


def parse_observable(text, dim):
    """Affine observable such as ``x0``, ``-1``, ``0.5*x0 + 0.5*x1`` or ``zero``."""
    src = text.strip()
    if src == "zero":
        src = "0"
    w = np.zeros(dim)
    c = 0.0
    pos = 0
    while pos < len(src) or pos == 0:
        m = _TERM.match(src, pos)
        sign, num, idx = m.groups()
        if m.end() == pos or (num is None and idx is None) or (sign is None and pos > 0):
            raise ConfigError(f"diagnostics.observables: cannot parse {text!r}")
        coef = (-1.0 if sign == "-" else 1.0) * (float(num) if num else 1.0)
        if idx is None:
            c += coef
        else:
            i = int(idx)
            if i >= dim:
                raise ConfigError(f"diagnostics.observables: x{i} exceeds dimension {dim}")
            w[i] += coef
        pos = m.end()
    if not w.any():
        return lambda X, c=c: c
    return lambda X, w=w, c=c: X @ w + c


def _run_scgf(cfg: RunConfig, res: RunResult):
    pot = _gaussian_target(cfg)
    constraint = build_constraint(cfg, pot.dim)
    flds = build_fields(cfg, pot.dim, constraint)
    names = [s.strip() for s in cfg.diag.str("observables", "zero; x0").split(";") if s.strip()]
    obs = [parse_observable(s, pot.dim) for s in names]
    t_h = cfg.diag.float("t_horizon", 50.0)
    eta = cfg.sampler.float("eta", _REQUIRED)
    n_chains = cfg.sampler.int("chains", 10000)
    rows = []
    for label in cfg.field_labels:
        for seed in cfg.seeds:
            x0 = initial_points(cfg, constraint, 1, seed)[0]
            ests = diagnostics.scgf_estimate(constraint, pot, flds[label], obs, t_h, eta, n_chains, seed,
                                             x0=x0, fallback=cfg.sampler.str("fallback", "euclidean"))
            for name, est in zip(names, ests):
                rows.append(diagnostics.MetricSeries(label, f"scgf[{name}]", [est.n_steps], [est.lambda_hat], seed))
                rows.append(diagnostics.MetricSeries(label, f"scgf_stderr[{name}]", [est.n_steps], [est.stderr], seed))
                res.headline[f"{label}.scgf[{name}].seed{seed}"] = est.lambda_hat
    diagnostics.write_metrics_csv(rows, res.out / "metrics.csv")
    res.files.append("metrics.csv")


_RUNNERS = {"validate": _run_validate, "toy": _run_toy, "linear": _run_linear,
            "logistic": _run_logistic, "variance": _run_variance, "scgf": _run_scgf}


def run_experiment(cfg: RunConfig) -> RunResult:
    """Execute ``cfg`` and write its artifacts and manifest into ``cfg.out``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    res = RunResult(out)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    _RUNNERS[cfg.kind](cfg, res)
    if cfg.kind != "validate":
        dim = _target_dim(cfg)
        constraint = build_constraint(cfg, dim)
        reports = _assumption_reports(cfg, build_fields(cfg, dim, constraint), constraint)
        _write_assumptions(out / "assumptions.csv", reports)
        res.files.append("assumptions.csv")
    (out / CONFIG_COPY).write_text(cfg.text)
    res.files.append(CONFIG_COPY)
    _write_run_manifest(cfg, res, started)
    return res


def _write_run_manifest(cfg, res, started):
    from . import __version__

    sections = {
        "run": {"kind": cfg.kind, "config": str(cfg.source or ""), "started": started,
                "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                "version": __version__, "gaussian": GAUSSIAN_METHOD, "status": "ok" if res.ok else "failed"},
        "seeds": {"seeds": ",".join(str(s) for s in cfg.seeds), "threads": cfg.threads},
        "methods": {lab: cfg.sections[f"field.{lab}"].get("kind", "") for lab in cfg.field_labels},
        "inputs": res.inputs,
        "outputs": {f: data_io.sha256_file(res.out / f) for f in dict.fromkeys(res.files)},
        "headline": {k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                     for k, v in res.headline.items()},
    }
    data_io.write_manifest(res.out / MANIFEST, sections)


def print_manifest(run_dir, stream=None):
    """Print a run summary; return the names of outputs whose hash no longer matches."""
    stream = stream or sys.stdout
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"no run directory at {run_dir}")
    man = data_io.read_manifest(run_dir / MANIFEST)
    run = man.get("run", {})
    print(f"run       {run_dir}", file=stream)
    for k in ("kind", "config", "started", "finished", "status", "version", "gaussian"):
        if k in run:
            print(f"{k:<9} {run[k]}", file=stream)
    print(f"seeds     {man.get('seeds', {}).get('seeds', '')}", file=stream)
    meths = man.get("methods", {})
    if meths:
        print("methods   " + ", ".join(f"{k} ({v})" for k, v in meths.items()), file=stream)
    for path, digest in man.get("inputs", {}).items():
        print(f"input     {path}  sha256={digest[:16]}", file=stream)
    cfg_copy = run_dir / CONFIG_COPY
    if cfg_copy.is_file():
        print("config:", file=stream)
        for line in cfg_copy.read_text().splitlines():
            if line.strip() and not line.lstrip().startswith(("#", ";")):
                print(f"  {line}", file=stream)
    head = man.get("headline", {})
    if head:
        print("headline metrics:", file=stream)
        width = max(len(k) for k in head)
        for k, v in head.items():
            print(f"  {k:<{width}}  {v}", file=stream)
    bad = []
    for name, digest in man.get("outputs", {}).items():
        p = run_dir / name
        if not p.is_file():
            bad.append(name)
            print(f"WARNING: {name} listed in the manifest is missing", file=sys.stderr)
        elif data_io.sha256_file(p) != digest:
            bad.append(name)
            print(f"WARNING: {name} hash mismatch (modified after the run)", file=sys.stderr)
    return bad


def check_samples(constraint, paths, tol=geometry.TOL_PROJ):
    """Count rows of each samples CSV outside the constraint set."""
    level = getattr(constraint, "level", None)
    out = {}
    for p in paths:
        X = read_points(p)
        if isinstance(constraint, geometry.Sublevel):
            bad = constraint.g.value(X) > level + tol * max(1.0, abs(level))
        else:
            bad = ~np.asarray(constraint.contains(X))
        out[str(p)] = int(np.sum(bad))
    return out


def constraint_for_run(run_dir):
    """Rebuild the constraint of a finished run from its config copy."""
    cfg = load_config(Path(run_dir) / CONFIG_COPY, {"out": str(run_dir)})
    return build_constraint(cfg, _target_dim(cfg))


def copy_example_configs(dest):
    src = Path(__file__).with_name("configs")
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    for p in sorted(src.glob("*.cfg")):
        shutil.copy(p, dest / p.name)
    return dest
