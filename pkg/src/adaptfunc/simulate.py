"""Model generators, Monte Carlo experiments, and empirical rate fits."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AdaptFuncError, ConstructionError, ContractError, InputError
from .functionals import PipelineConfig, run_pipeline
from .lowerbound import build_priors, functional_value, sample_from_prior
from .ustat import Dataset
from .wavelets import CoefficientRep, _types, family_from_config, haar, holder_coeff_norm, project

CSV_COLUMNS = ("problem", "n", "rep", "seed", "estimate", "truth", "sq_error")


# ----------------------------------------------------------------------------
# quadrature and function generation
# ----------------------------------------------------------------------------


def quadrature_grid(d):
    """Midpoint rule: 2^16 points for d = 1, 2^10 per axis for d = 2."""
    if d == 1:
        m = 2**16
    elif d == 2:
        m = 2**10
    else:
        m = max(2, int(round(2 ** (20 / d))))
    t = (np.arange(m) + 0.5) / m
    if d == 1:
        return t[:, None], np.full(m, 1.0 / m)
    mesh = np.meshgrid(*([t] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    return pts, np.full(len(pts), 1.0 / m**d)


def integrate_unit(fn, d):
    pts, w = quadrature_grid(d)
    return math.fsum(np.asarray(fn(pts), dtype=float) * w)


class Constant:
    """Picklable constant function on the unit cube."""

    def __init__(self, value, d=1):
        self.value = float(value)
        self.d = d

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.full(len(x), self.value)

    def __repr__(self):
        return f"Constant({self.value})"


def sample_holder_function(beta, M, d, max_level, rng, family=None, offset=0.0, value_range=None,
                           density=False):
    """Random function with mother coefficients drawn within the Hölder envelope.

    Every mother coefficient at level ``l`` is uniform on
    ``[-M 2^(-l(beta + d/2)), M 2^(-l(beta + d/2))]``.  A constant
    ``offset`` (1 in density mode) is added through the father block.  When
    ``value_range`` is given, the random part is shrunk (never enlarged) so
    that the function stays inside the range on the quadrature grid.  The
    coefficient norm of the result is at most ``M`` plus that of the offset.
    """
    family = family or haar()
    if not beta < family.regularity:
        raise ContractError(f"beta={beta} must be below the family regularity {family.regularity}")
    if M < 0:
        raise ContractError("M must be nonnegative")
    base = family.base_level
    if max_level < base:
        raise ContractError(f"max_level must be >= base level {base}")
    rng = np.random.default_rng(rng)
    if density:
        offset = 1.0
    const = project(family, base, Constant(offset, d), d)
    blocks = {(base, (0,) * d): const.blocks[(base, (0,) * d)].copy()}
    for l in range(base, max_level):
        env = M * 2.0 ** (-l * (beta + d / 2.0))
        for v in _types(d, l, -1):
            blocks[(l, v)] = rng.uniform(-env, env, size=(2**l,) * d)
    rep = CoefficientRep(family, d, max_level, blocks)
    if value_range is not None:
        lo, hi = value_range
        if not lo < offset < hi:
            raise ConstructionError(f"offset {offset} is not inside the requested range {value_range}")
        pts, _ = quadrature_grid(d)
        r = rep(pts) - offset
        t = 1.0
        if r.max() > 0:
            t = min(t, (hi - offset) / r.max())
        if r.min() < 0:
            t = min(t, (offset - lo) / -r.min())
        t *= 1.0 - 1e-9
        for key in blocks:
            if any(key[1]):
                blocks[key] = blocks[key] * t
    off_norm = holder_coeff_norm(CoefficientRep(family, d, base, {(base, (0,) * d): blocks[(base, (0,) * d)]}),
                                 beta)
    norm = holder_coeff_norm(rep, beta)
    if norm > M + off_norm + 1e-12:
        raise ConstructionError(f"sampled norm {norm} exceeds the envelope {M} + offset {off_norm}")
    if density:
        total = integrate_unit(rep, d)
        if abs(total - 1.0) > 1e-8:
            raise ConstructionError(f"density integrates to {total}, not 1")
    rep.bounds = value_range
    return rep


def make_function(spec, d, rng_seed=None):
    """Build a function from a JSON-style description."""
    if isinstance(spec, (int, float)):
        return Constant(spec, d), None
    kind = spec.get("kind", "constant")
    if kind == "constant":
        return Constant(spec["value"], d), None
    if kind in ("holder", "holder-density"):
        fam = family_from_config(spec.get("family", "haar"))
        seed = spec.get("seed", rng_seed)
        rep = sample_holder_function(
            spec["beta"], spec["M"], d, spec.get("max_level", 10 if d == 1 else 6),
            np.random.default_rng(seed), fam, spec.get("offset", 0.0),
            tuple(spec["range"]) if "range" in spec else None, density=(kind == "holder-density"),
        )
        return rep, (spec["beta"], spec["M"])
    raise ContractError(f"unknown function kind {kind!r}")


# ----------------------------------------------------------------------------
# model specification
# ----------------------------------------------------------------------------


@dataclass
class ModelSpec:
    """A data-generating mechanism.

    ``functions`` holds ``g`` (design density), ``a`` (propensity E(A|X)),
    ``b`` (outcome regression) and ``c`` (effect function, treatment).
    ``outcome`` is "binary", "uniform" (mean plus U(-noise, noise)) or
    "rademacher" (mean plus +-noise).  ``prior`` replaces all of this with a
    lower-bound prior arm.
    """

    problem: str
    d: int = 1
    functions: dict = field(default_factory=dict)
    classes: dict = field(default_factory=dict)
    outcome: str = "binary"
    noise: float = 0.0
    M: float = 2.0
    B_L: float = 0.25
    B_U: float = 2.0
    prior: object = None
    echo: dict = field(default_factory=dict)

    def fn(self, name):
        default = {"g": 1.0, "a": 0.5, "b": 0.5, "c": 0.0}[name]
        return self.functions.get(name) or Constant(default, self.d)

    def certify(self):
        for name, (beta, M) in self.classes.items():
            h = self.functions[name]
            norm = holder_coeff_norm(h, beta)
            off = holder_coeff_norm(CoefficientRep(h.family, h.d, h.family.base_level,
                                                   {k: v for k, v in h.blocks.items() if not any(k[1])}), beta)
            if norm > M + off + 1e-12:
                raise ConstructionError(f"{name}: coefficient norm {norm} exceeds declared M {M} (+ offset {off})")
        if self.prior is None and "g" in self.functions:
            total = integrate_unit(self.fn("g"), self.d)
            if abs(total - 1.0) > 1e-8:
                raise ConstructionError(f"design density integrates to {total}")
        return self


def model_from_dict(cfg):
    cfg = dict(cfg)
    problem = cfg.get("problem")
    d = int(cfg.get("d", 1))
    echo = json.loads(json.dumps(cfg))
    if "prior" in cfg:
        pr = dict(cfg["prior"])
        arm = int(pr.get("arm", 0))
        arms = build_priors(pr.get("problem", problem if problem != "tau" else "treatment"),
                            pr["alpha"], pr["beta"], d, pr["k"], pr.get("M"), pr.get("bump", "step"),
                            pr.get("prime"), arms=(arm,))
        return ModelSpec(problem, d, prior=arms[arm], echo=echo)
    funcs, classes = {}, {}
    base_seed = cfg.get("function_seed", 0)
    for i, (name, spec) in enumerate(sorted(cfg.get("functions", {}).items())):
        if name not in ("g", "a", "b", "c"):
            raise ContractError(f"unknown model function {name!r}")
        fn, cls = make_function(spec, d, rng_seed=[base_seed, i])
        funcs[name] = fn
        if cls is not None:
            classes[name] = cls
    spec = ModelSpec(problem, d, funcs, classes, cfg.get("outcome", "binary"), float(cfg.get("noise", 0.0)),
                     float(cfg.get("M", 2.0)), float(cfg.get("B_L", 0.25)), float(cfg.get("B_U", 2.0)),
                     echo=echo)
    return spec.certify()


def truth(spec):
    """Target functional of the model, by quadrature on the fixed grid."""
    if spec.prior is not None:
        return prior_truth(spec.prior, spec.problem)
    d = spec.d
    pts, w = quadrature_grid(d)
    g = spec.fn("g")(pts)
    a = spec.fn("a")(pts)
    b = spec.fn("b")(pts)
    c = spec.fn("c")(pts)
    if spec.problem == "treatment":
        return math.fsum(c * a * (1 - a) * g * w)
    if spec.problem == "tau":
        return math.fsum(c * a * (1 - a) * g * w) / math.fsum(a * (1 - a) * g * w)
    if spec.problem == "missing":
        return math.fsum(b * g * w)
    if spec.problem == "quadratic":
        return math.fsum(b * b * g * w)
    if spec.problem == "variance":
        return _noise_variance(spec)
    raise ContractError(f"unknown problem {spec.problem!r}")


def prior_truth(prior, problem=None, lam=None):
    """Pipeline target under one sign pattern of a prior arm, by quadrature.

    The targets do not depend on the sign pattern.
    """
    problem = problem or prior.problem
    pts, w = quadrature_grid(prior.d)
    lam = np.ones(prior.k) if lam is None else lam
    f = prior.fields(prior.signed_sum(pts, lam))
    if prior.problem == "treatment":
        cov = f["c"] * f["a"] * (1 - f["a"])
        if problem == "tau":
            return math.fsum(cov * w) / math.fsum(f["a"] * (1 - f["a"]) * w)
        if problem == "ab":
            return math.fsum(f["a"] * f["b"] * w)
        return math.fsum(cov * w)
    if prior.problem == "missing":
        return math.fsum(f["b"] * f["a"] / 2.0 * w)
    return math.fsum(f["b"] ** 2 * w)


def _noise_variance(spec):
    if spec.outcome == "rademacher":
        return spec.noise**2
    if spec.outcome == "uniform":
        return spec.noise**2 / 3.0
    raise ContractError("variance problem needs a rademacher or uniform outcome law")


def _sample_x(spec, n, rng):
    d = spec.d
    g = spec.fn("g")
    if isinstance(g, Constant):
        return rng.random((n, d))
    pts, w = quadrature_grid(d)
    gv = np.asarray(g(pts), dtype=float)
    if d == 1:
        # inverse CDF of the piecewise-linear interpolated distribution function
        m = len(gv)
        cdf = np.concatenate([[0.0], np.cumsum(gv / m)])
        cdf /= cdf[-1]
        edges = np.arange(m + 1) / m
        return np.interp(rng.random(n), cdf, edges)[:, None]
    top = float(gv.max()) * 1.05
    out, need, tried, got = [], n, 0, 0
    while need > 0:
        cand = rng.random((max(2 * need, 256), d))
        acc = rng.random(len(cand)) * top < g(cand)
        tried += len(cand)
        got += int(acc.sum())
        if tried > 10000 and got / tried < 0.01:
            raise ContractError(f"rejection efficiency {got / tried:.4f} below 1%")
        keep = cand[acc][:need]
        out.append(keep)
        need -= len(keep)
    return np.concatenate(out)


def _outcome(spec, mean, rng, n):
    if spec.outcome == "binary":
        if np.any(mean < -1e-12) or np.any(mean > 1 + 1e-12):
            raise ContractError("binary outcome mean leaves [0, 1]")
        return (rng.random(n) < mean).astype(float)
    if spec.outcome == "uniform":
        return mean + rng.uniform(-spec.noise, spec.noise, n)
    if spec.outcome == "rademacher":
        return mean + spec.noise * rng.choice((-1.0, 1.0), n)
    raise ContractError(f"unknown outcome law {spec.outcome!r}")


def generate_dataset(spec, n, rng):
    """``n`` i.i.d. records from the model."""
    rng = np.random.default_rng(rng)
    if spec.prior is not None:
        return sample_from_prior(spec.prior, n, rng)
    x = _sample_x(spec, n, rng)
    b = spec.fn("b")(x)
    if spec.problem in ("treatment", "tau"):
        a = spec.fn("a")(x)
        A = (rng.random(n) < a).astype(float)
        Y = _outcome(spec, spec.fn("c")(x) * (A - a) + b, rng, n)
        return Dataset(x, Y, A)
    if spec.problem == "missing":
        a = spec.fn("a")(x)
        A = (rng.random(n) < a).astype(float)
        Y = _outcome(spec, b, rng, n)
        return Dataset(x, Y * A, A)
    if spec.problem in ("quadratic", "variance"):
        return Dataset(x, _outcome(spec, b, rng, n))
    raise ContractError(f"unknown problem {spec.problem!r}")


# ----------------------------------------------------------------------------
# experiments
# ----------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    model: ModelSpec
    pipeline: PipelineConfig
    n_grid: list
    reps: int
    seed: int = 0
    out: str | None = None
    echo: dict = field(default_factory=dict)

    def validate(self):
        ns = list(self.n_grid)
        if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ContractError("n_grid must be strictly increasing")
        if self.reps < 2:
            raise ContractError("need at least 2 replicates")
        return self


def experiment_from_dict(cfg):
    cfg = dict(cfg)
    model = model_from_dict(cfg["model"])
    pipe = dict(cfg.get("pipeline", {}))
    pipe.setdefault("problem", model.problem)
    pcfg = PipelineConfig.from_dict(pipe)
    ec = ExperimentConfig(model, pcfg, list(cfg["n_grid"]), int(cfg["reps"]), int(cfg.get("seed", 0)),
                          cfg.get("out"), echo={"model": model.echo, "pipeline": pcfg.to_dict(),
                                                "n_grid": list(cfg["n_grid"]), "reps": int(cfg["reps"]),
                                                "seed": int(cfg.get("seed", 0))})
    return ec.validate()


def replicate_rng(seed, n, rep):
    """Independent stream keyed by (seed, n, rep)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(n), int(rep)]))


def worker_count():
    raw = os.environ.get("ADAPTIVE_FUNC_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ContractError(f"ADAPTIVE_FUNC_THREADS must be an integer, got {raw!r}") from exc
    return max(1, min(cap, os.cpu_count() or 1))


@dataclass
class RunRow:
    problem: str
    n: int
    rep: int
    seed: int
    estimate: float
    truth: float
    sq_error: float
    l_hat: int | None = None
    resolution: int | None = None
    candidates: dict = field(default_factory=dict)
    error: str | None = None

    def csv_row(self):
        return [self.problem, self.n, self.rep, self.seed, repr(self.estimate), repr(self.truth),
                repr(self.sq_error)]


def _one(config, tv, n, rep):
    rng = replicate_rng(config.seed, n, rep)
    try:
        data = generate_dataset(config.model, 3 * n, rng)
        res = run_pipeline(data, config.pipeline)
        est = float(res.value)
        return RunRow(config.model.problem, n, rep, config.seed, est, tv, (est - tv) ** 2, res.l_hat,
                      res.resolution, dict(res.candidates))
    except AdaptFuncError as exc:
        return RunRow(config.model.problem, n, rep, config.seed, math.nan, tv, math.nan, error=str(exc))


def run_experiment(config):
    """Replicates over the n grid; ``n`` is the per-block size (``3n`` records).

    Failing replicates are kept with NaN estimates; more than 10% failures
    aborts the run.
    """
    config.validate()
    tv = truth(config.model)
    jobs = [(n, r) for n in config.n_grid for r in range(config.reps)]
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(lambda job: _one(config, tv, *job), jobs))
    else:
        rows = [_one(config, tv, n, r) for n, r in jobs]
    failed = sum(r.error is not None for r in rows)
    if failed > 0.1 * len(rows):
        first = next(r.error for r in rows if r.error)
        raise ContractError(f"{failed} of {len(rows)} replicates failed; first error: {first}")
    return rows


def rmse_by_n(rows):
    out = {}
    for n in sorted({r.n for r in rows}):
        errs = [r.sq_error for r in rows if r.n == n and not math.isnan(r.sq_error)]
        out[n] = math.sqrt(math.fsum(errs) / len(errs)) if errs else math.nan
    return out


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_se: float
    r2: float

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "slope_se": self.slope_se, "r2": self.r2}


def fit_rate(ns, rmse=None):
    """OLS of log RMSE on log(n / sqrt(log n)).

    Accepts either run rows (RMSE computed per n) or parallel sequences.
    """
    if rmse is None:
        table = rmse_by_n(ns)
        ns, rmse = list(table), list(table.values())
    ns = np.asarray(ns, dtype=float)
    rmse = np.asarray(rmse, dtype=float)
    if len(np.unique(ns)) < 3:
        raise ContractError("rate fit needs at least 3 distinct n values")
    if np.any(ns <= 1) or np.any(~(rmse > 0)):
        raise ContractError("rate fit needs n > 1 and positive RMSE")
    xr = np.log(ns / np.sqrt(np.log(ns)))
    yr = np.log(rmse)
    xm, ym = xr.mean(), yr.mean()
    sxx = float(np.sum((xr - xm) ** 2))
    if sxx <= 0:
        raise ContractError("degenerate regressor")
    slope = float(np.sum((xr - xm) * (yr - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = yr - intercept - slope * xr
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((yr - ym) ** 2))
    k = len(xr)
    se = math.sqrt(ss_res / (k - 2) / sxx) if k > 2 else math.nan
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(slope, intercept, se, r2)


def results_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.csv_row())
    return buf.getvalue()


def read_results_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(RunRow(rec["problem"], int(rec["n"]), int(rec["rep"]), int(rec["seed"]),
                               float(rec["estimate"]), float(rec["truth"]), float(rec["sq_error"])))
    return rows


def summary(rows, echo=None):
    table = rmse_by_n(rows)
    out = {"config": echo or {}, "rmse": {str(n): v for n, v in table.items()},
           "failures": sum(r.error is not None for r in rows)}
    finite = {n: v for n, v in table.items() if v > 0 and not math.isnan(v)}
    if len(finite) >= 3:
        out["rate_fit"] = fit_rate(list(finite), list(finite.values())).to_dict()
    return out


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def emit(rows, fmt, path, echo=None):
    """Write the CSV table or the JSON summary."""
    text = results_csv(rows) if fmt == "csv" else dumps(summary(rows, echo))
    if fmt not in ("csv", "json"):
        raise ContractError(f"unknown format {fmt!r}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from exc
