"""Seeded recovery experiments: phase transitions, bound checks, measurement sweeps.

Every trial draws its randomness from ``numpy.random.default_rng(seed + index)``
where ``index`` is the trial's position in a fixed enumeration of the grid, so
results do not depend on the number of worker processes.  Records are written
in grid order after all workers finish.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .errors import ConfigError, RefusedError, SolverBudgetError
from .io import FLOAT_FMT, parse_array, parse_set_spec, read_key_values, read_matrix_csv
from .nsp import (EXACT, check_plain_nsp, check_s_even, min_measurement_bound, robust_params,
                  stable_rho, strong_constant, theoretical_bound)
from .random_measure import EnsembleSpec, estimate_params, mendelson_check, sample_operator
from .solvers import MeasurementOperator, SolverOptions, solve_min_atomic

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentConfig",
    "TrialRecord",
    "PhaseGrid",
    "ExperimentResult",
    "load_config",
    "parse_grid",
    "run_phase_transition",
    "run_bound_verification",
    "run_min_measurement_study",
    "run_mendelson",
    "run_experiment",
    "emit",
    "violates",
]

SCHEMA_VERSION = 1
KINDS = ("phase", "verify", "min_measure", "mendelson")
SIGNALS = ("sparse", "compressible", "fixed")
BUDGET_FRACTION = 0.10
VIOLATION_SLACK = 1e-6


def parse_grid(text):
    """``"2:32"`` (inclusive), ``"2:32:2"`` or ``"1,2,5"`` to a list of ints."""
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            lo, hi = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            if step <= 0:
                raise ValueError("step must be positive")
            return list(range(lo, hi + 1, step))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from exc


@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment bit for bit.

    ``atoms`` is an atomic-set descriptor (``canonical:8``, ``rank1:3x3``,
    ``frame:ring8`` or ``frame:path.csv``).  The operator is drawn from
    ``ensemble`` unless ``null_space`` (rows spanning N(A)) or ``operator`` (a
    CSV path) is given.
    """

    kind: str = "phase"
    atoms: str = "canonical:8"
    ensemble: str = "gaussian"
    scale: float = 1.0
    m: list = field(default_factory=lambda: [4])
    s: list = field(default_factory=lambda: [1])
    trials: int = 10
    eps: float = 0.0
    seed: int = 0
    out: str | None = None
    workers: int = 1
    success_tol: float = 1e-4
    signal: str = "sparse"
    z0: str | None = None
    decay: float = 1.5
    null_space: str | None = None
    operator: str | None = None
    rho_target: float | None = None
    tau_samples: int = 10_000
    recoveries: int = 5
    certify: bool = True
    rho: float = 0.9
    xi: float | None = None
    t: float = 2.0
    width_samples: int = 2000
    max_iter: int = 20000
    base_dir: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.signal not in SIGNALS:
            raise ConfigError(f"unknown signal model {self.signal!r}")
        if not self.m or not self.s:
            raise ConfigError("the m and s grids must be nonempty")
        if any(v < 0 for v in self.m) or any(v < 1 for v in self.s):
            raise ConfigError("m must be >= 0 and s >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.eps < 0:
            raise ConfigError("eps must be nonnegative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.signal == "fixed" and not self.z0:
            raise ConfigError("signal = fixed needs z0")
        if self.operator and not os.path.exists(self._path(self.operator)):
            raise ConfigError(f"operator file not found: {self.operator}")
        try:
            EnsembleSpec(self.ensemble, self.scale)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.atomic_set()

    def _path(self, p):
        return p if os.path.isabs(p) or not self.base_dir else os.path.join(self.base_dir, p)

    def atomic_set(self):
        return _cached_set(self.atoms, self.base_dir)

    def ensemble_spec(self):
        return EnsembleSpec(self.ensemble, self.scale, self.seed)

    def echo(self):
        d = asdict(self)
        d.pop("base_dir")
        d.pop("workers")
        return d

    @classmethod
    def from_mapping(cls, items, base_dir=""):
        known = {f.name: f for f in fields(cls)}
        kw = {"base_dir": base_dir}
        for key, raw in items.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if raw is None:
                continue
            kw[key] = _coerce(key, raw)
        return cls(**kw)


_INTS = {"trials", "seed", "workers", "tau_samples", "recoveries", "width_samples", "max_iter"}
_FLOATS = {"scale", "eps", "success_tol", "decay", "rho_target", "rho", "xi", "t"}


def _coerce(key, raw):
    if key in ("m", "s"):
        return parse_grid(raw)
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if key in _INTS:
            return int(raw)
        if key in _FLOATS:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    if key == "certify":
        return str(raw).lower() in ("1", "true", "yes", "on") if isinstance(raw, str) else bool(raw)
    if key == "kind":
        return str(raw).replace("-", "_")
    return raw


def load_config(path=None, overrides=None):
    """Read a key-value config file and apply overrides (``None`` values ignored)."""
    items = read_key_values(path) if path else {}
    base = os.path.dirname(os.path.abspath(path)) if path else ""
    for k, v in (overrides or {}).items():
        if v is not None:
            items[k] = v
    return ExperimentConfig.from_mapping(items, base)


@functools.lru_cache(maxsize=16)
def _cached_set(spec, base_dir):
    return parse_set_spec(spec, base_dir or None)


@dataclass
class TrialRecord:
    m: int
    s: int
    trial: int
    seed: int
    success: bool
    converged: bool
    iterations: int
    err_l2: float
    err_w: float
    tail: float
    bound_stable: float = float("nan")
    bound_robust: float = float("nan")
    bound_strong: float = float("nan")
    wall_time: float = 0.0


CSV_COLUMNS = [f.name for f in fields(TrialRecord) if f.name != "wall_time"]


@dataclass
class PhaseGrid:
    m: list
    s: list
    rates: np.ndarray
    counts: np.ndarray
    bound_curve: dict
    metadata: dict


@dataclass
class ExperimentResult:
    kind: str
    records: list
    summary: dict
    grid: PhaseGrid | None = None
    refused: bool = False


# ---------------------------------------------------------------- helpers


def _noise(rng, m, eps):
    if eps == 0 or m == 0:
        return np.zeros(m)
    e = rng.standard_normal(m)
    return eps * e / np.linalg.norm(e)


def _signal(cfg, aset, s, rng):
    if cfg.signal == "sparse":
        return aset.random_sparse(s, rng)[0]
    if cfg.signal == "compressible":
        return aset.random_compressible(rng, cfg.decay)
    z = parse_array(cfg._path(cfg.z0) if os.path.exists(cfg._path(cfg.z0)) else cfg.z0)
    return aset.coerce(z)


def _operator(cfg, m, seed):
    d = cfg.atomic_set().ambient_dim
    if cfg.null_space:
        basis = np.atleast_2d(parse_array(cfg.null_space)).T
        return MeasurementOperator.from_null_space(basis)
    if cfg.operator:
        return MeasurementOperator(read_matrix_csv(cfg._path(cfg.operator)))
    return sample_operator(cfg.ensemble_spec(), m, d, seed=seed)


def _pool_map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def violates(observed, bound, scale):
    """Observed error above the bound by more than the relative slack."""
    return bool(observed > bound + VIOLATION_SLACK * max(bound, scale))


def _solve_record(cfg, aset, A, z0, m, s, trial, seed, rng, eps):
    t0 = time.perf_counter()
    y = A(z0) + _noise(rng, A.m, eps)
    res = solve_min_atomic(aset, A, y, SolverOptions(eps=eps, max_iter=cfg.max_iter))
    diff = res.z_hat - z0
    err_l2 = float(np.linalg.norm(diff))
    ok = err_l2 <= cfg.success_tol * max(float(np.linalg.norm(z0)), 1.0)
    return TrialRecord(m, s, trial, seed, bool(ok), bool(res.converged), int(res.iterations), err_l2,
                       float(aset.norm(diff)), float(aset.tail(z0, s).value),
                       wall_time=time.perf_counter() - t0)


# ---------------------------------------------------------------- phase transition


def _phase_trial(task):
    cfg, m, s, trial, seed = task
    aset = cfg.atomic_set()
    rng = np.random.default_rng(seed)
    A = sample_operator(cfg.ensemble_spec(), m, aset.ambient_dim, seed=int(rng.integers(2**63)))
    z0 = _signal(cfg, aset, s, rng)
    return _solve_record(cfg, aset, A, z0, m, s, trial, seed, rng, cfg.eps)


def run_phase_transition(cfg):
    """Success rates of noiseless (or noisy) recovery over the ``(m, s)`` grid."""
    t0 = time.perf_counter()
    aset = cfg.atomic_set()
    s_vals = [s for s in cfg.s if s <= aset.max_sparsity]
    tasks, idx = [], 0
    for m in cfg.m:
        for s in s_vals:
            for k in range(cfg.trials):
                tasks.append((cfg, m, s, k, cfg.seed + idx))
                idx += 1
    records = _pool_map(_phase_trial, tasks, cfg.workers)
    rates = np.full((len(cfg.m), len(s_vals)), np.nan)
    counts = np.zeros_like(rates, dtype=int)
    for i, m in enumerate(cfg.m):
        for j, s in enumerate(s_vals):
            cell = [r for r in records if r.m == m and r.s == s]
            bad = sum(not r.converged for r in cell)
            if bad > BUDGET_FRACTION * len(cell):
                raise SolverBudgetError(f"cell m={m}, s={s}: {bad}/{len(cell)} solves did not converge")
            rates[i, j] = np.mean([r.success for r in cell])
            counts[i, j] = len(cell)
    n_atoms = aset.n_atoms if aset.kind == "frame" else aset.ambient_dim if aset.kind == "canonical" else None
    curve = {}
    for s in s_vals:
        try:
            curve[s] = min_measurement_bound(s, n_atoms) if n_atoms else None
        except ValueError:
            curve[s] = None
    meta = {"config": cfg.echo(), "version": __version__, "runtime_s": time.perf_counter() - t0}
    grid = PhaseGrid(list(cfg.m), s_vals, rates, counts, curve, meta)
    summary = {
        "m": grid.m,
        "s": grid.s,
        "rates": [[None if np.isnan(v) else float(v) for v in row] for row in rates],
        "trials_per_cell": cfg.trials,
        "bound_curve": {str(k): v for k, v in curve.items()},
    }
    return ExperimentResult("phase", records, summary, grid)


# ---------------------------------------------------------------- bound verification


def _certificates(cfg, aset, A, s):
    stable = stable_rho(aset, A, s, seed=cfg.seed)
    strong = strong_constant(aset, A, s, seed=cfg.seed)
    rho = stable.constants["rho"]
    rho_t = cfg.rho_target
    if rho_t is None and rho < 1:
        rho_t = min(max((1 + rho) / 2, 1e-3), 0.999)
    robust = robust_sampled = None
    if rho_t is not None:
        robust = robust_params(aset, A, s, rho_t, samples=cfg.tau_samples, seed=cfg.seed)
        if robust.method == EXACT:
            robust_sampled = robust_params(aset, A, s, rho_t, method="sampled",
                                           samples=cfg.tau_samples, seed=cfg.seed)
        else:
            robust_sampled = robust
    return stable, robust, robust_sampled, strong


def _verify_trial(task):
    cfg, A, s, trial, seed, consts = task
    # fresh, aligned copy so serial and pooled runs do bit-identical arithmetic
    A = MeasurementOperator(np.array(A.matrix, order="C", copy=True))
    aset = cfg.atomic_set()
    rng = np.random.default_rng(seed)
    z0 = _signal(cfg, aset, s, rng)
    rec = _solve_record(cfg, aset, A, z0, A.m, s, trial, seed, rng, cfg.eps)
    if consts.get("rho") is not None:
        rec.bound_stable = theoretical_bound("stable", aset, A, s, cfg.eps, rec.tail, consts)
    if consts.get("tau") is not None:
        rec.bound_robust = theoretical_bound("robust", aset, A, s, cfg.eps, rec.tail,
                                             {"rho": consts["rho_target"], "tau": consts["tau"]})
    if consts.get("c") is not None:
        rec.bound_strong = theoretical_bound("strong", aset, A, s, cfg.eps, rec.tail, {"c": consts["c"]})
    if consts.get("tau_sampled") is not None:
        rec_s = theoretical_bound("robust", aset, A, s, cfg.eps, rec.tail,
                                  {"rho": consts["rho_target"], "tau": consts["tau_sampled"]})
        return rec, rec_s, float(aset.norm(z0))
    return rec, float("nan"), float(aset.norm(z0))


def run_bound_verification(cfg):
    """Compare observed errors with the stable, robust and strong error bounds.

    Constants come from exact certificates.  When no exact certificate with a
    usable constant exists the run is observational: errors are recorded,
    nothing is asserted and ``refused`` is set.
    """
    t0 = time.perf_counter()
    aset = cfg.atomic_set()
    A = _operator(cfg, cfg.m[0], cfg.seed)
    if A.d != aset.ambient_dim:
        raise ConfigError(f"operator acts on R^{A.d}, atomic set lives in R^{aset.ambient_dim}")
    records, per_s, idx = [], {}, 0
    refused_all = True
    for s in cfg.s:
        stable, robust, robust_sampled, strong = _certificates(cfg, aset, A, s)
        consts = {}
        if stable.method == EXACT and stable.constants["rho"] < 1:
            consts["rho"] = stable.constants["rho"]
        if robust is not None and robust.method == EXACT and np.isfinite(robust.constants["tau"]):
            consts["tau"] = robust.constants["tau"]
            consts["rho_target"] = robust.constants["rho"]
        if robust_sampled is not None and np.isfinite(robust_sampled.constants["tau"]):
            consts["tau_sampled"] = robust_sampled.constants["tau"]
            consts["rho_target"] = robust_sampled.constants["rho"]
        if strong.method == EXACT and strong.constants["c"] > 0:
            consts["c"] = strong.constants["c"]
        asserted = any(k in consts for k in ("rho", "tau", "c"))
        refused_all &= not asserted
        tasks = []
        for k in range(cfg.trials):
            tasks.append((cfg, A, s, k, cfg.seed + idx, consts))
            idx += 1
        out = _pool_map(_verify_trial, tasks, cfg.workers)
        recs = [o[0] for o in out]
        records.extend(recs)
        viol = {"stable": 0, "robust": 0, "strong": 0, "robust_sampled": 0}
        margins = {"stable": math.inf, "robust": math.inf, "strong": math.inf}
        for rec, b_samp, scale in out:
            for name, obs, bnd in (("stable", rec.err_w, rec.bound_stable),
                                   ("robust", rec.err_w, rec.bound_robust),
                                   ("strong", rec.err_l2, rec.bound_strong)):
                if np.isnan(bnd):
                    continue
                viol[name] += violates(obs, bnd, scale)
                margins[name] = min(margins[name], bnd - obs)
            if not np.isnan(b_samp):
                viol["robust_sampled"] += violates(rec.err_w, b_samp, scale)
        per_s[str(s)] = {
            "asserted": asserted,
            "certificates": {c.kind + ("_sampled" if c is robust_sampled and c is not robust else ""): c.to_dict()
                             for c in (stable, robust, robust_sampled, strong) if c is not None},
            "constants": {k: float(v) for k, v in consts.items()},
            "violations": viol,
            "min_margin": {k: (None if math.isinf(v) else float(v)) for k, v in margins.items()},
            "max_err_w": float(max(r.err_w for r in recs)),
            "max_err_l2": float(max(r.err_l2 for r in recs)),
        }
    summary = {
        "nu": float(A.nu),
        "null_dim": A.null_dim,
        "equivalence_constant": aset.equivalence_constant(),
        "per_s": per_s,
        "refused": refused_all,
        "runtime_s": time.perf_counter() - t0,
    }
    if refused_all:
        summary["reason"] = "no exact certificate with a usable constant; observational run only"
    return ExperimentResult("verify", records, summary, refused=refused_all)


# ---------------------------------------------------------------- minimum measurements


def _min_measure_op(task):
    cfg, m, s, op_index, seed = task
    aset = cfg.atomic_set()
    rng = np.random.default_rng(seed)
    A = sample_operator(cfg.ensemble_spec(), m, aset.ambient_dim, seed=int(rng.integers(2**63)))
    cert = None
    if cfg.certify and aset.kind == "canonical":
        cert = check_plain_nsp(aset, A, s)
    recs = []
    for k in range(cfg.recoveries):
        z0 = aset.random_sparse(s, rng)[0]
        recs.append(_solve_record(cfg, aset, A, z0, m, s, op_index * cfg.recoveries + k, seed, rng, 0.0))
    holds = None if cert is None else (cert.holds if cert.method == EXACT else None)
    return holds, recs


def run_min_measurement_study(cfg):
    """Sweep ``m`` for a fixed ``s`` and compare the empirical transition with the lower bound."""
    t0 = time.perf_counter()
    aset = cfg.atomic_set()
    s = cfg.s[0]
    if s <= 2:
        raise RefusedError(f"the measurement lower bound needs s > 2, got s={s}")
    if aset.kind == "rank_one":
        raise RefusedError("the rank-one manifold has infinitely many atoms; the bound does not apply")
    n_atoms = aset.n_atoms if aset.kind == "frame" else aset.ambient_dim
    even = check_s_even(aset, s, seed=cfg.seed)
    if even.verdict == "Falsified":
        raise RefusedError(f"the atomic set is not {s}-even (sampling found a violation of "
                           f"{even.violation:.3g})", report={"s_even": even.verdict})
    try:
        bound = min_measurement_bound(s, n_atoms)
    except ValueError as exc:
        raise RefusedError(str(exc)) from exc
    tasks, idx = [], 0
    for m in cfg.m:
        for k in range(cfg.trials):
            tasks.append((cfg, m, s, k, cfg.seed + idx))
            idx += 1
    out = _pool_map(_min_measure_op, tasks, cfg.workers)
    records, per_m = [], {}
    for m in cfg.m:
        rows = [o for t, o in zip(tasks, out) if t[1] == m]
        certs = [h for h, _ in rows]
        recs = [r for _, rr in rows for r in rr]
        records.extend(recs)
        per_m[str(m)] = {
            "operators": len(rows),
            "nsp_holds": sum(h is True for h in certs),
            "nsp_fails": sum(h is False for h in certs),
            "recovery_rate": float(np.mean([r.success for r in recs])) if recs else None,
        }
    nsp_ms = [m for m in cfg.m if per_m[str(m)]["nsp_holds"] > 0]
    rec_ms = [m for m in cfg.m if per_m[str(m)]["recovery_rate"] == 1.0]
    below = [m for m in cfg.m if m < bound]
    below_fail = all(per_m[str(m)]["nsp_fails"] == per_m[str(m)]["operators"] for m in below) if cfg.certify else None
    # recovery transition: first m at which at least half of the recoveries succeed
    half_ms = [m for m in cfg.m if (per_m[str(m)]["recovery_rate"] or 0.0) >= 0.5]
    m_star = min(half_ms) if half_ms else None
    summary = {
        "s": s,
        "n_atoms": n_atoms,
        "s_even": even.verdict,
        "bound": bound,
        "per_m": per_m,
        "m_star_nsp": min(nsp_ms) if nsp_ms else None,
        "m_star_full_recovery": min(rec_ms) if rec_ms else None,
        "m_star": m_star,
        "below_bound_all_fail": below_fail,
        "consistent": (m_star is None or m_star >= bound) and below_fail is not False,
        "runtime_s": time.perf_counter() - t0,
    }
    return ExperimentResult("min_measure", records, summary)


def run_mendelson(cfg):
    aset = cfg.atomic_set()
    ens = cfg.ensemble_spec()
    params = estimate_params(ens, aset.ambient_dim, seed=cfg.seed)
    xi = cfg.xi if cfg.xi is not None else params.alpha / 4
    rep = mendelson_check(ens, aset, cfg.rho, cfg.s[0], cfg.m[0], xi, cfg.t, trials=cfg.trials,
                          seed=cfg.seed, width_samples=cfg.width_samples)
    rep["alpha"] = params.alpha
    rep["xi"] = xi
    return ExperimentResult("mendelson", [], rep)


def run_experiment(cfg):
    return {"phase": run_phase_transition, "verify": run_bound_verification,
            "min_measure": run_min_measurement_study, "mendelson": run_mendelson}[cfg.kind](cfg)


# ---------------------------------------------------------------- output


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT % v


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return None if not np.isfinite(x) else float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_records_csv(path, records):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in records:
                w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit(result, out, fmt="csv", config=None):
    """Write trial records and a JSON summary.

    ``fmt="csv"`` writes the records to ``out`` (columns ``CSV_COLUMNS``) and
    the summary to the same path with a ``.json`` suffix.  ``fmt="json"``
    writes a single JSON document holding both.  Wall-clock times only appear
    in the JSON so the CSV is byte-identical across reruns.

    Returns the list of files written.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown output format {fmt!r}")
    doc = {"schema_version": SCHEMA_VERSION, "kind": result.kind, "version": __version__,
           "refused": result.refused, "summary": result.summary, "columns": CSV_COLUMNS}
    if config is not None:
        doc["config"] = config.echo()
    written = []
    root, ext = os.path.splitext(out)
    if fmt == "csv":
        csv_path = out if ext == ".csv" else out + ".csv"
        write_records_csv(csv_path, result.records)
        written.append(csv_path)
        json_path = (root if ext == ".csv" else out) + ".json"
    else:
        doc["records"] = [asdict(r) for r in result.records]
        json_path = out if ext == ".json" else out + ".json"
    try:
        with open(json_path, "w") as fh:
            json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {json_path}: {exc}") from exc
    written.append(json_path)
    return written
