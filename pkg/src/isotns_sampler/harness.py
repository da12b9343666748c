"""Experiment runners: sampling convergence, top-K accuracy and timing.

Every runner returns a record whose CSV rendering depends only on the
configuration (wall-times go to JSON only), so reruns are byte-identical.
Trial ``t`` of a convergence run consumes the stream
``PCG64(SeedSequence([seed, t]))``, ``n_sites`` uniforms per sample in sample
order; each trial draws the largest ``N`` of the schedule once and the smaller
``N`` use its leading samples. Trials are independent of the number of
workers.
"""

from __future__ import annotations

import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import __version__, isotns, states
from .isotns.sampling import GridCursor
from .streams import sample_uniforms
from .tensor import SvdTruncation
from .tree import SamplingTree

STATES = ("ghz", "w", "random")
MODES = ("sample", "topk", "bench")
CSV_HEADER = f"# isotns-sampler v{__version__}"


class InfeasibleConfigError(ValueError):
    """The requested experiment cannot be run (e.g. the dense oracle is too large)."""


def default_schedule(lo: float = 1e2, hi: float = 1e5, points: int = 10) -> tuple[int, ...]:
    """Geometric sample-size grid, rounded to integers."""
    return tuple(int(n) for n in np.unique(np.rint(np.geomspace(lo, hi, points)).astype(int)))


def default_k(state: str, L: int) -> int:
    return {"ghz": 2, "w": L * L}.get(state, 10)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment. ``chi`` caps the row-contraction bond; ``state_chi`` is
    the bond dimension used to build random states."""

    state: str
    L: int
    chi: int = 2
    seed: int = 0
    n_samples: tuple[int, ...] = field(default_factory=default_schedule)
    n_trials: int = 10
    k: int | None = None
    out: str | None = None
    mode: str = "sample"
    state_chi: int = 4
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_samples", tuple(int(n) for n in self.n_samples))
        if self.state not in STATES:
            raise ValueError(f"unknown state {self.state!r}; expected one of {STATES}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.L < 1 or self.chi < 1 or self.state_chi < 1:
            raise ValueError("L, chi and state_chi must be >= 1")
        if not self.n_samples or self.n_samples[0] < 1 or any(b <= a for a, b in zip(self.n_samples, self.n_samples[1:])):
            raise ValueError("n_samples must be a strictly increasing list of positive integers")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def trunc(self) -> SvdTruncation:
        return SvdTruncation(self.chi)

    @property
    def top_k(self) -> int:
        return self.k if self.k is not None else default_k(self.state, self.L)

    def to_json(self) -> dict:
        return {**asdict(self), "n_samples": list(self.n_samples)}


@dataclass
class ExperimentRecord:
    """Rows of one experiment plus summaries.

    ``summary`` holds per-``N`` KL statistics for convergence runs and the
    aggregate accuracy figures for top-K runs; ``details`` holds per-string
    data that does not fit the CSV schema.
    """

    config: ExperimentConfig
    columns: tuple[str, ...]
    rows: list[tuple]
    summary: list[dict] = field(default_factory=list)
    details: list[dict] = field(default_factory=list)
    wall_times: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "version": __version__,
            "config": self.config.to_json(),
            "rows": [dict(zip(self.columns, r)) for r in self.rows],
            "summary": self.summary,
            "details": self.details,
            "wall_times": self.wall_times,
        }


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(columns: Sequence[str], rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(v) for v in r) + "\n")
    return buf.getvalue()


def records_to_csv(records: Sequence[ExperimentRecord]) -> str:
    if not records:
        raise ValueError("no records")
    return to_csv(records[0].columns, [r for rec in records for r in rec.rows])


def records_to_json(records: Sequence[ExperimentRecord]) -> str:
    return json.dumps([rec.to_json() for rec in records], indent=1)


def build_state(cfg: ExperimentConfig) -> isotns.IsoTnsGrid:
    if cfg.state == "ghz":
        return states.ghz_grid(cfg.L)
    if cfg.state == "w":
        return states.w_grid(cfg.L)
    return states.random_grid(cfg.L, cfg.state_chi, cfg.seed)


def reference_distribution(cfg: ExperimentConfig, grid: isotns.IsoTnsGrid | None = None) -> dict:
    """Analytic table for GHZ and W, dense oracle for random states."""
    n = cfg.L * cfg.L
    if cfg.state == "ghz":
        return states.ghz_distribution(n)
    if cfg.state == "w":
        return states.w_distribution(n)
    if 2**n > states.MAX_DENSE:
        raise InfeasibleConfigError(f"random {cfg.L}x{cfg.L} needs a 2^{n} dense oracle (limit 2^20)")
    return states.oracle_distribution(states.to_dense(grid if grid is not None else build_state(cfg)))


def _convergence_trial(cfg: ExperimentConfig, trial: int, grid=None, ref=None, tree=None) -> list[tuple]:
    grid = grid if grid is not None else build_state(cfg)
    ref = ref if ref is not None else reference_distribution(cfg, grid)
    tree = tree if tree is not None else SamplingTree(GridCursor(grid, cfg.trunc))
    leaves = tree.walk(sample_uniforms(cfg.seed, trial, 0, cfg.n_samples[-1], grid.n_sites))
    uniq, inv = np.unique(leaves, return_inverse=True)
    ref_p = np.array([ref.get(tree.node(int(u)).config, 0.0) for u in uniq])
    err = np.array([sum(tree.node(int(u)).row_errors) for u in uniq])
    rows = []
    for n in cfg.n_samples:
        counts = np.bincount(inv[:n], minlength=len(uniq))
        seen = counts > 0
        q = counts[seen] / n
        p = ref_p[seen]
        if np.any(p <= 0):
            kl = math.inf
        else:
            kl = max(float(np.sum(q * np.log(q / p))), 0.0)
        rows.append((cfg.state, cfg.L, cfg.chi, n, trial, kl, float(np.dot(counts, err) / n)))
    return rows


def _trial_job(args):
    return _convergence_trial(*args)


def summarize_kl(rows: Sequence[tuple], n_samples: Sequence[int]) -> list[dict]:
    out = []
    for n in n_samples:
        kls = np.array([r[5] for r in rows if r[3] == n])
        errs = np.array([r[6] for r in rows if r[3] == n])
        p16, med, p84 = np.percentile(kls, [16, 50, 84])
        out.append(
            {
                "N": int(n),
                "median_KL": float(med),
                "p16_KL": float(p16),
                "p84_KL": float(p84),
                "max_sum_row_errors": float(errs.max()),
            }
        )
    return out


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


CONVERGENCE_COLUMNS = ("state", "L", "chi", "N", "trial", "KL", "sum_row_errors")


def run_convergence(cfg: ExperimentConfig) -> ExperimentRecord:
    """KL between empirical and reference distributions for each ``N`` and trial.

    ``sum_row_errors`` is the mean over the ``N`` samples of each sample's
    summed row-contraction discarded weight.
    """
    t0 = time.perf_counter()
    grid = build_state(cfg)
    ref = reference_distribution(cfg, grid)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            per_trial = list(pool.map(_trial_job, [(cfg, t) for t in range(cfg.n_trials)]))
    else:
        tree = SamplingTree(GridCursor(grid, cfg.trunc))
        per_trial = [_convergence_trial(cfg, t, grid, ref, tree) for t in range(cfg.n_trials)]
    rows = [r for trial in per_trial for r in trial]
    rows.sort(key=lambda r: (r[3], r[4]))
    summary = summarize_kl(rows, cfg.n_samples)
    return ExperimentRecord(cfg, CONVERGENCE_COLUMNS, rows, summary, wall_times={"total": time.perf_counter() - t0})


TOPK_COLUMNS = ("state", "L", "chi", "K", "n_returned", "KL", "coverage", "recall", "L1_error", "sum_row_errors")


def run_topk(cfg: ExperimentConfig) -> ExperimentRecord:
    """Greedy top-K on the state and its accuracy against the reference.

    ``KL`` compares the returned probabilities with the reference
    probabilities of the same strings, each normalized over the returned
    support. ``coverage`` is the reference mass of the returned strings,
    ``L1_error`` the summed absolute probability error and ``recall`` the
    fraction of the exact top-K that was returned (NaN when no dense oracle
    exists, as for large GHZ/W lattices).
    """
    t0 = time.perf_counter()
    grid = build_state(cfg)
    k = cfg.top_k
    n = grid.n_sites
    oracle = None
    if cfg.state == "random" or 2**n <= states.MAX_DENSE:
        if 2**n > states.MAX_DENSE:
            raise InfeasibleConfigError(f"random {cfg.L}x{cfg.L} needs a 2^{n} dense oracle (limit 2^20)")
        oracle = states.to_dense(grid)
    ref = reference_distribution(cfg, grid) if oracle is None else states.oracle_distribution(oracle)
    t1 = time.perf_counter()
    found = isotns.top_k(grid, k, cfg.trunc)
    t_search = time.perf_counter() - t1
    p_ret = np.array(found.probs)
    p_ref = np.array([ref.get(c, 0.0) for c in found.configs])
    abs_err = np.abs(p_ret - p_ref)
    kl = states.kl_divergence(
        dict(zip(found.configs, p_ret / p_ret.sum())),
        dict(zip(found.configs, p_ref / p_ref.sum())) if p_ref.sum() > 0 else {},
    )
    recall = math.nan
    if oracle is not None:
        exact = set(states.oracle_top_k(oracle, k).configs)
        recall = len(exact & set(found.configs)) / len(exact)
    row = (
        cfg.state,
        cfg.L,
        cfg.chi,
        k,
        len(found),
        float(kl),
        float(p_ref.sum()),
        float(recall),
        float(abs_err.sum()),
        float(sum(found.row_errors)),
    )
    details = [
        {"rank": i, "config": "".join(map(str, c)), "prob": float(p), "ref_prob": float(r), "abs_error": float(e)}
        for i, (c, p, r, e) in enumerate(zip(found.configs, p_ret, p_ref, abs_err))
    ]
    summary = [dict(zip(TOPK_COLUMNS, row)) | {"row_errors": list(found.row_errors)}]
    return ExperimentRecord(
        cfg, TOPK_COLUMNS, [row], summary, details, {"search": t_search, "total": time.perf_counter() - t0}
    )


BENCH_COLUMNS = ("state", "L", "chi", "K", "runs", "median_seconds")


@dataclass
class BenchRecord:
    """Timing table; ``slopes`` maps ``(chi, K)`` to the log-log slope of
    median time against ``L``."""

    columns: tuple[str, ...]
    rows: list[tuple]
    slopes: dict[tuple[int, int | None], float]

    def to_json(self) -> dict:
        return {
            "version": __version__,
            "rows": [dict(zip(self.columns, r)) for r in self.rows],
            "slopes_in_L": [{"chi": c, "K": k, "slope": s} for (c, k), s in self.slopes.items()],
        }


def run_bench(
    state: str,
    Ls: Sequence[int],
    chis: Sequence[int] = (2,),
    ks: Sequence[int | None] = (None,),
    repeats: int = 5,
    n_samples: int = 20,
    seed: int = 0,
) -> BenchRecord:
    """Median wall-time of sampling (``K`` is None) or top-K search.

    Random states are built with bond dimension ``chi`` and contracted with
    the same cap, so ``chi`` sets the tensor sizes throughout. A run draws
    ``n_samples`` configurations one at a time, or performs ``n_samples``
    top-K searches. Each entry is the median over ``repeats`` runs, after one untimed
    warm-up run.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rows = []
    slopes = {}
    for chi in chis:
        for k in ks:
            meds = []
            for L in Ls:
                cfg = ExperimentConfig(state, L, chi, seed, state_chi=chi, mode="bench")
                grid = build_state(cfg)
                rng = np.random.default_rng(seed)

                def once():
                    for _ in range(n_samples):
                        if k is None:
                            isotns.sample(grid, cfg.trunc, rng)
                        else:
                            isotns.top_k(grid, k, cfg.trunc)

                once()
                times = []
                for _ in range(repeats):
                    t0 = time.perf_counter()
                    once()
                    times.append(time.perf_counter() - t0)
                med = float(np.median(times))
                meds.append(med)
                rows.append((state, L, chi, k if k is not None else 0, repeats, med))
            if len(Ls) > 1:
                slopes[(chi, k)] = loglog_slope(Ls, meds)
    return BenchRecord(BENCH_COLUMNS, rows, slopes)
