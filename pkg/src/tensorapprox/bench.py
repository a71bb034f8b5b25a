"""Benchmark harness: synthetic data, algorithm runs, CSV output, 2x2x2 rank statistics."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .amm import (
    StopRule,
    amm,
    hosvd_init,
    mamm,
    random_init,
    random_unit_vectors,
    rank_one_2amm,
    rank_one_amm,
    rank_one_m2amm,
    two_ammv,
)
from .newton import NewtonStop, hybrid_newton2, hybrid_rank_one, newton2
from .errors import ConfigError, DimensionError, NewtonFailure, SingularPivotError
from .matrix_approx import cur_classic, cur_optimal, pivot_search, svd_rank_k
from .tensor_core import hs_norm, project, tucker_to_tensor, unfold
from .tensor_cur import cur3_build, cur4_build

ALGORITHMS = (
    "amm", "mamm", "2ammv", "rank1-amm", "rank1-asvd", "rank1-masvd",
    "newton1", "newton2", "hybrid", "svd-k", "cur-classic", "cur-optimal", "cur3", "cur4",
)
ALTERNATING = {"amm", "mamm", "2ammv", "rank1-amm", "rank1-asvd", "rank1-masvd"}
CSV_COLUMNS = ("algorithm", "seed", "iters", "seconds", "hs_norm", "residual", "stop_reason")


# --- synthetic data ---------------------------------------------------------

def _parse_dims(text: str) -> tuple:
    try:
        dims = tuple(int(n) for n in text.lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"bad shape {text!r}") from exc
    if not dims or any(n < 1 for n in dims):
        raise ConfigError(f"bad shape {text!r}")
    return dims


def parse_generator(spec: str):
    """Split ``kind:AxBxC:key=value:...`` into ``(kind, shape, options)``."""
    parts = spec.strip().split(":")
    if len(parts) < 2:
        raise ConfigError(f"generator spec {spec!r} needs at least kind:shape")
    kind, shape = parts[0].lower(), _parse_dims(parts[1])
    opts = {}
    for p in parts[2:]:
        if "=" not in p:
            raise ConfigError(f"option {p!r} in {spec!r} is not key=value")
        key, value = p.split("=", 1)
        opts[key.strip().lower()] = value.strip()
    return kind, shape, opts


def _frames(rng, shape, ranks):
    return [np.linalg.qr(rng.standard_normal((n, r)))[0] for n, r in zip(shape, ranks)]


def generate(spec: str) -> np.ndarray:
    """Deterministic synthetic tensors.

    ``gaussian:8x8x8:seed=0``
        independent standard normal entries.
    ``lowrank:6x6x6:ranks=2,2,2:noise=0:seed=1``
        Gaussian core times random orthonormal frames plus ``noise`` times
        Gaussian noise.
    ``composite-cur:6x6x6:k=2:seed=0``
        a Tucker tensor on which the nested skeleton construction is exact:
        ranks ``(k^2, k, k)`` for three modes and ``(k, k, k, k)`` for four.
    """
    kind, shape, opts = parse_generator(spec)
    try:
        seed = int(opts.get("seed", 0))
    except ValueError as exc:
        raise ConfigError(f"bad seed in {spec!r}") from exc
    rng = np.random.default_rng(seed)
    if kind == "gaussian":
        return rng.standard_normal(shape)
    if kind == "lowrank":
        try:
            ranks = tuple(int(r) for r in opts["ranks"].split(","))
            noise = float(opts.get("noise", 0.0))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"lowrank needs ranks=r1,...,rd: {spec!r}") from exc
        if len(ranks) != len(shape) or any(not 1 <= r <= n for r, n in zip(ranks, shape)):
            raise ConfigError(f"ranks {ranks} incompatible with shape {shape}")
        core = rng.standard_normal(ranks)
        T = tucker_to_tensor(core, _frames(rng, shape, ranks))
        if noise:
            T = T + noise * rng.standard_normal(shape)
        return T
    if kind == "composite-cur":
        try:
            k = int(opts.get("k", 1))
        except ValueError as exc:
            raise ConfigError(f"bad k in {spec!r}") from exc
        if len(shape) == 3:
            ranks = (k * k, k, k)
        elif len(shape) == 4:
            ranks = (k,) * 4
        else:
            raise ConfigError("composite-cur supports three or four modes")
        if any(r > n for r, n in zip(ranks, shape)):
            raise ConfigError(f"k={k} too large for shape {shape}")
        core = rng.standard_normal(ranks)
        mats = [rng.standard_normal((n, r)) for n, r in zip(shape, ranks)]
        return tucker_to_tensor(core, mats)
    raise ConfigError(f"unknown generator {kind!r}")


# --- index selection for tensor CUR ------------------------------------------

def cur3_indices(T, k: int, trials: int = 50, seed=None):
    """Random search for well-conditioned nested pivots of a 3-mode tensor.

    The score is the smallest ``|det|`` among the main pivot (normalized by
    its size) and all slice pivots, so a draw with any singular block loses.
    """
    rng = np.random.default_rng(seed)
    n1, n2, n3 = T.shape
    if k * k > n1 or k > n2 or k > n3:
        raise DimensionError(f"k={k} too large for shape {T.shape}")
    best = None
    for _ in range(trials):
        I1 = np.sort(rng.choice(n1, k * k, replace=False))
        I2 = np.sort(rng.choice(n2, k, replace=False))
        I3 = np.sort(rng.choice(n3, k, replace=False))
        sub = T[np.ix_(I1, I2, I3)]
        dets = [abs(np.linalg.det(sub.reshape(k * k, k * k))) ** (1.0 / k)]
        dets += [abs(np.linalg.det(sub[a])) for a in range(k * k)]
        score = min(dets)
        if best is None or score > best[-1]:
            best = (I1, I2, I3, score)
    return best[:3]


def cur4_indices(T, k: int, trials: int = 50, seed=None):
    rng = np.random.default_rng(seed)
    if any(k > n for n in T.shape):
        raise DimensionError(f"k={k} too large for shape {T.shape}")
    best = None
    for _ in range(trials):
        sets = [np.sort(rng.choice(n, k, replace=False)) for n in T.shape]
        sub = T[np.ix_(*sets)]
        dets = [abs(np.linalg.det(sub.reshape(k * k, k * k))) ** 0.5]
        dets += [abs(np.linalg.det(sub[:, :, c, d])) for c in range(k) for d in range(k)]
        dets += [abs(np.linalg.det(sub[a, b])) for a in range(k) for b in range(k)]
        score = min(dets)
        if best is None or score > best[-1]:
            best = (*sets, score)
    return best[:4]


# --- benchmark runs -----------------------------------------------------------

@dataclass
class BenchConfig:
    algorithms: List[str]
    ranks: List[int]
    seeds: List[int] = field(default_factory=lambda: list(range(10)))
    input_path: Optional[str] = None
    generator: Optional[str] = None
    stop: StopRule = StopRule()
    newton_stop: NewtonStop = NewtonStop()
    out: Optional[str] = None
    trace_dir: Optional[str] = None
    pivot_trials: int = 50

    def validate(self, shape) -> None:
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ConfigError(f"unknown algorithms {unknown}; choose from {', '.join(ALGORITHMS)}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(self.ranks) != len(shape):
            raise ConfigError(f"{len(self.ranks)} ranks given for a {len(shape)}-mode tensor")
        if any(not 1 <= r <= n for r, n in zip(self.ranks, shape)):
            raise ConfigError(f"ranks {self.ranks} incompatible with shape {shape}")


@dataclass
class BenchRecord:
    algorithm: str
    seed: object
    iters: float
    seconds: float
    hs_norm: float
    residual: float
    stop_reason: str
    trace: Optional[object] = field(default=None, repr=False)

    def row(self):
        return [self.algorithm, self.seed, _fmt(self.iters), "%.3f" % self.seconds,
                _fmt(self.hs_norm), _fmt(self.residual), self.stop_reason]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _tucker_result(T, frames):
    core, P = project(T, frames)
    return float(np.linalg.norm(core)), float(np.linalg.norm(T - P))


def _rank_one_result(T, lam):
    lam = abs(lam)
    return lam, math.sqrt(max(hs_norm(T) ** 2 - lam * lam, 0.0))


def run_one(T, algorithm: str, ranks, seed, config: BenchConfig) -> BenchRecord:
    """Run one (algorithm, seed) cell.  Solver failures become a ``failed:`` stop reason."""
    stop, nstop = config.stop, config.newton_stop
    t0 = time.perf_counter()
    trace = None
    try:
        if algorithm in ("amm", "mamm", "2ammv", "newton2", "hybrid"):
            init = random_init(T.shape, ranks, seed)
            if algorithm == "amm":
                frames, trace = amm(T, ranks, init, stop)
            elif algorithm == "mamm":
                frames, trace = mamm(T, ranks, init, stop)
            elif algorithm == "2ammv":
                frames, trace = two_ammv(T, ranks, init, stop)
            elif algorithm == "newton2":
                warm, _ = amm(T, ranks, init, StopRule(max_iters=1, fit_tol=0.0))
                frames, trace = newton2(T, ranks, warm, nstop)
            else:
                frames, trace = hybrid_newton2(T, ranks, init, 1, nstop, stop)
            hs, res = _tucker_result(T, frames)
            iters, reason = trace.iterations, trace.stop_reason
        elif algorithm in ("rank1-amm", "rank1-asvd", "rank1-masvd", "newton1"):
            init = random_unit_vectors(T.shape, seed)
            if algorithm == "rank1-amm":
                _, lam, trace = rank_one_amm(T, init, stop)
            elif algorithm == "rank1-asvd":
                _, lam, trace = rank_one_2amm(T, init, stop)
            elif algorithm == "rank1-masvd":
                _, lam, trace = rank_one_m2amm(T, init, stop)
            else:
                _, lam, trace = hybrid_rank_one(T, init, 2, nstop, stop)
            hs, res = _rank_one_result(T, lam)
            iters, reason = trace.iterations, trace.stop_reason
        elif algorithm == "svd-k":
            # best rank-r_1 approximation of the mode-1 unfolding
            A = unfold(T, 0)
            _, Ak, err = svd_rank_k(A, ranks[0])
            hs, res, iters, reason = float(np.linalg.norm(Ak)), err, 1, "direct"
        elif algorithm in ("cur-classic", "cur-optimal"):
            A = unfold(T, 0)
            I, J, _ = pivot_search(A, ranks[0], config.pivot_trials, "abs-det", seed)
            f = cur_classic(A, I, J) if algorithm == "cur-classic" else cur_optimal(A, I, J)
            B = f.matrix()
            hs, res, iters, reason = float(np.linalg.norm(B)), float(np.linalg.norm(A - B)), 1, "direct"
        elif algorithm == "cur3":
            if T.ndim != 3:
                raise ConfigError("cur3 needs a 3-mode tensor")
            k = ranks[1]
            I1, I2, I3 = cur3_indices(T, k, config.pivot_trials, seed)
            B = cur3_build(T, I1, I2, I3, k).to_dense()
            hs, res, iters, reason = hs_norm(B), hs_norm(T - B), 1, "direct"
        elif algorithm == "cur4":
            if T.ndim != 4:
                raise ConfigError("cur4 needs a 4-mode tensor")
            k = ranks[0]
            sets = cur4_indices(T, k, config.pivot_trials, seed)
            B = cur4_build(T, *sets, k).to_dense()
            hs, res, iters, reason = hs_norm(B), hs_norm(T - B), 1, "direct"
        else:
            raise ConfigError(f"unknown algorithm {algorithm!r}")
    except (NewtonFailure, SingularPivotError) as exc:
        return BenchRecord(algorithm, seed, 0, time.perf_counter() - t0, math.nan, math.nan,
                           f"failed:{type(exc).__name__}", trace)
    return BenchRecord(algorithm, seed, iters, time.perf_counter() - t0, hs, res, reason, trace)


def _mean_row(algorithm, records) -> BenchRecord:
    def mean(attr):
        vals = [getattr(r, attr) for r in records]
        return float(np.mean(vals))

    return BenchRecord(algorithm, "mean", mean("iters"), mean("seconds"), mean("hs_norm"),
                       mean("residual"), f"{sum(not r.stop_reason.startswith('failed') for r in records)}"
                       f"/{len(records)} ok")


def load_input(config: BenchConfig) -> np.ndarray:
    from .io import load

    if (config.input_path is None) == (config.generator is None):
        raise ConfigError("give exactly one of an input path and a generator spec")
    if config.input_path is not None:
        return load(config.input_path)
    return generate(config.generator)


def run_bench(config: BenchConfig, T=None) -> List[BenchRecord]:
    """Run every (algorithm, seed) cell, append per-algorithm means, write CSV and traces."""
    if T is None:
        T = load_input(config)
    T = np.asarray(T, dtype=np.float64)
    config.validate(T.shape)
    records = []
    for alg in config.algorithms:
        cells = [run_one(T, alg, config.ranks, seed, config) for seed in config.seeds]
        records.extend(cells)
        records.append(_mean_row(alg, cells))
    if config.out:
        write_csv(config.out, records)
    if config.trace_dir:
        write_traces(config.trace_dir, records)
    return records


def write_csv(path, records: Sequence[BenchRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(r.row())


def write_traces(directory, records: Sequence[BenchRecord]) -> None:
    """One CSV per traced cell: iteration, objective, seconds, subproblems."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for r in records:
        if r.trace is None:
            continue
        with open(d / f"{r.algorithm}_seed{r.seed}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(("iteration", "objective", "seconds", "subproblems"))
            for it, obj, sec, sub in r.trace.rows():
                w.writerow((it, repr(obj), "%.3f" % sec, sub))


# --- 2 x 2 x 2 tensors ----------------------------------------------------------

def _hyperdet(a):
    # a has shape (..., 2, 2, 2); evaluated elementwise over the leading axes
    g = lambda i, j, k: a[..., i, j, k]
    return (
        g(0, 0, 0) ** 2 * g(1, 1, 1) ** 2 + g(0, 0, 1) ** 2 * g(1, 1, 0) ** 2
        + g(0, 1, 0) ** 2 * g(1, 0, 1) ** 2 + g(1, 0, 0) ** 2 * g(0, 1, 1) ** 2
        - 2 * (g(0, 0, 0) * g(0, 0, 1) * g(1, 1, 0) * g(1, 1, 1)
               + g(0, 0, 0) * g(0, 1, 0) * g(1, 0, 1) * g(1, 1, 1)
               + g(0, 0, 0) * g(1, 0, 0) * g(0, 1, 1) * g(1, 1, 1)
               + g(0, 0, 1) * g(0, 1, 0) * g(1, 0, 1) * g(1, 1, 0)
               + g(0, 0, 1) * g(1, 0, 0) * g(0, 1, 1) * g(1, 1, 0)
               + g(0, 1, 0) * g(1, 0, 0) * g(0, 1, 1) * g(1, 0, 1))
        + 4 * (g(0, 0, 0) * g(0, 1, 1) * g(1, 0, 1) * g(1, 1, 0)
               + g(0, 0, 1) * g(0, 1, 0) * g(1, 0, 0) * g(1, 1, 1))
    )


def hyperdeterminant(T) -> float:
    """Cayley hyperdeterminant of a 2x2x2 tensor."""
    a = np.asarray(T, dtype=np.float64)
    if a.shape != (2, 2, 2):
        raise DimensionError(f"hyperdeterminant needs a 2x2x2 tensor, got {a.shape}")
    return float(_hyperdet(a))


def _unfolding_rank(T, mode, tol):
    s = np.linalg.svd(unfold(T, mode), compute_uv=False)
    return int(np.sum(s > tol * max(s[0], 1e-300)))


def classify_rank222(T, tol: float = 1e-12) -> Optional[int]:
    """Tensor rank (0 to 3) of a 2x2x2 tensor.

    Rank 1 when every unfolding has rank one; otherwise the sign of the
    hyperdeterminant decides (positive: 2, negative: 3).  On the
    hypersurface ``Delta = 0`` a tensor with a rank-one unfolding has rank 2
    and the remaining (W-type) tensors have rank 3.
    """
    T = np.asarray(T, dtype=np.float64)
    scale = hs_norm(T)
    if scale == 0.0:
        return 0
    ranks = [_unfolding_rank(T, m, 1e-10) for m in range(3)]
    if max(ranks) == 1:
        return 1
    delta = hyperdeterminant(T)
    if abs(delta) <= tol * scale ** 4:
        return 2 if min(ranks) <= 1 else 3
    return 2 if delta > 0 else 3


def rank222_experiment(samples: int = 10000, seed=None, tol: float = 1e-12):
    """Fraction of standard Gaussian 2x2x2 tensors of rank at most 2.

    Samples with ``|Delta| <= tol * ||T||^4`` are discarded and redrawn.
    Returns ``(fraction, standard_error)``.
    """
    if samples < 100:
        raise ValueError("samples must be at least 100")
    rng = np.random.default_rng(seed)
    low = 0
    drawn = 0
    while drawn < samples:
        batch = rng.standard_normal((samples - drawn, 2, 2, 2))
        delta = _hyperdet(batch)
        keep = np.abs(delta) > tol * np.sum(batch ** 2, axis=(1, 2, 3)) ** 2
        low += int(np.sum(delta[keep] > 0))
        drawn += int(np.sum(keep))
    p = low / samples
    return p, math.sqrt(p * (1 - p) / samples)


def best222_core_rank(T, stop: NewtonStop = NewtonStop(),
                      fallback: StopRule = StopRule(max_iters=200, fit_tol=1e-12)):
    """Core of a best (2,2,2)-approximation from the hybrid solver and its tensor rank."""
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 3 or min(T.shape) < 2:
        raise DimensionError("need a 3-mode tensor with every mode of size at least 2")
    ranks = (2, 2, 2)
    init = hosvd_init(T, ranks)
    frames, _ = hybrid_newton2(T, ranks, init, 1, stop, fallback)
    core, _ = project(T, frames)
    return core, classify_rank222(core, tol=1e-10)
