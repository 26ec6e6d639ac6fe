"""Cost of eigenimage-domain SR against band-by-band SR.

Both runs use the same synthetic LR cube and the bicubic operator, so the
only difference is how many channels are super-resolved: ``R`` eigenimages
versus all ``L`` (the ``R = L`` comparator).  Call counts are exact; wall
times depend on the machine.
"""

from __future__ import annotations

import time

import numpy as np

from .inference import CountingOperator, InferenceConfig, run
from .speclin import default_rank
from .srmodel import BicubicSR
from .synthetic import band_limited_cube

BENCH_COLUMNS = (
    "rep",
    "mode",
    "bands",
    "rank",
    "iterations",
    "calls_rank",
    "calls_full",
    "call_ratio",
    "time_rank",
    "time_full",
    "time_ratio",
)


def _timed(cube, cfg, workers):
    op = CountingOperator(BicubicSR(cfg.scale))
    t0 = time.perf_counter()
    run(cube, op, cfg, workers)
    return op.calls, time.perf_counter() - t0


def run_bench(
    bands: int = 102,
    rank: int | None = None,
    iterations: int = 5,
    size: int = 64,
    reps: int = 3,
    scale: int = 2,
    mode: str = "alpha",
    seed: int = 0,
    workers: int = 1,
) -> list[dict]:
    """Timed rows, one per repetition, followed by a ``rep="summary"`` row.

    The summary reports the median times and their ratio.  Each variant
    is timed in its own block after one untimed warm-up pass: alternating
    the two makes the smaller run pay page faults for buffers the larger
    one just released, which skews the ratio by up to 40% on small VMs.
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    rank = default_rank(bands) if rank is None else rank
    cube = band_limited_cube(bands, size, size, rng=seed)
    cfg = InferenceConfig(scale, mode, rank, iterations)
    full = InferenceConfig(scale, mode, bands, iterations)
    cfg.resolve(bands)
    timings = []
    for variant in (cfg, full):
        _timed(cube, variant, workers)
        timings.append([_timed(cube, variant, workers) for _ in range(reps)])

    rows = []
    for rep, ((calls_r, t_r), (calls_f, t_f)) in enumerate(zip(*timings), start=1):
        rows.append(_row(rep, cfg.resolve(bands), bands, calls_r, calls_f, t_r, t_f))
    t_r = float(np.median([r["time_rank"] for r in rows]))
    t_f = float(np.median([r["time_full"] for r in rows]))
    rows.append(_row("summary", cfg.resolve(bands), bands, rows[0]["calls_rank"], rows[0]["calls_full"], t_r, t_f))
    return rows


def _row(rep, cfg, bands, calls_r, calls_f, t_r, t_f):
    return {
        "rep": rep,
        "mode": cfg.mode,
        "bands": bands,
        "rank": cfg.rank,
        "iterations": cfg.iterations,
        "calls_rank": calls_r,
        "calls_full": calls_f,
        "call_ratio": calls_r / calls_f,
        "time_rank": t_r,
        "time_full": t_f,
        "time_ratio": t_r / t_f,
    }
