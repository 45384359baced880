"""Reconstruction metrics and the sparsity-sweep benchmark harness.

Metrics are computed jointly over all cells and bands on raw (unclamped)
estimates; clamping and the 99 dB PSNR cap belong to the export layer only.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, RadioMapError
from .tensors import ObservationMask, as_tensor, project
from .propagation import sample_mask

PSNR_CAP_DB = 99.0
DEFAULT_OUTAGE_THRESHOLD = 0.2


def _pair(est, truth):
    est = as_tensor(est)
    truth = as_tensor(truth)
    if est.shape != truth.shape:
        raise InvalidArgumentError(f"shape mismatch: est {est.shape} vs truth {truth.shape}")
    return est, truth


def psnr(est, truth, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE); +inf when the maps agree exactly."""
    est, truth = _pair(est, truth)
    if not peak > 0:
        raise InvalidArgumentError(f"peak must be positive, got {peak}")
    mse = float(np.mean((est - truth) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def cap_psnr(db: float) -> float:
    """File-output form of a PSNR value: the +inf sentinel becomes 99 dB."""
    return min(db, PSNR_CAP_DB)


def rmse(est, truth) -> float:
    est, truth = _pair(est, truth)
    return float(np.sqrt(np.mean((est - truth) ** 2)))


def outage_error(est, truth, threshold: float = DEFAULT_OUTAGE_THRESHOLD) -> float:
    """Fraction of cells whose outage state (value below threshold) disagrees."""
    est, truth = _pair(est, truth)
    if not 0.0 < threshold < 1.0:
        raise InvalidArgumentError(f"outage threshold must be in (0, 1), got {threshold}")
    return float(np.mean((est < threshold) != (truth < threshold)))


@dataclass(frozen=True)
class EvalReport:
    """One method on one (scene, sparsity, seed) instance. NaN metrics mark a
    method failure recorded in place of an aborted sweep."""

    method: str
    sparsity_percent: float
    seed: int
    psnr_db: float
    rmse: float
    outage_error: float
    runtime_ms: float

    def __post_init__(self):
        if self.failed:
            return
        if self.rmse < 0:
            raise InvalidArgumentError(f"rmse must be >= 0, got {self.rmse}")
        if not 0.0 <= self.outage_error <= 1.0:
            raise InvalidArgumentError(f"outage_error must be in [0, 1], got {self.outage_error}")

    @property
    def failed(self) -> bool:
        return math.isnan(self.rmse) or math.isnan(self.outage_error)


def zero_fill(d, mask: ObservationMask) -> np.ndarray:
    """Observed cells kept, everything else zero; the floor any method beats."""
    return project(as_tensor(d), mask)


def standard_methods(model=None) -> dict:
    """Name -> estimator registry for the CLI and the sweep.

    Estimators take (d_full, mask) and return a full tensor. `unroll` needs a
    trained model and appears only when one is supplied.
    """
    from .admm import solve_admm, solve_halrtc
    from .propagation import ldpl_interpolate, rbf_interpolate

    methods = {
        "zero": zero_fill,
        "ldpl": lambda d, m: ldpl_interpolate(d, m).values,
        "rbf": lambda d, m: rbf_interpolate(d, m).values,
        "halrtc": lambda d, m: solve_halrtc(d, m),
        "admm": lambda d, m: solve_admm(d, m).d_hat,
    }
    if model is not None:
        from .unrolled import infer

        methods["unroll"] = lambda d, m: infer(model, d, m)
    return methods


def mask_seed(seed: int, scene_index: int, sparsity_percent: float) -> int:
    """Stable per-(seed, scene, sparsity) mask seed, method-independent so all
    methods see identical observations on one instance."""
    ss = np.random.SeedSequence([int(seed), int(scene_index), int(round(sparsity_percent * 100))])
    return int(ss.generate_state(1)[0])


def sweep(methods: dict, scenes, sparsities, seeds,
          outage_threshold: float = DEFAULT_OUTAGE_THRESHOLD) -> list:
    """Full cross product of methods x scenes x sparsities x seeds.

    A method failure on one instance becomes a NaN row, not an abort.
    """
    scenes = [as_tensor(s) for s in scenes]
    reports = []
    for name, fn in methods.items():
        for sp in sparsities:
            if not 0.0 < sp <= 100.0:
                raise InvalidArgumentError(f"sparsity percent must be in (0, 100], got {sp}")
            for seed in seeds:
                for si, scene in enumerate(scenes):
                    h, w, _ = scene.shape
                    mask = sample_mask(h, w, sp, mask_seed(seed, si, sp))
                    t0 = time.perf_counter()
                    try:
                        est = fn(scene, mask)
                        ms = (time.perf_counter() - t0) * 1e3
                        reports.append(EvalReport(
                            method=name, sparsity_percent=float(sp), seed=int(seed),
                            psnr_db=psnr(est, scene), rmse=rmse(est, scene),
                            outage_error=outage_error(est, scene, outage_threshold),
                            runtime_ms=ms))
                    except RadioMapError:
                        ms = (time.perf_counter() - t0) * 1e3
                        reports.append(EvalReport(
                            method=name, sparsity_percent=float(sp), seed=int(seed),
                            psnr_db=math.nan, rmse=math.nan, outage_error=math.nan,
                            runtime_ms=ms))
    return reports
