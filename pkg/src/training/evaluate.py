"""Inference with a trained model: per-district NLL scores and predictive bands."""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from data.normalize import NormStats, denormalize, denormalize_std
from model.params import ModelParams
from objective.loss import LossBreakdown, gaussian_nll, kl_gaussian
from sdesolve.integrator import NoiseSource, TimeGrid
from stochastic.rng import PURPOSE_EVAL, PURPOSE_PREDICT
from training.trainer import forward_pass, posterior_noise
from utility.errors import VNShapeError, VNValueError

BAND_WIDTH = 2.0

# Epoch field of the inference streams: posterior noise and increments differ
_EPS_EPOCH = 0
_INCREMENT_EPOCH = 1


@dataclass
class DistrictScores:
    """Per-district NLL and KL under one or more posterior samples."""

    districts: List[str]
    nll: np.ndarray
    kl: np.ndarray
    beta: float

    def breakdown(self) -> LossBreakdown:
        return LossBreakdown.assemble(float(np.mean(self.nll)), float(np.mean(self.kl)), self.beta)

    def ranked(self) -> List[Tuple[str, float]]:
        """(district, nll) sorted ascending by NLL; ties keep district order."""
        order = np.argsort(self.nll, kind="stable")
        return [(self.districts[k], float(self.nll[k])) for k in order]


@dataclass
class PredictionBands:
    """Predictive mean and standard deviation of one district, in percent.

    All arrays have shape (T, N).
    """

    observed: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    @property
    def lower(self) -> np.ndarray:
        return self.mean - BAND_WIDTH * self.std

    @property
    def upper(self) -> np.ndarray:
        return self.mean + BAND_WIDTH * self.std

    def inside(self) -> np.ndarray:
        return (self.observed >= self.lower) & (self.observed <= self.upper)

    def coverage(self) -> float:
        return float(np.mean(self.inside()))

    def coverage_by_indicator(self) -> np.ndarray:
        return np.mean(self.inside(), axis=0)


def _check_samples(samples: int) -> None:
    if samples < 1:
        raise VNValueError(f"samples must be >= 1, got {samples}")


def evaluate_districts(
    params: ModelParams,
    y: np.ndarray,
    districts: List[str],
    seed: int,
    beta: float,
    samples: int = 1,
) -> DistrictScores:
    """Gaussian NLL of every district, averaged over ``samples`` latent paths.

    Args:
        params: Trained parameters
        y: Normalized panel, (D, T, N)
        districts: District names in row order
        seed: Seed of the inference streams
        beta: KL weight used for the total
        samples: Latent paths per district

    Returns:
        DistrictScores in district order
    """
    _check_samples(samples)
    if y.ndim != 3 or y.shape[0] != len(districts) or y.shape[0] != params.district_count:
        raise VNShapeError("evaluate_districts", y.shape, (params.district_count, len(districts)))
    index = np.arange(y.shape[0])
    y_tbn = np.transpose(np.asarray(y, dtype=np.float64), (1, 0, 2))
    grid = TimeGrid(y_tbn.shape[0])
    n = params.dims.n

    nll = np.zeros(len(index))
    kl = np.zeros(len(index))
    for sample in range(samples):
        eps = posterior_noise(seed, PURPOSE_EVAL, _EPS_EPOCH, index, sample, n)
        noise = NoiseSource.for_districts(
            seed, _INCREMENT_EPOCH, index, grid, n, sample, purpose=PURPOSE_EVAL
        )
        fp = forward_pass(None, params, y_tbn, index, eps, noise.draw())
        nll = nll + gaussian_nll(None, y_tbn, fp.decoded.mean, fp.decoded.logvar).data
        kl = kl + kl_gaussian(None, fp.head).data
    return DistrictScores(list(districts), nll / samples, kl / samples, float(beta))


def predict_district(
    params: ModelParams,
    observed: np.ndarray,
    stats: NormStats,
    district: int,
    seed: int,
    samples: int = 1,
) -> PredictionBands:
    """Predictive bands of one district from ``samples`` latent paths.

    The samples are combined as an equal-weight Gaussian mixture: the mean is
    the average decoder mean, the variance the average decoder variance plus
    the spread of the decoder means.

    Args:
        params: Trained parameters
        observed: Raw percentages of the district, (T, N)
        stats: Normalization statistics of the panel
        district: District index
        seed: Seed of the prediction streams
        samples: Latent paths

    Returns:
        PredictionBands in percent units
    """
    _check_samples(samples)
    if not 0 <= district < params.district_count:
        raise VNValueError(f"district index {district} outside [0, {params.district_count})")
    observed = np.asarray(observed, dtype=np.float64)
    y_norm = (observed - np.asarray(stats.mean)) / np.asarray(stats.std)
    y_batch = y_norm[:, None, :]
    index = np.array([district])
    grid = TimeGrid(observed.shape[0])
    n = params.dims.n

    means = []
    variances = []
    for sample in range(samples):
        eps = posterior_noise(seed, PURPOSE_PREDICT, _EPS_EPOCH, index, sample, n)
        noise = NoiseSource.for_districts(
            seed, _INCREMENT_EPOCH, index, grid, n, sample, purpose=PURPOSE_PREDICT
        )
        fp = forward_pass(None, params, y_batch, index, eps, noise.draw())
        means.append(fp.decoded.mean.data[:, 0, :])
        variances.append(np.exp(fp.decoded.logvar.data[:, 0, :]))

    stacked = np.stack(means, axis=0)
    mix_mean = stacked.mean(axis=0)
    mix_var = np.stack(variances, axis=0).mean(axis=0) + np.mean((stacked - mix_mean) ** 2, axis=0)
    return PredictionBands(
        observed,
        denormalize(mix_mean, stats),
        denormalize_std(np.sqrt(mix_var), stats),
    )
