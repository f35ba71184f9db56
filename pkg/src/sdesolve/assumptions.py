from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from diffcore.tensor import Tensor
from model.networks import diffusion, drift, encode, reparameterize
from model.params import ModelParams
from stochastic.rng import PURPOSE_VERIFY, RngStream
from utility.errors import VNValueError

SAMPLE_RADIUS = 3.0
PAIR_OFFSET = 1e-3


@dataclass
class AssumptionReport:
    """Empirical constants behind the existence and uniqueness conditions.

    These are maxima over sampled points, not certified global bounds.
    """

    lipschitz_estimate: float
    growth_constant: float
    diffusion_growth: float
    embedding_bound: float
    sample_count: int
    initial_second_moment: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _row_norms(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(x * x, axis=-1))


def verify_assumptions(
    params: ModelParams,
    districts: Sequence[int],
    sample_count: int,
    seed: int = 0,
    y0: Optional[np.ndarray] = None,
) -> AssumptionReport:
    """Estimate Lipschitz, linear-growth and embedding-bound constants.

    Latent points are drawn uniformly from [-SAMPLE_RADIUS, SAMPLE_RADIUS]^n;
    each is paired with a point PAIR_OFFSET away in a random direction, and the
    district of each sample is drawn from ``districts``.

    Args:
        params: Model parameters
        districts: District indices to sample embeddings from
        sample_count: Number of sampled points (and pairs), >= 2
        seed: Seed of the sampling stream
        y0: Optional first observations, shape (D, N); enables the estimate of
            E||z_0||^2 under the encoder posterior

    Returns:
        AssumptionReport
    """
    if sample_count < 2:
        raise VNValueError(f"verify_assumptions: sample_count must be >= 2, got {sample_count}")
    if len(districts) == 0:
        raise VNValueError("verify_assumptions: no districts given")
    n = params.dims.n
    gen = RngStream.for_purpose(seed, PURPOSE_VERIFY).generator()
    picks = gen.choice(np.asarray(districts, dtype=np.int64), size=sample_count)
    e = params.embeddings.data[picks]
    z1 = gen.uniform(-SAMPLE_RADIUS, SAMPLE_RADIUS, (sample_count, n))
    direction = gen.standard_normal((sample_count, n))
    direction /= _row_norms(direction)[:, None]
    z2 = z1 + PAIR_OFFSET * direction

    e_t = Tensor.constant(e)
    f1 = drift(None, params, Tensor.constant(z1), e_t).data
    f2 = drift(None, params, Tensor.constant(z2), e_t).data
    g1 = diffusion(None, params, Tensor.constant(z1), e_t).data
    g2 = diffusion(None, params, Tensor.constant(z2), e_t).data

    ratio = (_row_norms(f1 - f2) + _row_norms(g1 - g2)) / _row_norms(z1 - z2)
    # growth is measured against 1 + |z|^2 + |e|^2
    scale = 1.0 + np.sum(z1 * z1, axis=-1) + np.sum(e * e, axis=-1)
    f_sq = np.sum(f1 * f1, axis=-1)
    g_sq = np.sum(g1 * g1, axis=-1)

    second_moment: Optional[float] = None
    if y0 is not None:
        y0 = np.asarray(y0, dtype=np.float64)
        head = encode(None, params, Tensor.constant(y0[picks]), e_t)
        eps = gen.standard_normal((sample_count, n))
        z0 = reparameterize(None, head, eps).data
        second_moment = float(np.mean(np.sum(z0 * z0, axis=-1)))

    return AssumptionReport(
        lipschitz_estimate=float(np.max(ratio)),
        growth_constant=float(np.max((f_sq + g_sq) / scale)),
        diffusion_growth=float(np.max(g_sq / scale)),
        embedding_bound=float(np.max(_row_norms(params.embeddings.data))),
        sample_count=sample_count,
        initial_second_moment=second_moment,
    )
