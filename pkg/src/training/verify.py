import dataclasses

import numpy as np

from diffcore.gradcheck import GradCheckReport, check_gradients
from diffcore.tensor import Tape, backward
from model.params import ModelParams
from objective.loss import elbo_loss
from stochastic.rng import PURPOSE_VERIFY, RngStream
from training.trainer import forward_pass
from utility.errors import VNValueError

GRADCHECK_DISTRICTS = 3
GRADCHECK_STEPS = 20
GRADCHECK_COORDINATES = 200
GRADCHECK_TOLERANCE = 1e-3
GRADCHECK_BETA = 0.1


def reduced_params(params: ModelParams, districts: int, steps: int) -> ModelParams:
    """Copy of ``params`` on a shorter grid with the first ``districts`` embeddings."""
    if districts < 1 or steps < 2:
        raise VNValueError(f"reduced problem needs districts >= 1 and steps >= 2, got {districts}, {steps}")
    count = min(districts, params.district_count)
    small = ModelParams.zeros(dataclasses.replace(params.dims, T=steps), count)
    arrays = dict(params.arrays())
    arrays["embeddings"] = arrays["embeddings"][:count]
    small.load_arrays(arrays)
    return small


def model_gradient_check(
    params: ModelParams,
    seed: int = 0,
    coordinates: int = GRADCHECK_COORDINATES,
    districts: int = GRADCHECK_DISTRICTS,
    steps: int = GRADCHECK_STEPS,
    beta: float = GRADCHECK_BETA,
) -> GradCheckReport:
    """Compare ELBO gradients from the tape with central differences.

    Runs on a reduced copy of the model (``districts`` districts, ``steps``
    months) with random observations; posterior noise and increments are drawn
    once and held fixed for every loss evaluation.
    """
    small = reduced_params(params, districts, steps)
    count = small.district_count
    N, n = small.dims.N, small.dims.n
    gen = RngStream.for_purpose(seed, PURPOSE_VERIFY, 0, 0, 1).generator()
    y = gen.standard_normal((steps, count, N))
    eps = gen.standard_normal((count, n))
    increments = np.sqrt(1.0 / steps) * gen.standard_normal((steps - 1, count, n))
    index = np.arange(count)

    def loss_value() -> float:
        fp = forward_pass(None, small, y, index, eps, increments)
        return elbo_loss(None, y, fp.decoded, fp.head, beta).total

    tape = Tape()
    fp = forward_pass(tape, small, y, index, eps, increments)
    breakdown = elbo_loss(tape, y, fp.decoded, fp.head, beta)
    assert breakdown.loss is not None
    analytic = backward(tape, breakdown.loss).collect(small.named_parameters())
    return check_gradients(loss_value, small.arrays(), analytic, coordinates, gen)
