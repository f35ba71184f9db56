"""End-to-end training: encode y_0, sample z_0, integrate the latent SDE, decode
every month, form the negative ELBO, backpropagate and take an Adam step.

The districts of a batch share one tape along a leading batch axis. Every
district still draws its posterior noise and Brownian increments from its own
(seed, epoch, district, sample) streams.
"""

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from diffcore import ops
from diffcore.adam import AdamState, adam_step
from diffcore.tensor import Tape, Tensor, backward
from model.networks import GaussianHead, decode, embed, encode, reparameterize
from model.params import ModelParams
from objective.loss import LossBreakdown, district_mean, gaussian_nll, kl_gaussian
from objective.schedule import beta_at
from sdesolve.integrator import LatentPath, NoiseSource, TimeGrid, integrate
from sdesolve.replay import backward_replay
from stochastic.rng import PURPOSE_POSTERIOR_EPS, PURPOSE_SHUFFLE, RngStream
from training.config import TrainConfig
from utility.errors import (
    VNIntegrationError,
    VNNumericalError,
    VNShapeError,
    VNTrainingError,
    VNValueError,
)
from utility.logger import Logger

Grads = Dict[str, np.ndarray]
CheckpointHook = Callable[[int, ModelParams, AdamState, List["EpochLog"]], None]


@dataclass
class EpochLog:
    """District-mean losses of one epoch; total = nll + beta * kl."""

    epoch: int
    nll: float
    kl: float
    beta: float
    total: float
    wall_time: float = field(default=0.0, compare=False)
    grad_norm: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "nll": self.nll,
            "kl": self.kl,
            "beta": self.beta,
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EpochLog":
        return cls(
            int(data["epoch"]),
            float(data["nll"]),
            float(data["kl"]),
            float(data["beta"]),
            float(data["total"]),
        )

    def describe(self) -> str:
        return (
            f"epoch {self.epoch}: nll={self.nll:.6f} kl={self.kl:.6f} beta={self.beta:.4f} "
            f"total={self.total:.6f} grad_norm={self.grad_norm:.4f} time={self.wall_time:.2f}s"
        )


@dataclass
class ForwardPass:
    head: GaussianHead
    z0: Tensor
    path: LatentPath
    decoded: GaussianHead


@dataclass
class FitResult:
    params: ModelParams
    adam: AdamState
    history: List[EpochLog]


def posterior_noise(
    seed: int, purpose: int, epoch: int, districts: np.ndarray, sample: int, n: int
) -> np.ndarray:
    """eps ~ N(0, I) of shape (B, n), one stream per district."""
    rows = [
        RngStream.for_purpose(seed, purpose, epoch, int(d), sample).generator().standard_normal(n)
        for d in districts
    ]
    return np.stack(rows, axis=0)


def decode_path(
    tape: Optional[Tape], params: ModelParams, states: Tensor, e_d: Tensor
) -> GaussianHead:
    """Decode stacked states (T, B, n) with the embedding repeated over time."""
    return decode(tape, params, states, ops.expand(tape, e_d, states.shape[0]))


def forward_pass(
    tape: Optional[Tape],
    params: ModelParams,
    y_batch: np.ndarray,
    districts: np.ndarray,
    eps: np.ndarray,
    increments: np.ndarray,
) -> ForwardPass:
    """Encoder, solver and decoder for a batch.

    Args:
        tape: Tape to record on, or None
        params: Model parameters
        y_batch: Normalized observations, (T, B, N)
        districts: District indices, (B,)
        eps: Posterior noise, (B, n)
        increments: Brownian increments, (T - 1, B, n)

    Returns:
        ForwardPass with the posterior head, z_0, latent path and decoder heads
    """
    if y_batch.ndim != 3 or y_batch.shape[1] != len(districts):
        raise VNShapeError("forward_pass", y_batch.shape, (len(districts),))
    grid = TimeGrid(y_batch.shape[0])
    e_d = embed(tape, params, districts)
    head = encode(tape, params, Tensor.constant(y_batch[0]), e_d)
    z0 = reparameterize(tape, head, eps)
    path = integrate(tape, params, z0, districts, grid, increments)
    decoded = decode_path(tape, params, ops.stack(tape, path.states), e_d)
    return ForwardPass(head, z0, path, decoded)


def _check_loss(
    epoch: int, districts: np.ndarray, nll: np.ndarray, kl: np.ndarray
) -> None:
    bad = ~(np.isfinite(nll) & np.isfinite(kl))
    if bad.any():
        district = int(districts[int(np.flatnonzero(bad)[0])])
        raise VNTrainingError(epoch, district, "non-finite loss")


def _direct_gradients(
    params: ModelParams,
    y_batch: np.ndarray,
    districts: np.ndarray,
    eps: np.ndarray,
    noise: NoiseSource,
    beta: float,
    epoch: int,
) -> Tuple[Grads, np.ndarray, np.ndarray]:
    tape = Tape()
    fp = forward_pass(tape, params, y_batch, districts, eps, noise.draw())
    nll = gaussian_nll(tape, y_batch, fp.decoded.mean, fp.decoded.logvar)
    kl = kl_gaussian(tape, fp.head)
    _check_loss(epoch, districts, nll.data, kl.data)
    loss = ops.add(
        tape, district_mean(tape, nll), ops.scale(tape, district_mean(tape, kl), beta)
    )
    grads = backward(tape, loss).collect(params.named_parameters())
    return grads, nll.data, kl.data


def _replay_gradients(
    params: ModelParams,
    y_batch: np.ndarray,
    districts: np.ndarray,
    eps: np.ndarray,
    noise: NoiseSource,
    beta: float,
    epoch: int,
    segment_length: int,
) -> Tuple[Grads, np.ndarray, np.ndarray]:
    """Same gradients as the direct mode without keeping the solver's tape.

    The encoder and decoder get their own tapes; the solver's contribution and
    dL/dz_0 come from ``backward_replay``.
    """
    grid = TimeGrid(y_batch.shape[0])
    enc_tape = Tape()
    e_enc = embed(enc_tape, params, districts)
    head = encode(enc_tape, params, Tensor.constant(y_batch[0]), e_enc)
    z0 = reparameterize(enc_tape, head, eps)
    kl = kl_gaussian(enc_tape, head)

    path = integrate(None, params, Tensor.constant(z0.data), districts, grid, noise.draw())

    dec_tape = Tape()
    states = Tensor(path.values, requires_grad=True)
    decoded = decode_path(dec_tape, params, states, embed(dec_tape, params, districts))
    nll = gaussian_nll(dec_tape, y_batch, decoded.mean, decoded.logvar)
    _check_loss(epoch, districts, nll.data, kl.data)
    dec_grads = backward(dec_tape, district_mean(dec_tape, nll))

    solver = backward_replay(
        params,
        z0.data,
        districts,
        grid,
        noise,
        dec_grads.of(states),
        path.checksum,
        segment_length,
    )
    surrogate = ops.add(
        enc_tape,
        ops.dot_const(enc_tape, z0, solver.z0_grad),
        ops.scale(enc_tape, district_mean(enc_tape, kl), beta),
    )
    enc_grads = backward(enc_tape, surrogate)

    grads = {
        name: dec_grads.of(tensor) + solver.grads[name] + enc_grads.of(tensor)
        for name, tensor in params.named_parameters()
    }
    return grads, nll.data, kl.data


def clip_gradients(grads: Grads, max_norm: float) -> float:
    """Rescale ``grads`` in place to global norm ``max_norm``; 0 disables.

    Returns:
        The global norm before clipping
    """
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * factor
    return norm


def district_batches(districts: int, config: TrainConfig, epoch: int) -> List[np.ndarray]:
    """Full batch, or a (seed, epoch)-shuffled split into ``batch_size`` chunks."""
    if config.batch_size == 0 or config.batch_size >= districts:
        return [np.arange(districts)]
    order = RngStream.for_purpose(config.seed, PURPOSE_SHUFFLE, epoch).generator().permutation(districts)
    return [order[k : k + config.batch_size] for k in range(0, districts, config.batch_size)]


def train_epoch(
    params: ModelParams,
    adam: AdamState,
    y: np.ndarray,
    config: TrainConfig,
    epoch: int,
) -> EpochLog:
    """One pass over all districts; ``params`` and ``adam`` are updated in place.

    Args:
        params: Model parameters
        adam: Optimizer state
        y: Normalized panel, (D, T, N)
        config: Training configuration
        epoch: Zero-based epoch number; selects beta and the random streams

    Returns:
        EpochLog with district means of NLL and KL

    Raises:
        VNTrainingError: If a loss or gradient is non-finite or the solver diverges
    """
    start = time.perf_counter()
    beta = beta_at(config.schedule, epoch)
    district_count = y.shape[0]
    if district_count != params.district_count:
        raise VNShapeError("train_epoch", (params.district_count,), (district_count,))
    y_tbn = np.transpose(np.asarray(y, dtype=np.float64), (1, 0, 2))
    grid = TimeGrid(y_tbn.shape[0])
    n = params.dims.n

    nll_sum = 0.0
    kl_sum = 0.0
    grad_norm = 0.0
    for districts in district_batches(district_count, config, epoch):
        y_batch = y_tbn[:, districts, :]
        grads: Grads = {name: np.zeros_like(t.data) for name, t in params.named_parameters()}
        nll_batch = np.zeros(len(districts))
        kl_batch = np.zeros(len(districts))
        for sample in range(config.mc_samples):
            eps = posterior_noise(config.seed, PURPOSE_POSTERIOR_EPS, epoch, districts, sample, n)
            noise = NoiseSource.for_districts(config.seed, epoch, districts, grid, n, sample)
            try:
                if config.backward_mode == "replay":
                    sample_grads, nll, kl = _replay_gradients(
                        params, y_batch, districts, eps, noise, beta, epoch, config.segment_length
                    )
                else:
                    sample_grads, nll, kl = _direct_gradients(
                        params, y_batch, districts, eps, noise, beta, epoch
                    )
            except VNIntegrationError as e:
                # Map the failing batch row back to its district id
                district = int(districts[e.rows[0]]) if e.rows else None
                raise VNTrainingError(epoch, district, str(e))
            for name in grads:
                grads[name] = grads[name] + sample_grads[name]
            nll_batch = nll_batch + nll
            kl_batch = kl_batch + kl
        if config.mc_samples > 1:
            grads = {name: g / config.mc_samples for name, g in grads.items()}
            nll_batch = nll_batch / config.mc_samples
            kl_batch = kl_batch / config.mc_samples

        grad_norm = max(grad_norm, clip_gradients(grads, config.grad_clip))
        try:
            adam_step(params.arrays(), grads, adam)
        except VNNumericalError as e:
            raise VNTrainingError(epoch, None, str(e))
        nll_sum += float(np.sum(nll_batch))
        kl_sum += float(np.sum(kl_batch))

    breakdown = LossBreakdown.assemble(nll_sum / district_count, kl_sum / district_count, beta)
    return EpochLog(
        epoch,
        breakdown.nll,
        breakdown.kl,
        breakdown.beta,
        breakdown.total,
        time.perf_counter() - start,
        grad_norm,
    )


def fit(
    params: ModelParams,
    y: np.ndarray,
    config: TrainConfig,
    adam: Optional[AdamState] = None,
    start_epoch: int = 0,
    history: Optional[List[EpochLog]] = None,
    logger: Optional[Logger] = None,
    on_checkpoint: Optional[CheckpointHook] = None,
    progress: bool = False,
) -> FitResult:
    """Run epochs ``start_epoch .. config.epochs - 1`` in order.

    ``on_checkpoint`` receives the number of completed epochs every
    ``config.checkpoint_every`` epochs and after the last one.
    """
    if not 0 <= start_epoch <= config.epochs:
        raise VNValueError(f"start_epoch {start_epoch} outside [0, {config.epochs}]")
    if adam is None:
        adam = AdamState.create(params.arrays(), config.lr)
    history = list(history or [])

    pbar = tqdm(total=config.epochs - start_epoch, desc="Training", disable=not progress)
    for epoch in range(start_epoch, config.epochs):
        log = train_epoch(params, adam, y, config, epoch)
        history.append(log)
        if logger is not None:
            logger.print_log(log.describe())
        pbar.set_postfix(total=f"{log.total:.4f}")
        pbar.update(1)
        done = epoch + 1
        if on_checkpoint is not None and (done % config.checkpoint_every == 0 or done == config.epochs):
            on_checkpoint(done, params, adam, history)
    pbar.close()
    return FitResult(params, adam, history)
