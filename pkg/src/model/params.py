from typing import Dict, Iterator, Tuple

import numpy as np

from diffcore.layers import MLP
from diffcore.tensor import Tensor
from model.dims import Dims
from stochastic.rng import PURPOSE_INIT, RngStream
from utility.errors import VNCheckpointError, VNValueError

EMBEDDING_INIT_BOUND = 1.0


class ModelParams:
    """All learnable parameters: district embeddings and the four networks.

    The encoder and drift networks end linearly, the diffusion network ends in
    tanh and the decoder ends linearly; see ``model.networks``.
    """

    def __init__(
        self,
        dims: Dims,
        embeddings: Tensor,
        encoder: MLP,
        drift: MLP,
        diffusion: MLP,
        decoder: MLP,
    ) -> None:
        if embeddings.ndim != 2 or embeddings.shape[1] != dims.m:
            raise VNValueError(
                f"embedding table must have shape (D, {dims.m}), got {embeddings.shape}"
            )
        expected = {
            "encoder": (encoder, dims.encoder_sizes),
            "drift": (drift, dims.drift_sizes),
            "diffusion": (diffusion, dims.diffusion_sizes),
            "decoder": (decoder, dims.decoder_sizes),
        }
        for label, (net, sizes) in expected.items():
            if net.sizes != sizes:
                raise VNValueError(f"{label} sizes {net.sizes} do not match {sizes}")
        self.dims = dims
        self.embeddings = embeddings
        self.encoder = encoder
        self.drift = drift
        self.diffusion = diffusion
        self.decoder = decoder

    @classmethod
    def zeros(cls, dims: Dims, districts: int) -> "ModelParams":
        """The all-zero model: zero embeddings and zero weights everywhere."""
        if districts < 1:
            raise VNValueError(f"district count must be >= 1, got {districts}")
        return cls(
            dims,
            Tensor.parameter(np.zeros((districts, dims.m)), "embeddings"),
            MLP("encoder", dims.encoder_sizes),
            MLP("drift", dims.drift_sizes),
            MLP("diffusion", dims.diffusion_sizes),
            MLP("decoder", dims.decoder_sizes),
        )

    @classmethod
    def initialize(cls, dims: Dims, districts: int, seed: int) -> "ModelParams":
        """Random initialization.

        Layer weights and biases are uniform in +-sqrt(1/fan_in); embeddings are
        uniform in +-EMBEDDING_INIT_BOUND.
        """
        if districts < 1:
            raise VNValueError(f"district count must be >= 1, got {districts}")
        gen = RngStream.for_purpose(seed, PURPOSE_INIT).generator()
        embeddings = Tensor.parameter(
            gen.uniform(-EMBEDDING_INIT_BOUND, EMBEDDING_INIT_BOUND, (districts, dims.m)),
            "embeddings",
        )
        return cls(
            dims,
            embeddings,
            MLP.init_uniform("encoder", dims.encoder_sizes, gen),
            MLP.init_uniform("drift", dims.drift_sizes, gen),
            MLP.init_uniform("diffusion", dims.diffusion_sizes, gen),
            MLP.init_uniform("decoder", dims.decoder_sizes, gen),
        )

    @property
    def district_count(self) -> int:
        return self.embeddings.shape[0]

    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        yield "embeddings", self.embeddings
        for net in (self.encoder, self.drift, self.diffusion, self.decoder):
            yield from net.parameters().items()

    def arrays(self) -> Dict[str, np.ndarray]:
        """Parameter arrays keyed by name; these are the live arrays, not copies."""
        return {name: tensor.data for name, tensor in self.named_parameters()}

    def is_finite(self) -> bool:
        return all(tensor.is_finite() for _, tensor in self.named_parameters())

    def copy(self) -> "ModelParams":
        clone = ModelParams.zeros(self.dims, self.district_count)
        clone.load_arrays(self.arrays())
        return clone

    def load_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        """Overwrite every parameter from ``arrays`` (names and shapes must match)."""
        own = dict(self.named_parameters())
        if set(own) != set(arrays):
            missing = sorted(set(own) - set(arrays))
            extra = sorted(set(arrays) - set(own))
            raise VNCheckpointError(
                f"parameter names differ (missing {missing}, unexpected {extra})"
            )
        for name, tensor in own.items():
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != tensor.shape:
                raise VNCheckpointError(
                    f"parameter {name} has shape {value.shape}, expected {tensor.shape}"
                )
            tensor.data[...] = value

    def to_dict(self) -> dict:
        return {
            "dims": self.dims.to_dict(),
            "districts": self.district_count,
            "tensors": {
                name: {"shape": list(t.shape), "values": [float(x) for x in t.data.ravel()]}
                for name, t in self.named_parameters()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        params = cls.zeros(Dims.from_dict(data["dims"]), int(data["districts"]))
        params.load_arrays(
            {
                name: np.array(entry["values"], dtype=np.float64).reshape(entry["shape"])
                for name, entry in data["tensors"].items()
            }
        )
        return params
