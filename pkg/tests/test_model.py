import numpy as np
import pytest

from diffcore.adam import AdamState, adam_step
from diffcore.tensor import Tape, Tensor, backward
from model.dims import INDICATOR_NAMES, Dims
from model.networks import (
    LOGVAR_MAX,
    LOGVAR_MIN,
    decode,
    diffusion,
    drift,
    embed,
    encode,
    reparameterize,
)
from model.params import ModelParams
from objective.loss import elbo_loss
from training.trainer import forward_pass
from utility.errors import VNCheckpointError, VNShapeError, VNValueError


class TestDims:
    def test_defaults(self):
        dims = Dims()
        assert (dims.N, dims.n, dims.m, dims.T, dims.hidden) == (6, 4, 16, 168, 64)
        assert dims.N == len(INDICATOR_NAMES)
        assert dims.encoder_sizes == (22, 64, 64, 8)
        assert dims.decoder_sizes == (20, 64, 64, 12)

    def test_rejects_non_positive(self):
        with pytest.raises(VNValueError):
            Dims(n=0)


class TestParams:
    def test_default_parameter_count(self):
        params = ModelParams.initialize(Dims(), 30, seed=0)
        total = sum(t.size for _, t in params.named_parameters())
        # 480 embedding entries plus encoder 6152, drift 5764, diffusion 5764, decoder 6284
        assert total == 24444

    def test_initialize_is_deterministic(self):
        a = ModelParams.initialize(Dims(), 4, seed=3).arrays()
        b = ModelParams.initialize(Dims(), 4, seed=3).arrays()
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_embedding_init_bound(self):
        params = ModelParams.initialize(Dims(), 30, seed=1)
        assert np.max(np.abs(params.embeddings.data)) <= 1.0

    def test_copy_is_independent(self, small_params):
        clone = small_params.copy()
        clone.embeddings.data[0, 0] += 1.0
        assert clone.embeddings.data[0, 0] != small_params.embeddings.data[0, 0]

    def test_round_trip_through_dict(self, small_params):
        restored = ModelParams.from_dict(small_params.to_dict())
        a, b = small_params.arrays(), restored.arrays()
        assert a.keys() == b.keys()
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_load_rejects_wrong_shape(self, small_params):
        arrays = dict(small_params.arrays())
        arrays["embeddings"] = np.zeros((2, 2))
        with pytest.raises(VNCheckpointError):
            small_params.copy().load_arrays(arrays)


class TestNetworks:
    def test_shapes_with_batch_axis(self, small_params, small_dims):
        index = np.arange(3)
        e = embed(None, small_params, index)
        y0 = Tensor(np.zeros((3, small_dims.N)))
        head = encode(None, small_params, y0, e)
        assert head.mean.shape == (3, small_dims.n)
        z = reparameterize(None, head, np.ones((3, small_dims.n)))
        assert drift(None, small_params, z, e).shape == (3, small_dims.n)
        assert diffusion(None, small_params, z, e).shape == (3, small_dims.n)
        out = decode(None, small_params, z, e)
        assert out.mean.shape == out.logvar.shape == (3, small_dims.N)

    def test_diffusion_strictly_bounded(self, small_params, small_dims):
        e = embed(None, small_params, 0)
        z = Tensor(np.full(small_dims.n, 1e6))
        g = diffusion(None, small_params, z, e).data
        assert np.all(np.abs(g) < 1.0)

    def test_logvar_is_clamped(self, small_params, small_dims):
        e = embed(None, small_params, 1)
        z = Tensor(np.full(small_dims.n, 1e4))
        lv = decode(None, small_params, z, e).logvar.data
        assert np.all(lv >= LOGVAR_MIN) and np.all(lv <= LOGVAR_MAX)

    def test_zero_model(self):
        dims = Dims(N=6, n=4, m=16, T=20, hidden=8)
        params = ModelParams.zeros(dims, 2)
        e = embed(None, params, 1)
        z = Tensor(np.ones(dims.n))
        assert np.all(drift(None, params, z, e).data == 0.0)
        assert np.all(diffusion(None, params, z, e).data == 0.0)
        head = decode(None, params, z, e)
        assert np.all(head.mean.data == 0.0) and np.all(head.logvar.data == 0.0)

    def test_reparameterize_uses_std(self, small_params, small_dims):
        e = embed(None, small_params, 2)
        head = encode(None, small_params, Tensor(np.zeros(small_dims.N)), e)
        eps = np.full(small_dims.n, 2.0)
        z = reparameterize(None, head, eps).data
        assert np.allclose(z, head.mean.data + 2.0 * np.exp(0.5 * head.logvar.data))

    def test_embedding_separates_districts_with_equal_observations(self, small_params, small_dims):
        y0 = Tensor(np.full(small_dims.N, 0.3))
        first = encode(None, small_params, y0, embed(None, small_params, 0))
        second = encode(None, small_params, y0, embed(None, small_params, 1))
        assert not np.array_equal(first.mean.data, second.mean.data)
        assert not np.array_equal(first.logvar.data, second.logvar.data)

    def test_step_on_one_district_moves_only_its_row(self, small_dims):
        params = ModelParams.initialize(small_dims, 5, seed=2)
        before = params.embeddings.data.copy()
        gen = np.random.default_rng(0)
        y = gen.standard_normal((small_dims.T, 1, small_dims.N))
        eps = gen.standard_normal((1, small_dims.n))
        increments = np.sqrt(1.0 / small_dims.T) * gen.standard_normal((small_dims.T - 1, 1, small_dims.n))

        tape = Tape()
        fp = forward_pass(tape, params, y, np.array([3]), eps, increments)
        breakdown = elbo_loss(tape, y, fp.decoded, fp.head, 0.1)
        grads = backward(tape, breakdown.loss).collect(params.named_parameters())
        adam_step(params.arrays(), grads, AdamState.create(params.arrays(), lr=0.01))

        after = params.embeddings.data
        assert not np.array_equal(after[3], before[3])
        for row in (0, 1, 2, 4):
            assert np.array_equal(after[row], before[row])

    def test_wrong_width_is_a_shape_error(self, small_params):
        e = embed(None, small_params, 0)
        with pytest.raises(VNShapeError):
            encode(None, small_params, Tensor(np.zeros(5)), e)

    def test_non_finite_observation_rejected(self, small_params, small_dims):
        e = embed(None, small_params, 0)
        y0 = np.zeros(small_dims.N)
        y0[2] = np.nan
        with pytest.raises(VNValueError):
            encode(None, small_params, Tensor(y0), e)

    def test_unknown_district_rejected(self, small_params):
        with pytest.raises(VNValueError):
            embed(None, small_params, 3)
