import pytest

import numpy as np

from strider.autodiff import CheckpointError, Tensor, check_gradients, tsum
from strider.nn import (
    MLP,
    EncoderBlock,
    LayerNorm,
    Linear,
    LstmCell,
    MultiHeadSelfAttention,
    TransformerEncoder,
    checksum_of,
)
from strider.recognizer import Classifier

CONFIGS = range(5)


class TestGradientSuite:
    """Finite-difference checks of every block over several random configurations."""

    @pytest.mark.parametrize("seed", CONFIGS)
    def test_linear(self, seed):
        rng = np.random.default_rng(seed)
        layer = Linear(int(rng.integers(2, 7)), int(rng.integers(2, 7)), rng)
        x = Tensor(rng.normal(size=(3, layer.in_dim)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, layer.out_dim)))
        err = check_gradients(lambda: tsum(layer(x) * w), [x, *layer.parameters()])
        assert err < 1e-4

    @pytest.mark.parametrize("seed", CONFIGS)
    def test_mlp(self, seed):
        rng = np.random.default_rng(seed)
        act = ("relu", "tanh")[seed % 2]
        mlp = MLP([4, 6, 5, 3], rng, activation=act)
        x = Tensor(rng.normal(size=4), requires_grad=True)
        w = Tensor(rng.normal(size=3))
        assert check_gradients(lambda: tsum(mlp(x) * w), [x, *mlp.parameters()]) < 1e-4

    @pytest.mark.parametrize("seed", CONFIGS)
    def test_lstm_cell(self, seed):
        rng = np.random.default_rng(seed)
        cell = LstmCell(int(rng.integers(2, 6)), rng, hidden_dim=int(rng.integers(2, 6)))
        xs = [Tensor(rng.normal(size=cell.input_dim), requires_grad=True) for _ in range(3)]
        w = Tensor(rng.normal(size=cell.hidden_dim))

        def fnc():
            h, c = cell.zero_state()
            for x in xs:
                h, c = cell(x, h, c)
            return tsum(h * w) + tsum(c)

        assert check_gradients(fnc, [*xs, *cell.parameters()]) < 1e-4

    @pytest.mark.parametrize("seed", CONFIGS)
    def test_mhsa(self, seed):
        rng = np.random.default_rng(seed)
        heads = (1, 2)[seed % 2]
        block = MultiHeadSelfAttention(rng, dim=4, heads=heads)
        x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 4)))
        assert check_gradients(lambda: tsum(block(x) * w), [x, *block.parameters()]) < 1e-4

    @pytest.mark.parametrize("seed", CONFIGS)
    def test_encoder_block(self, seed):
        rng = np.random.default_rng(seed)
        block = EncoderBlock(rng, dim=4, heads=2, ff_dim=6)
        x = Tensor(rng.normal(size=(int(rng.integers(1, 4)), 4)), requires_grad=True)
        w = Tensor(rng.normal(size=x.shape))
        err = check_gradients(
            lambda: tsum(block(x) * w), [x, *block.parameters()], n_samples=12, seed=seed
        )
        assert err < 1e-4

    @pytest.mark.parametrize("seed", CONFIGS)
    def test_classifier(self, seed):
        rng = np.random.default_rng(seed)
        cls = Classifier(5, 3, rng)
        g = Tensor(rng.normal(size=5), requires_grad=True)
        w = Tensor(rng.normal(size=3))
        assert check_gradients(lambda: tsum(cls(g) * w), [g, *cls.parameters()]) < 1e-4


class TestLinear:
    def test_flops(self):
        assert Linear(1024, 256, np.random.default_rng(0)).flops() == 2 * 1024 * 256

    def test_init_range(self):
        layer = Linear(16, 4, np.random.default_rng(0))
        assert np.all(np.abs(layer.weight.data) <= 0.25)


class TestMLP:
    def test_needs_two_widths(self):
        with pytest.raises(ValueError):
            MLP([4], np.random.default_rng(0))

    def test_bad_activation(self):
        with pytest.raises(ValueError):
            MLP([4, 2], np.random.default_rng(0), activation="gelu")

    def test_flops(self):
        mlp = MLP([4, 8, 2], np.random.default_rng(0))
        assert mlp.flops() == 2 * 4 * 8 + 2 * 8 * 2 + 8


class TestLstm:
    def test_flops(self):
        cell = LstmCell(1024, np.random.default_rng(0), hidden_dim=256)
        assert cell.flops() == 8 * (1024 + 256) * 256 + 24 * 256

    def test_state_shapes(self):
        cell = LstmCell(3, np.random.default_rng(0), hidden_dim=5)
        h, c = cell(Tensor(np.ones(3)), *cell.zero_state())
        assert h.shape == c.shape == (5,)
        assert np.all(np.abs(h.data) < 1)


class TestAttention:
    def test_heads_divide_dim(self):
        with pytest.raises(ValueError):
            MultiHeadSelfAttention(np.random.default_rng(0), dim=6, heads=4)

    def test_attention_rows_sum_to_one(self):
        block = MultiHeadSelfAttention(np.random.default_rng(0), dim=8, heads=2)
        block(Tensor(np.random.default_rng(1).normal(size=(3, 8))))
        assert block.last_attention.shape == (2, 3, 3)
        assert np.allclose(block.last_attention.sum(axis=-1), 1.0)

    def test_permutation_equivariant_without_positions(self):
        rng = np.random.default_rng(0)
        enc = TransformerEncoder(rng, dim=8, heads=2, layers=2, ff_dim=8, position_embedding=False)
        x = rng.normal(size=(3, 8))
        perm = [2, 0, 1]
        assert np.allclose(enc(Tensor(x)).data[perm], enc(Tensor(x[perm])).data)

    def test_positions_break_symmetry(self):
        rng = np.random.default_rng(0)
        enc = TransformerEncoder(rng, dim=8, heads=2, layers=1, ff_dim=8)
        x = rng.normal(size=(3, 8))
        perm = [2, 0, 1]
        assert not np.allclose(enc(Tensor(x)).data[perm], enc(Tensor(x[perm])).data)

    def test_too_many_tokens(self):
        enc = TransformerEncoder(np.random.default_rng(0), dim=4, heads=2, layers=1, max_tokens=2)
        with pytest.raises(ValueError):
            enc(Tensor(np.ones((3, 4))))

    def test_batch_rows_match_single_sequences(self):
        rng = np.random.default_rng(0)
        enc = TransformerEncoder(rng, dim=8, heads=2, layers=2, ff_dim=8)
        x = rng.normal(size=(4, 3, 8))
        out = enc(Tensor(x)).data
        assert out.shape == (4, 3, 8)
        for b in range(4):
            assert np.allclose(out[b], enc(Tensor(x[b])).data)

    def test_batch_attention_shape(self):
        block = MultiHeadSelfAttention(np.random.default_rng(0), dim=8, heads=2)
        block(Tensor(np.random.default_rng(1).normal(size=(5, 3, 8))))
        assert block.last_attention.shape == (5, 2, 3, 3)
        assert np.allclose(block.last_attention.sum(axis=-1), 1.0)


class TestBlock:
    @pytest.fixture(scope="class")
    def mlp(self):
        return MLP([3, 4, 2], np.random.default_rng(0))

    def test_named_parameters(self, mlp):
        assert list(mlp.named_parameters()) == [
            "layers.0.weight",
            "layers.0.bias",
            "layers.1.weight",
            "layers.1.bias",
        ]
        assert mlp.n_parameters == 3 * 4 + 4 + 4 * 2 + 2

    def test_state_dict_copies(self, mlp):
        state = mlp.state_dict()
        state["layers.0.bias"][:] = 100.0
        assert not np.allclose(mlp.layers[0].bias.data, 100.0)

    def test_load_state_dict(self, mlp):
        other = MLP([3, 4, 2], np.random.default_rng(1))
        assert other.checksum() != mlp.checksum()
        other.load_state_dict(mlp.state_dict())
        assert other.checksum() == mlp.checksum()

    def test_load_missing(self, mlp):
        state = mlp.state_dict()
        del state["layers.1.bias"]
        with pytest.raises(CheckpointError):
            MLP([3, 4, 2], np.random.default_rng(1)).load_state_dict(state)

    def test_load_wrong_shape(self, mlp):
        with pytest.raises(CheckpointError):
            MLP([3, 5, 2], np.random.default_rng(1)).load_state_dict(mlp.state_dict())

    def test_layer_norm_params(self):
        ln = LayerNorm(4)
        assert ln.flops(2) == 40
        assert np.allclose(ln.gain.data, 1.0)

    def test_checksum_sensitive(self):
        params = MLP([3, 4, 2], np.random.default_rng(0)).named_parameters()
        before = checksum_of(params)
        params["layers.0.weight"].data[0, 0] += 1e-12
        assert checksum_of(params) != before
