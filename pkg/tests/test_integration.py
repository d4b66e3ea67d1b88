import pytest

import numpy as np

from strider.autodiff import ShapeError, Tensor
from strider.data import VideoSample
from strider.metrics import RunTrace
from strider.recognizer import (
    Classifier,
    MlpEmbedder,
    Passthrough,
    Recognizer,
    classify,
    encode_frame,
    init_locators,
    integrate,
    intermediate_predict,
    observe,
    predict_proba,
)
from strider.recognizer.integration import Forward, MaxPool, MeanPool, Transformer
from strider.recognizer.temporal import LSTM, SumPool, select_state
from strider.recognizer.temporal import MaxPool as TMaxPool
from strider.recognizer.temporal import MeanPool as TMeanPool


@pytest.fixture(scope="module")
def units():
    rng = np.random.default_rng(0)
    return [Tensor(rng.normal(size=4)) for _ in range(3)]


class TestPoolingIntegrators:
    def test_mean(self, units):
        out = MeanPool(4, 3)(units)
        assert np.allclose(out.data, np.mean([u.data for u in units], axis=0))

    def test_max(self, units):
        out = MaxPool(4, 3)(units)
        assert np.allclose(out.data, np.max([u.data for u in units], axis=0))

    def test_width_mismatch(self, units):
        with pytest.raises(ShapeError):
            MeanPool(5, 3)(units)

    def test_no_units(self):
        with pytest.raises(ValueError):
            MeanPool(4, 3)([])

    def test_no_parameters(self):
        assert not MaxPool(4, 3).parameters()


class TestForward:
    def test_shape(self, units):
        intg = Forward(4, 3, np.random.default_rng(0), hidden_dim=7)
        assert intg(units).shape == (7,)
        assert intg.output_dim == 7

    def test_needs_every_unit(self, units):
        intg = Forward(4, 3, np.random.default_rng(0), hidden_dim=7)
        with pytest.raises(ShapeError):
            intg(units[:2])

    def test_unknown_param(self):
        with pytest.raises(ValueError):
            Forward(4, 3, np.random.default_rng(0), width=7)


class TestTransformer:
    def test_projects_units(self, units):
        intg = Transformer(4, 3, np.random.default_rng(0), dim=8, heads=2, layers=1, ff_dim=8)
        assert intg.project is not None
        assert intg(units).shape == (8,)

    def test_no_projection_when_widths_match(self, units):
        intg = Transformer(4, 3, np.random.default_rng(0), dim=4, heads=2, layers=1, ff_dim=8)
        assert intg.project is None

    def test_order_invariant_without_positions(self, units):
        intg = Transformer(
            4, 3, np.random.default_rng(0), dim=4, heads=2, layers=2, ff_dim=8,
            position_embedding=False,
        )
        a = intg(units).data
        b = intg(units[::-1]).data
        assert np.allclose(a, b)

    def test_flops_grow_with_layers(self):
        one = Transformer(4, 3, np.random.default_rng(0), dim=8, heads=2, layers=1, ff_dim=8)
        two = Transformer(4, 3, np.random.default_rng(0), dim=8, heads=2, layers=2, ff_dim=8)
        assert two.flops() > one.flops() > 0


class TestClassifier:
    def test_probabilities(self):
        cls = Classifier(4, 5, np.random.default_rng(0))
        p = classify(cls, Tensor(np.ones(4)))
        assert p.shape == (5,)
        assert np.isclose(p.data.sum(), 1.0)

    def test_wrong_width(self):
        cls = Classifier(4, 5, np.random.default_rng(0))
        with pytest.raises(ShapeError):
            cls(Tensor(np.ones(3)))

    def test_flops(self):
        assert Classifier(4, 5, np.random.default_rng(0)).flops() == 2 * 4 * 5 + 5

    def test_predict_proba_charges(self, units):
        intg, cls = MeanPool(4, 3), Classifier(4, 2, np.random.default_rng(0))
        trace = RunTrace()
        p = predict_proba(intg, cls, units, trace)
        assert trace.integrations == 1
        assert np.allclose(p.data, classify(cls, integrate(intg, units)).data)


class TestBatchedIntegration:
    FACTORIES = {
        "MeanPool": lambda: MeanPool(4, 3),
        "MaxPool": lambda: MaxPool(4, 3),
        "Forward": lambda: Forward(4, 3, np.random.default_rng(0), hidden_dim=7),
        "Transformer": lambda: Transformer(
            4, 3, np.random.default_rng(0), dim=8, heads=2, layers=1, ff_dim=8
        ),
    }

    @pytest.fixture(scope="class")
    def batch(self):
        return np.random.default_rng(5).normal(size=(2, 3, 4))

    @pytest.mark.parametrize("name", sorted(FACTORIES))
    def test_rows_match_unit_lists(self, name, batch):
        intg = self.FACTORIES[name]()
        out = intg(Tensor(batch)).data
        assert out.shape == (2, intg.output_dim)
        for b in range(2):
            single = intg([Tensor(u) for u in batch[b]]).data
            assert np.allclose(out[b], single)

    def test_batch_shape_checked(self, batch):
        with pytest.raises(ShapeError):
            MeanPool(5, 3)(Tensor(batch))
        with pytest.raises(ShapeError):
            MeanPool(4, 3)(Tensor(batch[0]))

    def test_predict_proba_charges_each_video(self, batch):
        intg, cls = MeanPool(4, 3), Classifier(4, 2, np.random.default_rng(0))
        trace = RunTrace()
        p = predict_proba(intg, cls, Tensor(batch), trace)
        assert p.shape == (2, 2)
        assert np.allclose(p.data.sum(axis=-1), 1.0)
        assert trace.integrations == 2


class TestTemporal:
    def test_pools(self):
        xs = [Tensor([1.0, -2.0]), Tensor([3.0, 0.0])]
        for net, expected in [
            (TMeanPool(2), [2.0, -1.0]),
            (TMaxPool(2), [3.0, 0.0]),
            (SumPool(2), [4.0, -2.0]),
        ]:
            state = net.initial_state()
            for x in xs:
                state = net.step(x, state)
            assert np.allclose(state.context.data, expected)

    def test_lstm_width(self):
        net = LSTM(3, np.random.default_rng(0), hidden_dim=5)
        state = net.step(Tensor(np.ones(3)), net.initial_state())
        assert state.context.shape == (5,)
        assert net.step_flops() == 8 * 8 * 5 + 24 * 5

    @pytest.mark.parametrize(
        "net",
        [TMeanPool(3), TMaxPool(3), SumPool(3), LSTM(3, np.random.default_rng(0), hidden_dim=4)],
        ids=["mean", "max", "sum", "lstm"],
    )
    def test_masked_rows_match_single_sequences(self, net):
        rng = np.random.default_rng(1)
        xs = rng.normal(size=(4, 3, 3))
        masks = np.array([[1, 1, 1], [1, 0, 1], [0, 1, 1], [1, 0, 0]], dtype=bool)
        state = net.initial_state(3)
        for x, mask in zip(xs, masks):
            state = select_state(mask, net.step(Tensor(x), state), state)

        for r in range(3):
            single = net.initial_state()
            for x, mask in zip(xs, masks):
                if mask[r]:
                    single = net.step(Tensor(x[r]), single)
            assert np.allclose(state.context.data[r], single.context.data)
            assert state.seen[r] == single.seen == masks[:, r].sum()


class TestSpatial:
    def test_passthrough_identity(self):
        enc = Passthrough(3)
        x = Tensor([1.0, 2.0, 3.0])
        assert enc(x) is x
        assert enc.declared_cost() == 4.54e9

    def test_shape_check(self):
        with pytest.raises(ShapeError):
            Passthrough(3)(Tensor(np.ones(4)))

    def test_mlp_embedder_cost(self):
        enc = MlpEmbedder(3, np.random.default_rng(0), hidden_dim=4, output_dim=2)
        assert enc.output_dim == 2
        assert enc.declared_cost() == 2 * 3 * 4 + 2 * 4 * 2

    def test_encode_charges_once(self):
        trace = RunTrace()
        encode_frame(Passthrough(3, cost_per_frame=10.0), Tensor(np.ones(3)), trace)
        assert trace.frames == 1
        assert trace.spatial_flops == 10.0


class TestIntermediatePrediction:
    @pytest.fixture(scope="class")
    def model(self):
        return Recognizer(
            n_frames=30, feature_dim=6, n_classes=3, n_train=3, n_test=3,
            temporal_params={"hidden_dim": 4}, integrator_model="MeanPool",
            policy_width=8, policy_layers=2,
        ).model

    def test_needs_observations(self, model):
        states = init_locators(3, 30, 4, model.temporal)
        with pytest.raises(ValueError):
            intermediate_predict(states, model.integrator, model.classifier)

    def test_matches_final_path(self, model):
        frames = np.random.default_rng(1).normal(size=(30, 6))
        states = init_locators(3, 30, 4, model.temporal)
        for s in states:
            observe(s, frames, model.spatial, model.temporal)
        p = intermediate_predict(states, model.integrator, model.classifier)
        q = predict_proba(model.integrator, model.classifier, [s.hidden for s in states])
        assert np.array_equal(p.data, q.data)

    def test_recognize(self, model):
        video = VideoSample(np.random.default_rng(2).normal(size=(30, 6)), 1, num_classes=3)
        trace = RunTrace()
        episode, p = model.recognize(video, trace=trace)
        assert np.isclose(p.data.sum(), 1.0)
        assert trace.videos == 1
        assert trace.integrations == 1
        assert trace.frames == episode.frames

    def test_recognize_batch(self, model):
        rng = np.random.default_rng(2)
        videos = [VideoSample(rng.normal(size=(30, 6)), 1, num_classes=3) for _ in range(3)]
        trace = RunTrace()
        episodes, p = model.recognize_batch(videos, trace=trace)
        assert p.shape == (3, 3)
        assert trace.videos == trace.integrations == 3
        assert trace.frames == sum(ep.frames for ep in episodes)
        for video, row in zip(videos, p.data):
            assert np.allclose(row, model.recognize(video)[1].data)


class TestRecognizer:
    def test_policy_per_locator(self):
        model = Recognizer(n_locators=5, policy_width=8, policy_layers=3).model
        assert model.n_locators == 5
        assert [lyr.out_dim for lyr in model.policies[0].layers] == [8, 8, 4]

    def test_distinct_policy_init(self):
        model = Recognizer(policy_width=8, policy_layers=2).model
        a, b = model.policies[0], model.policies[1]
        assert a.checksum() != b.checksum()

    def test_position_switch_reaches_integrator(self):
        rec = Recognizer(
            position_embedding=False,
            policy_width=8,
            policy_layers=2,
            integrator_params={"dim": 8, "heads": 2, "layers": 1, "ff_dim": 8},
        )
        assert rec.model.integrator.params["position_embedding"] is False

    def test_model_cached_and_invalidated(self):
        rec = Recognizer(policy_width=8, policy_layers=2, integrator_model="MeanPool")
        assert rec.model is rec.model
        first = rec.model
        rec.update(n_locators=2)
        assert rec.model is not first
        assert rec.model.n_locators == 2

    def test_same_seed_same_weights(self):
        kw = dict(policy_width=8, policy_layers=2, integrator_model="Forward",
                  integrator_params={"hidden_dim": 8})
        assert Recognizer(**kw).model.checksum() == Recognizer(**kw).model.checksum()
        other = Recognizer(init_seed=1, **kw).model.checksum()
        assert other != Recognizer(**kw).model.checksum()

    def test_backbone_policy_disjoint(self):
        model = Recognizer(policy_width=8, policy_layers=2, integrator_model="MeanPool").model
        assert not set(model.backbone_parameters()) & set(model.policy_parameters())

    def test_too_many_locators(self):
        with pytest.raises(ValueError):
            Recognizer(n_locators=50, n_frames=30, n_train=3, n_test=3, n_classes=3)

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            Recognizer(temporal_model="GRU")
