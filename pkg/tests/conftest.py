import pytest
import numpy as np

from strider.data import generate_synthetic


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run desk-scale training tests"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def rng_factory():
    return lambda seed=0: np.random.default_rng(seed)


@pytest.fixture(scope="session")
def small_split():
    """A quick synthetic split: 30 frames, 3 classes, 12-dim features."""
    return generate_synthetic(
        n_frames=30, feature_dim=12, n_classes=3, n_train=12, n_test=6, seed=3
    )


#: Parameters of a tiny, fast experiment.
TINY = dict(
    n_frames=30,
    feature_dim=12,
    n_classes=3,
    n_train=9,
    n_test=6,
    policy_width=16,
    policy_layers=2,
    critic_width=16,
    critic_layers=2,
    temporal_params={"hidden_dim": 8},
    integrator_params={"dim": 8, "heads": 2, "layers": 1, "ff_dim": 16},
    sac_batch_size=4,
    video_batch_size=3,
    warmup_epochs=1,
    policy_epochs=1,
    finetune_cycles=1,
    finetune_period=1,
)


@pytest.fixture(scope="session")
def tiny_params():
    return dict(TINY)
