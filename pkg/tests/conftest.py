import numpy as np
import pytest
import torch

from aqaparse.config import EvalConfig, ExperimentConfig, TrainConfig
from aqaparse.model import ModelConfig
from aqaparse.synthetic import SyntheticConfig, generate_synthetic


def tiny_experiment(count: int = 12, **train_overrides) -> ExperimentConfig:
    """Small geometry shared by the unit tests: T=32, 16x16 frames."""
    synthetic = SyntheticConfig(
        count=count,
        frames=32,
        height=16,
        width=16,
        num_transitions=2,
        seed=7,
        semi_major_range=(3.0, 4.0),
        semi_minor_range=(1.2, 1.8),
    )
    model = ModelConfig(
        frames=32,
        height=16,
        width=16,
        num_snippets=3,
        snippet_len=16,
        snippet_stride=8,
        stage_channels=(4, 6, 8, 10),
        embed_channels=16,
        pyramid_mid_channels=4,
        tap_step_len=4,
        sve_width=8,
        sve_duration=2,
        head_hidden=16,
    )
    train = TrainConfig(epochs=2, batch_size=4, seed=3, **train_overrides)
    cfg = ExperimentConfig(synthetic=synthetic, model=model, train=train, eval=EvalConfig(exemplars=3))
    cfg.validate()
    return cfg


@pytest.fixture(scope="session")
def tiny_cfg() -> ExperimentConfig:
    return tiny_experiment()


@pytest.fixture(scope="session")
def tiny_corpus(tiny_cfg):
    return generate_synthetic(tiny_cfg.synthetic)


@pytest.fixture(scope="session")
def tiny_model(tiny_cfg):
    from aqaparse.model import build_model

    return build_model(tiny_cfg.model, seed=0).eval()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(0)
