import math

import numpy as np
import pytest
import torch

from aqaparse.data import TransitionSet
from aqaparse.errors import ConfigError, DataError
from aqaparse.losses import (
    FocalConfig,
    focal_loss,
    focal_mask_loss,
    regression_loss,
    total_loss,
    transition_bce_loss,
    transition_targets,
)


def finite_difference(fn, x: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """Central differences, elementwise, in float64."""
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = float(flat[i])
        flat[i] = orig + eps
        up = float(fn())
        flat[i] = orig - eps
        down = float(fn())
        flat[i] = orig
        gflat[i] = (up - down) / (2 * eps)
    return grad


class TestFocal:
    def test_perfect_prediction_zero(self):
        gt = torch.tensor([[1.0, 0.0]])
        pred = torch.tensor([[1.0, 0.0]])
        assert float(focal_loss(pred, gt, FocalConfig())) == 0.0

    def test_hand_value(self):
        # alpha 0.25, gamma 2, gt=1, pred=0.5: 0.25 * 0.25 * (-ln .5)
        loss = focal_loss(torch.tensor([0.5]), torch.tensor([1.0]), FocalConfig(0.25, 2.0))
        assert float(loss) == pytest.approx(0.25 * 0.25 * math.log(2.0), rel=1e-6)

    def test_reduces_to_bce(self, rng):
        cfg = FocalConfig(alpha=0.5, gamma=0.0)  # alpha=1 invalid; use 0.5 and scale
        pred = torch.tensor(rng.uniform(0.05, 0.95, size=(4, 5)), dtype=torch.float64)
        gt = torch.tensor((rng.random((4, 5)) < 0.5).astype(float), dtype=torch.float64)
        ours = float(focal_loss(pred, gt, cfg)) / cfg.alpha
        bce = float(torch.nn.functional.binary_cross_entropy(pred, gt))
        assert ours == pytest.approx(bce, rel=1e-9)

    def test_five_tensor_sum(self, rng):
        gt = torch.tensor((rng.random((2, 3, 3)) < 0.5).astype(float))
        preds = [torch.tensor(rng.uniform(0.1, 0.9, size=(2, 3, 3)), dtype=torch.float32)
                 for _ in range(5)]
        total = float(focal_mask_loss(preds, gt, FocalConfig()))
        parts = sum(float(focal_loss(p, gt, FocalConfig())) for p in preds)
        assert total == pytest.approx(parts, rel=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            focal_loss(torch.zeros(2, 2), torch.zeros(3, 2), FocalConfig())

    def test_gradient_matches_fd(self, rng):
        pred = torch.tensor(rng.uniform(0.2, 0.8, size=(3, 4)), dtype=torch.float64,
                            requires_grad=True)
        gt = torch.tensor((rng.random((3, 4)) < 0.5).astype(float), dtype=torch.float64)
        cfg = FocalConfig()
        focal_loss(pred, gt, cfg).backward()
        with torch.no_grad():
            fd = finite_difference(lambda: focal_loss(pred, gt, cfg), pred)
        assert torch.allclose(pred.grad, fd, rtol=1e-4, atol=1e-10)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            FocalConfig(alpha=0.0)
        with pytest.raises(ConfigError):
            FocalConfig(gamma=-1.0)


class TestTransitionBce:
    def test_one_hot_targets(self):
        target = transition_targets(TransitionSet((2, 5), 8), 8, 2)
        assert target.shape == (8, 2)
        assert target[1, 0] == 1.0 and target[4, 1] == 1.0
        assert float(target.sum()) == 2.0

    def test_near_perfect_loss_vanishes(self):
        probs = torch.full((8, 2), 1e-9)
        probs[1, 0] = 1 - 1e-9
        probs[4, 1] = 1 - 1e-9
        assert float(transition_bce_loss(probs, (2, 5))) < 1e-5

    def test_uniform_half_gives_ln2(self):
        probs = torch.full((8, 2), 0.5)
        assert float(transition_bce_loss(probs, (2, 5))) == pytest.approx(math.log(2), rel=1e-6)

    def test_mass_toward_target_decreases_loss(self):
        base = torch.full((8, 2), 0.1)
        better = base.clone()
        better[1, 0] = 0.6
        better[4, 1] = 0.6
        assert float(transition_bce_loss(better, (2, 5))) < float(
            transition_bce_loss(base, (2, 5))
        )

    def test_timestamp_out_of_range(self):
        with pytest.raises(DataError, match="outside"):
            transition_bce_loss(torch.full((8, 2), 0.5), (2, 9))

    def test_gradient_matches_fd(self, rng):
        probs = torch.tensor(rng.uniform(0.15, 0.85, size=(6, 2)), dtype=torch.float64,
                             requires_grad=True)
        transition_bce_loss(probs, (2, 5)).backward()
        with torch.no_grad():
            fd = finite_difference(lambda: transition_bce_loss(probs, (2, 5)), probs)
        assert torch.allclose(probs.grad, fd, rtol=1e-4, atol=1e-10)


class TestRegressionAndTotal:
    def test_zero(self):
        assert float(regression_loss(torch.tensor(3.0), torch.tensor(3.0))) == 0.0

    def test_squared_error(self):
        assert float(regression_loss(torch.tensor(3.0), torch.tensor(1.0))) == 4.0

    def test_symmetry(self, rng):
        a, b = float(rng.normal()), float(rng.normal())
        assert float(regression_loss(torch.tensor(a), torch.tensor(b))) == pytest.approx(
            float(regression_loss(torch.tensor(b), torch.tensor(a)))
        )

    def test_total_sum(self):
        assert float(total_loss(torch.tensor(0.0), torch.tensor(0.0), torch.tensor(0.0))) == 0.0
        assert float(total_loss(torch.tensor(1.0), torch.tensor(2.0), torch.tensor(3.0))) == 6.0

    def test_total_gradient_is_component_sum(self, rng):
        x = torch.tensor(rng.uniform(0.2, 0.8, size=4), dtype=torch.float64, requires_grad=True)
        gt = torch.tensor([1.0, 0.0, 1.0, 0.0], dtype=torch.float64)

        def build():
            l_sap = focal_loss(x, gt, FocalConfig())
            l_tap = (x * 0.5).sum()
            l_reg = regression_loss(x.sum(), torch.tensor(1.0, dtype=torch.float64))
            return l_sap, l_tap, l_reg

        total_loss(*build()).backward()
        with torch.no_grad():
            fd = finite_difference(lambda: total_loss(*build()), x)
        assert torch.allclose(x.grad, fd, rtol=1e-4, atol=1e-10)


def test_losses_nonnegative(rng):
    for _ in range(20):
        pred = torch.tensor(rng.uniform(1e-6, 1 - 1e-6, size=(4, 4)))
        gt = torch.tensor((rng.random((4, 4)) < 0.5).astype(float))
        assert float(focal_loss(pred, gt, FocalConfig())) >= 0.0
    probs = torch.tensor(rng.uniform(1e-6, 1 - 1e-6, size=(8, 2)))
    assert float(transition_bce_loss(probs, (2, 5))) >= 0.0
