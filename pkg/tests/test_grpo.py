import math
import random

import pytest

from ppc.grpo import (
    GroupTooSmall,
    GrpoConfig,
    NonFiniteInput,
    RolloutGroup,
    clipped_surrogate,
    group_advantages,
    grpo_objective,
    importance_ratio,
    kl_term,
)


class TestAdvantages:
    def test_two_rollouts(self):
        adv = group_advantages([1.4, 0.6])
        assert adv == pytest.approx([1.0, -1.0], abs=1e-9)

    def test_zero_variance_group(self):
        assert group_advantages([0.5] * 8) == [0.0] * 8

    def test_skewed_group(self):
        adv = group_advantages([0.0, 0.0, 0.0, 1.0])
        assert adv == pytest.approx([-0.57735026919, -0.57735026919, -0.57735026919, 1.73205080757], abs=1e-9)

    def test_group_too_small(self):
        with pytest.raises(GroupTooSmall):
            group_advantages([1.0])

    def test_non_finite(self):
        with pytest.raises(NonFiniteInput):
            group_advantages([1.0, float("nan")])

    def test_sample_std_flag(self):
        adv = group_advantages([1.4, 0.6], sample_std=True)
        # sample std of [1.4, 0.6] is 0.4 * sqrt(2)
        assert adv == pytest.approx([1 / math.sqrt(2), -1 / math.sqrt(2)], abs=1e-9)

    def test_zero_floor_identical_rewards(self):
        assert group_advantages([2.0, 2.0], std_floor=0.0) == [0.0, 0.0]

    def test_positive_scaling_preserves_sign_and_order(self):
        rng = random.Random(17)
        for _ in range(200):
            rewards = [rng.uniform(-1, 2) for _ in range(6)]
            scale = rng.uniform(0.01, 50)
            base = group_advantages(rewards)
            scaled = group_advantages([scale * r for r in rewards])
            for a, b in zip(base, scaled):
                assert (a > 0) == (b > 0) and (a < 0) == (b < 0)
            order = sorted(range(6), key=lambda i: base[i])
            assert order == sorted(range(6), key=lambda i: scaled[i])

    def test_floor_caps_scale(self):
        adv = group_advantages([1.0, 1.0 + 1e-9], std_floor=1e-6)
        assert max(abs(a) for a in adv) < 1e-2


class TestImportanceRatio:
    def test_equal_logps(self):
        assert importance_ratio(-2.0, -2.0) == 1.0

    def test_exponential(self):
        assert importance_ratio(-1.0, -2.0) == pytest.approx(math.e, abs=1e-12)

    def test_nan_rejected(self):
        with pytest.raises(NonFiniteInput):
            importance_ratio(float("nan"), -1.0)

    def test_token_level(self):
        ratios = importance_ratio([-1.0, -2.0], [-1.0, -1.0])
        assert ratios == pytest.approx([1.0, math.exp(-1.0)])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            importance_ratio([-1.0], -1.0)


class TestClippedSurrogate:
    def test_ratio_one_passes_advantage(self):
        for adv in (-2.0, 0.0, 3.5):
            assert clipped_surrogate(1.0, adv, 0.2) == adv

    def test_positive_advantage_clipped(self):
        assert clipped_surrogate(2.0, 1.0, 0.2) == pytest.approx(1.2)

    def test_negative_advantage_unclipped_branch(self):
        assert clipped_surrogate(2.0, -1.0, 0.2) == pytest.approx(-2.0)

    def test_epsilon_validation(self):
        with pytest.raises(ValueError):
            clipped_surrogate(1.0, 1.0, 0.0)


class TestKlTerm:
    def test_zero_iff_equal(self):
        assert kl_term(-1.0, -1.0) == 0.0

    def test_hand_value(self):
        # r = e^{-1}; r - log r - 1 = e^{-1} + 1 - 1
        assert kl_term(-1.0, -2.0) == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_nonnegative_on_random_pairs(self):
        rng = random.Random(5)
        for _ in range(10_000):
            new = rng.uniform(-20, 0)
            ref = rng.uniform(-20, 0)
            assert kl_term(new, ref) >= 0.0

    def test_token_level_sums(self):
        total = kl_term([-1.0, -1.0], [-2.0, -1.0])
        assert total == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_logratio_estimator(self):
        assert kl_term(-1.0, -2.0, estimator="logratio") == pytest.approx(1.0)
        with pytest.raises(ValueError):
            kl_term(-1.0, -2.0, estimator="bogus")


def make_group(rewards, new, old, ref):
    return RolloutGroup(rewards=rewards, logp_new=new, logp_old=old, logp_ref=ref)


class TestRolloutGroup:
    def test_infers_group_size(self):
        g = make_group([1.0, 2.0], [-1.0, -2.0], [-1.0, -2.0], [-1.0, -2.0])
        assert g.G == 2

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            make_group([1.0, 2.0], [-1.0], [-1.0, -2.0], [-1.0, -2.0])

    def test_token_length_mismatch(self):
        with pytest.raises(ValueError):
            make_group([1.0, 2.0], [[-1.0, -2.0], -1.0], [[-1.0], -1.0], [[-1.0, -2.0], -1.0])

    def test_from_dict(self):
        g = RolloutGroup.from_dict(
            {"rewards": [1.0, 0.0], "logp_new": [-1, -1], "logp_old": [-1, -1], "logp_ref": [-1, -1]}
        )
        assert g.G == 2


class TestObjective:
    def test_identical_policies_zero_objective(self):
        logps = [-1.5, -2.5, -0.5, -3.0]
        g = make_group([1.4, 0.6, 0.9, 0.1], logps, logps, logps)
        result = grpo_objective(g, GrpoConfig())
        assert result.objective == pytest.approx(0.0, abs=1e-12)
        assert result.clip_fraction == 0.0
        assert result.mean_kl == 0.0

    def test_beta_zero_is_pure_surrogate(self):
        g = make_group([1.0, 0.0], [-1.0, -2.0], [-1.2, -1.8], [-1.1, -2.2])
        with_kl = grpo_objective(g, GrpoConfig(beta_kl=0.04))
        without = grpo_objective(g, GrpoConfig(beta_kl=0.0))
        assert without.objective == pytest.approx(
            sum(without.surrogates) / 2, abs=1e-15
        )
        assert with_kl.objective < without.objective

    def test_token_level_group(self):
        g = make_group(
            [1.0, 0.0],
            [[-1.0, -1.0], [-2.0, -2.0]],
            [[-1.0, -1.0], [-2.0, -2.0]],
            [[-1.0, -1.0], [-2.0, -2.0]],
        )
        result = grpo_objective(g, GrpoConfig())
        assert result.objective == pytest.approx(0.0, abs=1e-12)

    def test_clip_fraction(self):
        g = make_group([1.0, 0.0], [-0.5, -2.0], [-1.5, -2.0], [-0.5, -2.0])
        result = grpo_objective(g, GrpoConfig(epsilon_clip=0.2))
        assert result.clip_fraction == 0.5


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            GrpoConfig(epsilon_clip=0.0)
        with pytest.raises(ValueError):
            GrpoConfig(beta_kl=-0.1)

    def test_round_trip(self):
        cfg = GrpoConfig(epsilon_clip=0.3, beta_kl=0.01)
        assert GrpoConfig.from_dict(cfg.to_dict()) == cfg
