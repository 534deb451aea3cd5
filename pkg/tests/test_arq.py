import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeacq import svm
from edgeacq.arq import (
    ArqPolicyConfig,
    channel_aware_should_retransmit,
    iaw_multiclass_should_retransmit,
    iaw_should_retransmit,
    run_arq_acquisition,
    theta0_for_alignment,
    theta0_for_alignment_multiclass,
)
from edgeacq.channel import NoiseModel
from edgeacq.dataio import SplitSpec, partition


def config(**kwargs):
    defaults = dict(theta0=1.0, theta_snr=10.0, transmit_snr=31.6, budget=100)
    defaults.update(kwargs)
    return ArqPolicyConfig(**defaults)


class TestBinaryRule:
    def test_stop_when_snr_clears_uncertainty_threshold(self):
        cfg = config(theta0=1.0, theta_snr=10.0)
        assert iaw_should_retransmit(3.0, 2.0, cfg) is False  # 3 > min(2, 10)

    def test_cap_dominates_any_uncertainty(self):
        cfg = config(theta0=1.0, theta_snr=10.0)
        assert iaw_should_retransmit(10.001, 1e9, cfg) is False

    def test_zero_uncertainty_stops_immediately(self):
        cfg = config()
        assert iaw_should_retransmit(1e-9, 0.0, cfg) is False

    def test_equality_retransmits(self):
        # The stop condition is strict: SNR exactly at the threshold goes again.
        cfg = config(theta0=1.0, theta_snr=10.0)
        assert iaw_should_retransmit(2.0, 2.0, cfg) is True

    @given(st.floats(0.0, 1e6), st.floats(0.0, 1e4), st.floats(1e-3, 1e4))
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_uncertainty(self, snr, u, du):
        cfg = config(theta0=2.0, theta_snr=50.0)
        if iaw_should_retransmit(snr, u, cfg):
            assert iaw_should_retransmit(snr, u + du, cfg)

    @given(st.floats(0.0, 200.0), st.floats(0.0, 1e6))
    @settings(max_examples=100, deadline=None)
    def test_theta0_infinity_reduces_to_channel_aware(self, snr, u):
        cfg = config(theta0=float("inf"), theta_snr=42.0)
        assert iaw_should_retransmit(snr, u, cfg) == channel_aware_should_retransmit(snr, cfg)


class TestChannelAwareRule:
    def test_below_cap_retransmits(self):
        cfg = config(theta_snr=10.0)
        assert channel_aware_should_retransmit(5.0, cfg) is True

    def test_above_cap_stops(self):
        cfg = config(theta_snr=10.0)
        assert channel_aware_should_retransmit(20.0, cfg) is False


class TestMulticlassRule:
    M = svm.one_vs_one_coding_matrix(3)[0]

    def test_large_scores_stop_at_moderate_snr(self):
        cfg = config(theta0=4.0, theta_snr=100.0)
        s = np.array([50.0, 50.0, 50.0])  # thresholds ~ 4/2500
        assert iaw_multiclass_should_retransmit(1.0, s, self.M, 0, cfg) is False

    def test_zero_relevant_score_caps_at_theta_snr(self):
        cfg = config(theta0=4.0, theta_snr=100.0)
        s = np.array([0.0, 50.0, 50.0])  # column 0 relevant for row 0
        assert iaw_multiclass_should_retransmit(99.0, s, self.M, 0, cfg) is True
        assert iaw_multiclass_should_retransmit(100.5, s, self.M, 0, cfg) is False

    def test_irrelevant_component_ignored(self):
        # Row 0 of the one-vs-one matrix is [+1, +1, 0]: column 2 is the
        # pair (1, 2), irrelevant when class 0 is predicted.
        cfg = config(theta0=4.0, theta_snr=100.0)
        s = np.array([50.0, 50.0, 1e-9])
        assert iaw_multiclass_should_retransmit(1.0, s, self.M, 0, cfg) is False

    def test_any_relevant_component_can_force_retransmission(self):
        cfg = config(theta0=4.0, theta_snr=100.0)
        s = np.array([50.0, 0.1, 50.0])  # threshold 4/0.01 = 400 -> capped 100
        assert iaw_multiclass_should_retransmit(99.0, s, self.M, 0, cfg) is True


class TestAlignmentCalibration:
    def test_binary_alignment_at_reference_uncertainty(self):
        # At the calibrated threshold SNR, a sample at the reference
        # uncertainty reaches the target alignment probability.
        p_target = 0.9
        signal_power = 0.25
        d = 0.5  # reference uncertainty 2
        theta0 = theta0_for_alignment(p_target, signal_power, reference_uncertainty=1 / d)
        snr = theta0 * (1 / d)
        sigma = np.sqrt(signal_power / snr)
        rng = np.random.default_rng(0)
        flips = rng.normal(0.0, sigma, size=200_000) < -d
        assert 1.0 - flips.mean() == pytest.approx(p_target, abs=0.01)

    def test_multiclass_alignment_exact_at_every_distance(self):
        p_target = 0.95
        signal_power = 0.1
        theta0 = theta0_for_alignment_multiclass(p_target, signal_power)
        rng = np.random.default_rng(1)
        for d in (0.2, 1.0):
            snr = theta0 / d**2
            sigma = np.sqrt(signal_power / snr)
            flips = rng.normal(0.0, sigma, size=200_000) < -d
            assert 1.0 - flips.mean() == pytest.approx(p_target, abs=0.01)

    def test_invalid_probability_rejected(self):
        with pytest.raises(ValueError):
            theta0_for_alignment(0.4, 1.0)


@pytest.fixture(scope="module")
def arq_setup(binary_pool):
    X, y = binary_pool
    spec = SplitSpec(seed_size=40, buffer_size=30, device_count=4, test_size=60, seed=0)
    split = partition(X, y, spec)
    model = svm.train_binary(
        split.seed_features,
        split.seed_labels.astype(np.float64),
        0.05,
        params=svm.TrainerParams(max_rounds=300),
    )
    noise = NoiseModel(signal_power=float(np.mean(X**2)))
    return split, model, noise


def run(split, model, noise, policy, cfg, **kw):
    return run_arq_acquisition(
        policy,
        split.buffers,
        model,
        noise,
        cfg,
        rng_root=1,
        train_c=0.05,
        warm_params=svm.TrainerParams(max_rounds=2),
        seed_features=split.seed_features,
        seed_labels=split.seed_labels,
        **kw,
    )


class TestAcquisitionLoop:
    def test_budget_exactly_spent(self, arq_setup):
        split, model, noise = arq_setup
        cfg = config(budget=60, theta0=6.0, theta_snr=30.0)
        _, trace = run(split, model, noise, "importance", cfg)
        assert trace.budget_spent == 60
        assert not trace.early_stop

    def test_no_retx_acquires_budget_samples(self, arq_setup):
        split, model, noise = arq_setup
        cfg = config(budget=60)
        _, trace = run(split, model, noise, "no_retx", cfg)
        assert trace.n_acquired == 60
        assert all(r.n_transmissions == 1 for r in trace.records)

    def test_theta0_zero_degenerates_to_single_transmission(self, arq_setup):
        split, model, noise = arq_setup
        cfg = config(budget=40, theta0=0.0)
        _, trace = run(split, model, noise, "importance", cfg)
        assert all(r.n_transmissions == 1 for r in trace.records)

    def test_budget_conservation(self, arq_setup):
        split, model, noise = arq_setup
        cfg = config(budget=73, theta0=8.0, theta_snr=60.0)
        _, trace = run(split, model, noise, "channel_aware", cfg)
        assert sum(r.n_transmissions for r in trace.records) == trace.budget_spent == 73

    def test_early_stop_when_buffers_exhausted(self, binary_pool):
        X, y = binary_pool
        spec = SplitSpec(seed_size=30, buffer_size=3, device_count=3, test_size=0, seed=1)
        split = partition(X, y, spec)
        model = svm.train_binary(
            split.seed_features,
            split.seed_labels.astype(np.float64),
            0.05,
            params=svm.TrainerParams(max_rounds=200),
        )
        noise = NoiseModel(signal_power=float(np.mean(X**2)))
        cfg = config(budget=500)
        _, trace = run(split, model, noise, "no_retx", cfg)
        assert trace.early_stop
        assert trace.n_acquired == 9
        assert trace.budget_spent == 9

    def test_per_sample_cap_bounds_transmissions(self, arq_setup):
        split, model, noise = arq_setup
        cfg = config(budget=50, theta0=1e12, theta_snr=1e12, max_retx_per_sample=5)
        _, trace = run(split, model, noise, "importance", cfg)
        assert max(r.n_transmissions for r in trace.records) <= 5

    def test_deterministic_given_root(self, arq_setup):
        split, model, noise = arq_setup
        cfg = config(budget=40, theta0=6.0)
        _, t1 = run(split, model, noise, "importance", cfg)
        _, t2 = run(split, model, noise, "importance", cfg)
        assert [(r.device_id, r.origin_index, r.n_transmissions) for r in t1.records] == [
            (r.device_id, r.origin_index, r.n_transmissions) for r in t2.records
        ]

    def test_eval_checkpoints_present(self, arq_setup, binary_test_set):
        split, model, noise = arq_setup
        tx, ty = binary_test_set
        cfg = config(budget=60)
        _, trace = run(
            split, model, noise, "no_retx", cfg,
            eval_every=10, test_features=tx, test_labels=ty,
        )
        evals = [r for r in trace.records if r.test_accuracy is not None]
        assert len(evals) == 6

    def test_unknown_policy_rejected(self, arq_setup):
        split, model, noise = arq_setup
        with pytest.raises(ValueError, match="unknown policy"):
            run(split, model, noise, "hybrid", config(budget=10))


class TestAlignmentImprovesWithSnr:
    def test_stopping_at_threshold_beats_half_threshold(self, arq_setup):
        # Monte-Carlo check that the protocol's stop SNR actually yields a
        # higher noisy-data-alignment rate than stopping at half of it.
        split, model, noise = arq_setup
        rng = np.random.default_rng(3)
        x = split.buffers[0].features[0]
        d = svm.distance(model, x)
        threshold = 4.0 / max(d, 1e-6)  # the binary rule's stop SNR
        w = model.weights / np.linalg.norm(model.weights)
        clean_side = np.sign(model.weights @ x + model.bias)
        rates = []
        for snr in (threshold, threshold / 2.0):
            sigma = noise.noise_std(snr)
            noisy_vals = (model.weights @ x + model.bias) + sigma * np.linalg.norm(
                model.weights
            ) * rng.standard_normal(20_000)
            rates.append(np.mean(np.sign(noisy_vals) == clean_side))
        assert rates[0] > rates[1]
