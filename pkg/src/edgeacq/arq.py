"""Retransmission decision policies and the budgeted acquisition loop.

Three policies are compared under a shared channel-use budget:

* ``importance``: retransmit until the accumulated (MRC) receive SNR clears
  a threshold tied to the sample's uncertainty under the current model,
  capped at ``theta_snr``. Binary classifiers use a threshold linear in the
  inverse-distance uncertainty; one-vs-one multiclass applies an inverse
  squared-score threshold per component relevant to the predicted class.
  The two exponents are intentionally different: each rule is implemented
  exactly as stated, and the binary/multiclass threshold shapes do not
  reduce to one another.
* ``channel_aware``: retransmit until the accumulated SNR clears
  ``theta_snr``, independent of the data.
* ``no_retx``: accept every sample after a single transmission.

Uncertainty is evaluated device-side on the clean sample with the model
current at pick time; the server only ever sees the noisy combined vector,
paired with the true label from the noiseless label channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import svm
from .channel import MrcState, NoiseModel, draw_fade, mrc_combine, transmit_once
from .dataio import DeviceBuffer
from .rng import substream

ARQ_POLICIES = ("importance", "channel_aware", "no_retx")


@dataclass(frozen=True)
class ArqPolicyConfig:
    """Thresholds and budget shared by the retransmission policies."""

    theta0: float
    theta_snr: float
    transmit_snr: float
    budget: int
    max_retx_per_sample: int = 64

    def validate(self) -> None:
        if self.theta0 < 0:
            raise ValueError("theta0 must be >= 0")
        if self.theta_snr <= 0:
            raise ValueError("theta_snr must be > 0")
        if self.transmit_snr <= 0:
            raise ValueError("transmit_snr must be > 0")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.max_retx_per_sample < 1:
            raise ValueError("max_retx_per_sample must be >= 1")


def iaw_should_retransmit(effective_snr: float, uncertainty: float, config: ArqPolicyConfig) -> bool:
    """Importance-aware rule: stop once SNR strictly exceeds the threshold.

    Equality retransmits: the stop condition is a strict inequality.
    """
    return effective_snr <= min(config.theta0 * uncertainty, config.theta_snr)


def iaw_multiclass_should_retransmit(
    effective_snr: float,
    scores: np.ndarray,
    coding_matrix: np.ndarray,
    predicted_row: int,
    config: ArqPolicyConfig,
) -> bool:
    """Multiclass rule: every component relevant to the predicted class must
    clear min(theta0 / score^2, theta_snr); a zero score caps at theta_snr."""
    relevant = coding_matrix[predicted_row] != 0
    for s in np.asarray(scores)[relevant]:
        if s == 0.0:
            threshold = config.theta_snr
        else:
            threshold = min(config.theta0 / (s * s), config.theta_snr)
        if effective_snr <= threshold:
            return True
    return False


def channel_aware_should_retransmit(effective_snr: float, config: ArqPolicyConfig) -> bool:
    """Baseline rule: data-independent SNR target."""
    return effective_snr <= config.theta_snr


def theta0_for_alignment(
    alignment_probability: float,
    signal_power: float,
    reference_uncertainty: float = 1.0,
) -> float:
    """Map a target noisy-data-alignment probability to theta0 (binary rule).

    With per-dimension noise variance P/SNR, the noisy decision value of a
    sample at boundary distance d flips sign with probability
    Phi(-d * sqrt(SNR / P)), so alignment >= p needs SNR >= P z_p^2 / d^2
    with z_p the standard normal quantile. The binary threshold is linear in
    the uncertainty u = 1/d, so it can match that exactly at one reference
    uncertainty only: theta0 = P * z_p^2 * u_ref. Above u_ref the linear
    rule under-protects relative to the alignment target; below it
    over-protects.
    """
    if not 0.5 < alignment_probability < 1.0:
        raise ValueError("alignment probability must lie in (0.5, 1)")
    z = float(stats.norm.ppf(alignment_probability))
    return signal_power * z * z * reference_uncertainty


def theta0_for_alignment_multiclass(alignment_probability: float, signal_power: float) -> float:
    """theta0 for the inverse-squared-score rule; exact at every distance."""
    if not 0.5 < alignment_probability < 1.0:
        raise ValueError("alignment probability must lie in (0.5, 1)")
    z = float(stats.norm.ppf(alignment_probability))
    return signal_power * z * z


@dataclass(frozen=True)
class ArqSampleRecord:
    """One acquired sample: decision-time uncertainty and channel outcome."""

    block_index: int
    device_id: int
    origin_index: int
    uncertainty: float
    n_transmissions: int
    effective_snr: float
    budget_spent: int
    test_accuracy: float | None = None


@dataclass
class AcquisitionTrace:
    budget: int
    records: list[ArqSampleRecord] = field(default_factory=list)
    early_stop: bool = False

    @property
    def budget_spent(self) -> int:
        return sum(r.n_transmissions for r in self.records)

    @property
    def n_acquired(self) -> int:
        return len(self.records)


def _binary_decision_state(model, x, policy, config):
    u = 1.0 / max(svm.distance(model, x), svm.DISTANCE_FLOOR)
    if policy == "importance":
        rule = lambda snr: iaw_should_retransmit(snr, u, config)
    elif policy == "channel_aware":
        rule = lambda snr: channel_aware_should_retransmit(snr, config)
    else:
        rule = lambda snr: False
    return u, rule


def _multiclass_decision_state(model, x, policy, config):
    scores = svm.component_scores(model, x)
    row = svm.hamming_decode(model.coding_matrix, scores)
    relevant = model.coding_matrix[row] != 0
    floored = np.maximum(np.abs(scores[relevant]), svm.DISTANCE_FLOOR)
    u = float(np.max(1.0 / floored**2))
    if policy == "importance":
        rule = lambda snr: iaw_multiclass_should_retransmit(
            snr, scores, model.coding_matrix, row, config
        )
    elif policy == "channel_aware":
        rule = lambda snr: channel_aware_should_retransmit(snr, config)
    else:
        rule = lambda snr: False
    return u, rule


def run_arq_acquisition(
    policy: str,
    buffers: tuple[DeviceBuffer, ...],
    seed_model,
    noise_model: NoiseModel,
    config: ArqPolicyConfig,
    rng_root: int,
    *,
    train_c: float,
    warm_params: svm.TrainerParams = svm.TrainerParams(max_rounds=3),
    eval_every: int = 25,
    test_features: np.ndarray | None = None,
    test_labels: np.ndarray | None = None,
    seed_features: np.ndarray | None = None,
    seed_labels: np.ndarray | None = None,
) -> tuple[object, AcquisitionTrace]:
    """Run one budgeted acquisition: pick, transmit under the policy, retrain.

    Devices are visited round-robin; the active device transmits a uniformly
    random sample from what remains in its buffer. The accepted training
    vector is the MRC-combined noisy observation with the true label. The
    model is refit (warm-started) after every acceptance; test accuracy is
    recorded every ``eval_every`` acceptances and at the end of the run.
    """
    if policy not in ARQ_POLICIES:
        raise ValueError(f"unknown policy {policy!r}, expected one of {ARQ_POLICIES}")
    config.validate()
    multiclass = isinstance(seed_model, svm.MulticlassSvm)
    pairs = svm.one_vs_one_coding_matrix(len(seed_model.classes))[1] if multiclass else None

    dim = buffers[0].features.shape[1]
    n_seed = 0 if seed_features is None else seed_features.shape[0]
    max_rows = n_seed + config.budget
    train_x = np.zeros((max_rows, dim))
    train_y = np.zeros(max_rows, dtype=np.int64)
    if n_seed:
        train_x[:n_seed] = seed_features
        train_y[:n_seed] = seed_labels
    n_rows = n_seed

    remaining = [list(range(len(b))) for b in buffers]
    pick_rngs = [substream(rng_root, "arq_pick", b.device_id) for b in buffers]
    fade_rngs = [substream(rng_root, "arq_fade", b.device_id) for b in buffers]
    noise_rngs = [substream(rng_root, "arq_noise", b.device_id) for b in buffers]

    model = seed_model
    trace = AcquisitionTrace(budget=config.budget)
    spent = 0
    device_ptr = 0
    n_devices = len(buffers)
    block = 0

    def evaluate() -> float | None:
        if test_features is None:
            return None
        return svm.accuracy(model, test_features, test_labels)

    while spent < config.budget:
        # Round-robin, skipping exhausted buffers.
        for probe in range(n_devices):
            k = (device_ptr + probe) % n_devices
            if remaining[k]:
                break
        else:
            trace.early_stop = True
            break
        device_ptr = (k + 1) % n_devices

        pool = remaining[k]
        pos = int(pick_rngs[k].integers(0, len(pool)))
        origin = pool.pop(pos)
        x_clean = buffers[k].features[origin]
        label = int(buffers[k].labels[origin])

        if multiclass:
            uncertainty, should_retx = _multiclass_decision_state(model, x_clean, policy, config)
        else:
            uncertainty, should_retx = _binary_decision_state(model, x_clean, policy, config)

        state = MrcState()
        n_tx = 0
        while True:
            fade = draw_fade(config.transmit_snr, fade_rngs[k])
            obs = transmit_once(x_clean, fade, noise_model, noise_rngs[k])
            state = mrc_combine(state, obs, fade.receive_snr)
            n_tx += 1
            spent += 1
            if spent >= config.budget:
                break
            if n_tx >= config.max_retx_per_sample:
                break
            if not should_retx(state.effective_snr):
                break

        train_x[n_rows] = state.combined
        train_y[n_rows] = label
        n_rows += 1

        if multiclass:
            label_idx = model.classes.index(label)
            touched = {ell for ell, pair in enumerate(pairs) if label_idx in pair}
            model = svm.train_multiclass(
                train_x[:n_rows],
                train_y[:n_rows],
                model.classes,
                train_c,
                prior=model,
                params=warm_params,
                update_only=touched,
            )
        else:
            model = svm.train_binary(
                train_x[:n_rows],
                train_y[:n_rows].astype(np.float64),
                train_c,
                prior=model,
                params=warm_params,
            )

        n_accepted = n_rows - n_seed
        at_checkpoint = (n_accepted % eval_every == 0) or spent >= config.budget
        trace.records.append(
            ArqSampleRecord(
                block_index=block,
                device_id=k,
                origin_index=origin,
                uncertainty=uncertainty,
                n_transmissions=n_tx,
                effective_snr=state.effective_snr,
                budget_spent=spent,
                test_accuracy=evaluate() if at_checkpoint else None,
            )
        )
        block += 1

    if trace.records and trace.records[-1].test_accuracy is None and test_features is not None:
        trace.records[-1] = replace(trace.records[-1], test_accuracy=evaluate())

    return model, trace
