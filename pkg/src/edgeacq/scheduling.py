"""Multiuser device selection for centralized learning over fading uplinks.

Each sample block runs three steps: the server broadcasts the current model,
every device evaluates its buffer under a fresh fade draw, and one device is
selected to upload a single sample (no retransmission in this mode). The
data-importance indicator (DII) of a device trades its channel quality
against its most uncertain buffered sample:

    dii = -1 / snr + max over buffer of inverse-distance uncertainty

The compared policies differ only in the selection rule; the transmitted
sample is always the selected device's most uncertain one:

* ``scheme1``: argmax dii (joint channel and data diversity)
* ``channel_aware``: argmax snr
* ``data_aware``: argmax per-device max uncertainty
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import svm
from .channel import ChannelDraw, MrcState, NoiseModel, draw_fade, mrc_combine, transmit_once
from .dataio import DeviceBuffer
from .rng import substream

SCHEDULING_POLICIES = ("scheme1", "channel_aware", "data_aware")


@dataclass(frozen=True)
class DiiRecord:
    """One device's standing in one sample block."""

    device_id: int
    snr: float
    max_uncertainty: float
    dii: float
    best_index: int


@dataclass(frozen=True)
class SchedulingConfig:
    """``remove_acquired`` controls whether an uploaded sample leaves its
    buffer. Buffers persist by default: devices keep their local datasets,
    and a sample may be re-elected if it stays uncertain under the evolving
    model, which is what separates the selection rules when the block budget
    matches the total buffer content."""

    blocks: int
    transmit_snr: float
    remove_acquired: bool = False

    def validate(self) -> None:
        if self.blocks < 0:
            raise ValueError("blocks must be >= 0")
        if self.transmit_snr <= 0:
            raise ValueError("transmit_snr must be > 0")


def compute_dii(
    features: np.ndarray,
    model: svm.BinarySvm,
    snr: float,
    device_id: int = 0,
) -> DiiRecord:
    """DII of one device's (remaining) buffer under the broadcast model.

    A dead channel (snr == 0) yields dii = -inf so the device is never
    selected. Uncertainty ties break toward the lowest buffer index.
    """
    if features.shape[0] == 0:
        raise ValueError("empty buffer")
    u = svm.uncertainties(model, features)
    best = int(np.argmax(u))
    max_u = float(u[best])
    if snr < 0:
        raise ValueError("snr must be >= 0")
    dii = -math.inf if snr == 0.0 else -1.0 / snr + max_u
    return DiiRecord(device_id=device_id, snr=snr, max_uncertainty=max_u, dii=dii, best_index=best)


def select_max_dii(records: list[DiiRecord]) -> int:
    """scheme1 selection: device with the largest dii, ties to lowest id."""
    if not records:
        raise ValueError("no devices to select from")
    best = records[0]
    for rec in records[1:]:
        if rec.dii > best.dii:
            best = rec
    return best.device_id


def select_channel_aware(snrs: np.ndarray) -> int:
    """Largest instantaneous SNR, ties to lowest device index."""
    snrs = np.asarray(snrs)
    if snrs.size == 0:
        raise ValueError("no devices to select from")
    return int(np.argmax(snrs))


def select_data_aware(max_uncertainties: np.ndarray) -> int:
    """Largest per-device max uncertainty, ties to lowest device index."""
    u = np.asarray(max_uncertainties)
    if u.size == 0:
        raise ValueError("no devices to select from")
    return int(np.argmax(u))


def expected_noisy_distance(d: float, sigma: float) -> float:
    """Mean |d + N(0, sigma^2)|: the folded-Gaussian expected boundary
    distance of a noisy sample whose clean distance is ``d``.

    Serves as the closed-form reference for how channel noise inflates
    observed distances; non-decreasing in sigma for fixed d.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return abs(d)
    phi_neg = 0.5 * math.erfc(d / (sigma * math.sqrt(2.0)))
    return d * (1.0 - 2.0 * phi_neg) + sigma * math.sqrt(2.0 / math.pi) * math.exp(
        -(d * d) / (2.0 * sigma * sigma)
    )


@dataclass(frozen=True)
class SchedulingBlockRecord:
    block: int
    selected_device: int
    policy: str
    snr: float
    dii: float
    test_accuracy: float | None = None
    # Pool index of the uploaded sample; diagnostic only, not exported.
    origin_index: int = -1


@dataclass
class SchedulingTrace:
    blocks: int
    records: list[SchedulingBlockRecord] = field(default_factory=list)
    early_stop: bool = False


def run_scheduling_acquisition(
    policy: str,
    buffers: tuple[DeviceBuffer, ...],
    seed_model: svm.BinarySvm,
    noise_model: NoiseModel,
    config: SchedulingConfig,
    rng_root: int,
    *,
    train_c: float,
    warm_params: svm.TrainerParams = svm.TrainerParams(max_rounds=3),
    test_features: np.ndarray | None = None,
    test_labels: np.ndarray | None = None,
    seed_features: np.ndarray | None = None,
    seed_labels: np.ndarray | None = None,
) -> tuple[svm.BinarySvm, SchedulingTrace]:
    """Run the per-block select-transmit-label-retrain loop.

    Device buffers hold unlabeled data from the devices' point of view: the
    uncertainty evaluation uses features only, and the label enters the
    training set server-side after transmission. Every device draws a fresh
    fade each block, whether or not it is selected, so policies with the
    same seed see identical channel realizations.
    """
    if policy not in SCHEDULING_POLICIES:
        raise ValueError(f"unknown policy {policy!r}, expected one of {SCHEDULING_POLICIES}")
    config.validate()

    dim = buffers[0].features.shape[1]
    n_seed = 0 if seed_features is None else seed_features.shape[0]
    max_rows = n_seed + config.blocks
    train_x = np.zeros((max_rows, dim))
    train_y = np.zeros(max_rows, dtype=np.int64)
    if n_seed:
        train_x[:n_seed] = seed_features
        train_y[:n_seed] = seed_labels
    n_rows = n_seed

    remaining = [list(range(len(b))) for b in buffers]
    fade_rngs = [substream(rng_root, "sched_fade", b.device_id) for b in buffers]
    noise_rngs = [substream(rng_root, "sched_noise", b.device_id) for b in buffers]

    model = seed_model
    trace = SchedulingTrace(blocks=config.blocks)

    for block in range(config.blocks):
        records = []
        for k, buf in enumerate(buffers):
            fade = draw_fade(config.transmit_snr, fade_rngs[k])
            if not remaining[k]:
                continue
            feats = buf.features[remaining[k]]
            records.append(compute_dii(feats, model, fade.receive_snr, device_id=k))
        if not records:
            trace.early_stop = True
            break

        if policy == "scheme1":
            chosen = select_max_dii(records)
        elif policy == "channel_aware":
            idx = select_channel_aware(np.array([r.snr for r in records]))
            chosen = records[idx].device_id
        else:
            idx = select_data_aware(np.array([r.max_uncertainty for r in records]))
            chosen = records[idx].device_id
        rec = next(r for r in records if r.device_id == chosen)

        if config.remove_acquired:
            origin = remaining[chosen].pop(rec.best_index)
        else:
            origin = remaining[chosen][rec.best_index]
        x_clean = buffers[chosen].features[origin]
        label = int(buffers[chosen].labels[origin])

        draw = ChannelDraw(power_gain=rec.snr / config.transmit_snr, receive_snr=rec.snr)
        state = mrc_combine(
            MrcState(),
            transmit_once(x_clean, draw, noise_model, noise_rngs[chosen]),
            rec.snr,
        )
        train_x[n_rows] = state.combined
        train_y[n_rows] = label
        n_rows += 1

        model = svm.train_binary(
            train_x[:n_rows],
            train_y[:n_rows].astype(np.float64),
            train_c,
            prior=model,
            params=warm_params,
        )

        acc = None
        if test_features is not None:
            acc = svm.accuracy(model, test_features, test_labels)
        trace.records.append(
            SchedulingBlockRecord(
                block=block,
                selected_device=chosen,
                policy=policy,
                snr=rec.snr,
                dii=rec.dii,
                test_accuracy=acc,
                origin_index=origin,
            )
        )

    return model, trace
