"""Noisy fading uplink: block Rayleigh fades, analog transmission, MRC.

The physical layer is reduced to its receive-SNR abstraction: a fade is a
nonnegative power gain (unit-mean exponential for unit-variance Rayleigh),
phase is assumed perfectly compensated, and a transmitted feature vector
arrives with i.i.d. Gaussian noise of per-dimension variance
``signal_power / receive_snr``. Combining repeated observations with
maximal-ratio weights adds their receive SNRs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelDraw:
    """One block-fading realization."""

    power_gain: float
    receive_snr: float


@dataclass(frozen=True)
class NoiseModel:
    """Reference signal power used to convert an SNR into a noise variance."""

    signal_power: float

    def __post_init__(self):
        if self.signal_power <= 0:
            raise ValueError("signal_power must be > 0")

    def noise_std(self, receive_snr: float) -> float:
        if receive_snr <= 0:
            raise ValueError("receive_snr must be > 0")
        return float(np.sqrt(self.signal_power / receive_snr))


def mean_signal_power(features: np.ndarray) -> float:
    """Mean per-dimension power of a pool, the reference for noise scaling."""
    features = np.asarray(features, dtype=np.float64)
    if features.size == 0:
        raise ValueError("empty pool")
    return float(np.mean(features**2))


def draw_fade(transmit_snr: float, rng: np.random.Generator) -> ChannelDraw:
    """Draw one Rayleigh block fade; the receive SNR averages ``transmit_snr``."""
    if transmit_snr <= 0:
        raise ValueError("transmit_snr must be > 0 (linear scale)")
    gain = float(rng.exponential(1.0))
    return ChannelDraw(power_gain=gain, receive_snr=transmit_snr * gain)


def transmit_once(
    features: np.ndarray,
    draw: ChannelDraw,
    noise_model: NoiseModel,
    rng: np.random.Generator,
) -> np.ndarray:
    """One analog transmission: the vector plus white Gaussian noise."""
    std = noise_model.noise_std(draw.receive_snr)
    features = np.asarray(features, dtype=np.float64)
    return features + rng.normal(0.0, std, size=features.shape)


@dataclass(frozen=True)
class MrcState:
    """Accumulated maximal-ratio combiner state for one sample.

    ``observations`` holds (noisy vector, receive_snr) pairs; the combined
    vector is their SNR-weighted average and carries equivalent noise
    variance ``signal_power / effective_snr``.
    """

    observations: tuple[tuple[np.ndarray, float], ...] = ()

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    @property
    def effective_snr(self) -> float:
        return float(sum(snr for _, snr in self.observations))

    @property
    def combined(self) -> np.ndarray:
        if not self.observations:
            raise ValueError("cannot combine zero observations")
        total = self.effective_snr
        acc = np.zeros_like(self.observations[0][0], dtype=np.float64)
        for obs, snr in self.observations:
            acc += snr * obs
        return acc / total


def mrc_combine(state: MrcState, observation: np.ndarray, receive_snr: float) -> MrcState:
    """Fold one more noisy observation into the combiner state."""
    observation = np.asarray(observation, dtype=np.float64)
    if receive_snr <= 0:
        raise ValueError("receive_snr must be > 0")
    if state.observations and observation.shape != state.observations[0][0].shape:
        raise ValueError(
            f"observation dimension {observation.shape} does not match "
            f"state dimension {state.observations[0][0].shape}"
        )
    return MrcState(observations=state.observations + ((observation, receive_snr),))


def snr_db_to_linear(db: float) -> float:
    return float(10.0 ** (db / 10.0))


def snr_linear_to_db(linear: float) -> float:
    if linear <= 0:
        raise ValueError("linear SNR must be > 0")
    return float(10.0 * np.log10(linear))
