"""Importance-aware radio resource management for edge machine learning.

A deterministic, desk-scale simulator and policy library for data
acquisition over noisy fading uplinks: importance-aware retransmission,
multiuser importance-aware scheduling, and federated client selection,
trained and evaluated on digit-classification tasks.
"""

from . import arq, channel, dataio, federated, harness, scheduling, svm, synth

__version__ = "0.1.0"

__all__ = [
    "arq",
    "channel",
    "dataio",
    "federated",
    "harness",
    "scheduling",
    "svm",
    "synth",
]
