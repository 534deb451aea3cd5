"""Federated rounds with importance-aware client selection.

Two importance metrics drive the per-round selection of ``m`` of ``K``
devices:

* ``gradient_norm``: every device computes its full-batch local gradient at
  the broadcast model and reports its Euclidean norm; devices with larger
  norms are scheduled.
* ``mai`` (model age indicator): every device reports the distance between
  its stored last-uploaded model and the broadcast global model, a cheap
  computation that lets unscheduled devices skip gradient work entirely
  (lazy updating). Only scheduled devices then compute local updates.

Uploads are either raw gradients (averaged and applied as one descent step)
or locally updated models (averaged into the new global model). The local
learner is l2-regularized logistic regression, so every quantity is exactly
computable and convergence is testable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

METRICS = ("gradient_norm", "mai")
UPLOADS = ("gradient", "model")


class FederatedDivergenceError(RuntimeError):
    """Raised when the global loss blows past the divergence guard."""


@dataclass(frozen=True)
class FederatedConfig:
    rounds: int
    per_round: int  # devices scheduled per round (m)
    learning_rate: float
    l2: float = 1e-3
    metric: str = "gradient_norm"
    upload: str = "gradient"
    local_steps: int = 1
    local_learning_rate: float | None = None
    divergence_factor: float = 10.0

    def validate(self, n_devices: int) -> None:
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if not 1 <= self.per_round <= n_devices:
            raise ValueError(f"per_round must lie in [1, {n_devices}]")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if self.upload not in UPLOADS:
            raise ValueError(f"upload must be one of {UPLOADS}")
        if self.local_steps < 1:
            raise ValueError("local_steps must be >= 1")


def augment_bias(X: np.ndarray) -> np.ndarray:
    """Append a constant-1 column so the model vector carries its intercept."""
    X = np.asarray(X, dtype=np.float64)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def logistic_loss(w: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean log-loss over one shard plus the l2 ridge term."""
    margins = y * (X @ w)
    return float(np.mean(np.logaddexp(0.0, -margins)) + 0.5 * l2 * (w @ w))


def local_gradient(w: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> np.ndarray:
    """Exact full-batch gradient of :func:`logistic_loss` at ``w``."""
    if X.shape[0] == 0:
        raise ValueError("empty shard")
    margins = y * (X @ w)
    coef = -y * expit(-margins)
    return X.T @ coef / X.shape[0] + l2 * w


def importance_gradient_norm(gradient: np.ndarray) -> float:
    return float(np.linalg.norm(gradient))


def mai(stored_model: np.ndarray, global_model: np.ndarray) -> float:
    """Model age indicator: distance from the stored to the current model."""
    return float(np.linalg.norm(np.asarray(stored_model) - np.asarray(global_model)))


def select_top_m(indicators: np.ndarray, m: int) -> tuple[int, ...]:
    """Ids of the m largest indicators; ties go to the lowest id.

    The returned ids are sorted ascending.
    """
    indicators = np.asarray(indicators, dtype=np.float64)
    if not 1 <= m <= indicators.size:
        raise ValueError(f"m must lie in [1, {indicators.size}]")
    order = np.argsort(-indicators, kind="stable")
    return tuple(sorted(int(i) for i in order[:m]))


@dataclass
class FederatedState:
    """Global model plus per-device staleness bookkeeping."""

    global_model: np.ndarray
    round_index: int
    stored_models: np.ndarray  # (K, dim): each device's last-uploaded model
    staleness: np.ndarray  # (K,): rounds since each device last uploaded


@dataclass(frozen=True)
class FederatedRoundRecord:
    round: int
    mode: str
    selected: tuple[int, ...]
    mean_indicator: float
    global_loss: float
    test_accuracy: float | None
    gradient_computations: int
    uploads: dict | None = None  # populated only when record_uploads=True


def run_federated(
    config: FederatedConfig,
    shards: list[tuple[np.ndarray, np.ndarray]],
    *,
    w0: np.ndarray | None = None,
    init_rng: np.random.Generator | None = None,
    test_features: np.ndarray | None = None,
    test_labels: np.ndarray | None = None,
    record_uploads: bool = False,
) -> tuple[np.ndarray, list[FederatedRoundRecord], FederatedState]:
    """Iterate broadcast / indicator / select / upload / aggregate rounds.

    Communication is ideal (no channel noise). Per-device labels are +/-1.
    ``init_rng`` draws a small random initial model when no ``w0`` is given;
    with neither, training starts from zeros.
    """
    n_devices = len(shards)
    config.validate(n_devices)
    dim = shards[0][0].shape[1]
    for X_k, y_k in shards:
        if X_k.shape[0] == 0:
            raise ValueError("empty shard")
        if X_k.shape[1] != dim:
            raise ValueError("shard dimension mismatch")

    if w0 is not None:
        w = np.asarray(w0, dtype=np.float64).copy()
    elif init_rng is not None:
        w = 0.01 * init_rng.standard_normal(dim)
    else:
        w = np.zeros(dim)

    local_lr = config.local_learning_rate or config.learning_rate

    def global_loss(model: np.ndarray) -> float:
        return float(np.mean([logistic_loss(model, X_k, y_k, config.l2) for X_k, y_k in shards]))

    def test_acc(model: np.ndarray) -> float | None:
        if test_features is None:
            return None
        pred = np.where(test_features @ model >= 0.0, 1, -1)
        return float(np.mean(pred == test_labels))

    state = FederatedState(
        global_model=w,
        round_index=0,
        stored_models=np.tile(w, (n_devices, 1)),
        staleness=np.zeros(n_devices, dtype=np.int64),
    )
    initial_loss = global_loss(w)
    trace: list[FederatedRoundRecord] = []

    for round_idx in range(config.rounds):
        grad_count = 0
        grads: list[np.ndarray | None] = [None] * n_devices

        if config.metric == "gradient_norm":
            for k, (X_k, y_k) in enumerate(shards):
                grads[k] = local_gradient(w, X_k, y_k, config.l2)
                grad_count += 1
            indicators = np.array([importance_gradient_norm(g) for g in grads])
        else:
            indicators = np.array(
                [mai(state.stored_models[k], w) for k in range(n_devices)]
            )

        selected = select_top_m(indicators, config.per_round)

        uploads: dict[int, np.ndarray] = {}
        if config.upload == "gradient":
            for k in selected:
                if grads[k] is None:
                    grads[k] = local_gradient(w, shards[k][0], shards[k][1], config.l2)
                    grad_count += 1
                uploads[k] = grads[k]
            w = w - config.learning_rate * np.mean(
                np.stack([uploads[k] for k in selected]), axis=0
            )
            # A gradient upload carries no local model; the device's stored
            # model is the broadcast model its gradient was computed at.
            for k in selected:
                state.stored_models[k] = state.global_model
        else:
            for k in selected:
                local = state.global_model.copy()
                for step in range(config.local_steps):
                    if step == 0 and grads[k] is not None:
                        g = grads[k]
                    else:
                        g = local_gradient(local, shards[k][0], shards[k][1], config.l2)
                        grad_count += 1
                    local = local - local_lr * g
                uploads[k] = local
            w = np.mean(np.stack([uploads[k] for k in selected]), axis=0)
            for k in selected:
                state.stored_models[k] = uploads[k]

        for k in range(n_devices):
            if k in selected:
                state.staleness[k] = 0
            else:
                state.staleness[k] += 1

        state.global_model = w
        state.round_index = round_idx + 1

        loss = global_loss(w)
        if loss > config.divergence_factor * max(initial_loss, 1e-12):
            raise FederatedDivergenceError(
                f"round {round_idx}: global loss {loss:.6g} exceeds "
                f"{config.divergence_factor}x the initial loss {initial_loss:.6g}; "
                "reduce the learning rate"
            )
        trace.append(
            FederatedRoundRecord(
                round=round_idx,
                mode=f"{config.metric}/{config.upload}",
                selected=selected,
                mean_indicator=float(np.mean(indicators)),
                global_loss=loss,
                test_accuracy=test_acc(w),
                gradient_computations=grad_count,
                uploads={k: v.copy() for k, v in uploads.items()} if record_uploads else None,
            )
        )

    return w, trace, state
