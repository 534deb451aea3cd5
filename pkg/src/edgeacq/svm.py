"""Server-side classifier: linear soft-margin SVM and one-vs-one multiclass.

The binary trainer minimizes

    0.5 * ||w||^2 + C * sum_i max(0, 1 - y_i (w . x_i + b))

on its dual (box constraints plus the single equality sum(alpha * y) = 0
induced by the free bias) using deterministic two-coordinate moves: one
maximal-violating-pair step per round, which also yields the KKT gap used
for stopping, followed by a sweep of chained pairs along a deterministic
per-round permutation. Pairs move jointly, so the bias coupling cannot
stall the way single-coordinate descent can. The bias itself is recovered
by exact one-dimensional minimization of the hinge sum, a piecewise-linear
median problem. Everything is deterministic given the sample order, and
the dual state warm-starts from a previous model, which makes per-sample
retraining inside acquisition loops cheap.

Multiclass models decompose into C(C-1)/2 pairwise binary components tied
together by a one-vs-one coding matrix and decoded by generalized Hamming
distance over score signs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


DISTANCE_FLOOR = 1e-6

MODEL_MAGIC = b"EQSV"
MODEL_VERSION = 1


class DegenerateModelError(ValueError):
    """Raised when an operation needs a nonzero weight vector."""


@dataclass(frozen=True)
class TrainerParams:
    """Stopping controls for the pairwise dual trainer.

    Training stops once the dual KKT gap falls below ``kkt_tol`` or after
    ``max_rounds`` rounds. Acquisition loops pass a small ``max_rounds`` for
    warm refits; the default is sized for training to optimality on small
    problems.
    """

    max_rounds: int = 20000
    sweeps_per_round: int = 1
    kkt_tol: float = 1e-8
    order_seed: int = 0x5EEDED


@dataclass(frozen=True)
class BinarySvm:
    """Linear decision rule sign(w . x + b); labels are +/-1.

    ``dual_coefs`` is optional trainer state enabling warm restarts; it is
    aligned with the training-set order of the fit that produced the model
    and is not part of serialized snapshots.
    """

    weights: np.ndarray
    bias: float
    C: float
    objective: float = float("nan")
    dual_coefs: np.ndarray | None = field(default=None, compare=False, repr=False)


def svm_objective(weights: np.ndarray, bias: float, X: np.ndarray, y: np.ndarray, C: float) -> float:
    margins = y * (X @ weights + bias)
    hinge = np.maximum(0.0, 1.0 - margins)
    return float(0.5 * weights @ weights + C * hinge.sum())


@njit(cache=True)
def _pair_move(X, y, alphas, w, C, i, j):  # pragma: no cover - jitted
    """Exact dual maximization along alpha_i += y_i*t, alpha_j -= y_j*t."""
    if i == j:
        return
    xi = X[i]
    xj = X[j]
    denom = 0.0
    for k in range(xi.shape[0]):
        dk = xi[k] - xj[k]
        denom += dk * dk
    if denom < 1e-12:
        return
    num = (y[i] - np.dot(xi, w)) - (y[j] - np.dot(xj, w))
    t = num / denom
    if y[i] > 0.0:
        lo, hi = -alphas[i], C - alphas[i]
    else:
        lo, hi = alphas[i] - C, alphas[i]
    if y[j] > 0.0:
        lo2, hi2 = alphas[j] - C, alphas[j]
    else:
        lo2, hi2 = -alphas[j], C - alphas[j]
    if lo2 > lo:
        lo = lo2
    if hi2 < hi:
        hi = hi2
    if t < lo:
        t = lo
    elif t > hi:
        t = hi
    if t != 0.0:
        alphas[i] += y[i] * t
        alphas[j] -= y[j] * t
        w += t * (xi - xj)


@njit(cache=True)
def _chain_sweep(X, y, alphas, w, C, order):  # pragma: no cover - jitted
    for k in range(order.shape[0] - 1):
        _pair_move(X, y, alphas, w, C, order[k], order[k + 1])


def _violating_pair(yg, y, alphas, C) -> tuple[int, int, float]:
    """Maximal violating pair and the dual KKT gap (<= 0 means optimal).

    ``yg`` is the dual gradient direction y - X @ w.
    """
    up = ((y > 0) & (alphas < C)) | ((y < 0) & (alphas > 0))
    low = ((y > 0) & (alphas > 0)) | ((y < 0) & (alphas < C))
    if not up.any() or not low.any():
        return -1, -1, -np.inf
    up_vals = np.where(up, yg, -np.inf)
    low_vals = np.where(low, yg, np.inf)
    i = int(np.argmax(up_vals))
    j = int(np.argmin(low_vals))
    return i, j, float(up_vals[i] - low_vals[j])


def _optimal_bias_from_margins(raw: np.ndarray, y: np.ndarray) -> float:
    """Exact minimizer over the bias of the hinge sum, given raw = X @ w."""
    r = 1.0 - y * raw
    breakpoints = np.sort(np.where(y > 0, r, -r))
    n_pos = int(np.count_nonzero(y > 0))
    if n_pos == 0:
        return float(breakpoints[0])
    if n_pos == breakpoints.size:
        return float(breakpoints[-1])
    return float(0.5 * (breakpoints[n_pos - 1] + breakpoints[n_pos]))


def train_binary(
    X: np.ndarray,
    y: np.ndarray,
    C: float,
    prior: BinarySvm | None = None,
    params: TrainerParams = TrainerParams(),
) -> BinarySvm:
    """Fit (or warm-refit) the soft-margin objective on labeled +/-1 data."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty training set")
    if not ((y == 1).any() and (y == -1).any()):
        raise ValueError("training data must contain both labels +1 and -1")
    if C <= 0:
        raise ValueError("C must be > 0")
    if params.max_rounds < 1 or params.sweeps_per_round < 1:
        raise ValueError("max_rounds and sweeps_per_round must be >= 1")

    alphas = np.zeros(n, dtype=np.float64)
    bias = 0.0
    if prior is not None:
        bias = float(prior.bias)
        # Appending zeros keeps the dual equality feasible; a changed C would
        # not, so that falls back to a cold dual start.
        if prior.dual_coefs is not None and prior.dual_coefs.size <= n and prior.C == C:
            alphas[: prior.dual_coefs.size] = prior.dual_coefs

    w = X.T @ (alphas * y)

    best_f = svm_objective(w, bias, X, y, C)
    best = (w.copy(), bias, alphas.copy())
    order_rng = np.random.default_rng(params.order_seed)
    for _ in range(params.max_rounds):
        raw = X @ w
        yg = y - raw
        bias = _optimal_bias_from_margins(raw, y)
        f = float(0.5 * w @ w + C * np.maximum(0.0, 1.0 - y * (raw + bias)).sum())
        if f < best_f:
            best_f = f
            best = (w.copy(), bias, alphas.copy())
        i, j, gap = _violating_pair(yg, y, alphas, C)
        if gap <= params.kkt_tol:
            break
        _pair_move(X, y, alphas, w, C, i, j)
        for _ in range(params.sweeps_per_round):
            order = order_rng.permutation(n).astype(np.int64)
            _chain_sweep(X, y, alphas, w, C, order)
    else:
        # Round budget exhausted: account for the final sweep's iterate.
        raw = X @ w
        bias = _optimal_bias_from_margins(raw, y)
        f = float(0.5 * w @ w + C * np.maximum(0.0, 1.0 - y * (raw + bias)).sum())
        if f < best_f:
            best_f = f
            best = (w.copy(), bias, alphas.copy())

    return BinarySvm(weights=best[0], bias=best[1], C=C, objective=best_f, dual_coefs=best[2])


def decision_value(model: BinarySvm, x: np.ndarray) -> float:
    return float(model.weights @ np.asarray(x, dtype=np.float64) + model.bias)


def decision_values(model: BinarySvm, X: np.ndarray) -> np.ndarray:
    return np.asarray(X, dtype=np.float64) @ model.weights + model.bias


def distance(model: BinarySvm, x: np.ndarray) -> float:
    """Euclidean distance from a point to the decision hyperplane."""
    norm = float(np.linalg.norm(model.weights))
    if norm == 0.0:
        raise DegenerateModelError("zero weight vector has no decision boundary")
    return abs(decision_value(model, x)) / norm


def distances(model: BinarySvm, X: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(model.weights))
    if norm == 0.0:
        raise DegenerateModelError("zero weight vector has no decision boundary")
    return np.abs(decision_values(model, X)) / norm


@dataclass(frozen=True)
class UncertaintyScore:
    value: float
    kind: str = "distance"


def uncertainty_distance(model: BinarySvm, x: np.ndarray) -> UncertaintyScore:
    """Inverse boundary distance, floored at ``DISTANCE_FLOOR`` to stay finite."""
    return UncertaintyScore(value=1.0 / max(distance(model, x), DISTANCE_FLOOR))


def uncertainties(model: BinarySvm, X: np.ndarray) -> np.ndarray:
    return 1.0 / np.maximum(distances(model, X), DISTANCE_FLOOR)


def one_vs_one_coding_matrix(n_classes: int) -> tuple[np.ndarray, tuple[tuple[int, int], ...]]:
    """Coding matrix M (n_classes x L) and the class-index pair per column.

    Column for pair (i, j) holds +1 at row i, -1 at row j, 0 elsewhere.
    """
    if n_classes < 2:
        raise ValueError("need at least two classes")
    pairs = tuple(combinations(range(n_classes), 2))
    M = np.zeros((n_classes, len(pairs)), dtype=np.int8)
    for col, (i, j) in enumerate(pairs):
        M[i, col] = 1
        M[j, col] = -1
    return M, pairs


@dataclass(frozen=True)
class MulticlassSvm:
    """One-vs-one ensemble: one binary component per unordered class pair."""

    classes: tuple[int, ...]
    coding_matrix: np.ndarray
    components: tuple[BinarySvm, ...]

    @property
    def n_components(self) -> int:
        return len(self.components)


def train_multiclass(
    X: np.ndarray,
    labels: np.ndarray,
    classes: tuple[int, ...],
    C: float,
    prior: MulticlassSvm | None = None,
    params: TrainerParams = TrainerParams(),
    update_only: set[int] | None = None,
) -> MulticlassSvm:
    """Fit all pairwise components (or only ``update_only``, reusing the rest).

    Component training sets are the label-filtered rows in dataset order, so
    append-only datasets keep warm-start dual state aligned.
    """
    classes = tuple(classes)
    M, pairs = one_vs_one_coding_matrix(len(classes))
    if prior is not None and prior.classes != classes:
        raise ValueError("prior model was trained on different classes")

    labels = np.asarray(labels)
    components = []
    for ell, (i, j) in enumerate(pairs):
        if update_only is not None and ell not in update_only:
            if prior is None:
                raise ValueError("update_only requires a prior model")
            components.append(prior.components[ell])
            continue
        mask = (labels == classes[i]) | (labels == classes[j])
        y = np.where(labels[mask] == classes[i], 1.0, -1.0)
        comp_prior = prior.components[ell] if prior is not None else None
        components.append(train_binary(X[mask], y, C, prior=comp_prior, params=params))

    return MulticlassSvm(classes=classes, coding_matrix=M, components=tuple(components))


def component_scores(model: MulticlassSvm, x: np.ndarray) -> np.ndarray:
    """Signed boundary distances of one point under every component."""
    scores = np.empty(model.n_components)
    for ell, comp in enumerate(model.components):
        norm = float(np.linalg.norm(comp.weights))
        if norm == 0.0:
            raise DegenerateModelError(f"component {ell} has a zero weight vector")
        scores[ell] = decision_value(comp, x) / norm
    return scores


def component_score_matrix(model: MulticlassSvm, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.empty((X.shape[0], model.n_components))
    for ell, comp in enumerate(model.components):
        norm = float(np.linalg.norm(comp.weights))
        if norm == 0.0:
            raise DegenerateModelError(f"component {ell} has a zero weight vector")
        out[:, ell] = (X @ comp.weights + comp.bias) / norm
    return out


def hamming_distances(coding_matrix: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Generalized Hamming distance from a score vector to each class row.

    Per column: 0 when the score sign matches the row entry, 1 when it is
    opposite, and 0.5 when either the row entry or the score sign is zero.
    """
    signs = np.sign(scores)
    M = coding_matrix
    loss = np.where(
        (M == 0) | (signs[None, :] == 0),
        0.5,
        np.where(M == signs[None, :], 0.0, 1.0),
    )
    return loss.sum(axis=1)


def hamming_decode(coding_matrix: np.ndarray, scores: np.ndarray) -> int:
    """Row index with the smallest generalized Hamming distance (ties: lowest)."""
    return int(np.argmin(hamming_distances(coding_matrix, scores)))


def predict(model: BinarySvm | MulticlassSvm, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if isinstance(model, BinarySvm):
        return np.where(decision_values(model, X) >= 0.0, 1, -1).astype(np.int64)
    S = component_score_matrix(model, X)
    classes = np.asarray(model.classes, dtype=np.int64)
    rows = np.array([hamming_decode(model.coding_matrix, s) for s in S])
    return classes[rows]


def accuracy(model: BinarySvm | MulticlassSvm, X: np.ndarray, y: np.ndarray) -> float:
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty test set")
    return float(np.mean(predict(model, X) == y))


def _pack_binary(model: BinarySvm) -> bytes:
    w = np.ascontiguousarray(model.weights, dtype="<f8")
    return (
        struct.pack("<I", w.size)
        + struct.pack("<d", model.C)
        + struct.pack("<d", model.bias)
        + w.tobytes()
    )


def _unpack_binary(buf: bytes, offset: int) -> tuple[BinarySvm, int]:
    (d,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    C, bias = struct.unpack_from("<dd", buf, offset)
    offset += 16
    w = np.frombuffer(buf, dtype="<f8", count=d, offset=offset).copy()
    offset += 8 * d
    return BinarySvm(weights=w, bias=bias, C=C), offset


def dump_model(model: BinarySvm | MulticlassSvm) -> bytes:
    """Serialize a model snapshot (little-endian, versioned)."""
    if isinstance(model, BinarySvm):
        return MODEL_MAGIC + struct.pack("<HB", MODEL_VERSION, 0) + _pack_binary(model)
    head = MODEL_MAGIC + struct.pack("<HB", MODEL_VERSION, 1)
    C_count = len(model.classes)
    head += struct.pack("<I", C_count)
    head += struct.pack(f"<{C_count}i", *model.classes)
    head += struct.pack("<I", model.n_components)
    head += np.ascontiguousarray(model.coding_matrix, dtype="<i1").tobytes()
    for comp in model.components:
        head += _pack_binary(comp)
    return head


def load_model(buf: bytes) -> BinarySvm | MulticlassSvm:
    if buf[:4] != MODEL_MAGIC:
        raise ValueError("not a model snapshot")
    version, kind = struct.unpack_from("<HB", buf, 4)
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    offset = 7
    if kind == 0:
        model, _ = _unpack_binary(buf, offset)
        return model
    (C_count,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    classes = struct.unpack_from(f"<{C_count}i", buf, offset)
    offset += 4 * C_count
    (L,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    M = np.frombuffer(buf, dtype="<i1", count=C_count * L, offset=offset).reshape(C_count, L).copy()
    offset += C_count * L
    components = []
    for _ in range(L):
        comp, offset = _unpack_binary(buf, offset)
        components.append(comp)
    return MulticlassSvm(classes=tuple(classes), coding_matrix=M, components=tuple(components))


def save_model(model: BinarySvm | MulticlassSvm, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_model(model))


def read_model(path) -> BinarySvm | MulticlassSvm:
    with open(path, "rb") as fh:
        return load_model(fh.read())
