"""Experiment orchestration: config parsing, replicate runs, CSV artifacts.

Configs are flat INI files (sectioned key-value text, diff-friendly). All
dB quantities are converted to linear scale exactly once, at load time.
Each (policy, seed) pair is an independent task; tasks may run in parallel
worker processes, and results are always written single-threaded in sorted
task order, so outputs are byte-identical regardless of worker count.
"""

from __future__ import annotations

import configparser
import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import arq as arq_mod
from . import dataio, federated, scheduling, svm, synth
from .channel import NoiseModel, mean_signal_power, snr_db_to_linear
from .rng import substream

MODES = ("arq_binary", "arq_multiclass", "scheduling", "federated")

ARQ_TRACE_FIELDS = (
    "block_index",
    "device_id",
    "uncertainty",
    "n_transmissions",
    "effective_snr",
    "budget_spent",
    "test_accuracy",
)
SCHED_TRACE_FIELDS = ("block", "selected_device", "policy", "snr", "dii", "test_accuracy")
FED_TRACE_FIELDS = (
    "round",
    "mode",
    "selected_devices",
    "mean_indicator",
    "global_loss",
    "test_accuracy",
    "gradient_computations",
)


class ConfigError(ValueError):
    """Config problem; carries the offending ``section.key`` field name."""

    def __init__(self, fieldname: str, message: str):
        super().__init__(f"{fieldname}: {message}")
        self.field = fieldname


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    out_dir: str
    seeds: tuple[int, ...]
    jobs: int = 0  # 0 means "use os.cpu_count()"

    # data
    source: str = "synthetic"
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    synthetic_dir: str = "synthetic-data"
    synthetic_train: int = 14000
    synthetic_test: int = 2400
    synthetic_seed: int = 0
    synthetic_morph: float = 0.0
    synthetic_clutter: float = 0.0
    classes: tuple[int, ...] = (3, 5)
    seed_size: int = 50
    devices: int = 10
    buffer_size: int = 400
    test_size: int = 2000
    buffer_assignment: str = "iid"

    # classifier training
    train_c: float = 0.2
    warm_rounds: int = 3
    seed_rounds: int = 2000

    # channel
    transmit_snr: float = snr_db_to_linear(15.0)

    # arq modes
    arq_policies: tuple[str, ...] = ("importance", "channel_aware", "no_retx")
    theta0: float = 10.0
    theta_snr: float = snr_db_to_linear(18.0)
    budget: int = 4000
    max_retx: int = 64
    eval_every: int = 25
    summary_grid: int = 0  # 0 means budget // 40

    # scheduling mode
    sched_policies: tuple[str, ...] = ("scheme1", "channel_aware", "data_aware")
    blocks: int = 100
    sched_remove_acquired: bool = False

    # federated mode
    fed_policies: tuple[str, ...] = ("gradient_norm", "mai")
    rounds: int = 60
    per_round: int = 3
    learning_rate: float = 0.5
    l2: float = 1e-3
    local_steps: int = 1

    def policies(self) -> tuple[str, ...]:
        if self.mode in ("arq_binary", "arq_multiclass"):
            return self.arq_policies
        if self.mode == "scheduling":
            return self.sched_policies
        return self.fed_policies

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError("experiment.mode", f"must be one of {MODES}")
        if not self.seeds:
            raise ConfigError("experiment.seeds", "at least one seed is required")
        if any(s < 0 for s in self.seeds):
            raise ConfigError("experiment.seeds", "seeds must be non-negative")
        if self.source not in ("synthetic", "idx"):
            raise ConfigError("data.source", "must be 'synthetic' or 'idx'")
        if self.source == "idx":
            for key, path in (
                ("data.train_images", self.train_images),
                ("data.train_labels", self.train_labels),
            ):
                if not path:
                    raise ConfigError(key, "required when data.source = idx")
                if not os.path.exists(path):
                    raise ConfigError(key, f"file not found: {path}")
            for key, path in (
                ("data.test_images", self.test_images),
                ("data.test_labels", self.test_labels),
            ):
                if path and not os.path.exists(path):
                    raise ConfigError(key, f"file not found: {path}")
        if len(self.classes) < 2:
            raise ConfigError("data.classes", "need at least two classes")
        if self.mode in ("arq_binary", "scheduling", "federated") and len(self.classes) != 2:
            raise ConfigError("data.classes", f"mode {self.mode} needs exactly two classes")
        if self.mode == "arq_multiclass" and len(self.classes) < 3:
            raise ConfigError("data.classes", "arq_multiclass needs at least three classes")
        if self.seed_size < 2:
            raise ConfigError("data.seed_size", "need at least two seed samples")
        if self.devices < 1 or self.buffer_size < 1:
            raise ConfigError("data.devices", "devices and buffer_size must be >= 1")
        if self.train_c <= 0:
            raise ConfigError("train.c", "must be > 0")
        if self.warm_rounds < 1 or self.seed_rounds < 1:
            raise ConfigError("train.warm_rounds", "training rounds must be >= 1")
        if self.transmit_snr <= 0:
            raise ConfigError("channel.transmit_snr_db", "transmit SNR must be positive")
        if self.mode in ("arq_binary", "arq_multiclass"):
            for p in self.arq_policies:
                if p not in arq_mod.ARQ_POLICIES:
                    raise ConfigError("arq.policies", f"unknown policy {p!r}")
            if self.theta0 < 0:
                raise ConfigError("arq.theta0", "must be >= 0")
            if self.theta_snr <= 0:
                raise ConfigError("arq.theta_snr_db", "must be positive")
            if self.budget < 1:
                raise ConfigError("arq.budget", "must be >= 1")
            if self.max_retx < 1:
                raise ConfigError("arq.max_retx", "must be >= 1")
            if self.eval_every < 1:
                raise ConfigError("arq.eval_every", "must be >= 1")
        if self.mode == "scheduling":
            for p in self.sched_policies:
                if p not in scheduling.SCHEDULING_POLICIES:
                    raise ConfigError("scheduling.policies", f"unknown policy {p!r}")
            if self.blocks < 0:
                raise ConfigError("scheduling.blocks", "must be >= 0")
        if self.mode == "federated":
            for p in self.fed_policies:
                if p not in federated.METRICS:
                    raise ConfigError("federated.policies", f"unknown policy {p!r}")
            if self.rounds < 0:
                raise ConfigError("federated.rounds", "must be >= 0")
            if not 1 <= self.per_round <= self.devices:
                raise ConfigError("federated.per_round", f"must lie in [1, {self.devices}]")
            if self.learning_rate <= 0:
                raise ConfigError("federated.learning_rate", "must be > 0")
            if self.l2 < 0:
                raise ConfigError("federated.l2", "must be >= 0")
            if self.local_steps < 1:
                raise ConfigError("federated.local_steps", "must be >= 1")


def _get(parser, section, key, cast, default, fieldname=None):
    fieldname = fieldname or f"{section}.{key}"
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(fieldname, f"cannot parse {raw!r}: {exc}") from None


def _int_tuple(raw: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in raw.replace(" ", "").split(",") if tok)


def _str_tuple(raw: str) -> tuple[str, ...]:
    return tuple(tok for tok in raw.replace(" ", "").split(",") if tok)


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    if not os.path.exists(path):
        raise ConfigError("config", f"file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.read(path)
    if not parser.has_section("experiment"):
        raise ConfigError("experiment", "missing [experiment] section")

    base = os.path.dirname(os.path.abspath(path))

    def respath(raw):
        return raw if raw is None or os.path.isabs(raw) else os.path.join(base, raw)

    defaults = ExperimentConfig(mode="arq_binary", out_dir=".", seeds=(0,))
    cfg = ExperimentConfig(
        mode=_get(parser, "experiment", "mode", str, None),
        out_dir=_get(parser, "experiment", "out_dir", str, "runs"),
        seeds=_get(parser, "experiment", "seeds", _int_tuple, ()),
        jobs=_get(parser, "experiment", "jobs", int, 0),
        source=_get(parser, "data", "source", str, defaults.source),
        train_images=respath(_get(parser, "data", "train_images", str, None)),
        train_labels=respath(_get(parser, "data", "train_labels", str, None)),
        test_images=respath(_get(parser, "data", "test_images", str, None)),
        test_labels=respath(_get(parser, "data", "test_labels", str, None)),
        synthetic_dir=respath(
            _get(parser, "data", "synthetic_dir", str, defaults.synthetic_dir)
        ),
        synthetic_train=_get(parser, "data", "synthetic_train", int, defaults.synthetic_train),
        synthetic_test=_get(parser, "data", "synthetic_test", int, defaults.synthetic_test),
        synthetic_seed=_get(parser, "data", "synthetic_seed", int, defaults.synthetic_seed),
        synthetic_morph=_get(parser, "data", "synthetic_morph", float, defaults.synthetic_morph),
        synthetic_clutter=_get(
            parser, "data", "synthetic_clutter", float, defaults.synthetic_clutter
        ),
        classes=_get(parser, "data", "classes", _int_tuple, defaults.classes),
        seed_size=_get(parser, "data", "seed_size", int, defaults.seed_size),
        devices=_get(parser, "data", "devices", int, defaults.devices),
        buffer_size=_get(parser, "data", "buffer_size", int, defaults.buffer_size),
        test_size=_get(parser, "data", "test_size", int, defaults.test_size),
        buffer_assignment=_get(
            parser, "data", "buffer_assignment", str, defaults.buffer_assignment
        ),
        train_c=_get(parser, "train", "c", float, defaults.train_c),
        warm_rounds=_get(parser, "train", "warm_rounds", int, defaults.warm_rounds),
        seed_rounds=_get(parser, "train", "seed_rounds", int, defaults.seed_rounds),
        transmit_snr=snr_db_to_linear(
            _get(parser, "channel", "transmit_snr_db", float, 15.0)
        ),
        arq_policies=_get(parser, "arq", "policies", _str_tuple, defaults.arq_policies),
        theta0=_get(parser, "arq", "theta0", float, defaults.theta0),
        theta_snr=snr_db_to_linear(_get(parser, "arq", "theta_snr_db", float, 18.0)),
        budget=_get(parser, "arq", "budget", int, defaults.budget),
        max_retx=_get(parser, "arq", "max_retx", int, defaults.max_retx),
        eval_every=_get(parser, "arq", "eval_every", int, defaults.eval_every),
        summary_grid=_get(parser, "arq", "summary_grid", int, defaults.summary_grid),
        sched_policies=_get(
            parser, "scheduling", "policies", _str_tuple, defaults.sched_policies
        ),
        blocks=_get(parser, "scheduling", "blocks", int, defaults.blocks),
        sched_remove_acquired=_get(
            parser,
            "scheduling",
            "remove_acquired",
            lambda raw: raw.strip().lower() in ("1", "true", "yes"),
            defaults.sched_remove_acquired,
        ),
        fed_policies=_get(parser, "federated", "policies", _str_tuple, defaults.fed_policies),
        rounds=_get(parser, "federated", "rounds", int, defaults.rounds),
        per_round=_get(parser, "federated", "per_round", int, defaults.per_round),
        learning_rate=_get(
            parser, "federated", "learning_rate", float, defaults.learning_rate
        ),
        l2=_get(parser, "federated", "l2", float, defaults.l2),
        local_steps=_get(parser, "federated", "local_steps", int, defaults.local_steps),
    )
    if cfg.mode is None:
        raise ConfigError("experiment.mode", "is required")
    cfg.validate()
    return cfg


def _dataset_paths(config: ExperimentConfig) -> dict[str, str | None]:
    if config.source == "synthetic":
        paths = synth.write_corpus(
            config.synthetic_dir,
            n_train=config.synthetic_train,
            n_test=config.synthetic_test,
            seed=config.synthetic_seed,
            classes=config.classes,
            morph_max=config.synthetic_morph,
            clutter_max=config.synthetic_clutter,
        )
        return dict(paths)
    return {
        "train_images": config.train_images,
        "train_labels": config.train_labels,
        "test_images": config.test_images,
        "test_labels": config.test_labels,
    }


@dataclass
class PreparedData:
    """Resolved per-seed data: splits, test set, and channel noise reference."""

    split: dataio.Split
    test_features: np.ndarray
    test_labels: np.ndarray
    signal_power: float


def prepare_data(config: ExperimentConfig, seed: int) -> PreparedData:
    paths = _dataset_paths(config)
    features = dataio.load_idx_images(paths["train_images"])
    labels = dataio.load_idx_labels(paths["train_labels"])

    if config.mode == "arq_multiclass":
        pool_x, pool_y = dataio.build_multiclass_subset(features, labels, config.classes)
    else:
        pool_x, pool_y = dataio.build_binary_subset(
            features, labels, config.classes[0], config.classes[1]
        )

    dedicated_test = paths.get("test_images") and paths.get("test_labels")
    spec = dataio.SplitSpec(
        seed_size=config.seed_size,
        buffer_size=config.buffer_size,
        device_count=config.devices,
        test_size=0 if dedicated_test else config.test_size,
        seed=seed,
        buffer_assignment=config.buffer_assignment,
    )
    split = dataio.partition(pool_x, pool_y, spec)

    if dedicated_test:
        test_x = dataio.load_idx_images(paths["test_images"])
        test_y = dataio.load_idx_labels(paths["test_labels"])
        if config.mode == "arq_multiclass":
            test_x, test_y = dataio.build_multiclass_subset(test_x, test_y, config.classes)
        else:
            test_x, test_y = dataio.build_binary_subset(
                test_x, test_y, config.classes[0], config.classes[1]
            )
    else:
        test_x, test_y = split.test_features, split.test_labels

    return PreparedData(
        split=split,
        test_features=test_x,
        test_labels=test_y,
        signal_power=mean_signal_power(pool_x),
    )


def _seed_model(config: ExperimentConfig, data: PreparedData):
    params = svm.TrainerParams(max_rounds=config.seed_rounds)
    if config.mode == "arq_multiclass":
        return svm.train_multiclass(
            data.split.seed_features,
            data.split.seed_labels,
            config.classes,
            config.train_c,
            params=params,
        )
    return svm.train_binary(
        data.split.seed_features,
        data.split.seed_labels.astype(np.float64),
        config.train_c,
        params=params,
    )


def run_task(config: ExperimentConfig, policy: str, seed: int) -> dict:
    """One (policy, seed) experiment; returns trace rows plus curve points."""
    data = prepare_data(config, seed)
    model = _seed_model(config, data)
    noise = NoiseModel(signal_power=data.signal_power)
    warm = svm.TrainerParams(max_rounds=config.warm_rounds)
    seed_acc = svm.accuracy(model, data.test_features, data.test_labels)

    if config.mode in ("arq_binary", "arq_multiclass"):
        policy_cfg = arq_mod.ArqPolicyConfig(
            theta0=config.theta0,
            theta_snr=config.theta_snr,
            transmit_snr=config.transmit_snr,
            budget=config.budget,
            max_retx_per_sample=config.max_retx,
        )
        _, trace = arq_mod.run_arq_acquisition(
            policy,
            data.split.buffers,
            model,
            noise,
            policy_cfg,
            rng_root=seed,
            train_c=config.train_c,
            warm_params=warm,
            eval_every=config.eval_every,
            test_features=data.test_features,
            test_labels=data.test_labels,
            seed_features=data.split.seed_features,
            seed_labels=data.split.seed_labels,
        )
        rows = [
            {
                "block_index": r.block_index,
                "device_id": r.device_id,
                "uncertainty": r.uncertainty,
                "n_transmissions": r.n_transmissions,
                "effective_snr": r.effective_snr,
                "budget_spent": r.budget_spent,
                "test_accuracy": r.test_accuracy,
            }
            for r in trace.records
        ]
        checkpoints = [(0, seed_acc)] + [
            (r.budget_spent, r.test_accuracy)
            for r in trace.records
            if r.test_accuracy is not None
        ]
        return {"policy": policy, "seed": seed, "rows": rows, "checkpoints": checkpoints}

    if config.mode == "scheduling":
        sched_cfg = scheduling.SchedulingConfig(
            blocks=config.blocks,
            transmit_snr=config.transmit_snr,
            remove_acquired=config.sched_remove_acquired,
        )
        _, trace = scheduling.run_scheduling_acquisition(
            policy,
            data.split.buffers,
            model,
            noise,
            sched_cfg,
            rng_root=seed,
            train_c=config.train_c,
            warm_params=warm,
            test_features=data.test_features,
            test_labels=data.test_labels,
            seed_features=data.split.seed_features,
            seed_labels=data.split.seed_labels,
        )
        rows = [
            {
                "block": r.block,
                "selected_device": r.selected_device,
                "policy": r.policy,
                "snr": r.snr,
                "dii": r.dii,
                "test_accuracy": r.test_accuracy,
            }
            for r in trace.records
        ]
        checkpoints = [(0, seed_acc)] + [
            (r.block + 1, r.test_accuracy) for r in trace.records if r.test_accuracy is not None
        ]
        return {"policy": policy, "seed": seed, "rows": rows, "checkpoints": checkpoints}

    # federated
    shards = [
        (federated.augment_bias(b.features), b.labels.astype(np.float64))
        for b in data.split.buffers
    ]
    fed_cfg = federated.FederatedConfig(
        rounds=config.rounds,
        per_round=config.per_round,
        learning_rate=config.learning_rate,
        l2=config.l2,
        metric=policy,
        upload="gradient" if policy == "gradient_norm" else "model",
        local_steps=config.local_steps,
    )
    _, records, _ = federated.run_federated(
        fed_cfg,
        shards,
        test_features=federated.augment_bias(data.test_features),
        test_labels=data.test_labels.astype(np.float64),
    )
    rows = [
        {
            "round": r.round,
            "mode": r.mode,
            "selected_devices": ";".join(str(k) for k in r.selected),
            "mean_indicator": r.mean_indicator,
            "global_loss": r.global_loss,
            "test_accuracy": r.test_accuracy,
            "gradient_computations": r.gradient_computations,
        }
        for r in records
    ]
    checkpoints = [(0, seed_acc)] + [
        (r.round + 1, r.test_accuracy) for r in records if r.test_accuracy is not None
    ]
    return {"policy": policy, "seed": seed, "rows": rows, "checkpoints": checkpoints}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trace_csv(path: str, fieldnames, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[name]) for name in fieldnames])


def _curve_value(checkpoints, grid_point) -> float | None:
    """Step-function curve: last checkpointed accuracy at or before the point."""
    value = None
    for spent, acc in checkpoints:
        if spent <= grid_point:
            value = acc
        else:
            break
    return value


@dataclass
class HistogramBin:
    lo: float
    hi: float
    count: int
    mean_transmissions: float


def build_retx_histogram(
    records: list[tuple[float, int]], n_bins: int = 10, edges: str = "quantile"
) -> list[HistogramBin]:
    """Mean transmissions per uncertainty bin over (uncertainty, n_tx) pairs.

    ``edges`` is "quantile" (equal-count bins, the default: inverse-distance
    uncertainty is heavy-tailed, so linear bins would starve the upper
    range) or "linear".
    """
    if not records:
        raise ValueError("no records to bin")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    u = np.array([r[0] for r in records])
    t = np.array([r[1] for r in records], dtype=np.float64)
    if edges == "quantile":
        qs = np.quantile(u, np.linspace(0.0, 1.0, n_bins + 1))
        cuts = np.unique(qs)
    elif edges == "linear":
        cuts = np.linspace(u.min(), u.max(), n_bins + 1)
    else:
        raise ValueError("edges must be 'quantile' or 'linear'")
    if cuts.size < 2:
        cuts = np.array([u.min(), u.max() + 1e-12])
    idx = np.clip(np.searchsorted(cuts, u, side="right") - 1, 0, cuts.size - 2)
    bins = []
    for b in range(cuts.size - 1):
        mask = idx == b
        count = int(mask.sum())
        mean_tx = float(t[mask].mean()) if count else float("nan")
        bins.append(HistogramBin(lo=float(cuts[b]), hi=float(cuts[b + 1]), count=count, mean_transmissions=mean_tx))
    return bins


@dataclass
class MetricsSummary:
    """Aggregated accuracy curves (and, for arq, the retx histograms)."""

    mode: str
    summary_rows: list[dict] = field(default_factory=list)
    histogram_rows: list[dict] = field(default_factory=list)
    trace_paths: list[str] = field(default_factory=list)


def _checkpoint_grid(config: ExperimentConfig) -> list[int]:
    if config.mode in ("arq_binary", "arq_multiclass"):
        step = config.summary_grid or max(1, config.budget // 40)
        return list(range(0, config.budget + 1, step))
    if config.mode == "scheduling":
        return list(range(0, config.blocks + 1))
    return list(range(0, config.rounds + 1))


def run_experiment(config: ExperimentConfig, out_dir: str | None = None) -> MetricsSummary:
    """Run every (policy, seed) task, write traces, summary, and histograms."""
    config.validate()
    out = out_dir or config.out_dir
    os.makedirs(out, exist_ok=True)
    if config.source == "synthetic":
        _dataset_paths(config)  # materialize the corpus once, pre-fork

    tasks = [(policy, seed) for policy in config.policies() for seed in config.seeds]
    jobs = config.jobs or os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_task, config, p, s) for p, s in tasks]
            results = [f.result() for f in futures]
    else:
        results = [run_task(config, p, s) for p, s in tasks]

    results.sort(key=lambda r: (r["policy"], r["seed"]))

    if config.mode in ("arq_binary", "arq_multiclass"):
        fields = ARQ_TRACE_FIELDS
    elif config.mode == "scheduling":
        fields = SCHED_TRACE_FIELDS
    else:
        fields = FED_TRACE_FIELDS

    summary = MetricsSummary(mode=config.mode)
    for res in results:
        trace_path = os.path.join(out, f"{config.mode}_{res['policy']}_seed{res['seed']}.csv")
        write_trace_csv(trace_path, fields, res["rows"])
        summary.trace_paths.append(trace_path)

    grid = _checkpoint_grid(config)
    for policy in config.policies():
        curves = [r["checkpoints"] for r in results if r["policy"] == policy]
        for g in grid:
            values = [v for c in curves if (v := _curve_value(c, g)) is not None]
            if not values:
                continue
            summary.summary_rows.append(
                {
                    "policy": policy,
                    "checkpoint": g,
                    "mean_accuracy": float(np.mean(values)),
                    "std_accuracy": float(np.std(values)),
                    "n_runs": len(values),
                }
            )

    summary_path = os.path.join(out, "summary.csv")
    write_trace_csv(
        summary_path,
        ("policy", "checkpoint", "mean_accuracy", "std_accuracy", "n_runs"),
        summary.summary_rows,
    )

    if config.mode in ("arq_binary", "arq_multiclass"):
        for policy in config.policies():
            pooled = [
                (row["uncertainty"], row["n_transmissions"])
                for res in results
                if res["policy"] == policy
                for row in res["rows"]
            ]
            if not pooled:
                continue
            for i, hbin in enumerate(build_retx_histogram(pooled)):
                summary.histogram_rows.append(
                    {
                        "policy": policy,
                        "bin_index": i,
                        "bin_lo": hbin.lo,
                        "bin_hi": hbin.hi,
                        "count": hbin.count,
                        "mean_transmissions": hbin.mean_transmissions,
                    }
                )
        write_trace_csv(
            os.path.join(out, "retx_histogram.csv"),
            ("policy", "bin_index", "bin_lo", "bin_hi", "count", "mean_transmissions"),
            summary.histogram_rows,
        )

    return summary


def summarize_traces(paths: list[str]) -> list[dict]:
    """Aggregate existing trace CSVs into mean/std accuracy rows.

    Groups by (policy, checkpoint) where the checkpoint key and policy are
    inferred from the trace schema: arq traces use budget_spent (no policy
    column), scheduling traces use block, federated traces use round.
    """
    groups: dict[tuple, list[float]] = {}
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            if "budget_spent" in header:
                key_col, policy_col = "budget_spent", None
            elif "block" in header:
                key_col, policy_col = "block", "policy"
            elif "round" in header:
                key_col, policy_col = "round", "mode"
            else:
                raise ValueError(f"{path}: unrecognized trace schema {header}")
            for row in reader:
                acc = row.get("test_accuracy", "")
                if acc == "" or acc is None:
                    continue
                policy = row[policy_col] if policy_col else ""
                key = (policy, int(row[key_col]))
                groups.setdefault(key, []).append(float(acc))
    rows = []
    for (policy, checkpoint) in sorted(groups):
        values = groups[(policy, checkpoint)]
        rows.append(
            {
                "policy": policy,
                "checkpoint": checkpoint,
                "mean_accuracy": float(np.mean(values)),
                "std_accuracy": float(np.std(values)),
                "n_runs": len(values),
            }
        )
    return rows
