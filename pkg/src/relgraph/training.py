"""Training loop, evaluation, multi-seed experiments and sweeps.

One run means: for each seed, initialize parameters, shuffle mini-batches,
take adaptive-moment gradient steps, then score the test split; reports
carry per-seed metrics with their mean and standard deviation so published
tables can be reproduced line by line.  Everything is deterministic given
(config, seed, dataset); wall time is the one report field excluded from the
determinism contract.
"""

from __future__ import annotations

import logging
import random
import time
import zlib
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .autodiff import Tape, softmax
from .data import PreparedDataset, PreparedInstance, load_splits
from .encoders import (
    Activation,
    BoundParams,
    EncoderConfig,
    GraphCache,
    GraphEncoderKind,
    Mixer,
    ModelParams,
    encode_graph,
    init_params,
    param_count,
    prepare_graph_cache,
    seq_encode,
)
from .errors import ConfigError, ContractError, NumericError, TrainingAbort
from .graph import SubwordGraph, randomize_graph
from .model import (
    Prediction,
    RelationSchema,
    argmax_label,
    classify_logits,
    extract_entity_reps,
    macro_f1,
    micro_f1,
)
from .tokenizer import MarkerScheme

log = logging.getLogger(__name__)

CONFIG_VERSION = 1

# protocol settings for fine-tuning real pre-trained encoders; they do not
# apply to the toy encoder and are recorded here only as presets
PLM_PROTOCOL_PRESETS = {
    "bert_base_english": {"learning_rate": 5e-5, "epochs": 5},
    "bert_large_english": {"learning_rate": 3e-5, "epochs": 5},
    "bert_base_chinese": {"learning_rate": 5e-5, "epochs": 10},
    "bert_wwm_chinese": {"learning_rate": 5e-5, "epochs": 10},
}


class GraphSource(str, Enum):
    GMR = "gmr"
    RANDOM = "random"
    NONE = "none"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    epochs: int = 5
    batch_size: int = 32
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    scheme: MarkerScheme = MarkerScheme.ENTITY
    graph_source: GraphSource = GraphSource.GMR
    max_len: int = 256

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.seeds:
            raise ConfigError("need at least one seed")

    def effective_encoder(self) -> EncoderConfig:
        """No graph source means the no-graph classifier path."""
        if self.graph_source is GraphSource.NONE:
            return replace(self.encoder, graph_encoder=GraphEncoderKind.NO_GRAPH)
        return self.encoder

    def to_dict(self) -> dict:
        out = asdict(self)
        out["seeds"] = list(self.seeds)
        out["encoder"] = {
            "d": self.encoder.d,
            "L": self.encoder.L,
            "activation": self.encoder.activation.value,
            "mixer": self.encoder.mixer.value,
            "graph_encoder": self.encoder.graph_encoder.value,
            "self_loops": self.encoder.self_loops,
        }
        out["scheme"] = self.scheme.value
        out["graph_source"] = self.graph_source.value
        out["version"] = CONFIG_VERSION
        return out

    @staticmethod
    def from_dict(obj: dict) -> "TrainConfig":
        obj = dict(obj)
        version = obj.pop("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version!r}")
        enc_obj = dict(obj.pop("encoder", {}))
        enc_known = {"d", "L", "activation", "mixer", "graph_encoder", "self_loops"}
        unknown = set(enc_obj) - enc_known
        if unknown:
            raise ConfigError(f"unknown encoder config keys: {sorted(unknown)}")
        if "activation" in enc_obj:
            enc_obj["activation"] = Activation(enc_obj["activation"])
        if "mixer" in enc_obj:
            enc_obj["mixer"] = Mixer(enc_obj["mixer"])
        if "graph_encoder" in enc_obj:
            enc_obj["graph_encoder"] = GraphEncoderKind(enc_obj["graph_encoder"])
        known = set(TrainConfig.__dataclass_fields__) - {"encoder"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        if "seeds" in obj:
            obj["seeds"] = tuple(obj["seeds"])
        if "scheme" in obj:
            obj["scheme"] = MarkerScheme(obj["scheme"])
        if "graph_source" in obj:
            obj["graph_source"] = GraphSource(obj["graph_source"])
        return TrainConfig(encoder=EncoderConfig(**enc_obj), **obj)


@dataclass
class SeedResult:
    seed: int
    micro_f1: float
    macro_f1: float
    epoch_losses: list[float]
    best_epoch: int | None = None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "epoch_losses": self.epoch_losses,
            "best_epoch": self.best_epoch,
        }


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return mean, var**0.5


@dataclass
class ExperimentReport:
    label: str
    config: dict
    per_seed: list[SeedResult]
    micro_mean: float
    micro_std: float
    macro_mean: float
    macro_std: float
    param_counts: dict
    n_train: int
    n_test: int
    n_rejected: int
    wall_time_sec: float

    def core(self) -> dict:
        """Everything except wall time; the determinism contract covers this."""
        return {
            "label": self.label,
            "config": self.config,
            "per_seed": [s.to_dict() for s in self.per_seed],
            "micro_mean": self.micro_mean,
            "micro_std": self.micro_std,
            "macro_mean": self.macro_mean,
            "macro_std": self.macro_std,
            "param_counts": self.param_counts,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "n_rejected": self.n_rejected,
        }

    def to_dict(self) -> dict:
        out = self.core()
        out["wall_time_sec"] = self.wall_time_sec
        return out


def _instance_seed(seed: int, instance_id: str) -> int:
    """Stable per-instance randomization seed (platform-independent)."""
    return zlib.crc32(f"{seed}:{instance_id}".encode("utf-8"))


def select_graphs(
    items: list[PreparedInstance], source: GraphSource, seed: int
) -> list[SubwordGraph | None]:
    """Graph actually fed to the encoder for each instance under a source."""
    if source is GraphSource.NONE:
        return [None] * len(items)
    if source is GraphSource.GMR:
        return [item.graph for item in items]
    return [
        randomize_graph(item.graph, _instance_seed(seed, item.instance_id))
        for item in items
    ]


def _forward_logits(
    tape: Tape,
    item: PreparedInstance,
    graph: SubwordGraph | None,
    bound: BoundParams,
    enc_cfg: EncoderConfig,
    cache: GraphCache | None = None,
):
    h = seq_encode(tape, item.seq, bound, enc_cfg)
    h_out = encode_graph(tape, h, graph, bound, enc_cfg, cache=cache)
    h_subj, h_obj = extract_entity_reps(tape, h_out, item.seq)
    return classify_logits(tape, h_subj, h_obj, bound)


class Adam:
    """Standard adaptive-moment estimation with bias correction."""

    def __init__(self, lr: float, beta1: float, beta2: float, eps: float) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for name, arr in arrays.items():
            g = grads[name]
            m = self._m.setdefault(name, np.zeros_like(arr))
            v = self._v.setdefault(name, np.zeros_like(arr))
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            arr -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def train_one_seed(
    cfg: TrainConfig,
    dataset: PreparedDataset,
    seed: int,
) -> tuple[ModelParams, SeedResult]:
    """Train on one seed and score the test split.

    With a dev split the best dev-micro epoch's parameters are kept
    (earliest epoch on ties); otherwise the final epoch's parameters are
    used.
    """
    if dataset.vocab is None:
        raise ContractError("dataset has no vocabulary attached")
    enc_cfg = cfg.effective_encoder()
    schema = dataset.schema
    rng = np.random.default_rng(seed)
    params = init_params(rng, len(dataset.vocab), schema.n_labels, enc_cfg)
    adam = Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    shuffle_rng = random.Random(seed)

    train_graphs = select_graphs(dataset.train, cfg.graph_source, seed)
    dev_graphs = select_graphs(dataset.dev, cfg.graph_source, seed)
    test_graphs = select_graphs(dataset.test, cfg.graph_source, seed)
    train_caches = [prepare_graph_cache(g, enc_cfg) for g in train_graphs]

    gold_index = [schema.index_of(item.gold) for item in dataset.train]
    epoch_losses: list[float] = []
    best: tuple[float, int, ModelParams] | None = None

    for epoch in range(cfg.epochs):
        order = list(range(len(dataset.train)))
        shuffle_rng.shuffle(order)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            tape = Tape()
            bound = params.bind(tape)
            try:
                losses = []
                for i in batch:
                    logits = _forward_logits(
                        tape, dataset.train[i], train_graphs[i], bound, enc_cfg,
                        cache=train_caches[i],
                    )
                    losses.append(tape.softmax_cross_entropy(logits, gold_index[i]))
                loss = tape.scale(tape.add_n(losses), 1.0 / len(losses))
                tape.backward(loss)
            except NumericError as exc:
                ids = [dataset.train[i].instance_id for i in batch]
                raise TrainingAbort(
                    f"non-finite loss in epoch {epoch}, batch instances {ids}: {exc}"
                ) from exc
            named = bound.named_tensors()
            grads = {name: tape.grad(t) for name, t in named.items()}
            adam.step(params.named_arrays(), grads)
            epoch_loss += float(loss.data)
            n_batches += 1
        epoch_losses.append(epoch_loss / n_batches if n_batches else 0.0)

        if dataset.dev:
            _, dev_micro, _ = evaluate(params, dataset.dev, dev_graphs, enc_cfg, schema)
            if best is None or dev_micro > best[0]:
                best = (dev_micro, epoch, _copy_params(params))

    best_epoch = None
    if best is not None:
        best_epoch = best[1]
        params = best[2]

    _, test_micro, test_macro = evaluate(
        params, dataset.test, test_graphs, enc_cfg, schema
    )
    result = SeedResult(
        seed=seed,
        micro_f1=test_micro,
        macro_f1=test_macro,
        epoch_losses=epoch_losses,
        best_epoch=best_epoch,
    )
    return params, result


def _copy_params(params: ModelParams) -> ModelParams:
    return ModelParams(
        embedding=params.embedding.copy(),
        w_proj=params.w_proj.copy(),
        w_r=params.w_r.copy(),
        b_r=params.b_r.copy(),
        wq=None if params.wq is None else params.wq.copy(),
        wk=None if params.wk is None else params.wk.copy(),
        wv=None if params.wv is None else params.wv.copy(),
        w_gate=None if params.w_gate is None else params.w_gate.copy(),
        gcn_weights=tuple(w.copy() for w in params.gcn_weights),
    )


def evaluate(
    params: ModelParams,
    items: list[PreparedInstance],
    graphs: list[SubwordGraph | None],
    enc_cfg: EncoderConfig,
    schema: RelationSchema,
) -> tuple[list[Prediction], float, float]:
    """Predict every instance and compute micro/macro F1."""
    if not items:
        raise ContractError("evaluate needs at least one instance")
    preds: list[Prediction] = []
    for item, graph in zip(items, graphs):
        tape = Tape()
        bound = params.bind(tape)
        logits = _forward_logits(
            tape, item, graph, bound, enc_cfg, cache=prepare_graph_cache(graph, enc_cfg)
        )
        probs = softmax(logits.data)
        preds.append(
            Prediction(
                instance_id=item.instance_id,
                probabilities=probs,
                pred_label=argmax_label(probs, schema),
                gold_label=item.gold,
            )
        )
    return preds, micro_f1(preds, schema), macro_f1(preds, schema)


def train(
    cfg: TrainConfig, dataset: PreparedDataset, label: str = ""
) -> tuple[ModelParams, ExperimentReport]:
    """Run every configured seed; returns the last seed's parameters."""
    t0 = time.perf_counter()
    per_seed: list[SeedResult] = []
    params: ModelParams | None = None
    for seed in cfg.seeds:
        params, result = train_one_seed(cfg, dataset, seed)
        per_seed.append(result)
        log.info(
            "seed %d: micro %.4f macro %.4f", seed, result.micro_f1, result.macro_f1
        )
    micro_mean, micro_std = _mean_std([r.micro_f1 for r in per_seed])
    macro_mean, macro_std = _mean_std([r.macro_f1 for r in per_seed])
    assert params is not None
    counts = param_count(params, cfg.effective_encoder())
    report = ExperimentReport(
        label=label,
        config=cfg.to_dict(),
        per_seed=per_seed,
        micro_mean=micro_mean,
        micro_std=micro_std,
        macro_mean=macro_mean,
        macro_std=macro_std,
        param_counts=counts,
        n_train=len(dataset.train),
        n_test=len(dataset.test),
        n_rejected=dataset.n_rejected,
        wall_time_sec=time.perf_counter() - t0,
    )
    return params, report


class SweepAxis(str, Enum):
    LAYERS = "layers"
    GRAPH_SOURCE = "graph"
    PARSER_SOURCE = "parser"


def run_sweep(
    base_config: TrainConfig,
    axis: SweepAxis,
    values: list,
    dataset: PreparedDataset | None = None,
    data_dir: str | Path | None = None,
) -> list[ExperimentReport]:
    """One full multi-seed run per value along the chosen axis.

    The parser axis was built for extrinsic parser comparison: each value is
    a directory of alternative graph files for the same instances, loaded
    against the shared data_dir.
    """
    if not values:
        raise ContractError("sweep needs at least one value")
    reports: list[ExperimentReport] = []
    for value in values:
        if axis is SweepAxis.LAYERS:
            cfg = replace(base_config, encoder=replace(base_config.encoder, L=int(value)))
            label = f"L={int(value)}"
            ds = _require_dataset(base_config, dataset, data_dir)
        elif axis is SweepAxis.GRAPH_SOURCE:
            cfg = replace(base_config, graph_source=GraphSource(value))
            label = f"graph={GraphSource(value).value}"
            ds = _require_dataset(base_config, dataset, data_dir)
        elif axis is SweepAxis.PARSER_SOURCE:
            if data_dir is None:
                raise ConfigError("parser sweep needs data_dir")
            cfg = base_config
            label = f"parser={Path(value).name}"
            ds = load_splits(
                data_dir,
                scheme=base_config.scheme,
                max_len=base_config.max_len,
                self_loops=base_config.encoder.self_loops,
                gmr_dir=value,
            )
        else:
            raise ConfigError(f"unknown sweep axis {axis!r}")
        _, report = train(cfg, ds, label=label)
        reports.append(report)
    return reports


def _require_dataset(
    cfg: TrainConfig,
    dataset: PreparedDataset | None,
    data_dir: str | Path | None,
) -> PreparedDataset:
    if dataset is not None:
        return dataset
    if data_dir is None:
        raise ConfigError("sweep needs a dataset or data_dir")
    return load_splits(
        data_dir,
        scheme=cfg.scheme,
        max_len=cfg.max_len,
        self_loops=cfg.encoder.self_loops,
    )
