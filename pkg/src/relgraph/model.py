"""Classification head over entity-anchor representations, plus metrics.

The head reads the rows of the encoded sequence at the two opening-marker
anchors, projects their concatenation through a ReLU layer and a softmax
classifier.  Micro-F1 follows the no-relation-excluding convention (an
instance is predicted-positive iff its argmax is not NA); macro-F1 averages
per-relation F1 over the real relations.  Both are emitted because published
"test F1" columns rarely say which convention they use.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Array, Tape, Tensor, softmax
from .encoders import BoundParams, ModelParams
from .errors import ContractError, SchemaError
from .tokenizer import MarkedSequence


@dataclass(frozen=True)
class RelationSchema:
    """Ordered relation label set with an optional no-relation label."""

    relations: tuple[str, ...]
    na_label: str | None = None

    def __post_init__(self) -> None:
        if len(set(self.relations)) != len(self.relations):
            raise SchemaError("relation labels must be unique")
        if self.na_label is not None and self.na_label not in self.relations:
            raise SchemaError(
                f"na_label {self.na_label!r} is not among the relations"
            )

    @property
    def n_labels(self) -> int:
        return len(self.relations)

    def index_of(self, label: str) -> int:
        try:
            return self.relations.index(label)
        except ValueError:
            raise SchemaError(f"unknown relation label {label!r}") from None

    def label_of(self, index: int) -> str:
        return self.relations[index]

    @staticmethod
    def from_labels(labels, na_label: str | None = None) -> "RelationSchema":
        ordered = sorted(set(labels) | ({na_label} if na_label else set()))
        return RelationSchema(tuple(ordered), na_label)


@dataclass
class Prediction:
    instance_id: str
    probabilities: Array
    pred_label: str
    gold_label: str

    def __post_init__(self) -> None:
        total = float(np.sum(self.probabilities))
        if np.any(np.asarray(self.probabilities) < 0) or abs(total - 1.0) > 1e-9:
            raise ContractError(
                f"probabilities must be non-negative and sum to 1, got sum {total}"
            )


def extract_entity_reps(
    tape: Tape, h_out: Tensor, seq: MarkedSequence
) -> tuple[Tensor, Tensor]:
    """Rows of the encoded sequence at the two opening-marker anchors."""
    n = h_out.data.shape[0]
    if seq.subj_anchor >= n or seq.obj_anchor >= n:
        raise ContractError(
            f"anchor out of range: subj {seq.subj_anchor}, obj {seq.obj_anchor}, n {n}"
        )
    return tape.row_select(h_out, seq.subj_anchor), tape.row_select(h_out, seq.obj_anchor)


def classify_logits(
    tape: Tape, h_subj: Tensor, h_obj: Tensor, p: BoundParams
) -> Tensor:
    """z = ReLU(W_proj [h_subj, h_obj]); logits = W_r z + b_r."""
    pair = tape.concat_rows([h_subj, h_obj])
    z = tape.relu(tape.matmul(p.w_proj, pair))
    return tape.add(tape.matmul(p.w_r, z), p.b_r)


def classify(h_subj: Array, h_obj: Array, params: ModelParams) -> Array:
    """Probabilities over the full label set (pure, for prediction)."""
    pair = np.concatenate([np.asarray(h_subj), np.asarray(h_obj)])
    z = np.maximum(params.w_proj @ pair, 0.0)
    return softmax(params.w_r @ z + params.b_r)


def argmax_label(probabilities: Array, schema: RelationSchema) -> str:
    """Highest-probability label; ties break to the lowest label index."""
    return schema.label_of(int(np.argmax(probabilities)))


def nll_loss(probabilities: Array, gold_index: int) -> float:
    """Negative log likelihood of the gold label under the prediction."""
    p = float(probabilities[gold_index])
    if p <= 0.0:
        return math.inf
    return -math.log(p)


def batch_nll(probability_rows: list[Array], gold_indices: list[int]) -> float:
    if not probability_rows:
        raise ContractError("batch_nll needs at least one instance")
    losses = [nll_loss(p, g) for p, g in zip(probability_rows, gold_indices)]
    return sum(losses) / len(losses)


def _f1(tp: int, fp: int, fn: int) -> float:
    # zero-denominator precision/recall define F1 = 0
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def micro_f1(preds: list[Prediction], schema: RelationSchema) -> float:
    """Global F1 excluding the NA label.

    Predicted-positive iff argmax != NA; correct iff argmax = gold != NA.
    Without an NA label every instance counts as positive on both sides.
    """
    if not preds:
        raise ContractError("micro_f1 needs at least one prediction")
    na = schema.na_label
    tp = sum(
        1 for p in preds if p.pred_label == p.gold_label and p.pred_label != na
    )
    pred_pos = sum(1 for p in preds if p.pred_label != na)
    gold_pos = sum(1 for p in preds if p.gold_label != na)
    return _f1(tp, pred_pos - tp, gold_pos - tp)


def macro_f1(preds: list[Prediction], schema: RelationSchema) -> float:
    """Unweighted mean of per-relation F1 over the non-NA relations."""
    if not preds:
        raise ContractError("macro_f1 needs at least one prediction")
    labels = [r for r in schema.relations if r != schema.na_label]
    if not labels:
        raise ContractError("macro_f1 needs at least one non-NA relation")
    scores = []
    for r in labels:
        tp = sum(1 for p in preds if p.pred_label == r and p.gold_label == r)
        fp = sum(1 for p in preds if p.pred_label == r and p.gold_label != r)
        fn = sum(1 for p in preds if p.gold_label == r and p.pred_label != r)
        scores.append(_f1(tp, fp, fn))
    return sum(scores) / len(scores)


def predictions_to_jsonl(preds: list[Prediction]) -> str:
    lines = []
    for p in preds:
        obj = {
            "id": p.instance_id,
            "gold": p.gold_label,
            "pred": p.pred_label,
            "probs": [float(x) for x in p.probabilities],
        }
        lines.append(json.dumps(obj, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_predictions(text: str, schema: RelationSchema) -> list[Prediction]:
    preds = []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        preds.append(
            Prediction(
                instance_id=obj["id"],
                probabilities=np.asarray(obj["probs"], dtype=np.float64),
                pred_label=obj["pred"],
                gold_label=obj["gold"],
            )
        )
    return preds
