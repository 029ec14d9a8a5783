# -*- coding: utf-8 -*-
"""
Avaliação de deteções: emparelhamento guloso por IoU e precisão/recall/F1

PROTOCOLO:
==========
- Predições por ordem decrescente de score (empates mantêm a ordem de entrada)
- Cada predição fica com o ground truth livre de maior IoU >= limiar
  (empate de IoU → menor índice de ground truth)
- P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R); denominador 0 → 0
- Limiares 0.5 e 0.75, reportados juntos no formato "0.5/0.75"
- Agregação global (todas as classes juntas) e por classe de protótipo
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core_geometry import BBox, InvariantViolation, PrototypeClass
from io_formats import EvalRecord, IdMismatch, parse_eval_file, write_json

logger = logging.getLogger(__name__)

DEFAULT_IOU_THRESHOLDS: Tuple[float, ...] = (0.5, 0.75)


# ============================================================================
# CONTAGENS E EMPARELHAMENTO
# ============================================================================


@dataclass(frozen=True)
class Counts:
    """(tp, fp, fn): monoide comutativo para agregar imagens e classes."""

    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @classmethod
    def total(cls, items: Iterable["Counts"]) -> "Counts":
        out = cls()
        for item in items:
            out = out + item
        return out

    def as_tuple(self) -> Tuple[int, int, int]:
        return self.tp, self.fp, self.fn


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn: int
    pairs: Tuple[Tuple[int, int, float], ...]
    threshold: float = DEFAULT_IOU_THRESHOLDS[0]

    def __post_init__(self):
        if self.tp != len(self.pairs):
            raise InvariantViolation(f"tp={self.tp} ≠ {len(self.pairs)} pares")
        preds = [p for p, _, _ in self.pairs]
        gts = [g for _, g, _ in self.pairs]
        if len(set(preds)) != len(preds) or len(set(gts)) != len(gts):
            raise InvariantViolation("Predição ou ground truth emparelhado duas vezes")
        if any(value < self.threshold for _, _, value in self.pairs):
            raise InvariantViolation("Par com IoU abaixo do limiar")

    @property
    def counts(self) -> Counts:
        return Counts(self.tp, self.fp, self.fn)


def iou_matrix(preds: Sequence[BBox], gts: Sequence[BBox]) -> np.ndarray:
    """IoU de todos os pares (predição × ground truth)."""
    if not preds or not gts:
        return np.zeros((len(preds), len(gts)))
    p = np.array([b.to_list() for b in preds], dtype=np.int64)
    g = np.array([b.to_list() for b in gts], dtype=np.int64)
    x0 = np.maximum(p[:, None, 0], g[None, :, 0])
    y0 = np.maximum(p[:, None, 1], g[None, :, 1])
    x1 = np.minimum(p[:, None, 0] + p[:, None, 2], g[None, :, 0] + g[None, :, 2])
    y1 = np.minimum(p[:, None, 1] + p[:, None, 3], g[None, :, 1] + g[None, :, 3])
    inter = np.clip(x1 - x0, 0, None) * np.clip(y1 - y0, 0, None)
    area_p = p[:, 2] * p[:, 3]
    area_g = g[:, 2] * g[:, 3]
    union = area_p[:, None] + area_g[None, :] - inter
    return inter / union.astype(np.float64)


def match_detections(
    preds: Sequence[Tuple[BBox, float]],
    gts: Sequence[BBox],
    threshold: float = DEFAULT_IOU_THRESHOLDS[0],
) -> MatchResult:
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"Limiar de IoU em (0, 1]: {threshold}")
    ious = iou_matrix([b for b, _ in preds], list(gts))
    order = sorted(range(len(preds)), key=lambda i: -preds[i][1])
    claimed = np.zeros(len(gts), dtype=bool)

    pairs: List[Tuple[int, int, float]] = []
    for i in order:
        if not len(gts):
            break
        candidates = np.where(claimed | (ious[i] < threshold), -1.0, ious[i])
        j = int(np.argmax(candidates))
        if candidates[j] < 0:
            continue
        claimed[j] = True
        pairs.append((i, j, float(ious[i, j])))

    tp = len(pairs)
    return MatchResult(
        tp=tp,
        fp=len(preds) - tp,
        fn=len(gts) - tp,
        pairs=tuple(pairs),
        threshold=threshold,
    )


# ============================================================================
# MÉTRICAS
# ============================================================================


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    iou_threshold: float
    tp: int = 0
    fp: int = 0
    fn: int = 0
    per_class: Mapping[PrototypeClass, Counts] = field(default_factory=dict)

    def __post_init__(self):
        p, r = self.precision, self.recall
        expected = 2 * p * r / (p + r) if p + r > 0 else 0.0
        if abs(self.f1 - expected) > 1e-12:
            raise InvariantViolation(f"F1 incoerente: {self.f1} ≠ {expected}")
        for name in ("precision", "recall", "f1"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvariantViolation(f"{name} fora de [0, 1]: {getattr(self, name)}")

    @classmethod
    def from_counts(
        cls,
        counts: Counts,
        iou_threshold: float,
        per_class: Optional[Mapping[PrototypeClass, Counts]] = None,
    ) -> "EvalReport":
        precision = _ratio(counts.tp, counts.tp + counts.fp)
        recall = _ratio(counts.tp, counts.tp + counts.fn)
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(
            precision=precision,
            recall=recall,
            f1=f1,
            iou_threshold=iou_threshold,
            tp=counts.tp,
            fp=counts.fp,
            fn=counts.fn,
            per_class=dict(per_class or {}),
        )

    @property
    def counts(self) -> Counts:
        return Counts(self.tp, self.fp, self.fn)

    def for_class(self, cls: PrototypeClass) -> "EvalReport":
        return EvalReport.from_counts(self.per_class.get(cls, Counts()), self.iou_threshold)

    def as_percentages(self) -> Tuple[float, float, float]:
        return 100.0 * self.precision, 100.0 * self.recall, 100.0 * self.f1


def metrics(m: MatchResult) -> EvalReport:
    return EvalReport.from_counts(m.counts, m.threshold)


# ============================================================================
# AVALIAÇÃO DE UM RUN
# ============================================================================


def evaluate_records(
    preds: Mapping[str, EvalRecord],
    gts: Mapping[str, EvalRecord],
    thresholds: Iterable[float] = DEFAULT_IOU_THRESHOLDS,
    exclude: Iterable[str] = (),
) -> Dict[float, EvalReport]:
    """Emparelhamento por imagem, agregado globalmente e por classe."""
    excluded = set(exclude)
    unknown = sorted(set(preds) - set(gts) - excluded)
    if unknown:
        raise IdMismatch(f"Predições para imagens sem ground truth: {unknown[:5]}")

    thresholds = sorted(set(float(t) for t in thresholds))
    reports: Dict[float, EvalReport] = {}
    for t in thresholds:
        pooled = Counts()
        per_class: Dict[PrototypeClass, Counts] = {}
        for image in sorted(gts):
            if image in excluded:
                continue
            gt = gts[image]
            pred = preds.get(image)
            pred_boxes = pred.boxes if pred else ()
            pred_classes = pred.classes if pred else ()
            scores = pred.scores if pred and pred.scores is not None else (1.0,) * len(pred_boxes)

            pooled = pooled + match_detections(
                list(zip(pred_boxes, scores)), list(gt.boxes), t
            ).counts

            for cls in sorted(set(gt.classes) | set(pred_classes), key=lambda c: c.value):
                cls_preds = [
                    (b, s) for b, c, s in zip(pred_boxes, pred_classes, scores) if c is cls
                ]
                cls_gts = [b for b, c in zip(gt.boxes, gt.classes) if c is cls]
                counts = match_detections(cls_preds, cls_gts, t).counts
                per_class[cls] = per_class.get(cls, Counts()) + counts

        reports[t] = EvalReport.from_counts(pooled, t, per_class)
        logger.info(
            f"IoU={t}: tp={pooled.tp}, fp={pooled.fp}, fn={pooled.fn}, "
            f"F1={reports[t].f1:.3f}"
        )
    return reports


def evaluate_run(
    pred_file: Path,
    gt_file: Path,
    thresholds: Iterable[float] = DEFAULT_IOU_THRESHOLDS,
    exclude: Iterable[str] = (),
) -> Dict[float, EvalReport]:
    """Lê predições e ground truth (JSON ou JSON Lines) e avalia em cada limiar."""
    return evaluate_records(
        parse_eval_file(pred_file), parse_eval_file(gt_file), thresholds, exclude
    )


# ============================================================================
# RELATÓRIOS
# ============================================================================


def reports_to_json(reports: Mapping[float, EvalReport]) -> Dict[str, object]:
    payload = {}
    for t, report in sorted(reports.items()):
        payload[f"{t:g}"] = {
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
            "tp": report.tp,
            "fp": report.fp,
            "fn": report.fn,
            "per_class": {
                cls.value: dict(zip(("tp", "fp", "fn"), counts.as_tuple()))
                for cls, counts in sorted(report.per_class.items(), key=lambda kv: kv[0].value)
            },
        }
    return payload


def report_table(reports: Mapping[float, EvalReport]) -> pd.DataFrame:
    """Uma linha por agregação, células "P@0.5/P@0.75" em percentagem (1 casa)."""
    ordered = [reports[t] for t in sorted(reports)]
    classes = sorted({c for r in ordered for c in r.per_class}, key=lambda c: c.value)
    rows = [("all", ordered)] + [
        (f"Type{c.value}", [r.for_class(c) for r in ordered]) for c in classes
    ]

    def cell(values: List[float]) -> str:
        return "/".join(f"{100.0 * v:.1f}" for v in values)

    table = pd.DataFrame(
        [
            {
                "group": name,
                "Precision": cell([r.precision for r in group]),
                "Recall": cell([r.recall for r in group]),
                "F1": cell([r.f1 for r in group]),
                "tp/fp/fn": " ".join(f"{r.tp}/{r.fp}/{r.fn}" for r in group),
            }
            for name, group in rows
        ]
    ).set_index("group")
    table.attrs["iou"] = "/".join(f"{t:g}" for t in sorted(reports))
    return table


def write_reports(out_dir: Path, reports: Mapping[float, EvalReport], name: str = "eval_report") -> None:
    out_dir = Path(out_dir)
    write_json(out_dir / f"{name}.json", reports_to_json(reports))
    table = report_table(reports)
    header = f"IoU = {table.attrs['iou']}\n"
    (out_dir / f"{name}.txt").write_text(header + table.to_string() + "\n", encoding="utf-8")
    logger.info(f"Relatórios escritos em {out_dir}")
