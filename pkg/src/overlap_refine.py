# -*- coding: utf-8 -*-
"""
Deteção precisa da sobreposição de texto (protótipos II-IV)

Combina a caixa do protótipo (primeira fase) com as caixas de caracteres:

    1. Centros geométricos de cada caractere
    2. y_max / y_min dos centros dentro da janela [âncora - γ, âncora + γ]
    3. y_max - y_min <= α → falso positivo
    4. Fila Q1 (centros mais perto de y_max) e Q2 (mais perto de y_min)
    5. Filas sem sobreposição horizontal → falso positivo
    6. A fila mais longa é Q_main; a outra perde os caracteres descontínuos
       (intervalo > β) e passa a Q_ov
    7. Caixa final = Q_ov ∪ caracteres de Q_main sobrepostos horizontalmente

DECISÕES DE INTERPRETAÇÃO:
==========================
- Passo 4 usa distâncias absolutas |y_max - C_y| <= |C_y - y_min| (empate → Q1)
- len(Q1) == len(Q2) → Q_main = Q2
- γ, α, β por omissão: metade da largura mediana, metade da altura mediana,
  largura mediana dos caracteres recebidos
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core_geometry import (
    BBox,
    InvariantViolation,
    StageTwoError,
    geometric_center,
    horizontal_overlap,
    union_boxes,
)

logger = logging.getLogger(__name__)


class NoCenterInWindow(StageTwoError):
    """Nenhum centro de caractere na janela γ (inputs inconsistentes)."""


class NoHorizontalOverlap(StageTwoError):
    """Q_main e Q_ov sem sobreposição horizontal."""


class Verdict(Enum):
    FALSE_POSITIVE = "FalsePositive"
    REFINED = "Refined"


class AnchorMode(Enum):
    LEFT = "left"  # proto.x
    CENTER = "center"  # proto.x + proto.w / 2


class CharFilter(Enum):
    NONE = "none"
    CENTER_IN = "center_in"
    INTERSECT = "intersect"


@dataclass(frozen=True)
class OverlapParams:
    gamma: int  # meia largura da janela em torno da âncora (píxeis)
    alpha: float  # dispersão vertical mínima dos centros
    beta: int  # maior intervalo entre caracteres consecutivos de Q_ov (píxeis)

    def __post_init__(self):
        for name in ("gamma", "beta"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} tem de ser um inteiro de píxeis, recebido {value!r}")
        for name in ("gamma", "alpha", "beta"):
            value = getattr(self, name)
            if value < 0:
                raise ValueError(f"{name} tem de ser >= 0, recebido {value}")


@dataclass(frozen=True)
class OverlapRefinement:
    verdict: Verdict
    final_box: Optional[BBox]
    q_main: Tuple[BBox, ...]
    q_ov: Tuple[BBox, ...]
    reason: str = ""

    def __post_init__(self):
        if self.verdict is Verdict.REFINED:
            if self.final_box is None or not self.q_ov:
                raise InvariantViolation("Refinamento sem caixa final ou sem Q_ov")
            if not _queues_overlap(self.q_main, self.q_ov):
                raise InvariantViolation("Q_main e Q_ov sem sobreposição horizontal")

    @classmethod
    def false_positive(cls, reason: str) -> "OverlapRefinement":
        return cls(Verdict.FALSE_POSITIVE, None, (), (), reason)


def default_params(
    chars: Sequence[BBox],
    gamma: Optional[int] = None,
    alpha: Optional[float] = None,
    beta: Optional[int] = None,
) -> OverlapParams:
    """
    Parâmetros relativos à escala dos caracteres; valores explícitos prevalecem.
    γ e β são arredondados para cima ao píxel.
    """
    if chars:
        median_w = float(np.median([c.w for c in chars]))
        median_h = float(np.median([c.h for c in chars]))
    else:
        median_w = median_h = 0.0
    return OverlapParams(
        gamma=int(np.ceil(median_w / 2.0)) if gamma is None else gamma,
        alpha=median_h / 2.0 if alpha is None else alpha,
        beta=int(np.ceil(median_w)) if beta is None else beta,
    )


def window_anchor(proto: BBox, anchor: AnchorMode = AnchorMode.LEFT) -> float:
    if anchor is AnchorMode.CENTER:
        return proto.x + proto.w / 2.0
    return float(proto.x)


def filter_chars(
    proto: BBox, chars: Sequence[BBox], mode: CharFilter = CharFilter.NONE
) -> List[BBox]:
    """Caracteres "dentro da área do protótipo" segundo o modo escolhido."""
    if mode is CharFilter.NONE:
        return list(chars)
    if mode is CharFilter.INTERSECT:
        return [c for c in chars if proto.intersection(c) is not None]
    kept = []
    for c in chars:
        center = geometric_center(c)
        if proto.x <= center.px < proto.right and proto.y <= center.py < proto.bottom:
            kept.append(c)
    return kept


def partition_queues(
    chars: Sequence[BBox], y_max: float, y_min: float
) -> Tuple[List[BBox], List[BBox]]:
    """Cada caractere vai para o extremo vertical mais próximo; empate → Q1."""
    q1: List[BBox] = []
    q2: List[BBox] = []
    for char in chars:
        cy = geometric_center(char).py
        if abs(y_max - cy) <= abs(cy - y_min):
            q1.append(char)
        else:
            q2.append(char)
    return q1, q2


def _queues_overlap(a: Sequence[BBox], b: Sequence[BBox]) -> bool:
    return any(horizontal_overlap(p, q) > 0 for p in a for q in b)


def _continuous_runs(boxes: Sequence[BBox], beta: int) -> List[List[BBox]]:
    runs: List[List[BBox]] = []
    for box in boxes:
        if runs and box.x - runs[-1][-1].right <= beta:
            runs[-1].append(box)
        else:
            runs.append([box])
    return runs


def prune_discontinuous(
    queue: Sequence[BBox], beta: int, anchor_x: Optional[float] = None
) -> List[BBox]:
    """
    Mantém a maior sequência de caixas consecutivas (ordenadas por x) com
    intervalos <= β. Empate → sequência mais próxima de anchor_x (a primeira
    quando anchor_x é None).
    """
    if not queue:
        return []
    ordered = sorted(queue, key=lambda b: b.x)
    runs = _continuous_runs(ordered, beta)
    longest = max(len(run) for run in runs)
    candidates = [run for run in runs if len(run) == longest]
    if anchor_x is None or len(candidates) == 1:
        return list(candidates[0])

    def distance(run: List[BBox]) -> float:
        span = union_boxes(run)
        return abs(span.x + span.w / 2.0 - anchor_x)

    return list(min(candidates, key=distance))


def final_box(q_main: Sequence[BBox], q_ov: Sequence[BBox]) -> BBox:
    """União de Q_ov com os caracteres de Q_main que se sobrepõem à sua extensão."""
    if not q_ov:
        raise NoHorizontalOverlap("Q_ov vazia")
    span = union_boxes(q_ov)
    overlapped = [b for b in q_main if horizontal_overlap(b, span) > 0]
    if not overlapped:
        raise NoHorizontalOverlap(
            f"Nenhum caractere de Q_main sobreposto a {span.x}..{span.right}"
        )
    return union_boxes(list(q_ov) + overlapped)


def refine_overlap(
    proto: BBox,
    chars: Sequence[BBox],
    params: Optional[OverlapParams] = None,
    anchor: AnchorMode = AnchorMode.LEFT,
) -> OverlapRefinement:
    """Refinamento completo de uma caixa de protótipo de sobreposição."""
    params = params or default_params(chars)
    centers = [geometric_center(c) for c in chars]

    x_anchor = window_anchor(proto, anchor)
    in_window = [
        c.py
        for c in centers
        if x_anchor - params.gamma <= c.px <= x_anchor + params.gamma
    ]
    if not in_window:
        raise NoCenterInWindow(
            f"Sem centros em [{x_anchor - params.gamma}, {x_anchor + params.gamma}] "
            f"para o protótipo {proto.to_list()}"
        )

    y_max, y_min = max(in_window), min(in_window)
    if y_max - y_min <= params.alpha:
        logger.debug(
            f"Protótipo {proto.to_list()}: dispersão {y_max - y_min:.1f} <= α={params.alpha}"
        )
        return OverlapRefinement.false_positive("narrow_vertical_spread")

    q1, q2 = partition_queues(chars, y_max, y_min)
    if not _queues_overlap(q1, q2):
        return OverlapRefinement.false_positive("no_horizontal_overlap")

    anchor_x = proto.x + proto.w / 2.0
    if len(q1) > len(q2):
        q_main, q_ov = q1, prune_discontinuous(q2, params.beta, anchor_x)
    else:
        q_main, q_ov = q2, prune_discontinuous(q1, params.beta, anchor_x)

    try:
        box = final_box(q_main, q_ov)
    except NoHorizontalOverlap:
        return OverlapRefinement.false_positive("pruned_no_overlap")

    logger.debug(
        f"Protótipo {proto.to_list()} refinado → {box.to_list()} "
        f"(|Q_main|={len(q_main)}, |Q_ov|={len(q_ov)})"
    )
    return OverlapRefinement(Verdict.REFINED, box, tuple(q_main), tuple(q_ov), "refined")
