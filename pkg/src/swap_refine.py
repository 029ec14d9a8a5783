# -*- coding: utf-8 -*-
"""
Deteção precisa da troca de texto (protótipo tipo I)

WORKFLOW:
=========
1. Validar a máscara do marcador pelas projeções (1 pico em X, 2 picos em Y)
   e pela continuidade das projeções → remove falsos positivos
2. Ajustar a caixa à máscara do marcador (caixa justa + margem)
3. Ajustar a caixa com a estrutura dos caracteres que o marcador abrange
4. Procurar o máximo da projeção horizontal → ponto de troca
5. Corrigir o texto (troca dos dois segmentos dentro da caixa ajustada)

A máscara é um input (vem da rede de regressão de forma); aqui só se aplica
conhecimento estrutural sobre ela.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from core_geometry import (
    DEFAULT_SMOOTH_WINDOW,
    Axis,
    BBox,
    BinaryMask,
    DimensionMismatch,
    EmptyMask,
    InvariantViolation,
    PrototypeClass,
    PrototypeDetection,
    StageTwoError,
    count_peaks,
    default_min_height,
    geometric_center,
    horizontal_overlap,
    mask_tight_bbox,
    moving_sum,
    peak_runs,
    project,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_GAP_FRAC: float = 0.15  # Maior buraco interno tolerado na projeção
DEFAULT_MARGIN: int = 2  # Margem (px) à volta da caixa justa da máscara


class SwapPointOutOfRange(StageTwoError):
    """Ponto de troca fora de (0, largura)."""


class MissingMask(StageTwoError):
    """Deteção tipo I sem máscara de marcador."""


class WrongPrototypeClass(StageTwoError):
    """Operação de troca aplicada a um protótipo que não é tipo I."""


@dataclass(frozen=True)
class SwapConfig:
    smooth_window: int = DEFAULT_SMOOTH_WINDOW
    min_height: Optional[float] = None  # None → 10% do máximo suavizado, por eixo
    max_gap_frac: float = DEFAULT_MAX_GAP_FRAC
    margin: int = DEFAULT_MARGIN

    def __post_init__(self):
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ValueError(f"smooth_window ímpar >= 1: {self.smooth_window}")
        if self.min_height is not None and self.min_height < 0:
            raise ValueError(f"min_height >= 0: {self.min_height}")
        if not 0.0 <= self.max_gap_frac <= 1.0:
            raise ValueError(f"max_gap_frac em [0, 1]: {self.max_gap_frac}")
        if self.margin < 0:
            raise ValueError(f"margin >= 0: {self.margin}")


@dataclass(frozen=True)
class MarkerValidation:
    valid: bool
    x_peaks: int
    y_peaks: int
    continuity_ok: bool
    max_gap: int

    def __post_init__(self):
        expected = self.x_peaks == 1 and self.y_peaks == 2 and self.continuity_ok
        if self.valid != expected:
            raise InvariantViolation(f"MarkerValidation incoerente: {self}")

    @classmethod
    def empty(cls) -> "MarkerValidation":
        return cls(valid=False, x_peaks=0, y_peaks=0, continuity_ok=False, max_gap=0)

    def describe(self) -> str:
        return (
            f"x_peaks={self.x_peaks}, y_peaks={self.y_peaks}, "
            f"continuity_ok={self.continuity_ok}, max_gap={self.max_gap}"
        )


@dataclass(frozen=True)
class SwapResult:
    adjusted_box: BBox
    swap_x: int  # coluna relativa a adjusted_box
    left_span: BBox
    right_span: BBox

    def __post_init__(self):
        box = self.adjusted_box
        if not 0 < self.swap_x < box.w:
            raise SwapPointOutOfRange(f"swap_x={self.swap_x} fora de (0, {box.w})")
        if (
            self.left_span != BBox(box.x, box.y, self.swap_x, box.h)
            or self.right_span
            != BBox(box.x + self.swap_x, box.y, box.w - self.swap_x, box.h)
        ):
            raise InvariantViolation("Segmentos não particionam a caixa ajustada")

    @property
    def swap_column(self) -> int:
        """Ponto de troca em coordenadas da imagem."""
        return self.adjusted_box.x + self.swap_x


@dataclass(frozen=True)
class Rejected:
    validation: MarkerValidation
    reason: str


@dataclass(frozen=True)
class Accepted:
    result: SwapResult
    validation: MarkerValidation
    provenance: Tuple[str, ...]


SwapOutcome = Union[Rejected, Accepted]


# ============================================================================
# VALIDAÇÃO DO MARCADOR
# ============================================================================


def _longest_internal_gap(counts: np.ndarray) -> Tuple[int, int]:
    """(maior sequência de zeros dentro do suporte, comprimento do suporte)."""
    nonzero = np.flatnonzero(counts)
    if nonzero.size == 0:
        return 0, 0
    support = counts[nonzero[0] : nonzero[-1] + 1]
    steps = np.diff(nonzero)
    longest = int(steps.max() - 1) if steps.size else 0
    return longest, int(support.size)


def validate_marker(mask: BinaryMask, cfg: Optional[SwapConfig] = None) -> MarkerValidation:
    """
    Verifica a assinatura de um marcador de troca ideal.

    Projeção X com um pico, projeção Y com dois picos, e nenhuma sequência de
    zeros dentro do suporte de cada projeção maior que max_gap_frac do suporte.
    """
    cfg = cfg or SwapConfig()
    if mask.width < 2 or mask.height < 2:
        raise DimensionMismatch(
            f"Máscara demasiado pequena para validar: {mask.width}x{mask.height}"
        )
    if mask.is_empty:
        raise EmptyMask("Máscara do marcador vazia")

    peaks = {}
    continuity_ok = True
    max_gap = 0
    for axis in (Axis.X, Axis.Y):
        profile = project(mask, axis)
        min_height = (
            cfg.min_height
            if cfg.min_height is not None
            else default_min_height(profile, cfg.smooth_window)
        )
        peaks[axis] = count_peaks(profile, cfg.smooth_window, min_height)

        gap, support = _longest_internal_gap(profile.counts)
        max_gap = max(max_gap, gap)
        if gap > cfg.max_gap_frac * support:
            continuity_ok = False

    valid = peaks[Axis.X] == 1 and peaks[Axis.Y] == 2 and continuity_ok
    validation = MarkerValidation(
        valid=valid,
        x_peaks=peaks[Axis.X],
        y_peaks=peaks[Axis.Y],
        continuity_ok=continuity_ok,
        max_gap=max_gap,
    )
    logger.debug(f"Validação do marcador: {validation.describe()}")
    return validation


# ============================================================================
# AJUSTE DA CAIXA
# ============================================================================


def adjust_box_to_mask(
    det: PrototypeDetection,
    margin: int = DEFAULT_MARGIN,
    image_size: Optional[Tuple[int, int]] = None,
) -> BBox:
    """Caixa justa da máscara, em coordenadas da imagem, com margem e corte."""
    if det.cls is not PrototypeClass.TYPE_I:
        raise WrongPrototypeClass(f"Esperado tipo I, recebido {det.cls.value}")
    if det.mask is None:
        raise MissingMask("Deteção tipo I sem máscara")
    tight = mask_tight_bbox(det.mask).translate(det.box.x, det.box.y)
    width, height = image_size if image_size is not None else (None, None)
    return tight.expand(margin, width, height)


def upper_lobe_row(mask: BinaryMask, smooth_window: int = DEFAULT_SMOOTH_WINDOW) -> Optional[int]:
    """Linha (local à máscara) do primeiro pico da projeção Y, ou None."""
    profile = project(mask, Axis.Y)
    runs = peak_runs(
        profile.counts, smooth_window, default_min_height(profile, smooth_window)
    )
    if not runs:
        return None
    start, end = runs[0]
    return (start + end) // 2


def adjust_box_with_chars(
    box: BBox,
    mask: BinaryMask,
    chars: Sequence[BBox],
    mask_origin: Optional[Tuple[int, int]] = None,
    smooth_window: int = DEFAULT_SMOOTH_WINDOW,
) -> BBox:
    """
    Junta à caixa os caracteres que o marcador abrange.

    Um caractere entra quando a sua extensão horizontal interseta o suporte
    horizontal da máscara e o seu centro vertical fica abaixo do lobo superior
    da projeção Y. A caixa só cresce.
    """
    if not chars:
        return box
    origin_x, origin_y = mask_origin if mask_origin is not None else (box.x, box.y)
    try:
        support = mask_tight_bbox(mask).translate(origin_x, origin_y)
    except EmptyMask:
        logger.warning("Máscara vazia no ajuste por caracteres; caixa inalterada")
        return box

    lobe = upper_lobe_row(mask, smooth_window)
    lobe_y = origin_y + lobe if lobe is not None else support.y

    adjusted = box
    for char in chars:
        if horizontal_overlap(char, support) == 0:
            continue
        if geometric_center(char).py <= lobe_y:
            continue
        adjusted = adjusted.union(char)
    return adjusted


# ============================================================================
# PONTO DE TROCA E CORREÇÃO
# ============================================================================


def swap_point_from_counts(counts, smooth_window: int = DEFAULT_SMOOTH_WINDOW) -> int:
    """Argmax da projeção suavizada; empates → meio do maior planalto máximo."""
    sums = moving_sum(counts, smooth_window)
    if sums.size == 0 or sums.max() <= 0:
        raise EmptyMask("Projeção sem primeiro plano")
    idx = np.flatnonzero(sums == sums.max())
    plateaus = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    best = max(plateaus, key=len)
    return int((best[0] + best[-1]) // 2)


def find_swap_point(mask: BinaryMask, smooth_window: int = DEFAULT_SMOOTH_WINDOW) -> int:
    """Coluna (local à máscara) onde os dois segmentos de texto são trocados."""
    if mask.is_empty:
        raise EmptyMask("Máscara do marcador vazia")
    return swap_point_from_counts(project(mask, Axis.X).counts, smooth_window)


def correct_swap(region: np.ndarray, swap_x: int) -> np.ndarray:
    """region[:, swap_x:] seguido de region[:, :swap_x] (largura preservada)."""
    arr = np.asarray(region)
    if arr.ndim < 2:
        raise DimensionMismatch(f"Raster tem de ter pelo menos 2 dimensões: {arr.shape}")
    width = arr.shape[1]
    if not 0 < swap_x < width:
        raise SwapPointOutOfRange(f"swap_x={swap_x} fora de (0, {width})")
    return np.concatenate((arr[:, swap_x:], arr[:, :swap_x]), axis=1)


def corrected_crop(image: np.ndarray, result: SwapResult) -> np.ndarray:
    """Recorte da caixa ajustada com os dois segmentos já trocados."""
    box = result.adjusted_box
    crop = np.asarray(image)[box.y : box.bottom, box.x : box.right]
    return correct_swap(crop, result.swap_x)


# ============================================================================
# PIPELINE TIPO I
# ============================================================================


def refine_swap(
    det: PrototypeDetection,
    chars: Sequence[BBox] = (),
    cfg: Optional[SwapConfig] = None,
    image_size: Optional[Tuple[int, int]] = None,
) -> SwapOutcome:
    """validate_marker → adjust_box_to_mask → adjust_box_with_chars → find_swap_point."""
    cfg = cfg or SwapConfig()
    if det.cls is not PrototypeClass.TYPE_I:
        raise WrongPrototypeClass(f"Esperado tipo I, recebido {det.cls.value}")
    if det.mask is None:
        raise MissingMask("Deteção tipo I sem máscara")

    try:
        validation = validate_marker(det.mask, cfg)
    except EmptyMask:
        return Rejected(MarkerValidation.empty(), "empty_mask")
    if not validation.valid:
        return Rejected(validation, f"invalid_marker({validation.describe()})")

    mask_box = adjust_box_to_mask(det, cfg.margin, image_size)
    box = adjust_box_with_chars(
        mask_box,
        det.mask,
        chars,
        mask_origin=(det.box.x, det.box.y),
        smooth_window=cfg.smooth_window,
    )
    provenance = ("mask-adjusted", "char-adjusted") if box != mask_box else ("mask-adjusted",)

    swap_x = det.box.x + find_swap_point(det.mask, cfg.smooth_window) - box.x
    result = SwapResult(
        adjusted_box=box,
        swap_x=swap_x,
        left_span=BBox(box.x, box.y, swap_x, box.h),
        right_span=BBox(box.x + swap_x, box.y, box.w - swap_x, box.h),
    )
    logger.debug(
        f"Troca aceite: caixa {det.box.to_list()} → {box.to_list()}, swap_x={swap_x}"
    )
    return Accepted(result, validation, provenance)
