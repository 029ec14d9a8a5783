# -*- coding: utf-8 -*-
"""
Tipos e primitivas geométricas da segunda fase de deteção de texto anómalo

CONTEÚDO:
=========
✓ BBox: retângulo [x, y, w, h] em píxeis (intervalos semiabertos)
✓ BinaryMask: raster binário (máscaras de marcadores, marcadores sintéticos)
✓ PrototypeClass / PrototypeDetection: saída da primeira fase (tipos I-IV)
✓ ProjectionProfile: projeções por coluna (X) ou por linha (Y)
✓ Primitivas puras: iou, project, count_peaks, geometric_center,
  mask_tight_bbox, horizontal_overlap

Todos os valores são imutáveis depois de construídos e podem ser partilhados
entre processos (ProcessPoolExecutor).
"""

import logging
import math
import operator
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

logger = logging.getLogger(__name__)


# ============================================================================
# CONSTANTES GLOBAIS
# ============================================================================

DEFAULT_SMOOTH_WINDOW: int = 3  # Janela da média móvel das projeções
DEFAULT_MIN_HEIGHT_FRAC: float = 0.10  # Altura mínima de pico = 10% do máximo


# ============================================================================
# EXCEÇÕES
# ============================================================================


class StageTwoError(ValueError):
    """Base de todos os erros de domínio da segunda fase."""


class InvalidBox(StageTwoError):
    """Caixa com largura/altura < 1 ou origem negativa."""


class EmptyMask(StageTwoError):
    """Máscara sem nenhum píxel de primeiro plano."""


class DimensionMismatch(StageTwoError):
    """Rasters com dimensões incompatíveis."""


class InvalidGeometry(StageTwoError):
    """Parâmetros de geração/geometria impossíveis de satisfazer."""


class InvariantViolation(StageTwoError):
    """Invariante interna quebrada (código de saída 2 na CLI)."""


# ============================================================================
# TIPOS DE DOMÍNIO
# ============================================================================


def _as_int(value, name: str) -> int:
    if isinstance(value, bool):
        raise InvalidBox(f"{name} tem de ser inteiro, recebido {value!r}")
    try:
        return operator.index(value)
    except TypeError:
        raise InvalidBox(f"{name} tem de ser inteiro, recebido {value!r}") from None


@dataclass(frozen=True, slots=True)
class BBox:
    """Retângulo [x, y, w, h]; cobre as colunas [x, x+w) e as linhas [y, y+h)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            object.__setattr__(self, name, _as_int(getattr(self, name), name))
        if self.w < 1 or self.h < 1:
            raise InvalidBox(f"Dimensões inválidas: w={self.w}, h={self.h}")
        if self.x < 0 or self.y < 0:
            raise InvalidBox(f"Origem negativa: x={self.x}, y={self.y}")

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def bottom(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    @classmethod
    def from_corners(cls, x0: int, y0: int, x1: int, y1: int) -> "BBox":
        """Constrói a partir de cantos semiabertos (x1, y1 exclusivos)."""
        return cls(x0, y0, x1 - x0, y1 - y0)

    @classmethod
    def from_list(cls, values: Sequence) -> "BBox":
        if len(values) != 4:
            raise InvalidBox(f"Caixa deve ter 4 valores [x, y, w, h]: {values!r}")
        return cls(*values)

    def to_list(self) -> List[int]:
        return [self.x, self.y, self.w, self.h]

    def translate(self, dx: int, dy: int) -> "BBox":
        return BBox(self.x + dx, self.y + dy, self.w, self.h)

    def contains(self, other: "BBox") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.right <= self.right
            and other.bottom <= self.bottom
        )

    def fits_within(self, width: int, height: int) -> bool:
        return self.right <= width and self.bottom <= height

    def intersection(self, other: "BBox") -> Optional["BBox"]:
        x0, y0 = max(self.x, other.x), max(self.y, other.y)
        x1, y1 = min(self.right, other.right), min(self.bottom, other.bottom)
        if x1 <= x0 or y1 <= y0:
            return None
        return BBox.from_corners(x0, y0, x1, y1)

    def union(self, other: "BBox") -> "BBox":
        return BBox.from_corners(
            min(self.x, other.x),
            min(self.y, other.y),
            max(self.right, other.right),
            max(self.bottom, other.bottom),
        )

    def expand(
        self, margin: int, width: Optional[int] = None, height: Optional[int] = None
    ) -> "BBox":
        """Alarga a caixa `margin` píxeis em cada lado, cortando em 0 e nos limites."""
        x0, y0 = max(0, self.x - margin), max(0, self.y - margin)
        x1, y1 = self.right + margin, self.bottom + margin
        if width is not None:
            x1 = min(x1, width)
        if height is not None:
            y1 = min(y1, height)
        return BBox.from_corners(x0, y0, x1, y1)

    def clamp(self, width: int, height: int) -> "BBox":
        """Corta a caixa aos limites da imagem; InvalidBox se ficar vazia."""
        return BBox.from_corners(
            max(0, self.x),
            max(0, self.y),
            min(self.right, width),
            min(self.bottom, height),
        )

    def mirror(self, canvas_width: int) -> "BBox":
        """Simétrico esquerda-direita dentro de uma tela de largura `canvas_width`."""
        return BBox(canvas_width - self.right, self.y, self.w, self.h)


@dataclass(frozen=True, slots=True)
class Point:
    px: float
    py: float

    def __post_init__(self):
        if not (math.isfinite(self.px) and math.isfinite(self.py)):
            raise InvalidGeometry(f"Ponto com coordenadas não finitas: {self}")


class BinaryMask:
    """
    Raster binário imutável (height x width), primeiro plano = True.

    Os bits são guardados num array numpy só de leitura; `bits[row, col]`.
    """

    __slots__ = ("_bits",)

    def __init__(self, bits):
        arr = np.array(bits, dtype=bool, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch(
                f"Máscara tem de ser 2D e não vazia, forma recebida {arr.shape}"
            )
        arr.setflags(write=False)
        self._bits = arr

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def from_flags(cls, width: int, height: int, flags: Sequence) -> "BinaryMask":
        """Constrói a partir de flags em ordem row-major (len = width * height)."""
        if len(flags) != width * height:
            raise DimensionMismatch(
                f"Esperados {width * height} bits, recebidos {len(flags)}"
            )
        return cls(np.asarray(flags, dtype=bool).reshape(height, width))

    @classmethod
    def from_rows(cls, rows: Sequence[str]) -> "BinaryMask":
        """Atalho legível: cada string é uma linha, '#' ou '1' = primeiro plano."""
        return cls([[ch in "#1" for ch in row] for row in rows])

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def width(self) -> int:
        return int(self._bits.shape[1])

    @property
    def height(self) -> int:
        return int(self._bits.shape[0])

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self._bits))

    @property
    def is_empty(self) -> bool:
        return not self._bits.any()

    def crop(self, box: BBox) -> "BinaryMask":
        if not box.fits_within(self.width, self.height):
            raise DimensionMismatch(f"Caixa {box.to_list()} fora da máscara")
        return BinaryMask(self._bits[box.y : box.bottom, box.x : box.right])

    def to_uint8(self) -> np.ndarray:
        """0 = fundo, 255 = primeiro plano."""
        return np.where(self._bits, 255, 0).astype(np.uint8)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self._bits, other._bits)

    __hash__ = None

    def __repr__(self) -> str:
        return (
            f"BinaryMask(width={self.width}, height={self.height}, "
            f"foreground={self.foreground_count})"
        )

    def __getstate__(self):
        return self._bits

    def __setstate__(self, state):
        arr = np.array(state, dtype=bool, copy=True)
        arr.setflags(write=False)
        self._bits = arr


class PrototypeClass(Enum):
    """Protótipos estruturais: I = marcador de troca, II-IV = sobreposição."""

    TYPE_I = "I"
    TYPE_II = "II"
    TYPE_III = "III"
    TYPE_IV = "IV"

    @classmethod
    def from_label(cls, label: str) -> "PrototypeClass":
        text = str(label).strip()
        if text.lower().startswith("type"):
            text = text[4:].lstrip("_ ")
        for member in cls:
            if member.value == text.upper():
                return member
        raise ValueError(f"Classe de protótipo desconhecida: {label!r}")

    @property
    def is_overlap(self) -> bool:
        return self is not PrototypeClass.TYPE_I


@dataclass(frozen=True)
class PrototypeDetection:
    """Deteção da primeira fase: caixa, classe, score e máscara opcional."""

    box: BBox
    cls: PrototypeClass
    score: float
    mask: Optional[BinaryMask] = None

    def __post_init__(self):
        if not (0.0 <= float(self.score) <= 1.0):
            raise InvalidGeometry(f"Score fora de [0, 1]: {self.score}")
        if self.mask is not None and (
            self.mask.width != self.box.w or self.mask.height != self.box.h
        ):
            raise DimensionMismatch(
                f"Máscara {self.mask.width}x{self.mask.height} não coincide com "
                f"a caixa {self.box.w}x{self.box.h}"
            )


class Axis(Enum):
    X = "X"  # uma contagem por coluna
    Y = "Y"  # uma contagem por linha


class ProjectionProfile:
    """Contagens de primeiro plano ao longo de um eixo (ver `project`)."""

    __slots__ = ("axis", "_counts")

    def __init__(self, axis: Axis, counts):
        arr = np.array(counts, dtype=np.int64, copy=True).reshape(-1)
        if (arr < 0).any():
            raise InvalidGeometry("Projeção com contagens negativas")
        arr.setflags(write=False)
        self.axis = axis
        self._counts = arr

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    @property
    def total(self) -> int:
        return int(self._counts.sum())

    def __len__(self) -> int:
        return int(self._counts.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProjectionProfile):
            return NotImplemented
        return self.axis is other.axis and np.array_equal(self._counts, other._counts)

    __hash__ = None

    def __repr__(self) -> str:
        return f"ProjectionProfile(axis={self.axis.value}, counts={self._counts.tolist()})"


# ============================================================================
# OPERAÇÕES
# ============================================================================


def iou(a: BBox, b: BBox) -> float:
    """Intersection over Union de duas caixas (0 quando disjuntas)."""
    inter = a.intersection(b)
    if inter is None:
        return 0.0
    inter_area = inter.area
    return inter_area / float(a.area + b.area - inter_area)


def horizontal_overlap(a: BBox, b: BBox) -> int:
    """Comprimento da interseção de [a.x, a.right) com [b.x, b.right)."""
    return max(0, min(a.right, b.right) - max(a.x, b.x))


def vertical_overlap(a: BBox, b: BBox) -> int:
    return max(0, min(a.bottom, b.bottom) - max(a.y, b.y))


def geometric_center(box: BBox) -> Point:
    """Centro geométrico (x + w/2, y + h/2), sempre em reais."""
    return Point(box.x + box.w / 2.0, box.y + box.h / 2.0)


def union_boxes(boxes: Iterable[BBox]) -> BBox:
    boxes = list(boxes)
    if not boxes:
        raise InvalidGeometry("União de uma lista vazia de caixas")
    return BBox.from_corners(
        min(b.x for b in boxes),
        min(b.y for b in boxes),
        max(b.right for b in boxes),
        max(b.bottom for b in boxes),
    )


def mask_tight_bbox(mask: BinaryMask) -> BBox:
    """Menor caixa que contém todos os píxeis de primeiro plano."""
    bits = mask.bits
    cols = np.flatnonzero(bits.any(axis=0))
    if cols.size == 0:
        raise EmptyMask("Máscara sem primeiro plano")
    rows = np.flatnonzero(bits.any(axis=1))
    return BBox.from_corners(
        int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1
    )


def project(mask: BinaryMask, axis: Axis) -> ProjectionProfile:
    """Projeção X (por coluna) ou Y (por linha) da máscara binarizada."""
    if axis is Axis.X:
        counts = mask.bits.sum(axis=0)
    else:
        counts = mask.bits.sum(axis=1)
    return ProjectionProfile(axis, counts)


def _check_window(smooth_window: int) -> int:
    window = operator.index(smooth_window)
    if window < 1 or window % 2 == 0:
        raise ValueError(f"smooth_window tem de ser ímpar e >= 1, recebido {window}")
    return window


def moving_sum(counts, smooth_window: int) -> np.ndarray:
    """
    Soma móvel centrada (padding a zeros), em inteiros.

    A média móvel é moving_sum / smooth_window; trabalhar com a soma mantém
    as comparações exatas (planaltos continuam planos, escalas não alteram picos).
    """
    window = _check_window(smooth_window)
    arr = np.asarray(counts, dtype=np.int64)
    if window == 1 or arr.size == 0:
        return arr.copy()
    return ndimage.convolve1d(
        arr, np.ones(window, dtype=np.int64), mode="constant", cval=0
    )


def smooth_profile(profile: ProjectionProfile, smooth_window: int) -> np.ndarray:
    """Média móvel da projeção (float)."""
    return moving_sum(profile.counts, smooth_window) / float(smooth_window)


def peak_runs(
    counts, smooth_window: int = 1, min_height: float = 0
) -> List[Tuple[int, int]]:
    """
    Planaltos de pico [início, fim] (inclusivos) do perfil suavizado.

    Um pico é uma sequência máxima de valores iguais cujos vizinhos (zero fora
    do perfil) são estritamente mais baixos e cuja média excede `min_height`.
    """
    if min_height < 0:
        raise ValueError(f"min_height tem de ser >= 0, recebido {min_height}")
    window = _check_window(smooth_window)
    sums = moving_sum(counts, window)
    n = sums.size
    if n == 0:
        return []

    change = np.flatnonzero(np.diff(sums)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change - 1, [n - 1]))
    values = sums[starts]
    threshold = min_height * window

    runs: List[Tuple[int, int]] = []
    last = len(values) - 1
    for i, value in enumerate(values):
        left = values[i - 1] if i > 0 else 0
        right = values[i + 1] if i < last else 0
        if value > threshold and value > left and value > right:
            runs.append((int(starts[i]), int(ends[i])))
    return runs


def count_peaks(
    profile: ProjectionProfile, smooth_window: int = 1, min_height: float = 0
) -> int:
    """Número de picos separados por vales estritamente mais baixos."""
    return len(peak_runs(profile.counts, smooth_window, min_height))


def default_min_height(
    profile: ProjectionProfile,
    smooth_window: int,
    frac: float = DEFAULT_MIN_HEIGHT_FRAC,
) -> float:
    """Altura mínima por omissão: `frac` do máximo do perfil suavizado."""
    if len(profile) == 0:
        return 0.0
    return float(frac * smooth_profile(profile, smooth_window).max())
