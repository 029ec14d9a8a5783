# -*- coding: utf-8 -*-
"""
Aumento de dados e geração sintética de cenas

CONTEÚDO:
=========
✓ Expansão de escala do marcador de troca (extensão das arestas com jitter vertical)
✓ Mudança dinâmica de localização (troca de blocos à volta da caixa alvo)
✓ Conjunto de contraste: amostra positiva ⊕ amostra negativa
✓ Entropia cruzada da máscara (oráculo de verificação, não é treino)
✓ Geradores: marcador ideal, cena de troca, cena de sobreposição (II-IV)

Convenção de coordenadas: píxeis semiabertos. Os pontos de aresta de uma curva
estão nas fronteiras dos píxeis: a aresta esquerda fica em x = primeira coluna,
a direita em x = última coluna + 1; topo = primeira linha, fundo = última linha + 1.

Toda a aleatoriedade passa por numpy.random.Generator explícito (seed → default_rng).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw

from core_geometry import (
    BBox,
    BinaryMask,
    EmptyMask,
    DimensionMismatch,
    InvalidGeometry,
    Point,
    PrototypeClass,
    PrototypeDetection,
    StageTwoError,
    horizontal_overlap,
    mask_tight_bbox,
    union_boxes,
)
from swap_refine import correct_swap

logger = logging.getLogger(__name__)


# ============================================================================
# CONSTANTES GLOBAIS
# ============================================================================

BACKGROUND: int = 255  # Papel
CHAR_INK: int = 60  # Traço dos caracteres sintéticos
MARKER_INK: int = 0  # Traço do marcador
CE_EPSILON: float = 1e-7  # Recorte das probabilidades na entropia cruzada
SWEEP_START: int = 2  # Varrimento de extensões: 2..150 de 5 em 5, d = 1
SWEEP_STOP: int = 150
SWEEP_STEP: int = 5
SWEEP_D: int = 1
MIN_MARKER_HEIGHT: int = 5  # Lobo + 3 linhas de vale + lobo (janela de suavização 3)


# ============================================================================
# EXCEÇÕES
# ============================================================================


class ExtensionOutOfBounds(StageTwoError):
    """A extensão do marcador sai da tela."""


class ShiftOutOfBounds(StageTwoError):
    """A caixa alvo deslocada sai da imagem."""


class EmptyPool(StageTwoError):
    """Conjunto de amostras positivas ou negativas vazio."""


# ============================================================================
# TIPOS
# ============================================================================


class Polarity(Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"


class Direction(Enum):
    LEFT = "Left"
    RIGHT = "Right"


@dataclass(frozen=True)
class CurveEdgePoints:
    left_top: Point
    left_bottom: Point
    right_top: Point
    right_bottom: Point

    def __post_init__(self):
        if not (self.left_top.px < self.right_top.px and self.left_bottom.px < self.right_bottom.px):
            raise InvalidGeometry(f"Arestas esquerdas não estão à esquerda: {self}")
        if not (self.left_top.py < self.left_bottom.py and self.right_top.py < self.right_bottom.py):
            raise InvalidGeometry(f"Topo não está acima do fundo: {self}")


@dataclass(frozen=True)
class ExpansionConfig:
    tau: int  # extensão horizontal por passo
    d: int = SWEEP_D  # meio intervalo do jitter vertical
    steps: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError(f"tau tem de ser >= 1, recebido {self.tau}")
        if self.d < 0:
            raise ValueError(f"d tem de ser >= 0, recebido {self.d}")
        if self.steps < 1:
            raise ValueError(f"steps tem de ser >= 1, recebido {self.steps}")


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """Imagem em tons de cinzento (uint8) + caixa alvo + máscara do alvo."""

    image: np.ndarray
    target_box: BBox
    label_mask: BinaryMask
    polarity: Polarity
    ground_truth: Dict[str, Any] = field(default_factory=dict)
    source: str = ""

    def __post_init__(self):
        image = np.array(self.image, dtype=np.uint8, copy=True)
        if image.ndim != 2:
            raise DimensionMismatch(f"Imagem tem de ser 2D (cinzento), forma {image.shape}")
        image.setflags(write=False)
        object.__setattr__(self, "image", image)
        height, width = image.shape
        if (self.label_mask.width, self.label_mask.height) != (width, height):
            raise DimensionMismatch(
                f"Máscara {self.label_mask.width}x{self.label_mask.height} ≠ imagem {width}x{height}"
            )
        if not self.target_box.fits_within(width, height):
            raise InvalidGeometry(f"Caixa alvo {self.target_box.to_list()} fora da imagem")
        if self.polarity is Polarity.POSITIVE and self.label_mask.is_empty:
            raise EmptyMask("Amostra positiva com máscara vazia")

    @property
    def width(self) -> int:
        return int(self.image.shape[1])

    @property
    def height(self) -> int:
        return int(self.image.shape[0])

    def crop(self) -> np.ndarray:
        box = self.target_box
        return self.image[box.y : box.bottom, box.x : box.right]


@dataclass(frozen=True)
class MarkerTruth:
    crossing_x: int
    box: BBox
    mirrored: bool


@dataclass(frozen=True, eq=False)
class SwapScene:
    image: np.ndarray
    detection: PrototypeDetection
    chars: Tuple[BBox, ...]
    marker_mask: BinaryMask  # em coordenadas da imagem
    truth_box: BBox
    swap_column: int

    @property
    def image_size(self) -> Tuple[int, int]:
        return int(self.image.shape[1]), int(self.image.shape[0])


@dataclass(frozen=True)
class OverlapScene:
    cls: PrototypeClass
    proto: BBox
    chars: Tuple[BBox, ...]
    truth: BBox
    image_size: Tuple[int, int]

    def mirrored(self) -> "OverlapScene":
        """Cena simétrica esquerda-direita (mesma classe de protótipo)."""
        width = self.image_size[0]
        return OverlapScene(
            cls=self.cls,
            proto=self.proto.mirror(width),
            chars=tuple(c.mirror(width) for c in self.chars),
            truth=self.truth.mirror(width),
            image_size=self.image_size,
        )


# ============================================================================
# EXPANSÃO DE ESCALA
# ============================================================================


def find_curve_edges(mask: BinaryMask) -> CurveEdgePoints:
    """Pontos extremos (topo/fundo) da coluna mais à esquerda e mais à direita."""
    bits = mask.bits
    cols = np.flatnonzero(bits.any(axis=0))
    if cols.size == 0:
        raise EmptyMask("Máscara sem primeiro plano")
    left, right = int(cols[0]), int(cols[-1])
    left_rows = np.flatnonzero(bits[:, left])
    right_rows = np.flatnonzero(bits[:, right])
    return CurveEdgePoints(
        left_top=Point(left, int(left_rows[0])),
        left_bottom=Point(left, int(left_rows[-1]) + 1),
        right_top=Point(right + 1, int(right_rows[0])),
        right_bottom=Point(right + 1, int(right_rows[-1]) + 1),
    )


def _jittered_span(
    top: int, bottom: int, rng: np.random.Generator, d: int, height: int
) -> Tuple[int, int]:
    """Novo [topo, fundo) com topo + ε e fundo + λ, ε, λ ∈ [-d, d]."""
    eps, lam = (int(v) for v in rng.integers(-d, d + 1, size=2))
    new_top = min(max(top + eps, 0), height - 1)
    new_bottom = min(max(bottom + lam, new_top + 1), height)
    return new_top, new_bottom


def _fill_extension(
    bits: np.ndarray,
    edge_col: int,
    span: Tuple[int, int],
    new_col: int,
    new_span: Tuple[int, int],
) -> Tuple[int, int]:
    """
    Traço interpolado da coluna da aresta até à nova coluna, conexo em 4.

    Devolve as linhas [topo, fundo) efetivamente pintadas na nova coluna.
    """
    step = -1 if new_col < edge_col else 1
    distance = abs(new_col - edge_col)
    prev_top, prev_bottom = span
    for i in range(1, distance + 1):
        col = edge_col + step * i
        frac = i / distance
        top = int(round(span[0] + frac * (new_span[0] - span[0])))
        bottom = int(round(span[1] + frac * (new_span[1] - span[1])))
        bottom = max(bottom, top + 1)
        # liga à coluna anterior quando as linhas não se tocam
        top = min(top, prev_bottom - 1)
        bottom = max(bottom, prev_top + 1)
        bits[top:bottom, col] = True
        prev_top, prev_bottom = top, bottom
    return prev_top, prev_bottom


def scale_expand(
    marker: LabeledSample, edges: CurveEdgePoints, cfg: ExpansionConfig
) -> List[LabeledSample]:
    """
    Estende o marcador τ píxeis para cada lado em cada passo.

    Os novos pontos de aresta mantêm as ordenadas com jitter ε, λ ∈ [-d, d];
    o espaço alargado é preenchido por interpolação linear do traço. A largura
    justa da máscara cresce exatamente 2·k·τ ao fim de k passos.
    """
    rng = np.random.default_rng(cfg.seed)
    width, height = marker.width, marker.height
    bits = marker.label_mask.bits.copy()

    left_col = int(edges.left_top.px)
    right_col = int(edges.right_top.px) - 1
    left_span = (int(edges.left_top.py), int(edges.left_bottom.py))
    right_span = (int(edges.right_top.py), int(edges.right_bottom.py))
    for col, (top, bottom) in ((left_col, left_span), (right_col, right_span)):
        if not (0 <= col < width and bits[top, col] and bits[bottom - 1, col]):
            raise InvalidGeometry(f"Ponto de aresta fora do traço na coluna {col}")

    image = np.array(marker.image, copy=True)
    box = marker.target_box
    samples: List[LabeledSample] = []
    for k in range(1, cfg.steps + 1):
        new_left = left_col - cfg.tau
        new_right = right_col + cfg.tau
        if new_left < 0 or new_right >= width:
            raise ExtensionOutOfBounds(
                f"Passo {k}: colunas {new_left}..{new_right} fora de [0, {width})"
            )

        new_left_span = _jittered_span(*left_span, rng, cfg.d, height)
        new_right_span = _jittered_span(*right_span, rng, cfg.d, height)
        jitter = [
            new_left_span[0] - left_span[0],
            new_left_span[1] - left_span[1],
            new_right_span[0] - right_span[0],
            new_right_span[1] - right_span[1],
        ]
        left_span = _fill_extension(bits, left_col, left_span, new_left, new_left_span)
        right_span = _fill_extension(bits, right_col, right_span, new_right, new_right_span)
        left_col, right_col = new_left, new_right

        image[bits] = MARKER_INK
        mask = BinaryMask(bits)
        box = box.union(mask_tight_bbox(mask))
        truth = dict(marker.ground_truth)
        truth.update({"tau": cfg.tau, "step": k, "d": cfg.d, "jitter": jitter})
        samples.append(
            LabeledSample(
                image=image,
                target_box=box,
                label_mask=mask,
                polarity=marker.polarity,
                ground_truth=truth,
                source=f"scale_expand(tau={cfg.tau}, step={k})",
            )
        )
        logger.debug(f"Expansão passo {k}: colunas {left_col}..{right_col}, jitter {jitter}")
    return samples


def expansion_sweep(
    sample: LabeledSample,
    start: int = SWEEP_START,
    stop: int = SWEEP_STOP,
    step: int = SWEEP_STEP,
    d: int = SWEEP_D,
    seed: int = 0,
) -> List[LabeledSample]:
    """Uma expansão de um passo por valor de τ em start..stop (de `step` em `step`)."""
    edges = find_curve_edges(sample.label_mask)
    taus = list(range(start, stop + 1, step))
    children = np.random.SeedSequence(seed).spawn(len(taus))
    out = []
    for tau, child in zip(taus, children):
        cfg = ExpansionConfig(tau=tau, d=d, steps=1, seed=int(child.generate_state(1)[0]))
        out.extend(scale_expand(sample, edges, cfg))
    return out


def pad_sample(sample: LabeledSample, pad_x: int, pad_y: int = 0) -> LabeledSample:
    """Acrescenta fundo à volta da amostra (caixa e máscara acompanham)."""
    if pad_x < 0 or pad_y < 0:
        raise ValueError(f"Padding negativo: {pad_x}, {pad_y}")
    widths = ((pad_y, pad_y), (pad_x, pad_x))
    return LabeledSample(
        image=np.pad(sample.image, widths, constant_values=BACKGROUND),
        target_box=sample.target_box.translate(pad_x, pad_y),
        label_mask=BinaryMask(np.pad(sample.label_mask.bits, widths)),
        polarity=sample.polarity,
        ground_truth=dict(sample.ground_truth),
        source=sample.source,
    )


# ============================================================================
# MUDANÇA DINÂMICA DE LOCALIZAÇÃO
# ============================================================================


def dynamic_location_shift(
    sample: LabeledSample, l: int, direction: Direction
) -> LabeledSample:
    """
    Desloca a caixa alvo l píxeis; a faixa vizinha troca de lado com a caixa.

    Left: as colunas [x-l, x+w) passam de faixa|caixa a caixa|faixa.
    Right: as colunas [x, x+w+l) passam de caixa|faixa a faixa|caixa.
    A troca é feita em toda a altura, na imagem e na máscara.
    """
    if l < 0:
        raise ShiftOutOfBounds(f"Distância negativa: {l}")
    if l == 0:
        return sample
    box = sample.target_box
    if direction is Direction.LEFT:
        if l > box.x:
            raise ShiftOutOfBounds(f"Deslocar {l} para a esquerda a partir de x={box.x}")
        start, stop, split, new_x = box.x - l, box.right, l, box.x - l
    else:
        if box.right + l > sample.width:
            raise ShiftOutOfBounds(
                f"Deslocar {l} para a direita a partir de {box.right} (largura {sample.width})"
            )
        start, stop, split, new_x = box.x, box.right + l, box.w, box.x + l

    image = np.array(sample.image, copy=True)
    bits = sample.label_mask.bits.copy()
    image[:, start:stop] = correct_swap(image[:, start:stop], split)
    bits[:, start:stop] = correct_swap(bits[:, start:stop], split)
    truth = dict(sample.ground_truth)
    truth["shift"] = {"l": l, "direction": direction.value}
    return LabeledSample(
        image=image,
        target_box=BBox(new_x, box.y, box.w, box.h),
        label_mask=BinaryMask(bits),
        polarity=sample.polarity,
        ground_truth=truth,
        source=f"dlc({direction.value}, l={l})",
    )


# ============================================================================
# CONJUNTO DE CONTRASTE E PERDA
# ============================================================================


def _positive_region(sample: LabeledSample) -> BBox:
    if sample.label_mask.is_empty:
        return sample.target_box
    return sample.target_box.union(mask_tight_bbox(sample.label_mask))


def synth_contrast_set(
    positives: Sequence[LabeledSample],
    negatives: Sequence[LabeledSample],
    n: int,
    seed: int,
) -> List[LabeledSample]:
    """
    n composições positivo ⊕ negativo lado a lado (ordem aleatória).

    Amostragem uniforme com reposição; as alturas são igualadas com fundo e
    cada recorte fica centrado na vertical. A máscara composta só tem a
    região positiva.
    """
    if not positives:
        raise EmptyPool("Sem amostras positivas")
    if not negatives:
        raise EmptyPool("Sem amostras negativas")
    rng = np.random.default_rng(seed)

    out: List[LabeledSample] = []
    for _ in range(n):
        pos = positives[int(rng.integers(len(positives)))]
        neg = negatives[int(rng.integers(len(negatives)))]
        positive_first = bool(rng.integers(2) == 0)

        pos_box = _positive_region(pos)
        pos_img = pos.image[pos_box.y : pos_box.bottom, pos_box.x : pos_box.right]
        pos_bits = pos.label_mask.crop(pos_box).bits
        neg_img = neg.crop()

        height = max(pos_img.shape[0], neg_img.shape[0])
        width = pos_img.shape[1] + neg_img.shape[1]
        image = np.full((height, width), BACKGROUND, dtype=np.uint8)
        bits = np.zeros((height, width), dtype=bool)

        pos_x = 0 if positive_first else neg_img.shape[1]
        neg_x = pos_img.shape[1] if positive_first else 0
        pos_y = (height - pos_img.shape[0]) // 2
        neg_y = (height - neg_img.shape[0]) // 2
        image[pos_y : pos_y + pos_img.shape[0], pos_x : pos_x + pos_img.shape[1]] = pos_img
        image[neg_y : neg_y + neg_img.shape[0], neg_x : neg_x + neg_img.shape[1]] = neg_img
        bits[pos_y : pos_y + pos_bits.shape[0], pos_x : pos_x + pos_bits.shape[1]] = pos_bits

        out.append(
            LabeledSample(
                image=image,
                target_box=BBox(pos_x, pos_y, pos_box.w, pos_box.h),
                label_mask=BinaryMask(bits),
                polarity=Polarity.POSITIVE,
                ground_truth={"positive": pos.source, "negative": neg.source},
                source="contrast",
            )
        )
    return out


def mask_cross_entropy(pred, label: BinaryMask, reduction: str = "sum") -> float:
    """-Σ [l·log p + (1-l)·log(1-p)], com p recortado a [ε, 1-ε]."""
    p = np.asarray(pred, dtype=np.float64)
    if p.shape != label.bits.shape:
        raise DimensionMismatch(f"Predição {p.shape} ≠ máscara {label.bits.shape}")
    if np.isnan(p).any() or (p < 0).any() or (p > 1).any():
        raise ValueError("Predições têm de ser probabilidades em [0, 1]")
    if reduction not in ("sum", "mean"):
        raise ValueError(f"reduction desconhecida: {reduction!r}")

    p = np.clip(p, CE_EPSILON, 1.0 - CE_EPSILON)
    l = label.bits
    losses = -np.where(l, np.log(p), np.log1p(-p))
    total = float(losses.sum())
    if reduction == "mean":
        return total / losses.size
    return total


# ============================================================================
# GERADORES
# ============================================================================


def gen_ideal_marker(
    width: int,
    height: int,
    stroke_thickness: int,
    crossing_x: int,
    seed: int = 0,
    mirrored: Optional[bool] = None,
) -> Tuple[BinaryMask, MarkerTruth]:
    """
    Marcador de troca ideal: banda superior sobre um segmento, traço vertical
    no cruzamento, banda inferior sob o outro segmento.

    Projeção X com um único pico em crossing_x, projeção Y com dois picos
    (as duas bandas). `mirrored=None` deixa a seed escolher a orientação.

    A geometria é ajustada por dentro: as bandas têm no mínimo
    max(⌈W/4⌉, t+1) colunas (prolongam-se para lá do cruzamento quando o
    segmento é curto) e a sua espessura desce até (altura-3)//2 em caixas
    baixas, para deixar pelo menos 3 linhas de vale entre os lobos.
    """
    t = stroke_thickness
    if t < 1:
        raise InvalidGeometry(f"Espessura do traço tem de ser >= 1, recebido {t}")
    if not (t < crossing_x < width - t):
        raise InvalidGeometry(f"crossing_x={crossing_x} fora de ({t}, {width - t})")
    if height < MIN_MARKER_HEIGHT:
        raise InvalidGeometry(
            f"Altura {height} < {MIN_MARKER_HEIGHT}: dois lobos não cabem com vale entre eles"
        )

    if mirrored is None:
        mirrored = bool(np.random.default_rng(seed).integers(2))

    band = min(t, (height - 3) // 2)
    min_len = max(int(np.ceil(width / 4.0)), t + 1)
    v_start = crossing_x - t // 2
    v_end = v_start + t
    near_end = max(v_end, min_len)  # banda que acaba depois do traço
    far_start = min(v_start, width - min_len)  # banda que começa antes do traço

    bits = np.zeros((height, width), dtype=bool)
    bits[:, v_start:v_end] = True
    if mirrored:
        bits[:band, far_start:] = True
        bits[height - band :, :near_end] = True
    else:
        bits[:band, :near_end] = True
        bits[height - band :, far_start:] = True

    truth = MarkerTruth(crossing_x=crossing_x, box=BBox(0, 0, width, height), mirrored=mirrored)
    return BinaryMask(bits), truth


def render_chars(
    canvas: np.ndarray, chars: Sequence[BBox], ink: int = CHAR_INK
) -> np.ndarray:
    """Desenha cada caractere como contorno + um traço interior (PIL)."""
    img = Image.fromarray(np.asarray(canvas, dtype=np.uint8))
    draw = ImageDraw.Draw(img)
    for c in chars:
        draw.rectangle([c.x, c.y, c.right - 1, c.bottom - 1], outline=ink, width=2)
        draw.line([c.x + 2, c.bottom - 3, c.right - 3, c.y + 2], fill=ink, width=2)
    return np.array(img, dtype=np.uint8)


def blank_canvas(width: int, height: int) -> np.ndarray:
    return np.full((height, width), BACKGROUND, dtype=np.uint8)


def _layout_row(
    rng: np.random.Generator, n: int, x0: int, y: int, cw: int, ch: int, gap_range: Tuple[int, int]
) -> List[BBox]:
    boxes = []
    x = x0
    for _ in range(n):
        boxes.append(BBox(x, y, cw, ch))
        x += cw + int(rng.integers(gap_range[0], gap_range[1] + 1))
    return boxes


def gen_swap_scene(
    n_pairs: Optional[int] = None, seed: int = 0, jitter_room: int = 12
) -> SwapScene:
    """
    Linha de texto com dois segmentos trocados (A e B, n_pairs caracteres cada)
    e o marcador ideal que passa por cima de um e por baixo do outro.

    O marcador começa dentro do primeiro caractere de A e acaba dentro do
    último de B, como acontece na escrita real; a caixa verdadeira é a união
    do marcador com os caracteres de A e B.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4)) if n_pairs is None else int(n_pairs)
    if n < 1:
        raise InvalidGeometry(f"n_pairs tem de ser >= 1, recebido {n}")

    cw = int(rng.integers(20, 30))
    ch = int(rng.integers(32, 42))
    t = int(rng.integers(2, 5))
    clearance = int(rng.integers(3, 7))
    n_before = int(rng.integers(1, 3))
    n_after = int(rng.integers(1, 3))

    margin = jitter_room + t + clearance + 4
    row_y = margin + t + clearance
    row = _layout_row(rng, n_before + 2 * n + n_after, margin, row_y, cw, ch, (4, 8))
    seg_a = row[n_before : n_before + n]
    seg_b = row[n_before + n : n_before + 2 * n]

    delta_left = int(rng.integers(3, cw // 4 + 1))
    delta_right = int(rng.integers(3, cw // 4 + 1))
    mx0 = seg_a[0].x + delta_left
    mx1 = seg_b[-1].right - delta_right
    my0 = row_y - clearance - t
    my1 = row_y + ch + clearance + t
    crossing = (seg_a[-1].right + seg_b[0].x) // 2

    marker, truth = gen_ideal_marker(
        mx1 - mx0, my1 - my0, t, crossing - mx0, seed=int(rng.integers(2**31))
    )
    width = row[-1].right + margin
    height = my1 + margin
    full_bits = np.zeros((height, width), dtype=bool)
    full_bits[my0:my1, mx0:mx1] = marker.bits
    marker_mask = BinaryMask(full_bits)

    image = render_chars(blank_canvas(width, height), row)
    image[full_bits] = MARKER_INK

    marker_box = BBox.from_corners(mx0, my0, mx1, my1)
    truth_box = union_boxes([marker_box, *seg_a, *seg_b])
    score = round(float(rng.uniform(0.6, 1.0)), 3)
    detection = PrototypeDetection(
        box=truth_box,
        cls=PrototypeClass.TYPE_I,
        score=score,
        mask=marker_mask.crop(truth_box),
    )
    logger.debug(
        f"Cena de troca seed={seed}: {n}+{n} caracteres, cruzamento x={crossing}, "
        f"espelhado={truth.mirrored}"
    )
    return SwapScene(
        image=image,
        detection=detection,
        chars=tuple(row),
        marker_mask=marker_mask,
        truth_box=truth_box,
        swap_column=crossing,
    )


def _center_x(box: BBox) -> float:
    return box.x + box.w / 2.0


def _vertical_offset(rng: np.random.Generator, cls: PrototypeClass, ch: int) -> Tuple[int, int]:
    """Distância vertical entre as linhas e lado do grupo sobreposto (+1 = por baixo)."""
    dy = int(rng.integers(ch * 2 // 3, ch * 4 // 5 + 1))
    below = bool(rng.integers(2)) if cls is not PrototypeClass.TYPE_III else False
    return dy, 1 if below else -1


def _lateral_shift(rng: np.random.Generator, cls: PrototypeClass, cw: int) -> int:
    if cls is PrototypeClass.TYPE_II:
        return int(rng.integers(0, cw // 4 + 1))
    return int(rng.integers(cw // 4, cw // 2 + 1)) * int(rng.choice([-1, 1]))


def _small_char_size(cw: int, ch: int) -> Tuple[int, int]:
    return cw - 2 * (cw // 8), ch - 2 * (ch // 8)


_Pair = Tuple[BBox, BBox]


def _overlap_over_main(
    rng: np.random.Generator, cls: PrototypeClass, n_main: int, n_ov: int,
    cw: int, ch: int, margin: int, base_y: int,
) -> Tuple[List[BBox], List[BBox], Tuple[_Pair, _Pair]]:
    """n_ov < n_main: o grupo sobreposto assenta num troço da linha principal."""
    x = margin
    main: List[BBox] = []
    for _ in range(n_main):
        main.append(BBox(x, base_y + int(rng.integers(-1, 2)), cw, ch))
        x += cw + int(rng.integers(2, 6))

    dy, sign = _vertical_offset(rng, cls, ch)
    main_cy = base_y + ch / 2.0

    ov: List[BBox] = []
    if cls is PrototypeClass.TYPE_IV:
        k = int(rng.integers(0, n_main - n_ov))
        w4, h4 = _small_char_size(cw, ch)
        oy = int(round(main_cy + sign * dy - h4 / 2.0))
        for j in range(n_ov):
            gap_center = (main[k + j].right + main[k + j + 1].x) / 2.0
            ov.append(BBox(int(round(gap_center - w4 / 2.0)), oy, w4, h4))
        last_main = main[k + n_ov]
    else:
        k = int(rng.integers(0, n_main - n_ov + 1))
        shift = _lateral_shift(rng, cls, cw)
        oy = int(round(main_cy + sign * dy - ch / 2.0))
        for j in range(n_ov):
            ov.append(BBox(main[k + j].x + shift, oy, cw, ch))
        last_main = main[k + n_ov - 1]
    return main, ov, ((main[k], ov[0]), (last_main, ov[-1]))


def _main_under_overlap(
    rng: np.random.Generator, cls: PrototypeClass, n_main: int, n_ov: int,
    cw: int, ch: int, margin: int, base_y: int,
) -> Tuple[List[BBox], List[BBox], Tuple[_Pair, _Pair]]:
    """n_ov >= n_main: a linha principal ocupa só algumas colunas do grupo sobreposto."""
    n_cols = n_ov + 1 if cls is PrototypeClass.TYPE_IV else n_ov
    columns: List[int] = []
    x = margin
    for _ in range(n_cols):
        columns.append(x)
        x += cw + int(rng.integers(2, 6))

    k = int(rng.integers(0, n_cols - n_main + 1))
    main = [BBox(columns[k + j], base_y + int(rng.integers(-1, 2)), cw, ch) for j in range(n_main)]
    dy, sign = _vertical_offset(rng, cls, ch)
    main_cy = base_y + ch / 2.0

    if cls is PrototypeClass.TYPE_IV:
        w4, h4 = _small_char_size(cw, ch)
        oy = int(round(main_cy + sign * dy - h4 / 2.0))
        ov = [
            BBox(int(round((columns[j] + cw + columns[j + 1]) / 2.0 - w4 / 2.0)), oy, w4, h4)
            for j in range(n_ov)
        ]
        return main, ov, ((main[0], ov[k]), (main[-1], ov[k + n_main - 2]))

    shift = _lateral_shift(rng, cls, cw)
    oy = int(round(main_cy + sign * dy - ch / 2.0))
    ov = [BBox(columns[j] + shift, oy, cw, ch) for j in range(n_ov)]
    return main, ov, ((main[0], ov[k]), (main[-1], ov[k + n_main - 1]))


def gen_overlap_scene(
    cls: PrototypeClass, n_main: int, n_ov: int, seed: int = 0
) -> OverlapScene:
    """
    Linha principal + grupo sobreposto com a geometria do protótipo.

    II: caracteres empilhados por cima ou por baixo (pequeno desvio lateral);
    III: caracteres elevados com desvio lateral de 1/4 a 1/2 da largura;
    IV: caracteres mais pequenos espremidos sobre os intervalos da linha.

    A caixa do protótipo é parcial, como a devolvida por um detetor de
    protótipos: vai do ponto médio do primeiro par sobreposto ao do último.

    A caixa verdadeira segue os papéis do refinamento: a fila mais longa é a
    principal e, com filas do mesmo tamanho, a principal é a de cima.
    """
    if cls is PrototypeClass.TYPE_I or not isinstance(cls, PrototypeClass):
        raise InvalidGeometry(f"Classe de sobreposição inválida: {cls}")
    if n_main < 2:
        raise InvalidGeometry(f"n_main tem de ser >= 2, recebido {n_main}")
    if n_ov < 1:
        raise InvalidGeometry(f"n_ov tem de ser >= 1, recebido {n_ov}")

    rng = np.random.default_rng(seed)
    cw = 2 * int(rng.integers(9, 14))
    ch = 2 * int(rng.integers(12, 17))
    margin = int(rng.integers(cw, 2 * cw))
    base_y = margin + ch + 2

    layout = _overlap_over_main if n_ov < n_main else _main_under_overlap
    main, ov, ((first_main, first_ov), (last_main, last_ov)) = layout(
        rng, cls, n_main, n_ov, cw, ch, margin, base_y
    )

    left = int(np.floor((_center_x(first_main) + _center_x(first_ov)) / 2.0))
    right = int(np.ceil((_center_x(last_main) + _center_x(last_ov)) / 2.0))
    involved = [first_main, last_main, *ov]
    top = min(b.y for b in involved)
    bottom = max(b.bottom for b in involved)
    proto = BBox(left, top, max(1, right - left), bottom - top)

    ov_above = ov[0].y < main[0].y
    if n_ov > n_main or (n_ov == n_main and ov_above):
        q_main, q_ov = ov, main
    else:
        q_main, q_ov = main, ov
    span = union_boxes(q_ov)
    truth = union_boxes(q_ov + [b for b in q_main if horizontal_overlap(b, span) > 0])
    chars = tuple(main + ov)
    width = max(b.right for b in chars) + margin
    height = max(b.bottom for b in chars) + margin
    return OverlapScene(cls, proto, chars, truth, (width, height))


def render_overlap_scene(scene: OverlapScene) -> np.ndarray:
    return render_chars(blank_canvas(*scene.image_size), scene.chars)


def gen_marker_sample(seed: int = 0, pad: int = 8) -> LabeledSample:
    """Amostra positiva: marcador ideal sobre fundo limpo."""
    rng = np.random.default_rng(seed)
    width = int(rng.integers(60, 121))
    height = int(rng.integers(30, 49))
    t = int(rng.integers(2, 5))
    crossing = int(rng.integers(int(np.ceil(width / 4.0)) + t, 3 * width // 4 - t + 1))
    marker, truth = gen_ideal_marker(width, height, t, crossing, seed=int(rng.integers(2**31)))

    bits = np.pad(marker.bits, pad)
    image = blank_canvas(bits.shape[1], bits.shape[0])
    image[bits] = MARKER_INK
    return LabeledSample(
        image=image,
        target_box=BBox(pad, pad, width, height),
        label_mask=BinaryMask(bits),
        polarity=Polarity.POSITIVE,
        ground_truth={"crossing_x": pad + truth.crossing_x, "mirrored": truth.mirrored},
        source=f"ideal_marker(seed={seed})",
    )


def gen_negative_sample(seed: int = 0, pad: int = 8) -> LabeledSample:
    """Amostra negativa: caracteres sem marcador (máscara vazia)."""
    rng = np.random.default_rng(seed)
    cw, ch = int(rng.integers(16, 25)), int(rng.integers(24, 37))
    row = _layout_row(rng, int(rng.integers(2, 5)), pad, pad, cw, ch, (3, 7))
    width, height = row[-1].right + pad, ch + 2 * pad
    image = render_chars(blank_canvas(width, height), row)
    return LabeledSample(
        image=image,
        target_box=union_boxes(row),
        label_mask=BinaryMask.zeros(width, height),
        polarity=Polarity.NEGATIVE,
        source=f"plain_text(seed={seed})",
    )
