# -*- coding: utf-8 -*-
"""
Formatos de ficheiro da segunda fase

FORMATOS:
=========
- Máscaras: PNG 8 bits em tons de cinzento (0 = fundo, 255 = primeiro plano)
  ou PGM ASCII (P2). Valores intermédios são probabilidades v/255 e são
  binarizados com um limiar (0.5 por omissão).
- Deteções da primeira fase (JSON):
    [{"image": id, "detections": [{"class": "I", "box": [x,y,w,h],
                                   "score": 0.9, "mask": "masks/a_0.png"}]}]
  O caminho da máscara é relativo à pasta do ficheiro de deteções.
- Caracteres: [{"image": id, "chars": [[x,y,w,h], ...]}]
- Avaliação: {"image": id, "boxes": [...], "classes": [...], "scores": [...]}
  (sem scores no ground truth), em lista JSON ou JSON Lines.
- Amostras geradas: <nome>.png + <nome>_mask.png + <nome>.json
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from augment_synth import LabeledSample, Polarity
from core_geometry import (
    BBox,
    BinaryMask,
    InvalidBox,
    PrototypeClass,
    StageTwoError,
)

logger = logging.getLogger(__name__)

DEFAULT_MASK_THRESHOLD: float = 0.5  # Limiar dos mapas de probabilidade


class ParseError(StageTwoError):
    """Ficheiro de entrada mal formado."""


class IdMismatch(StageTwoError):
    """Identificadores de imagem não alinhados entre ficheiros."""


# ============================================================================
# RASTERS
# ============================================================================


def read_pgm(path: Path) -> np.ndarray:
    """Lê PGM ASCII (P2) como uint8, reescalando se maxval ≠ 255."""
    path = Path(path)
    tokens: List[str] = []
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise ParseError(f"{path}: não é um PGM ASCII (P2)")
    try:
        width, height, maxval = (int(v) for v in tokens[1:4])
        values = np.array([int(v) for v in tokens[4:]], dtype=np.int64)
    except ValueError as exc:
        raise ParseError(f"{path}: cabeçalho/valores PGM inválidos ({exc})") from None
    if width < 1 or height < 1 or maxval < 1 or values.size != width * height:
        raise ParseError(
            f"{path}: esperado {width}x{height} valores, lidos {values.size}"
        )
    if maxval != 255:
        values = np.round(values * (255.0 / maxval))
    return np.clip(values, 0, 255).astype(np.uint8).reshape(height, width)


def write_pgm(path: Path, raster: np.ndarray) -> None:
    arr = np.asarray(raster, dtype=np.uint8)
    height, width = arr.shape
    lines = ["P2", f"{width} {height}", "255"]
    lines.extend(" ".join(str(int(v)) for v in row) for row in arr)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_image(path: Path) -> np.ndarray:
    """Raster 2D uint8 (tons de cinzento) a partir de PNG/PGM/qualquer formato PIL."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Imagem não encontrada: {path}")
    if path.suffix.lower() == ".pgm":
        with open(path, "rb") as f:
            magic = f.read(2)
        if magic == b"P2":
            return read_pgm(path)
    try:
        with Image.open(path) as img:
            return np.array(img.convert("L"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise ParseError(f"{path}: imagem ilegível ({exc})") from None


def write_image(path: Path, raster: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(raster, dtype=np.uint8)
    if path.suffix.lower() == ".pgm":
        write_pgm(path, arr)
    else:
        Image.fromarray(arr).save(path, format="PNG")


def binarize(raster: np.ndarray, threshold: float = DEFAULT_MASK_THRESHOLD) -> BinaryMask:
    """Primeiro plano onde v/255 >= threshold."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"Limiar da máscara em (0, 1]: {threshold}")
    return BinaryMask(np.asarray(raster, dtype=np.float64) / 255.0 >= threshold)


def load_mask(path: Path, threshold: float = DEFAULT_MASK_THRESHOLD) -> BinaryMask:
    return binarize(read_image(path), threshold)


def save_mask(path: Path, mask: BinaryMask) -> None:
    write_image(path, mask.to_uint8())


# ============================================================================
# JSON
# ============================================================================


def write_json(path: Path, payload: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, ensure_ascii=False)
        f.write("\n")


def read_records(path: Path) -> List[Dict[str, Any]]:
    """Lista de objetos JSON: lista JSON, objeto único ou JSON Lines."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Ficheiro não encontrado: {path}")
    text = path.read_text(encoding="utf-8-sig")
    if not text.strip():
        return []
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                data.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: JSON inválido ({exc.msg})") from None
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list) or not all(isinstance(r, dict) for r in data):
        raise ParseError(f"{path}: esperada uma lista de objetos JSON")
    return data


def _image_id(record: Dict[str, Any], path: Path) -> str:
    image = record.get("image")
    if not isinstance(image, str) or not image:
        raise ParseError(f"{path}: registo sem campo 'image' válido: {record!r}")
    return image


def parse_box(value: Any, where: str) -> BBox:
    if not isinstance(value, (list, tuple)) or any(
        isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
    ):
        raise ParseError(f"{where}: caixa tem de ser [x, y, w, h] numérico: {value!r}")
    if any(float(v) != int(v) for v in value):
        raise ParseError(f"{where}: caixa com coordenadas não inteiras: {value!r}")
    try:
        return BBox.from_list([int(v) for v in value])
    except InvalidBox as exc:
        raise ParseError(f"{where}: {exc}") from None


def parse_class(value: Any, where: str) -> PrototypeClass:
    try:
        return PrototypeClass.from_label(value)
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class DetectionRecord:
    """Deteção da primeira fase tal como lida do ficheiro (máscara ainda não carregada)."""

    index: int
    cls: PrototypeClass
    box: BBox
    score: float
    mask_path: Optional[Path] = None


@dataclass(frozen=True)
class ImageDetections:
    image: str
    detections: Tuple[DetectionRecord, ...]


def parse_detection_file(path: Path) -> List[ImageDetections]:
    path = Path(path)
    base = path.parent
    images: List[ImageDetections] = []
    seen = set()
    for record in read_records(path):
        image = _image_id(record, path)
        if image in seen:
            raise ParseError(f"{path}: imagem repetida '{image}'")
        seen.add(image)
        raw = record.get("detections", [])
        if not isinstance(raw, list):
            raise ParseError(f"{path}: 'detections' de '{image}' não é uma lista")
        dets = []
        for i, det in enumerate(raw):
            where = f"{path}[{image}][{i}]"
            if not isinstance(det, dict):
                raise ParseError(f"{where}: deteção tem de ser um objeto")
            score = det.get("score", 1.0)
            if isinstance(score, bool) or not isinstance(score, (int, float)) or not 0 <= score <= 1:
                raise ParseError(f"{where}: score fora de [0, 1]: {score!r}")
            mask = det.get("mask")
            if mask is not None and not isinstance(mask, str):
                raise ParseError(f"{where}: 'mask' tem de ser um caminho")
            dets.append(
                DetectionRecord(
                    index=i,
                    cls=parse_class(det.get("class"), where),
                    box=parse_box(det.get("box"), where),
                    score=float(score),
                    mask_path=(base / mask) if mask else None,
                )
            )
        images.append(ImageDetections(image, tuple(dets)))
    logger.info(f"Lidas deteções de {len(images)} imagens de {path}")
    return images


def parse_char_file(path: Path) -> Dict[str, Tuple[BBox, ...]]:
    path = Path(path)
    chars: Dict[str, Tuple[BBox, ...]] = {}
    for record in read_records(path):
        image = _image_id(record, path)
        raw = record.get("chars", [])
        if not isinstance(raw, list):
            raise ParseError(f"{path}: 'chars' de '{image}' não é uma lista")
        chars[image] = tuple(
            parse_box(box, f"{path}[{image}][{i}]") for i, box in enumerate(raw)
        )
    return chars


def detections_to_json(
    images: Iterable[Tuple[str, Sequence[Tuple[PrototypeClass, BBox, float, Optional[str]]]]]
) -> List[Dict[str, Any]]:
    """Serializa deteções no esquema de entrada (para fixtures)."""
    out = []
    for image, dets in images:
        records = []
        for cls, box, score, mask in dets:
            entry: Dict[str, Any] = {"class": cls.value, "box": box.to_list(), "score": score}
            if mask is not None:
                entry["mask"] = mask
            records.append(entry)
        out.append({"image": image, "detections": records})
    return out


# ============================================================================
# REGISTOS DE AVALIAÇÃO
# ============================================================================


@dataclass(frozen=True)
class EvalRecord:
    image: str
    boxes: Tuple[BBox, ...]
    classes: Tuple[PrototypeClass, ...]
    scores: Optional[Tuple[float, ...]] = None


def _eval_record(record: Dict[str, Any], path: Path) -> EvalRecord:
    image = _image_id(record, path)
    where = f"{path}[{image}]"
    if "detections" in record:
        dets = record["detections"] or []
        if not isinstance(dets, list) or not all(isinstance(d, dict) for d in dets):
            raise ParseError(f"{where}: 'detections' inválido")
        boxes = [d.get("box") for d in dets]
        classes = [d.get("class") for d in dets]
        scores = [d.get("score", 1.0) for d in dets]
    else:
        boxes = record.get("boxes", [])
        classes = record.get("classes")
        scores = record.get("scores")
        if classes is None:
            raise ParseError(f"{where}: falta 'classes'")
    if not isinstance(boxes, list) or not isinstance(classes, list) or len(boxes) != len(classes):
        raise ParseError(f"{where}: 'boxes' e 'classes' têm de ter o mesmo tamanho")
    if scores is not None and (not isinstance(scores, list) or len(scores) != len(boxes)):
        raise ParseError(f"{where}: 'scores' tem de ter o tamanho de 'boxes'")
    if scores is not None and any(
        isinstance(s, bool) or not isinstance(s, (int, float)) for s in scores
    ):
        raise ParseError(f"{where}: scores não numéricos")
    return EvalRecord(
        image=image,
        boxes=tuple(parse_box(b, f"{where}[{i}]") for i, b in enumerate(boxes)),
        classes=tuple(parse_class(c, f"{where}[{i}]") for i, c in enumerate(classes)),
        scores=tuple(float(s) for s in scores) if scores is not None else None,
    )


def parse_eval_file(path: Path) -> Dict[str, EvalRecord]:
    """Registos por imagem; aceita o esquema de avaliação e o de deteções."""
    path = Path(path)
    out: Dict[str, EvalRecord] = {}
    for record in read_records(path):
        rec = _eval_record(record, path)
        if rec.image in out:
            raise ParseError(f"{path}: imagem repetida '{rec.image}'")
        out[rec.image] = rec
    return out


def eval_record_to_json(record: EvalRecord) -> Dict[str, Any]:
    payload: Dict[str, Any] = {
        "image": record.image,
        "boxes": [b.to_list() for b in record.boxes],
        "classes": [c.value for c in record.classes],
    }
    if record.scores is not None:
        payload["scores"] = list(record.scores)
    return payload


def read_id_list(path: Path) -> List[str]:
    """Um identificador por linha; linhas vazias e comentários (#) ignorados."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Lista de exclusão não encontrada: {path}")
    ids = []
    for line in path.read_text(encoding="utf-8-sig").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            ids.append(line)
    return ids


# ============================================================================
# AMOSTRAS ROTULADAS
# ============================================================================


def write_sample(directory: Path, name: str, sample: LabeledSample) -> None:
    directory = Path(directory)
    write_image(directory / f"{name}.png", sample.image)
    save_mask(directory / f"{name}_mask.png", sample.label_mask)
    write_json(
        directory / f"{name}.json",
        {
            "box": sample.target_box.to_list(),
            "polarity": sample.polarity.value,
            "ground_truth": sample.ground_truth,
            "source": sample.source,
        },
    )


def read_sample(directory: Path, name: str) -> LabeledSample:
    directory = Path(directory)
    sidecar = directory / f"{name}.json"
    if not sidecar.exists():
        raise FileNotFoundError(f"Amostra não encontrada: {sidecar}")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        polarity = Polarity(meta["polarity"])
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ParseError(f"{sidecar}: sidecar inválido ({exc})") from None
    return LabeledSample(
        image=read_image(directory / f"{name}.png"),
        target_box=parse_box(meta.get("box"), str(sidecar)),
        label_mask=load_mask(directory / f"{name}_mask.png"),
        polarity=polarity,
        ground_truth=meta.get("ground_truth", {}),
        source=meta.get("source", name),
    )


def list_samples(directory: Path) -> List[str]:
    """Nomes das amostras (sidecars .json) de uma pasta, ordenados."""
    directory = Path(directory)
    return sorted(p.stem for p in directory.glob("*.json"))
