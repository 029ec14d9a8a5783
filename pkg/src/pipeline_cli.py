# -*- coding: utf-8 -*-
"""
Segunda fase de deteção de texto anómalo: linha de comandos

SUBCOMANDOS:
============
refine   deteções da primeira fase + caracteres → deteções refinadas
augment  expansão de escala, mudança de localização e conjunto de contraste
eval     precisão / recall / F1 a IoU 0.5 e 0.75
synth    fixtures sintéticas (cenas de troca e de sobreposição, falsos positivos)

CÓDIGOS DE SAÍDA:
=================
0 sucesso | 1 erro nos dados de entrada | 2 invariante interna violada

EXEMPLOS:
=========
    python pipeline_cli.py synth --out fixtures --seed 7 --false-positives 6 --jitter 3
    python pipeline_cli.py refine --detections fixtures/detections.json \\
        --chars fixtures/chars.json --images fixtures/images --out run
    python pipeline_cli.py eval --predictions run/predictions.json \\
        --gt fixtures/ground_truth.json --out run
"""

import argparse
import logging
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw

from augment_synth import (
    EmptyPool,
    Polarity,
    Direction,
    dynamic_location_shift,
    expansion_sweep,
    find_curve_edges,
    gen_marker_sample,
    gen_negative_sample,
    gen_overlap_scene,
    gen_swap_scene,
    pad_sample,
    render_overlap_scene,
    synth_contrast_set,
)
from core_geometry import (
    BBox,
    BinaryMask,
    DimensionMismatch,
    InvariantViolation,
    PrototypeClass,
    PrototypeDetection,
    StageTwoError,
)
from evaluation import evaluate_run, report_table, write_reports
from io_formats import (
    DetectionRecord,
    ImageDetections,
    detections_to_json,
    list_samples,
    load_mask,
    parse_char_file,
    parse_detection_file,
    read_id_list,
    read_image,
    read_sample,
    save_mask,
    write_image,
    write_json,
    write_sample,
)
from overlap_refine import (
    AnchorMode,
    CharFilter,
    Verdict,
    default_params,
    filter_chars,
    refine_overlap,
)
from run_config import ConfigError, RunConfig, build_config, parse_float_list, require_paths
from swap_refine import (
    Accepted,
    MissingMask,
    SwapConfig,
    corrected_crop,
    refine_swap,
)

logger = logging.getLogger("stage_two")

KEPT_COLOR = (0, 170, 0)
REJECTED_COLOR = (220, 0, 0)
SWAP_COLOR = (0, 0, 255)


# ============================================================================
# INFRAESTRUTURA
# ============================================================================


def configure_logging(cfg: RunConfig) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if cfg.log_file is not None:
        Path(cfg.log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(cfg.log_file, encoding="utf-8"))
    logging.basicConfig(
        level=getattr(logging, cfg.log_level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


def get_num_workers() -> int:
    """Número de cores disponíveis (mínimo 1)."""
    try:
        return max(1, multiprocessing.cpu_count())
    except NotImplementedError:
        return max(1, os.cpu_count() or 1)


def _child_seeds(seed: int, n: int) -> List[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _run_tasks(func, tasks: Sequence, workers: int) -> List:
    """executor.map mantém a ordem das tarefas, qualquer que seja a ordem de conclusão."""
    if workers <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    workers = min(workers, get_num_workers(), len(tasks))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, tasks, chunksize=max(1, len(tasks) // (workers * 4))))


def _banner(title: str) -> None:
    print("=" * 70)
    print(title)
    print("=" * 70)


# ============================================================================
# REFINE
# ============================================================================


@dataclass(frozen=True)
class ImageTask:
    image: str
    image_path: Optional[Path]
    detections: Tuple[DetectionRecord, ...]
    chars: Tuple[BBox, ...]
    cfg: RunConfig


@dataclass(frozen=True)
class ImageOutcome:
    image: str
    n_input: int
    kept: Tuple[Dict[str, Any], ...]
    rejected: Tuple[Dict[str, Any], ...]

    def to_json(self) -> Dict[str, Any]:
        return {"image": self.image, "kept": list(self.kept), "rejected": list(self.rejected)}

    def to_eval_json(self) -> Dict[str, Any]:
        return {
            "image": self.image,
            "boxes": [k["box"] for k in self.kept],
            "classes": [k["class"] for k in self.kept],
            "scores": [k["score"] for k in self.kept],
        }


@dataclass(frozen=True)
class StageTwoOutput:
    images: Tuple[ImageOutcome, ...]

    def check_conservation(self) -> None:
        for outcome in self.images:
            if len(outcome.kept) + len(outcome.rejected) != outcome.n_input:
                raise InvariantViolation(
                    f"{outcome.image}: {len(outcome.kept)} mantidas + "
                    f"{len(outcome.rejected)} rejeitadas ≠ {outcome.n_input} deteções"
                )
            indices = sorted(d["index"] for d in outcome.kept + outcome.rejected)
            if indices != list(range(outcome.n_input)):
                raise InvariantViolation(f"{outcome.image}: deteções duplicadas ou perdidas")

    @property
    def n_kept(self) -> int:
        return sum(len(o.kept) for o in self.images)

    @property
    def n_rejected(self) -> int:
        return sum(len(o.rejected) for o in self.images)


def scale_box(box: BBox, sx: float, sy: float) -> BBox:
    x0, y0 = int(round(box.x * sx)), int(round(box.y * sy))
    x1 = max(x0 + 1, int(round(box.right * sx)))
    y1 = max(y0 + 1, int(round(box.bottom * sy)))
    return BBox.from_corners(x0, y0, x1, y1)


def resize_mask(mask: BinaryMask, width: int, height: int) -> BinaryMask:
    if (mask.width, mask.height) == (width, height):
        return mask
    img = Image.fromarray(mask.to_uint8()).resize((width, height), Image.Resampling.NEAREST)
    return BinaryMask(np.asarray(img) >= 128)


def _find_image(images_dir: Optional[Path], image: str) -> Optional[Path]:
    if images_dir is None:
        return None
    for suffix in (".png", ".pgm"):
        candidate = Path(images_dir) / f"{image}{suffix}"
        if candidate.exists():
            return candidate
    logger.warning(f"Imagem '{image}' não encontrada em {images_dir}; sem overlay nem recortes")
    return None


def _rejection(rec: DetectionRecord, box: BBox, reason: str) -> Dict[str, Any]:
    return {
        "index": rec.index,
        "class": rec.cls.value,
        "box": box.to_list(),
        "score": rec.score,
        "reason": reason,
    }


def _refine_swap_detection(
    rec: DetectionRecord,
    box: BBox,
    chars: Tuple[BBox, ...],
    image_size: Optional[Tuple[int, int]],
    scale: Optional[Tuple[float, float]],
    cfg: RunConfig,
) -> Tuple[Optional[Dict[str, Any]], Optional[Accepted], Optional[str]]:
    if rec.mask_path is None:
        raise MissingMask("Deteção tipo I sem caminho de máscara")
    if not rec.mask_path.exists():
        raise MissingMask(f"Máscara não encontrada: {rec.mask_path}")
    mask = load_mask(rec.mask_path, cfg.mask_threshold)
    if (mask.width, mask.height) != (rec.box.w, rec.box.h):
        raise DimensionMismatch(
            f"Máscara {mask.width}x{mask.height} ≠ caixa {rec.box.w}x{rec.box.h}"
        )
    if scale is not None:
        mask = resize_mask(mask, box.w, box.h)

    det = PrototypeDetection(box=box, cls=rec.cls, score=rec.score, mask=mask)
    swap_cfg = SwapConfig(
        smooth_window=cfg.smooth_window,
        min_height=cfg.min_height,
        max_gap_frac=cfg.max_gap_frac,
        margin=cfg.margin,
    )
    outcome = refine_swap(det, chars, swap_cfg, image_size)
    if not isinstance(outcome, Accepted):
        return None, None, outcome.reason
    result = outcome.result
    kept = {
        "index": rec.index,
        "class": rec.cls.value,
        "original_box": box.to_list(),
        "box": result.adjusted_box.to_list(),
        "score": rec.score,
        "provenance": list(outcome.provenance),
        "swap_x": result.swap_x,
        "swap_column": result.swap_column,
    }
    return kept, outcome, None


def _refine_overlap_detection(
    rec: DetectionRecord, box: BBox, chars: Tuple[BBox, ...], cfg: RunConfig
) -> Tuple[Optional[Dict[str, Any]], Optional[str]]:
    candidates = filter_chars(box, chars, CharFilter(cfg.char_filter))
    params = default_params(candidates, cfg.gamma, cfg.alpha, cfg.beta)
    refinement = refine_overlap(box, candidates, params, AnchorMode(cfg.anchor))
    if refinement.verdict is Verdict.FALSE_POSITIVE:
        return None, refinement.reason
    kept = {
        "index": rec.index,
        "class": rec.cls.value,
        "original_box": box.to_list(),
        "box": refinement.final_box.to_list(),
        "score": rec.score,
        "provenance": ["overlap-refined"],
        "q_main": [b.to_list() for b in refinement.q_main],
        "q_ov": [b.to_list() for b in refinement.q_ov],
    }
    return kept, None


def _draw_overlay(
    image: np.ndarray,
    kept: Sequence[Dict[str, Any]],
    rejected: Sequence[Dict[str, Any]],
    path: Path,
) -> None:
    canvas = Image.fromarray(image).convert("RGB")
    draw = ImageDraw.Draw(canvas)
    for det in rejected:
        x, y, w, h = det["box"]
        draw.rectangle([x, y, x + w - 1, y + h - 1], outline=REJECTED_COLOR, width=2)
    for det in kept:
        x, y, w, h = det["box"]
        draw.rectangle([x, y, x + w - 1, y + h - 1], outline=KEPT_COLOR, width=2)
        if "swap_column" in det:
            col = det["swap_column"]
            draw.line([col, y, col, y + h - 1], fill=SWAP_COLOR, width=1)
    path.parent.mkdir(parents=True, exist_ok=True)
    canvas.save(path, format="PNG")


def refine_image(task: ImageTask) -> ImageOutcome:
    """Refina todas as deteções de uma imagem; erros por deteção viram rejeições."""
    cfg = task.cfg
    image = read_image(task.image_path) if task.image_path is not None else None
    scale = None
    chars = task.chars
    if cfg.normalize_size is not None:
        if image is None:
            raise ConfigError(f"normalize_size exige a imagem de '{task.image}'")
        width, height = cfg.normalize_size
        scale = (width / image.shape[1], height / image.shape[0])
        image = np.asarray(
            Image.fromarray(image).resize((width, height), Image.Resampling.BILINEAR)
        )
        chars = tuple(scale_box(c, *scale) for c in chars)
    image_size = (int(image.shape[1]), int(image.shape[0])) if image is not None else None

    kept: List[Dict[str, Any]] = []
    rejected: List[Dict[str, Any]] = []
    crops: List[Tuple[int, Accepted]] = []
    for rec in task.detections:
        box = scale_box(rec.box, *scale) if scale is not None else rec.box
        if rec.score < cfg.min_score:
            rejected.append(_rejection(rec, box, "below_min_score"))
            continue
        if image_size is not None and not box.fits_within(*image_size):
            rejected.append(_rejection(rec, box, "box_outside_image"))
            continue
        try:
            if rec.cls is PrototypeClass.TYPE_I:
                entry, accepted, reason = _refine_swap_detection(
                    rec, box, chars, image_size, scale, cfg
                )
                if accepted is not None:
                    crops.append((rec.index, accepted))
            else:
                entry, reason = _refine_overlap_detection(rec, box, chars, cfg)
        except InvariantViolation:
            raise
        except (StageTwoError, OSError) as exc:
            logger.warning(f"{task.image}[{rec.index}]: {type(exc).__name__}: {exc}")
            rejected.append(_rejection(rec, box, f"{type(exc).__name__}: {exc}"))
            continue
        if entry is None:
            rejected.append(_rejection(rec, box, reason))
        else:
            kept.append(entry)

    if image is not None:
        out = Path(cfg.out)
        if cfg.corrected_crops:
            for index, accepted in crops:
                try:
                    write_image(
                        out / "crops" / f"{task.image}_{index}.png",
                        corrected_crop(image, accepted.result),
                    )
                except (StageTwoError, OSError) as exc:
                    logger.warning(f"Recorte corrigido falhou ({task.image}[{index}]): {exc}")
        if cfg.overlays:
            try:
                _draw_overlay(image, kept, rejected, out / "overlays" / f"{task.image}.png")
            except Exception as exc:
                logger.warning(f"Overlay falhou para '{task.image}': {exc}")

    return ImageOutcome(task.image, len(task.detections), tuple(kept), tuple(rejected))


def cmd_refine(cfg: RunConfig) -> StageTwoOutput:
    require_paths(cfg, "detections")
    if cfg.chars is not None:
        require_paths(cfg, "chars")
    if cfg.images is not None:
        require_paths(cfg, "images")

    images: List[ImageDetections] = parse_detection_file(cfg.detections)
    chars = parse_char_file(cfg.chars) if cfg.chars is not None else {}
    tasks = [
        ImageTask(
            image=entry.image,
            image_path=_find_image(cfg.images, entry.image),
            detections=entry.detections,
            chars=chars.get(entry.image, ()),
            cfg=cfg,
        )
        for entry in images
    ]
    output = StageTwoOutput(tuple(_run_tasks(refine_image, tasks, cfg.workers)))
    output.check_conservation()

    out = Path(cfg.out)
    write_json(out / "refined.json", [o.to_json() for o in output.images])
    write_json(out / "predictions.json", [o.to_eval_json() for o in output.images])

    _banner("SEGUNDA FASE: REFINAMENTO")
    n_input = sum(o.n_input for o in output.images)
    print(f"✓ {len(output.images)} imagens, {n_input} deteções")
    print(f"✓ Mantidas: {output.n_kept} | Rejeitadas: {output.n_rejected}")
    print(f"✓ Resultados em {out}")
    return output


# ============================================================================
# AUGMENT
# ============================================================================


def _load_pool(directory: Path) -> Tuple[List[Tuple[str, Any]], List[Tuple[str, Any]]]:
    positives, negatives = [], []
    for name in list_samples(directory):
        sample = read_sample(directory, name)
        (positives if sample.polarity is Polarity.POSITIVE else negatives).append((name, sample))
    return positives, negatives


def cmd_augment(cfg: RunConfig) -> Dict[str, int]:
    """Gera expansões, deslocamentos e composições de contraste a partir das amostras semente."""
    require_paths(cfg, "seed_markers")
    positives, negatives = _load_pool(cfg.seed_markers)
    if not positives:
        raise EmptyPool(f"Nenhum marcador semente (positivo) em {cfg.seed_markers}")
    if cfg.contrast_n > 0 and not negatives:
        raise EmptyPool(f"Nenhuma amostra negativa em {cfg.seed_markers}")

    out = Path(cfg.out)
    seeds = iter(_child_seeds(cfg.seed, len(positives) + len(positives) + len(negatives) + 1))
    max_tau = max(range(cfg.sweep_start, cfg.sweep_stop + 1, cfg.sweep_step))
    counts = {"expansion": 0, "dlc": 0, "contrast": 0}

    for name, sample in positives:
        edges = find_curve_edges(sample.label_mask)
        free = min(int(edges.left_top.px), sample.width - int(edges.right_top.px))
        padded = pad_sample(sample, max(0, max_tau - free))
        sweep = expansion_sweep(
            padded, cfg.sweep_start, cfg.sweep_stop, cfg.sweep_step, cfg.sweep_d, next(seeds)
        )
        for expanded in sweep:
            tau = expanded.ground_truth["tau"]
            write_sample(out / "expansion", f"{name}_tau{tau:03d}", expanded)
        counts["expansion"] += len(sweep)

    for name, sample in positives + negatives:
        rng = np.random.default_rng(next(seeds))
        direction = Direction.LEFT if rng.integers(2) == 0 else Direction.RIGHT
        shifted = dynamic_location_shift(pad_sample(sample, cfg.dlc_shift), cfg.dlc_shift, direction)
        write_sample(out / "dlc", name, shifted)
        counts["dlc"] += 1

    if cfg.contrast_n > 0:
        composites = synth_contrast_set(
            [s for _, s in positives], [s for _, s in negatives], cfg.contrast_n, next(seeds)
        )
        for i, composite in enumerate(composites):
            write_sample(out / "contrast", f"contrast_{i:04d}", composite)
        counts["contrast"] = len(composites)

    write_json(out / "augment_manifest.json", counts)
    _banner("AUMENTO DE DADOS")
    print(f"✓ Expansões: {counts['expansion']} ({len(positives)} marcadores semente)")
    print(f"✓ Mudanças de localização: {counts['dlc']}")
    print(f"✓ Composições de contraste: {counts['contrast']}")
    return counts


# ============================================================================
# EVAL
# ============================================================================


def cmd_eval(cfg: RunConfig):
    require_paths(cfg, "predictions", "ground_truth")
    exclude = read_id_list(cfg.exclude_list) if cfg.exclude_list is not None else []
    reports = evaluate_run(cfg.predictions, cfg.ground_truth, cfg.iou_thresholds, exclude)
    write_reports(Path(cfg.out), reports)

    _banner("AVALIAÇÃO (IoU " + "/".join(f"{t:g}" for t in sorted(reports)) + ")")
    print(report_table(reports).to_string())
    return reports


# ============================================================================
# SYNTH
# ============================================================================


def _jitter_box(box: BBox, rng: np.random.Generator, jitter: int, size: Tuple[int, int], keep_x: bool) -> BBox:
    """Alarga a caixa entre 0 e `jitter` píxeis por lado (x fixo quando keep_x)."""
    if jitter <= 0:
        return box
    left, top, right, bottom = (int(v) for v in rng.integers(0, jitter + 1, size=4))
    if keep_x:
        left = 0
    return BBox.from_corners(
        max(0, box.x - left),
        max(0, box.y - top),
        min(size[0], box.right + right),
        min(size[1], box.bottom + bottom),
    )


def cmd_synth(cfg: RunConfig) -> Dict[str, int]:
    """Fixtures: imagens, máscaras, deteções de primeira fase, caracteres e ground truth."""
    out = Path(cfg.out)
    classes = [PrototypeClass.from_label(c) for c in cfg.overlap_classes]
    if cfg.n_overlap > 0 and not classes:
        raise ConfigError("overlap_classes vazio com n_overlap > 0")

    seeds = _child_seeds(cfg.seed, cfg.n_swap + cfg.n_overlap + 1)
    rng = np.random.default_rng(seeds[-1])

    detections: Dict[str, List[Tuple[PrototypeClass, BBox, float, Optional[str]]]] = {}
    chars_out: List[Dict[str, Any]] = []
    truth_out: List[Dict[str, Any]] = []
    images: Dict[str, np.ndarray] = {}
    plain_rows: List[Tuple[str, Tuple[BBox, ...]]] = []

    for i in range(cfg.n_swap):
        scene = gen_swap_scene(seed=seeds[i])
        image_id = f"swap_{i:03d}"
        box = _jitter_box(scene.detection.box, rng, cfg.jitter, scene.image_size, keep_x=False)
        mask_name = f"masks/{image_id}_0.png"
        save_mask(out / mask_name, scene.marker_mask.crop(box))
        images[image_id] = np.array(scene.image, copy=True)
        detections[image_id] = [(PrototypeClass.TYPE_I, box, scene.detection.score, mask_name)]
        chars_out.append({"image": image_id, "chars": [c.to_list() for c in scene.chars]})
        truth_out.append({"image": image_id, "boxes": [scene.truth_box.to_list()], "classes": ["I"]})
        plain_rows.append((image_id, scene.chars))

    for i in range(cfg.n_overlap):
        cls = classes[i % len(classes)]
        n_main = int(rng.integers(3, cfg.max_main + 1)) if cfg.max_main >= 3 else 2
        n_ov = int(rng.integers(1, min(3, n_main - 1) + 1))
        scene = gen_overlap_scene(cls, n_main, n_ov, seed=seeds[cfg.n_swap + i])
        image_id = f"overlap_{i:03d}"
        proto = _jitter_box(scene.proto, rng, cfg.jitter, scene.image_size, keep_x=True)
        score = round(float(rng.uniform(0.6, 1.0)), 3)
        images[image_id] = render_overlap_scene(scene)
        detections[image_id] = [(cls, proto, score, None)]
        chars_out.append({"image": image_id, "chars": [c.to_list() for c in scene.chars]})
        truth_out.append({"image": image_id, "boxes": [scene.truth.to_list()], "classes": [cls.value]})

    ids = list(detections)
    for j in range(cfg.false_positives if ids else 0):
        score = round(float(rng.uniform(0.3, 0.9)), 3)
        if j % 2 == 1 and plain_rows:
            # protótipo II sobre texto sem sobreposição
            image_id, row = plain_rows[(j // 2) % len(plain_rows)]
            char = row[0]
            proto = BBox(char.x + char.w // 2, char.y, char.w, char.h)
            detections[image_id].append((PrototypeClass.TYPE_II, proto, score, None))
            continue
        # mancha sólida com classe I: projeções com um só pico
        image_id = ids[j % len(ids)]
        height, width = images[image_id].shape
        blob = BBox(2, 2, min(24, width - 4), min(16, height - 4))
        k = len(detections[image_id])
        mask_name = f"masks/{image_id}_{k}.png"
        save_mask(out / mask_name, BinaryMask(np.ones((blob.h, blob.w), dtype=bool)))
        images[image_id][blob.y : blob.bottom, blob.x : blob.right] = 0
        detections[image_id].append((PrototypeClass.TYPE_I, blob, score, mask_name))

    for image_id, image in images.items():
        write_image(out / "images" / f"{image_id}.png", image)
    write_json(out / "detections.json", detections_to_json(detections.items()))
    write_json(out / "chars.json", chars_out)
    write_json(out / "ground_truth.json", truth_out)

    marker_seeds = _child_seeds(cfg.seed + 1, 2 * cfg.n_markers)
    for m in range(cfg.n_markers):
        write_sample(out / "samples", f"pos_{m:03d}", gen_marker_sample(marker_seeds[m]))
        write_sample(out / "samples", f"neg_{m:03d}", gen_negative_sample(marker_seeds[cfg.n_markers + m]))

    counts = {
        "swap": cfg.n_swap,
        "overlap": cfg.n_overlap,
        "false_positives": cfg.false_positives if ids else 0,
        "markers": cfg.n_markers,
    }
    _banner("FIXTURES SINTÉTICAS")
    print(f"✓ Cenas de troca: {counts['swap']} | de sobreposição: {counts['overlap']}")
    print(f"✓ Falsos positivos injetados: {counts['false_positives']}")
    print(f"✓ Amostras semente: {counts['markers']} positivas + {counts['markers']} negativas")
    return counts


# ============================================================================
# MAIN
# ============================================================================

COMMANDS = {
    "refine": cmd_refine,
    "augment": cmd_augment,
    "eval": cmd_eval,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Segunda fase de deteção de texto anómalo (troca e sobreposição)",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("EXEMPLOS:", 1)[1],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Ficheiro chave = valor")
    common.add_argument("--out", type=Path, help="Pasta de saída")
    common.add_argument("--seed", type=int, help="Seed do run")
    common.add_argument("--workers", type=int, help="Processos em paralelo (1 = em série)")
    common.add_argument("--log-level", dest="log_level", help="DEBUG | INFO | WARNING | ERROR")

    refine = sub.add_parser("refine", parents=[common], help="Refinar deteções da primeira fase")
    refine.add_argument("--detections", type=Path, help="JSON de deteções da primeira fase")
    refine.add_argument("--chars", type=Path, help="JSON de caixas de caracteres")
    refine.add_argument("--images", type=Path, help="Pasta com <id>.png")
    refine.add_argument("--min-score", dest="min_score", type=float, help="Score mínimo (0 = sem filtro)")
    refine.add_argument("--no-overlays", dest="overlays", action="store_const", const=False)

    augment = sub.add_parser("augment", parents=[common], help="Aumento de dados")
    augment.add_argument("--seed-markers", dest="seed_markers", type=Path, help="Pasta de amostras semente")

    evaluate = sub.add_parser("eval", parents=[common], help="Precisão / recall / F1")
    evaluate.add_argument("--predictions", type=Path, help="Predições (esquema eval ou deteções)")
    evaluate.add_argument("--gt", dest="ground_truth", type=Path, help="Ground truth")
    evaluate.add_argument("--iou", dest="iou_thresholds", type=parse_float_list, help="ex: 0.5,0.75")
    evaluate.add_argument("--exclude-list", dest="exclude_list", type=Path, help="Ids a excluir")

    synth = sub.add_parser("synth", parents=[common], help="Gerar fixtures sintéticas")
    synth.add_argument("--n-swap", dest="n_swap", type=int)
    synth.add_argument("--n-overlap", dest="n_overlap", type=int)
    synth.add_argument("--jitter", type=int, help="Jitter máximo das caixas (px)")
    synth.add_argument("--false-positives", dest="false_positives", type=int)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = build_config(args.config, overrides)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"❌ Configuração inválida: {exc}", file=sys.stderr)
        return 1
    configure_logging(cfg)

    try:
        COMMANDS[args.command](cfg)
    except InvariantViolation as exc:
        logger.error(f"Invariante violada: {exc}", exc_info=True)
        print(f"❌ Invariante violada: {exc}", file=sys.stderr)
        return 2
    except (StageTwoError, OSError) as exc:
        logger.error(f"Erro nos dados de entrada: {exc}")
        print(f"❌ {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
