# -*- coding: utf-8 -*-
"""
Configuração de um run da segunda fase

Ficheiro de texto plano `chave = valor` (comentários com #, linhas vazias
ignoradas). Chaves desconhecidas são erro. Precedência:

    valores por omissão < ficheiro de configuração < flags da CLI

Exemplo comentado em docs/config/stage_two.cfg.
"""

import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

from core_geometry import DEFAULT_SMOOTH_WINDOW, StageTwoError
from evaluation import DEFAULT_IOU_THRESHOLDS
from io_formats import DEFAULT_MASK_THRESHOLD
from swap_refine import DEFAULT_MARGIN, DEFAULT_MAX_GAP_FRAC
from augment_synth import SWEEP_D, SWEEP_START, SWEEP_STEP, SWEEP_STOP

logger = logging.getLogger(__name__)


class ConfigError(StageTwoError):
    """Chave desconhecida, valor mal formado ou fora do intervalo documentado."""


# ============================================================================
# CONVERSORES
# ============================================================================


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "sim", "on"):
        return True
    if value in ("0", "false", "no", "não", "nao", "off"):
        return False
    raise ValueError(f"booleano inválido: {text!r}")


def _optional(convert: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str) -> Any:
        if text.strip().lower() in ("", "none", "auto"):
            return None
        return convert(text)

    return parse


def _path(text: str) -> Path:
    return Path(text.strip())


def parse_float_list(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _size(text: str) -> Tuple[int, int]:
    """"1185x99" → (1185, 99)."""
    parts = text.lower().replace(" ", "").split("x")
    if len(parts) != 2:
        raise ValueError(f"tamanho tem de ser LARGURAxALTURA: {text!r}")
    width, height = int(parts[0]), int(parts[1])
    if width < 1 or height < 1:
        raise ValueError(f"tamanho tem de ser positivo: {text!r}")
    return width, height


def _classes(text: str) -> Tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


# ============================================================================
# RUN CONFIG
# ============================================================================


@dataclass(frozen=True)
class RunConfig:
    # Entradas / saídas
    detections: Optional[Path] = None
    chars: Optional[Path] = None
    images: Optional[Path] = None
    out: Path = Path("output")
    predictions: Optional[Path] = None
    ground_truth: Optional[Path] = None
    seed_markers: Optional[Path] = None
    exclude_list: Optional[Path] = None
    log_file: Optional[Path] = None
    log_level: str = "INFO"

    # Execução
    seed: int = 0
    workers: int = 1

    # Troca (tipo I)
    smooth_window: int = DEFAULT_SMOOTH_WINDOW
    min_height: Optional[float] = None
    max_gap_frac: float = DEFAULT_MAX_GAP_FRAC
    margin: int = DEFAULT_MARGIN
    mask_threshold: float = DEFAULT_MASK_THRESHOLD

    # Sobreposição (tipos II-IV)
    gamma: Optional[int] = None
    alpha: Optional[float] = None
    beta: Optional[int] = None
    anchor: str = "left"
    char_filter: str = "none"

    # Pipeline / avaliação
    min_score: float = 0.0
    iou_thresholds: Tuple[float, ...] = DEFAULT_IOU_THRESHOLDS
    normalize_size: Optional[Tuple[int, int]] = None
    overlays: bool = True
    corrected_crops: bool = True

    # Aumento de dados
    sweep_start: int = SWEEP_START
    sweep_stop: int = SWEEP_STOP
    sweep_step: int = SWEEP_STEP
    sweep_d: int = SWEEP_D
    dlc_shift: int = 10
    contrast_n: int = 10

    # Fixtures sintéticas
    n_swap: int = 10
    n_overlap: int = 10
    overlap_classes: Tuple[str, ...] = ("II", "III", "IV")
    max_main: int = 8
    jitter: int = 0
    false_positives: int = 0
    n_markers: int = 4

    def __post_init__(self):
        _check(self.smooth_window >= 1 and self.smooth_window % 2 == 1,
               f"smooth_window tem de ser ímpar >= 1: {self.smooth_window}")
        _check(self.min_height is None or self.min_height >= 0,
               f"min_height >= 0: {self.min_height}")
        _check(0.0 <= self.max_gap_frac <= 1.0, f"max_gap_frac em [0, 1]: {self.max_gap_frac}")
        _check(self.margin >= 0, f"margin >= 0: {self.margin}")
        _check(0.0 < self.mask_threshold <= 1.0, f"mask_threshold em (0, 1]: {self.mask_threshold}")
        for name in ("gamma", "alpha", "beta"):
            value = getattr(self, name)
            _check(value is None or value >= 0, f"{name} >= 0: {value}")
        _check(self.anchor in ("left", "center"), f"anchor = left | center: {self.anchor!r}")
        _check(self.char_filter in ("none", "center_in", "intersect"),
               f"char_filter = none | center_in | intersect: {self.char_filter!r}")
        _check(0.0 <= self.min_score <= 1.0, f"min_score em [0, 1]: {self.min_score}")
        _check(len(self.iou_thresholds) > 0 and all(0.0 < t <= 1.0 for t in self.iou_thresholds),
               f"iou_thresholds em (0, 1]: {self.iou_thresholds}")
        _check(self.workers >= 1, f"workers >= 1: {self.workers}")
        _check(self.sweep_start >= 1 and self.sweep_stop >= self.sweep_start and self.sweep_step >= 1,
               f"varrimento inválido: {self.sweep_start}..{self.sweep_stop}/{self.sweep_step}")
        _check(self.sweep_d >= 0, f"sweep_d >= 0: {self.sweep_d}")
        _check(self.dlc_shift >= 0, f"dlc_shift >= 0: {self.dlc_shift}")
        for name in ("contrast_n", "n_swap", "n_overlap", "jitter", "false_positives", "n_markers"):
            _check(getattr(self, name) >= 0, f"{name} >= 0: {getattr(self, name)}")
        _check(self.max_main >= 2, f"max_main >= 2: {self.max_main}")
        _check(all(c in ("II", "III", "IV") for c in self.overlap_classes),
               f"overlap_classes só aceita II, III, IV: {self.overlap_classes}")
        _check(self.log_level.upper() in ("DEBUG", "INFO", "WARNING", "ERROR"),
               f"log_level inválido: {self.log_level}")

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """Aplica valores já tipados (flags da CLI); None = não definido."""
        unknown = set(overrides) - _FIELD_NAMES
        if unknown:
            raise ConfigError(f"Chaves desconhecidas: {sorted(unknown)}")
        values = {k: v for k, v in overrides.items() if v is not None}
        try:
            return replace(self, **values)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


_FIELD_NAMES = {f.name for f in fields(RunConfig)}
_FLAGS = {"ground_truth": "gt"}  # chaves cuja flag da CLI tem outro nome

_PARSERS: Dict[str, Callable[[str], Any]] = {
    "detections": _path,
    "chars": _path,
    "images": _path,
    "out": _path,
    "predictions": _path,
    "ground_truth": _path,
    "seed_markers": _path,
    "exclude_list": _optional(_path),
    "log_file": _optional(_path),
    "log_level": str.strip,
    "seed": int,
    "workers": int,
    "smooth_window": int,
    "min_height": _optional(float),
    "max_gap_frac": float,
    "margin": int,
    "mask_threshold": float,
    "gamma": _optional(int),
    "alpha": _optional(float),
    "beta": _optional(int),
    "anchor": lambda s: s.strip().lower(),
    "char_filter": lambda s: s.strip().lower(),
    "min_score": float,
    "iou_thresholds": parse_float_list,
    "normalize_size": _optional(_size),
    "overlays": _bool,
    "corrected_crops": _bool,
    "sweep_start": int,
    "sweep_stop": int,
    "sweep_step": int,
    "sweep_d": int,
    "dlc_shift": int,
    "contrast_n": int,
    "n_swap": int,
    "n_overlap": int,
    "overlap_classes": _classes,
    "max_main": int,
    "jitter": int,
    "false_positives": int,
    "n_markers": int,
}
assert set(_PARSERS) == _FIELD_NAMES


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: esperado 'chave = valor': {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"{source}:{lineno}: chave desconhecida '{key}'")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: chave repetida '{key}'")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: valor inválido para '{key}': {exc}") from None
    return values


def load_config_file(path: Path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Ficheiro de configuração não encontrado: {path}")
    values = parse_config_text(path.read_text(encoding="utf-8-sig"), str(path))
    logger.info(f"Configuração carregada de {path} ({len(values)} chaves)")
    return values


def build_config(
    config_file: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """Omissões < ficheiro < overrides."""
    cfg = RunConfig()
    if config_file is not None:
        cfg = cfg.with_overrides(load_config_file(config_file))
    if overrides:
        cfg = cfg.with_overrides(overrides)
    return cfg


def require_paths(cfg: RunConfig, *names: str) -> None:
    """Todas as entradas pedidas têm de estar definidas e existir no início do run."""
    for name in names:
        value = getattr(cfg, name)
        if value is None:
            flag = _FLAGS.get(name, name.replace("_", "-"))
            raise ConfigError(f"Falta o caminho '{name}' (flag --{flag} ou config)")
        if not Path(value).exists():
            raise FileNotFoundError(f"'{name}' não existe: {value}")
