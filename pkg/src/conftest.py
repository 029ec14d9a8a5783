# -*- coding: utf-8 -*-
"""Configuração partilhada dos testes (pytest + hypothesis)."""

import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from core_geometry import BBox, BinaryMask  # noqa: E402

settings.register_profile(
    "stage_two",
    max_examples=100,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("stage_two")


def boxes_to_lists(boxes):
    return [b.to_list() for b in boxes]


@pytest.fixture
def marker_rows():
    """Marcador de troca mínimo: banda em cima à esquerda, em baixo à direita."""
    return BinaryMask.from_rows(
        [
            "#######.....",
            "#######.....",
            "......#.....",
            "......#.....",
            "......#.....",
            "......#.....",
            "......######",
            "......######",
        ]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def row_of_chars():
    return [BBox(10 + 30 * i, 40, 24, 36) for i in range(6)]
