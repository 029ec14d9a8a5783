# -*- coding: utf-8 -*-
"""Refinamento dos protótipos de sobreposição (II-IV)."""

import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from augment_synth import gen_overlap_scene
from core_geometry import BBox, InvariantViolation, PrototypeClass
from overlap_refine import (
    AnchorMode,
    CharFilter,
    NoCenterInWindow,
    NoHorizontalOverlap,
    OverlapParams,
    OverlapRefinement,
    Verdict,
    default_params,
    filter_chars,
    final_box,
    partition_queues,
    prune_discontinuous,
    refine_overlap,
    window_anchor,
)

OVERLAP_CLASSES = [PrototypeClass.TYPE_II, PrototypeClass.TYPE_III, PrototypeClass.TYPE_IV]


def reference_refinement(proto, chars, params):
    """Versão direta, caractere a caractere, do procedimento de refinamento."""
    centers = [(c.x + c.w / 2.0, c.y + c.h / 2.0) for c in chars]
    in_window = [cy for cx, cy in centers if proto.x - params.gamma <= cx <= proto.x + params.gamma]
    if not in_window:
        return "error", None
    y_max, y_min = max(in_window), min(in_window)
    if y_max - y_min <= params.alpha:
        return Verdict.FALSE_POSITIVE, None

    q1, q2 = [], []
    for char, (_, cy) in zip(chars, centers):
        (q1 if abs(y_max - cy) <= abs(cy - y_min) else q2).append(char)

    def overlaps(a, b):
        return min(a.x + a.w, b.x + b.w) > max(a.x, b.x)

    if not any(overlaps(a, b) for a in q1 for b in q2):
        return Verdict.FALSE_POSITIVE, None
    main, other = (q1, q2) if len(q1) > len(q2) else (q2, q1)

    runs = []
    for box in sorted(other, key=lambda b: b.x):
        if runs and box.x - (runs[-1][-1].x + runs[-1][-1].w) <= params.beta:
            runs[-1].append(box)
        else:
            runs.append([box])
    longest = max(len(r) for r in runs)
    anchor = proto.x + proto.w / 2.0
    best = None
    for run in runs:
        if len(run) != longest:
            continue
        left = min(b.x for b in run)
        right = max(b.x + b.w for b in run)
        distance = abs((left + right) / 2.0 - anchor)
        if best is None or distance < best[0]:
            best = (distance, run)
    ov = best[1]

    left = min(b.x for b in ov)
    right = max(b.x + b.w for b in ov)
    picked = ov + [b for b in main if min(b.x + b.w, right) > max(b.x, left)]
    if len(picked) == len(ov):
        return Verdict.FALSE_POSITIVE, None
    x0 = min(b.x for b in picked)
    y0 = min(b.y for b in picked)
    x1 = max(b.x + b.w for b in picked)
    y1 = max(b.y + b.h for b in picked)
    return Verdict.REFINED, BBox(x0, y0, x1 - x0, y1 - y0)


def _random_case(rng):
    n = int(rng.integers(1, 13))
    chars = [
        BBox(
            int(rng.integers(0, 100)),
            int(rng.integers(0, 60)),
            int(rng.integers(4, 21)),
            int(rng.integers(4, 21)),
        )
        for _ in range(n)
    ]
    proto = BBox(int(rng.integers(0, 100)), int(rng.integers(0, 60)), int(rng.integers(1, 40)), 20)
    params = OverlapParams(
        gamma=int(rng.integers(0, 30)),
        alpha=float(rng.integers(0, 15)),
        beta=int(rng.integers(0, 20)),
    )
    return proto, chars, params


def test_matches_reference_on_random_layouts():
    rng = np.random.default_rng(2024)
    refined = 0
    elapsed = 0.0
    for _ in range(1000):
        proto, chars, params = _random_case(rng)
        verdict, box = reference_refinement(proto, chars, params)
        if verdict == "error":
            with pytest.raises(NoCenterInWindow):
                refine_overlap(proto, chars, params)
            continue
        start = time.perf_counter()
        result = refine_overlap(proto, chars, params)
        elapsed += time.perf_counter() - start
        assert result.verdict is verdict
        assert result.final_box == box
        refined += verdict is Verdict.REFINED
    assert refined > 0
    assert elapsed < 5.0


# ============================================================================
# CENAS SINTÉTICAS
# ============================================================================


def _scene_cases():
    rng = np.random.default_rng(7)
    cases = []
    for seed in range(30):
        cls = OVERLAP_CLASSES[seed % 3]
        n_main = int(rng.integers(3, 9))
        n_ov = int(rng.integers(1, min(3, n_main - 1) + 1))
        cases.append((cls, n_main, n_ov, seed))
    return cases


@pytest.mark.parametrize("cls, n_main, n_ov, seed", _scene_cases())
def test_generated_scene_is_refined_to_truth(cls, n_main, n_ov, seed):
    scene = gen_overlap_scene(cls, n_main, n_ov, seed=seed)
    result = refine_overlap(scene.proto, scene.chars, default_params(scene.chars))
    assert result.verdict is Verdict.REFINED
    assert result.final_box == scene.truth
    assert len(result.q_ov) == n_ov


@pytest.mark.parametrize("cls, n_main, n_ov, seed", _scene_cases())
def test_mirrored_scene_is_refined_to_mirrored_truth(cls, n_main, n_ov, seed):
    scene = gen_overlap_scene(cls, n_main, n_ov, seed=seed).mirrored()
    result = refine_overlap(scene.proto, scene.chars, default_params(scene.chars))
    assert result.verdict is Verdict.REFINED
    assert result.final_box == scene.truth


@given(
    st.sampled_from(OVERLAP_CLASSES),
    st.integers(0, 10_000),
    st.integers(0, 300),
    st.integers(0, 300),
)
def test_translation_moves_the_result(cls, seed, dx, dy):
    scene = gen_overlap_scene(cls, 5, 2, seed=seed)
    params = default_params(scene.chars)
    moved = refine_overlap(
        scene.proto.translate(dx, dy), [c.translate(dx, dy) for c in scene.chars], params
    )
    original = refine_overlap(scene.proto, scene.chars, params)
    assert moved.verdict is original.verdict
    assert moved.final_box == original.final_box.translate(dx, dy)


# ============================================================================
# FALSOS POSITIVOS E CASOS LIMITE
# ============================================================================

PARAMS = OverlapParams(gamma=15, alpha=10, beta=20)


def test_single_line_is_false_positive(row_of_chars):
    proto = BBox(row_of_chars[2].x + 12, 30, 40, 50)
    result = refine_overlap(proto, row_of_chars, PARAMS)
    assert result.verdict is Verdict.FALSE_POSITIVE
    assert result.reason == "narrow_vertical_spread"
    assert result.final_box is None


def test_rows_without_horizontal_overlap():
    main = [BBox(0, 100, 20, 20), BBox(30, 100, 20, 20), BBox(60, 100, 20, 20)]
    raised = [BBox(85, 60, 20, 20)]
    result = refine_overlap(BBox(82, 60, 30, 60), main + raised, PARAMS)
    assert result.verdict is Verdict.FALSE_POSITIVE
    assert result.reason == "no_horizontal_overlap"


def test_pruned_queue_without_overlap():
    main = [BBox(x, 100, 20, 20) for x in (0, 30, 60, 175)]
    raised = [BBox(0, 60, 20, 20), BBox(200, 60, 20, 20)]
    result = refine_overlap(BBox(195, 60, 10, 60), main + raised, PARAMS)
    assert result.verdict is Verdict.FALSE_POSITIVE
    assert result.reason == "pruned_no_overlap"


def test_no_center_in_window_is_an_error(row_of_chars):
    with pytest.raises(NoCenterInWindow):
        refine_overlap(BBox(400, 0, 10, 10), row_of_chars, PARAMS)


def test_partition_tie_goes_to_first_queue():
    q1, q2 = partition_queues([BBox(0, 10, 10, 10)], y_max=25, y_min=5)
    assert (len(q1), len(q2)) == (1, 0)


def test_equal_queues_make_second_queue_main():
    lower = [BBox(0, 100, 20, 20), BBox(22, 100, 20, 20)]
    upper = [BBox(5, 60, 20, 20), BBox(27, 60, 20, 20)]
    result = refine_overlap(BBox(10, 60, 20, 60), lower + upper, PARAMS)
    assert result.verdict is Verdict.REFINED
    assert set(result.q_main) == set(upper)
    assert set(result.q_ov) == set(lower)


def test_prune_keeps_longest_run():
    queue = [BBox(0, 0, 10, 10), BBox(50, 0, 10, 10), BBox(65, 0, 10, 10), BBox(80, 0, 10, 10)]
    assert prune_discontinuous(queue, beta=5) == queue[1:]


def test_prune_tie_prefers_run_near_anchor():
    queue = [BBox(0, 0, 10, 10), BBox(100, 0, 10, 10)]
    assert prune_discontinuous(queue, beta=5) == [queue[0]]
    assert prune_discontinuous(queue, beta=5, anchor_x=90) == [queue[1]]
    assert prune_discontinuous([], beta=5) == []


def test_default_params_follow_character_scale(row_of_chars):
    params = default_params(row_of_chars)
    assert (params.gamma, params.alpha, params.beta) == (12, 18.0, 24)
    assert isinstance(params.gamma, int) and isinstance(params.beta, int)
    assert default_params(row_of_chars, gamma=3).gamma == 3
    assert default_params([]) == OverlapParams(0, 0.0, 0)


def test_pixel_parameters_round_up():
    chars = [BBox(0, 0, 15, 30), BBox(20, 0, 16, 30)]
    params = default_params(chars)
    assert (params.gamma, params.beta) == (8, 16)


def test_negative_parameters_are_refused():
    with pytest.raises(ValueError):
        OverlapParams(gamma=-1, alpha=0, beta=0)
    with pytest.raises(TypeError):
        OverlapParams(gamma=7.5, alpha=0, beta=0)


def test_window_anchor_modes():
    proto = BBox(10, 0, 30, 5)
    assert window_anchor(proto) == 10.0
    assert window_anchor(proto, AnchorMode.CENTER) == 25.0


def test_char_filters():
    proto = BBox(10, 10, 20, 20)
    inside, touching, outside = BBox(12, 12, 4, 4), BBox(25, 25, 20, 20), BBox(100, 0, 5, 5)
    chars = [inside, touching, outside]
    assert filter_chars(proto, chars) == chars
    assert filter_chars(proto, chars, CharFilter.INTERSECT) == [inside, touching]
    assert filter_chars(proto, chars, CharFilter.CENTER_IN) == [inside]


def test_refined_result_needs_overlapping_queues():
    with pytest.raises(InvariantViolation):
        OverlapRefinement(Verdict.REFINED, BBox(0, 0, 5, 5), (BBox(0, 0, 5, 5),), ())
    with pytest.raises(InvariantViolation):
        OverlapRefinement(
            Verdict.REFINED, BBox(0, 0, 50, 5), (BBox(0, 0, 5, 5),), (BBox(40, 0, 5, 5),)
        )


# ============================================================================
# CAIXA FINAL
# ============================================================================


def test_final_box_of_identical_queues():
    box = BBox(10, 10, 20, 30)
    assert final_box([box], [box]) == box


def test_final_box_keeps_only_overlapped_main_chars():
    main = [BBox(x, 100, 20, 30) for x in (0, 25, 50, 75, 100)]
    raised = [BBox(27, 60, 20, 30), BBox(52, 60, 18, 30)]
    assert final_box(main, raised) == BBox(25, 60, 45, 70)


def test_final_box_with_overlap_wider_than_main():
    main = [BBox(10 + 25 * i, 100, 20, 30) for i in range(5)]
    wide = [BBox(0, 60, 150, 30)]
    assert final_box(main, wide) == BBox(0, 60, 150, 70)


def test_final_box_without_overlap_is_an_error():
    main = [BBox(x, 100, 20, 30) for x in (0, 25, 50)]
    with pytest.raises(NoHorizontalOverlap):
        final_box(main, [])
    with pytest.raises(NoHorizontalOverlap):
        final_box(main, [BBox(300, 60, 20, 30)])
    with pytest.raises(NoHorizontalOverlap):
        final_box([], [BBox(0, 60, 20, 30)])


boxes = st.builds(BBox, st.integers(0, 60), st.integers(0, 60), st.integers(1, 20), st.integers(1, 20))


@given(st.lists(boxes, max_size=6), st.lists(boxes, min_size=1, max_size=4))
def test_final_box_contains_the_overlap_queue(q_main, q_ov):
    try:
        box = final_box(q_main, q_ov)
    except NoHorizontalOverlap:
        return
    assert all(box.contains(b) for b in q_ov)
