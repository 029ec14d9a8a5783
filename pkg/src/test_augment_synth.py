# -*- coding: utf-8 -*-
"""Aumento de dados (expansão, mudança de localização, contraste) e geradores."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage

from augment_synth import (
    CE_EPSILON,
    Direction,
    EmptyPool,
    ExpansionConfig,
    ExtensionOutOfBounds,
    LabeledSample,
    Polarity,
    ShiftOutOfBounds,
    dynamic_location_shift,
    expansion_sweep,
    find_curve_edges,
    gen_ideal_marker,
    gen_marker_sample,
    gen_negative_sample,
    gen_overlap_scene,
    gen_swap_scene,
    mask_cross_entropy,
    pad_sample,
    scale_expand,
    synth_contrast_set,
)
from core_geometry import (
    BBox,
    BinaryMask,
    DimensionMismatch,
    EmptyMask,
    InvalidGeometry,
    Point,
    PrototypeClass,
    mask_tight_bbox,
)
from overlap_refine import Verdict, default_params, refine_overlap
from swap_refine import find_swap_point, validate_marker


def _components(mask: BinaryMask) -> int:
    _, count = ndimage.label(mask.bits)
    return count


# ============================================================================
# EXPANSÃO DE ESCALA
# ============================================================================


def test_curve_edges_sit_on_pixel_boundaries(marker_rows):
    edges = find_curve_edges(marker_rows)
    assert edges.left_top == Point(0, 0)
    assert edges.left_bottom == Point(0, 2)
    assert edges.right_top == Point(12, 6)
    assert edges.right_bottom == Point(12, 8)


def test_curve_edges_of_empty_mask():
    with pytest.raises(EmptyMask):
        find_curve_edges(BinaryMask.zeros(5, 5))


@settings(max_examples=40)
@given(
    st.integers(0, 10_000),
    st.integers(1, 30),
    st.integers(1, 3),
    st.integers(0, 2),
)
def test_expansion_grows_width_by_two_tau_per_step(seed, tau, steps, d):
    sample = pad_sample(gen_marker_sample(seed), tau * steps + 1)
    before = mask_tight_bbox(sample.label_mask)
    edges = find_curve_edges(sample.label_mask)
    expanded = scale_expand(sample, edges, ExpansionConfig(tau=tau, d=d, steps=steps, seed=seed))

    assert len(expanded) == steps
    for k, child in enumerate(expanded, start=1):
        tight = mask_tight_bbox(child.label_mask)
        assert tight.w == before.w + 2 * k * tau
        assert tight.x == before.x - k * tau
        assert all(abs(j) <= d for j in child.ground_truth["jitter"])
        assert _components(child.label_mask) == 1
        assert child.target_box.contains(tight)
        assert child.ground_truth["tau"] == tau and child.ground_truth["step"] == k


def test_expansion_without_jitter_keeps_edge_rows(marker_rows):
    image = np.where(marker_rows.bits, 0, 255).astype(np.uint8)
    sample = pad_sample(
        LabeledSample(image, BBox(0, 0, 12, 8), marker_rows, Polarity.POSITIVE), 6
    )
    [child] = scale_expand(sample, find_curve_edges(sample.label_mask), ExpansionConfig(tau=5, d=0))
    bits = child.label_mask.bits
    assert bits[0:2, 1:6].all() and not bits[2:, 1:6].any()
    assert bits[6:8, 18:23].all() and not bits[:6, 18:23].any()
    assert (child.image[bits] == 0).all()


def test_expansion_out_of_canvas(marker_rows):
    image = np.where(marker_rows.bits, 0, 255).astype(np.uint8)
    sample = LabeledSample(image, BBox(0, 0, 12, 8), marker_rows, Polarity.POSITIVE)
    with pytest.raises(ExtensionOutOfBounds):
        scale_expand(sample, find_curve_edges(marker_rows), ExpansionConfig(tau=2))


def test_expansion_config_bounds():
    with pytest.raises(ValueError):
        ExpansionConfig(tau=0)
    with pytest.raises(ValueError):
        ExpansionConfig(tau=3, d=-1)


def test_default_sweep_has_thirty_steps():
    sample = pad_sample(gen_marker_sample(5), 150)
    sweep = expansion_sweep(sample, seed=11)
    taus = [s.ground_truth["tau"] for s in sweep]
    assert taus == list(range(2, 151, 5))
    assert len(sweep) == 30
    again = expansion_sweep(sample, seed=11)
    assert all(a.label_mask == b.label_mask for a, b in zip(sweep, again))


def test_pad_sample_moves_box_and_mask():
    sample = gen_marker_sample(2)
    padded = pad_sample(sample, 4, 3)
    assert (padded.width, padded.height) == (sample.width + 8, sample.height + 6)
    assert padded.target_box == sample.target_box.translate(4, 3)
    np.testing.assert_array_equal(padded.crop(), sample.crop())


# ============================================================================
# MUDANÇA DINÂMICA DE LOCALIZAÇÃO
# ============================================================================


@given(st.integers(0, 5_000), st.integers(1, 12), st.sampled_from(list(Direction)))
def test_shift_moves_target_content_unchanged(seed, l, direction):
    sample = pad_sample(gen_marker_sample(seed), 12)
    shifted = dynamic_location_shift(sample, l, direction)
    offset = -l if direction is Direction.LEFT else l
    assert shifted.target_box == sample.target_box.translate(offset, 0)
    np.testing.assert_array_equal(shifted.crop(), sample.crop())
    assert shifted.label_mask.crop(shifted.target_box) == sample.label_mask.crop(sample.target_box)
    assert sorted(shifted.image.ravel()) == sorted(sample.image.ravel())
    assert shifted.ground_truth["shift"] == {"l": l, "direction": direction.value}


def test_zero_shift_is_identity():
    sample = gen_marker_sample(1)
    assert dynamic_location_shift(sample, 0, Direction.RIGHT) is sample


@pytest.mark.parametrize("direction", list(Direction))
def test_shift_past_the_border(direction):
    sample = gen_marker_sample(1, pad=3)
    with pytest.raises(ShiftOutOfBounds):
        dynamic_location_shift(sample, 4, direction)


# ============================================================================
# CONJUNTO DE CONTRASTE
# ============================================================================


def test_contrast_composites_hold_one_positive():
    positives = [gen_marker_sample(s) for s in range(3)]
    negatives = [gen_negative_sample(s) for s in range(3)]
    composites = synth_contrast_set(positives, negatives, 12, seed=9)
    assert len(composites) == 12

    counts = {p.label_mask.foreground_count for p in positives}
    for composite in composites:
        assert composite.polarity is Polarity.POSITIVE
        assert composite.label_mask.foreground_count in counts
        assert composite.label_mask.crop(composite.target_box).foreground_count == (
            composite.label_mask.foreground_count
        )

    again = synth_contrast_set(positives, negatives, 12, seed=9)
    assert all(np.array_equal(a.image, b.image) for a, b in zip(composites, again))


def test_contrast_order_is_random():
    positives, negatives = [gen_marker_sample(0)], [gen_negative_sample(0)]
    firsts = {c.target_box.x == 0 for c in synth_contrast_set(positives, negatives, 20, seed=3)}
    assert firsts == {True, False}


@pytest.mark.parametrize("which", ["positives", "negatives"])
def test_contrast_needs_both_pools(which):
    pools = {"positives": [gen_marker_sample(0)], "negatives": [gen_negative_sample(0)]}
    pools[which] = []
    with pytest.raises(EmptyPool):
        synth_contrast_set(pools["positives"], pools["negatives"], 1, seed=0)


# ============================================================================
# ENTROPIA CRUZADA
# ============================================================================


def test_cross_entropy_at_one_half(marker_rows):
    pred = np.full((8, 12), 0.5)
    assert mask_cross_entropy(pred, marker_rows) == pytest.approx(96 * math.log(2))
    assert mask_cross_entropy(pred, marker_rows, "mean") == pytest.approx(math.log(2))


def test_cross_entropy_extremes(marker_rows):
    perfect = marker_rows.bits.astype(float)
    inverted = 1.0 - perfect
    assert mask_cross_entropy(perfect, marker_rows) == pytest.approx(
        -96 * math.log1p(-CE_EPSILON)
    )
    assert mask_cross_entropy(inverted, marker_rows) == pytest.approx(-96 * math.log(CE_EPSILON))


def test_cross_entropy_input_checks(marker_rows):
    with pytest.raises(DimensionMismatch):
        mask_cross_entropy(np.zeros((2, 2)), marker_rows)
    with pytest.raises(ValueError):
        mask_cross_entropy(np.full((8, 12), 1.5), marker_rows)
    with pytest.raises(ValueError):
        mask_cross_entropy(np.zeros((8, 12)), marker_rows, reduction="max")


# ============================================================================
# GERADORES
# ============================================================================


@pytest.mark.parametrize(
    "width, height, t, crossing",
    [(40, 20, 0, 20), (40, 4, 1, 20), (40, 20, 2, 2), (40, 20, 2, 38), (40, 20, 2, 1)],
)
def test_impossible_markers(width, height, t, crossing):
    with pytest.raises(InvalidGeometry):
        gen_ideal_marker(width, height, t, crossing)


@pytest.mark.parametrize(
    "width, height, t, crossing", [(100, 20, 2, 10), (100, 20, 2, 95), (40, 8, 3, 20), (12, 5, 4, 6)]
)
def test_markers_near_the_limits_still_validate(width, height, t, crossing):
    for mirrored in (False, True):
        mask, truth = gen_ideal_marker(width, height, t, crossing, mirrored=mirrored)
        assert validate_marker(mask).valid
        assert abs(find_swap_point(mask) - truth.crossing_x) <= 1
        assert _components(mask) == 1


@pytest.mark.parametrize("mirrored", [False, True])
def test_ideal_marker_is_connected(mirrored):
    mask, truth = gen_ideal_marker(48, 20, 3, 24, mirrored=mirrored)
    assert _components(mask) == 1
    assert truth.mirrored is mirrored
    assert mask_tight_bbox(mask) == BBox(0, 0, 48, 20)


def test_generators_are_deterministic():
    a, b = gen_swap_scene(seed=42), gen_swap_scene(seed=42)
    np.testing.assert_array_equal(a.image, b.image)
    assert a.truth_box == b.truth_box and a.chars == b.chars
    assert gen_overlap_scene(PrototypeClass.TYPE_IV, 6, 2, seed=5) == gen_overlap_scene(
        PrototypeClass.TYPE_IV, 6, 2, seed=5
    )


def test_swap_scene_marker_fits_detection():
    scene = gen_swap_scene(n_pairs=3, seed=8)
    assert scene.truth_box.contains(mask_tight_bbox(scene.marker_mask))
    assert scene.detection.box == scene.truth_box
    assert scene.truth_box.fits_within(*scene.image_size)


@pytest.mark.parametrize(
    "cls, n_main, n_ov",
    [(PrototypeClass.TYPE_I, 4, 1), (PrototypeClass.TYPE_II, 1, 1), (PrototypeClass.TYPE_III, 4, 0)],
)
def test_impossible_overlap_scenes(cls, n_main, n_ov):
    with pytest.raises(InvalidGeometry):
        gen_overlap_scene(cls, n_main, n_ov)


@pytest.mark.parametrize("cls", [PrototypeClass.TYPE_II, PrototypeClass.TYPE_III, PrototypeClass.TYPE_IV])
@pytest.mark.parametrize("n_main, n_ov", [(2, 2), (3, 3), (2, 4), (3, 6)])
def test_overlap_group_as_long_as_the_line(cls, n_main, n_ov):
    for seed in range(5):
        scene = gen_overlap_scene(cls, n_main, n_ov, seed=seed)
        result = refine_overlap(scene.proto, scene.chars, default_params(scene.chars))
        assert result.verdict is Verdict.REFINED
        assert result.final_box == scene.truth

        upper = min(scene.chars, key=lambda c: c.y).y
        if n_ov == n_main:
            # filas do mesmo tamanho: a principal é a de cima
            assert all(abs(c.y - upper) <= 2 for c in result.q_main)
        else:
            assert len(result.q_main) == n_ov
            assert len(result.q_ov) == n_main


def test_overlap_scene_truth_covers_both_rows():
    scene = gen_overlap_scene(PrototypeClass.TYPE_III, 6, 2, seed=4)
    assert scene.proto.fits_within(*scene.image_size)
    assert scene.truth.h > max(c.h for c in scene.chars)


def test_sample_polarity_rules():
    negative = gen_negative_sample(3)
    assert negative.polarity is Polarity.NEGATIVE and negative.label_mask.is_empty
    with pytest.raises(EmptyMask):
        LabeledSample(negative.image, negative.target_box, negative.label_mask, Polarity.POSITIVE)
    with pytest.raises(DimensionMismatch):
        LabeledSample(negative.image, negative.target_box, BinaryMask.zeros(2, 2), Polarity.NEGATIVE)
