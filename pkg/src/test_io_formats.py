# -*- coding: utf-8 -*-
"""Leitura e escrita de máscaras, deteções, caracteres e amostras."""

import json

import numpy as np
import pytest
from PIL import Image

from augment_synth import Polarity, gen_marker_sample
from core_geometry import BBox, PrototypeClass
from io_formats import (
    ParseError,
    binarize,
    detections_to_json,
    eval_record_to_json,
    list_samples,
    load_mask,
    parse_char_file,
    parse_detection_file,
    parse_eval_file,
    read_id_list,
    read_image,
    read_pgm,
    read_records,
    read_sample,
    write_image,
    write_json,
    write_pgm,
    write_sample,
)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# ============================================================================
# RASTERS
# ============================================================================


def test_pgm_with_comments_and_small_maxval(tmp_path):
    path = _write(tmp_path / "m.pgm", "P2\n# marcador\n3 2\n15\n0 15 0\n15 # fim\n0 15\n")
    np.testing.assert_array_equal(read_pgm(path), [[0, 255, 0], [255, 0, 255]])


@pytest.mark.parametrize(
    "text",
    ["P5\n1 1\n255\n0\n", "P2\n2 2\n255\n0 0 0\n", "P2\nx 2\n255\n0 0\n", ""],
)
def test_malformed_pgm(tmp_path, text):
    with pytest.raises(ParseError):
        read_pgm(_write(tmp_path / "bad.pgm", text))


def test_pgm_written_then_read(tmp_path):
    raster = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
    write_pgm(tmp_path / "r.pgm", raster)
    np.testing.assert_array_equal(read_image(tmp_path / "r.pgm"), raster)


def test_probability_mask_is_binarized_at_one_half(tmp_path):
    raster = np.array([[0, 127, 128, 255]], dtype=np.uint8)
    assert binarize(raster).bits.tolist() == [[False, False, True, True]]
    assert binarize(raster, threshold=0.9).bits.tolist() == [[False, False, False, True]]
    Image.fromarray(raster).save(tmp_path / "p.png")
    assert load_mask(tmp_path / "p.png").foreground_count == 2


def test_color_png_is_read_as_grayscale(tmp_path):
    Image.new("RGB", (5, 3), (255, 255, 255)).save(tmp_path / "c.png")
    image = read_image(tmp_path / "c.png")
    assert image.shape == (3, 5) and image.dtype == np.uint8


def test_missing_and_unreadable_images(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_image(tmp_path / "none.png")
    with pytest.raises(ParseError):
        read_image(_write(tmp_path / "bad.png", "not a png"))


def test_write_image_creates_folders(tmp_path):
    write_image(tmp_path / "a" / "b" / "x.png", np.zeros((2, 2), dtype=np.uint8))
    assert (tmp_path / "a" / "b" / "x.png").exists()


# ============================================================================
# JSON
# ============================================================================


def test_records_from_list_object_and_lines(tmp_path):
    assert read_records(_write(tmp_path / "a.json", '[{"image": "a"}]')) == [{"image": "a"}]
    assert read_records(_write(tmp_path / "b.json", '{"image": "b"}')) == [{"image": "b"}]
    lines = _write(tmp_path / "c.jsonl", '{"image": "c"}\n\n{"image": "d"}\n')
    assert [r["image"] for r in read_records(lines)] == ["c", "d"]
    assert read_records(_write(tmp_path / "e.json", "  \n")) == []


def test_bad_json_line_reports_line_number(tmp_path):
    with pytest.raises(ParseError, match=":2:"):
        read_records(_write(tmp_path / "x.jsonl", '{"image": "a"}\n{oops\n'))


def test_json_must_hold_objects(tmp_path):
    with pytest.raises(ParseError):
        read_records(_write(tmp_path / "x.json", "[1, 2]"))


def test_write_json_keeps_unicode(tmp_path):
    write_json(tmp_path / "u.json", {"nota": "sobreposição"})
    text = (tmp_path / "u.json").read_text(encoding="utf-8")
    assert "sobreposição" in text and text.endswith("\n")


def test_detection_file_resolves_mask_paths(tmp_path):
    path = tmp_path / "run" / "detections.json"
    path.parent.mkdir()
    _write(
        path,
        json.dumps(
            [
                {
                    "image": "p1",
                    "detections": [
                        {"class": "I", "box": [1, 2, 30, 20], "score": 0.8, "mask": "masks/p1_0.png"},
                        {"class": "TypeIV", "box": [5, 5, 10, 10]},
                    ],
                },
                {"image": "p2", "detections": []},
            ]
        ),
    )
    images = parse_detection_file(path)
    assert [i.image for i in images] == ["p1", "p2"]
    first, second = images[0].detections
    assert first.mask_path == tmp_path / "run" / "masks" / "p1_0.png"
    assert (first.index, first.cls, first.box) == (0, PrototypeClass.TYPE_I, BBox(1, 2, 30, 20))
    assert (second.index, second.cls, second.score, second.mask_path) == (
        1,
        PrototypeClass.TYPE_IV,
        1.0,
        None,
    )


@pytest.mark.parametrize(
    "record",
    [
        {"image": "a", "detections": [{"class": "V", "box": [0, 0, 2, 2]}]},
        {"image": "a", "detections": [{"class": "I", "box": [0, 0, 2]}]},
        {"image": "a", "detections": [{"class": "I", "box": [0, 0, 2.5, 2]}]},
        {"image": "a", "detections": [{"class": "I", "box": [0, 0, 0, 2]}]},
        {"image": "a", "detections": [{"class": "I", "box": [0, 0, 2, 2], "score": 1.5}]},
        {"image": "a", "detections": [{"class": "I", "box": [0, 0, 2, 2], "mask": 3}]},
        {"image": "a", "detections": {"class": "I"}},
        {"detections": []},
    ],
)
def test_malformed_detections(tmp_path, record):
    with pytest.raises(ParseError):
        parse_detection_file(_write(tmp_path / "d.json", json.dumps([record])))


def test_repeated_image_in_detections(tmp_path):
    text = json.dumps([{"image": "a", "detections": []}, {"image": "a", "detections": []}])
    with pytest.raises(ParseError, match="repetida"):
        parse_detection_file(_write(tmp_path / "d.json", text))


def test_detections_written_for_fixtures_parse_back(tmp_path):
    payload = detections_to_json(
        [("a", [(PrototypeClass.TYPE_II, BBox(3, 4, 5, 6), 0.5, None)])]
    )
    write_json(tmp_path / "d.json", payload)
    [image] = parse_detection_file(tmp_path / "d.json")
    assert image.detections[0].box == BBox(3, 4, 5, 6)
    assert "mask" not in payload[0]["detections"][0]


def test_char_file(tmp_path):
    path = _write(tmp_path / "c.json", '[{"image": "a", "chars": [[0, 0, 4, 4], [5, 0, 4, 4]]}]')
    assert parse_char_file(path) == {"a": (BBox(0, 0, 4, 4), BBox(5, 0, 4, 4))}


def test_eval_file_checks_lengths(tmp_path):
    bad = _write(tmp_path / "e.json", '[{"image": "a", "boxes": [[0, 0, 1, 1]], "classes": []}]')
    with pytest.raises(ParseError):
        parse_eval_file(bad)
    missing = _write(tmp_path / "m.json", '[{"image": "a", "boxes": []}]')
    with pytest.raises(ParseError, match="classes"):
        parse_eval_file(missing)


def test_eval_record_serialization(tmp_path):
    path = _write(
        tmp_path / "e.json",
        '{"image": "a", "boxes": [[0, 0, 1, 1]], "classes": ["II"], "scores": [0.25]}',
    )
    record = parse_eval_file(path)["a"]
    assert eval_record_to_json(record) == {
        "image": "a",
        "boxes": [[0, 0, 1, 1]],
        "classes": ["II"],
        "scores": [0.25],
    }


def test_id_list_skips_comments(tmp_path):
    path = _write(tmp_path / "ids.txt", "# excluir\nimg_01\n\n img_02  # duplicada\n")
    assert read_id_list(path) == ["img_01", "img_02"]


# ============================================================================
# AMOSTRAS
# ============================================================================


def test_sample_sidecars(tmp_path):
    sample = gen_marker_sample(4)
    write_sample(tmp_path, "pos_000", sample)
    assert list_samples(tmp_path) == ["pos_000"]
    loaded = read_sample(tmp_path, "pos_000")
    assert loaded.polarity is Polarity.POSITIVE
    assert loaded.target_box == sample.target_box
    assert loaded.label_mask == sample.label_mask
    np.testing.assert_array_equal(loaded.image, sample.image)
    assert loaded.ground_truth == sample.ground_truth


def test_sample_with_bad_sidecar(tmp_path):
    _write(tmp_path / "x.json", '{"box": [0, 0, 1, 1], "polarity": "Maybe"}')
    with pytest.raises(ParseError):
        read_sample(tmp_path, "x")
    with pytest.raises(FileNotFoundError):
        read_sample(tmp_path, "missing")
