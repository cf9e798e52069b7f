import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blindspot.geometry import BoundingBox
from blindspot.voc import (
    ImageAnnotation,
    ParseError,
    load_voc_dir,
    parse_voc,
    serialize_voc,
    split_dataset,
    summarize,
    write_summary,
)
from oracles import brute_heatmap


def voc(objects, width=640, height=480, filename="frame.jpg"):
    objs = "".join(
        f"<object><name>{name}</name><bndbox><xmin>{b[0]}</xmin><ymin>{b[1]}</ymin>"
        f"<xmax>{b[2]}</xmax><ymax>{b[3]}</ymax></bndbox></object>"
        for name, b in objects
    )
    return (
        f"<annotation><filename>{filename}</filename><size><width>{width}</width>"
        f"<height>{height}</height><depth>3</depth></size>{objs}</annotation>"
    ).encode()


def test_parse_single_box():
    a = parse_voc(voc([("cyclist", (100, 120, 200, 300))]))
    assert (a.width, a.height) == (640, 480)
    assert [b.as_tuple() for b in a.boxes] == [(100, 120, 200, 300)]
    assert a.image_id == "frame"


def test_parse_clips_to_image():
    a = parse_voc(voc([("cyclist", (100, 120, 700, 300))]))
    assert a.boxes[0].x_max == 640


def test_parse_skips_other_classes():
    a = parse_voc(voc([("person", (1, 1, 5, 5))]))
    assert a.boxes == () and a.skipped_count == 1


def test_parse_errors():
    with pytest.raises(ParseError, match="line"):
        parse_voc(b"<annotation>\n<size>\n</annotation>")
    with pytest.raises(ParseError, match="size"):
        parse_voc(b"<annotation><object/></annotation>")
    with pytest.raises(ParseError):
        parse_voc(voc([], width=0))
    with pytest.raises(ParseError):
        parse_voc(voc([], height=-5))
    with pytest.raises(ParseError):
        parse_voc(voc([("cyclist", ("a", 1, 2, 3))]))


coord = st.integers(0, 200)


@given(st.lists(st.tuples(coord, coord, coord, coord), max_size=5), st.integers(1, 300), st.integers(1, 300))
def test_roundtrip_fixed_point(raw, w, h):
    boxes = tuple(
        BoundingBox(min(a, c), min(b, d), max(a, c), max(b, d)).clipped(0, 0, w, h) for a, b, c, d in raw
    )
    ann = ImageAnnotation("x", w, h, boxes)
    once = parse_voc(serialize_voc(ann))
    assert once == ann
    assert parse_voc(serialize_voc(once)) == once


def test_roundtrip_fractional_coordinates():
    ann = ImageAnnotation("f", 64, 48, (BoundingBox(0.1, 2.25, 10.000000001, 47.5),))
    assert parse_voc(serialize_voc(ann)) == ann


def test_split_examples():
    items = list(range(10))
    train, val = split_dataset(items, 0.8, seed=3)
    assert (len(train), len(val)) == (8, 2)
    assert split_dataset([1], 0.8, 0) == ([1], [])
    assert split_dataset(items, 0.8, 42) == split_dataset(items, 0.8, 42)
    assert split_dataset([], 0.8, 1) == ([], [])
    with pytest.raises(ValueError):
        split_dataset(items, 1.0, 0)


@given(st.integers(0, 60), st.floats(0.01, 0.99), st.integers(0, 2**32))
def test_split_is_partition(n, frac, seed):
    items = list(range(n))
    train, val = split_dataset(items, frac, seed)
    assert sorted(train + val) == items
    assert len(train) == int(frac * n + 0.5)


def test_summarize_examples():
    one = ImageAnnotation("a", 100, 100, (BoundingBox(40, 40, 60, 60),))
    s = summarize([one], grid=2)
    assert s.heatmap.tolist() == [[0, 0], [0, 1]]
    assert s.histogram == {1: 1}

    b = (BoundingBox(0, 0, 1, 1), BoundingBox(2, 2, 3, 3))
    items = [ImageAnnotation("z", 10, 10), ImageAnnotation("p", 10, 10, b), ImageAnnotation("q", 10, 10, b)]
    s = summarize(items, grid=4)
    assert s.histogram == {0: 1, 2: 2}
    assert s.instance_count == 4 and s.image_count == 3


def test_summarize_matches_binning_oracle():
    rng = random.Random(50)
    items, centers = [], []
    for i in range(50):
        w, h = rng.randint(50, 800), rng.randint(50, 600)
        boxes = []
        for _ in range(rng.randint(0, 4)):
            x0, y0 = rng.uniform(0, w), rng.uniform(0, h)
            x1, y1 = rng.uniform(x0, w), rng.uniform(y0, h)
            if rng.random() < 0.1:
                x0, x1 = w * 0.5, w * 0.5  # center exactly on a cell edge
            boxes.append(BoundingBox(x0, y0, x1, y1))
            centers.append((((x0 + x1) / 2) / w, ((y0 + y1) / 2) / h))
        items.append(ImageAnnotation(f"s{i}", w, h, tuple(boxes)))
    for grid in (1, 2, 7, 10):
        assert summarize(items, grid).heatmap.tolist() == brute_heatmap(centers, grid)


@given(st.lists(st.integers(0, 6), max_size=30), st.integers(1, 8))
def test_summary_conservation(counts, grid):
    items = [ImageAnnotation(f"i{k}", 10, 10, (BoundingBox(1, 1, 2, 2),) * n) for k, n in enumerate(counts)]
    s = summarize(items, grid)
    assert sum(k * v for k, v in s.histogram.items()) == s.instance_count == int(s.heatmap.sum())
    assert sum(s.histogram.values()) == s.image_count == len(counts)


def test_load_fixture_and_reports(voc20_dir, tmp_path):
    items = load_voc_dir(voc20_dir)
    assert len(items) == 20
    assert sum(a.skipped_count for a in items) == 1
    s = summarize(items, 4)
    write_summary(s, tmp_path)
    hist = (tmp_path / "histogram.csv").read_text().splitlines()
    assert hist[0] == "instances_per_image,image_count"
    heat = np.loadtxt(tmp_path / "heatmap.csv", delimiter=",", ndmin=2)
    assert heat.shape == (4, 4) and heat.sum() == s.instance_count
    assert "image_count=20" in (tmp_path / "summary.txt").read_text()


def test_load_missing_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_voc_dir(tmp_path / "nope")
