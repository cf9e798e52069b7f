import numpy as np

from blindspot.alert import Zone
from blindspot.geometry import BoundingBox, Detection
from blindspot.overlay import ALERT_COLOR, BOX_COLOR, CANVAS_GREY, ZONE_COLOR, render_overlay

ZONE = Zone(((0, 0.5), (1, 0.5), (1, 1), (0, 1)))


def color_at(img, x, y):
    return tuple(int(c) for c in img[y, x])


def test_zone_and_box_outlines():
    det = Detection(BoundingBox(0.25, 0.25, 0.5, 0.75, True), 0.9)
    img = render_overlay(101, 101, ZONE, [det], alerting=False)
    assert img.shape == (101, 101, 3) and img.dtype == np.uint8
    assert color_at(img, 10, 50) == ZONE_COLOR
    assert color_at(img, 25, 40) == BOX_COLOR  # left edge of the box
    assert color_at(img, 5, 5) == (CANVAS_GREY,) * 3


def test_in_zone_box_turns_red_while_alerting():
    det = Detection(BoundingBox(0.25, 0.25, 0.5, 0.75, True), 0.9)
    outside = Detection(BoundingBox(0.6, 0.05, 0.8, 0.3, True), 0.9)
    img = render_overlay(101, 101, ZONE, [det, outside], alerting=True)
    assert color_at(img, 25, 40) == ALERT_COLOR
    assert color_at(img, 60, 20) == BOX_COLOR


def test_draws_over_supplied_pixels_without_mutating_them():
    pixels = np.zeros((20, 30, 3), dtype=np.uint8)
    img = render_overlay(30, 20, ZONE, [], alerting=False, pixels=pixels)
    assert pixels.max() == 0 and img.max() > 0
    assert color_at(img, 3, 3) == (0, 0, 0)
