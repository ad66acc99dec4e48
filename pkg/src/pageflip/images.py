"""Image file loading and layout overlay rendering.

Accepts 8-bit grayscale or 24-bit RGB PNG plus binary PGM (P5) / PPM (P6),
all through Pillow. Arrays follow the conventions in :mod:`pageflip.layout`.
"""

from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw

from .layout import PageLayout


def load_image(path) -> np.ndarray:
    """Load a page image as uint8 (H, W) grayscale or (H, W, 3) RGB."""
    with Image.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8)
        if im.mode == "RGB":
            return np.asarray(im, dtype=np.uint8)
        if im.mode in ("I", "I;16", "F", "1"):
            return np.asarray(im.convert("L"), dtype=np.uint8)
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_layout_overlay(
    img: np.ndarray,
    layout: PageLayout,
    path,
    turn_fraction: float = 0.5,
) -> None:
    """Write a PNG with system rectangles and the last system's turn line.

    Each detected system gets a red outline; a blue vertical line marks
    the trigger x (``turn_fraction`` of the way through the last system's
    ink extent).
    """
    if img.ndim == 2:
        canvas = Image.fromarray(img, mode="L").convert("RGB")
    else:
        canvas = Image.fromarray(img.astype(np.uint8), mode="RGB")
    draw = ImageDraw.Draw(canvas)
    for system in layout.systems:
        draw.rectangle(
            [system.x_left, system.y_top, system.x_right, system.y_bottom],
            outline=(220, 30, 30),
            width=2,
        )
    if layout.systems:
        last = layout.last_system
        turn_x = round(last.x_left + turn_fraction * last.width)
        draw.line(
            [(turn_x, last.y_top), (turn_x, last.y_bottom)],
            fill=(30, 30, 220),
            width=2,
        )
    canvas.save(path, format="PNG")
