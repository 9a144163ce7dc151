from __future__ import annotations

from typing import Sequence

import numpy as np  # type: ignore
from PIL import Image, ImageDraw  # type: ignore

import color
from config import Config
from metrics import CurvePoints

AXIS_LABELS = {
    "roc": ("false positive rate", "true positive rate"),
    "pr": ("recall", "precision"),
}
CURVE_COLORS = {"roc": color.roc_curve, "pr": color.pr_curve}
GRID_STEPS = 5


def to_pixels(x: np.ndarray, y: np.ndarray, width: int, height: int, margin: int) -> list[tuple[float, float]]:
    """Map unit-square coordinates to image pixels; y grows upwards."""
    span_x, span_y = width - 2 * margin, height - 2 * margin
    return [(margin + a * span_x, height - margin - b * span_y) for a, b in zip(x, y)]


def render_grid(draw: ImageDraw.ImageDraw, width: int, height: int, margin: int) -> None:
    for step in range(GRID_STEPS + 1):
        t = step / GRID_STEPS
        x, y = to_pixels([t], [t], width, height, margin)[0]
        draw.line([(x, margin), (x, height - margin)], fill=color.grid)
        draw.line([(margin, y), (width - margin, y)], fill=color.grid)
        draw.text((x - 8, height - margin + 6), f"{t:.1f}", fill=color.label_text)
        draw.text((4, y - 6), f"{t:.1f}", fill=color.label_text)
    draw.rectangle([margin, margin, width - margin, height - margin], outline=color.axis)


def render_curve(curve: CurvePoints, path: str, title: str = "", width: int = Config.plot_width,
                 height: int = Config.plot_height, margin: int = Config.plot_margin) -> str:
    """Draw one ROC or PR curve as a PNG."""
    image = Image.new("RGB", (width, height), color.white)
    draw = ImageDraw.Draw(image)
    render_grid(draw, width, height, margin)
    if curve.kind == "roc":
        draw.line(to_pixels([0.0, 1.0], [0.0, 1.0], width, height, margin), fill=color.chance)
    points = to_pixels(curve.x, curve.y, width, height, margin)
    if curve.kind == "pr":
        points = step_points(points)
    draw.line(points, fill=CURVE_COLORS.get(curve.kind, color.black), width=2)

    x_label, y_label = AXIS_LABELS.get(curve.kind, ("x", "y"))
    draw.text((width // 2 - 40, height - margin + 22), x_label, fill=color.label_text)
    draw.text((4, margin // 2), y_label, fill=color.label_text)
    if title:
        draw.text((margin, 8), title, fill=color.black)
    image.save(path, format="PNG")
    return path


def step_points(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Stairs between consecutive points: each new y holds back to the previous x."""
    out = list(points[:1])
    for (x0, _), (x1, y1) in zip(points, points[1:]):
        out.extend([(x0, y1), (x1, y1)])
    return out
