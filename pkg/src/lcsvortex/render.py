"""Deterministic SVG rendering of pipeline artifacts.

Layers: a log10(lam2) raster backdrop, singularity markers (crosses for all
detected points, green circles for kept wedges, red triangles for
trisectors), Poincare sections, and detected boundaries labelled with their
stretching parameter. The raster is embedded as a base64 PNG; identical
artifacts render to identical bytes.
"""

from __future__ import annotations

import base64
import csv
import io
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .cauchy_green import load_tensor_field
from .errors import MissingLayer

LAYERS = ("backdrop", "singularities", "sections", "boundaries")

_WIDTH = 800
_MARGIN = 40

_RAMP = np.array([
    [0.13, 0.15, 0.38],
    [0.22, 0.50, 0.72],
    [0.60, 0.85, 0.70],
    [0.99, 0.91, 0.50],
])


def _colormap(norm: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] through the piecewise-linear color ramp."""
    pos = np.clip(norm, 0.0, 1.0) * (len(_RAMP) - 1)
    i = np.clip(pos.astype(int), 0, len(_RAMP) - 2)
    frac = (pos - i)[..., None]
    rgb = _RAMP[i] * (1 - frac) + _RAMP[i + 1] * frac
    return (rgb * 255).astype(np.uint8)


def _f(x: float) -> str:
    return f"{x:.6g}"


def render_svg(artifact_dir, output_path, layers=LAYERS,
               checkpoint_dir=None) -> Path:
    """Compose the requested layers from a pipeline output directory.

    Raises MissingLayer when a requested layer's artifact file is absent.
    """
    artifact_dir = Path(artifact_dir)
    ckpt = Path(checkpoint_dir) if checkpoint_dir else artifact_dir / "checkpoints"
    for layer in layers:
        if layer not in LAYERS:
            raise MissingLayer(f"unknown layer '{layer}' (choose from {LAYERS})")

    cg_path = ckpt / "cauchy_green.grid"
    sing_path = artifact_dir / "singularities.csv"
    sec_path = artifact_dir / "sections.csv"
    bnd_path = artifact_dir / "boundaries.geojson"

    extent = None
    tf = ef = None
    if "backdrop" in layers:
        if not cg_path.exists():
            raise MissingLayer(f"backdrop needs {cg_path}")
        tf, ef = load_tensor_field(cg_path)
        extent = (tf.x_axis.start, tf.x_axis.stop, tf.y_axis.start, tf.y_axis.stop)

    rows = []
    if "singularities" in layers:
        if not sing_path.exists():
            raise MissingLayer(f"singularities layer needs {sing_path}")
        with sing_path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    sections = []
    if "sections" in layers:
        if not sec_path.exists():
            raise MissingLayer(f"sections layer needs {sec_path}")
        with sec_path.open(newline="") as fh:
            sections = list(csv.DictReader(fh))
    features = []
    if "boundaries" in layers:
        if not bnd_path.exists():
            raise MissingLayer(f"boundaries layer needs {bnd_path}")
        features = json.loads(bnd_path.read_text())["features"]

    if extent is None:
        xs, ys = [], []
        for r in rows:
            xs.append(float(r["x"]))
            ys.append(float(r["y"]))
        for s in sections:
            xs.extend([float(s["anchor_x"]), float(s["anchor_x"]) + float(s["length"])])
            ys.append(float(s["anchor_y"]))
        for f in features:
            for x, y in f["geometry"]["coordinates"][0]:
                xs.append(x)
                ys.append(y)
        if not xs:
            raise MissingLayer("no artifacts selected; nothing to render")
        pad_x = 0.05 * (max(xs) - min(xs) or 1.0)
        pad_y = 0.05 * (max(ys) - min(ys) or 1.0)
        extent = (min(xs) - pad_x, max(xs) + pad_x, min(ys) - pad_y, max(ys) + pad_y)

    x0, x1, y0, y1 = extent
    height = int(round(_WIDTH * (y1 - y0) / (x1 - x0)))

    def to_px(x, y):
        return ((x - x0) / (x1 - x0) * _WIDTH,
                (y1 - y) / (y1 - y0) * height)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'xmlns:xlink="http://www.w3.org/1999/xlink" '
        f'width="{_WIDTH + 2 * _MARGIN}" height="{height + 2 * _MARGIN + 30}" '
        f'viewBox="{-_MARGIN} {-_MARGIN} {_WIDTH + 2 * _MARGIN} {height + 2 * _MARGIN + 30}">',
        f'<rect x="{-_MARGIN}" y="{-_MARGIN}" width="{_WIDTH + 2 * _MARGIN}" '
        f'height="{height + 2 * _MARGIN + 30}" fill="white"/>',
    ]

    if tf is not None:
        with np.errstate(invalid="ignore", divide="ignore"):
            backdrop = np.log10(np.where(ef.lam2 > 0, ef.lam2, np.nan))
        finite = np.isfinite(backdrop)
        if finite.any():
            lo, hi = np.nanmin(backdrop), np.nanmax(backdrop)
            norm = (backdrop - lo) / (hi - lo) if hi > lo else np.zeros_like(backdrop)
        else:
            norm = np.zeros_like(backdrop)
        rgb = _colormap(np.where(finite, norm, 0.0))
        rgb[~finite] = (160, 160, 160)
        img = Image.fromarray(rgb[::-1])  # row 0 at the top = max y
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        data = base64.b64encode(buf.getvalue()).decode("ascii")
        parts.append(
            f'<image x="0" y="0" width="{_WIDTH}" height="{height}" '
            f'preserveAspectRatio="none" image-rendering="pixelated" '
            f'xlink:href="data:image/png;base64,{data}"/>')

    for s in sections:
        ax, ay = to_px(float(s["anchor_x"]), float(s["anchor_y"]))
        bx, by = to_px(float(s["anchor_x"]) + float(s["length"]), float(s["anchor_y"]))
        parts.append(f'<line x1="{_f(ax)}" y1="{_f(ay)}" x2="{_f(bx)}" y2="{_f(by)}" '
                     f'stroke="black" stroke-width="1.5" stroke-dasharray="6 3"/>')

    for r in rows:
        px, py = to_px(float(r["x"]), float(r["y"]))
        parts.append(f'<path d="M {_f(px - 4)} {_f(py)} H {_f(px + 4)} '
                     f'M {_f(px)} {_f(py - 4)} V {_f(py + 4)}" '
                     f'stroke="black" stroke-width="1"/>')
    for r in rows:
        if r["kept"] != "1":
            continue
        px, py = to_px(float(r["x"]), float(r["y"]))
        if r["type"] == "wedge":
            parts.append(f'<circle cx="{_f(px)}" cy="{_f(py)}" r="5" fill="none" '
                         f'stroke="green" stroke-width="1.5"/>')
        elif r["type"] == "trisector":
            parts.append(f'<path d="M {_f(px)} {_f(py - 6)} L {_f(px + 5)} {_f(py + 4)} '
                         f'L {_f(px - 5)} {_f(py + 4)} Z" fill="none" stroke="red" '
                         f'stroke-width="1.5"/>')

    for f in features:
        ring = f["geometry"]["coordinates"][0]
        pts = " ".join(f"{_f(px)},{_f(py)}" for px, py in (to_px(x, y) for x, y in ring))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#00aa00" '
                     f'stroke-width="2"/>')
        top = max(ring, key=lambda p: p[1])
        lx, ly = to_px(top[0], top[1])
        lam = f["properties"]["lambda"]
        parts.append(f'<text x="{_f(lx)}" y="{_f(ly - 6)}" font-size="13" '
                     f'text-anchor="middle" fill="#006600">&#955;={_f(lam)}</text>')

    legend_y = height + 18
    legend = []
    if tf is not None:
        legend.append('backdrop: log10 of the dominant stretching eigenvalue')
    if rows:
        legend.append("+ singularity, o kept wedge, &#9651; trisector")
    if sections:
        legend.append("dashed: Poincare section")
    if features:
        legend.append("green: vortex boundary")
    parts.append(f'<text x="0" y="{legend_y}" font-size="12" fill="black">'
                 f'{" | ".join(legend)}</text>')
    parts.append("</svg>")

    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return output_path
