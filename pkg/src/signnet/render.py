"""Stick-figure SVG rendering of pose frames.

The projection is orthographic onto the x-y plane (z is dropped) with y
pointing up. One bounding box is fitted to the whole sequence so that
frames of the same file share a scale. Output text depends only on the
input values, so identical poses give byte-identical files.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .data.poses import JOINT_EDGES, JOINT_NAMES, as_joints, check_pose_sequence

BODY_COLOR = "#1f4e79"
LEFT_COLOR = "#2e8b57"
RIGHT_COLOR = "#b8442c"


def _color(joint: int) -> str:
    if joint < 8:
        return BODY_COLOR
    return LEFT_COLOR if JOINT_NAMES[joint].startswith("left_hand") else RIGHT_COLOR


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _projector(frames: np.ndarray, size: int, margin: int):
    xy = as_joints(frames)[:, :, :2]
    lo = xy.reshape(-1, 2).min(axis=0)
    hi = xy.reshape(-1, 2).max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
    scale = (size - 2 * margin) / span
    # centre the figure in both directions
    offset = margin + ((size - 2 * margin) - (hi - lo) * scale) / 2.0

    def project(p: np.ndarray) -> tuple[float, float]:
        x = offset[0] + (p[0] - lo[0]) * scale
        y = size - (offset[1] + (p[1] - lo[1]) * scale)
        return x, y

    return project


def frame_svg(frames, index: int, size: int = 400, margin: int = 20) -> str:
    """SVG text for frame ``index`` of a ``(T, 150)`` sequence."""
    frames = check_pose_sequence(frames)
    if not 0 <= index < len(frames):
        raise IndexError(f"frame {index} out of range for {len(frames)} frames")
    project = _projector(frames, size, margin)
    joints = as_joints(frames)[index]
    pts = [project(p) for p in joints]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f"<title>frame {index}</title>",
        f'<rect width="{size}" height="{size}" fill="white"/>',
        '<g stroke-width="2" stroke-linecap="round">',
    ]
    for a, b in JOINT_EDGES:
        (x1, y1), (x2, y2) = pts[a], pts[b]
        out.append(f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" stroke="{_color(b)}"/>')
    out.append("</g>")
    out.append("<g>")
    for j, (x, y) in enumerate(pts):
        r = 4 if j < 8 else 2
        out.append(f'<circle id="j{j}" cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}" fill="{_color(j)}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_svg(frames, out_dir, stride: int = 1, stem: str = "frame", size: int = 400) -> list[Path]:
    """Write one SVG per ``stride``-th frame (0, stride, 2*stride, ...)."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    frames = check_pose_sequence(frames)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(len(frames) - 1)))
    paths = []
    for t in range(0, len(frames), stride):
        path = out_dir / f"{stem}_{t:0{width}d}.svg"
        path.write_text(frame_svg(frames, t, size), encoding="utf-8")
        paths.append(path)
    return paths
