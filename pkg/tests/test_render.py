import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from signnet.data import JOINT_EDGES, POSE_DIM
from signnet.data.synthetic import template_skeleton
from signnet.render import frame_svg, render_svg

NS = "{http://www.w3.org/2000/svg}"


@pytest.fixture
def frames(rng):
    base = template_skeleton().reshape(1, POSE_DIM)
    return base + rng.normal(0, 0.01, size=(10, POSE_DIM))


class TestRender:
    def test_stride_selects_frames(self, frames, tmp_path):
        paths = render_svg(frames, tmp_path, stride=5)
        assert [p.name for p in paths] == ["frame_0000.svg", "frame_0005.svg"]
        assert sorted(tmp_path.iterdir()) == paths

    def test_every_joint_and_edge_drawn(self, frames, tmp_path):
        for path in render_svg(frames, tmp_path, stride=3):
            root = ET.fromstring(path.read_text())
            circles = root.findall(f".//{NS}circle")
            assert sorted(int(c.get("id")[1:]) for c in circles) == list(range(50))
            assert len(root.findall(f".//{NS}line")) == len(JOINT_EDGES)

    def test_byte_identical(self, frames, tmp_path):
        a = render_svg(frames, tmp_path / "a", stride=2)
        b = render_svg(frames.copy(), tmp_path / "b", stride=2)
        assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]

    def test_orthographic_projection_drops_z(self, frames):
        moved = frames.copy().reshape(10, 50, 3)
        moved[:, :, 2] += 7.0
        assert frame_svg(frames, 4) == frame_svg(moved.reshape(10, POSE_DIM), 4)

    def test_y_points_up(self):
        sk = template_skeleton()
        svg = frame_svg(sk.reshape(1, POSE_DIM), 0)
        cy = {int(m[0]): float(m[1]) for m in re.findall(r'id="j(\d+)" cx="[\d.]+" cy="([\d.]+)"', svg)}
        assert cy[0] < cy[1]  # the nose sits above the neck on screen

    def test_fits_inside_canvas(self, frames):
        svg = frame_svg(frames, 0, size=200)
        coords = [float(v) for v in re.findall(r'c[xy]="([-\d.]+)"', svg)]
        assert min(coords) >= 0 and max(coords) <= 200

    def test_errors(self, frames, tmp_path):
        with pytest.raises(ValueError, match="stride"):
            render_svg(frames, tmp_path, stride=0)
        with pytest.raises(IndexError):
            frame_svg(frames, 10)
        with pytest.raises(ValueError, match="frame width"):
            render_svg(np.zeros((2, 3)), tmp_path)
