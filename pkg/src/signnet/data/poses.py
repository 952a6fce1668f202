"""Pose sequences, the 50-joint skeleton layout and pose file formats.

Text format (``.pose``)::

    {"dims":3,"format":"POSE","frames":T,"joints":50,"version":1}
    <150 space-separated decimals>      # one line per frame, T lines

Binary format (``.psb``): magic ``PSB1``, uint32 frame count, uint16 joint
count, uint16 dims, then ``T*150`` little-endian float64 values.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

N_JOINTS = 50
N_DIMS = 3
POSE_DIM = N_JOINTS * N_DIMS

BODY_JOINTS = [
    "nose",
    "neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
]
_HAND_POINTS = ["wrist"] + [
    f"{finger}_{k}" for finger in ("thumb", "index", "middle", "ring", "pinky") for k in range(1, 5)
]
JOINT_NAMES = (
    BODY_JOINTS
    + [f"left_hand_{p}" for p in _HAND_POINTS]
    + [f"right_hand_{p}" for p in _HAND_POINTS]
)
LEFT_HAND = len(BODY_JOINTS)
RIGHT_HAND = LEFT_HAND + 21


def _hand_edges(root: int) -> list[tuple[int, int]]:
    edges = []
    for finger in range(5):
        prev = root
        for k in range(1, 5):
            cur = root + 4 * finger + k
            edges.append((prev, cur))
            prev = cur
    return edges


JOINT_EDGES: list[tuple[int, int]] = (
    [(1, 0), (1, 2), (2, 3), (3, 4), (1, 5), (5, 6), (6, 7), (7, LEFT_HAND), (4, RIGHT_HAND)]
    + _hand_edges(LEFT_HAND)
    + _hand_edges(RIGHT_HAND)
)

TEXT_MAGIC = "POSE"
BINARY_MAGIC = b"PSB1"
FORMAT_VERSION = 1


class PoseFormatError(ValueError):
    """Malformed pose data; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def check_pose_sequence(frames, name: str = "pose") -> np.ndarray:
    """Validate and return a ``(T, 150)`` float64 array with ``T >= 1``."""
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[1:] == (N_JOINTS, N_DIMS):
        arr = arr.reshape(len(arr), POSE_DIM)
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected (T, {POSE_DIM}) array, got shape {arr.shape}")
    if arr.shape[1] != POSE_DIM:
        raise ValueError(f"{name}: frame width {arr.shape[1]} ≠ {POSE_DIM}")
    if arr.shape[0] < 1:
        raise ValueError(f"{name}: empty pose sequence")
    bad = ~np.isfinite(arr)
    if bad.any():
        raise ValueError(f"{name}: non-finite value in frame {int(np.argwhere(bad)[0, 0])}")
    return arr


def as_joints(frames: np.ndarray) -> np.ndarray:
    """View a ``(T, 150)`` sequence as ``(T, 50, 3)``."""
    return np.asarray(frames).reshape(-1, N_JOINTS, N_DIMS)


# ----------------------------------------------------------------- text I/O
def dumps_pose(frames) -> str:
    arr = check_pose_sequence(frames)
    header = {"dims": N_DIMS, "format": TEXT_MAGIC, "frames": len(arr), "joints": N_JOINTS, "version": FORMAT_VERSION}
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lines += [" ".join(repr(float(v)) for v in row) for row in arr]
    return "\n".join(lines) + "\n"


def loads_pose(text: str) -> np.ndarray:
    raw = text.encode("utf-8")
    lines = raw.split(b"\n")
    offsets = np.cumsum([0] + [len(line) + 1 for line in lines])
    try:
        header = json.loads(lines[0])
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise PoseFormatError("malformed header", 0) from None
    if not isinstance(header, dict) or header.get("format") != TEXT_MAGIC:
        raise PoseFormatError("header is not a POSE header", 0)
    if header.get("version") != FORMAT_VERSION:
        raise PoseFormatError(f"unsupported version {header.get('version')}", 0)
    if header.get("joints") != N_JOINTS or header.get("dims") != N_DIMS:
        raise PoseFormatError(
            f"joint layout {header.get('joints')}x{header.get('dims')} ≠ {N_JOINTS}x{N_DIMS}", 0
        )
    n = header.get("frames")
    if not isinstance(n, int) or n < 1:
        raise PoseFormatError(f"invalid frame count {n!r}", 0)
    body = lines[1:]
    if body and body[-1] == b"":
        body = body[:-1]
    if len(body) != n:
        raise PoseFormatError(f"header says {n} frames, found {len(body)}", len(raw))
    out = np.empty((n, POSE_DIM))
    for t, line in enumerate(body):
        off = int(offsets[t + 1])
        fields = line.split()
        if len(fields) != POSE_DIM:
            raise PoseFormatError(f"frame {t}: frame width {len(fields)} ≠ {POSE_DIM}", off)
        try:
            row = np.array([float(f) for f in fields])
        except ValueError:
            raise PoseFormatError(f"frame {t}: unparseable value", off) from None
        if not np.isfinite(row).all():
            raise PoseFormatError(f"frame {t}: non-finite value", off)
        out[t] = row
    return out


# --------------------------------------------------------------- binary I/O
def dumps_pose_binary(frames) -> bytes:
    arr = check_pose_sequence(frames)
    head = BINARY_MAGIC + struct.pack("<IHH", len(arr), N_JOINTS, N_DIMS)
    return head + np.ascontiguousarray(arr, dtype="<f8").tobytes()


def loads_pose_binary(buf: bytes) -> np.ndarray:
    if buf[:4] != BINARY_MAGIC:
        raise PoseFormatError("bad magic, expected PSB1", 0)
    if len(buf) < 12:
        raise PoseFormatError("truncated header", len(buf))
    n, joints, dims = struct.unpack("<IHH", buf[4:12])
    if joints != N_JOINTS or dims != N_DIMS:
        raise PoseFormatError(f"joint layout {joints}x{dims} ≠ {N_JOINTS}x{N_DIMS}", 8)
    if n < 1:
        raise PoseFormatError("invalid frame count 0", 4)
    expected = 12 + 8 * n * POSE_DIM
    if len(buf) != expected:
        raise PoseFormatError(f"payload size {len(buf) - 12} ≠ {expected - 12}", min(len(buf), expected))
    arr = np.frombuffer(buf[12:], dtype="<f8").reshape(n, POSE_DIM).astype(np.float64)
    bad = ~np.isfinite(arr)
    if bad.any():
        t, c = np.argwhere(bad)[0]
        raise PoseFormatError(f"frame {t}: non-finite value", 12 + 8 * (t * POSE_DIM + c))
    return arr


def save_pose(path, frames, binary: bool | None = None) -> None:
    """Write a pose file; binary format when ``binary`` or the suffix is ``.psb``."""
    path = Path(path)
    if binary is None:
        binary = path.suffix == ".psb"
    if binary:
        path.write_bytes(dumps_pose_binary(frames))
    else:
        path.write_bytes(dumps_pose(frames).encode("utf-8"))


def load_pose(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if buf[:4] == BINARY_MAGIC:
        return loads_pose_binary(buf)
    try:
        text = buf.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise PoseFormatError("not UTF-8 text", exc.start) from None
    return loads_pose(text)
