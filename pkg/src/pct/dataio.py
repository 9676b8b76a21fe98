"""KITTI-style label/calibration parsing, detection output, and binary grids.

Text formats
  label lines: 15 whitespace-separated fields, optional 16th score field:
    type trunc occ alpha left top right bottom h w l x y z rotation_y [score]
  calib lines: "KEY: v0 v1 ...”; the front-camera projection key "P2" holds a
    3x4 row-major matrix whose entries (0,0) (1,1) (0,2) (1,2) are the
    intrinsics and (0,3) (1,3) (2,3) the principal-axis offsets.
  roi lines: "class_id left top right bottom score".

Binary formats (all little-endian)
  depth map ("DMAP"): magic 'DMAP', version byte 0x01, uint32 width, uint32
    height, then width*height float32 values row-major; NaN marks invalid.
  feature grid ("FGRD"): magic 'FGRD', version byte 0x01, uint32 channels,
    uint32 height, uint32 width, float32 stride, then float32 values in
    (channel, row, column) order.
"""

import enum
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import FormatError, ParseError
from .geometry import CameraIntrinsics

DMAP_MAGIC = b"DMAP"
FGRD_MAGIC = b"FGRD"
FORMAT_VERSION = 1

FLOAT_FMT = "{:.6f}"


class Difficulty(enum.IntEnum):
    EASY = 0
    MODERATE = 1
    HARD = 2
    IGNORED = 3


# (min 2D box height px, max occlusion, max truncation) per difficulty,
# public KITTI convention.
DIFFICULTY_THRESHOLDS = {
    Difficulty.EASY: (40.0, 0, 0.15),
    Difficulty.MODERATE: (25.0, 1, 0.30),
    Difficulty.HARD: (25.0, 2, 0.50),
}


@dataclass
class LabelRecord:
    """One ground-truth or detection record in KITTI label layout."""

    type: str
    truncation: float
    occlusion: int
    alpha: float
    left: float
    top: float
    right: float
    bottom: float
    h: float
    w: float
    l: float
    x: float
    y: float
    z: float
    rotation_y: float
    score: Optional[float] = None

    def __post_init__(self):
        if not (self.right > self.left and self.bottom > self.top):
            raise ValueError(f"degenerate 2D bbox {(self.left, self.top, self.right, self.bottom)}")
        if not (self.h > 0 and self.w > 0 and self.l > 0):
            raise ValueError(f"non-positive dimensions {(self.h, self.w, self.l)}")

    @property
    def box_height(self):
        return self.bottom - self.top


@dataclass(frozen=True)
class CalibRecord:
    """Front-camera projection reduced to intrinsics plus offsets."""

    intrinsics: CameraIntrinsics
    offset_x: float = 0.0
    offset_y: float = 0.0
    offset_z: float = 0.0


@dataclass
class DepthMap:
    """Row-major metric depth grid; NaN cells are invalid."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValueError(f"depth map must be 2D, got shape {self.values.shape}")
        finite = self.values[np.isfinite(self.values)]
        if finite.size and not (finite > 0).all():
            raise ValueError("valid depth entries must be positive")

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class RoI2D:
    """2D region of interest with detector class and score."""

    left: float
    top: float
    right: float
    bottom: float
    class_id: int = 0
    score: float = 1.0

    def __post_init__(self):
        if not (self.right > self.left and self.bottom > self.top):
            raise ValueError(f"RoI must have positive area, got {self}")

    @property
    def width(self):
        return self.right - self.left

    @property
    def height(self):
        return self.bottom - self.top


def _parse_float(token, lineno, what):
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"unparseable {what} {token!r}", line=lineno) from None


def parse_labels(text):
    """Parse KITTI label text.

    Returns (records, dontcare) where records is a list of LabelRecord for
    non-DontCare lines and dontcare is a list of (left, top, right, bottom)
    2D boxes kept for evaluation masking.
    """
    records = []
    dontcare = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) not in (15, 16):
            raise ParseError(f"expected 15 or 16 fields, got {len(fields)}", line=lineno)
        vals = [_parse_float(tok, lineno, "number") for tok in fields[1:]]
        if fields[0] == "DontCare":
            dontcare.append((vals[3], vals[4], vals[5], vals[6]))
            continue
        try:
            rec = LabelRecord(
                type=fields[0],
                truncation=vals[0],
                occlusion=int(vals[1]),
                alpha=vals[2],
                left=vals[3],
                top=vals[4],
                right=vals[5],
                bottom=vals[6],
                h=vals[7],
                w=vals[8],
                l=vals[9],
                x=vals[10],
                y=vals[11],
                z=vals[12],
                rotation_y=vals[13],
                score=vals[14] if len(vals) == 15 else None,
            )
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        records.append(rec)
    return records, dontcare


def write_labels(records, dontcare=()):
    """Serialize records (and optional DontCare boxes) to KITTI label text."""
    lines = []
    for r in records:
        fields = [r.type, FLOAT_FMT.format(r.truncation), str(int(r.occlusion))]
        fields += [
            FLOAT_FMT.format(v)
            for v in (r.alpha, r.left, r.top, r.right, r.bottom, r.h, r.w, r.l, r.x, r.y, r.z, r.rotation_y)
        ]
        if r.score is not None:
            fields.append(FLOAT_FMT.format(r.score))
        lines.append(" ".join(fields))
    for (left, top, right, bottom) in dontcare:
        vals = [-1, -1, -10, left, top, right, bottom, -1, -1, -1, -1000, -1000, -1000, -10]
        lines.append("DontCare " + " ".join(FLOAT_FMT.format(float(v)) for v in vals))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_calib(text):
    """Extract the front-camera projection from calibration text."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line.startswith("P2:"):
            continue
        tokens = line.split()[1:]
        if len(tokens) != 12:
            raise ParseError(f"P2 must have 12 entries, got {len(tokens)}", line=lineno)
        m = [_parse_float(t, lineno, "matrix entry") for t in tokens]
        try:
            intr = CameraIntrinsics(f_u=m[0], f_v=m[5], u_p=m[2], v_p=m[6])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        return CalibRecord(intrinsics=intr, offset_x=m[3], offset_y=m[7], offset_z=m[11])
    raise ParseError("missing P2 projection line")


def write_calib(calib):
    """Serialize a CalibRecord as a single P2 projection line."""
    i = calib.intrinsics
    m = [i.f_u, 0.0, i.u_p, calib.offset_x, 0.0, i.f_v, i.v_p, calib.offset_y, 0.0, 0.0, 1.0, calib.offset_z]
    return "P2: " + " ".join(FLOAT_FMT.format(v) for v in m) + "\n"


def write_depth_map(depth):
    """Encode a DepthMap as DMAP bytes."""
    header = DMAP_MAGIC + struct.pack("<BII", FORMAT_VERSION, depth.width, depth.height)
    body = depth.values.astype("<f4").tobytes()
    return header + body


def read_depth_map(data):
    """Decode DMAP bytes into a DepthMap."""
    if len(data) < 13:
        raise FormatError(f"depth map payload too short ({len(data)} bytes)")
    if data[:4] != DMAP_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}")
    version, width, height = struct.unpack("<BII", data[4:13])
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    expected = 13 + 4 * width * height
    if len(data) != expected:
        raise FormatError(f"expected {expected} bytes, got {len(data)}")
    values = np.frombuffer(data[13:], dtype="<f4").reshape(height, width).copy()
    return DepthMap(values=values)


def write_feature_grid(values, stride):
    """Encode a (C, H, W) float array plus its pixel stride as FGRD bytes."""
    arr = np.asarray(values, dtype="<f4")
    if arr.ndim != 3:
        raise ValueError(f"feature grid must be (C, H, W), got {arr.shape}")
    c, h, w = arr.shape
    header = FGRD_MAGIC + struct.pack("<BIIIf", FORMAT_VERSION, c, h, w, float(stride))
    return header + arr.tobytes()


def read_feature_grid(data):
    """Decode FGRD bytes into ((C, H, W) float32 array, stride)."""
    if len(data) < 21:
        raise FormatError(f"feature grid payload too short ({len(data)} bytes)")
    if data[:4] != FGRD_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}")
    version, c, h, w, stride = struct.unpack("<BIIIf", data[4:21])
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    expected = 21 + 4 * c * h * w
    if len(data) != expected:
        raise FormatError(f"expected {expected} bytes, got {len(data)}")
    values = np.frombuffer(data[21:], dtype="<f4").reshape(c, h, w).copy()
    return values, float(stride)


def parse_rois(text):
    """Parse RoI lines ("class_id left top right bottom score")."""
    rois = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 6:
            raise ParseError(f"expected 6 fields, got {len(fields)}", line=lineno)
        vals = [_parse_float(t, lineno, "number") for t in fields[1:]]
        try:
            rois.append(
                RoI2D(left=vals[0], top=vals[1], right=vals[2], bottom=vals[3], class_id=int(fields[0]), score=vals[4])
            )
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    return rois


def write_rois(rois):
    lines = []
    for r in rois:
        lines.append(
            " ".join([str(r.class_id)] + [FLOAT_FMT.format(v) for v in (r.left, r.top, r.right, r.bottom, r.score)])
        )
    return "\n".join(lines) + ("\n" if lines else "")


def difficulty_of(record):
    """Classify a label into the standard Easy/Moderate/Hard/Ignored levels."""
    height = record.box_height
    for level in (Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD):
        min_h, max_occ, max_trunc = DIFFICULTY_THRESHOLDS[level]
        if height >= min_h and record.occlusion <= max_occ and record.truncation <= max_trunc:
            return level
    return Difficulty.IGNORED
