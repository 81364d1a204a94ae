"""Oracle detector stage: manifest-driven boxes, crops and the scene feature.

The real pipeline would run an object detector here; at desk scale the
ground-truth boxes recorded in the corpus manifest play that role, with an
optional jitter to simulate detector error. The global scene feature is a
deterministic hand-crafted summary (8x8 grayscale downsample plus box
geometry) standing in for a detector's intermediate layer.

Manifest format (one frame per line, whitespace separated)::

    episode_id frame_idx image_path action_id grasp_id object_id mesh_path \
        box:hand_r box:hand_l box:obj

with each box as ``x,y,w,h`` in normalized [0,1] image coordinates, or
``-`` when absent. Images are binary 8-bit PPM (color) or PGM (gray).
"""

from dataclasses import dataclass

import numpy as np

from .errors import IoError, MissingAnnotation, NoHandDetected, ParseError

GLOBAL_DOWNSAMPLE = 8                      # 8x8 grayscale thumbnail
GLOBAL_FEATURE_DIM = GLOBAL_DOWNSAMPLE ** 2 + 3 * 5   # + (cx,cy,w,h,present) x 3 boxes


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float
    cls: str = "hand"              # "hand" or "object"
    side: str | None = None        # optional "left"/"right" hint

    def __post_init__(self):
        if not (self.x >= 0.0 and self.y >= 0.0 and self.w > 0.0 and self.h > 0.0
                and self.x + self.w <= 1.0 + 1e-12 and self.y + self.h <= 1.0 + 1e-12):
            raise ValueError(f"box outside unit square: {self}")

    @property
    def center(self):
        return (self.x + 0.5 * self.w, self.y + 0.5 * self.h)


@dataclass(frozen=True)
class DetectionResult:
    hands: tuple          # 0..2 BoundingBox
    objects: tuple        # 0..1 BoundingBox
    image_path: str = ""

    def __post_init__(self):
        if len(self.hands) > 2:
            raise ValueError("at most two hand boxes")
        if len(self.objects) > 1:
            raise ValueError("at most one object box")


@dataclass
class FrameRecord:
    """One manifest line: a frame's files, labels and ground-truth boxes."""
    episode_id: str
    frame_idx: int
    image_path: str
    action_id: int
    grasp_id: int
    object_id: int
    mesh_path: str
    hand_r: BoundingBox | None = None
    hand_l: BoundingBox | None = None
    obj: BoundingBox | None = None


# ---------------------------------------------------------------------------
# oracle detector
# ---------------------------------------------------------------------------

def _jitter_box(box, noise, rng):
    if noise <= 0.0:
        return box
    d = rng.uniform(-noise, noise, size=4)
    x = min(max(box.x + d[0], 0.0), 0.98)
    y = min(max(box.y + d[1], 0.0), 0.98)
    w = max(box.w + d[2], 0.01)
    h = max(box.h + d[3], 0.01)
    w = min(w, 1.0 - x)
    h = min(h, 1.0 - y)
    return BoundingBox(x, y, w, h, cls=box.cls, side=box.side)


def oracle_detect(record: FrameRecord, noise: float = 0.0,
                  rng: np.random.Generator | None = None) -> DetectionResult:
    """Return the manifest's ground-truth boxes, optionally jittered.

    Each coordinate moves by at most `noise` (normalized units) and the
    result is clamped back into the unit square, so box invariants hold.
    """
    if record.hand_r is None and record.hand_l is None and record.obj is None:
        raise MissingAnnotation(f"frame {record.episode_id}/{record.frame_idx} has no boxes")
    if noise > 0.0 and rng is None:
        rng = np.random.default_rng(0)
    hands = tuple(_jitter_box(b, noise, rng)
                  for b in (record.hand_r, record.hand_l) if b is not None)
    objs = tuple(_jitter_box(b, noise, rng) for b in (record.obj,) if b is not None)
    return DetectionResult(hands=hands, objects=objs, image_path=record.image_path)


def resolve_primary_hand(d: DetectionResult) -> BoundingBox:
    """The acting hand: rightmost box center in the egocentric frame."""
    if not d.hands:
        raise NoHandDetected("no hand box in detection result")
    return max(d.hands, key=lambda b: b.center[0])


# ---------------------------------------------------------------------------
# crops and scene feature
# ---------------------------------------------------------------------------

def bilinear_resample(image: np.ndarray, x0: float, y0: float, w: float, h: float,
                      out_size: int) -> np.ndarray:
    """Sample an (H, W, C) image over the pixel-space window [x0, x0+w) x
    [y0, y0+h) onto an out_size x out_size grid, half-pixel centered.

    With the window equal to the whole image and out_size equal to the input
    size this is an identity copy.
    """
    img = image if image.ndim == 3 else image[:, :, None]
    ih, iw, _ = img.shape
    sx = w / out_size
    sy = h / out_size
    # half-pixel convention: output pixel centers map back into the window
    us = x0 + (np.arange(out_size) + 0.5) * sx - 0.5
    vs = y0 + (np.arange(out_size) + 0.5) * sy - 0.5
    us = np.clip(us, 0.0, iw - 1.0)
    vs = np.clip(vs, 0.0, ih - 1.0)
    u0 = np.floor(us).astype(np.int64)
    v0 = np.floor(vs).astype(np.int64)
    u1 = np.minimum(u0 + 1, iw - 1)
    v1 = np.minimum(v0 + 1, ih - 1)
    fu = us - u0
    fv = vs - v0
    top = img[v0][:, u0] * (1.0 - fu)[None, :, None] + img[v0][:, u1] * fu[None, :, None]
    bot = img[v1][:, u0] * (1.0 - fu)[None, :, None] + img[v1][:, u1] * fu[None, :, None]
    out = top * (1.0 - fv)[:, None, None] + bot * fv[:, None, None]
    return out if image.ndim == 3 else out[:, :, 0]


def crop_and_resize(image: np.ndarray, box: BoundingBox, out_size: int) -> np.ndarray:
    """Bilinear crop of a normalized box to out_size x out_size (x channels)."""
    ih, iw = image.shape[0], image.shape[1]
    return bilinear_resample(image, box.x * iw, box.y * ih,
                             box.w * iw, box.h * ih, out_size)


def _box_slots(box):
    if box is None:
        return [0.0, 0.0, 0.0, 0.0, 0.0]
    cx, cy = box.center
    return [cx, cy, box.w, box.h, 1.0]


def global_feature(image: np.ndarray, d: DetectionResult) -> np.ndarray:
    """Fixed-width scene summary: 8x8 gray thumbnail + box geometry slots.

    Slot order is (primary-ordered hands by descending center-x, padded to
    two) then the object box; absent boxes contribute zeros with presence 0.
    """
    gray = image.mean(axis=2) if image.ndim == 3 else image
    thumb = bilinear_resample(gray, 0.0, 0.0, gray.shape[1], gray.shape[0],
                              GLOBAL_DOWNSAMPLE)
    hands = sorted(d.hands, key=lambda b: -b.center[0])
    slots = []
    for i in range(2):
        slots += _box_slots(hands[i] if i < len(hands) else None)
    slots += _box_slots(d.objects[0] if d.objects else None)
    return np.concatenate([thumb.ravel(), np.asarray(slots, dtype=np.float64)])


# ---------------------------------------------------------------------------
# PPM / PGM images
# ---------------------------------------------------------------------------

def write_image(path, array: np.ndarray):
    """Write a float [0,1] or uint8 array as binary PPM (HxWx3) / PGM (HxW)."""
    arr = np.asarray(array)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"P6"
    elif arr.ndim == 2:
        magic = b"P5"
    else:
        raise IoError(f"cannot encode array of shape {arr.shape}")
    h, w = arr.shape[0], arr.shape[1]
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(arr.tobytes())


def read_image(path) -> np.ndarray:
    """Read a binary PPM/PGM into float64 in [0,1] ((H,W,3) or (H,W))."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        tokens = []
        pos = 0
        while len(tokens) < 4:
            while data[pos:pos + 1].isspace():
                pos += 1
            if data[pos:pos + 1] == b"#":
                pos = data.index(b"\n", pos) + 1
                continue
            start = pos
            while not data[pos:pos + 1].isspace():
                pos += 1
            tokens.append(data[start:pos])
        pos += 1  # single whitespace after maxval
        magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    except (ValueError, IndexError) as exc:
        raise ParseError(f"bad PNM header in {path}") from exc
    if maxval != 255:
        raise ParseError(f"only 8-bit PNM supported, maxval={maxval}")
    if magic == b"P6":
        shape = (h, w, 3)
    elif magic == b"P5":
        shape = (h, w)
    else:
        raise ParseError(f"unsupported PNM magic {magic!r}")
    n = int(np.prod(shape))
    raw = np.frombuffer(data, dtype=np.uint8, count=n, offset=pos)
    return raw.reshape(shape).astype(np.float64) / 255.0


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def _format_box(box):
    if box is None:
        return "-"
    return f"{box.x!r},{box.y!r},{box.w!r},{box.h!r}"


def _parse_box(token, cls, side=None):
    if token == "-":
        return None
    parts = token.split(",")
    if len(parts) != 4:
        raise ParseError(f"bad box token {token!r}")
    x, y, w, h = (float(p) for p in parts)
    return BoundingBox(x, y, w, h, cls=cls, side=side)


def write_manifest(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(" ".join([
                r.episode_id, str(r.frame_idx), r.image_path, str(r.action_id),
                str(r.grasp_id), str(r.object_id), r.mesh_path,
                _format_box(r.hand_r), _format_box(r.hand_l), _format_box(r.obj),
            ]) + "\n")


def read_manifest(path) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 10:
                raise ParseError("manifest line needs 10 fields", line=no)
            records.append(FrameRecord(
                episode_id=parts[0], frame_idx=int(parts[1]), image_path=parts[2],
                action_id=int(parts[3]), grasp_id=int(parts[4]), object_id=int(parts[5]),
                mesh_path=parts[6],
                hand_r=_parse_box(parts[7], "hand", "right"),
                hand_l=_parse_box(parts[8], "hand", "left"),
                obj=_parse_box(parts[9], "object"),
            ))
    return records


def episodes_of(records) -> dict:
    """Group manifest records by episode id, ordered by frame index."""
    groups = {}
    for r in records:
        groups.setdefault(r.episode_id, []).append(r)
    for eid, frames in groups.items():
        frames.sort(key=lambda r: r.frame_idx)
    return groups
