"""Readers and writers for every on-disk interchange format.

Binary formats share a fixed 8-byte magic, little-endian integers, and
float32 payloads, so external exporters (e.g. a neural feature extractor)
can produce them from any framework. Byte layouts are documented in
docs/formats.md. Text formats are whitespace-separated with '#' comments.
"""

from __future__ import annotations

import csv
import struct
import zlib
from pathlib import Path

import numpy as np

from .adaptation import FeatureBundle
from .errors import FileFormatError, UnsupportedFormatError
from .geometry import Intrinsics, PointMap, Pose
from .matching import Correspondence, FeatureMap
from .noise_model import NoiseParams
from .raw_pipeline import LinearImage, RawImage

MAGIC_RAW = b"DRKRAW1\x00"
MAGIC_IMG = b"DRKIMG1\x00"
MAGIC_FTR = b"DRKFTR1\x00"
MAGIC_PTS = b"DRKPTS1\x00"
MAGIC_BDL = b"DRKBDL1\x00"

RAW_HEADER_SIZE = 64

CFA_CODES = {0: "RGGB", 1: "BGGR", 2: "GRBG", 3: "GBRG"}
CFA_NAMES = {v: k for k, v in CFA_CODES.items()}

# name -> version, reported by the CLI so exporters can check compatibility
FORMAT_VERSIONS = {
    "DRKRAW": 1,
    "DRKIMG": 1,
    "DRKFTR": 1,
    "DRKPTS": 1,
    "DRKBDL": 1,
    "poses-text": 1,
    "noise-params-text": 1,
    "correspondences-text": 1,
    "intrinsics-text": 1,
}

PathLike = str | Path


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FileFormatError(f"truncated file while reading {what}")
    return buf


def _check_magic(f, magic: bytes, path: PathLike) -> None:
    got = _read_exact(f, 8, "magic")
    if got != magic:
        raise FileFormatError(f"{path}: bad magic {got!r}, expected {magic!r}")


# -- raw sensor frames -------------------------------------------------------


def write_raw(path: PathLike, raw: RawImage) -> None:
    header = struct.pack(
        "<8sIII4ffff",
        MAGIC_RAW,
        raw.width,
        raw.height,
        CFA_NAMES[raw.cfa_pattern],
        *raw.black_level.astype(np.float32),
        float(raw.white_level),
        float(raw.exposure_time),
        float(raw.iso),
    )
    header += b"\x00" * (RAW_HEADER_SIZE - len(header))
    with open(path, "wb") as f:
        f.write(header)
        f.write(raw.data.astype("<u2").tobytes())


def read_raw(path: PathLike) -> RawImage:
    with open(path, "rb") as f:
        header = _read_exact(f, RAW_HEADER_SIZE, "header")
        magic, width, height, cfa = struct.unpack_from("<8sIII", header, 0)
        if magic != MAGIC_RAW:
            raise FileFormatError(f"{path}: bad magic {magic!r}")
        if cfa not in CFA_CODES:
            raise UnsupportedFormatError(f"{path}: unknown CFA code {cfa}")
        bl = struct.unpack_from("<4f", header, 20)
        white, exposure, iso = struct.unpack_from("<fff", header, 36)
        payload = _read_exact(f, width * height * 2, "samples")
    data = np.frombuffer(payload, dtype="<u2").reshape(height, width)
    return RawImage(
        width=width,
        height=height,
        cfa_pattern=CFA_CODES[cfa],
        data=data,
        black_level=np.array(bl, dtype=np.float64),
        white_level=white,
        exposure_time=exposure,
        iso=iso,
    )


def read_pgm16(path: PathLike) -> np.ndarray:
    """Convenience importer for binary 16-bit PGM (P5, big-endian samples)."""
    with open(path, "rb") as f:
        data = f.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise FileFormatError(f"{path}: not a binary PGM (P5)")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval < 256 or maxval > 65535:
        raise UnsupportedFormatError(f"{path}: need a 16-bit PGM, maxval={maxval}")
    pos += 1  # single whitespace after maxval
    samples = np.frombuffer(data, dtype=">u2", count=width * height, offset=pos)
    return samples.reshape(height, width).astype(np.uint16)


# -- linear images -----------------------------------------------------------


def write_image(path: PathLike, img: LinearImage) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC_IMG)
        f.write(struct.pack("<III", img.width, img.height, img.channels))
        f.write(img.data.astype("<f4").tobytes())


def read_image(path: PathLike) -> LinearImage:
    with open(path, "rb") as f:
        _check_magic(f, MAGIC_IMG, path)
        width, height, channels = struct.unpack("<III", _read_exact(f, 12, "dims"))
        payload = _read_exact(f, channels * height * width * 4, "payload")
    data = np.frombuffer(payload, dtype="<f4").reshape(channels, height, width)
    return LinearImage.from_array(data)


# -- feature maps ------------------------------------------------------------


def write_features(path: PathLike, fmap: FeatureMap) -> None:
    with open(path, "wb") as f:
        f.write(_features_blob(fmap))


def _features_blob(fmap: FeatureMap) -> bytes:
    parts = [
        MAGIC_FTR,
        struct.pack("<III", fmap.width, fmap.height, fmap.dim),
        fmap.data.astype("<f4").tobytes(),
    ]
    if fmap.confidence is not None:
        parts.append(fmap.confidence.astype("<f4").tobytes())
    return b"".join(parts)


def read_features(path: PathLike) -> FeatureMap:
    with open(path, "rb") as f:
        blob = f.read()
    return _features_from_blob(blob, path)


def _features_from_blob(blob: bytes, path: PathLike) -> FeatureMap:
    if blob[:8] != MAGIC_FTR:
        raise FileFormatError(f"{path}: bad magic {blob[:8]!r}")
    width, height, dim = struct.unpack_from("<III", blob, 8)
    base = height * width * dim * 4
    conf_plane = height * width * 4
    body = blob[20:]
    if len(body) == base:
        confidence = None
    elif len(body) == base + conf_plane:
        confidence = np.frombuffer(body, dtype="<f4", count=height * width, offset=base)
        confidence = confidence.reshape(height, width)
    else:
        raise FileFormatError(
            f"{path}: payload of {len(body)} bytes matches neither "
            f"{base} (no confidence) nor {base + conf_plane} (with confidence)"
        )
    data = np.frombuffer(body, dtype="<f4", count=height * width * dim)
    return FeatureMap.from_array(data.reshape(height, width, dim), confidence=confidence)


def write_feature_pair(path: PathLike, tensor: np.ndarray) -> None:
    """Store a two-view tensor (2, H, W, D) as one DRKFTR file with height 2H."""
    tensor = np.asarray(tensor)
    if tensor.ndim != 4 or tensor.shape[0] != 2:
        raise ValueError("tensor must be (2, H, W, D)")
    _, h, w, d = tensor.shape
    write_features(path, FeatureMap.from_array(tensor.reshape(2 * h, w, d)))


def read_feature_pair(path: PathLike) -> np.ndarray:
    fmap = read_features(path)
    if fmap.height % 2:
        raise FileFormatError(f"{path}: view-pair file needs an even stored height")
    h = fmap.height // 2
    return fmap.data.reshape(2, h, fmap.width, fmap.dim)


def write_bundle(path: PathLike, tensors: tuple[np.ndarray, np.ndarray, np.ndarray]) -> None:
    """Concatenated container: three length-prefixed DRKFTR view-pair records."""
    blobs = []
    for t in tensors:
        t = np.asarray(t)
        _, h, w, d = t.shape
        blobs.append(_features_blob(FeatureMap.from_array(t.reshape(2 * h, w, d))))
    with open(path, "wb") as f:
        f.write(MAGIC_BDL)
        f.write(struct.pack("<I", len(blobs)))
        for blob in blobs:
            f.write(struct.pack("<Q", len(blob)))
            f.write(blob)


def read_bundle(path: PathLike) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path, "rb") as f:
        _check_magic(f, MAGIC_BDL, path)
        (count,) = struct.unpack("<I", _read_exact(f, 4, "record count"))
        if count != 3:
            raise FileFormatError(f"{path}: bundle must hold 3 records, found {count}")
        out = []
        for _ in range(count):
            (length,) = struct.unpack("<Q", _read_exact(f, 8, "record length"))
            fmap = _features_from_blob(_read_exact(f, length, "record"), path)
            if fmap.height % 2:
                raise FileFormatError(f"{path}: view-pair record with odd height")
            h = fmap.height // 2
            out.append(fmap.data.reshape(2, h, fmap.width, fmap.dim))
    return out[0], out[1], out[2]


BUNDLE_FILE_NAMES = ("encoder.drkftr", "decoder.drkftr", "correspondence.drkftr")


def write_feature_bundle(path: PathLike, bundle: FeatureBundle) -> None:
    """Write a bundle as three view-pair files in a directory, or one
    container file when the path ends in .drkbdl."""
    path = Path(path)
    if path.suffix == ".drkbdl":
        write_bundle(path, bundle.tensors())
        return
    path.mkdir(parents=True, exist_ok=True)
    for name, tensor in zip(BUNDLE_FILE_NAMES, bundle.tensors()):
        write_feature_pair(path / name, tensor)


def read_feature_bundle(path: PathLike) -> FeatureBundle:
    """Load a bundle from a directory of three view-pair files or a
    .drkbdl container."""
    path = Path(path)
    if path.is_dir():
        tensors = [read_feature_pair(path / name) for name in BUNDLE_FILE_NAMES]
    else:
        tensors = list(read_bundle(path))
    return FeatureBundle(
        encoder=tensors[0], decoder=tensors[1], correspondence=tensors[2]
    )


# -- pointmaps ---------------------------------------------------------------


def write_pointmap(path: PathLike, pmap: PointMap) -> None:
    planes = np.concatenate(
        [pmap.points[:, :, i] for i in range(3)] + [pmap.confidence], axis=None
    )
    with open(path, "wb") as f:
        f.write(MAGIC_PTS)
        f.write(struct.pack("<II", pmap.width, pmap.height))
        f.write(planes.astype("<f4").tobytes())


def read_pointmap(path: PathLike) -> PointMap:
    with open(path, "rb") as f:
        _check_magic(f, MAGIC_PTS, path)
        width, height = struct.unpack("<II", _read_exact(f, 8, "dims"))
        payload = _read_exact(f, 4 * height * width * 4, "planes")
    planes = np.frombuffer(payload, dtype="<f4").reshape(4, height, width)
    points = np.stack([planes[0], planes[1], planes[2]], axis=-1)
    return PointMap(width=width, height=height, points=points, confidence=planes[3])


# -- poses -------------------------------------------------------------------


def write_trajectory(path: PathLike, names: list[str], poses: list[Pose]) -> None:
    lines = ["# name tx ty tz qx qy qz qw (world-from-camera)"]
    for name, pose in zip(names, poses):
        t = pose.translation
        q = pose.rotation
        vals = " ".join(f"{v:.17g}" for v in (*t, *q))
        lines.append(f"{name} {vals}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory(path: PathLike) -> tuple[list[str], list[Pose]]:
    names: list[str] = []
    poses: list[Pose] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise FileFormatError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
        name = parts[0]
        tx, ty, tz, qx, qy, qz, qw = (float(v) for v in parts[1:])
        q = np.array([qx, qy, qz, qw])
        n = np.linalg.norm(q)
        if n == 0:
            raise FileFormatError(f"{path}:{lineno}: zero quaternion")
        names.append(name)
        poses.append(Pose(rotation=q / n, translation=np.array([tx, ty, tz])))
    return names, poses


# -- noise parameters --------------------------------------------------------


def write_noise_params(path: PathLike, params: NoiseParams) -> None:
    lines = ["# channel <index> a <slope DN/DN> b <intercept DN^2> clamped <0|1>"]
    for c in range(params.n_channels):
        lines.append(
            f"channel {c} a {params.a[c]:.17g} b {params.b[c]:.17g} "
            f"clamped {int(params.clamped[c])}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_noise_params(path: PathLike) -> NoiseParams:
    entries: dict[int, tuple[float, float, bool]] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 6 or parts[0] != "channel":
            raise FileFormatError(f"{path}:{lineno}: malformed noise-params line")
        kv = dict(zip(parts[2::2], parts[3::2]))
        try:
            channel = int(parts[1])
            a = float(kv["a"])
            b = float(kv["b"])
        except (KeyError, ValueError) as exc:
            raise FileFormatError(f"{path}:{lineno}: {exc}") from exc
        clamped = bool(int(kv.get("clamped", "0")))
        entries[channel] = (a, b, clamped)
    if not entries:
        raise FileFormatError(f"{path}: no channel entries")
    n = max(entries) + 1
    if set(entries) != set(range(n)):
        raise FileFormatError(f"{path}: channel indices must cover 0..{n - 1}")
    a = np.array([entries[c][0] for c in range(n)])
    b = np.array([entries[c][1] for c in range(n)])
    clamped = np.array([entries[c][2] for c in range(n)])
    return NoiseParams(a=a, b=b, clamped=clamped)


# -- correspondences ---------------------------------------------------------


def write_correspondences(path: PathLike, matches: list[Correspondence]) -> None:
    lines = ["# x1 y1 x2 y2 score"]
    for m in matches:
        lines.append(
            f"{m.p1[0]:.17g} {m.p1[1]:.17g} {m.p2[0]:.17g} {m.p2[1]:.17g} {m.score:.17g}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_correspondences(path: PathLike) -> list[Correspondence]:
    matches = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5:
            raise FileFormatError(f"{path}:{lineno}: expected 5 fields")
        x1, y1, x2, y2, score = (float(v) for v in parts)
        matches.append(Correspondence(p1=(x1, y1), p2=(x2, y2), score=score))
    return matches


# -- mean-variance samples (noise calibration input) --------------------------


def read_mean_var_csv(path: PathLike) -> list[tuple[int, float, float]]:
    """CSV with a 'channel,mean,variance' header; returns raw tuples."""
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"channel", "mean", "variance"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise FileFormatError(f"{path}: need columns channel,mean,variance")
        for rec in reader:
            rows.append((int(rec["channel"]), float(rec["mean"]), float(rec["variance"])))
    if not rows:
        raise FileFormatError(f"{path}: no samples")
    return rows


def write_mean_var_csv(path: PathLike, rows: list[tuple[int, float, float]]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["channel", "mean", "variance"])
        for channel, mean, variance in rows:
            writer.writerow([channel, f"{mean:.17g}", f"{variance:.17g}"])


# -- intrinsics --------------------------------------------------------------


def write_intrinsics(path: PathLike, entries: dict[str, Intrinsics]) -> None:
    lines = ["# name fx fy cx cy ('*' applies to every image)"]
    for name, k in entries.items():
        lines.append(f"{name} {k.fx:.17g} {k.fy:.17g} {k.cx:.17g} {k.cy:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_intrinsics(path: PathLike) -> tuple[dict[str, Intrinsics], Intrinsics | None]:
    """Returns (per-image intrinsics, wildcard default or None)."""
    named: dict[str, Intrinsics] = {}
    default: Intrinsics | None = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5:
            raise FileFormatError(f"{path}:{lineno}: expected 'name fx fy cx cy'")
        k = Intrinsics(*(float(v) for v in parts[1:]))
        if parts[0] == "*":
            default = k
        else:
            named[parts[0]] = k
    if not named and default is None:
        raise FileFormatError(f"{path}: no intrinsics entries")
    return named, default


# -- point cloud and preview outputs -----------------------------------------


def write_ply(path: PathLike, points: np.ndarray, colors: np.ndarray | None = None) -> None:
    """ASCII PLY with optional per-point uint8 RGB."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if colors is not None:
        colors = np.asarray(colors)
        if colors.shape != points.shape:
            raise ValueError("colors must be (N, 3)")
        colors = np.clip(np.rint(colors), 0, 255).astype(np.uint8)
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {points.shape[0]}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if colors is not None:
        header += [
            "property uchar red",
            "property uchar green",
            "property uchar blue",
        ]
    header.append("end_header")
    lines = header
    for i in range(points.shape[0]):
        xyz = " ".join(f"{v:.9g}" for v in points[i])
        if colors is not None:
            rgb = " ".join(str(int(v)) for v in colors[i])
            lines.append(f"{xyz} {rgb}")
        else:
            lines.append(xyz)
    Path(path).write_text("\n".join(lines) + "\n")


def _png_chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def write_png(path: PathLike, img: LinearImage) -> None:
    """8-bit RGB PNG preview; samples are clamped to [0, 1] and quantized."""
    if img.channels not in (1, 3):
        raise ValueError("PNG preview supports 1 or 3 channels")
    data = np.clip(img.data, 0.0, 1.0)
    if img.channels == 1:
        data = np.repeat(data, 3, axis=0)
    rgb8 = np.rint(data * 255.0).astype(np.uint8).transpose(1, 2, 0)
    raw = b"".join(b"\x00" + rgb8[y].tobytes() for y in range(img.height))
    ihdr = struct.pack(">IIBBBBB", img.width, img.height, 8, 2, 0, 0, 0)
    blob = b"".join(
        [
            b"\x89PNG\r\n\x1a\n",
            _png_chunk(b"IHDR", ihdr),
            _png_chunk(b"IDAT", zlib.compress(raw, 6)),
            _png_chunk(b"IEND", b""),
        ]
    )
    Path(path).write_bytes(blob)
