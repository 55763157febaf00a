"""Rendering of the CNN-path inputs.

Five encodings: scanpath, heatmap, RGB+heatmap (4 channels), grayscale+
heatmap (2 channels), RGB x heatmap (3 channels), at 700x700 or resized
to 256x256.  All pixel values live in [0, 1].
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .core import ScreenGeometry, TrialRecord

VALID_SIDES = (256, 700)
TENSOR_MAGIC = b"GZRT"


class RasterError(Exception):
    pass


class EmptyTrial(RasterError):
    pass


class DimensionMismatch(RasterError):
    pass


class UnsupportedSize(RasterError):
    pass


class Encoding(str, enum.Enum):
    SCANPATH = "scanpath"
    HEATMAP = "heatmap"
    RGB_PLUS_HEATMAP = "rgb+heat"
    GS_PLUS_HEATMAP = "gs+heat"
    RGB_TIMES_HEATMAP = "rgbxheat"

    @property
    def channels(self) -> int:
        return {
            Encoding.SCANPATH: 1,
            Encoding.HEATMAP: 1,
            Encoding.RGB_PLUS_HEATMAP: 4,
            Encoding.GS_PLUS_HEATMAP: 2,
            Encoding.RGB_TIMES_HEATMAP: 3,
        }[self]


@dataclass(frozen=True)
class HeatmapKernelParams:
    mu_x: float
    mu_y: float
    sigma_x: float
    sigma_y: float

    def __post_init__(self) -> None:
        if self.sigma_x <= 0 or self.sigma_y <= 0:
            raise ValueError("kernel sigmas must be positive")


def heatmap_kernel(params: HeatmapKernelParams, x, y):
    """Bivariate normal density centered on the gaze point."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    zx = (x - params.mu_x) / params.sigma_x
    zy = (y - params.mu_y) / params.sigma_y
    return np.exp(-0.5 * (zx**2 + zy**2)) / (2.0 * math.pi * params.sigma_x * params.sigma_y)


@dataclass
class RasterInput:
    encoding: Encoding
    side_px: int
    pixels: np.ndarray  # (channels, side, side) float32 in [0, 1]

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.side_px not in VALID_SIDES:
            raise UnsupportedSize(f"side must be one of {VALID_SIDES}, got {self.side_px}")
        expected = (self.encoding.channels, self.side_px, self.side_px)
        if self.pixels.shape != expected:
            raise DimensionMismatch(f"expected {expected}, got {self.pixels.shape}")
        if self.pixels.size and (self.pixels.min() < 0.0 or self.pixels.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")


def _image_points(trial: TrialRecord, geom: ScreenGeometry) -> np.ndarray:
    """Cyclopean gaze in image coordinates, restricted to the image area."""
    x0, y0 = geom.image_origin
    pts = []
    for s in trial.samples:
        if not s.valid:
            continue
        cx, cy = s.cyclopean()
        if geom.in_image(cx, cy):
            pts.append((cx - x0, cy - y0))
    return np.array(pts, dtype=np.float64).reshape(-1, 2)


def _accumulate_kernels(points: np.ndarray, side: int, sigma: float) -> np.ndarray:
    """Sum of per-point Gaussian kernels on a side x side pixel grid.

    Points are splatted bilinearly onto the grid and convolved with a
    separable kernel truncated at +/-4 sigma (peak error below 1e-4).
    """
    canvas = np.zeros((side, side), dtype=np.float64)
    xs, ys = points[:, 0], points[:, 1]
    x0 = np.clip(np.floor(xs).astype(int), 0, side - 2)
    y0 = np.clip(np.floor(ys).astype(int), 0, side - 2)
    fx = np.clip(xs - x0, 0.0, 1.0)
    fy = np.clip(ys - y0, 0.0, 1.0)
    np.add.at(canvas, (y0, x0), (1 - fx) * (1 - fy))
    np.add.at(canvas, (y0, x0 + 1), fx * (1 - fy))
    np.add.at(canvas, (y0 + 1, x0), (1 - fx) * fy)
    np.add.at(canvas, (y0 + 1, x0 + 1), fx * fy)

    radius = int(math.ceil(4.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel_1d = np.exp(-0.5 * (offsets / sigma) ** 2) / (math.sqrt(2.0 * math.pi) * sigma)
    return cv2.sepFilter2D(canvas, -1, kernel_1d, kernel_1d, borderType=cv2.BORDER_CONSTANT)


def _min_max(field: np.ndarray) -> np.ndarray:
    lo, hi = float(field.min()), float(field.max())
    if hi - lo <= 0.0:
        return np.zeros_like(field, dtype=np.float32)
    return ((field - lo) / (hi - lo)).astype(np.float32)


def render_heatmap(
    trial: TrialRecord, geom: ScreenGeometry, sigma_deg: float = 1.0
) -> RasterInput:
    """Gaze density map over the image area, min-max normalized per trial."""
    points = _image_points(trial, geom)
    if len(points) == 0:
        raise EmptyTrial("no retained in-image samples to render")
    sigma = sigma_deg * geom.px_per_degree
    field = _accumulate_kernels(points, geom.image_side_px, sigma)
    pixels = _min_max(field)[np.newaxis, :, :]
    return RasterInput(Encoding.HEATMAP, geom.image_side_px, pixels)


@dataclass(frozen=True)
class Fixation:
    x: float
    y: float
    t_start_ms: float
    t_end_ms: float

    @property
    def duration_ms(self) -> float:
        return self.t_end_ms - self.t_start_ms


def detect_fixations_idt(
    trial: TrialRecord,
    geom: ScreenGeometry,
    dispersion_deg: float = 1.0,
    min_duration_ms: float = 100.0,
) -> list[Fixation]:
    """Dispersion-threshold (I-DT) fixation detection on cyclopean gaze."""
    valid = trial.valid_samples()
    if not valid:
        return []
    t = np.array([s.t_ms for s in valid])
    xy = np.array([s.cyclopean() for s in valid])
    threshold = dispersion_deg * geom.px_per_degree

    def dispersion(window: np.ndarray) -> float:
        return float(np.ptp(window[:, 0]) + np.ptp(window[:, 1]))

    fixations: list[Fixation] = []
    i = 0
    n = len(valid)
    while i < n:
        # initial window spanning at least the minimum duration
        j = i
        while j + 1 < n and t[j + 1] - t[i] <= min_duration_ms:
            j += 1
        if t[j] - t[i] < min_duration_ms:
            break  # tail too short for another fixation
        if dispersion(xy[i : j + 1]) <= threshold:
            while j + 1 < n and dispersion(xy[i : j + 2]) <= threshold:
                j += 1
            center = xy[i : j + 1].mean(axis=0)
            fixations.append(Fixation(float(center[0]), float(center[1]), float(t[i]), float(t[j])))
            i = j + 1
        else:
            i += 1
    return fixations


def render_scanpath(trial: TrialRecord, geom: ScreenGeometry, side: int = 700) -> RasterInput:
    """White-on-black fixation discs joined by 1 px segments, in time order.

    Disc radius grows with fixation duration: 2 px + 6 px x duration/3000 ms
    (defined on the 700 px canvas).  Drawn from I-DT fixations; a trial with
    no detectable fixation falls back to one fixation at the mean position.
    """
    if not trial.valid_samples():
        raise EmptyTrial("no retained samples to render")
    if side not in VALID_SIDES:
        raise UnsupportedSize(f"side must be one of {VALID_SIDES}")

    fixations = detect_fixations_idt(trial, geom)
    if not fixations:
        valid = trial.valid_samples()
        xy = np.array([s.cyclopean() for s in valid])
        center = xy.mean(axis=0)
        fixations = [Fixation(center[0], center[1], valid[0].t_ms, valid[-1].t_ms)]

    x0, y0 = geom.image_origin
    canvas = np.zeros((geom.image_side_px, geom.image_side_px), dtype=np.uint8)
    centers = [
        (int(round(f.x - x0)), int(round(f.y - y0))) for f in fixations
    ]
    for a, b in zip(centers, centers[1:]):
        cv2.line(canvas, a, b, 255, 1, lineType=cv2.LINE_8)
    for f, c in zip(fixations, centers):
        radius = int(round(2.0 + 6.0 * f.duration_ms / 3000.0))
        cv2.circle(canvas, c, radius, 255, -1, lineType=cv2.LINE_8)

    raster = RasterInput(
        Encoding.SCANPATH, geom.image_side_px, (canvas / 255.0).astype(np.float32)[None]
    )
    if side != geom.image_side_px:
        raster = resize(raster, side)
    return raster


def render_fusion(
    trial: TrialRecord,
    stimulus: np.ndarray,
    encoding: Encoding,
    geom: ScreenGeometry,
    sigma_deg: float = 1.0,
) -> RasterInput:
    """Combine the stimulus image with the trial's gaze heatmap.

    ``stimulus`` is (side, side, 3) RGB in [0, 1].
    """
    side = geom.image_side_px
    stimulus = np.asarray(stimulus, dtype=np.float32)
    if stimulus.shape != (side, side, 3):
        raise DimensionMismatch(f"stimulus must be ({side}, {side}, 3), got {stimulus.shape}")
    heat = render_heatmap(trial, geom, sigma_deg).pixels[0]
    rgb = stimulus.transpose(2, 0, 1)

    if encoding == Encoding.RGB_PLUS_HEATMAP:
        pixels = np.concatenate([rgb, heat[None]], axis=0)
    elif encoding == Encoding.GS_PLUS_HEATMAP:
        gs = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
        pixels = np.stack([gs, heat], axis=0)
    elif encoding == Encoding.RGB_TIMES_HEATMAP:
        pixels = rgb * heat[None]
    else:
        raise ValueError(f"{encoding} is not a fusion encoding")
    return RasterInput(encoding, side, np.clip(pixels, 0.0, 1.0))


def resize(raster: RasterInput, target_side: int) -> RasterInput:
    """Bilinear per-channel resize between the two supported sides."""
    if target_side not in VALID_SIDES:
        raise UnsupportedSize(f"target side must be one of {VALID_SIDES}")
    if target_side == raster.side_px:
        return raster
    channels = [
        cv2.resize(c, (target_side, target_side), interpolation=cv2.INTER_LINEAR)
        for c in raster.pixels
    ]
    pixels = np.clip(np.stack(channels, axis=0), 0.0, 1.0)
    return RasterInput(raster.encoding, target_side, pixels)


def _to_u8(channel: np.ndarray) -> np.ndarray:
    return np.clip(np.round(channel * 255.0), 0, 255).astype(np.uint8)


def save_raster_png(raster: RasterInput, path: Path) -> list[Path]:
    """Emit 8-bit PNG(s); 2-channel encodings split into _gs/_heat files."""
    from PIL import Image

    path = Path(path)
    c = raster.pixels.shape[0]
    if c == 2:
        gs_path = path.with_name(path.stem + "_gs.png")
        heat_path = path.with_name(path.stem + "_heat.png")
        Image.fromarray(_to_u8(raster.pixels[0]), mode="L").save(gs_path)
        Image.fromarray(_to_u8(raster.pixels[1]), mode="L").save(heat_path)
        return [gs_path, heat_path]
    if c == 1:
        img = Image.fromarray(_to_u8(raster.pixels[0]), mode="L")
    elif c == 3:
        img = Image.fromarray(_to_u8(raster.pixels).transpose(1, 2, 0), mode="RGB")
    elif c == 4:
        img = Image.fromarray(_to_u8(raster.pixels).transpose(1, 2, 0), mode="RGBA")
    else:
        raise DimensionMismatch(f"cannot emit PNG for {c} channels")
    img.save(path)
    return [path]


def save_tensor(raster: RasterInput, path: Path) -> None:
    """Binary sidecar: magic GZRT, u32 channels, u32 side, f32 LE pixels."""
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<II", raster.pixels.shape[0], raster.side_px))
        fh.write(raster.pixels.astype("<f4").tobytes())


def load_tensor(path: Path, encoding: Encoding) -> RasterInput:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != TENSOR_MAGIC:
            raise RasterError(f"{path}: bad magic {magic!r}")
        channels, side = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != channels * side * side:
        raise RasterError(f"{path}: truncated tensor payload")
    return RasterInput(encoding, side, data.reshape(channels, side, side).copy())
