"""Labelled image data: Mondrian-like scenes, rendered spectral cubes, diagonal model."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateError
from .spectra import (
    DEFAULT_GRID,
    CssFunction,
    SpectralGrid,
    Spectrum,
    render_reflectance_matrix,
    sample_many,
    sensor_response,
)

logger = logging.getLogger(__name__)

DEGENERATE_TOL = 1e-12
SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class LinearImage:
    """Linear camera RGB raster of shape ``(height, width, 3)``.

    ``mask`` marks the pixels that may be used for statistics (``True`` =
    valid); ``None`` means every pixel is valid.
    """

    pixels: NDArray[np.float64]
    camera_id: str = ""
    scene_id: str = ""
    illuminant_id: str = ""
    mask: NDArray[np.bool_] | None = None

    def __post_init__(self) -> None:
        px = np.array(self.pixels, dtype=float)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"pixels must have shape (H, W, 3), got {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValueError("pixels must be finite")
        if np.any(px < 0):
            raise ValueError("pixels must be nonnegative")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        if self.mask is not None:
            m = np.array(self.mask, dtype=bool)
            if m.shape != px.shape[:2]:
                raise ValueError("mask shape must match the image")
            m.setflags(write=False)
            object.__setattr__(self, "mask", m)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def valid(self) -> NDArray[np.bool_]:
        if self.mask is None:
            return np.ones(self.pixels.shape[:2], dtype=bool)
        return self.mask

    def valid_pixels(self) -> NDArray[np.float64]:
        """Unmasked pixels as an ``(N, 3)`` array."""
        if self.mask is None:
            return self.pixels.reshape(-1, 3)
        return self.pixels[self.mask]

    def with_pixels(self, pixels: ArrayLike, **meta) -> "LinearImage":
        return replace(self, pixels=pixels, **meta)


def box_mask(height: int, width: int, box: tuple[int, int, int, int]) -> NDArray[np.bool_]:
    """Valid-pixel mask excluding the half-open rectangle ``x0 <= x < x1, y0 <= y < y1``."""
    x0, y0, x1, y1 = box
    m = np.ones((height, width), dtype=bool)
    m[max(y0, 0):max(y1, 0), max(x0, 0):max(x1, 0)] = False
    return m


@dataclass(frozen=True)
class GroundTruth:
    """Illuminant colour as seen by the camera, stored with unit L2 norm."""

    illuminant_rgb: NDArray[np.float64]
    source: str = "rendered"

    def __post_init__(self) -> None:
        v = np.array(self.illuminant_rgb, dtype=float).reshape(3)
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError(f"ground-truth illuminant must be finite and nonnegative: {v}")
        n = np.linalg.norm(v)
        if n <= DEGENERATE_TOL:
            raise DegenerateError("ground-truth illuminant is zero")
        v = v / n
        v.setflags(write=False)
        object.__setattr__(self, "illuminant_rgb", v)
        if self.source not in ("rendered", "dataset-provided"):
            raise ValueError(f"unknown ground-truth source {self.source!r}")


@dataclass
class LabeledDataset:
    """Images from one camera paired with their ground-truth illuminants."""

    items: list[tuple[LinearImage, GroundTruth]]
    camera_id: str
    name: str

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError(f"dataset {self.name!r} is empty")
        for img, _ in self.items:
            if img.camera_id != self.camera_id:
                raise ValueError(
                    f"dataset {self.name!r}: image {img.scene_id!r} from camera "
                    f"{img.camera_id!r}, expected {self.camera_id!r}"
                )

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[tuple[LinearImage, GroundTruth]]:
        return iter(self.items)

    def targets(self) -> NDArray[np.float64]:
        return np.stack([gt.illuminant_rgb for _, gt in self.items])

    def subset(self, idx: Sequence[int], name: str | None = None) -> "LabeledDataset":
        return LabeledDataset([self.items[i] for i in idx], self.camera_id, name or self.name)


@dataclass(frozen=True)
class HyperspectralCube:
    """Per-pixel spectral reflectance ``data`` of shape ``(height, width, bands)``."""

    bands: NDArray[np.float64]
    data: NDArray[np.float64]
    cube_id: str = ""

    def __post_init__(self) -> None:
        bands = np.array(self.bands, dtype=float)
        data = np.array(self.data, dtype=float)
        if bands.ndim != 1 or bands.size == 0 or (bands.size > 1 and np.any(np.diff(bands) <= 0)):
            raise ValueError("cube band wavelengths must be strictly increasing")
        if data.ndim != 3 or data.shape[2] != bands.size:
            raise ValueError(f"cube data shape {data.shape} does not match {bands.size} bands")
        if not np.all(np.isfinite(data)) or np.any(data < 0):
            raise ValueError("cube data must be finite and nonnegative")
        bands.setflags(write=False)
        data.setflags(write=False)
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class MondrianParams:
    """Canvas size and the sampling ranges of the scene generator."""

    width: int = 300
    height: int = 300
    patch_count: tuple[int, int] = (5, 40)
    gabor_amplitude: tuple[float, float] = (0.0, 0.3)
    gabor_wavelength: tuple[float, float] = (20.0, 150.0)
    gabor_sigma: tuple[float, float] = (20.0, 100.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("canvas dimensions must be positive")
        for name in ("patch_count", "gabor_amplitude", "gabor_wavelength", "gabor_sigma"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: empty range ({lo}, {hi})")
        if self.patch_count[0] < 0:
            raise ValueError("patch_count must be nonnegative")
        if self.gabor_amplitude[0] < 0:
            raise ValueError("gabor amplitude must be nonnegative")
        if self.gabor_wavelength[0] <= 0 or self.gabor_sigma[0] <= 0:
            raise ValueError("gabor wavelength and sigma must be positive")


@dataclass(frozen=True)
class MondrianLayout:
    """Camera-independent part of a Mondrian scene.

    ``labels[y, x]`` is the index of the top-most patch (0 is the base patch
    covering the canvas); ``patch_reflectance[k]`` indexes the reflectance list;
    ``luminance`` is the nonnegative brightness field.
    """

    labels: NDArray[np.int64]
    patch_reflectance: NDArray[np.int64]
    illuminant_index: int
    luminance: NDArray[np.float64]
    rectangles: list[tuple[int, int, int, int]] = field(default_factory=list)


def gabor_field(
    height: int,
    width: int,
    amplitude: float,
    theta: float,
    wavelength: float,
    phase: float,
    sigma: float,
    center: tuple[float, float],
) -> NDArray[np.float64]:
    """``max(0, 1 + amplitude * G)`` with ``G`` a unit-amplitude Gabor grating."""
    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    dx, dy = xx - center[0], yy - center[1]
    u = dx * math.cos(theta) + dy * math.sin(theta)
    g = np.exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) * np.cos(2 * math.pi * u / wavelength + phase)
    return np.maximum(1.0 + amplitude * g, 0.0)


def mondrian_layout(
    params: MondrianParams, n_refls: int, n_illums: int, rng: np.random.Generator
) -> MondrianLayout:
    """Draw patch geometry, reflectance picks, illuminant pick and luminance field.

    Only the counts of the spectral libraries enter, so the same generator
    state yields the same scene for any camera.
    """
    if n_refls < 1 or n_illums < 1:
        raise ValueError("need at least one reflectance and one illuminant")
    h, w = params.height, params.width
    illum = int(rng.integers(n_illums))
    n = int(rng.integers(params.patch_count[0], params.patch_count[1] + 1))
    labels = np.zeros((h, w), dtype=np.int64)
    rects = [(0, 0, w, h)]
    for k in range(1, n + 1):
        rw = int(rng.integers(max(1, w // 20), max(2, w // 2) + 1))
        rh = int(rng.integers(max(1, h // 20), max(2, h // 2) + 1))
        x0 = int(rng.integers(0, max(1, w - rw + 1)))
        y0 = int(rng.integers(0, max(1, h - rh + 1)))
        labels[y0:y0 + rh, x0:x0 + rw] = k
        rects.append((x0, y0, x0 + rw, y0 + rh))
    picks = rng.integers(n_refls, size=n + 1)
    amp = float(rng.uniform(*params.gabor_amplitude))
    lum = gabor_field(
        h,
        w,
        amp,
        theta=float(rng.uniform(0, math.pi)),
        wavelength=float(rng.uniform(*params.gabor_wavelength)),
        phase=float(rng.uniform(0, 2 * math.pi)),
        sigma=float(rng.uniform(*params.gabor_sigma)),
        center=(float(rng.uniform(0, w)), float(rng.uniform(0, h))),
    )
    return MondrianLayout(labels, picks, illum, lum, rects)


def render_layout(
    layout: MondrianLayout,
    refl_matrix: NDArray[np.float64],
    illums: Sequence[Spectrum],
    css: CssFunction,
    grid: SpectralGrid = DEFAULT_GRID,
    scene_id: str = "",
) -> tuple[LinearImage, GroundTruth]:
    illum = illums[layout.illuminant_index]
    rgb = render_reflectance_matrix(css, illum, refl_matrix[layout.patch_reflectance], grid)
    px = rgb[layout.labels] * layout.luminance[..., None]
    gt = GroundTruth(sensor_response(css, illum, grid), "rendered")
    return LinearImage(px, css.camera_id, scene_id, illum.id), gt


def synth_mondrian(
    params: MondrianParams,
    refls: Sequence[Spectrum],
    illums: Sequence[Spectrum],
    css: CssFunction,
    rng: np.random.Generator,
    grid: SpectralGrid = DEFAULT_GRID,
    scene_id: str = "",
) -> tuple[LinearImage, GroundTruth]:
    """One Mondrian-like image of random rectangles under a random light."""
    if not refls or not illums:
        raise ValueError("need at least one reflectance and one illuminant")
    layout = mondrian_layout(params, len(refls), len(illums), rng)
    return render_layout(layout, sample_many(refls, grid), illums, css, grid, scene_id)


def _mondrian_item(args):
    i, params, refl_matrix, illums, css, grid = args
    rng = np.random.default_rng([params.seed, i])
    layout = mondrian_layout(params, len(refl_matrix), len(illums), rng)
    return render_layout(layout, refl_matrix, illums, css, grid, scene_id=f"mondrian{i:05d}")


def mondrian_dataset(
    n: int,
    params: MondrianParams,
    refls: Sequence[Spectrum],
    illums: Sequence[Spectrum],
    css: CssFunction,
    grid: SpectralGrid = DEFAULT_GRID,
    name: str | None = None,
    jobs: int = 1,
    start: int = 0,
) -> LabeledDataset:
    """``n`` Mondrian scenes; scene ``i`` is drawn from a generator seeded by ``(params.seed, i)``.

    The per-index seeding makes serial and parallel runs identical and makes
    datasets for different cameras share every scene.
    """
    R = sample_many(refls, grid)
    tasks = [(i, params, R, list(illums), css, grid) for i in range(start, start + n)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            items = list(ex.map(_mondrian_item, tasks, chunksize=max(1, n // (4 * jobs))))
    else:
        items = [_mondrian_item(t) for t in tasks]
    return LabeledDataset(items, css.camera_id, name or f"mondrian-{css.camera_id}")


def _band_interp_matrix(src: NDArray[np.float64], dst: NDArray[np.float64]) -> NDArray[np.float64]:
    """Matrix ``W`` with ``values_on_dst = W @ values_on_src`` (linear, zero outside ``src``)."""
    eye = np.eye(src.size)
    return np.stack([np.interp(dst, src, eye[:, j], left=0.0, right=0.0) for j in range(src.size)], axis=1)


def render_hyperspectral(
    cube: HyperspectralCube,
    illum: Spectrum,
    css: CssFunction,
    grid: SpectralGrid = DEFAULT_GRID,
) -> tuple[LinearImage, GroundTruth]:
    """Render every pixel spectrum of ``cube`` under ``illum`` through ``css``."""
    wl = grid.wavelengths
    if cube.bands[-1] < wl[0] or cube.bands[0] > wl[-1]:
        raise ValueError(
            f"cube {cube.cube_id!r} bands {cube.bands[0]:g}-{cube.bands[-1]:g} nm "
            f"do not overlap the grid {wl[0]:g}-{wl[-1]:g} nm"
        )
    W = _band_interp_matrix(cube.bands, wl)
    refl = cube.data @ W.T
    px = render_reflectance_matrix(css, illum, refl, grid)
    gt = GroundTruth(sensor_response(css, illum, grid), "rendered")
    return LinearImage(px, css.camera_id, cube.cube_id, illum.id), gt


def hyperspectral_dataset(
    cubes: Sequence[HyperspectralCube],
    illums: Sequence[Spectrum],
    css: CssFunction,
    grid: SpectralGrid = DEFAULT_GRID,
    name: str | None = None,
) -> LabeledDataset:
    """Every cube under every illuminant, cube-major order."""
    items = [render_hyperspectral(c, il, css, grid) for c in cubes for il in illums]
    return LabeledDataset(items, css.camera_id, name or f"hyper-{css.camera_id}")


def _unit_illuminant(illum_rgb: ArrayLike) -> NDArray[np.float64]:
    e = np.asarray(illum_rgb, dtype=float).reshape(3)
    n = np.linalg.norm(e)
    if not np.all(np.isfinite(e)) or n <= DEGENERATE_TOL:
        raise DegenerateError(f"degenerate illuminant {e}")
    e = e / n
    if np.any(e <= DEGENERATE_TOL):
        raise DegenerateError(f"degenerate illuminant {e}: every channel must be positive")
    return e


def correct_diagonal(img: LinearImage, illum_rgb: ArrayLike) -> LinearImage:
    """Divide each channel by ``sqrt(3)`` times the unit illuminant.

    A white light ``(1, 1, 1) / sqrt(3)`` is therefore an exact no-op.
    """
    e = _unit_illuminant(illum_rgb)
    return img.with_pixels(img.pixels / (SQRT3 * e))


def apply_diagonal(img: LinearImage, illum_rgb: ArrayLike) -> LinearImage:
    """Inverse of :func:`correct_diagonal`: cast the illuminant onto a white-balanced image."""
    e = _unit_illuminant(illum_rgb)
    return img.with_pixels(img.pixels * (SQRT3 * e))
