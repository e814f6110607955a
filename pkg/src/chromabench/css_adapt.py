"""Camera-sensitivity adaptation with a 3x3 sensor-space transform.

A transform ``S`` from camera 1 to camera 2 is fitted so that, for every
training reflectance, ``rgb2 ~= S @ rgb1``. Training images and their
ground-truth illuminants from camera 1 are then mapped with ``S`` before a
color-constancy model is fitted, and the model is applied to camera-2 images
unchanged.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateError
from .spectra import DEFAULT_GRID, CssFunction, SpectralGrid, Spectrum, render_reflectance_matrix, sample_many
from .synth import DEGENERATE_TOL, GroundTruth, LabeledDataset, LinearImage, correct_diagonal

logger = logging.getLogger(__name__)

COND_WARN = 1e6


@dataclass(frozen=True)
class Transform3:
    """A 3x3 map acting on column RGB vectors, tagged with its camera pair."""

    m: NDArray[np.float64]
    from_camera: str = ""
    to_camera: str = ""

    def __post_init__(self) -> None:
        m = np.array(self.m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"transform must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("transform entries must be finite")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)
        if self.condition_number > COND_WARN:
            warnings.warn(
                f"ill-conditioned transform {self.from_camera!r}->{self.to_camera!r} "
                f"(cond {self.condition_number:.3g})",
                RuntimeWarning,
                stacklevel=2,
            )

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.m))

    @classmethod
    def identity(cls, from_camera: str = "", to_camera: str = "") -> "Transform3":
        return cls(np.eye(3), from_camera, to_camera)

    def apply(self, rgb: ArrayLike) -> NDArray[np.float64]:
        """Map RGB vectors stored along the last axis."""
        return np.asarray(rgb, dtype=float) @ self.m.T

    def then(self, other: "Transform3") -> "Transform3":
        """``other`` after ``self``."""
        return Transform3(other.m @ self.m, self.from_camera, other.to_camera)

    def inverse(self) -> "Transform3":
        return Transform3(np.linalg.inv(self.m), self.to_camera, self.from_camera)


def learn_css_transform(
    css1: CssFunction,
    css2: CssFunction,
    refls: Sequence[Spectrum],
    grid: SpectralGrid = DEFAULT_GRID,
) -> Transform3:
    """Least-squares ``S`` with ``rgb2 ~= S @ rgb1`` over the given reflectances.

    Responses are rendered under an equal-energy light, so the fit depends
    only on the two cameras and the reflectance set.
    """
    if len(refls) < 3:
        raise ValueError(f"underdetermined: need at least 3 reflectances, got {len(refls)}")
    R = sample_many(refls, grid)
    f1 = render_reflectance_matrix(css1, None, R, grid)
    f2 = render_reflectance_matrix(css2, None, R, grid)
    if np.linalg.matrix_rank(f1) < 3:
        raise ValueError(f"responses of camera {css1.camera_id!r} are rank deficient")
    st, *_ = np.linalg.lstsq(f1, f2, rcond=None)
    return Transform3(st.T, css1.camera_id, css2.camera_id)


def _check_source(camera_id: str, S: Transform3) -> None:
    if S.from_camera and camera_id and S.from_camera != camera_id:
        warnings.warn(
            f"transform expects camera {S.from_camera!r}, image is from {camera_id!r}",
            RuntimeWarning,
            stacklevel=3,
        )


def adapt_image(img: LinearImage, S: Transform3) -> LinearImage:
    """Apply ``S`` to every pixel, clamp negatives to zero, relabel the camera."""
    _check_source(img.camera_id, S)
    px = np.maximum(S.apply(img.pixels), 0.0)
    return img.with_pixels(px, camera_id=S.to_camera or img.camera_id)


def adapt_dataset(ds: LabeledDataset, S: Transform3) -> LabeledDataset:
    """Map images and ground truths of ``ds`` into the target camera.

    Adapted illuminants are clamped at zero and renormalised; an item whose
    illuminant maps to zero is dropped.
    """
    _check_source(ds.camera_id, S)
    to = S.to_camera or ds.camera_id
    items = []
    for img, gt in ds.items:
        e = S.apply(gt.illuminant_rgb)
        if np.any(e < 0):
            warnings.warn(
                f"{ds.name}/{img.scene_id}: adapted illuminant {e} has negative components, clamped",
                RuntimeWarning,
                stacklevel=2,
            )
            e = np.maximum(e, 0.0)
        if np.linalg.norm(e) <= DEGENERATE_TOL:
            warnings.warn(f"{ds.name}/{img.scene_id}: adapted illuminant is zero, item dropped",
                          RuntimeWarning, stacklevel=2)
            continue
        items.append((adapt_image(img, S), GroundTruth(e, gt.source)))
    if not items:
        raise ValueError(f"dataset {ds.name!r} is empty after adaptation")
    if len(items) < len(ds.items):
        logger.warning("adapt_dataset(%s): dropped %d items", ds.name, len(ds.items) - len(items))
    return LabeledDataset(items, to, f"{ds.name}@{to}")


def stable_representation(
    img: LinearImage, est_illum: ArrayLike, S: Transform3, order: str = "adapt-first"
) -> LinearImage:
    """Remove both the light and the camera: the scene as the reference camera sees it under white.

    ``order="adapt-first"`` maps the image with ``S`` and then divides by the
    mapped illuminant ``S @ est_illum``. ``"correct-first"`` divides by
    ``est_illum`` in the source camera and maps afterwards; the two agree only
    when both cameras respond achromatically to an equal-energy light.
    """
    e = np.asarray(est_illum, dtype=float)
    if np.any(e <= 0):
        raise DegenerateError(f"illuminant estimate must be strictly positive, got {e}")
    if order == "correct-first":
        return adapt_image(correct_diagonal(img, e), S)
    if order != "adapt-first":
        raise ValueError(f"unknown order {order!r}")
    return correct_diagonal(adapt_image(img, S), S.apply(e))
