"""Spectral curves with resampling, plus the linear image-formation integrals.

Everything here is discretised on a :class:`SpectralGrid`. Integrals over the
visible range are Riemann sums evaluated at the grid samples, so for a grid of
``n`` samples with step ``h`` the response of channel ``c`` to a spectral power
distribution ``e`` is ``sum_k S_c(l_k) e(l_k) h``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import SpectraFormatError

logger = logging.getLogger(__name__)

Kind = Literal["reflectance", "illuminant", "css"]

REFLECTANCE_MAX = 1.5


def _frozen(a: ArrayLike) -> NDArray[np.float64]:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_grid(wl: NDArray[np.float64]) -> None:
    if wl.ndim != 1 or wl.size == 0:
        raise ValueError("wavelength grid must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(wl)):
        raise ValueError("wavelength grid contains non-finite values")
    if wl.size > 1 and np.any(np.diff(wl) <= 0):
        raise ValueError("non-increasing grid: wavelengths must be strictly increasing")


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform wavelength sampling ``start_nm, start_nm + step_nm, ..., end_nm``."""

    start_nm: float = 400.0
    end_nm: float = 700.0
    step_nm: float = 10.0

    def __post_init__(self) -> None:
        if not self.start_nm < self.end_nm:
            raise ValueError("grid start must be below grid end")
        if not self.step_nm > 0:
            raise ValueError("grid step must be positive")
        n = (self.end_nm - self.start_nm) / self.step_nm
        if abs(n - round(n)) > 1e-9 * max(1.0, abs(n)):
            raise ValueError("(end - start) / step must be integral")

    @property
    def count(self) -> int:
        return int(round((self.end_nm - self.start_nm) / self.step_nm)) + 1

    @property
    def wavelengths(self) -> NDArray[np.float64]:
        return self.start_nm + self.step_nm * np.arange(self.count)


DEFAULT_GRID = SpectralGrid(400.0, 700.0, 10.0)


@dataclass(frozen=True)
class Spectrum:
    """A sampled reflectance or spectral power distribution."""

    wavelengths_nm: NDArray[np.float64]
    values: NDArray[np.float64]
    id: str = ""
    kind: str = "generic"

    def __post_init__(self) -> None:
        wl = _frozen(self.wavelengths_nm)
        v = _frozen(self.values)
        _check_grid(wl)
        if v.shape != wl.shape:
            raise ValueError(
                f"spectrum {self.id!r}: {v.size} values for {wl.size} wavelengths"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError(f"spectrum {self.id!r}: non-finite values")
        if np.any(v < 0):
            raise ValueError(f"spectrum {self.id!r}: negative values")
        if self.kind == "reflectance" and np.any(v > REFLECTANCE_MAX):
            raise ValueError(
                f"reflectance {self.id!r} exceeds {REFLECTANCE_MAX} "
                f"(max {float(v.max()):.4g})"
            )
        object.__setattr__(self, "wavelengths_nm", wl)
        object.__setattr__(self, "values", v)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Spectrum):
            return NotImplemented
        return (
            self.id == other.id
            and self.kind == other.kind
            and np.array_equal(self.wavelengths_nm, other.wavelengths_nm)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def constant(cls, value: float, grid: SpectralGrid = DEFAULT_GRID, **kw) -> "Spectrum":
        wl = grid.wavelengths
        return cls(wl, np.full(wl.shape, float(value)), **kw)


@dataclass(frozen=True)
class CssFunction:
    """Per-channel (R, G, B) spectral sensitivities of one camera."""

    camera_id: str
    wavelengths_nm: NDArray[np.float64]
    r: NDArray[np.float64]
    g: NDArray[np.float64]
    b: NDArray[np.float64]

    def __post_init__(self) -> None:
        wl = _frozen(self.wavelengths_nm)
        _check_grid(wl)
        for name in ("r", "g", "b"):
            ch = _frozen(getattr(self, name))
            if ch.shape != wl.shape:
                raise ValueError(f"camera {self.camera_id!r}: channel {name} length mismatch")
            if not np.all(np.isfinite(ch)):
                raise ValueError(f"camera {self.camera_id!r}: channel {name} non-finite")
            if np.any(ch < 0):
                raise ValueError(f"camera {self.camera_id!r}: negative sensitivity in channel {name}")
            if not np.any(ch > 0):
                raise ValueError(f"camera {self.camera_id!r}: channel {name} is identically zero")
            object.__setattr__(self, name, ch)
        object.__setattr__(self, "wavelengths_nm", wl)

    @property
    def matrix(self) -> NDArray[np.float64]:
        """Sensitivities as a ``(n_wavelengths, 3)`` array."""
        return np.stack([self.r, self.g, self.b], axis=1)

    @classmethod
    def from_matrix(cls, camera_id: str, wavelengths_nm: ArrayLike, m: ArrayLike) -> "CssFunction":
        m = np.asarray(m, dtype=float)
        return cls(camera_id, wavelengths_nm, m[:, 0], m[:, 1], m[:, 2])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CssFunction):
            return NotImplemented
        return (
            self.camera_id == other.camera_id
            and np.array_equal(self.wavelengths_nm, other.wavelengths_nm)
            and np.array_equal(self.matrix, other.matrix)
        )

    __hash__ = None  # type: ignore[assignment]


SpectralData = Union[Spectrum, CssFunction]


def resample(s: SpectralData, grid: SpectralGrid) -> SpectralData:
    """Linearly interpolate onto ``grid``; zero outside the measured range."""
    wl = grid.wavelengths
    if isinstance(s, CssFunction):
        chans = [np.interp(wl, s.wavelengths_nm, ch, left=0.0, right=0.0) for ch in (s.r, s.g, s.b)]
        return CssFunction(s.camera_id, wl, *chans)
    vals = np.interp(wl, s.wavelengths_nm, s.values, left=0.0, right=0.0)
    return Spectrum(wl, vals, id=s.id, kind=s.kind)


def sample(s: SpectralData, grid: SpectralGrid) -> NDArray[np.float64]:
    """Values of ``s`` on ``grid``: shape ``(n,)`` for spectra, ``(n, 3)`` for cameras."""
    if isinstance(s, CssFunction):
        if s.wavelengths_nm.shape == (grid.count,) and np.array_equal(s.wavelengths_nm, grid.wavelengths):
            return s.matrix
        return resample(s, grid).matrix
    if s.wavelengths_nm.shape == (grid.count,) and np.array_equal(s.wavelengths_nm, grid.wavelengths):
        return np.asarray(s.values)
    return np.interp(grid.wavelengths, s.wavelengths_nm, s.values, left=0.0, right=0.0)


def sample_many(spectra: Sequence[Spectrum], grid: SpectralGrid) -> NDArray[np.float64]:
    """Stack spectra on ``grid`` as rows of an ``(N, n)`` array."""
    if not spectra:
        return np.zeros((0, grid.count))
    return np.stack([sample(s, grid) for s in spectra])


def sensor_response(css: CssFunction, spd: Spectrum, grid: SpectralGrid = DEFAULT_GRID) -> NDArray[np.float64]:
    """Camera RGB for a light of spectral power ``spd`` seen directly."""
    rgb = sample(spd, grid) @ sample(css, grid) * grid.step_nm
    if not np.any(rgb > 0):
        logger.warning("zero sensor response for %r under camera %r", spd.id, css.camera_id)
    return rgb


def render_reflectance(
    css: CssFunction, illum: Spectrum, refl: Spectrum, grid: SpectralGrid = DEFAULT_GRID
) -> NDArray[np.float64]:
    """Camera RGB of surface ``refl`` lit by ``illum``."""
    return (sample(illum, grid) * sample(refl, grid)) @ sample(css, grid) * grid.step_nm


def render_reflectance_matrix(
    css: CssFunction,
    illum: Spectrum | None,
    refl: NDArray[np.float64],
    grid: SpectralGrid = DEFAULT_GRID,
) -> NDArray[np.float64]:
    """Batch form of :func:`render_reflectance`.

    ``refl`` holds reflectances sampled on ``grid`` in its last axis; ``illum``
    of ``None`` means an equal-energy light of unit power. Returns the same
    leading shape with a trailing axis of 3.
    """
    weights = sample(css, grid) * grid.step_nm
    if illum is not None:
        weights = weights * sample(illum, grid)[:, None]
    return np.asarray(refl, dtype=float) @ weights


# -- CSV I/O -----------------------------------------------------------------


def _parse_float(text: str, row: int, col: int, path: Path) -> float:
    try:
        val = float(text)
    except ValueError:
        raise SpectraFormatError(
            f"{path}: row {row}, column {col}: cannot parse {text.strip()!r} as a number"
        ) from None
    if not math.isfinite(val):
        raise SpectraFormatError(f"{path}: row {row}, column {col}: non-finite value {text!r}")
    return val


def _read_table(path: Path) -> tuple[list[str], NDArray[np.float64]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise SpectraFormatError(f"{path}: expected a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise SpectraFormatError(f"{path}: need a wavelength column and at least one value column")
    data = np.empty((len(rows) - 1, len(header)))
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise SpectraFormatError(f"{path}: row {i} has {len(r)} fields, header has {len(header)}")
        for j, cell in enumerate(r):
            data[i - 2, j] = _parse_float(cell, i, j + 1, path)
    return header, data


def load_spectra_csv(path: str | Path, kind: Kind) -> list[Spectrum] | list[CssFunction]:
    """Read a spectra CSV: a header row, wavelengths in column 1, one spectrum per column.

    For ``kind="css"`` the file describes one camera with exactly three value
    columns (R, G, B); the camera id is the file stem.
    """
    path = Path(path)
    header, data = _read_table(path)
    wl = data[:, 0]
    if wl.size > 1 and np.any(np.diff(wl) <= 0):
        raise ValueError(f"{path}: non-increasing grid in wavelength column")
    if kind == "css":
        if data.shape[1] != 4:
            raise SpectraFormatError(
                f"{path}: camera files need columns wavelength,R,G,B (got {len(header)} columns)"
            )
        try:
            return [CssFunction.from_matrix(path.stem, wl, data[:, 1:])]
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from None
    if kind not in ("reflectance", "illuminant"):
        raise ValueError(f"unknown spectra kind {kind!r}")
    out = []
    for j, name in enumerate(header[1:], start=1):
        try:
            out.append(Spectrum(wl, data[:, j], id=name, kind=kind))
        except ValueError as exc:
            raise ValueError(f"{path}: column {j + 1}: {exc}") from None
    return out


def write_spectra_csv(path: str | Path, spectra: Sequence[Spectrum] | CssFunction) -> None:
    """Inverse of :func:`load_spectra_csv`. Values are written with ``repr`` precision."""
    path = Path(path)
    if isinstance(spectra, CssFunction):
        header = ["wavelength", "R", "G", "B"]
        wl = spectra.wavelengths_nm
        cols = spectra.matrix
    else:
        if not spectra:
            raise ValueError("nothing to write")
        wl = spectra[0].wavelengths_nm
        if any(not np.array_equal(s.wavelengths_nm, wl) for s in spectra):
            raise ValueError("all spectra in one file must share a wavelength grid")
        header = ["wavelength"] + [s.id or f"s{i}" for i, s in enumerate(spectra)]
        cols = np.stack([s.values for s in spectra], axis=1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(wl.size):
            w.writerow([repr(float(wl[k]))] + [repr(float(v)) for v in cols[k]])
