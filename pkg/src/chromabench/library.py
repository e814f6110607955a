"""Procedural spectra for desk-scale experiments.

The measured reflectance/illuminant collections and camera sensitivity
databases used in color-constancy research are external downloads. The
generators below produce structurally similar stand-ins so the whole
pipeline can run and be tested without them. All generators take an
explicit seed.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .spectra import DEFAULT_GRID, CssFunction, SpectralGrid, Spectrum

# second radiation constant, nm*K
_C2 = 1.4388e7


def planck(temperature_k: float, grid: SpectralGrid = DEFAULT_GRID) -> NDArray[np.float64]:
    """Blackbody spectral power normalised to 1 at 560 nm."""
    wl = grid.wavelengths

    def b(lam):
        return lam ** -5.0 / np.expm1(_C2 / (lam * temperature_k))

    return b(wl) / b(560.0)


def random_reflectances(
    n: int, seed: int, grid: SpectralGrid = DEFAULT_GRID
) -> list[Spectrum]:
    """Smooth surface reflectances in [0.01, 1].

    Each curve is a flat base plus a sigmoid step and up to three broad
    Gaussian bumps. Edges are at least 20 nm wide, keeping the set as
    low-dimensional as measured surface collections.
    """
    rng = np.random.default_rng(seed)
    wl = grid.wavelengths
    out = []
    for i in range(n):
        v = np.full(wl.shape, rng.uniform(0.05, 0.6))
        c = rng.uniform(450, 650)
        v += rng.uniform(-0.5, 0.7) / (1.0 + np.exp(-(wl - c) / rng.uniform(20, 60)))
        for _ in range(rng.integers(0, 4)):
            v += rng.uniform(-0.4, 0.6) * np.exp(
                -0.5 * ((wl - rng.uniform(380, 720)) / rng.uniform(40, 120)) ** 2
            )
        out.append(Spectrum(wl, np.clip(v, 0.01, 1.0), id=f"refl{i:04d}", kind="reflectance"))
    return out


def random_illuminants(
    n: int,
    seed: int,
    grid: SpectralGrid = DEFAULT_GRID,
    cct_range: tuple[float, float] = (2500.0, 10000.0),
    off_planckian: float = 0.4,
) -> list[Spectrum]:
    """Blackbody lights, a fraction of them tinted off the Planckian locus.

    Colour temperatures are uniform in mired over ``cct_range``. Tinted lights
    are multiplied by a slow cosine ripple of relative amplitude up to 0.35.
    """
    rng = np.random.default_rng(seed)
    wl = grid.wavelengths
    lo, hi = 1e6 / cct_range[1], 1e6 / cct_range[0]
    out = []
    for i in range(n):
        t = 1e6 / rng.uniform(lo, hi)
        v = planck(t, grid)
        tag = "bb"
        if rng.random() < off_planckian:
            a = rng.uniform(-0.35, 0.35)
            k = rng.uniform(0.5, 1.5)
            v = v * (1.0 + a * np.cos(2 * np.pi * k * (wl - wl[0]) / (wl[-1] - wl[0]) + rng.uniform(0, 2 * np.pi)))
            tag = "tint"
        out.append(Spectrum(wl, v / v.max(), id=f"{tag}{i:03d}_{int(round(t))}K", kind="illuminant"))
    return out


def equal_energy(grid: SpectralGrid = DEFAULT_GRID) -> Spectrum:
    return Spectrum.constant(1.0, grid, id="E", kind="illuminant")


def gaussian_css(
    camera_id: str,
    centers: Sequence[float],
    widths: Sequence[float],
    grid: SpectralGrid = DEFAULT_GRID,
    red_secondary: float = 0.0,
    gains: Sequence[float] = (1.0, 1.0, 1.0),
) -> CssFunction:
    """Three Gaussian bands, optionally with a short-wave lobe on the red channel.

    Each channel is first scaled to unit integral, so an equal-energy light
    gives an achromatic response, and then multiplied by its entry of
    ``gains``. Raw sensors are rarely balanced; green usually dominates.
    """
    wl = grid.wavelengths
    m = np.stack(
        [np.exp(-0.5 * ((wl - c) / w) ** 2) for c, w in zip(centers, widths)], axis=1
    )
    if red_secondary:
        m[:, 0] += red_secondary * np.exp(-0.5 * ((wl - 445.0) / 20.0) ** 2)
    m = m / (m.sum(axis=0) * grid.step_nm) * np.asarray(gains, dtype=float)
    return CssFunction.from_matrix(camera_id, wl, m)


def css_family(grid: SpectralGrid = DEFAULT_GRID) -> list[CssFunction]:
    """Fourteen broad-band sensor sets in the spread of consumer cameras.

    Peaks vary by about +-15 nm and widths by about +-8 nm around a typical
    RGB sensor; the last two imitate colour-matching-function and sRGB-like
    curves with a short-wave red lobe and balanced gains.
    """
    specs = [
        ("canon-like-a", (600, 535, 460), (32, 36, 28), 0.10, (0.55, 1.0, 0.60)),
        ("canon-like-b", (605, 540, 465), (30, 38, 30), 0.12, (0.50, 1.0, 0.55)),
        ("nikon-like-a", (598, 533, 455), (34, 40, 30), 0.08, (0.60, 1.0, 0.65)),
        ("nikon-like-b", (600, 545, 460), (36, 36, 28), 0.05, (0.65, 1.0, 0.50)),
        ("sony-like", (610, 540, 450), (30, 34, 26), 0.15, (0.45, 1.0, 0.70)),
        ("olympus-like", (592, 535, 465), (38, 42, 32), 0.10, (0.70, 1.0, 0.60)),
        ("pentax-like", (605, 550, 470), (33, 35, 30), 0.06, (0.55, 1.0, 0.45)),
        ("kodak-like", (612, 545, 455), (28, 32, 26), 0.18, (0.50, 1.0, 0.75)),
        ("phase-one-like", (600, 540, 460), (40, 44, 34), 0.0, (0.75, 1.0, 0.65)),
        ("point-grey-like", (615, 550, 465), (35, 40, 30), 0.0, (0.60, 1.0, 0.55)),
        ("industrial", (612, 545, 450), (32, 46, 28), 0.0, (1.0, 1.0, 1.0)),
        ("nokia-like", (595, 540, 470), (36, 38, 34), 0.12, (0.65, 1.0, 0.80)),
        ("cmf-like", (595, 550, 450), (38, 42, 24), 0.35, (1.0, 1.0, 1.0)),
        ("srgb-like", (605, 545, 455), (33, 38, 26), 0.25, (1.0, 1.0, 1.0)),
    ]
    return [gaussian_css(cid, c, w, grid, red_secondary=r2, gains=g) for cid, c, w, r2, g in specs]


def toy_cube_data(
    height: int,
    width: int,
    refls: Sequence[Spectrum],
    seed: int,
    grid: SpectralGrid = DEFAULT_GRID,
    n_regions: int = 6,
) -> NDArray[np.float64]:
    """Spectral reflectance cube ``(height, width, bands)`` with soft regions and shading.

    Pixels belong to the nearest of ``n_regions`` random seed points; each
    region blends two reflectances along a random direction and the whole
    cube is multiplied by a smooth shading field in [0.4, 1.0].
    """
    rng = np.random.default_rng(seed)
    R = np.stack([r.values if np.array_equal(r.wavelengths_nm, grid.wavelengths) else
                  np.interp(grid.wavelengths, r.wavelengths_nm, r.values, left=0, right=0)
                  for r in refls])
    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    pts = rng.uniform([0, 0], [height, width], size=(n_regions, 2))
    d = (yy[..., None] - pts[:, 0]) ** 2 + (xx[..., None] - pts[:, 1]) ** 2
    label = np.argmin(d, axis=-1)
    cube = np.zeros((height, width, grid.count))
    for k in range(n_regions):
        a, b = R[rng.integers(len(R), size=2)]
        theta = rng.uniform(0, 2 * np.pi)
        u = (np.cos(theta) * xx + np.sin(theta) * yy) / max(height, width)
        t = np.clip(0.5 + 0.5 * np.sin(2 * np.pi * u + rng.uniform(0, 2 * np.pi)), 0, 1)
        sel = label == k
        cube[sel] = (1 - t[sel])[:, None] * a + t[sel][:, None] * b
    phase = rng.uniform(0, 2 * np.pi, size=2)
    shade = 0.7 + 0.3 * np.sin(2 * np.pi * xx / width + phase[0]) * np.cos(2 * np.pi * yy / height + phase[1])
    return cube * shade[..., None]
