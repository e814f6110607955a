"""Illuminant estimators.

Low-level statistics (grey-world, grey-edge), two linear regressors on image
features (a committee of low-level estimates with cross terms, and corrected
edge moments), and data-based spectral sharpening as a baseline transform.

Every estimator returns a nonnegative RGB triple of unit L2 norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage
from scipy.optimize import linear_sum_assignment

from .css_adapt import Transform3
from .errors import DegenerateError, SchemaMismatchError
from .spectra import DEFAULT_GRID, CssFunction, SpectralGrid, Spectrum, render_reflectance_matrix, sample_many
from .synth import DEGENERATE_TOL, LabeledDataset, LinearImage

CBCC_SCHEMA = "cbcc-v1"
CM_SCHEMA = "cm9-v1"
GAUSS_TRUNCATE = 4.0


def _unit(v: NDArray[np.float64], what: str = "estimate") -> NDArray[np.float64]:
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n <= DEGENERATE_TOL:
        raise DegenerateError(f"degenerate image: zero {what}")
    return v / n


@dataclass(frozen=True)
class GreyEdgeParams:
    """Derivative order ``n``, Minkowski norm ``p`` and smoothing scale ``sigma``."""

    n: int = 1
    p: float = 1.0
    sigma: float = 2.0

    def __post_init__(self) -> None:
        if self.n not in (0, 1):
            raise ValueError("grey-edge derivative order must be 0 or 1")
        if not self.p >= 1:
            raise ValueError("Minkowski norm p must be >= 1")
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class FeatureVector:
    values: NDArray[np.float64]
    schema_id: str


@dataclass(frozen=True)
class RegressionModel:
    """Linear map ``illuminant ~= features @ L`` with ``L`` of shape ``(D, 3)``."""

    L: NDArray[np.float64]
    schema_id: str
    trained_on: str = ""

    def __post_init__(self) -> None:
        L = np.array(self.L, dtype=float)
        if L.ndim != 2 or L.shape[1] != 3:
            raise ValueError(f"regression matrix must be D x 3, got {L.shape}")
        dim = SCHEMA_DIMS.get(self.schema_id)
        if dim is not None and L.shape[0] != dim:
            raise ValueError(f"schema {self.schema_id!r} has {dim} features, matrix has {L.shape[0]} rows")
        L.setflags(write=False)
        object.__setattr__(self, "L", L)


SCHEMA_DIMS = {CBCC_SCHEMA: 15, CM_SCHEMA: 9}


def grey_world(img: LinearImage) -> NDArray[np.float64]:
    """Unit-normalised mean colour of the unmasked pixels."""
    px = img.valid_pixels()
    if px.shape[0] == 0:
        raise DegenerateError("degenerate image: no unmasked pixels")
    return _unit(px.mean(axis=0), "mean colour")


def _support(img: LinearImage, radius: int) -> NDArray[np.bool_]:
    """Pixels whose filter footprint lies entirely inside the unmasked region."""
    if img.mask is None:
        return np.ones((img.height, img.width), dtype=bool)
    if radius <= 0:
        return img.mask
    return ndimage.binary_erosion(
        img.mask, structure=np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool), border_value=1
    )


def _smooth(channel: NDArray[np.float64], sigma: float) -> NDArray[np.float64]:
    if sigma <= 0:
        return channel
    return ndimage.gaussian_filter(channel, sigma, mode="nearest", truncate=GAUSS_TRUNCATE)


def _filter_radius(sigma: float) -> int:
    return int(GAUSS_TRUNCATE * sigma + 0.5) if sigma > 0 else 0


def gradient_magnitude(channel: NDArray[np.float64], sigma: float) -> NDArray[np.float64]:
    """``sqrt(dx^2 + dy^2)`` of the smoothed channel.

    Central differences inside, one-sided differences on the border rows and
    columns (``numpy.gradient`` with unit spacing).
    """
    s = _smooth(channel, sigma)
    dy, dx = np.gradient(s)
    return np.sqrt(dx * dx + dy * dy)


def _edge_maps(img: LinearImage, sigma: float) -> tuple[list[NDArray[np.float64]], NDArray[np.bool_]]:
    if img.height < 3 or img.width < 3:
        raise ValueError("derivative-based statistics need an image of at least 3x3 pixels")
    maps = [gradient_magnitude(img.pixels[..., c], sigma) for c in range(3)]
    return maps, _support(img, _filter_radius(sigma) + 1)


def grey_edge(img: LinearImage, params: GreyEdgeParams = GreyEdgeParams()) -> NDArray[np.float64]:
    """Minkowski ``p``-mean of the ``n``-th order derivative magnitude per channel.

    ``GreyEdgeParams(n=0, p=1, sigma=0)`` is grey-world.
    """
    if params.n == 1:
        maps, valid = _edge_maps(img, params.sigma)
    else:
        maps = [np.abs(_smooth(img.pixels[..., c], params.sigma)) for c in range(3)]
        valid = _support(img, _filter_radius(params.sigma))
    if not valid.any():
        raise DegenerateError("degenerate image: no pixels left after masking")
    p = params.p
    if p == 1:
        stat = np.array([m[valid].mean() for m in maps])
    else:
        stat = np.array([np.mean(m[valid] ** p) ** (1.0 / p) for m in maps])
    return _unit(stat, "edge statistic")


def cbcc_features(img: LinearImage, edge: GreyEdgeParams = GreyEdgeParams(1, 1, 2.0)) -> FeatureVector:
    """Grey-world and grey-edge estimates plus all nine products ``eA[i] * eB[j]``."""
    ea = grey_world(img)
    eb = grey_edge(img, edge)
    return FeatureVector(np.concatenate([ea, eb, np.outer(ea, eb).ravel()]), CBCC_SCHEMA)


def cm_moments(img: LinearImage, sigma: float = 2.0) -> FeatureVector:
    """Nine edge moments, each homogeneous of degree one in exposure.

    Three channel means of the gradient magnitude followed by the square roots
    of the six second-order moments ``mean(d_i * d_j)``, ``i <= j``.
    """
    maps, valid = _edge_maps(img, sigma)
    if not valid.any():
        raise DegenerateError("degenerate image: no pixels left after masking")
    d = np.stack([m[valid] for m in maps], axis=1)
    first = d.mean(axis=0)
    if not np.any(first > 0):
        raise DegenerateError("degenerate image: no edges")
    second = [np.sqrt(np.mean(d[:, i] * d[:, j])) for i in range(3) for j in range(i, 3)]
    return FeatureVector(np.concatenate([first, second]), CM_SCHEMA)


def fit_lms(
    features: ArrayLike,
    targets: ArrayLike,
    schema_id: str = "",
    trained_on: str = "",
) -> RegressionModel:
    """Ridge-stabilised least squares ``argmin ||F L - T||_F``.

    The ridge is ``1e-8 * trace(F^T F) / D``, small enough to leave
    well-posed fits untouched and large enough to make ``N < D`` solvable.
    """
    F = np.atleast_2d(np.asarray(features, dtype=float))
    T = np.atleast_2d(np.asarray(targets, dtype=float))
    if F.shape[0] == 0:
        raise ValueError("cannot fit a regression on zero samples")
    if T.shape != (F.shape[0], 3):
        raise ValueError(f"targets must be N x 3 with N = {F.shape[0]}, got {T.shape}")
    G = F.T @ F
    D = G.shape[0]
    eps = 1e-8 * np.trace(G) / D
    L = np.linalg.solve(G + eps * np.eye(D), F.T @ T)
    return RegressionModel(L, schema_id, trained_on)


def predict_rows(
    model: RegressionModel, features: ArrayLike, fallback: ArrayLike
) -> NDArray[np.float64]:
    """Apply ``model`` to feature rows, clamp at zero and renormalise.

    Rows that clamp to zero take the matching ``fallback`` estimate.
    """
    X = np.atleast_2d(np.asarray(features, dtype=float))
    fb = np.atleast_2d(np.asarray(fallback, dtype=float))
    if X.shape[1] != model.L.shape[0]:
        raise SchemaMismatchError(
            f"model expects {model.L.shape[0]} features, got {X.shape[1]}"
        )
    est = np.maximum(X @ model.L, 0.0)
    n = np.linalg.norm(est, axis=1)
    bad = n <= DEGENERATE_TOL
    est[bad] = fb[bad] if fb.shape[0] == X.shape[0] else fb[0]
    return est / np.linalg.norm(est, axis=1, keepdims=True)


def _check_schema(model: RegressionModel, schema: str) -> None:
    if model.schema_id != schema:
        raise SchemaMismatchError(f"model schema {model.schema_id!r} does not match {schema!r}")


def cbcc_train(ds: LabeledDataset, edge: GreyEdgeParams = GreyEdgeParams(1, 1, 2.0)) -> RegressionModel:
    X = np.stack([cbcc_features(img, edge).values for img, _ in ds])
    return fit_lms(X, ds.targets(), CBCC_SCHEMA, ds.name)


def cbcc_predict(
    model: RegressionModel, img: LinearImage, edge: GreyEdgeParams = GreyEdgeParams(1, 1, 2.0)
) -> NDArray[np.float64]:
    _check_schema(model, CBCC_SCHEMA)
    f = cbcc_features(img, edge).values
    return predict_rows(model, f, f[:3])[0]


def cm_train(ds: LabeledDataset) -> RegressionModel:
    X = np.stack([cm_moments(img).values for img, _ in ds])
    return fit_lms(X, ds.targets(), CM_SCHEMA, ds.name)


def cm_predict(model: RegressionModel, img: LinearImage) -> NDArray[np.float64]:
    _check_schema(model, CM_SCHEMA)
    return predict_rows(model, cm_moments(img).values, grey_world(img))[0]


class NoRealSharpening(ValueError):
    """The illuminant-change map has complex eigenvalues."""


def spectral_sharpen(
    css: CssFunction,
    illum_1: Spectrum,
    illum_2: Spectrum,
    refls: Sequence[Spectrum],
    grid: SpectralGrid = DEFAULT_GRID,
) -> Transform3:
    """Data-based perfect sharpening for one camera.

    Fits ``M`` with ``rgb_under_2 ~= M @ rgb_under_1`` over ``refls`` and
    returns ``T = V^-1`` (``M = V diag V^-1``), so illuminant changes act
    diagonally on ``T @ rgb``. Rows are scaled to unit max-abs entry (made
    positive) and ordered to sit closest to the identity. Negative entries are
    expected.
    """
    R = sample_many(refls, grid)
    f1 = render_reflectance_matrix(css, illum_1, R, grid)
    f2 = render_reflectance_matrix(css, illum_2, R, grid)
    mt, *_ = np.linalg.lstsq(f1, f2, rcond=None)
    M = mt.T
    off = M - np.diag(np.diag(M))
    if np.abs(off).max() <= 1e-10 * np.abs(M).max():
        return Transform3(np.eye(3), css.camera_id, f"{css.camera_id}:sharp")
    w, V = np.linalg.eig(M)
    if np.any(np.abs(w.imag) > 1e-9 * np.abs(w).max()):
        raise NoRealSharpening(f"camera {css.camera_id!r}: complex eigenvalues {w}, no real sharpening")
    T = np.linalg.inv(V.real)
    T = T / np.abs(T).max(axis=1, keepdims=True)
    T = T * np.sign(T[np.arange(3), np.abs(T).argmax(axis=1)])[:, None]
    rows, cols = linear_sum_assignment(-np.abs(T))
    out = np.empty_like(T)
    out[cols] = T[rows]
    return Transform3(out, css.camera_id, f"{css.camera_id}:sharp")


# -- estimator adapters used by the evaluation harness ----------------------


class Method(Protocol):
    """What the harness needs from an estimator.

    ``extract`` returns the feature row and a fallback estimate for one image;
    ``fit`` consumes stacked features and unit targets; ``predict`` returns
    unit estimates for stacked rows.
    """

    name: str

    def extract(self, img: LinearImage) -> tuple[NDArray[np.float64], NDArray[np.float64]]: ...

    def fit(self, X: NDArray[np.float64], T: NDArray[np.float64], trained_on: str = "") -> Any: ...

    def predict(self, model: Any, X: NDArray[np.float64], fallback: NDArray[np.float64]) -> NDArray[np.float64]: ...


@dataclass(frozen=True)
class GreyWorld:
    name: str = "grey_world"

    def extract(self, img):
        e = grey_world(img)
        return e, e

    def fit(self, X, T, trained_on=""):
        return None

    def predict(self, model, X, fallback):
        X = np.atleast_2d(X)
        return X / np.linalg.norm(X, axis=1, keepdims=True)


@dataclass(frozen=True)
class GreyEdge(GreyWorld):
    params: GreyEdgeParams = GreyEdgeParams(1, 1, 2.0)
    name: str = "grey_edge"

    def extract(self, img):
        return grey_edge(img, self.params), grey_world(img)


@dataclass(frozen=True)
class Cbcc:
    edge: GreyEdgeParams = GreyEdgeParams(1, 1, 2.0)
    name: str = "cbcc"

    def extract(self, img):
        f = cbcc_features(img, self.edge).values
        return f, f[:3]

    def fit(self, X, T, trained_on=""):
        return fit_lms(X, T, CBCC_SCHEMA, trained_on)

    def predict(self, model, X, fallback):
        return predict_rows(model, X, fallback)


@dataclass(frozen=True)
class CorrectedMoments:
    sigma: float = 2.0
    name: str = "cm"

    def extract(self, img):
        return cm_moments(img, self.sigma).values, grey_world(img)

    def fit(self, X, T, trained_on=""):
        return fit_lms(X, T, CM_SCHEMA, trained_on)

    def predict(self, model, X, fallback):
        return predict_rows(model, X, fallback)


@dataclass(frozen=True)
class Oracle:
    """Returns the stored ground truth for each ``(camera_id, scene_id, illuminant_id)``.

    Only useful for checking the harness itself.
    """

    table: Mapping[tuple[str, str, str], tuple[float, float, float]] = field(default_factory=dict)
    name: str = "oracle"

    @classmethod
    def from_datasets(cls, *datasets: LabeledDataset) -> "Oracle":
        table = {}
        for ds in datasets:
            for img, gt in ds:
                table[(img.camera_id, img.scene_id, img.illuminant_id)] = tuple(gt.illuminant_rgb)
        return cls(table)

    def extract(self, img):
        e = np.array(self.table[(img.camera_id, img.scene_id, img.illuminant_id)])
        return e, e

    def fit(self, X, T, trained_on=""):
        return None

    def predict(self, model, X, fallback):
        X = np.atleast_2d(X)
        return X / np.linalg.norm(X, axis=1, keepdims=True)


METHODS = ("grey_world", "grey_edge", "cbcc", "cm")


def make_method(name: str, **kw) -> Method:
    if name == "grey_world":
        return GreyWorld()
    if name == "grey_edge":
        return GreyEdge(**kw)
    if name == "cbcc":
        return Cbcc(**kw)
    if name == "cm":
        return CorrectedMoments(**kw)
    raise ValueError(f"unknown estimator {name!r}; choose from {', '.join(METHODS)}")
