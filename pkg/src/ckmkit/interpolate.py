"""Classical sparse-to-dense map reconstruction.

Four estimators with a scikit-learn surface (fit/predict/get_params):
k-nearest-neighbor averaging, inverse-distance weighting, radial basis
function interpolation and ordinary kriging with an auto-fitted variogram.
All of them consume (n, 2) sample coordinates in pixel units plus sampled
values, and predict values at arbitrary coordinates.  `reconstruct` wraps
the estimators for the common case of filling a full normalized map from a
sampled one.

Training points are canonicalized (sorted lexicographically by coordinate,
then value) at fit time so results do not depend on sample ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy.optimize import least_squares
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validate import as_binary_mask, check_coords
from .grid import GridMap

_ZERO_DIST = 1e-12


class ReconstructionError(RuntimeError):
    """Raised when an interpolation system cannot be solved."""


def _canonical_order(coords: np.ndarray, values: np.ndarray):
    order = np.lexsort((values, coords[:, 1], coords[:, 0]))
    return coords[order], values[order]


def _check_xy(X, y):
    X = check_coords("X", X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"X and y disagree on sample count: {X.shape[0]} vs {y.shape[0]}")
    if X.shape[0] < 1:
        raise ValueError("at least one sample is required")
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    return X, y


class KNNReconstructor(RegressorMixin, BaseEstimator):
    """Mean of the k nearest sampled values."""

    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, X, y):
        if int(self.k) < 1:
            raise ValueError("k must be >= 1")
        X, y = _check_xy(X, y)
        self.coords_, self.values_ = _canonical_order(X, y)
        self.tree_ = cKDTree(self.coords_)
        return self

    def predict(self, X):
        check_is_fitted(self, "tree_")
        X = check_coords("X", X)
        k = min(int(self.k), self.values_.size)
        _, idx = self.tree_.query(X, k=k)
        idx = np.atleast_2d(idx) if k == 1 else idx
        if k == 1:
            idx = idx.reshape(-1, 1)
        return self.values_[idx].mean(axis=1)


class IDWReconstructor(RegressorMixin, BaseEstimator):
    """Inverse-distance weighting over all sampled points.

    A query at (numerically) zero distance from a sample returns that
    sample's value.  Predictions are convex combinations of the sampled
    values, so they stay inside [min(y), max(y)].
    """

    def __init__(self, power: float = 2.0, chunk: int = 1024):
        self.power = power
        self.chunk = chunk

    def fit(self, X, y):
        if float(self.power) <= 0:
            raise ValueError("power must be positive")
        X, y = _check_xy(X, y)
        self.coords_, self.values_ = _canonical_order(X, y)
        return self

    def predict(self, X):
        check_is_fitted(self, "coords_")
        X = check_coords("X", X)
        out = np.empty(X.shape[0])
        for s in range(0, X.shape[0], int(self.chunk)):
            block = X[s : s + int(self.chunk)]
            d = np.sqrt(
                ((block[:, None, :] - self.coords_[None, :, :]) ** 2).sum(axis=2)
            )
            hit = d < _ZERO_DIST
            with np.errstate(divide="ignore"):
                w = d ** (-float(self.power))
            w[hit] = 0.0
            num = w @ self.values_
            den = w.sum(axis=1)
            vals = np.where(den > 0, num / np.maximum(den, 1e-300), 0.0)
            any_hit = hit.any(axis=1)
            if np.any(any_hit):
                first = np.argmax(hit[any_hit], axis=1)
                vals[any_hit] = self.values_[first]
            out[s : s + int(self.chunk)] = vals
        return out


def _rbf_kernel(name: str, r: np.ndarray, shape: float) -> np.ndarray:
    if name == "gaussian":
        return np.exp(-((r / shape) ** 2))
    if name == "multiquadric":
        return np.sqrt(1.0 + (r / shape) ** 2)
    if name == "thin_plate":
        with np.errstate(divide="ignore", invalid="ignore"):
            out = r * r * np.log(r)
        return np.where(r > 0, out, 0.0)
    raise ValueError(f"unknown RBF kernel {name!r}")


def median_neighbor_spacing(coords: np.ndarray) -> float:
    """Median distance to the nearest other sample."""
    if coords.shape[0] < 2:
        return 1.0
    tree = cKDTree(coords)
    d, _ = tree.query(coords, k=2)
    return float(np.median(d[:, 1]))


class RBFReconstructor(RegressorMixin, BaseEstimator):
    """Radial basis function interpolation.

    shape=None picks twice the median nearest-neighbor spacing of the
    training coordinates.  With regularization=0 the interpolant passes
    through the samples exactly; the default small ridge keeps dense
    systems solvable.  Training sets larger than max_points are thinned
    deterministically before solving.
    """

    def __init__(
        self,
        kernel: str = "gaussian",
        shape: float | None = None,
        regularization: float = 1e-8,
        max_points: int = 4000,
    ):
        self.kernel = kernel
        self.shape = shape
        self.regularization = regularization
        self.max_points = max_points

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        coords, values = _canonical_order(X, y)
        if coords.shape[0] > int(self.max_points):
            pick = np.linspace(0, coords.shape[0] - 1, int(self.max_points)).round().astype(int)
            coords, values = coords[pick], values[pick]
        shape = self.shape
        if shape is None:
            # Duplicate points give zero spacing; keep the kernel width
            # sane and let the solve report the singular system instead.
            shape = 2.0 * max(median_neighbor_spacing(coords), 1e-9)
        if shape <= 0:
            raise ValueError("shape parameter must be positive")
        r = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2))
        phi = _rbf_kernel(self.kernel, r, shape)
        system = phi + float(self.regularization) * np.eye(coords.shape[0])
        try:
            weights = sla.solve(system, values)
        except sla.LinAlgError as exc:
            raise ReconstructionError(
                f"singular RBF system (condition estimate {np.linalg.cond(system):.3e}); "
                "raise regularization or drop duplicate sample points"
            ) from exc
        if not np.all(np.isfinite(weights)):
            raise ReconstructionError(
                f"RBF solve produced non-finite weights "
                f"(condition estimate {np.linalg.cond(system):.3e})"
            )
        self.coords_, self.values_ = coords, values
        self.shape_, self.weights_ = float(shape), weights
        return self

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X = check_coords("X", X)
        out = np.empty(X.shape[0])
        step = 2048
        for s in range(0, X.shape[0], step):
            block = X[s : s + step]
            r = np.sqrt(((block[:, None, :] - self.coords_[None, :, :]) ** 2).sum(axis=2))
            out[s : s + step] = _rbf_kernel(self.kernel, r, self.shape_) @ self.weights_
        return out


@dataclass(frozen=True)
class VariogramFit:
    """Fitted semivariogram: gamma(h) -> sill as h -> infinity."""

    model: str
    nugget: float
    sill: float
    range_: float
    degenerate: bool = False

    def __call__(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=np.float64)
        partial = self.sill - self.nugget
        r = max(self.range_, 1e-12)
        if self.model == "exponential":
            g = 1.0 - np.exp(-3.0 * h / r)
        elif self.model == "gaussian":
            g = 1.0 - np.exp(-3.0 * (h / r) ** 2)
        elif self.model == "spherical":
            hr = np.minimum(h / r, 1.0)
            g = 1.5 * hr - 0.5 * hr**3
        else:
            raise ValueError(f"unknown variogram model {self.model!r}")
        return np.where(h > 0, self.nugget + partial * g, 0.0)


def empirical_variogram(coords: np.ndarray, values: np.ndarray, n_lags: int = 15):
    """Binned semivariance estimates up to half the maximum pair distance."""
    n = coords.shape[0]
    diff = coords[:, None, :] - coords[None, :, :]
    d = np.sqrt((diff**2).sum(axis=2))
    iu = np.triu_indices(n, k=1)
    d = d[iu]
    sv = 0.5 * (values[:, None] - values[None, :])[iu] ** 2
    d_max = d.max()
    if d_max <= 0:
        raise ValueError("all sample coordinates coincide")
    edges = np.linspace(0.0, 0.5 * d_max, n_lags + 1)
    lags, gammas = [], []
    for i in range(n_lags):
        sel = (d > edges[i]) & (d <= edges[i + 1])
        if np.any(sel):
            lags.append(d[sel].mean())
            gammas.append(sv[sel].mean())
    return np.asarray(lags), np.asarray(gammas)


def fit_variogram(
    coords, values, model: str = "exponential", n_lags: int = 15, max_pairs_points: int = 3000
) -> VariogramFit:
    """Least-squares fit of a variogram model to binned semivariances.

    Returns nugget >= 0, sill >= nugget and range > 0.  A constant-valued
    sample set cannot support a fit and comes back flagged degenerate with
    a tiny sill.  Fewer than three points cannot be binned and raise.
    """
    coords = check_coords("coords", coords)
    values = np.asarray(values, dtype=np.float64).ravel()
    if coords.shape[0] != values.shape[0]:
        raise ValueError("coords and values disagree on sample count")
    if coords.shape[0] < 3:
        raise ValueError("variogram fitting needs at least 3 points")
    coords, values = _canonical_order(coords, values)
    if coords.shape[0] > max_pairs_points:
        pick = np.linspace(0, coords.shape[0] - 1, max_pairs_points).round().astype(int)
        coords, values = coords[pick], values[pick]

    span = np.linalg.norm(coords.max(axis=0) - coords.min(axis=0))
    if np.ptp(values) == 0.0:
        return VariogramFit(model, 0.0, 1e-12, max(span, 1.0), degenerate=True)

    lags, gammas = empirical_variogram(coords, values, n_lags)
    if lags.size < 2:
        return VariogramFit(model, 0.0, max(float(gammas.mean()), 1e-12) if gammas.size else 1e-12,
                            max(span, 1.0), degenerate=True)

    g_max = float(gammas.max())
    x0 = np.array([max(float(gammas[0]) * 0.5, 1e-9), max(g_max, 1e-9), max(float(lags[-1]) * 0.5, 1e-6)])

    def resid(theta):
        nugget, partial, rng_ = theta
        return VariogramFit(model, nugget, nugget + partial, rng_)(lags) - gammas

    sol = least_squares(
        resid,
        x0,
        bounds=([0.0, 1e-12, 1e-9], [np.inf, np.inf, np.inf]),
        max_nfev=2000,
    )
    nugget, partial, rng_ = sol.x
    return VariogramFit(model, float(nugget), float(nugget + partial), float(rng_))


class KrigingReconstructor(RegressorMixin, BaseEstimator):
    """Ordinary kriging on a local neighborhood.

    Variogram parameters (nugget, sill, range_) may be pinned; leaving them
    None triggers an automatic fit on the training data, which requires the
    points not to be collinear.  Each prediction solves the ordinary
    kriging system over its `neighbors` nearest samples.  With nugget 0 the
    predictor honors the sampled values exactly.  A degenerate (constant)
    training field predicts the sample mean everywhere.
    """

    def __init__(
        self,
        variogram_model: str = "exponential",
        nugget: float | None = None,
        sill: float | None = None,
        range_: float | None = None,
        regularization: float = 1e-8,
        neighbors: int = 32,
    ):
        self.variogram_model = variogram_model
        self.nugget = nugget
        self.sill = sill
        self.range_ = range_
        self.regularization = regularization
        self.neighbors = neighbors

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        coords, values = _canonical_order(X, y)
        auto = self.nugget is None or self.sill is None or self.range_ is None
        if auto:
            if coords.shape[0] < 3:
                raise ValueError("kriging auto-fit needs at least 3 samples")
            centered = coords - coords.mean(axis=0)
            if np.linalg.matrix_rank(centered, tol=1e-9) < 2:
                raise ValueError("kriging auto-fit requires non-collinear sample points")
            self.variogram_ = fit_variogram(coords, values, model=self.variogram_model)
        else:
            if self.sill < self.nugget or self.range_ <= 0 or self.nugget < 0:
                raise ValueError("need nugget >= 0, sill >= nugget, range_ > 0")
            self.variogram_ = VariogramFit(
                self.variogram_model, float(self.nugget), float(self.sill), float(self.range_)
            )
        self.coords_, self.values_ = coords, values
        self.tree_ = cKDTree(coords)
        return self

    def predict(self, X):
        check_is_fitted(self, "variogram_")
        X = check_coords("X", X)
        vg = self.variogram_
        if vg.degenerate or vg.sill <= 1e-11:
            return np.full(X.shape[0], self.values_.mean())

        n = self.coords_.shape[0]
        k = min(int(self.neighbors), n)
        _, idx = self.tree_.query(X, k=k)
        idx = idx.reshape(X.shape[0], k)
        nb = self.coords_[idx]
        nv = self.values_[idx]

        d_nb = np.sqrt(((nb[:, :, None, :] - nb[:, None, :, :]) ** 2).sum(axis=3))
        d_tg = np.sqrt(((nb - X[:, None, :]) ** 2).sum(axis=2))

        m = X.shape[0]
        a = np.zeros((m, k + 1, k + 1))
        a[:, :k, :k] = vg(d_nb)
        a[:, :k, :k] += float(self.regularization) * np.eye(k)
        idx_diag = np.arange(k)
        a[:, idx_diag, idx_diag] = 0.0
        a[:, k, :k] = 1.0
        a[:, :k, k] = 1.0
        b = np.empty((m, k + 1))
        b[:, :k] = vg(d_tg)
        b[:, k] = 1.0
        try:
            sol = np.linalg.solve(a, b[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError as exc:
            raise ReconstructionError(
                "singular kriging system; check for duplicate sample points"
            ) from exc
        return (sol[:, :k] * nv).sum(axis=1)


_METHODS = {
    "knn": KNNReconstructor,
    "idw": IDWReconstructor,
    "rbf": RBFReconstructor,
    "kriging": KrigingReconstructor,
}

METHOD_NAMES = tuple(_METHODS)


def make_reconstructor(method: str, **params):
    """Instantiate a reconstructor by name ('knn', 'idw', 'rbf', 'kriging')."""
    try:
        cls = _METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {METHOD_NAMES}") from None
    return cls(**params)


def grid_coords(shape: tuple[int, int]) -> np.ndarray:
    """Integer pixel coordinates of every cell, shape (b_L*b_W, 2)."""
    xs, ys = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    return np.column_stack([xs.ravel(), ys.ravel()]).astype(np.float64)


def reconstruct(preprocessed: GridMap, mask, estimator) -> GridMap:
    """Fill a full normalized map from its sampled pixels.

    `estimator` is either a method name or a reconstructor instance.  The
    output is clamped to [0, 1].
    """
    if preprocessed.kind != "normalized":
        raise ValueError(f"expected a normalized map, got kind {preprocessed.kind!r}")
    mask = as_binary_mask("mask", mask)
    if mask.shape != preprocessed.shape:
        raise ValueError("mask shape does not match the map")
    if not mask.any():
        raise ValueError("mask selects no pixels")
    if isinstance(estimator, str):
        estimator = make_reconstructor(estimator)
    coords = np.argwhere(mask).astype(np.float64)
    values = preprocessed.data[mask]
    estimator.fit(coords, values)
    full = estimator.predict(grid_coords(preprocessed.shape))
    data = np.clip(full.reshape(preprocessed.shape), 0.0, 1.0)
    meta = dict(preprocessed.meta)
    meta["method"] = type(estimator).__name__
    return GridMap(data, "normalized", meta)
