"""Empirical functional PCA on a shared grid with trapezoid quadrature."""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GridError, InsufficientDataError
from .fdata import Curve, FunctionalDataset, Grid, check_same_grid
from .linalg import jacobi_eigh

DEFAULT_N_COMPONENTS = 10


def _digest(values: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(values, dtype=float).tobytes()).hexdigest()


@dataclass
class ScoreDataset:
    """Finite-dimensional representation: ``scores`` is n x M, one row per curve."""

    scores: np.ndarray
    labels: np.ndarray
    n_classes: int
    source: str = "fpca"

    def __post_init__(self):
        self.scores = np.atleast_2d(np.asarray(self.scores, dtype=float))
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.scores.shape[0] != self.labels.size:
            raise ValueError("scores and labels differ in length")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")

    @property
    def n(self) -> int:
        return self.labels.size

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass
class TruncationCheck:
    error: float
    tail_sum: float
    fitting_set: bool

    @property
    def relative_gap(self) -> float:
        denom = max(abs(self.tail_sum), np.finfo(float).tiny)
        return abs(self.error - self.tail_sum) / denom


@dataclass
class FpcaModel:
    """Fitted FPCA.

    All eigenpairs of the discretised covariance operator are kept
    (``all_eigenvalues``, ``all_eigenfunctions``); the first ``n_components``
    of them define the score transform.
    """

    grid: Grid
    mean_curve: np.ndarray
    all_eigenvalues: np.ndarray
    all_eigenfunctions: np.ndarray
    n_components: int
    n_fit: int = 0
    fit_digest: str = ""

    source = "fpca"

    @property
    def quadrature_weights(self) -> np.ndarray:
        return self.grid.weights

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.all_eigenvalues[: self.n_components]

    @property
    def eigenfunctions(self) -> np.ndarray:
        """Grid x M matrix, one retained eigenfunction per column."""
        return self.all_eigenfunctions[:, : self.n_components]

    def _values(self, curves) -> np.ndarray:
        if isinstance(curves, Curve):
            check_same_grid(curves.grid, self.grid)
            return curves.values[None, :]
        if isinstance(curves, FunctionalDataset):
            check_same_grid(curves.grid, self.grid)
            return curves.values
        v = np.atleast_2d(np.asarray(curves, dtype=float))
        if v.shape[1] != len(self.grid):
            raise GridError(f"curves have {v.shape[1]} points, model grid has {len(self.grid)}")
        return v

    def transform(self, curves, n_components: Optional[int] = None) -> np.ndarray:
        """Scores <x - mean, psi_m> for a Curve (1-D result) or a batch (2-D result)."""
        m = self.n_components if n_components is None else n_components
        v = self._values(curves)
        centred = (v - self.mean_curve) * self.grid.weights
        scores = centred @ self.all_eigenfunctions[:, :m]
        return scores[0] if isinstance(curves, Curve) else scores

    def reconstruct(self, scores) -> np.ndarray:
        """mean + sum_m score_m psi_m; 1-D input gives one curve, 2-D gives rows."""
        s = np.asarray(scores, dtype=float)
        single = s.ndim == 1
        s = np.atleast_2d(s)
        m = s.shape[1]
        if m > self.all_eigenfunctions.shape[1]:
            raise ValueError(f"{m} scores but only {self.all_eigenfunctions.shape[1]} eigenfunctions")
        if single and m != self.n_components:
            raise ValueError(f"expected {self.n_components} scores, got {m}")
        out = self.mean_curve + s @ self.all_eigenfunctions[:, :m].T
        return out[0] if single else out

    def reconstruct_curve(self, scores) -> Curve:
        return Curve(self.grid, self.reconstruct(np.asarray(scores, dtype=float).ravel()))

    def score_dataset(self, data: FunctionalDataset) -> ScoreDataset:
        return ScoreDataset(self.transform(data), data.labels, data.n_classes, "fpca")

    def lemma_check(self, data: FunctionalDataset, n_used: int) -> TruncationCheck:
        """Mean quadrature truncation error next to the eigenvalue tail sum."""
        k = self.all_eigenfunctions.shape[1]
        if not 0 <= n_used <= k:
            raise ValueError(f"n_used must lie in 0..{k}")
        v = self._values(data)
        scores = self.transform(v, n_used)
        resid = v - self.reconstruct(scores)
        err = float(np.mean(self.grid.integrate(resid ** 2)))
        tail = float(np.sum(self.all_eigenvalues[n_used:]))
        return TruncationCheck(err, tail, _digest(v) == self.fit_digest)

    def truncation_error(self, data: FunctionalDataset, n_used: int) -> float:
        check = self.lemma_check(data, n_used)
        if not check.fitting_set:
            warnings.warn("data is not the fitting set; truncation identity not guaranteed", stacklevel=2)
        return check.error

    def to_dict(self) -> dict:
        return {
            "kind": "fpca",
            "grid": self.grid.points.tolist(),
            "mean": self.mean_curve.tolist(),
            "eigenvalues": self.all_eigenvalues.tolist(),
            "eigenfunctions": self.all_eigenfunctions.T.tolist(),
            "weights": self.grid.weights.tolist(),
            "n_components": self.n_components,
            "n_fit": self.n_fit,
            "fit_digest": self.fit_digest,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FpcaModel":
        return cls(
            Grid(d["grid"]),
            np.array(d["mean"], dtype=float),
            np.array(d["eigenvalues"], dtype=float),
            np.array(d["eigenfunctions"], dtype=float).T.copy(),
            int(d["n_components"]),
            int(d.get("n_fit", 0)),
            d.get("fit_digest", ""),
        )

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)


def select_components(eigenvalues: np.ndarray, variance_fraction: float) -> int:
    """Smallest M whose cumulative eigenvalue share reaches ``variance_fraction``."""
    if not 0 < variance_fraction <= 1:
        raise ValueError("variance_fraction must lie in (0, 1]")
    total = eigenvalues.sum()
    if total <= 0:
        return 1
    frac = np.cumsum(eigenvalues) / total
    return int(np.searchsorted(frac, variance_fraction - 1e-12) + 1)


def fit_fpca(
    data: FunctionalDataset,
    n_components: Optional[int] = None,
    variance_fraction: Optional[float] = None,
    eigensolver: str = "jacobi",
) -> FpcaModel:
    """Fit FPCA by eigen-decomposing the quadrature-weighted sample covariance.

    The covariance uses the 1/n normalisation, so the mean squared
    truncation error on the fitting data equals the eigenvalue tail sum.
    ``n_components`` defaults to 10 unless ``variance_fraction`` is given;
    it is clipped to ``n - 1`` with a warning.
    """
    x = data.values
    n, T = x.shape
    if n < 2:
        raise InsufficientDataError(f"FPCA needs at least 2 curves, got {n}")
    if n_components is not None and variance_fraction is not None:
        raise ValueError("give either n_components or variance_fraction, not both")
    if n_components is not None and n_components < 1:
        raise ValueError("n_components must be >= 1")

    w = data.grid.weights
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / n
    sw = np.sqrt(w)
    sym = sw[:, None] * cov * sw[None, :]
    if eigensolver == "jacobi":
        lam, vecs = jacobi_eigh(sym)
    elif eigensolver == "numpy":
        lam, vecs = np.linalg.eigh(sym)
        lam, vecs = lam[::-1], vecs[:, ::-1]
    else:
        raise ValueError(f"unknown eigensolver {eigensolver!r}")
    lam = np.where(lam < 0, 0.0, lam)
    psi = vecs / sw[:, None]
    psi /= np.sqrt(psi.T ** 2 @ w)
    # deterministic sign: largest-magnitude grid value positive
    peak = psi[np.argmax(np.abs(psi), axis=0), np.arange(T)]
    psi *= np.where(peak < 0, -1.0, 1.0)

    if variance_fraction is not None:
        m = select_components(lam, variance_fraction)
    else:
        m = DEFAULT_N_COMPONENTS if n_components is None else int(n_components)
    limit = min(n - 1, T)
    if m > limit:
        warnings.warn(f"n_components={m} clipped to {limit}", stacklevel=2)
        m = limit
    # C order keeps transforms bit-identical after a JSON round trip
    return FpcaModel(data.grid, mean, lam, np.ascontiguousarray(psi), m, n, _digest(x))


@dataclass
class BasisRepresentation:
    """Fourier-coefficient features exposing the same interface as FpcaModel."""

    basis: "object"
    source = "basis"

    @property
    def grid(self) -> Grid:
        return self.basis.grid

    @property
    def n_components(self) -> int:
        return self.basis.size

    def transform(self, curves) -> np.ndarray:
        from .fdata import project_values

        if isinstance(curves, Curve):
            check_same_grid(curves.grid, self.grid)
            return project_values(curves.values, self.basis)[0]
        if isinstance(curves, FunctionalDataset):
            check_same_grid(curves.grid, self.grid)
            curves = curves.values
        return project_values(curves, self.basis)

    def reconstruct(self, scores) -> np.ndarray:
        s = np.asarray(scores, dtype=float)
        return s @ self.basis.values.T

    def score_dataset(self, data: FunctionalDataset) -> ScoreDataset:
        return ScoreDataset(self.transform(data), data.labels, data.n_classes, "basis")

    def to_dict(self) -> dict:
        return {"kind": "basis", "grid": self.grid.points.tolist(), "n_basis": self.basis.size}

    @classmethod
    def from_dict(cls, d: dict) -> "BasisRepresentation":
        from .fdata import fourier_basis

        return cls(fourier_basis(Grid(d["grid"]), int(d["n_basis"])))


def representation_from_dict(d: dict):
    if d.get("kind") == "basis":
        return BasisRepresentation.from_dict(d)
    return FpcaModel.from_dict(d)
