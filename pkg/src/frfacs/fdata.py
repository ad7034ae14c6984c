"""Curve containers, wide-CSV I/O and truncated Fourier basis expansions."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import (
    DatasetFormatError,
    DatasetParseError,
    GridError,
    IllConditionedBasisError,
)

ORTHONORMALITY_TOL = 1e-4
MAX_BASIS_CONDITION = 1e12


def trapezoid_weights(points: np.ndarray) -> np.ndarray:
    """Trapezoid quadrature weights for a (possibly irregular) grid."""
    t = np.asarray(points, dtype=float)
    h = np.diff(t)
    w = np.zeros_like(t)
    w[:-1] += h / 2.0
    w[1:] += h / 2.0
    return w


class Grid:
    """Strictly increasing, finite evaluation points shared by a dataset."""

    __slots__ = ("_points", "_weights")

    def __init__(self, points: Sequence[float]):
        t = np.array(points, dtype=float).ravel()
        if t.size < 2:
            raise GridError(f"grid needs at least 2 points, got {t.size}")
        if not np.all(np.isfinite(t)):
            raise GridError("grid contains non-finite values")
        if np.any(np.diff(t) <= 0):
            bad = int(np.argmax(np.diff(t) <= 0))
            raise GridError(
                f"grid must be strictly increasing (t[{bad}]={t[bad]!r} >= t[{bad + 1}]={t[bad + 1]!r})"
            )
        t.setflags(write=False)
        w = trapezoid_weights(t)
        w.setflags(write=False)
        self._points = t
        self._weights = w

    @classmethod
    def uniform(cls, size: int, a: float = 0.0, b: float = 1.0) -> "Grid":
        return cls(np.linspace(a, b, size))

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        return self._weights

    @property
    def a(self) -> float:
        return float(self._points[0])

    @property
    def b(self) -> float:
        return float(self._points[-1])

    def __len__(self) -> int:
        return self._points.size

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Grid):
            return NotImplemented
        return np.array_equal(self._points, other._points)

    def __hash__(self):
        return hash(self._points.tobytes())

    def __repr__(self) -> str:
        return f"Grid(size={len(self)}, a={self.a:g}, b={self.b:g})"

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Quadrature of ``values`` along the last axis."""
        return np.asarray(values, dtype=float) @ self._weights

    def inner(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.integrate(np.asarray(x) * np.asarray(y))


def check_same_grid(g1: Grid, g2: Grid) -> None:
    if g1 != g2:
        raise GridError(f"grid mismatch: {g1!r} vs {g2!r}")


@dataclass(frozen=True)
class Curve:
    """A single function observed on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size != len(self.grid):
            raise GridError(f"curve has {v.size} values but grid has {len(self.grid)} points")
        if not np.all(np.isfinite(v)):
            raise ValueError("curve values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass
class FunctionalDataset:
    """``n`` curves on one shared grid together with 0-based class labels.

    ``label_names[k]`` is the original label of class ``k``; the number of
    classes ``K`` is ``len(label_names)`` and is preserved by :meth:`subset`.
    """

    grid: Grid
    values: np.ndarray
    labels: np.ndarray
    label_names: list = field(default_factory=list)
    ids: Optional[list] = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.values.shape[1] != len(self.grid):
            raise GridError(
                f"values have {self.values.shape[1]} columns but grid has {len(self.grid)} points"
            )
        if self.values.shape[0] != self.labels.size:
            raise ValueError(
                f"{self.values.shape[0]} curves but {self.labels.size} labels"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("curve values must be finite")
        if not self.label_names:
            k = int(self.labels.max()) + 1 if self.labels.size else 0
            self.label_names = [str(i) for i in range(k)]
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.label_names)):
            raise ValueError(f"labels must lie in 0..{len(self.label_names) - 1}")
        if self.ids is None:
            self.ids = [f"c{i:05d}" for i in range(self.labels.size)]
        elif len(self.ids) != self.labels.size:
            raise ValueError("ids and labels differ in length")

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def __len__(self) -> int:
        return self.n

    def curve(self, i: int) -> Curve:
        return Curve(self.grid, self.values[i])

    @property
    def curves(self) -> Iterator[Curve]:
        return (self.curve(i) for i in range(self.n))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, idx) -> "FunctionalDataset":
        idx = np.asarray(idx)
        return FunctionalDataset(
            self.grid,
            self.values[idx],
            self.labels[idx],
            list(self.label_names),
            [self.ids[i] for i in np.arange(self.n)[idx]],
        )

    def with_values(self, values: np.ndarray) -> "FunctionalDataset":
        return FunctionalDataset(self.grid, values, self.labels, list(self.label_names), list(self.ids))

    def to_csv(self, path) -> None:
        """Write the wide-CSV format read by :func:`load_dataset`."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "label"] + [repr(float(t)) for t in self.grid.points])
            for i in range(self.n):
                w.writerow(
                    [self.ids[i], self.label_names[self.labels[i]]]
                    + [repr(float(v)) for v in self.values[i]]
                )


def _parse_float(cell: str, row: int, col: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DatasetParseError(
            f"row {row}, column {col}: cannot parse {cell!r} as a number", row=row, column=col
        ) from None
    if not np.isfinite(v):
        raise DatasetParseError(f"row {row}, column {col}: non-finite value {cell!r}", row=row, column=col)
    return v


def load_dataset(path, expected_classes: Optional[int] = None) -> FunctionalDataset:
    """Read a wide CSV: header ``id,label,t1,...,tT``, then one curve per line.

    Labels are mapped to 0-based indices in order of first appearance; the
    original labels are kept in ``label_names``. Row and column numbers in
    error messages are 1-based file coordinates.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DatasetFormatError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 4 or header[0].strip() != "id" or header[1].strip() != "label":
        raise DatasetFormatError(f"{path}: header must be 'id,label,' followed by grid values")
    grid = Grid([_parse_float(c, 1, j + 1) for j, c in enumerate(header) if j >= 2])

    ids, raw_labels, values = [], [], []
    width = len(header)
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise DatasetFormatError(
                f"{path}: row {r} has {len(row) - 2} values, expected {width - 2} (one per grid point)"
            )
        ids.append(row[0].strip())
        raw_labels.append(row[1].strip())
        values.append([_parse_float(c, r, j + 3) for j, c in enumerate(row[2:])])
    if not values:
        raise DatasetFormatError(f"{path}: no curves")

    names: list = []
    lookup = {}
    labels = []
    for lab in raw_labels:
        if lab not in lookup:
            lookup[lab] = len(names)
            names.append(lab)
        labels.append(lookup[lab])
    if expected_classes is not None and len(names) != expected_classes:
        raise DatasetFormatError(f"{path}: expected {expected_classes} classes, found {len(names)}")
    return FunctionalDataset(grid, np.array(values), np.array(labels), names, ids)


@dataclass(frozen=True)
class FourierBasis:
    """Fourier basis curves evaluated on a grid (columns of ``values``).

    ``orthonormal`` is False when the grid is too coarse for the quadrature
    Gram matrix to be within ``ORTHONORMALITY_TOL`` of the identity.
    """

    grid: Grid
    values: np.ndarray
    orthonormal: bool

    @property
    def size(self) -> int:
        return self.values.shape[1]

    def gram(self) -> np.ndarray:
        return self.values.T @ (self.grid.weights[:, None] * self.values)


def fourier_basis(grid: Grid, n_basis: int) -> FourierBasis:
    """Constant, then sin/cos pairs of increasing frequency on ``[a, b]``.

    Each basis curve is normalised to unit trapezoid-quadrature norm.
    """
    if n_basis < 1:
        raise ValueError("n_basis must be >= 1")
    t = grid.points
    s = (t - grid.a) / (grid.b - grid.a)
    cols = [np.ones_like(t)]
    k = 1
    while len(cols) < n_basis:
        cols.append(np.sin(2 * np.pi * k * s))
        if len(cols) < n_basis:
            cols.append(np.cos(2 * np.pi * k * s))
        k += 1
    phi = np.column_stack(cols)
    norms = np.sqrt(grid.integrate(phi.T ** 2))
    # degenerate grids can alias a basis curve to zero; leave it unscaled
    phi = phi / np.where(norms > 0, norms, 1.0)
    gram = phi.T @ (grid.weights[:, None] * phi)
    ok = bool(np.max(np.abs(gram - np.eye(n_basis))) <= ORTHONORMALITY_TOL)
    if not ok:
        warnings.warn(
            f"Fourier basis with {n_basis} functions is not quadrature-orthonormal on {grid!r}",
            stacklevel=2,
        )
    phi.setflags(write=False)
    return FourierBasis(grid, phi, ok)


@dataclass(frozen=True)
class BasisCoefficients:
    coefficients: np.ndarray
    basis_kind: str = "fourier"


def _basis_solver(basis: FourierBasis):
    gram = basis.gram()
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > MAX_BASIS_CONDITION:
        raise IllConditionedBasisError(f"basis Gram matrix condition number {cond:.3g} exceeds {MAX_BASIS_CONDITION:g}")
    return gram


def project_values(values: np.ndarray, basis: FourierBasis) -> np.ndarray:
    """Least-squares coefficients (rows) for a matrix of curves on the basis grid."""
    gram = _basis_solver(basis)
    rhs = (np.atleast_2d(values) * basis.grid.weights) @ basis.values
    return np.linalg.solve(gram, rhs.T).T


def project_to_basis(curve: Curve, basis: FourierBasis) -> BasisCoefficients:
    """Quadrature-weighted least squares fit of ``curve`` on ``basis`` via normal equations."""
    check_same_grid(curve.grid, basis.grid)
    return BasisCoefficients(project_values(curve.values, basis)[0])


def reconstruct_from_basis(coeffs: BasisCoefficients, basis: FourierBasis) -> Curve:
    c = np.asarray(coeffs.coefficients if isinstance(coeffs, BasisCoefficients) else coeffs, dtype=float)
    if c.size != basis.size:
        raise ValueError(f"{c.size} coefficients for a basis of size {basis.size}")
    return Curve(basis.grid, basis.values @ c)


def smooth_dataset(data: FunctionalDataset, n_basis: int) -> FunctionalDataset:
    """Replace every curve by its projection onto a Fourier basis of size ``n_basis``."""
    basis = fourier_basis(data.grid, n_basis)
    coefs = project_values(data.values, basis)
    return data.with_values(coefs @ basis.values.T)
