"""Trial space spanned by scaled kernel translates, interpolation and evaluation."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .geometry import PointSet
from .kernel import ScaledKernel

log = logging.getLogger(__name__)

JET_PARTS = ("value", "x", "y", "xx", "xy", "yy")


class GramFactorizationError(np.linalg.LinAlgError):
    def __init__(self, msg: str, smallest_pivot: float):
        super().__init__(msg)
        self.smallest_pivot = smallest_pivot


@dataclass
class Coefficients:
    c: np.ndarray
    jitter: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)

    def __len__(self):
        return len(self.c)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "c"])
            for i, v in enumerate(self.c):
                w.writerow([i, repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "Coefficients":
        with open(path, newline="") as fh:
            rows = sorted(csv.DictReader(fh), key=lambda r: int(r["index"]))
        return cls(np.array([float(r["c"]) for r in rows]))


class TrialSpace:
    """span{Phi_delta(. - y) : y in Y}, centers ordered interior then boundary."""

    def __init__(self, centers: PointSet, kernel: ScaledKernel):
        if len(centers) < 1:
            raise ValueError("trial space needs at least one center")
        self.centers = centers
        self.kernel = kernel
        self.points = centers.all
        if len(self.points) > 1:
            d, _ = cKDTree(self.points).query(self.points, k=2)
            if d[:, 1].min() <= 0:
                raise ValueError("trial centers must be pairwise distinct")
        self._factor = None
        self.jitter = 0.0

    @property
    def N(self) -> int:
        return len(self.points)

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(self.points)

    def pairs(self, x, dense: bool = False):
        """Index pairs (i, j) with |x_i - y_j| < delta, and the differences x_i - y_j."""
        x = np.atleast_2d(np.asarray(x, float))
        if dense:
            rows, cols = np.indices((len(x), self.N)).reshape(2, -1)
        else:
            hits = cKDTree(x).sparse_distance_matrix(self._tree, self.kernel.delta, output_type="ndarray")
            hits = hits[hits["v"] < self.kernel.delta]
            rows, cols = hits["i"].astype(np.intp), hits["j"].astype(np.intp)
        return rows, cols, x[rows] - self.points[cols]

    def design(self, x, parts=JET_PARTS, dense: bool = False) -> dict[str, sp.csr_matrix]:
        """Sparse evaluation matrices, one per requested jet component."""
        x = np.atleast_2d(np.asarray(x, float))
        rows, cols, z = self.pairs(x, dense=dense)
        shape = (len(x), self.N)
        if tuple(parts) == ("value",):
            return {"value": sp.csr_matrix((self.kernel.eval_diff(z), (rows, cols)), shape=shape)}
        value, grad, hess = self.kernel.jet_diff(z)
        data = {
            "value": value,
            "x": grad[:, 0],
            "y": grad[:, 1],
            "xx": hess[:, 0, 0],
            "xy": hess[:, 0, 1],
            "yy": hess[:, 1, 1],
        }
        return {p: sp.csr_matrix((data[p], (rows, cols)), shape=shape) for p in parts}

    def gram_matrix(self) -> np.ndarray:
        A = self.design(self.points, parts=("value",))["value"].toarray()
        return 0.5 * (A + A.T)

    def _factorize(self):
        if self._factor is not None:
            return self._factor
        A = self.gram_matrix()
        try:
            self._factor = sla.cho_factor(A, lower=True)
        except np.linalg.LinAlgError:
            jitter = 1e-12 * np.trace(A) / self.N
            log.warning("Gram factorization failed; retrying with diagonal jitter %.3e", jitter)
            try:
                self._factor = sla.cho_factor(A + jitter * np.eye(self.N), lower=True)
            except np.linalg.LinAlgError:
                pivot = float(np.linalg.eigvalsh(A)[0])
                raise GramFactorizationError(
                    f"Gram matrix is numerically singular (smallest pivot estimate {pivot:.3e})", pivot
                ) from None
            self.jitter = jitter
        return self._factor

    def interpolate(self, values) -> Coefficients:
        values = np.asarray(values, float)
        if values.shape != (self.N,):
            raise ValueError(f"expected {self.N} values, got shape {values.shape}")
        c = sla.cho_solve(self._factorize(), values)
        return Coefficients(c, jitter=self.jitter)

    def interpolate_field(self, field) -> Coefficients:
        return self.interpolate(field(self.points[:, 0], self.points[:, 1]))

    def eval(self, c, x) -> np.ndarray:
        c = c.c if isinstance(c, Coefficients) else np.asarray(c, float)
        return self.design(x, parts=("value",))["value"] @ c

    def eval_jet(self, c, x):
        """Value, gradient and Hessian of s = sum_j c_j Phi_delta(. - y_j).

        For a single point the shapes are (), (2,), (2, 2); for P points
        (P,), (P, 2), (P, 2, 2).
        """
        c = c.c if isinstance(c, Coefficients) else np.asarray(c, float)
        single = np.ndim(x) == 1
        D = self.design(x)
        s = D["value"] @ c
        grad = np.column_stack([D["x"] @ c, D["y"] @ c])
        hxx, hxy, hyy = D["xx"] @ c, D["xy"] @ c, D["yy"] @ c
        hess = np.stack([np.column_stack([hxx, hxy]), np.column_stack([hxy, hyy])], axis=1)
        if single:
            return s[0], grad[0], hess[0]
        return s, grad, hess


def gram_matrix(ts: TrialSpace) -> np.ndarray:
    return ts.gram_matrix()


def interpolate(ts: TrialSpace, values) -> Coefficients:
    return ts.interpolate(values)


def eval_jet(ts: TrialSpace, c, x):
    return ts.eval_jet(c, x)
