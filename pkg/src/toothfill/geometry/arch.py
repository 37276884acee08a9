"""Dental-arch curve fitting and 3D/2D contour assignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ToothfillError, UnderdeterminedFit


@dataclass
class ArchCurve:
    """Degree-4 polynomial y = sum(c_i * x^i) over [x_min, x_max]."""

    coefficients: np.ndarray
    x_min: float
    x_max: float

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if self.coefficients.shape != (5,):
            raise ToothfillError("arch curve needs 5 coefficients")
        if not np.all(np.isfinite(self.coefficients)):
            raise ToothfillError("non-finite arch-curve coefficients")
        if not self.x_min < self.x_max:
            raise ToothfillError("empty arch-curve domain")

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.polynomial.polynomial.polyval(x, self.coefficients)

    def arc_length(self, x) -> np.ndarray:
        """Arc length from x_min to x, by dense trapezoidal quadrature."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        grid = np.linspace(self.x_min, max(self.x_max, x.max()), 4097)
        dcoef = np.polynomial.polynomial.polyder(self.coefficients)
        speed = np.sqrt(1.0 + np.polynomial.polynomial.polyval(grid, dcoef) ** 2)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(grid))])
        return np.interp(np.clip(x, self.x_min, grid[-1]), grid, cum)


def fit_arch_curve(centers) -> ArchCurve:
    """Least-squares degree-4 fit of y against x for >= 5 planar centers."""
    pts = np.asarray(centers, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ToothfillError("centers must be (N, 2)")
    if len(pts) < 5:
        raise UnderdeterminedFit(f"need at least 5 points, got {len(pts)}")
    x, y = pts[:, 0], pts[:, 1]
    vand = np.vander(x, 5, increasing=True)
    coef, _, rank, _ = np.linalg.lstsq(vand, y, rcond=None)
    if rank < 5:
        raise UnderdeterminedFit("rank-deficient system (repeated x values?)")
    return ArchCurve(coefficients=coef, x_min=float(x.min()), x_max=float(x.max()))


def assign_contours(centers3d, centers2d, curve: ArchCurve) -> list[tuple[int, int]]:
    """Match 3D tooth centers to 2D contour centers through the arch curve.

    3D centers are ordered by arc length of their occlusal-plane projection
    along the curve; 2D centers by their horizontal position.  Matching the
    two orders gives a bijective assignment, returned as (i3d, i2d) pairs.
    """
    c3 = np.asarray(centers3d, dtype=np.float64)
    c2 = np.asarray(centers2d, dtype=np.float64)
    if c3.ndim != 2 or c3.shape[1] != 3:
        raise ToothfillError("centers3d must be (N, 3)")
    if c2.ndim != 2 or c2.shape[1] != 2:
        raise ToothfillError("centers2d must be (N, 2)")
    if len(c3) != len(c2):
        raise ToothfillError("3D and 2D center counts differ")
    s3 = curve.arc_length(c3[:, 0])
    order3 = np.argsort(s3, kind="stable")
    order2 = np.argsort(c2[:, 0], kind="stable")
    return [(int(i3), int(i2)) for i3, i2 in zip(order3, order2)]
