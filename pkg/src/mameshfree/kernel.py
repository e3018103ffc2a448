"""Wendland compactly supported radial kernels and their scaled versions.

Profiles are stored as exact integer-coefficient polynomials on [0, 1].
The quotients phi'(r)/r and (phi''(r) - phi'(r)/r)/r that appear in the
gradient and Hessian of a radial function are formed by polynomial
division on the coefficients, so r = 0 needs no special casing.
Evaluation uses the same polynomials rewritten in t = 1 - r: the
(1 - r)^k factor becomes k leading zero coefficients, which keeps the
values accurate to full relative precision near the support edge.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

DIM = 2

_ONE_MINUS_R = Polynomial([1.0, -1.0])


def _divide_by_r(p: Polynomial) -> tuple[Polynomial, bool]:
    """Exact division of ``p`` by ``r``; second value reports whether it was exact."""
    coef = p.coef
    exact = abs(coef[0]) <= 1e-9 * max(1.0, np.abs(coef).max())
    return Polynomial(coef[1:] if len(coef) > 1 else [0.0]), exact


def _in_t(p: Polynomial) -> Polynomial:
    """Coefficients of p(1 - t) in powers of t, with round-off zeros cleared."""
    q = p(_ONE_MINUS_R)
    coef = q.coef.copy()
    coef[np.abs(coef) <= 1e-12 * np.abs(coef).max()] = 0.0
    return Polynomial(coef)


@dataclass(frozen=True)
class KernelFamily:
    """One Wendland profile phi(r), supported on [0, 1].

    ``smoothness`` is k in phi in C^{2k}; ``sobolev_order`` is the native
    space order k + d/2 + 1/2 for d = 2.
    """

    name: str
    smoothness: int
    profile: Polynomial = field(repr=False)

    def __post_init__(self):
        d1 = self.profile.deriv()
        d2 = d1.deriv()
        d1_over_r, ok = _divide_by_r(d1)
        if not ok:
            raise ValueError(f"{self.name}: profile derivative does not vanish at 0")
        w, ok = _divide_by_r(d2 - d1_over_r)
        if not ok:
            raise ValueError(f"{self.name}: Hessian numerator does not vanish at 0")
        # w = (phi'' - phi'/r) / r.  For C2 one more division is not exact.
        w_over_r, w_even = _divide_by_r(w)
        object.__setattr__(self, "_d1", d1)
        object.__setattr__(self, "_d2", d2)
        object.__setattr__(self, "_d1_over_r", d1_over_r)
        object.__setattr__(self, "_w", w)
        object.__setattr__(self, "_w_over_r", w_over_r if w_even else None)
        object.__setattr__(self, "_t", {
            "phi": _in_t(self.profile), "d1": _in_t(d1), "d2": _in_t(d2),
            "d1_over_r": _in_t(d1_over_r), "w": _in_t(w),
            "w_over_r": _in_t(w_over_r) if w_even else None,
        })

    def _at(self, key, r):
        """Evaluate the stored polynomial ``key`` at r, zero outside [0, 1)."""
        r = np.asarray(r, dtype=float)
        t = 1.0 - np.minimum(r, 1.0)
        return self._t[key](t) * (r < 1.0)

    @property
    def sobolev_order(self) -> float:
        return self.smoothness + DIM / 2 + 0.5

    @property
    def phi0(self) -> float:
        return float(self.profile(0.0))

    @property
    def hessian_continuous(self) -> bool:
        """False for C2, whose second derivatives jump at r = 0 direction-wise."""
        return self._w_over_r is not None

    def radial_profile(self, r):
        """Return (phi, phi', phi'') at r >= 0; all three vanish for r >= 1."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(np.isnan(r)):
            raise ValueError("radial_profile: r must be nonnegative")
        return self._at("phi", r), self._at("d1", r), self._at("d2", r)

    def radial_quotients(self, r):
        """Return (phi'/r, (phi'' - phi'/r)/r) with their continuous extensions at 0."""
        return self._at("d1_over_r", r), self._at("w", r)


def _wendland(name: str, power: int, poly: list[float], k: int) -> KernelFamily:
    return KernelFamily(name, k, _ONE_MINUS_R**power * Polynomial(poly))


C2 = _wendland("C2", 4, [1.0, 4.0], 1)
C4 = _wendland("C4", 6, [3.0, 18.0, 35.0], 2)
C6 = _wendland("C6", 8, [1.0, 8.0, 25.0, 32.0], 3)

FAMILIES = {fam.name: fam for fam in (C2, C4, C6)}


def get_family(name: str) -> KernelFamily:
    try:
        return FAMILIES[name.upper()]
    except KeyError:
        raise ValueError(f"unknown kernel family {name!r}; expected one of {sorted(FAMILIES)}") from None


def radial_profile(family: KernelFamily, r):
    return family.radial_profile(r)


@dataclass(frozen=True)
class ScaledKernel:
    """Phi_delta(x, y) = delta^{-2} phi(|x - y| / delta), support radius delta."""

    family: KernelFamily
    delta: float

    def __post_init__(self):
        if not (0.0 < self.delta <= 1.0):
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")

    @property
    def support(self) -> float:
        return self.delta

    def eval_diff(self, z):
        """Kernel values for difference vectors ``z = x - y`` of shape (..., 2)."""
        z = np.asarray(z, dtype=float)
        r = np.hypot(z[..., 0], z[..., 1]) / self.delta
        return self.family._at("phi", r) / self.delta**DIM

    def jet_diff(self, z):
        """Value, gradient (..., 2) and Hessian (..., 2, 2) in x for ``z = x - y``."""
        z = np.asarray(z, dtype=float)
        d = self.delta
        u = z / d
        r = np.hypot(u[..., 0], u[..., 1])
        g1, w = self.family.radial_quotients(r)

        value = self.family._at("phi", r) / d**2
        grad = (g1 / d**3)[..., None] * u
        uu = u[..., :, None] * u[..., None, :]
        if self.family._w_over_r is not None:
            g2 = self.family._at("w_over_r", r)
            outer = g2[..., None, None] * uu
        else:
            # w(r) * u u^T / r tends to 0 as r -> 0 because |u u^T| = r^2
            safe = np.where(r > 0, r, 1.0)
            outer = (np.where(r > 0, w / safe, 0.0))[..., None, None] * uu
        eye = np.eye(2)
        hess = (g1[..., None, None] * eye + outer) / d**4
        return value, grad, hess

    def second_partials_diff(self, z):
        """(Phi_xx, Phi_xy, Phi_yy) for ``z = x - y``; cheaper than a full jet."""
        _, _, hess = self.jet_diff(z)
        return hess[..., 0, 0], hess[..., 0, 1], hess[..., 1, 1]


def scaled_eval(kernel: ScaledKernel, x, y):
    return kernel.eval_diff(np.asarray(x, float) - np.asarray(y, float))


def scaled_jet(kernel: ScaledKernel, x, y):
    return kernel.jet_diff(np.asarray(x, float) - np.asarray(y, float))
