"""Real spherical harmonics up to degree 4 as polynomials in (x, y, z).

A degree-l harmonic is the restriction of a homogeneous degree-l polynomial
to the unit sphere, so each Y_lm is stored as monomial exponents and
coefficients.  Coefficients are fitted once against scipy's complex
harmonics; the fit is exact up to rounding.
"""

from functools import lru_cache

import numpy as np
from scipy.special import sph_harm_y

L_MAX = 4


def real_sph_harm(l, m, polar, azimuth):
    """Orthonormal real spherical harmonic Y_lm evaluated from angles."""
    if m > 0:
        return np.sqrt(2) * (-1) ** m * sph_harm_y(l, m, polar, azimuth).real
    if m < 0:
        return np.sqrt(2) * (-1) ** m * sph_harm_y(l, -m, polar, azimuth).imag
    return sph_harm_y(l, 0, polar, azimuth).real


def _exponents(l):
    return np.array([(i, j, l - i - j) for i in range(l + 1) for j in range(l + 1 - i)])


@lru_cache(maxsize=None)
def harmonic_polynomial(l, m):
    """Return ``(exponents, coefficients)`` with Y_lm(u) = sum c * u**e."""
    if not 0 <= l <= L_MAX or abs(m) > l:
        raise ValueError(f"need 0 <= l <= {L_MAX} and |m| <= l, got l={l}, m={m}")
    rng = np.random.default_rng(l * 31 + m)
    u = rng.normal(size=(200, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    polar = np.arccos(np.clip(u[:, 2], -1, 1))
    azimuth = np.arctan2(u[:, 1], u[:, 0])
    exps = _exponents(l)
    basis = np.prod(u[:, None, :] ** exps[None, :, :], axis=2)
    target = real_sph_harm(l, m, polar, azimuth)
    coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
    resid = np.max(np.abs(basis @ coef - target))
    assert resid < 1e-11, f"harmonic fit failed for ({l}, {m}): {resid}"
    coef[np.abs(coef) < 1e-13] = 0.0
    keep = coef != 0.0
    return exps[keep], coef[keep]


class Polynomial:
    """A polynomial in three variables, vectorized over points."""

    def __init__(self, exponents, coefficients):
        self.exponents = np.asarray(exponents, dtype=int).reshape(-1, 3)
        self.coefficients = np.asarray(coefficients, dtype=float).reshape(-1)

    @classmethod
    def from_harmonics(cls, coeffs, weight=None):
        """Sum of ``a * Y_lm`` (optionally times ``weight(l)``) over ``coeffs``."""
        exps, vals = [], []
        for l, m, a in coeffs:
            e, c = harmonic_polynomial(l, m)
            scale = a if weight is None else a * weight(l)
            exps.append(e)
            vals.append(scale * c)
        if not exps:
            return cls(np.zeros((0, 3)), np.zeros(0))
        return cls(np.concatenate(exps), np.concatenate(vals))

    @staticmethod
    def _powers(u):
        return np.stack([np.ones_like(u), u, u * u, u * u * u, (u * u) * (u * u)], axis=-2)

    def _monomials(self, P, exps):
        return P[..., exps[:, 0], 0] * P[..., exps[:, 1], 1] * P[..., exps[:, 2], 2]

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if len(self.coefficients) == 0:
            return np.zeros(u.shape[:-1])
        return self._monomials(self._powers(u), self.exponents) @ self.coefficients

    def gradient(self, u):
        """Ambient gradient, shape ``u.shape``."""
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape)
        if len(self.coefficients) == 0:
            return out
        P = self._powers(u)
        for k in range(3):
            e = self.exponents.copy()
            factor = e[:, k].astype(float)
            e[:, k] = np.maximum(e[:, k] - 1, 0)
            out[..., k] = self._monomials(P, e) @ (self.coefficients * factor)
        return out
