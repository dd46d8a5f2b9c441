"""Conversions between the statistic spaces used by the tests.

The proposed test works with R (r-space). Importance sampling works on the
Beta scale z = r / (m - 2 + r) (z-space). The known-variance test works with
phi = ||X^T v||_2 (phi-space). All functions accept scalars or numpy arrays.
"""

import numpy as np


def r_to_z(r, m: int):
    """F-scale statistic -> Beta(q/2, (m-2)q/2) scale."""
    r = np.asarray(r, dtype=float)
    with np.errstate(invalid="ignore"):
        z = np.where(np.isinf(r), 1.0, r / (m - 2 + r))
    return z[()] if z.ndim == 0 else z


def z_to_r(z, m: int):
    """Inverse of r_to_z; z = 1 maps to +inf."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        r = np.where(z >= 1.0, np.inf, (m - 2) * z / (1.0 - z))
    return r[()] if r.ndim == 0 else r


def r_to_phi(r, norm1: float, v_norm: float, m: int):
    """K = 2 link between the two spaces: phi = sqrt(r/(m-2)) * ||P1 X||_F * ||v||_2."""
    r = np.asarray(r, dtype=float)
    phi = np.sqrt(r / (m - 2)) * norm1 * v_norm
    return phi[()] if phi.ndim == 0 else phi


def phi_to_r(phi, norm1: float, v_norm: float, m: int):
    """Inverse of r_to_phi."""
    phi = np.asarray(phi, dtype=float)
    r = (m - 2) * (phi / (norm1 * v_norm)) ** 2
    return r[()] if r.ndim == 0 else r


def li_transform(t, k: int, l: int):
    """Argument of the chi^2_k CDF in Li's approximation of the F_{k,l} CDF.

    F_{F_{k,l}}(t) ~= F_{chi^2_k}( (2l + kt/3 + k - 2) / (2l + 4kt/3) * kt ).
    Increasing in t for l >= 1; +inf maps to +inf.
    """
    t = np.asarray(t, dtype=float)
    with np.errstate(invalid="ignore"):
        kt = k * t
        out = (2 * l + kt / 3 + k - 2) / (2 * l + 4 * kt / 3) * kt
        out = np.where(np.isinf(t), np.inf, out)
    return out[()] if out.ndim == 0 else out
