"""Closed-form 2x2 matrix exponentials.

For a real 2x2 matrix ``m`` with eigenvalues ``lam1, lam2``, the exponential
``e^{t m}`` equals ``s0(t) I + s1(t) m`` with scalar coefficient functions

* distinct eigenvalues:
    ``s0(t) = (lam1 e^{lam2 t} - lam2 e^{lam1 t}) / (lam1 - lam2)``
    ``s1(t) = (e^{lam1 t} - e^{lam2 t}) / (lam1 - lam2)``
* repeated eigenvalue ``lam``:
    ``s0(t) = (1 - lam t) e^{lam t}``,  ``s1(t) = t e^{lam t}``

Complex-conjugate pairs ``a +/- ib`` are evaluated in real arithmetic:
``s1(t) = e^{a t} sin(b t) / b``, ``s0(t) = e^{a t} (cos(b t) - a sin(b t)/b)``.

A truncated-Taylor scaling-and-squaring exponential is provided as an
independent cross-check; it shares no code with the closed-form path.
All functions are pure and safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EigenPair2",
    "eigen2",
    "s0s1",
    "matexp",
    "matexp_oracle",
]

# Relative gap below which a near-repeated eigenvalue pair is collapsed to a
# single root; the distinct-root formulas lose roughly |gap|^-1 digits to
# cancellation, so below this the repeated-root branch is more accurate.
COLLAPSE_RTOL = 1e-9

# Taylor-series order and the input bound at which the oracle's truncation
# error stays below 1e-13: after scaling, ||t*m||_inf / 2^s <= 20/512, and the
# 25-term tail at that argument is ~1e-61 before squaring amplification.
ORACLE_TERMS = 25
ORACLE_NORM_BOUND = 20.0


def _as_mat2(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def _norm_inf(a: np.ndarray) -> float:
    """Induced infinity norm (max absolute row sum)."""
    return float(np.max(np.sum(np.abs(a), axis=1)))


@dataclass(frozen=True)
class EigenPair2:
    """Eigenvalues of a real 2x2 matrix, stored as (real, imag) parts.

    ``kind`` is one of ``"distinct-real"``, ``"repeated"``,
    ``"complex-conjugate"``.  For a complex pair the two values are exact
    conjugates; for a repeated root both values are identical.
    """

    kind: str
    re1: float
    im1: float
    re2: float
    im2: float

    def __post_init__(self):
        if self.kind not in ("distinct-real", "repeated", "complex-conjugate"):
            raise ValueError(f"unknown eigenvalue classification {self.kind!r}")


def eigen2(m) -> EigenPair2:
    """Eigenvalues of a real 2x2 matrix via the characteristic quadratic.

    Roots of ``lam^2 - tr(m) lam + det(m) = 0``.  Pairs whose gap
    ``|lam1 - lam2|`` is below ``COLLAPSE_RTOL * max(1, ||m||_inf)`` are
    collapsed to the repeated root ``tr(m)/2``.
    """
    a = _as_mat2(m)
    tr = a[0, 0] + a[1, 1]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    disc = tr * tr - 4.0 * det
    # |lam1 - lam2| = sqrt(|disc|) for either sign of the discriminant.
    gap = math.sqrt(abs(disc))
    if gap < COLLAPSE_RTOL * max(1.0, _norm_inf(a)):
        lam = 0.5 * tr
        return EigenPair2("repeated", lam, 0.0, lam, 0.0)
    if disc > 0.0:
        half = 0.5 * math.sqrt(disc)
        return EigenPair2("distinct-real", 0.5 * tr + half, 0.0, 0.5 * tr - half, 0.0)
    half = 0.5 * math.sqrt(-disc)
    return EigenPair2("complex-conjugate", 0.5 * tr, half, 0.5 * tr, -half)


def s0s1(eig: EigenPair2, t: float) -> tuple[float, float]:
    """Scalar coefficients of ``e^{t m} = s0 I + s1 m``; always real."""
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    if eig.kind == "repeated":
        lam = eig.re1
        e = math.exp(lam * t)
        return (1.0 - lam * t) * e, t * e
    if eig.kind == "distinct-real":
        l1, l2 = eig.re1, eig.re2
        e1, e2 = math.exp(l1 * t), math.exp(l2 * t)
        d = l1 - l2
        return (l1 * e2 - l2 * e1) / d, (e1 - e2) / d
    # complex-conjugate pair a +/- ib, b != 0
    a, b = eig.re1, eig.im1
    e = math.exp(a * t)
    sin_bt = math.sin(b * t) / b
    return e * (math.cos(b * t) - a * sin_bt), e * sin_bt


def matexp(m, t: float) -> np.ndarray:
    """``e^{t m}`` for a real 2x2 matrix, via the closed-form coefficients.

    Callers that need the one-step transition map of a drift matrix pass a
    negative ``t`` (the map over a step ``delta`` is ``matexp(beta, -delta)``).
    """
    a = _as_mat2(m)
    s0, s1 = s0s1(eigen2(a), t)
    return s0 * np.eye(2) + s1 * a


def matexp_oracle(m, t: float) -> np.ndarray:
    """``e^{t m}`` by scaling-and-squaring of a truncated Taylor series.

    Independent of the closed-form path; intended as a test oracle.
    Truncation error is below 1e-13 for ``|t| * ||m||_inf <= 20`` (the
    scaled argument then has norm <= 20/512 and the series tail is
    negligible even after squaring amplification).
    """
    a = _as_mat2(m) * float(t)
    norm = _norm_inf(a)
    squarings = math.ceil(math.log2(max(1.0, norm))) + 4
    b = a / (2.0**squarings)
    total = np.eye(2)
    term = np.eye(2)
    for k in range(1, ORACLE_TERMS):
        term = term @ b / k
        total = total + term
    for _ in range(squarings):
        total = total @ total
    return total
