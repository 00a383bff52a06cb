"""Small numerical kernel shared by the rest of the package.

Everything here works in double precision on 2x2 systems: eigenvalues,
Newton polishing of planar roots, scalar bisection, and the quasi-random
point sets used for sampling orbits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

Mat2 = np.ndarray  # shape (2, 2), row-major, finite entries

# Newton defaults shared with the equilibrium finder.
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
SINGULAR_COND = 1e12


class NoSignChange(ValueError):
    """Raised by :func:`bisect` when the bracket does not straddle a root."""


def eig2(m: Mat2) -> tuple[complex, complex]:
    """Eigenvalues of a real 2x2 matrix, largest modulus first.

    Uses the cancellation-free form of the quadratic formula on the
    characteristic polynomial ``lam^2 - tr*lam + det``.
    """
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    half = 0.5 * tr
    # discriminant of lam^2 - tr lam + det, written to avoid tr^2 overflow
    disc = 0.25 * (m[0, 0] - m[1, 1]) ** 2 + m[0, 1] * m[1, 0]
    if disc >= 0.0:
        s = math.sqrt(disc)
        q = half + math.copysign(s, half) if half != 0.0 else s
        if q == 0.0:
            lam1 = lam2 = 0.0
        else:
            lam1 = q
            lam2 = det / q
        pair = (complex(lam1), complex(lam2))
    else:
        s = math.sqrt(-disc)
        pair = (complex(half, s), complex(half, -s))
    return tuple(sorted(pair, key=lambda z: (-abs(z), -z.real, -z.imag)))  # type: ignore[return-value]


def spectral_radius(m: Mat2) -> float:
    return abs(eig2(m)[0])


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], p: np.ndarray, h: float | None = None) -> Mat2:
    """Central-difference Jacobian of a planar field.

    The default step is ``1e-7 * max(1, |p|)``.
    """
    p = np.asarray(p, dtype=float)
    if h is None:
        h = 1e-7 * max(1.0, float(np.linalg.norm(p)))
    jac = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        jac[:, j] = (np.asarray(f(p + e)) - np.asarray(f(p - e))) / (2.0 * h)
    return jac


@dataclass(frozen=True)
class NewtonResult:
    point: np.ndarray
    converged: bool
    iterations: int
    residual: float
    reason: str = ""


def newton2(
    f: Callable[[np.ndarray], np.ndarray],
    seed,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
    jac: Callable[[np.ndarray], Mat2] | None = None,
    box: tuple[float, float, float, float] | None = None,
) -> NewtonResult:
    """Newton's method for a planar root of ``f``.

    Convergence means ``|f|_inf < tol`` at the returned point, or a step
    shorter than ``tol`` landing on a point whose residual is at most
    ``100 * tol``; the residual is always recomputed, never assumed.
    The iteration is declared divergent when the budget runs out, the
    iterate leaves ``box`` (default: a box ten times the seed's scale), or
    values become non-finite. A near-singular Jacobian triggers a damped
    gradient step instead of the Newton step.
    """
    x = np.array(seed, dtype=float)
    if box is None:
        scale = 10.0 * max(1.0, float(np.max(np.abs(x))))
        box = (-scale, scale, -scale, scale)
    fx = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(fx)):
        return NewtonResult(x, False, 0, math.inf, "non-finite residual at seed")
    res = float(np.max(np.abs(fx)))
    for it in range(max_iter + 1):
        if res < tol:
            return NewtonResult(x, True, it, res)
        if it == max_iter:
            break
        J = jac(x) if jac is not None else fd_jacobian(f, x)
        if not np.all(np.isfinite(J)):
            return NewtonResult(x, False, it, res, "non-finite Jacobian")
        try:
            cond = np.linalg.cond(J)
        except np.linalg.LinAlgError:
            cond = math.inf
        if cond > SINGULAR_COND:
            g = J.T @ fx
            gn = float(g @ g)
            if gn == 0.0:
                return NewtonResult(x, False, it, res, "singular Jacobian")
            dx = -(float(fx @ fx) / gn) * g * 0.5
        else:
            dx = -np.linalg.solve(J, fx)
        x_new = x + dx
        if not (box[0] <= x_new[0] <= box[1] and box[2] <= x_new[1] <= box[3]):
            return NewtonResult(x_new, False, it + 1, res, "left bounding box")
        f_new = np.asarray(f(x_new), dtype=float)
        if not np.all(np.isfinite(f_new)):
            return NewtonResult(x_new, False, it + 1, math.inf, "non-finite residual")
        x, fx = x_new, f_new
        res = float(np.max(np.abs(fx)))
        if float(np.max(np.abs(dx))) < tol and res < 100 * tol:
            return NewtonResult(x, True, it + 1, res)
    return NewtonResult(x, False, max_iter, res, "iteration budget exhausted")


def bisect(g: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Root of a scalar function on a sign-changing bracket.

    Returns a point within ``tol`` of a sign change of ``g``; an endpoint
    where ``g`` is exactly zero is returned as is.
    """
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if not (math.isfinite(glo) and math.isfinite(ghi)) or (glo > 0) == (ghi > 0):
        raise NoSignChange(f"g({lo})={glo} and g({hi})={ghi} do not bracket a root")
    for _ in range(max_iter):
        if abs(hi - lo) <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        gm = g(mid)
        if gm == 0.0:
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi, ghi = mid, gm
    return lo if abs(glo) <= abs(ghi) else hi


def bisect_many(f, lo: np.ndarray, hi: np.ndarray, iterations: int = 60) -> np.ndarray:
    """Vectorised bisection between paired points ``lo`` and ``hi`` (shape (n, 2)).

    ``f(x, y)`` must accept arrays. Returns, per pair, whichever final
    bracket endpoint has the smaller ``|f|``.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = f(lo[:, 0], lo[:, 1])
    fhi = f(hi[:, 0], hi[:, 1])
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        fm = f(mid[:, 0], mid[:, 1])
        same = np.sign(fm) == np.sign(flo)
        lo = np.where(same[:, None], mid, lo)
        flo = np.where(same, fm, flo)
        hi = np.where(same[:, None], hi, mid)
        fhi = np.where(same, fhi, fm)
    pick_lo = np.abs(flo) <= np.abs(fhi)
    return np.where(pick_lo[:, None], lo, hi)


# Plastic number: the real root of x^3 = x + 1.
PLASTIC = 1.324717957244746025960908854


def r2_sequence(n: int, offset: float = 0.5, start: int = 1) -> np.ndarray:
    """First ``n`` points of the additive-recurrence low-discrepancy sequence in [0,1)^2.

    ``x_i = frac(offset + i * (1/g, 1/g^2))`` with ``g`` the plastic number.
    """
    i = np.arange(start, start + n, dtype=float)[:, None]
    alpha = np.array([1.0 / PLASTIC, 1.0 / PLASTIC**2])
    return np.mod(offset + i * alpha, 1.0)


def quasi_random_box(n: int, box: tuple[float, float, float, float], seed: int = 0, open_lower: bool = True) -> np.ndarray:
    """``n`` low-discrepancy points in ``[x0,x1] x [y0,y1]``.

    The seed shifts the sequence start so different seeds give different,
    equally uniform point sets. With ``open_lower`` the points are kept
    strictly away from the lower edges, so a box anchored at an axis
    yields interior points only.
    """
    x0, x1, y0, y1 = box
    u = r2_sequence(n, start=1 + int(seed) * 7919)
    if open_lower:
        # map [0,1) onto (0,1]
        u = 1.0 - u
    return np.column_stack([x0 + u[:, 0] * (x1 - x0), y0 + u[:, 1] * (y1 - y0)])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
