"""Pointwise evaluation of the regularized HJB form of ``det D^2 u = f``.

For ``0 < eps <= 1/2`` the control set ``S(eps)`` consists of the symmetric
2x2 matrices with unit trace and both eigenvalues in ``[eps, 1 - eps]``.  Two
operators are evaluated:

* ``F_eps(f, M)   = sup_{A in S(eps)} (-A:M + 2 sqrt(f det A))``
* ``F_g,eps(f, M) = sup_{A in S(eps)} gamma(A) (-A:M + 2 sqrt(f det A))``

with ``gamma(A) = tr A / |A|^2``.  Writing ``sym M = Q diag(r1, r2) Q^T``
(``r1 <= r2``) both reduce to one-dimensional problems over
``A = Q diag(t, 1 - t) Q^T``, ``t in [eps, 1 - eps]``, where ``t`` weights the
eigenvector of the smaller eigenvalue.

All functions accept a single matrix of shape (2, 2) or a stack (..., 2, 2)
and broadcast ``f`` and ``eps`` against the leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SymEig2",
    "HjbEval",
    "CordesConstants",
    "sym_eig2",
    "maximize_phi",
    "f_eps",
    "f_gamma_eps",
    "cordes_constants",
    "interior_maximizer_threshold",
]

PRESCAN_POINTS = 17


@dataclass(frozen=True)
class SymEig2:
    rho1: np.ndarray
    rho2: np.ndarray
    q: np.ndarray  # columns: eigenvector of rho1, eigenvector of rho2

    def reconstruct(self) -> np.ndarray:
        d = np.zeros(self.q.shape)
        d[..., 0, 0] = self.rho1
        d[..., 1, 1] = self.rho2
        return self.q @ d @ np.swapaxes(self.q, -1, -2)


@dataclass(frozen=True)
class HjbEval:
    value: np.ndarray
    t_star: np.ndarray
    control: np.ndarray
    scaled: bool

    @property
    def gamma(self) -> np.ndarray:
        t = self.t_star
        return 1.0 / (t * t + (1.0 - t) ** 2)


@dataclass(frozen=True)
class CordesConstants:
    eps: float
    delta: float
    big_c: float
    c3: float
    sigma: float
    c_mon: float


def _check_eps(eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    if np.any(~(eps > 0.0)) or np.any(eps > 0.5):
        raise ValueError(f"regularization parameter must lie in (0, 1/2], got {eps}")
    return eps


def _check_f(f_val) -> np.ndarray:
    f_val = np.asarray(f_val, dtype=float)
    if np.any(~(f_val >= 0.0)):
        raise ValueError("right-hand side f must be non-negative (and not NaN)")
    return f_val


def sym_eig2(M) -> SymEig2:
    """Ordered eigenpairs of ``(M + M^T) / 2`` in closed form.

    The eigenvectors come from the half angle of the rotation that
    diagonalises the symmetric part, which avoids cancellation when the
    eigenvalues are close.  A multiple of the identity yields the axis basis.
    """
    M = np.asarray(M, dtype=float)
    a = M[..., 0, 0]
    c = M[..., 1, 1]
    b = 0.5 * (M[..., 0, 1] + M[..., 1, 0])
    mean = 0.5 * (a + c)
    half = 0.5 * (a - c)
    radius = np.hypot(half, b)
    # rho2 eigenvector is (cos th, sin th) with th = atan2(b, half) / 2
    th = 0.5 * np.arctan2(b, half)
    cs, sn = np.cos(th), np.sin(th)
    q = np.empty(M.shape)
    q[..., 0, 0] = -sn
    q[..., 1, 0] = cs
    q[..., 0, 1] = cs
    q[..., 1, 1] = sn
    return SymEig2(mean - radius, mean + radius, q)


def maximize_phi(rho1, rho2, zeta, eps):
    """Maximise ``phi(t) = -t rho1 - (1 - t) rho2 + zeta sqrt(t (1 - t))`` on
    ``[eps, 1 - eps]``.

    ``phi`` is concave, so the maximiser is the clamp of the stationary point
    ``t_u = (1 + d / hypot(d, zeta)) / 2`` with ``d = rho2 - rho1 >= 0``.  When
    ``zeta = 0`` phi is non-decreasing and ``t = 1 - eps`` is returned.

    Returns
    -------
    (t_star, value)
    """
    eps = _check_eps(eps)
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    d = rho2 - rho1
    r = np.hypot(d, zeta)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(r > 0.0, d / r, 1.0)
    t = np.clip(0.5 * (1.0 + s), eps, 1.0 - eps)
    value = -t * rho1 - (1.0 - t) * rho2 + zeta * np.sqrt(t * (1.0 - t))
    return t, value


def _control(eig: SymEig2, t) -> np.ndarray:
    q1 = eig.q[..., :, 0]
    q2 = eig.q[..., :, 1]
    t = np.asarray(t)[..., None, None]
    return t * q1[..., :, None] * q1[..., None, :] + (1.0 - t) * q2[..., :, None] * q2[..., None, :]


def f_eps(f_val, M, eps) -> HjbEval:
    """Evaluate ``F_eps`` together with its maximizing control."""
    f_val = _check_f(f_val)
    eig = sym_eig2(M)
    t, value = maximize_phi(eig.rho1, eig.rho2, 2.0 * np.sqrt(f_val), eps)
    return HjbEval(value, t, _control(eig, t), scaled=False)


def _scaled_argmax(rho1, rho2, zeta, eps):
    """Maximise ``gamma(t) phi(t)`` over ``t in [eps, 1 - eps]``.

    With ``t = (1 - cos th) / 2`` the objective becomes the trigonometric
    rational ``g(th) = (-(r1 + r2) - d cos th + zeta sin th) / (1 + cos^2 th)``
    on ``[th_lo, pi - th_lo]``.  Its derivative numerator is a trigonometric
    polynomial of degree three, so the problem can be multimodal (e.g. both
    endpoints are local maxima when ``phi < 0``).  A uniform pre-scan brackets
    every sign change of ``g'`` from + to -; each bracket is resolved by
    safeguarded Newton and the best of all candidates wins.
    """
    rho1, rho2, zeta, eps = np.broadcast_arrays(
        np.asarray(rho1, float), np.asarray(rho2, float),
        np.asarray(zeta, float), np.asarray(eps, float),
    )
    shape = rho1.shape
    r_sum = (rho1 + rho2).ravel()
    d = (rho2 - rho1).ravel()
    z = zeta.ravel()
    th_lo = np.arccos(1.0 - 2.0 * eps.ravel())
    th_hi = np.pi - th_lo

    def g(th, i=slice(None)):
        c = np.cos(th)
        return (-r_sum[i] - d[i] * c + z[i] * np.sin(th)) / (1.0 + c * c)

    def dg_num(th, i):
        # (N' D - N D') with N = numerator, D = 1 + cos^2
        c, s = np.cos(th), np.sin(th)
        n = -r_sum[i] - d[i] * c + z[i] * s
        dn = d[i] * s + z[i] * c
        return dn * (1.0 + c * c) + n * 2.0 * c * s

    def dg_num_prime(th, i):
        c, s = np.cos(th), np.sin(th)
        n = -r_sum[i] - d[i] * c + z[i] * s
        ddn = d[i] * c - z[i] * s
        return ddn * (1.0 + c * c) + n * 2.0 * np.cos(2.0 * th)

    frac = np.linspace(0.0, 1.0, PRESCAN_POINTS)
    grid = th_lo[:, None] + (th_hi - th_lo)[:, None] * frac[None, :]
    idx = np.arange(r_sum.size)[:, None]
    vals = g(grid, idx)
    best = np.argmax(vals, axis=1)
    best_th = grid[np.arange(grid.shape[0]), best]
    best_val = vals[np.arange(grid.shape[0]), best]

    h = dg_num(grid, idx)
    up = (h[:, :-1] > 0.0) & (h[:, 1:] < 0.0)
    pi_, ki = np.nonzero(up)
    if pi_.size:
        lo = grid[pi_, ki]
        hi = grid[pi_, ki + 1]
        x = 0.5 * (lo + hi)
        for _ in range(100):
            hx = dg_num(x, pi_)
            pos = hx > 0.0
            lo = np.where(pos, x, lo)
            hi = np.where(pos, hi, x)
            dh = dg_num_prime(x, pi_)
            with np.errstate(divide="ignore", invalid="ignore"):
                xn = x - hx / dh
            bad = ~((xn > lo) & (xn < hi)) | ~np.isfinite(xn)
            xn = np.where(bad, 0.5 * (lo + hi), xn)
            step = np.abs(xn - x)
            x = xn
            if np.all((step <= 1e-15 * (1.0 + np.abs(x))) | (hi - lo <= 1e-15)):
                break
        cand = g(x, pi_)
        # keep the best candidate per point; ties resolved towards the grid value
        order = np.lexsort((cand, pi_))
        last = np.r_[pi_[order][1:] != pi_[order][:-1], True]
        sel = order[last]
        pts = pi_[sel]
        better = cand[sel] > best_val[pts]
        best_th[pts[better]] = x[sel][better]
        best_val[pts[better]] = cand[sel][better]

    t = 0.5 * (1.0 - np.cos(best_th))
    return t.reshape(shape), best_val.reshape(shape)


def f_gamma_eps(f_val, M, eps) -> HjbEval:
    """Evaluate the scaled operator ``F_gamma,eps`` and its maximizing control.

    At ``eps = 1/2`` the control set is ``{I/2}`` and the value reduces to
    ``2 (-tr M / 2 + sqrt(f))``.
    """
    f_val = _check_f(f_val)
    eps = _check_eps(eps)
    eig = sym_eig2(M)
    zeta = 2.0 * np.sqrt(f_val)
    t, value = _scaled_argmax(eig.rho1, eig.rho2, zeta, eps)
    return HjbEval(value, t, _control(eig, t), scaled=True)


def cordes_constants(eps: float) -> CordesConstants:
    """Cordes-related constants of the regularized problem.

    ``delta``: Cordes parameter of ``S(eps)``; ``big_c``: stability constant;
    ``c3``: pointwise threshold factor; ``sigma``: rot-rot stabilization
    weight ``1 - sqrt(1 - delta) / 2``; ``c_mon``: monotonicity constant of the
    semilinear form, ``1 - sqrt(1 - delta)``.
    """
    eps = float(_check_eps(eps))
    norm2 = eps**2 + (1.0 - eps) ** 2
    delta = 2.0 * eps * (1.0 - eps) / norm2
    root = np.sqrt(max(1.0 - delta, 0.0))
    return CordesConstants(
        eps=eps,
        delta=delta,
        big_c=(1.0 + np.sqrt(2.0)) / (1.0 - root),
        c3=norm2 / (1.0 - eps),
        sigma=1.0 - root / 2.0,
        c_mon=1.0 - root,
    )


def interior_maximizer_threshold(zeta, eps):
    """``((1 - eps)^2 + eps^2) zeta^2 / (4 eps (1 - eps))``.

    For ``M`` with ``max_{A in S(0)} (-A:M + zeta sqrt(det A)) = 0`` the
    maximiser lies in ``S(eps)`` iff ``|M|^2`` does not exceed this value.
    """
    eps = np.asarray(eps, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    return ((1.0 - eps) ** 2 + eps**2) * zeta**2 / (4.0 * eps * (1.0 - eps))
