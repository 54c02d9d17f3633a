"""Subordination weights and the one-step law of the subordinate walk.

The walk X observes the base SRW Z at random times: X_n = Z_{T_n} with
T increments drawn from  c_m = int t^m/m! e^-t mu(t) dt  (a probability
law on m >= 1 because sum_m c_m = phi(1) = 1).  The renewal weights
c(0) = 1, c(m) = sum_{k<=m} c_k c(m-k) count expected subordinator visits
to level m and drive the Green function.  The one-step law is

    P(X_1 = z) = sum_m c_m p(m, z).

``compute_cm`` is the quadrature route; every built-in family also has a
closed form (``cm_closed_form``) used to extend the sequence far beyond
the quadrature range after the two routes are checked against each other
on an overlap window.  The truncated remainder of every sum is kept as
explicit unassigned mass, never redistributed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from ._quadrature import integrate_log_axis
from .bernstein import (
    MIXTURE,
    RELATIVISTIC,
    STABLE,
    BernsteinSpec,
    j_eval,
    log_levy_density,
    phi_eval,
    potential_density_u,
)
from .lattice import KernelSlab, srw_kernel_1d

__all__ = [
    "SubordinationWeights",
    "StepLaw",
    "BandReport",
    "compute_cm",
    "cm_closed_form",
    "cm_tail_closed_form",
    "compute_c_renewal",
    "compute_c_integral",
    "compute_weights",
    "get_weights",
    "build_step_law",
    "build_step_law_closed",
    "get_step_law",
    "default_step_m",
    "cm_asymptotic_report",
    "renewal_asymptotic_report",
    "steplaw_band_report",
    "weighted_kernel_sum",
]


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

def compute_cm(spec: BernsteinSpec, M: int, rtol: float = 1e-10) -> np.ndarray:
    """Quadrature route: c_m for m = 1..M; returns array with index m.

    Entry 0 is zero by convention (the subordinator makes no zero jumps).
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    out = np.zeros(M + 1)
    for m in range(1, M + 1):
        lg_m = gammaln(m + 1.0)

        def log_f(t, _m=m, _lg=lg_m):
            return _m * np.log(t) - _lg - t + log_levy_density(spec, t)

        out[m] = integrate_log_axis(log_f, rtol=rtol)
    return out


def _cm_closed_stable(alpha: float, m: np.ndarray) -> np.ndarray:
    # c_m = alpha Gamma(m - alpha) / (Gamma(1 - alpha) m!)
    return np.exp(
        np.log(alpha) + gammaln(m - alpha) - gammaln(1.0 - alpha) - gammaln(m + 1.0)
    )


def cm_closed_form(spec: BernsteinSpec, m) -> np.ndarray:
    """Closed-form c_m; exists for all built-in families."""
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if spec.family == STABLE:
        return _cm_closed_stable(spec.alphas[0], m)
    if spec.family == MIXTURE:
        (a1, a2), (w1, w2) = spec.alphas, spec.weights
        return (w1 * _cm_closed_stable(a1, m) + w2 * _cm_closed_stable(a2, m)) / spec.norm
    a, th = spec.alphas[0], spec.theta
    return (
        a
        / np.exp(gammaln(1.0 - a))
        / spec.norm
        * np.exp(gammaln(m - a) - gammaln(m + 1.0) - (m - a) * np.log1p(th))
    )


def cm_tail_closed_form(spec: BernsteinSpec, M: int) -> float:
    """1 - sum_{m<=M} c_m, evaluated without summation where possible."""
    if spec.family == STABLE:
        a = spec.alphas[0]
        return float(np.exp(gammaln(M + 1.0 - a) - gammaln(M + 1.0) - gammaln(1.0 - a)))
    if spec.family == MIXTURE:
        (a1, a2), (w1, w2) = spec.alphas, spec.weights
        t1 = np.exp(gammaln(M + 1.0 - a1) - gammaln(M + 1.0) - gammaln(1.0 - a1))
        t2 = np.exp(gammaln(M + 1.0 - a2) - gammaln(M + 1.0) - gammaln(1.0 - a2))
        return float((w1 * t1 + w2 * t2) / spec.norm)
    # relativistic: geometric decay; bound the remainder by the geometric sum
    th = spec.theta
    c_next = float(cm_closed_form(spec, np.array([M + 1]))[0])
    return c_next * (1.0 + th) / th


def compute_c_renewal(cm: np.ndarray, M: int | None = None) -> np.ndarray:
    """Renewal recursion c(0) = 1, c(m) = sum_{k=1}^m c_k c(m-k)."""
    M = len(cm) - 1 if M is None else int(M)
    c = np.zeros(M + 1)
    c[0] = 1.0
    for m in range(1, M + 1):
        c[m] = np.dot(cm[1 : m + 1], c[m - 1 :: -1])
    return c


def compute_c_integral(spec: BernsteinSpec, M: int, rtol: float = 1e-10):
    """c(m) = 1/m! int t^m e^-t u(t) dt for m = 0..M, or None if u unknown."""
    u0 = potential_density_u(spec, 1.0)
    if u0 is None:
        return None
    a = spec.alphas[0]
    lg_a = gammaln(a)
    out = np.zeros(M + 1)
    for m in range(M + 1):
        lg_m = gammaln(m + 1.0)

        def log_f(t, _m=m):
            return _m * np.log(t) - lg_m - t + (a - 1.0) * np.log(t) - lg_a

        out[m] = integrate_log_axis(log_f, rtol=rtol)
    return out


def renewal_closed_form_stable(alpha: float, m) -> np.ndarray:
    """c(m) = Gamma(m + alpha) / (Gamma(alpha) m!) for the pure stable family."""
    m = np.atleast_1d(np.asarray(m, dtype=float))
    return np.exp(gammaln(m + alpha) - gammaln(alpha) - gammaln(m + 1.0))


@dataclass
class SubordinationWeights:
    """c_m and renewal weights with explicit truncation bookkeeping.

    ``cm[m]`` holds c_m for 1 <= m <= truncation_M (cm[0] = 0);
    ``c_renewal[m]`` holds c(m) up to its own (possibly shorter) horizon,
    since the recursion is quadratic in the horizon.  ``tail_mass`` is
    1 - sum cm, known exactly through phi(1) = 1.
    """

    spec: BernsteinSpec
    cm: np.ndarray
    c_renewal: np.ndarray
    truncation_M: int
    tail_mass: float
    quadrature_M: int
    c_integral: np.ndarray | None = None

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.cm)


_QUAD_LIMIT = 2048
_RENEWAL_LIMIT = 16384


def compute_weights(
    spec: BernsteinSpec,
    M: int,
    *,
    rtol: float = 1e-10,
    quad_limit: int = _QUAD_LIMIT,
    renewal_limit: int = _RENEWAL_LIMIT,
    with_integral: bool = False,
) -> SubordinationWeights:
    """Quadrature c_m up to ``quad_limit``, closed form beyond, after an
    agreement check of the two routes on the overlap."""
    Mq = min(M, quad_limit)
    cm = np.zeros(M + 1)
    cm[: Mq + 1] = compute_cm(spec, Mq, rtol=rtol)
    if M > Mq:
        ms = np.arange(Mq + 1, M + 1, dtype=float)
        cm[Mq + 1 :] = cm_closed_form(spec, ms)
        closed_overlap = cm_closed_form(spec, np.arange(max(1, Mq - 4), Mq + 1, dtype=float))
        quad_overlap = cm[max(1, Mq - 4) : Mq + 1]
        rel = np.max(np.abs(quad_overlap - closed_overlap) / closed_overlap)
        if rel > 1e-7:
            raise ArithmeticError(
                f"quadrature and closed-form c_m disagree at m ~ {Mq} "
                f"(relative {rel:.2e}); refusing to extend the sequence"
            )
    Mr = min(M, renewal_limit)
    c_renewal = compute_c_renewal(cm[: Mr + 1])
    tail = float(1.0 - cm.sum())
    c_int = compute_c_integral(spec, min(M, 200), rtol=rtol) if with_integral else None
    return SubordinationWeights(spec, cm, c_renewal, M, tail, Mq, c_int)


@lru_cache(maxsize=32)
def get_weights(spec: BernsteinSpec, M: int, renewal_limit: int = _RENEWAL_LIMIT) -> SubordinationWeights:
    return compute_weights(spec, M, renewal_limit=renewal_limit)


def default_step_m(spec: BernsteinSpec, tail_target: float = 1.25e-3, cap: int = 2**18) -> int:
    """Smallest power of two whose c_m tail is below ``tail_target`` (capped)."""
    M = 1024
    while M < cap and cm_tail_closed_form(spec, M) > tail_target:
        M *= 2
    return M


# ---------------------------------------------------------------------------
# weighted kernel sums: sum_m w_m p(m, x)
# ---------------------------------------------------------------------------

def _kernel_sum_1d(weights, zs, chunk=8192):
    M = len(weights) - 1
    out = np.zeros(len(zs))
    for lo in range(1, M + 1, chunk):
        ms = np.arange(lo, min(lo + chunk, M + 1))
        out += weights[ms] @ srw_kernel_1d(ms, zs)
    return out


def _parity_axis(U, parity):
    top = U if U % 2 == parity else U - 1
    return np.arange(-top, top + 1, 2)


def _kernel_sum_2d_table(weights, radius, chunk=4096):
    """Dense table on [-radius, radius]^2 via the rotation identity:
    sum_m w_m p1(m,u) p1(m,v) accumulated as a Gram matrix per parity."""
    M = len(weights) - 1
    U = 2 * radius
    grams = {}
    for parity in (0, 1):
        us = _parity_axis(U, parity)
        G = np.zeros((len(us), len(us)))
        for lo in range(1, M + 1, chunk):
            ms = np.arange(lo, min(lo + chunk, M + 1))
            ms = ms[ms % 2 == parity]
            if len(ms) == 0:
                continue
            B = srw_kernel_1d(ms, us)
            G += (B * weights[ms][:, None]).T @ B
        grams[parity] = (us, G)
    xs = np.arange(-radius, radius + 1)
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    u = X1 + X2
    v = X1 - X2
    out = np.zeros_like(u, dtype=float)
    for parity in (0, 1):
        us, G = grams[parity]
        sel = (np.abs(u) % 2) == parity
        iu = np.searchsorted(us, u[sel])
        iv = np.searchsorted(us, v[sel])
        out[sel] = G[iu, iv]
    return out


def _kernel_sum_2d_points(weights, points, chunk=4096):
    points = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    M = len(weights) - 1
    u = points[:, 0] + points[:, 1]
    v = points[:, 0] - points[:, 1]
    uu = np.unique(np.concatenate([u, v]))
    iu = np.searchsorted(uu, u)
    iv = np.searchsorted(uu, v)
    out = np.zeros(len(points))
    for lo in range(1, M + 1, chunk):
        ms = np.arange(lo, min(lo + chunk, M + 1))
        p1 = srw_kernel_1d(ms, uu)
        out += weights[ms] @ (p1[:, iu] * p1[:, iv])
    return out


def _negbin_window(k, spread=8.0):
    """l-range covering the weight C(k+l, k) (2/3)^k (1/3)^l around l ~ k/2."""
    center = k / 2.0
    half = spread * np.sqrt(0.75 * k + 4.0) + 2.0
    return max(0, int(center - half)), int(np.ceil(center + half))


def _kernel_sum_3d_points(weights, points, chunk=512):
    """sum_m w_m p3(m, x) by conditioning on plane steps:
    sum_k p1(k,u) p1(k,v) T_k(w),  T_k(w) = sum_l w_{k+l} C(k+l,k)(2/3)^k(1/3)^l p1(l,w)."""
    points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    M = len(weights) - 1
    u = points[:, 0] + points[:, 1]
    v = points[:, 0] - points[:, 1]
    w = points[:, 2]
    uu = np.unique(np.concatenate([u, v]))
    ww = np.unique(w)
    all_m = np.arange(M + 1)
    p1_uv = srw_kernel_1d(all_m, uu)
    p1_w = srw_kernel_1d(all_m, ww)
    log3 = np.log(3.0)
    T = np.zeros((M + 1, len(ww)))
    for k in range(M + 1):
        l_lo, l_hi = _negbin_window(k)
        l_hi = min(l_hi, M - k)
        if l_hi < l_lo:
            continue
        ls = np.arange(l_lo, l_hi + 1)
        logwt = (
            gammaln(k + ls + 1.0)
            - gammaln(k + 1.0)
            - gammaln(ls + 1.0)
            + k * (np.log(2.0) - log3)
            - ls * log3
        )
        wt = weights[k + ls] * np.exp(logwt)
        T[k] = wt @ p1_w[ls]
    iu = np.searchsorted(uu, u)
    iv = np.searchsorted(uu, v)
    iw = np.searchsorted(ww, w)
    out = np.zeros(len(points))
    for lo in range(0, len(points), max(chunk, 1)):
        sl = slice(lo, lo + chunk)
        out[sl] = np.einsum(
            "kp,kp,kp->p", p1_uv[:, iu[sl]], p1_uv[:, iv[sl]], T[:, iw[sl]]
        )
    return out


def weighted_kernel_sum(d: int, weights: np.ndarray, *, radius: int | None = None,
                        points=None) -> np.ndarray:
    """sum_{m>=1} weights[m] p(m, x), exact closed-form route.

    Either a dense table on [-radius, radius]^d (C-order, origin centred)
    or values at ``points``.  weights[0] is ignored.
    """
    if (radius is None) == (points is None):
        raise ValueError("pass exactly one of radius / points")
    if radius is not None:
        ax = np.arange(-radius, radius + 1)
        if d == 1:
            return _kernel_sum_1d(weights, ax)
        if d == 2:
            return _kernel_sum_2d_table(weights, radius)
        grids = np.meshgrid(*([ax] * 3), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        return _kernel_sum_3d_points(weights, pts).reshape((2 * radius + 1,) * 3)
    pts = np.asarray(points, dtype=np.int64).reshape(-1, d)
    if d == 1:
        return _kernel_sum_1d(weights, pts[:, 0])
    if d == 2:
        return _kernel_sum_2d_points(weights, pts)
    return _kernel_sum_3d_points(weights, pts)


# ---------------------------------------------------------------------------
# one-step law
# ---------------------------------------------------------------------------

@dataclass
class StepLaw:
    """Truncated law of X_1 on the window |z|_inf <= support_radius.

    ``table`` holds P(X_1 = z) with the origin cell equal to ``stay_prob``
    (the walk can sit still: p(m, 0) > 0 for even m).  ``unassigned_mass``
    is everything the truncations did not place: the c_m tail beyond
    truncation_M plus one-step mass landing outside the window.
    """

    d: int
    support_radius: int
    table: np.ndarray
    stay_prob: float
    unassigned_mass: float
    truncation_M: int

    def prob(self, z) -> float:
        z = np.atleast_1d(np.asarray(z, dtype=int))
        L = self.support_radius
        if np.any(np.abs(z) > L):
            return 0.0
        return float(self.table[tuple(z + L)])

    def offsets_and_probs(self):
        """All window offsets (npts, d) with their probabilities (origin included)."""
        L = self.support_radius
        ax = np.arange(-L, L + 1)
        grids = np.meshgrid(*([ax] * self.d), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        return pts, self.table.ravel()


def build_step_law(cm: np.ndarray, slab: KernelSlab, Lx: int) -> StepLaw:
    """Spec-contract route: accumulate sum_m c_m p(m, z) from a slab table."""
    M = len(cm) - 1
    if slab.m_max < M:
        raise ValueError(
            f"slab depth m_max={slab.m_max} is below the weight truncation M={M}"
        )
    if Lx > slab.window_radius:
        raise ValueError("Lx exceeds the slab window")
    L, Ls = Lx, slab.window_radius
    sub = tuple(slice(Ls - L, Ls + L + 1) for _ in range(slab.d))
    table = np.tensordot(cm[1 : M + 1], slab.table[(slice(1, M + 1),) + sub], axes=(0, 0))
    stay = float(table[(L,) * slab.d])
    unassigned = float(1.0 - table.sum())
    return StepLaw(slab.d, Lx, table, stay, unassigned, M)


def build_step_law_closed(spec: BernsteinSpec, d: int, Lx: int,
                          M: int | None = None) -> StepLaw:
    """Production route via closed-form kernels; M defaults per family."""
    M = default_step_m(spec) if M is None else int(M)
    weights = get_weights(spec, M)
    table = weighted_kernel_sum(d, weights.cm, radius=Lx)
    stay = float(table[(Lx,) * d])
    unassigned = float(1.0 - table.sum())
    return StepLaw(d, Lx, table, stay, unassigned, M)


@lru_cache(maxsize=16)
def get_step_law(spec: BernsteinSpec, d: int, Lx: int, M: int | None = None) -> StepLaw:
    return build_step_law_closed(spec, d, Lx, M)


# ---------------------------------------------------------------------------
# comparability band reports
# ---------------------------------------------------------------------------

@dataclass
class BandReport:
    """min/max of a scaled quantity over its test range; ratio = hi / lo."""

    claim: str
    lo: float
    hi: float
    ratio: float
    range_lo: float
    range_hi: float
    n_points: int


def _band(claim, values, range_lo, range_hi) -> BandReport:
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    return BandReport(claim, lo, hi, hi / lo if lo > 0 else np.inf,
                      float(range_lo), float(range_hi), values.size)


def cm_asymptotic_report(weights: SubordinationWeights, m_lo: int = 10,
                         m_hi: int | None = None) -> BandReport:
    """Band of c_m * m / phi(1/m) (the one-step weight comparability)."""
    m_hi = weights.truncation_M if m_hi is None else min(m_hi, weights.truncation_M)
    ms = np.arange(m_lo, m_hi + 1)
    vals = weights.cm[ms] * ms / phi_eval(weights.spec, 1.0 / ms)
    return _band("cm_comparability", vals, m_lo, m_hi)


def renewal_asymptotic_report(weights: SubordinationWeights, m_lo: int = 10,
                              m_hi: int | None = None) -> BandReport:
    """Band of c(m) * m * phi(1/m) (the renewal weight comparability)."""
    top = len(weights.c_renewal) - 1
    m_hi = top if m_hi is None else min(m_hi, top)
    ms = np.arange(m_lo, m_hi + 1)
    vals = weights.c_renewal[ms] * ms * phi_eval(weights.spec, 1.0 / ms)
    return _band("renewal_comparability", vals, m_lo, m_hi)


def steplaw_band_report(law: StepLaw, spec: BernsteinSpec, r_lo: float = 1.0,
                        r_hi: float | None = None) -> BandReport:
    """Band of P(X_1 = z) / j(|z|) over r_lo <= |z| <= r_hi."""
    r_hi = law.support_radius / 2.0 if r_hi is None else r_hi
    pts, probs = law.offsets_and_probs()
    r = np.sqrt((pts.astype(float) ** 2).sum(axis=1))
    sel = (r >= r_lo) & (r <= r_hi)
    vals = probs[sel] / j_eval(spec, r[sel], law.d)
    return _band("steplaw_vs_j", vals, r_lo, r_hi)


def second_moment(law: StepLaw, r_max: float) -> float:
    """sum |z|^2 P(X_1 = z) over |z| <= r_max (diverges as r_max grows)."""
    pts, probs = law.offsets_and_probs()
    r2 = (pts.astype(float) ** 2).sum(axis=1)
    sel = r2 <= r_max * r_max
    return float((r2[sel] * probs[sel]).sum())
