"""Airy functions from scratch, zeros of Ai, and the orthonormal eigenbasis.

Evaluation strategy
-------------------
The pair Ai, Bi spans the solutions of y'' = x y.  With f, g the standard
Maclaurin solutions (f(0)=1, f'(0)=0; g(0)=0, g'(0)=1),

    Ai(x) = Ai(0) f(x) + Ai'(0) g(x),      Bi(x) = Bi(0) f(x) + Bi'(0) g(x),

and the series coefficients follow the two-term recurrences
c_k = c_{k-1}/((3k)(3k-1)), d_k = d_{k-1}/((3k+1)(3k)).  For growing |x| the
series suffers cancellation amplified by exp((4/3)|x|^{3/2}) on the decaying
branch, so it is summed in compensated double-double arithmetic: that keeps
the total rounding error below ~5e-32 * exp((4/3)|x|^{3/2}), good past |x|=9.

Beyond the crossover radius X_SWITCH = 9.0 the classical asymptotic
expansions take over (Poincare series in xi = (2/3)|x|^{3/2}; oscillatory
sin/cos(xi - pi/4) forms on the negative axis).  At xi = (2/3)*27 = 18 their
smallest term is ~2e-16 relative, so both branches meet at the switch with
full float64 accuracy.  A float64 split cannot do this at radius ~5.5: the
plain series loses ~2e-13 absolute there and the asymptotic tail bottoms out
near 4e-9 relative, hence the larger, double-double-backed radius.

Saturation: Bi overflows float64 for x >~ 104.3 (returned as inf) and Ai
underflows to 0 for x >~ 108; both are outside every quantitative contract
in this package but inside the documented |x| <= 200 evaluation range.

The eigenbasis is e_k(h) = c_k Ai(2^{-1/3} h + a_k) on [0, inf), where a_k is
the k-th zero of Ai (a_0 ~ -2.338) and c_k normalizes e_k in L^2.  These are
the eigenfunctions of x -> 2 x'' - h x with Dirichlet data at 0 and
eigenvalues 2^{1/3} a_k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._dd import dd, dd_add, dd_div_d, dd_mul, dd_mul_d, dd_to_float, two_prod
from .errors import DomainError, NumericError, RangeError, SolverError

X_MAX = 200.0  # documented evaluation range
X_SWITCH = 9.0  # series / asymptotics crossover radius

CBRT2 = 2.0 ** (1.0 / 3.0)
INV_CBRT2 = 2.0 ** (-1.0 / 3.0)

# x = 0 values as double-double (hi, lo) pairs:
#   Ai(0) = 3^(-2/3)/Gamma(2/3)   Ai'(0) = -3^(-1/3)/Gamma(1/3)
#   Bi(0) = 3^(-1/6)/Gamma(2/3)   Bi'(0) =  3^(1/6)/Gamma(1/3)
_AI0 = (0.3550280538878172, 2.05233632436212e-17)
_AIP0 = (-0.2588194037928068, 2.522243111610832e-17)
_BI0 = (0.6149266274460007, 5.0899207794891416e-17)
_BIP0 = (0.4482883573538264, -2.5363237774417305e-17)

_SERIES_MAX_TERMS = 100
_SERIES_TAIL = 1e-38

# Coefficients u_k, v_k of the Poincare expansions (u_0 = v_0 = 1,
# u_k = u_{k-1} (6k-1)(6k-5)/(72k), v_k = -u_k (6k+1)/(6k-1)).
_ASYM_TERMS = 40
_U = np.ones(_ASYM_TERMS)
_V = np.ones(_ASYM_TERMS)
for _k in range(1, _ASYM_TERMS):
    _U[_k] = _U[_k - 1] * (6 * _k - 1) * (6 * _k - 5) / (72.0 * _k)
    _V[_k] = -_U[_k] * (6 * _k + 1) / (6 * _k - 1)


@dataclass(frozen=True)
class AiryValue:
    """Ai, Ai', Bi, Bi' at a single point."""

    x: float
    ai: float
    aip: float
    bi: float
    bip: float


@dataclass(frozen=True)
class AiryZeroTable:
    """First k_max zeros of Ai (descending) with Ai' evaluated there."""

    k_max: int
    zeros: np.ndarray
    aip_at_zeros: np.ndarray


@dataclass(frozen=True)
class EigenBasisElement:
    k: int
    zero: float  # a_k
    eigenvalue: float  # 2^{1/3} a_k, the eigenvalue of 2 d^2/dh^2 - h
    c: float  # L^2 normalization of e_k(h) = c Ai(2^{-1/3} h + a_k)


def _series_dd(x: np.ndarray):
    """Maclaurin evaluation in double-double arithmetic, any |x| <= ~9.5."""
    x2 = two_prod(x, x)
    x3 = dd_mul(x2, dd(x))
    one = dd(np.ones_like(x))
    f, fp = one, dd(np.zeros_like(x))
    g, gp = dd(x), one
    t = one  # c_k x^{3k}
    s = dd(x)  # d_k x^{3k+1}
    for k in range(1, _SERIES_MAX_TERMS):
        tk = 3.0 * k
        u = dd_div_d(dd_mul(t, x2), tk - 1.0)  # c_{k-1} x^{3k-2} * ... -> f' term
        t = dd_div_d(dd_mul(t, x3), tk * (tk - 1.0))
        v = dd_div_d(dd_mul(s, x2), tk)  # g' term (3k+1) d_k x^{3k}
        s = dd_div_d(dd_mul(s, x3), (tk + 1.0) * tk)
        f = dd_add(f, t)
        fp = dd_add(fp, u)
        g = dd_add(g, s)
        gp = dd_add(gp, v)
        scale = np.maximum(np.abs(f[0]), np.maximum(np.abs(g[0]), 1.0))
        if np.all(np.maximum(np.abs(t[0]), np.abs(s[0])) <= _SERIES_TAIL * scale):
            break

    def combine(ca, cb, u, w):
        return dd_to_float(dd_add(dd_mul(dd(np.full_like(x, ca[0]), np.full_like(x, ca[1])), u),
                                  dd_mul(dd(np.full_like(x, cb[0]), np.full_like(x, cb[1])), w)))

    ai = combine(_AI0, _AIP0, f, g)
    aip = combine(_AI0, _AIP0, fp, gp)
    bi = combine(_BI0, _BIP0, f, g)
    bip = combine(_BI0, _BIP0, fp, gp)
    return ai, aip, bi, bip


def _asym_sum(coef: np.ndarray, inv_xi: np.ndarray, signs: bool) -> np.ndarray:
    """Sum coef_k * (+-1)^k * inv_xi^k, truncating each lane at its smallest term."""
    total = np.full_like(inv_xi, coef[0])
    term = np.ones_like(inv_xi)
    prev = np.full_like(inv_xi, np.inf)
    active = np.ones_like(inv_xi, dtype=bool)
    for k in range(1, coef.size):
        term = term * inv_xi
        mag = np.abs(coef[k]) * term
        active &= mag < prev
        contrib = coef[k] * term
        if signs and (k % 2 == 1):
            contrib = -contrib
        total = np.where(active, total + contrib, total)
        prev = mag
        if not active.any():
            break
    return total


def _asym_pos(x: np.ndarray):
    xi = (2.0 / 3.0) * x ** 1.5
    inv = 1.0 / xi
    su = _asym_sum(_U, inv, signs=True)
    sv = _asym_sum(_V, inv, signs=True)
    su_p = _asym_sum(_U, inv, signs=False)
    sv_p = _asym_sum(_V, inv, signs=False)
    root = x ** 0.25
    sq = math.sqrt(math.pi)
    with np.errstate(over="ignore", under="ignore"):
        down = np.exp(-xi)
        up = np.exp(xi)
        ai = down / (2.0 * sq * root) * su
        aip = -root * down / (2.0 * sq) * sv
        bi = up / (sq * root) * su_p
        bip = root * up / sq * sv_p
    return ai, aip, bi, bip


def _asym_neg(x: np.ndarray):
    z = -x
    zeta = (2.0 / 3.0) * z ** 1.5
    inv2 = 1.0 / (zeta * zeta)
    # even/odd split: P = sum (-1)^k c_{2k} zeta^{-2k}, Q = sum (-1)^k c_{2k+1} zeta^{-2k-1}
    pu = _asym_sum(_U[0::2], inv2, signs=True)
    qu = _asym_sum(_U[1::2], inv2, signs=True) / zeta
    pv = _asym_sum(_V[0::2], inv2, signs=True)
    qv = _asym_sum(_V[1::2], inv2, signs=True) / zeta
    w = zeta - 0.25 * math.pi
    cw, sw = np.cos(w), np.sin(w)
    root = z ** 0.25
    sq = math.sqrt(math.pi)
    ai = (cw * pu + sw * qu) / (sq * root)
    aip = root / sq * (sw * pv - cw * qv)
    bi = (-sw * pu + cw * qu) / (sq * root)
    bip = root / sq * (cw * pv + sw * qv)
    return ai, aip, bi, bip


def airy_batch(x: np.ndarray):
    """Vectorized (ai, aip, bi, bip) without range checks; internal workhorse."""
    x = np.asarray(x, dtype=np.float64)
    shape = x.shape
    flat = x.ravel()
    ai = np.empty_like(flat)
    aip = np.empty_like(flat)
    bi = np.empty_like(flat)
    bip = np.empty_like(flat)
    mid = np.abs(flat) <= X_SWITCH
    pos = flat > X_SWITCH
    neg = flat < -X_SWITCH
    if mid.any():
        ai[mid], aip[mid], bi[mid], bip[mid] = _series_dd(flat[mid])
    if pos.any():
        ai[pos], aip[pos], bi[pos], bip[pos] = _asym_pos(flat[pos])
    if neg.any():
        ai[neg], aip[neg], bi[neg], bip[neg] = _asym_neg(flat[neg])
    return ai.reshape(shape), aip.reshape(shape), bi.reshape(shape), bip.reshape(shape)


def airy_eval(x: float) -> AiryValue:
    """Evaluate Ai, Ai', Bi, Bi' at a point of the documented range |x| <= 200."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"airy_eval requires a finite argument, got {x!r}")
    if abs(x) > X_MAX:
        raise RangeError(f"airy_eval documented range is |x| <= {X_MAX:g}, got {x:g}")
    ai, aip, bi, bip = airy_batch(np.array([x]))
    return AiryValue(x, float(ai[0]), float(aip[0]), float(bi[0]), float(bip[0]))


def _zero_guess(k: np.ndarray) -> np.ndarray:
    """Asymptotic location of the k-th zero (0-indexed)."""
    t = 3.0 * math.pi * (4.0 * k + 3.0) / 8.0
    t2 = t ** (-2.0)
    return -(t ** (2.0 / 3.0)) * (1.0 + (5.0 / 48.0) * t2 - (5.0 / 36.0) * t2 ** 2
                                  + (77125.0 / 82944.0) * t2 ** 3)


def _ai_only(x: float) -> tuple[float, float]:
    a, ap, _, _ = airy_batch(np.array([x]))
    return float(a[0]), float(ap[0])


def airy_zeros(k_max: int) -> AiryZeroTable:
    """First ``k_max`` zeros of Ai by safeguarded Newton from asymptotic guesses."""
    if k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    ks = np.arange(k_max, dtype=np.float64)
    guesses = _zero_guess(ks)
    zeros = np.empty(k_max)
    aips = np.empty(k_max)
    for k in range(k_max):
        g = guesses[k]
        half = 0.4 * math.pi / math.sqrt(-g)  # under half the local zero spacing
        lo, hi = g - half, g + half
        f_lo, _ = _ai_only(lo)
        f_hi, _ = _ai_only(hi)
        grow = 0
        while f_lo * f_hi > 0.0:
            grow += 1
            if grow > 6:
                raise SolverError(
                    f"airy_zeros failed to bracket zero k={k} in [{lo:.6f}, {hi:.6f}]")
            half *= 1.6
            lo, hi = g - half, g + half
            f_lo, _ = _ai_only(lo)
            f_hi, _ = _ai_only(hi)
        x = g
        fx, fpx = _ai_only(x)
        for _ in range(60):
            if fx == 0.0:
                break
            step = fx / fpx
            xn = x - step
            if not (lo < xn < hi):  # Newton left the bracket: bisect
                xn = 0.5 * (lo + hi)
            fn, fpn = _ai_only(xn)
            if fn * f_lo < 0.0:
                hi = xn
            else:
                lo, f_lo = xn, fn
            if abs(xn - x) <= 1e-15 * abs(xn):
                x, fx, fpx = xn, fn, fpn
                break
            x, fx, fpx = xn, fn, fpn
        zeros[k] = x
        aips[k] = fpx
    return AiryZeroTable(k_max=k_max, zeros=zeros, aip_at_zeros=aips)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_AI_SQ_CUT = 9.5  # Ai(9.5)^2 ~ 2.8e-19: below the 1e-18 truncation threshold


def _gl_panels(edges: np.ndarray):
    """Gauss-Legendre nodes/weights for consecutive panels given by ``edges``."""
    lo = edges[:-1]
    hi = edges[1:]
    mid = 0.5 * (lo + hi)
    rad = 0.5 * (hi - lo)
    nodes = (mid[:, None] + rad[:, None] * _GL_NODES[None, :]).ravel()
    weights = (rad[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def _ai_sq_integrals(zeros: np.ndarray, panels_per_interval: int) -> np.ndarray:
    """I_k = integral of Ai^2 over [a_k, _AI_SQ_CUT] for every listed zero.

    Split as sum of per-interval integrals [a_k, a_{k-1}] (each exactly one
    phase half-period pi, integrated in the phase variable psi = (2/3)(-u)^{3/2})
    plus the base integral over [a_0, _AI_SQ_CUT].
    """
    k_max = zeros.size
    base_edges = np.concatenate([
        np.linspace(zeros[0], 0.0, 5),
        np.linspace(0.0, _AI_SQ_CUT, 2 * panels_per_interval + 1)[1:],
    ])
    nodes, weights = _gl_panels(base_edges)
    ai, _, _, _ = airy_batch(nodes)
    base = float(np.sum(weights * ai * ai))
    if k_max == 1:
        return np.array([base])

    psi = (2.0 / 3.0) * (-zeros) ** 1.5  # increasing in k
    # panel edges uniform in psi inside every interval [psi_{k-1}, psi_k]
    frac = np.linspace(0.0, 1.0, panels_per_interval + 1)
    psi_edges = psi[:-1, None] + (psi[1:] - psi[:-1])[:, None] * frac[None, :]
    all_nodes = []
    all_weights = []
    for i in range(k_max - 1):
        pn, pw = _gl_panels(psi_edges[i])
        all_nodes.append(pn)
        all_weights.append(pw)
    pn = np.concatenate(all_nodes)
    pw = np.concatenate(all_weights)
    u = -((1.5 * pn) ** (2.0 / 3.0))
    dudpsi = (1.5 * pn) ** (-1.0 / 3.0)
    ai, _, _, _ = airy_batch(u)
    contrib = (pw * ai * ai * dudpsi).reshape(k_max - 1, -1).sum(axis=1)
    integrals = np.empty(k_max)
    integrals[0] = base
    integrals[1:] = base + np.cumsum(contrib)
    return integrals


def eigenbasis(K: int) -> list[EigenBasisElement]:
    """Orthonormal elements e_k(h) = c_k Ai(2^{-1/3} h + a_k), k = 0..K-1.

    c_k comes from adaptive quadrature of Ai^2 (phase-graded Gauss-Legendre,
    refined until successive passes agree to 1e-9 relative, integrand
    truncated below 1e-18).
    """
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    table = airy_zeros(K)
    coarse = _ai_sq_integrals(table.zeros, panels_per_interval=4)
    fine = _ai_sq_integrals(table.zeros, panels_per_interval=8)
    rel = np.max(np.abs(fine - coarse) / fine)
    if rel > 1e-9:
        coarse, fine = fine, _ai_sq_integrals(table.zeros, panels_per_interval=16)
        rel = np.max(np.abs(fine - coarse) / fine)
        if rel > 1e-9:
            raise NumericError(
                f"eigenbasis quadrature did not converge: achieved {rel:.3e} relative")
    c = (CBRT2 * fine) ** -0.5
    return [
        EigenBasisElement(k=k, zero=float(table.zeros[k]),
                          eigenvalue=float(CBRT2 * table.zeros[k]), c=float(c[k]))
        for k in range(K)
    ]


def basis_eval(element: EigenBasisElement, h: np.ndarray) -> np.ndarray:
    """e_k on a grid of h >= 0 (vectorized)."""
    h = np.asarray(h, dtype=np.float64)
    ai, _, _, _ = airy_batch(INV_CBRT2 * h + element.zero)
    return element.c * ai


def basis_gram(elements: list[EigenBasisElement]) -> np.ndarray:
    """Gram matrix of the basis by shared phase-graded quadrature over h.

    Exposed so the orthonormality of the quadrature pipeline can be verified;
    analytically the matrix is the identity.
    """
    a_last = elements[-1].zero
    h_turn = CBRT2 * (-a_last)
    h_cut = CBRT2 * (_AI_SQ_CUT - a_last)
    # phase of the fastest product pair ~ 2 * (2/3)|u|^{3/2}; edges uniform in it
    psi_max = (4.0 / 3.0) * (-a_last) ** 1.5
    n_osc_panels = max(8, int(math.ceil(psi_max / (0.5 * math.pi))))
    fr = np.linspace(0.0, 1.0, n_osc_panels + 1)
    psi = psi_max * fr
    u = -((0.75 * (psi_max - psi)) ** (2.0 / 3.0))
    edges_osc = np.sort(CBRT2 * (u - a_last))
    edges_tail = np.linspace(h_turn, h_cut, 9)[1:]
    edges = np.unique(np.concatenate([edges_osc, edges_tail]))
    nodes, weights = _gl_panels(edges)
    mat = np.empty((len(elements), nodes.size))
    for i, el in enumerate(elements):
        mat[i] = basis_eval(el, nodes)
    return (mat * weights) @ mat.T
