"""Acceptance gate: one test per stated criterion, one PASS/FAIL line each.

Each criterion runs at its stated tolerance and prints a single line to
stdout (visible with -s or in the captured section on failure).  The
endpoint-location clause of criterion 8 is expected to fail at desk
scale; the measured band and the reasoning live in the regression tests
and the project notes.  Tolerances are asserted as stated, not widened.
"""

import math
import time

import numpy as np
import pytest

from edwards1d import cli
from edwards1d.airy import airy_batch, airy_zeros, basis_gram, eigenbasis
from edwards1d.besselsim import (
    SimConfig,
    estimate_w,
    estimate_y,
    simulate_besq,
    simulate_tilted,
)
from edwards1d.constants import compute_constants
from edwards1d.edwardsmc import (
    PolymerConfig,
    rate_vs_horizon,
    sample_polymer,
    scaling_collapse,
)
from edwards1d.rate import (
    lambda_from_rate,
    lambda_plus,
    legendre_check,
    rate_I,
    rate_derivative,
)
from edwards1d.spectral import (
    green_apply,
    heat_evolve,
    laplace_reconstruct,
    w_eval,
    y_kernel,
)
from edwards1d.sturm import eigen_residual, principal_eigen, rho_derivative

INV_CBRT2 = 2.0 ** (-1.0 / 3.0)

C = compute_constants()


def line(tag: str, ok: bool, detail: str):
    print(f"{'PASS' if ok else 'FAIL'} {tag}: {detail}")
    assert ok, f"{tag}: {detail}"


# -- 1 ----------------------------------------------------------------------

def test_criterion_1_airy_zero():
    t0 = time.perf_counter()
    a0 = airy_zeros(1).zeros[0]
    dt = time.perf_counter() - t0
    ok = abs(a0 - (-2.3381)) < 5e-4 and dt < 1.0
    line("criterion 1 (leading Airy zero)", ok,
         f"a_0 = {a0:.7f} vs -2.3381 (tol 5e-4), {dt:.3f}s < 1s")


# -- 2 ----------------------------------------------------------------------

def test_criterion_2_critical_constants():
    t0 = time.perf_counter()
    c = compute_constants(use_cache=False)
    dt = time.perf_counter() - t0
    targets = {"a_star": 2.19, "b_star": 1.11, "c_star": 0.63,
               "a_2star": 2.95, "b_2star": 0.85, "rho_2star": 0.78}
    gaps = {k: abs(getattr(c, k) - v) for k, v in targets.items()}
    ok = all(g <= 0.01 for g in gaps.values()) and dt < 30.0
    worst = max(gaps, key=gaps.get)
    line("criterion 2 (six constants within 0.01)", ok,
         f"worst gap {gaps[worst]:.4f} at {worst}, {dt:.1f}s < 30s")


# -- 3 ----------------------------------------------------------------------

def test_criterion_3_eigen_identities():
    worst_fh = 0.0
    for a in (0.0, 2.0):
        rho1, _ = rho_derivative(a)
        eps = 1e-3  # below this the eigenvalue solve noise dominates
        fd = (principal_eigen(a + eps).rho
              - principal_eigen(a - eps).rho) / (2.0 * eps)
        worst_fh = max(worst_fh, abs(rho1 - fd) / abs(fd))
    res = max(eigen_residual(principal_eigen(a)) for a in (0.0, 1.0, 2.0))
    deep = principal_eigen(-1e4).rho
    asym = abs(deep - (-141.42)) / 141.42
    ok = worst_fh <= 1e-5 and res <= 1e-6 and asym <= 1e-3
    line("criterion 3 (eigen identities)", ok,
         f"FH-vs-FD rel {worst_fh:.2e} <= 1e-5, residual {res:.2e} <= 1e-6, "
         f"rho(-1e4) rel {asym:.2e} <= 1e-3")


# -- 4 ----------------------------------------------------------------------

def test_criterion_4_rate_shape():
    g1 = abs(rate_I(C.b_star, consts=C) - C.a_star)
    g2 = abs(rate_I(0.0, consts=C) - C.a_2star)
    # slope of the convex branch as b decreases to the kink: one-sided
    # Richardson step, since I'' jumps to about 3.9 there and any pointwise
    # derivative a fixed offset inside the branch sits 4e-3 off the limit
    eps = 1e-3
    slope_limit = (2.0 * rate_derivative(C.b_2star + eps, consts=C)
                   - rate_derivative(C.b_2star + 2 * eps, consts=C))
    g3 = abs(slope_limit - (-C.rho_2star))
    g3l = abs(rate_derivative(0.5 * C.b_2star, consts=C) - (-C.rho_2star))
    h = 1e-3
    second = (rate_I(C.b_star + h, consts=C) - 2.0 * rate_I(C.b_star, consts=C)
              + rate_I(C.b_star - h, consts=C)) / h ** 2
    g4 = abs(second - 1.0 / C.c_star ** 2) * C.c_star ** 2
    g5 = abs(rate_I(10.0, consts=C) - 50.0)
    ok = (g1 < 2e-3 and g2 < 2e-3 and g3 < 1e-4 and g3l < 1e-4
          and g4 < 0.02 and g5 <= 0.2)
    line("criterion 4 (rate-function shape)", ok,
         f"I(b*)-a* {g1:.1e} < 2e-3, I(0)-a** {g2:.1e} < 2e-3, "
         f"kink slope gap {g3:.1e} < 1e-4 (linear side {g3l:.1e}), "
         f"I''(b*) rel {g4:.4f} < 0.02, |I(10)-50| = {g5:.3f} <= 0.2")


# -- 5 ----------------------------------------------------------------------

def test_criterion_5_legendre_duality():
    bs = (0.2, 0.5, C.b_star, 1.5, 2.0, 3.0, 5.0)
    gap = max(legendre_check(b, consts=C).gap for b in bs)
    inv = max(abs(lambda_from_rate(mu, consts=C) - lambda_plus(mu, consts=C))
              for mu in (-1.0, 0.0, 0.3, 1.0))
    ok = gap <= 1e-5 and inv <= 1e-5
    line("criterion 5 (Legendre duality)", ok,
         f"max dual gap {gap:.2e} <= 1e-5 over 7 slopes, "
         f"involution {inv:.2e} <= 1e-5")


# -- 6 ----------------------------------------------------------------------

def test_criterion_6_spectral_suite():
    basis = eigenbasis(50)
    gram = basis_gram(basis)
    off = float(np.max(np.abs(gram - np.eye(len(basis)))))
    h = np.linspace(0.0, 30.0, 6001)
    worst_green = 0.0
    for k in range(3):
        el = basis[k]
        e = el.c * airy_batch(INV_CBRT2 * h + el.zero)[0]
        out = green_apply(e, h)
        expect = e / el.eigenvalue
        worst_green = max(worst_green, float(
            np.linalg.norm(out - expect) / np.linalg.norm(expect)))
    worst_lap = max(abs(laplace_reconstruct(hh, a, K=200) - y_kernel(hh, a))
                    / y_kernel(hh, a)
                    for a in (0.0, 1.0, 2.0) for hh in (0.5, 1.0, 2.0))
    u1 = w_eval(h, 1.0)
    u1[0] = u1[-1] = 0.0
    semi = float(np.linalg.norm(heat_evolve(u1, h, 1.0) - w_eval(h, 2.0))
                 / np.linalg.norm(w_eval(h, 2.0)))
    ok = off <= 1e-6 and worst_green <= 1e-4 and worst_lap <= 1e-3 \
        and semi <= 1e-3
    line("criterion 6 (spectral suite)", ok,
         f"gram off-identity {off:.1e} <= 1e-6, inverse-on-basis "
         f"{worst_green:.1e} <= 1e-4, Laplace {worst_lap:.1e} <= 1e-3, "
         f"semigroup {semi:.1e} <= 1e-3")


# -- 7 ----------------------------------------------------------------------

def test_criterion_7_stochastic_oracles():
    t0 = time.perf_counter()
    cfg = SimConfig(dt=1e-3, n_paths=100_000, seed=101)
    zs = {}

    b = simulate_besq(0, 1.0, 2.0, cfg)
    frac = float(np.mean(~np.isnan(b.absorbed_at)))
    target = math.exp(-1.0 / 4.0)
    zs["absorption"] = (frac - target) / math.sqrt(
        target * (1.0 - target) / cfg.n_paths)

    for a, h0 in ((0.0, 1.0), (2.0, 0.5)):
        est = estimate_y(a, h0, cfg)
        zs[f"y({a:g},{h0:g})"] = (est.mean - y_kernel(h0, a)) / est.se

    edges = np.array([0.2, 0.4, 0.6, 0.8, 1.0, 1.2])
    wb = estimate_w(1.0, edges, cfg)
    for i in range(len(edges) - 1):
        ts = np.linspace(edges[i], edges[i + 1], 41)
        tgt = float(np.trapezoid([w_eval(1.0, float(t)) for t in ts], ts)
                    / (edges[i + 1] - edges[i]))
        zs[f"w bin {i}"] = (float(wb.density[i]) - tgt) / float(wb.se[i])

    tb = simulate_tilted(2.0, 1.0, 1.0, cfg)
    d = np.exp(tb.log_weight[:, -1])
    zs["martingale"] = (float(np.mean(d)) - 1.0) / float(
        np.std(d) / math.sqrt(len(d)))

    dt = time.perf_counter() - t0
    worst = max(zs, key=lambda k: abs(zs[k]))
    ok = all(abs(z) <= 3.0 for z in zs.values()) and dt < 300.0
    line("criterion 7 (stochastic oracles)", ok,
         f"worst |z| = {abs(zs[worst]):.2f} at {worst} (gate 3), "
         f"{dt:.0f}s < 300s")


# -- 8 ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def desk_runs():
    t0 = time.perf_counter()
    free = sample_polymer(PolymerConfig(T=4.0, beta=0.0, dt=0.004, bin=0.1,
                                        n_paths=20_000, seed=3))
    collapse = scaling_collapse((0.5, 1.0, 2.0),
                                PolymerConfig(T=5.0, beta=1.0, dt=0.004,
                                              bin=0.1, n_paths=40_000,
                                              seed=17))
    fit = rate_vs_horizon(PolymerConfig(T=4.0, beta=1.0, dt=0.004, bin=0.1,
                                        n_paths=40_000, seed=5),
                          (4.0, 6.0, 8.0))
    late = sample_polymer(PolymerConfig(T=8.0, beta=1.0, dt=0.004, bin=0.1,
                                        n_paths=40_000, seed=5))
    return free, collapse, fit, late, time.perf_counter() - t0


def test_criterion_8a_free_case_exact(desk_runs):
    free = desk_runs[0]
    ok = free.logZ == 0.0
    line("criterion 8a (beta = 0 exact)", ok, f"logZ = {free.logZ!r}")


def test_criterion_8b_scaling_collapse(desk_runs):
    collapse = desk_runs[1]
    ok = collapse.max_z <= 3.0
    line("criterion 8b (collapse z <= 3)", ok,
         f"max |z| = {collapse.max_z:.2f} over betas {collapse.betas}")


def test_criterion_8c_rate_extrapolation(desk_runs):
    fit = desk_runs[2]
    gap = abs(fit.extrapolated - C.a_star)
    ok = gap <= 0.3
    line("criterion 8c (free-energy extrapolation)", ok,
         f"1/T fit over T = 4,6,8 gives {fit.extrapolated:.4f}, "
         f"|gap to a*| = {gap:.3f} <= 0.3")


def test_criterion_8d_endpoint_location(desk_runs):
    # expected red at desk scale: the approach to b* is O(T^{-1/2}) and
    # T = 8 sits ~21% below (see notes); asserted at stated tolerance
    late = desk_runs[3]
    rel = abs(late.endpoint_mean - C.b_star) / C.b_star
    ok = rel <= 0.15
    line("criterion 8d (endpoint mean/T near b*)", ok,
         f"measured {late.endpoint_mean:.4f} vs b* = {C.b_star:.4f}, "
         f"rel gap {rel:.3f} vs 0.15 allowed")


def test_criterion_8e_endpoint_symmetry(desk_runs):
    late = desk_runs[3]
    ok = abs(late.signed_mean) <= 3.0 * late.signed_se
    line("criterion 8e (endpoint symmetry)", ok,
         f"signed mean {late.signed_mean:.5f} vs 3se = "
         f"{3.0 * late.signed_se:.5f}")


def test_criterion_8_runtime(desk_runs):
    dt = desk_runs[4]
    ok = dt < 600.0
    line("criterion 8 (runtime)", ok, f"{dt:.0f}s < 600s")


# -- 9 ----------------------------------------------------------------------

def test_criterion_9_byte_reproducibility(tmp_path):
    cfg = PolymerConfig(T=2.0, beta=1.0, dt=0.004, bin=0.1,
                        n_paths=5_000, seed=42)
    ok = sample_polymer(cfg) == sample_polymer(cfg)
    argv = ["besq-validate", "--suite", "y", "--n", "20000", "--seed", "6"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(argv + ["--output", str(a)])
    cli.main(argv + ["--output", str(b)])
    ok = ok and a.read_bytes() == b.read_bytes()
    line("criterion 9 (determinism)", ok,
         "repeat estimates equal and CSV reruns byte-identical")
