import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import kstest

from fadellr.channel import sample_gain
from fadellr.constellation import build_constellation
from fadellr.exact_llr import (LlrQuery, bit_llr, bit_llr_grid, log_phi,
                               llr_bpsk_known_csi, llr_bpsk_unknown_csi,
                               pam_cond_pdf, phi_stable, qam_cond_pdf)

SIGMA = 0.6449


def quad_cond_pdf_1d(y, x, sigma):
    """Independent oracle: numerical quadrature of the CSI-averaging
    integral p(y|x) = int p(y|x,a) p_A(a) da over a in [0, 8]."""
    def f(a):
        return (np.exp(-(y - a * x) ** 2 / (2 * sigma ** 2))
                / np.sqrt(2 * np.pi) / sigma * 2 * a * np.exp(-a * a))
    return quad(f, 0.0, 8.0, limit=200, epsabs=1e-14, epsrel=1e-11)[0]


def quad_cond_pdf_2d(yr, yi, x, sigma):
    def f(a):
        d2 = (yr - a * x.real) ** 2 + (yi - a * x.imag) ** 2
        return (np.exp(-d2 / (2 * sigma ** 2)) / (2 * np.pi * sigma ** 2)
                * 2 * a * np.exp(-a * a))
    return quad(f, 0.0, 8.0, limit=200)[0]


class TestPhi:
    def test_phi_zero(self):
        assert phi_stable(0.0) == pytest.approx(1.0)
        assert log_phi(0.0) == 0.0

    def test_positive(self):
        zs = np.linspace(-40, 26, 200)
        assert np.all(np.isfinite(log_phi(zs)))
        assert np.all(phi_stable(zs[zs < 26]) > 0)

    def test_llr_at_zero_is_zero(self):
        assert llr_bpsk_unknown_csi(0.0, SIGMA) == 0.0

    def test_asymptotic(self):
        # log Phi(z) -> z^2 + log(2 sqrt(pi) z) as z -> +inf
        for z in (20.0, 30.0, 40.0):
            expect = z * z + np.log(2 * np.sqrt(np.pi) * z)
            assert log_phi(z) == pytest.approx(expect, rel=1e-4)

    def test_against_direct_formula(self):
        from scipy.special import erfc
        zs = np.linspace(-5, 5, 41)
        direct = 1 + np.sqrt(np.pi) * zs * np.exp(zs ** 2) * erfc(-zs)
        assert np.allclose(phi_stable(zs), direct, rtol=1e-12)


class TestBpskLlr:
    def test_known_csi(self):
        assert llr_bpsk_known_csi(0.0, 1.3, SIGMA) == 0.0
        assert llr_bpsk_known_csi(1.0, 1.0, 1.0) == pytest.approx(2.0)
        a = llr_bpsk_known_csi(0.7, 0.5, 1.0)
        b = llr_bpsk_known_csi(0.7, 0.25, 1.0 / np.sqrt(2))
        assert a == pytest.approx(b)

    def test_odd(self):
        ys = np.linspace(0.01, 12, 100)
        assert np.allclose(llr_bpsk_unknown_csi(-ys, SIGMA),
                           -llr_bpsk_unknown_csi(ys, SIGMA), rtol=1e-12)

    def test_small_y_slope_is_alpha_taylor(self):
        from fadellr.approx_llr import alpha_taylor_bpsk
        slope = llr_bpsk_unknown_csi(1e-6, SIGMA) / 1e-6
        assert slope == pytest.approx(alpha_taylor_bpsk(SIGMA), rel=1e-4)

    def test_against_quadrature(self):
        for y in np.linspace(-6, 6, 20):
            expect = (np.log(quad_cond_pdf_1d(y, 1.0, SIGMA))
                      - np.log(quad_cond_pdf_1d(y, -1.0, SIGMA)))
            assert llr_bpsk_unknown_csi(y, SIGMA) == pytest.approx(
                expect, abs=1e-8)

    def test_finite_far_out(self):
        assert np.isfinite(llr_bpsk_unknown_csi(80.0, SIGMA))


class TestPamPdf:
    def test_normalization(self, sigma_pam_791):
        y = np.linspace(-60, 60, 400001)
        p = pam_cond_pdf(y, 7.0, sigma_pam_791)
        assert np.trapezoid(p, y) == pytest.approx(1.0, abs=1e-6)

    def test_x_zero_is_gaussian(self):
        sigma = 1.1
        y = np.linspace(-8, 8, 101)
        g = np.exp(-y ** 2 / (2 * sigma ** 2)) / np.sqrt(2 * np.pi) / sigma
        assert np.allclose(pam_cond_pdf(y, 0.0, sigma), g, rtol=1e-12)

    def test_against_quadrature(self, sigma_pam_791):
        for x in (1.0, -5.0, 7.0):
            for y in (-9.0, -1.3, 0.0, 2.2, 8.0):
                assert pam_cond_pdf(y, x, sigma_pam_791) == pytest.approx(
                    quad_cond_pdf_1d(y, x, sigma_pam_791), rel=1e-8, abs=1e-12)

    def test_against_monte_carlo(self, rng, sigma_pam_791):
        x, sigma, n = 3.0, sigma_pam_791, 10 ** 6
        y = (sample_gain(rng, n) * x + sigma * rng.standard_normal(n))
        grid = np.linspace(y.min() - 1, y.max() + 1, 20001)
        cdf = np.cumsum(pam_cond_pdf(grid, x, sigma))
        cdf /= cdf[-1]
        stat, _ = kstest(y, lambda t: np.interp(t, grid, cdf))
        assert stat < 0.01


class TestQamPdf:
    def test_normalization(self, sigma_qam_483):
        g = np.linspace(-40, 40, 1601)
        yr, yi = np.meshgrid(g, g)
        p = qam_cond_pdf(yr + 1j * yi, 3 + 3j, sigma_qam_483)
        total = np.trapezoid(np.trapezoid(p, g, axis=1), g)
        assert total == pytest.approx(1.0, abs=1e-4)

    def test_swap_symmetry(self, sigma_qam_483):
        s = sigma_qam_483
        assert qam_cond_pdf(0.4 - 1.2j, 3 + 1j, s) == pytest.approx(
            qam_cond_pdf(-1.2 + 0.4j, 1 + 3j, s), rel=1e-12)

    def test_against_quadrature(self, sigma_qam_483):
        for x in (1 + 1j, -3 + 1j, 3 - 3j):
            for yr, yi in ((0.0, 0.0), (2.0, -1.0), (-4.0, 5.0)):
                assert qam_cond_pdf(yr + 1j * yi, x, sigma_qam_483) == \
                    pytest.approx(quad_cond_pdf_2d(yr, yi, x, sigma_qam_483),
                                  rel=1e-9)

    def test_against_monte_carlo_marginals(self, rng, sigma_qam_483):
        x, s, n = 3 + 1j, sigma_qam_483, 10 ** 6
        y = (sample_gain(rng, n) * x
             + s * (rng.standard_normal(n) + 1j * rng.standard_normal(n)))
        g = np.linspace(-25, 25, 1201)
        yr, yi = np.meshgrid(g, g)
        p = qam_cond_pdf(yr + 1j * yi, x, s)
        for samples, marg in ((y.real, np.trapezoid(p, g, axis=0)),
                              (y.imag, np.trapezoid(p, g, axis=1))):
            cdf = np.cumsum(marg)
            cdf /= cdf[-1]
            stat, _ = kstest(samples, lambda t: np.interp(t, g, cdf))
            assert stat < 0.02


class TestBitLlr:
    def test_bpsk_reduces_to_closed_form(self):
        c = build_constellation("bpsk")
        ys = np.linspace(-10, 10, 101)
        got = bit_llr_grid(c, ys + 0j, SIGMA)[0]
        assert np.allclose(got, llr_bpsk_unknown_csi(ys, SIGMA), atol=1e-10)

    def test_pam_roots(self, pam8, sigma_pam_791):
        q = lambda bit, y: bit_llr(LlrQuery(pam8, bit, sigma_pam_791, y))
        assert q(1, 0.0) == 0.0
        assert q(2, 3.3449) == pytest.approx(0.0, abs=1e-3)
        assert q(3, 6.9832) == pytest.approx(0.0, abs=1e-3)
        assert q(3, 1.8848) == pytest.approx(0.0, abs=1e-3)

    def test_pam_symmetries(self, pam8, sigma_pam_791):
        ys = np.linspace(0.05, 14, 60)
        ll_p = bit_llr_grid(pam8, ys + 0j, sigma_pam_791)
        ll_m = bit_llr_grid(pam8, -ys + 0j, sigma_pam_791)
        assert np.allclose(ll_m[0], -ll_p[0], atol=1e-9)
        assert np.allclose(ll_m[1], ll_p[1], atol=1e-9)
        assert np.allclose(ll_m[2], ll_p[2], atol=1e-9)

    def test_qam_swap_symmetry(self, qam16, sigma_qam_483):
        rng = np.random.default_rng(5)
        y = rng.normal(size=50) + 1j * rng.normal(size=50)
        ll = bit_llr_grid(qam16, 3 * y, sigma_qam_483)
        ll_sw = bit_llr_grid(qam16, 3 * (y.imag + 1j * y.real), sigma_qam_483)
        assert np.allclose(ll[2], -ll_sw[0], atol=1e-9)
        assert np.allclose(ll[3], ll_sw[1], atol=1e-9)

    def test_known_csi_path(self, pam8):
        # with the gain known, the LLR uses plain Gaussian kernels
        val = bit_llr(LlrQuery(pam8, 1, 1.0, 7.0, a=1.0))
        assert val > 10
        assert bit_llr(LlrQuery(pam8, 1, 1.0, 0.0, a=0.9)) == pytest.approx(0.0)

    def test_validation(self, pam8):
        with pytest.raises(ValueError):
            LlrQuery(pam8, 0, 1.0, 0.0)
        with pytest.raises(ValueError):
            LlrQuery(pam8, 1, -1.0, 0.0)


def test_true_llr_density_consistency(pam8, sigma_pam_791):
    """Adapter-symmetrized exact-LLR densities satisfy f(-l)=e^-l f(l)."""
    from fadellr.llr_density import (LlrGrid, bit_channel_density_1d,
                                     symmetrize)
    grid = LlrGrid(25.0, 11)
    for bit in (1, 2, 3):
        d = symmetrize(
            bit_channel_density_1d(pam8, bit, 0, sigma_pam_791, grid),
            bit_channel_density_1d(pam8, bit, 1, sigma_pam_791, grid))
        k = grid.half
        vals = grid.values()
        # compare where both bins carry meaningful mass
        sel = (d.mass > 1e-5) & (d.mass[::-1] > 1e-5) & (np.abs(vals) > 0.1) \
            & (np.abs(vals) < 20)
        ratio = d.mass[::-1][sel] / (d.mass[sel] * np.exp(-vals[sel]))
        assert np.all(np.abs(ratio - 1.0) < 0.02)
