import numpy as np
import pytest

from fadellr.constellation import build_constellation
from fadellr.density_evolution import (BracketError, DeParams, DeResult,
                                       Ensemble, SnrAxis, check_combine,
                                       de_check_update, de_run,
                                       de_threshold, de_variable_update,
                                       load_ensemble, save_ensemble)
from fadellr.llr_density import LlrGrid, QuantizedDensity

GRID = LlrGrid(25.0, 11)


def delta(value, grid=GRID):
    return QuantizedDensity(grid, grid.quantize([value], [1.0]))


class TestEnsemble:
    def test_regular_rates(self):
        assert Ensemble.regular(3, 6).rate == pytest.approx(0.5)
        assert Ensemble.regular(4, 16).rate == pytest.approx(0.75)
        assert Ensemble.regular(3, 4).rate == pytest.approx(0.25)

    def test_designed_code_rates(self):
        import importlib.resources as ir
        base = ir.files("fadellr") / "data" / "ensembles"
        c1 = load_ensemble(str(base / "designed_code1.txt"))
        c2 = load_ensemble(str(base / "designed_code2.txt"))
        assert c1.rate == pytest.approx(0.4941, abs=1e-4)
        assert c2.rate == pytest.approx(0.5000, abs=1e-4)

    def test_validation(self):
        with pytest.raises(ValueError):
            Ensemble(((1, 1.0),), ((6, 1.0),))
        with pytest.raises(ValueError):
            Ensemble(((3, 0.5),), ((6, 1.0),))

    def test_file_roundtrip(self, tmp_path):
        ens = Ensemble.from_dicts({2: 0.3, 5: 0.7}, {8: 1.0})
        path = tmp_path / "e.txt"
        save_ensemble(ens, path)
        back = load_ensemble(path)
        assert back == ens

    def test_file_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("v 3\n")
        with pytest.raises(ValueError):
            load_ensemble(path)


class TestVariableUpdate:
    def test_delta_convolution(self):
        out = de_variable_update(delta(2.0), delta(-3.0), ((2, 1.0),))
        v = GRID.values()
        peak = v[np.argmax(out.mass)]
        assert peak == pytest.approx(-1.0, abs=GRID.delta)
        assert out.total() == pytest.approx(1.0, abs=1e-10)

    def test_saturating_sum(self):
        out = de_variable_update(delta(20.0), delta(20.0), ((3, 1.0),))
        assert out.mass[-1] == pytest.approx(1.0, abs=1e-10)

    def test_mixture_and_mass(self):
        chan = QuantizedDensity(GRID, np.full(GRID.size, 1.0 / GRID.size))
        chk = delta(1.0)
        lam = ((2, 0.4), (5, 0.6))
        out = de_variable_update(chan, chk, lam)
        assert out.total() == pytest.approx(1.0, abs=1e-10)
        assert np.all(out.mass >= 0)

    def test_grid_mismatch(self):
        other = LlrGrid(35.0, 11)
        with pytest.raises(ValueError):
            de_variable_update(delta(1.0), delta(1.0, other), ((2, 1.0),))


class TestCheckUpdate:
    def test_zero_is_absorbing(self):
        half = QuantizedDensity(
            GRID, 0.5 * (delta(0.0).mass + delta(5.0).mass))
        out = de_check_update(half, ((3, 1.0),))
        k = GRID.half
        # a degree-3 check mixes two inputs; zero in either forces zero out
        assert out.mass[k] == pytest.approx(0.75, abs=1e-12)

    def test_saturation_is_perfect_message(self):
        out = de_check_update(delta(25.0), ((6, 1.0),))
        assert out.mass[-1] == pytest.approx(1.0, abs=1e-12)
        out = de_check_update(delta(-25.0), ((3, 1.0),))
        # two -Lmax inputs multiply signs: output at +Lmax
        assert out.mass[-1] == pytest.approx(1.0, abs=1e-12)

    def test_two_input_sign_xor(self):
        d = QuantizedDensity(GRID, 0.5 * (delta(4.0).mass + delta(-4.0).mass))
        out = de_check_update(d, ((3, 1.0),))
        v = GRID.values()
        pos = out.mass[v > 0].sum()
        neg = out.mass[v < 0].sum()
        # sign distribution = XOR of two balanced signs
        assert pos == pytest.approx(0.5, abs=1e-12)
        assert neg == pytest.approx(0.5, abs=1e-12)
        # magnitude: boxplus(4,4) = 4 + log1p(e^-8) - log(2)
        expect = 4.0 + np.log1p(np.exp(-8.0)) - np.log(2.0)
        peak = np.abs(v[np.argmax(out.mass)])
        assert peak == pytest.approx(expect, abs=GRID.delta)

    def test_pairwise_vs_bruteforce(self):
        rng = np.random.default_rng(0)
        vals = np.array([-7.3, -2.0, -0.5, 0.0, 1.1, 6.0, 24.0])
        probs = rng.random(len(vals))
        probs /= probs.sum()
        mass = GRID.quantize(vals, probs)
        out = check_combine(mass, mass, GRID)
        # brute force over the support atoms
        expect = np.zeros(GRID.size)
        qv = GRID.values()[mass > 0]
        qp = mass[mass > 0]
        for a, pa in zip(qv, qp):
            for b, pb in zip(qv, qp):
                if abs(a) == 25.0:
                    r = b if a > 0 else -b
                elif abs(b) == 25.0:
                    r = a if b > 0 else -a
                else:
                    r = 2 * np.arctanh(np.tanh(a / 2) * np.tanh(b / 2))
                expect += GRID.quantize([r], [pa * pb])
        assert np.allclose(out, expect, atol=1e-12)

    def test_mass_conserved(self):
        rng = np.random.default_rng(1)
        m = rng.random(GRID.size)
        m /= m.sum()
        out = de_check_update(QuantizedDensity(GRID, m), ((6, 1.0),))
        assert out.total() == pytest.approx(1.0, abs=1e-10)


class TestDeRun:
    def test_perfect_channel(self):
        r = de_run(delta(25.0), Ensemble.regular(3, 6), DeParams(max_iter=5))
        assert r.converged and r.iterations <= 1

    def test_useless_channel_pinned_at_half(self):
        r = de_run(delta(0.0), Ensemble.regular(3, 6), DeParams(max_iter=50))
        assert not r.converged
        assert r.trajectory[-1] == pytest.approx(0.5)

    def test_mass_conserved_through_iterations(self):
        from fadellr.approx_llr import make_bpsk_approx
        from fadellr.llr_density import bpsk_llr_density
        d = bpsk_llr_density(0.64, GRID, make_bpsk_approx("taylor:1", 0.64))
        ens = Ensemble.regular(3, 6)
        v = d
        for _ in range(5):
            cv = de_check_update(v, ens.rho)
            assert cv.total() == pytest.approx(1.0, abs=1e-10)
            v = de_variable_update(d, cv, ens.lam)
            assert v.total() == pytest.approx(1.0, abs=1e-10)

    def test_trajectory_non_increasing_below_threshold(self):
        from fadellr.approx_llr import make_bpsk_approx
        from fadellr.llr_density import bpsk_llr_density
        sigma = 0.62  # comfortably below the (3,6) taylor threshold 0.6445
        d = bpsk_llr_density(sigma, GRID, make_bpsk_approx("taylor:1", sigma))
        r = de_run(d, Ensemble.regular(3, 6))
        assert r.converged
        assert np.all(np.diff(r.trajectory) < 1e-9)

    def test_sign_flip_invariance(self):
        from fadellr.approx_llr import make_bpsk_approx
        from fadellr.llr_density import bpsk_llr_density
        sigma = 0.64
        d = bpsk_llr_density(sigma, GRID, make_bpsk_approx("taylor:1", sigma))
        ens = Ensemble.regular(3, 6)
        r1 = de_run(d, ens, DeParams(max_iter=30))
        flipped = QuantizedDensity(GRID, d.mass[::-1].copy())
        cv = de_check_update(flipped, ens.rho)
        v = de_variable_update(flipped, cv, ens.lam)
        # flipping the density mirrors the error functional around 1/2...
        # the meaningful invariance: the flipped run's error is 1 - err
        assert v.error_probability() == pytest.approx(
            1.0 - de_variable_update(d, de_check_update(d, ens.rho),
                                     ens.lam).error_probability(), abs=1e-9)


class TestThreshold:
    def test_bracket_validation(self):
        ens = Ensemble.regular(3, 6)
        axis = SnrAxis(build_constellation("bpsk"), "ebn0", 0.5)
        from fadellr.approx_llr import make_bpsk_approx
        from fadellr.llr_density import bpsk_llr_density

        def builder(sigma, grid):
            return bpsk_llr_density(sigma, grid,
                                    make_bpsk_approx("taylor:1", sigma))
        with pytest.raises(BracketError):
            de_threshold(ens, builder, axis, (5.0, 4.0))
        with pytest.raises(BracketError):
            de_threshold(ens, builder, axis, (5.0, 6.0),
                         DeParams(max_iter=200))  # both succeed
        with pytest.raises(BracketError):
            de_threshold(ens, builder, axis, (2.0, 3.0),
                         DeParams(max_iter=200))  # both fail
