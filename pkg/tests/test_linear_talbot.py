import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roughnls.gauss_sums import gauss_sum
from roughnls.linear_talbot import (
    KERNEL_SCALE,
    PeriodicSpectrum,
    RationalTime,
    check_support,
    dirac_comb_revival,
    free_propagator_delta,
    lattice_offset,
    linear_evolve_direct,
    riemann_function,
    talbot_closed_form,
    talbot_prefactor,
    xi_x,
)
from roughnls.rogue_experiment import standard_bump


def fft_bump_spectrum(eta, p, K, n=2**17):
    # independent route: sample the symbol on a periodic grid and FFT
    xi = -np.pi + 2 * np.pi * np.arange(n) / n
    f = standard_bump(xi * p / (2 * np.pi * eta))
    c = np.fft.fft(np.fft.ifftshift(f)) / n
    k = np.arange(-K, K + 1)
    return PeriodicSpectrum(k, c.real[k % n].astype(complex))


@pytest.fixture(scope="module")
def bump_spectra():
    return {(p, q): fft_bump_spectrum(0.1, p, 4096) for p, q in [(2, 3), (4, 5)]}


def test_rational_time_validation():
    assert RationalTime(25, 27).value == pytest.approx(25 / (2 * math.pi * 27))
    assert RationalTime(1, 3).q_odd and not RationalTime(1, 4).q_odd
    for p, q in [(2, 4), (0, 3), (1, 0)]:
        with pytest.raises(ValueError):
            RationalTime(p, q)


def test_spectrum_json_round_trip(tmp_path):
    spec = PeriodicSpectrum([-1, 0, 2], [0.5, 1 + 2j, -1j])
    path = tmp_path / "s.json"
    path.write_text(json.dumps(spec.to_mapping()))
    back = PeriodicSpectrum.load(path)
    assert np.array_equal(back.k, spec.k) and np.array_equal(back.alpha, spec.alpha)


def test_spectrum_rejects_duplicates():
    with pytest.raises(ValueError):
        PeriodicSpectrum([1, 1], [1.0, 2.0])


def test_hat_grid_matches_direct():
    spec = PeriodicSpectrum([-3, 0, 1, 5], [0.3, 1.0, -0.5j, 0.25 + 0.1j])
    xi, h = spec.hat_grid(64)
    assert np.abs(h - spec.hat(xi)).max() < 1e-13


class TestKernel:
    def test_at_source(self):
        assert free_propagator_delta(3.0, 1.0, 3) == pytest.approx(np.exp(-1j * math.pi / 4), abs=1e-15)

    def test_two_units_away(self):
        assert free_propagator_delta(5.0, 1.0, 3) == pytest.approx(np.exp(1j * (1 - math.pi / 4)), abs=1e-15)

    def test_modulus(self):
        x = np.linspace(-5, 5, 11)
        assert np.allclose(np.abs(free_propagator_delta(x, 4.0, 2)), 0.5, atol=1e-15)

    def test_rejects_nonpositive_time(self):
        with pytest.raises(ValueError):
            free_propagator_delta(0.0, 0.0)


class TestRevival:
    def test_full_revival(self):
        tr = dirac_comb_revival(RationalTime(1, 1))
        assert tr.support.tolist() == [0.0] and abs(tr.weights[0] - 1) < 1e-15

    def test_thirds(self):
        tr = dirac_comb_revival(RationalTime(1, 3))
        assert np.allclose(tr.support, [0, 1 / 3, 2 / 3])
        assert np.allclose(np.abs(tr.weights), 1 / math.sqrt(3), atol=1e-14)

    def test_weights_from_gauss_sums(self):
        tr = dirac_comb_revival(RationalTime(2, 5))
        ref = np.array([gauss_sum((-2, m, 5)) for m in range(5)]) / 5
        assert np.abs(tr.weights - ref).max() < 1e-15

    @pytest.mark.parametrize("p,q", [(1, 3), (2, 5), (4, 7), (3, 25), (25, 27)])
    def test_weight_mass(self, p, q):
        # each weight has |G/q|^2 = 1/q, so one period carries total mass 1
        w = dirac_comb_revival(RationalTime(p, q)).weights
        assert np.allclose(np.abs(w) ** 2, 1 / q, rtol=1e-12, atol=0)
        assert math.fsum(np.abs(w) ** 2) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("p,q", [(1, 3), (2, 5), (4, 9), (6, 25)])
    def test_pairing_against_truncated_combs(self, p, q):
        # a Gaussian test function evolves in closed form, so the pairing
        # with the truncated comb is an exact finite sum
        t = RationalTime(p, q).value
        sig = 0.02
        phi = lambda x: np.exp(-np.asarray(x) ** 2 / (2 * sig**2))
        pair = dirac_comb_revival(RationalTime(p, q)).pair(phi)
        errs = []
        for N in (8, 16, 32, 64):
            k = np.arange(-N, N + 1)
            a = sig**2 + 2j * t
            errs.append(abs(np.sum(np.sqrt(sig**2 / a) * np.exp(-k**2 / (2 * a))) - pair))
        for e0, e1 in zip(errs, errs[1:]):
            assert e1 <= 0.5 * e0 + 1e-13
        assert errs[-1] < 1e-10


class TestDirect:
    def test_single_delta(self):
        x = np.linspace(-2, 2, 9)
        spec = PeriodicSpectrum([0], [1.0])
        assert np.abs(linear_evolve_direct(spec, 0.3, x) - free_propagator_delta(x, 0.3, 0)).max() < 1e-15

    def test_flat_comb_at_origin(self):
        N, t = 6, 1 / (2 * math.pi)
        spec = PeriodicSpectrum(np.arange(-N, N + 1), np.ones(2 * N + 1))
        ref = sum(np.exp(1j * k * k / (4 * t)) for k in range(-N, N + 1)) * np.exp(-1j * math.pi / 4) / math.sqrt(t)
        assert abs(linear_evolve_direct(spec, t, 0.0) - ref) < 1e-12

    @given(st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False), min_size=5, max_size=5),
           st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False))
    @settings(max_examples=50, deadline=None)
    def test_linearity(self, vals, c):
        k = np.arange(-2, 3)
        s1 = PeriodicSpectrum(k, vals)
        s2 = PeriodicSpectrum(k, np.roll(vals, 1))
        x = np.linspace(-1, 1, 7)
        lhs = linear_evolve_direct(PeriodicSpectrum(k, c * s1.alpha + s2.alpha), 0.2, x)
        rhs = c * linear_evolve_direct(s1, 0.2, x) + linear_evolve_direct(s2, 0.2, x)
        assert np.abs(lhs - rhs).max() <= 1e-12 * (1 + np.abs(rhs).max())

    def test_physical_normalization(self):
        spec = PeriodicSpectrum([0, 1], [1.0, 0.5])
        a = linear_evolve_direct(spec, 0.4, 0.3)
        b = linear_evolve_direct(spec, 0.4, 0.3, normalization="physical")
        assert a / b == pytest.approx(KERNEL_SCALE)


class TestLattice:
    def test_on_lattice(self):
        assert xi_x(3 / 7, RationalTime(2, 7)) == pytest.approx(0.0, abs=1e-15)

    def test_hand_value(self):
        assert xi_x(1 / 6, RationalTime(2, 3)) == pytest.approx(math.pi / 4, rel=1e-14)

    @given(st.floats(-3, 3), st.integers(1, 40))
    @settings(max_examples=100)
    def test_offset_periodic_and_bounded(self, x, q):
        s = lattice_offset(x, q)
        assert abs(s) <= 0.5 / q + 1e-15
        assert abs(abs(lattice_offset(x + 1 / q, q)) - abs(s)) < 1e-12


class TestClosedForm:
    @pytest.mark.parametrize("pq", [(2, 3), (4, 5)])
    def test_matches_oracle(self, bump_spectra, pq):
        spec = bump_spectra[pq]
        t = RationalTime(*pq)
        x = -0.5 + np.arange(512) / 512
        closed = talbot_closed_form(spec, t, x, 0.1)
        oracle = np.abs(linear_evolve_direct(spec, t.value, x))
        assert np.abs(closed - oracle).max() <= 1e-6 * oracle.max()

    def test_lattice_points_and_readings(self, bump_spectra):
        spec = bump_spectra[(4, 5)]
        t = RationalTime(4, 5)
        h0 = abs(spec.hat(0.0)[0])
        assert talbot_closed_form(spec, t, 2 / 5, 0.1) == pytest.approx(math.sqrt(math.pi * 5) / 4 * h0, rel=1e-12)
        assert talbot_closed_form(spec, t, 2 / 5, 0.1, normalization="bare") == pytest.approx(h0 / math.sqrt(5))
        assert talbot_prefactor(t, "physical") == pytest.approx(math.sqrt(5) / 8)

    def test_vanishes_far_from_lattice(self, bump_spectra):
        spec = bump_spectra[(2, 3)]
        t = RationalTime(2, 3)
        x = np.linspace(0, 1, 2001)
        far = np.abs(lattice_offset(x, 3)) > 2 * 0.1 / 3
        assert np.all(talbot_closed_form(spec, t, x[far], 0.1) == 0.0)
        oracle = np.abs(linear_evolve_direct(spec, t.value, x))
        assert oracle[far].max() <= 1e-10 * oracle.max()

    def test_modulus_periodicity(self, bump_spectra):
        spec = bump_spectra[(4, 5)]
        t = RationalTime(4, 5)
        x = np.linspace(-0.3, 0.3, 301)
        a = talbot_closed_form(spec, t, x, 0.1)
        b = talbot_closed_form(spec, t, x + 1 / 5, 0.1)
        assert np.abs(a - b).max() <= 1e-12 * a.max()

    def test_rejects_even_q(self, bump_spectra):
        with pytest.raises(ValueError):
            talbot_closed_form(bump_spectra[(2, 3)], RationalTime(1, 2), 0.0, 0.1)

    def test_rejects_spread_spectrum(self):
        spec = PeriodicSpectrum([-1, 0, 1], [0.5, 1.0, 0.5])
        with pytest.raises(ValueError):
            talbot_closed_form(spec, RationalTime(2, 3), 0.0, 0.1)

    def test_check_support_eta_range(self, bump_spectra):
        with pytest.raises(ValueError):
            check_support(bump_spectra[(2, 3)], 0.3, 2)


class TestRiemann:
    @pytest.mark.parametrize("K", [1, 10, 1000])
    @pytest.mark.parametrize("t", [0.0, 2 * math.pi])
    def test_zero_values(self, t, K):
        assert abs(riemann_function(t, K)) <= 1e-14

    @pytest.mark.parametrize("K", [10, 100, 1000, 10000, 100000])
    def test_limit_at_pi(self, K):
        assert abs(riemann_function(math.pi, K) + math.pi**2 / 4) <= 2 / K

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            riemann_function(1.0, 0)
