import numpy as np
import pytest

from conftest import bump_interaction_map
from qg2p.bc_maps import lift_one_particle
from qg2p.form_assembly import Mesh
from qg2p.spectral_analysis import (AnalysisError, bracketing_check,
                                    bracketing_run, heat_trace, lift_spectrum,
                                    weyl_fit_one_particle,
                                    weyl_fit_two_particle)
from qg2p.vertex_conditions import standard_family


def dirichlet_interval(n):
    return (np.pi * np.arange(1, n + 1)) ** 2


def dirichlet_square_lattice(lam_max):
    """Analytic eigenvalues pi^2 (n^2 + m^2) up to lam_max, ordered pairs."""
    nmax = int(np.sqrt(lam_max) / np.pi) + 2
    vals = [np.pi**2 * (n * n + m * m)
            for n in range(1, nmax + 1) for m in range(1, nmax + 1)]
    return np.sort([v for v in vals if v <= lam_max])


class TestLiftSpectrum:
    def test_boson_starts_with_lattice_values(self):
        lam = lift_spectrum(dirichlet_interval(10), 4, "boson")
        assert np.allclose(lam, np.pi**2 * np.array([2, 5, 8, 10]))

    def test_fermion_excludes_diagonal(self):
        lam = lift_spectrum(dirichlet_interval(10), 2, "fermion")
        assert np.allclose(lam, np.pi**2 * np.array([5, 10]))

    def test_full_counts_ordered_pairs(self):
        lam = lift_spectrum(dirichlet_interval(10), 3, "full")
        assert np.allclose(lam, np.pi**2 * np.array([2, 5, 5]))

    def test_truncation_completeness(self):
        # every sum <= k_20^2 + k_1^2 appears; brute force over the grid
        one = dirichlet_interval(20)
        full = lift_spectrum(one, 1, "full")  # force validity
        ceiling = one[-1] + one[0]
        brute = np.sort([a + b for a in one for b in one])
        brute = brute[brute <= ceiling]
        lam = lift_spectrum(one, len(brute), "full")
        assert np.allclose(lam, brute)

    def test_insufficient_input_raises(self):
        with pytest.raises(AnalysisError):
            lift_spectrum(dirichlet_interval(3), 100)


class TestWeylFits:
    def test_two_particle_full_lattice(self, interval):
        lam = dirichlet_square_lattice(2000.0)
        rep = weyl_fit_two_particle(lam, interval, sector="full",
                                    window=(100.0, 2000.0))
        assert rep.target == pytest.approx(1.0 / (4 * np.pi))
        assert rep.relative_error < 0.10

    def test_boson_lattice(self, interval):
        nmax = 16
        vals = [np.pi**2 * (n * n + m * m)
                for n in range(1, nmax) for m in range(n, nmax)]
        lam = np.sort([v for v in vals if v <= 2000.0])
        rep = weyl_fit_two_particle(lam, interval, sector="boson",
                                    window=(100.0, 2000.0))
        assert rep.target == pytest.approx(1.0 / (8 * np.pi))
        assert rep.relative_error < 0.10

    def test_one_particle_slope(self, interval):
        rep = weyl_fit_one_particle(dirichlet_interval(200), interval)
        assert rep.target == pytest.approx(1.0 / np.pi)
        assert rep.relative_error < 0.05

    def test_mesh_trust_cutoff_applied(self, interval):
        lam = dirichlet_square_lattice(5000.0)
        h = 1.0 / 30.0
        rep = weyl_fit_two_particle(lam, interval, h_max=h)
        assert rep.window[1] <= (np.pi / (4 * h)) ** 2 + 1e-12

    def test_insufficient_eigenvalues(self, interval):
        with pytest.raises(AnalysisError, match="at least 30"):
            weyl_fit_two_particle(dirichlet_square_lattice(100.0), interval)

    def test_deviation_shrinks_up_the_spectrum(self, interval):
        lam = dirichlet_square_lattice(4000.0)
        low = weyl_fit_two_particle(lam, interval, window=(0.0, 800.0))
        high = weyl_fit_two_particle(lam, interval, window=(1000.0, 4000.0))
        assert high.relative_error < low.relative_error


class TestHeatTrace:
    def test_single_zero_eigenvalue(self):
        assert heat_trace(np.array([0.0]), 3.7)["value"] == pytest.approx(1.0)

    def test_nonpositive_t_rejected(self):
        with pytest.raises(AnalysisError):
            heat_trace(np.array([1.0]), 0.0)

    def test_monotone_decay(self):
        lam = dirichlet_interval(50)
        vals = [heat_trace(lam, t)["value"] for t in (0.1, 0.5, 1.0, 5.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_dirichlet_interval_has_boundary_deficit(self):
        # truncated trace times sqrt(4 pi t) equals L - sqrt(pi t) for the
        # interval: the two ends contribute a negative correction, so the
        # leading-term comparison misses by ~18% at t = 0.01
        t = 0.01
        val = heat_trace(dirichlet_interval(200), t)["value"]
        assert np.sqrt(4 * np.pi * t) * val == pytest.approx(
            1.0 - np.sqrt(np.pi * t), abs=1e-6)

    def test_loop_matches_leading_term(self):
        # boundary-free spectrum: loop of length 1, eigenvalues (2 pi n)^2
        # with multiplicity two plus the constant mode
        t = 0.01
        lam = np.concatenate([[0.0],
                              np.repeat((2 * np.pi * np.arange(1, 101)) ** 2, 2)])
        val = heat_trace(lam, t)["value"]
        assert np.sqrt(4 * np.pi * t) * val == pytest.approx(1.0, rel=1e-6)

    def test_tail_estimate_small_when_converged(self):
        rep = heat_trace(dirichlet_interval(200), 0.01)
        assert rep["tail_estimate"] < 1e-10 * rep["value"]


class TestBracketing:
    def test_raw_check_passes_on_nested_spectra(self):
        m = np.arange(1.0, 61.0)
        assert bracketing_check(m - 0.5, m, m + 0.5, 50).ok

    def test_violation_detected(self):
        m = np.arange(1.0, 61.0)
        r = m.copy()
        r[3] = m[3] + 1.0  # lower bound broken at n=4
        rep = bracketing_check(r, m, m + 0.5, 50)
        assert not rep.ok and rep.max_lower_violation > 0

    def test_dirichlet_map_hits_upper_bound(self, interval):
        from qg2p.bc_maps import constant_map
        m = constant_map(np.eye(4), np.zeros((4, 4)))
        rep = bracketing_run(interval, m, Mesh.uniform(interval, 17), 10)
        assert rep.ok and rep.max_upper_violation == 0.0

    def test_neumann_map_hits_lower_bound(self, interval):
        from qg2p.bc_maps import constant_map
        m = constant_map(np.zeros((4, 4)), np.zeros((4, 4)))
        rep = bracketing_run(interval, m, Mesh.uniform(interval, 17), 10)
        assert rep.ok and rep.max_lower_violation == 0.0

    def test_robin_lift_strict_sandwich(self, interval):
        m = lift_one_particle(
            standard_family("robin", interval, alpha=1.0), interval)
        rep = bracketing_run(interval, m, Mesh.uniform(interval, 25), 20)
        assert rep.ok and rep.counting_ok

    def test_bump_map_sandwich(self, interval):
        rep = bracketing_run(interval, bump_interaction_map(),
                             Mesh.uniform(interval, 25), 20)
        assert rep.ok and rep.counting_ok
