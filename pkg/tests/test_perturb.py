from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from doilab import (
    CommutingPair,
    ConfigError,
    EnsembleSpec,
    InvalidP,
    besov_weights,
    bound_ratio,
    commutator_norm,
    counterexample_scan,
    ensemble_csv_rows,
    perturbed_pair,
    random_commuting_pair,
    relative_bound_factor,
    run_ensemble,
    schatten_norm,
    schatten_ratio,
    schatten_report,
    truncation_convergence,
    verify_identity,
)
from doilab.perturb import CSV_COLUMNS
from doilab.symbols import const, exp2, gauss, monomial, poly

from _oracles import schatten_scalar
from conftest import make_pairs


class TestSchattenNorm:
    def test_diagonal_frozen_values(self):
        d = np.diag([3.0, 4.0])
        assert schatten_norm(d, 1) == pytest.approx(7.0, rel=1e-14)
        assert schatten_norm(d, 2) == pytest.approx(5.0, rel=1e-14)
        assert schatten_norm(d, math.inf) == pytest.approx(4.0, rel=1e-14)

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
    def test_unitary_value(self, p):
        from doilab import haar_unitary

        u = haar_unitary(6, np.random.default_rng(1))
        assert schatten_norm(u, p) == pytest.approx(6.0 ** (1.0 / p), rel=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_eigenvalue_route(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        for p in (1.0, 2.0, 4.0):
            assert schatten_norm(x, p) == pytest.approx(schatten_scalar(x, p), rel=1e-10)

    def test_invalid_p(self):
        with pytest.raises(InvalidP):
            schatten_norm(np.eye(2), 0.5)
        with pytest.raises(InvalidP):
            schatten_norm(np.eye(2), float("nan"))


class TestRelativeBoundFactor:
    def test_zero_base(self):
        """Against A = 0 the factor is just the norm of B."""
        assert relative_bound_factor(np.zeros((2, 2)), np.diag([1.0, 0.0])) == pytest.approx(
            1.0, rel=1e-14
        )

    def test_equal_matrices_give_zero(self):
        a = np.diag([1.0, 2.0, 3.0])
        assert relative_bound_factor(a, a) == 0.0

    def test_diagonal_closed_form(self):
        # (B - A)(A + iI)^{-1} on diagonals: |b_k - a_k| / sqrt(a_k^2 + 1)
        a = np.diag([0.0, 3.0])
        b = np.diag([1.0, 3.0])
        assert relative_bound_factor(a, b) == pytest.approx(1.0, rel=1e-14)

    def test_shrinks_with_large_base(self):
        big = np.diag([100.0])
        assert relative_bound_factor(big, big + np.eye(1)) < 0.011


class TestVerifyIdentity:
    @pytest.mark.parametrize("seed", range(5))
    def test_small_residual_for_smooth_functions(self, seed):
        pair_a, pair_b = make_pairs(6, seed)
        for f in (exp2(1.0, 2.0), gauss(1.0), poly([[0.0, 1.0], [1.0, 2.0]])):
            rep = verify_identity(pair_a, pair_b, f)
            assert rep.passed, f.label
            assert rep.rel_residual <= 1e-9

    def test_constant_function_gives_exact_zero(self):
        pair_a, pair_b = make_pairs(5, 3)
        rep = verify_identity(pair_a, pair_b, const(4.0))
        assert rep.lhs_norm == 0.0
        assert rep.abs_residual == 0.0
        assert rep.rel_residual == 0.0

    def test_unperturbed_pair_gives_zero_residual(self):
        pair_a, _ = make_pairs(4, 1)
        rep = verify_identity(pair_a, pair_a, gauss(1.0))
        assert rep.rel_residual == 0.0

    def test_lhs_norm_matches_direct_computation(self):
        pair_a, pair_b = make_pairs(4, 9)
        rep = verify_identity(pair_a, pair_b, monomial(1, 1))
        direct = np.linalg.norm(pair_b.A1 @ pair_b.A2 - pair_a.A1 @ pair_a.A2, 2)
        assert rep.lhs_norm == pytest.approx(direct, rel=1e-10)

    def test_tolerance_controls_passed(self):
        pair_a, pair_b = make_pairs(4, 2)
        rep = verify_identity(pair_a, pair_b, gauss(1.0), tol=1e-300)
        assert not rep.passed

    def test_term_norms_reported(self):
        pair_a, pair_b = make_pairs(4, 6)
        rep = verify_identity(pair_a, pair_b, exp2(1.0, 1.0))
        assert len(rep.term_norms) == 2
        assert all(v >= 0.0 for v in rep.term_norms)


class TestPerturbedPair:
    def test_zero_scale_returns_same_object(self):
        pair_a, _ = make_pairs(4, 0)
        assert perturbed_pair(pair_a, 0.0, 123) is pair_a

    def test_output_commutes(self):
        pair_a, _ = make_pairs(6, 5)
        pair_b = perturbed_pair(pair_a, 0.3, 17)
        assert commutator_norm(pair_b.A1, pair_b.A2) <= 1e-11

    def test_deterministic(self):
        pair_a, _ = make_pairs(4, 8)
        one = perturbed_pair(pair_a, 0.1, 3)
        two = perturbed_pair(pair_a, 0.1, 3)
        assert_allclose(one.A1, two.A1)
        assert_allclose(one.A2, two.A2)

    def test_deviation_grows_with_scale(self):
        pair_a, _ = make_pairs(5, 4)
        small = perturbed_pair(pair_a, 1e-3, 2)
        large = perturbed_pair(pair_a, 0.2, 2)
        dev_small = np.linalg.norm(small.A1 - pair_a.A1, 2)
        dev_large = np.linalg.norm(large.A1 - pair_a.A1, 2)
        assert dev_small < dev_large

    def test_negative_scale_rejected(self):
        pair_a, _ = make_pairs(3, 0)
        with pytest.raises(ConfigError):
            perturbed_pair(pair_a, -0.1, 0)


class TestBoundRatio:
    def test_components_finite_and_nonnegative(self, small_pairs):
        pair_a, pair_b = small_pairs
        rep = bound_ratio(pair_a, pair_b, exp2(1.0, 2.0))
        for v in (rep.deviation_norm, *rep.factors, rep.besov_g1, rep.besov_g2, rep.ratio):
            assert np.isfinite(v)
            assert v >= 0.0

    def test_identical_pairs_give_zero_ratio(self):
        pair_a, _ = make_pairs(4, 2)
        rep = bound_ratio(pair_a, pair_a, exp2(1.0, 2.0))
        assert rep.deviation_norm == 0.0
        assert rep.ratio == 0.0

    def test_grid_override(self, small_pairs):
        pair_a, pair_b = small_pairs
        rep = bound_ratio(pair_a, pair_b, gauss(1.0), {"N": 128, "L": 8 * np.pi})
        assert rep.grid_spec.N == 128

    def test_unknown_config_key(self, small_pairs):
        pair_a, pair_b = small_pairs
        with pytest.raises(ConfigError):
            bound_ratio(pair_a, pair_b, gauss(1.0), {"m": 3})

    def test_weights_depend_only_on_function(self):
        g1a, g2a, _ = besov_weights(exp2(1.0, 2.0))
        g1b, g2b, _ = besov_weights(exp2(1.0, 2.0))
        assert g1a == g1b and g2a == g2b
        assert g1a > 0.0 and g2a > 0.0


class TestSchattenReports:
    def test_ratio_positive_for_genuine_perturbation(self, small_pairs):
        pair_a, pair_b = small_pairs
        rep = schatten_report(pair_a, pair_b, exp2(1.0, 2.0), 2)
        assert rep.numerator > 0.0
        assert rep.denominator > 0.0
        assert rep.ratio == pytest.approx(rep.numerator / rep.denominator, rel=1e-14)

    def test_identical_pairs_give_zero_ratio(self):
        pair_a, _ = make_pairs(4, 5)
        rep = schatten_report(pair_a, pair_a, exp2(1.0, 2.0), 1)
        assert rep.ratio == 0.0

    def test_hyp_factors_match_schatten_norms(self, small_pairs):
        pair_a, pair_b = small_pairs
        rep = schatten_report(pair_a, pair_b, gauss(1.0), 2)
        assert len(rep.hyp_factors) == 2
        assert all(v >= 0.0 for v in rep.hyp_factors)

    def test_scalar_helper(self, small_pairs):
        pair_a, pair_b = small_pairs
        assert schatten_ratio(pair_a, pair_b, gauss(1.0), 2) == schatten_report(
            pair_a, pair_b, gauss(1.0), 2
        ).ratio

    def test_invalid_p_rejected(self, small_pairs):
        pair_a, pair_b = small_pairs
        with pytest.raises(InvalidP):
            schatten_report(pair_a, pair_b, gauss(1.0), 0.3)


class TestCounterexample:
    def test_closed_forms(self):
        rows = counterexample_scan([1, 10, 100])
        for row in rows:
            assert np.isclose(row.full_factor, row.n / (row.n + 1.0), rtol=1e-12, atol=1e-12)
            assert np.isclose(row.re_factor, float(row.n), rtol=1e-12, atol=1e-12)

    def test_full_factor_stays_below_one(self):
        rows = counterexample_scan([1, 5, 50, 500])
        assert all(row.full_factor < 1.0 for row in rows)

    def test_re_factor_diverges(self):
        rows = counterexample_scan([2, 20, 200])
        values = [row.re_factor for row in rows]
        assert values == sorted(values)
        assert values[-1] / values[0] == pytest.approx(100.0, rel=1e-10)

    def test_invalid_input(self):
        with pytest.raises(ConfigError):
            counterexample_scan([])
        with pytest.raises(ConfigError):
            counterexample_scan([0])


class TestTruncation:
    def test_full_cutoff_reproduces_identity_residual(self):
        pair_a, pair_b = make_pairs(6, 1)
        f = exp2(1.0, 2.0)
        rep = verify_identity(pair_a, pair_b, f)
        rows = truncation_convergence(pair_a, pair_b, f, [100.0])
        assert rows[0].residual == rep.abs_residual

    def test_monotone_beyond_spectral_radius(self):
        pair_a, pair_b = make_pairs(6, 2)
        f = gauss(1.0)
        radius = max(
            np.linalg.norm(pair_a.A1, 2),
            np.linalg.norm(pair_a.A2, 2),
            np.linalg.norm(pair_b.A1, 2),
            np.linalg.norm(pair_b.A2, 2),
        )
        cutoffs = [radius + 0.1, radius + 1.0, radius + 10.0]
        rows = truncation_convergence(pair_a, pair_b, f, cutoffs)
        residuals = [r.residual for r in rows]
        assert residuals[0] == residuals[1] == residuals[2]

    def test_compression_never_exceeds_full_residual(self):
        pair_a, pair_b = make_pairs(5, 3)
        f = exp2(1.0, 1.0)
        full = verify_identity(pair_a, pair_b, f).abs_residual
        rows = truncation_convergence(pair_a, pair_b, f, [0.2, 0.5, 0.9, 5.0])
        for row in rows:
            assert row.residual <= full + 1e-15


class TestEnsemble:
    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            EnsembleSpec(n=0, trials=5)
        with pytest.raises(ConfigError):
            EnsembleSpec(n=4, trials=0)
        with pytest.raises(InvalidP):
            EnsembleSpec(n=4, trials=2, p_values=(0.5,))

    def test_rows_sorted_and_complete(self):
        spec = EnsembleSpec(n=4, trials=6, seed=2)
        report = run_ensemble(spec)
        assert len(report.rows) == 6
        assert [r.trial for r in report.rows] == list(range(6))
        assert report.failures == ()

    def test_deterministic_across_runs(self):
        spec = EnsembleSpec(n=4, trials=5, seed=9)
        one = run_ensemble(spec)
        two = run_ensemble(spec)
        assert one.rows == two.rows
        assert one.aggregates == two.aggregates

    def test_parallel_matches_serial(self):
        """Thread scheduling must not leak into the data."""
        spec = EnsembleSpec(n=4, trials=8, seed=3)
        serial = run_ensemble(spec, max_workers=1)
        threaded = run_ensemble(spec, max_workers=4)
        assert serial.rows == threaded.rows

    def test_zero_perturbation_is_identically_zero(self):
        spec = EnsembleSpec(n=4, trials=4, seed=1, perturb_scale=0.0)
        report = run_ensemble(spec)
        for row in report.rows:
            assert row.deviation_norm == 0.0
            assert row.ratio == 0.0
            assert row.rel_residual == 0.0

    def test_aggregate_keys(self):
        spec = EnsembleSpec(n=4, trials=3, seed=0, p_values=(1.0, 2.0))
        report = run_ensemble(spec)
        assert set(report.aggregates) == {"relResidual", "ratio", "deviationNorm", "schattenRatio"}
        assert set(report.aggregates["schattenRatio"]) == {"1.0", "2.0"}
        stats = report.aggregates["relResidual"]
        assert stats["min"] <= stats["median"] <= stats["max"]

    def test_csv_rows_have_exact_columns(self):
        spec = EnsembleSpec(n=4, trials=2, seed=4, p_values=(1.0, 2.0))
        rows = ensemble_csv_rows(run_ensemble(spec))
        assert len(rows) == 4
        for row in rows:
            assert tuple(row.keys()) == CSV_COLUMNS

    def test_custom_function_config(self):
        spec = EnsembleSpec(n=4, trials=2, seed=0, fn={"name": "gauss", "alpha": 1.0})
        report = run_ensemble(spec)
        assert len(report.rows) == 2

    def test_bad_function_config_rejected(self):
        with pytest.raises(ConfigError):
            EnsembleSpec(n=4, trials=2, fn={"name": "nope"})


def test_pairs_share_dimension_check():
    a = CommutingPair(np.diag([1.0, 2.0]), np.diag([3.0, 4.0]))
    b = CommutingPair(np.diag([1.0, 2.0, 3.0]), np.diag([3.0, 4.0, 5.0]))
    with pytest.raises(Exception):
        verify_identity(a, b, gauss(1.0))
