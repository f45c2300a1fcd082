"""Momentum-transfer deficit: weak values of the atomic momentum operator,
pointer corrections, and the deficit-to-mass mapping."""

import math

import numpy as np
import pytest

from weakscatter.deficit import (
    AtomicStatePair,
    DeltaSpec,
    atomic_momentum_weak_value,
    coupling_weak_value,
    deficit_from_masses,
    mass_mapping,
    pointer_correction,
    sample_pair,
    total_momentum_transfer,
)
from weakscatter.errors import ConditioningError, DomainError, GridMismatchError
from weakscatter.kinematics import MassValue
from weakscatter.qmcore import (
    DiscreteOperator,
    DiscreteState,
    GaussianSpec,
    make_gaussian,
)
from weakscatter.weakvalue import weak_value

M_H = 1.0079
M_H2 = 2.0159


def gaussian_pair(hbar_k, sigma_i, sigma_f=None):
    sigma_f = sigma_i if sigma_f is None else sigma_f
    return AtomicStatePair(
        GaussianSpec(0.0, sigma_i), GaussianSpec(hbar_k, sigma_f), hbar_k
    )


def quadrature_oracle(sigma_i, sigma_f, hbar_k, n=8192, margin=8.0):
    """Independent trapezoid evaluation of the weak-value ratio."""
    lo = min(0.0, hbar_k) - margin * max(sigma_i, sigma_f)
    hi = max(0.0, hbar_k) + margin * max(sigma_i, sigma_f)
    p = np.linspace(lo, hi, n)
    xi_i = np.exp(-(p**2) / (2 * sigma_i**2))
    xi_f = np.exp(-((p - hbar_k) ** 2) / (2 * sigma_f**2))
    return np.trapezoid(xi_f * p * xi_i, p) / np.trapezoid(xi_f * xi_i, p)


class TestAtomicMomentumWeakValue:
    @pytest.mark.parametrize("sigma", [0.1, 1.0, 10.0])
    @pytest.mark.parametrize("hbar_k", [0.5, 2.0, 5.0])
    def test_equal_widths_give_half_transfer(self, sigma, hbar_k):
        value = atomic_momentum_weak_value(gaussian_pair(hbar_k, sigma))
        assert value.real == pytest.approx(hbar_k / 2.0, abs=1e-8)
        assert value.imag == 0.0

    def test_width_independence_across_two_decades(self):
        values = [
            atomic_momentum_weak_value(gaussian_pair(2.0, sigma)).real
            for sigma in np.logspace(-1, 1, 9)
        ]
        assert max(values) - min(values) < 1e-8

    def test_plane_wave_final_gives_full_transfer(self):
        pair = AtomicStatePair(GaussianSpec(0.0, 1.0), DeltaSpec(5.0), 5.0)
        assert atomic_momentum_weak_value(pair) == 5.0

    def test_no_shift_gives_zero(self):
        pair = AtomicStatePair(GaussianSpec(0.0, 1.0), GaussianSpec(0.0, 1.0), 1.0)
        assert atomic_momentum_weak_value(pair).real == pytest.approx(0.0, abs=1e-12)

    def test_unequal_widths_match_quadrature_oracle(self):
        pair = gaussian_pair(5.0, 2.0, 1.0)
        value = atomic_momentum_weak_value(pair).real
        assert value == pytest.approx(4.0, abs=1e-6)
        assert value == pytest.approx(quadrature_oracle(2.0, 1.0, 5.0), abs=1e-6)

    def test_grid_states_match_closed_form(self):
        # the quadrature route over sampled states agrees with the
        # Gaussian-product center
        sigma_i, sigma_f, hbar_k = 1.5, 0.8, 3.0
        xi_i = make_gaussian(GaussianSpec(0.0, sigma_i), -15.0, 18.0, 8192)
        xi_f = make_gaussian(GaussianSpec(hbar_k, sigma_f), -15.0, 18.0, 8192)
        pair = AtomicStatePair(xi_i, xi_f, hbar_k)
        expected = hbar_k * sigma_i**2 / (sigma_i**2 + sigma_f**2)
        assert atomic_momentum_weak_value(pair).real == pytest.approx(expected, abs=1e-8)

    def test_sigma_f_sweep_monotone_to_full_transfer(self):
        hbar_k, sigma_i = 2.0, 1.0
        ratios = [1.0, 0.5, 0.25, 0.125, 0.0625]
        values = []
        for ratio in ratios:
            value = atomic_momentum_weak_value(gaussian_pair(hbar_k, sigma_i, sigma_i * ratio))
            # verify the fast path against the quadrature oracle
            oracle = quadrature_oracle(sigma_i, sigma_i * ratio, hbar_k, n=16384)
            assert value.real == pytest.approx(oracle, abs=1e-7)
            values.append(value.real)
        assert values[0] == pytest.approx(hbar_k / 2.0, abs=1e-12)
        assert all(a < b for a, b in zip(values, values[1:]))
        assert values[-1] < hbar_k

    def test_phase_factor_invariance(self):
        # a constant unit-modulus factor on the final state cancels
        xi_i = make_gaussian(GaussianSpec(0.0, 1.0), -10.0, 12.0, 4096)
        xi_f = make_gaussian(GaussianSpec(2.0, 1.0), -10.0, 12.0, 4096)
        base = atomic_momentum_weak_value(AtomicStatePair(xi_i, xi_f, 2.0))
        for chi in (0.3, 1.9, -2.5):
            rotated = xi_f.with_values(xi_f.values * np.exp(1j * chi))
            value = atomic_momentum_weak_value(AtomicStatePair(xi_i, rotated, 2.0))
            assert value == pytest.approx(base, abs=1e-12)

    def test_matches_generic_weak_value_engine(self):
        # discretized momentum operator through the generic machinery
        hbar_k, sigma = 2.0, 1.0
        xi_i = make_gaussian(GaussianSpec(0.0, sigma), -8.0, 10.0, 256)
        xi_f = make_gaussian(GaussianSpec(hbar_k, sigma), -8.0, 10.0, 256)
        labels = tuple(f"p{i}" for i in range(256))
        momentum_op = DiscreteOperator.diagonal(xi_i.grid)
        generic = weak_value(
            momentum_op,
            DiscreteState(labels, xi_i.values),
            DiscreteState(labels, xi_f.values),
        ).value
        dedicated = atomic_momentum_weak_value(AtomicStatePair(xi_i, xi_f, hbar_k))
        assert dedicated == pytest.approx(generic, abs=1e-6)

    def test_near_orthogonal_grid_pair_rejected(self):
        xi_i = make_gaussian(GaussianSpec(0.0, 0.3), -40.0, 45.0, 8192)
        xi_f = make_gaussian(GaussianSpec(30.0, 0.3), -40.0, 45.0, 8192)
        with pytest.raises(ConditioningError):
            atomic_momentum_weak_value(AtomicStatePair(xi_i, xi_f, 30.0))

    def test_delta_in_far_tail_rejected(self):
        pair = AtomicStatePair(GaussianSpec(0.0, 0.1), DeltaSpec(5.0), 5.0)
        with pytest.raises(ConditioningError):
            atomic_momentum_weak_value(pair)

    def test_mismatched_grids_rejected(self):
        xi_i = make_gaussian(GaussianSpec(0.0, 1.0), -10.0, 12.0, 4096)
        xi_f = make_gaussian(GaussianSpec(2.0, 1.0), -10.0, 12.0, 2048)
        with pytest.raises(GridMismatchError):
            atomic_momentum_weak_value(AtomicStatePair(xi_i, xi_f, 2.0))


class TestPairValidation:
    def test_initial_must_be_at_rest(self):
        with pytest.raises(DomainError):
            AtomicStatePair(GaussianSpec(0.5, 1.0), GaussianSpec(2.0, 1.0), 2.0)
        shifted = make_gaussian(GaussianSpec(0.4, 1.0), -10.0, 10.0, 4096)
        with pytest.raises(DomainError):
            AtomicStatePair(shifted, GaussianSpec(1.0, 1.0), 1.0)

    def test_transfer_must_be_positive(self):
        with pytest.raises(DomainError):
            AtomicStatePair(GaussianSpec(0.0, 1.0), GaussianSpec(1.0, 1.0), 0.0)

    def test_delta_initial_rejected(self):
        with pytest.raises(DomainError):
            AtomicStatePair(DeltaSpec(0.0), GaussianSpec(1.0, 1.0), 1.0)

    def test_sample_pair_delta_final(self):
        initial, final = sample_pair(
            AtomicStatePair(GaussianSpec(0.0, 1.0), DeltaSpec(2.0), 2.0)
        )
        assert final is None
        assert initial.norm2() > 0.0


class TestCouplingAndCorrection:
    def test_coupling_weak_value_examples(self):
        assert coupling_weak_value(5.0, 10.0) == -5.0     # Gaussian case, hbar_k = 10
        assert coupling_weak_value(10.0, 10.0) == 0.0     # plane-wave case
        assert coupling_weak_value(0.0, 10.0) == -10.0    # no shift

    def test_pointer_correction_examples(self):
        assert pointer_correction(0.2, -5.0) == pytest.approx(1.0)
        assert pointer_correction(0.7, 0.0) == 0.0
        assert pointer_correction(0.0, -5.0) == 0.0

    def test_negative_smallness_rejected(self):
        with pytest.raises(DomainError):
            pointer_correction(-0.1, -5.0)


class TestTotalMomentumTransfer:
    def test_gaussian_case_numbers(self):
        prediction = total_momentum_transfer(10.0, 0.2, gaussian_pair(10.0, 1.0))
        assert prediction.p_w == pytest.approx(5.0, abs=1e-8)
        assert prediction.coupling_wv == pytest.approx(-5.0, abs=1e-8)
        assert prediction.correction == pytest.approx(1.0, abs=1e-8)
        assert prediction.total_transfer == pytest.approx(-9.0, abs=1e-8)
        assert prediction.deficit_fraction == pytest.approx(0.1, abs=1e-9)
        assert prediction.implied_mass_ratio == pytest.approx(0.81, abs=1e-8)
        assert prediction.weak_regime

    def test_total_is_sum_exactly(self):
        for lam in (0.0, 0.2, 1.5):
            prediction = total_momentum_transfer(7.0, lam, gaussian_pair(7.0, 2.0))
            assert prediction.total_transfer == -7.0 + prediction.correction

    @pytest.mark.parametrize("lam", [0.0, 0.5, 1.0, 1.7, 2.0])
    def test_deficit_bound(self, lam):
        prediction = total_momentum_transfer(4.0, lam, gaussian_pair(4.0, 1.0))
        assert abs(prediction.total_transfer) <= 4.0 + 1e-12

    def test_plane_wave_final_conventional_for_any_lambda(self):
        pair = AtomicStatePair(GaussianSpec(0.0, 1.0), DeltaSpec(6.0), 6.0)
        for lam in (0.0, 0.3, 1.2):
            prediction = total_momentum_transfer(6.0, lam, pair)
            assert prediction.total_transfer == -6.0
            assert prediction.correction == 0.0
            assert prediction.implied_mass_ratio == 1.0

    def test_zero_lambda_conventional(self):
        prediction = total_momentum_transfer(10.0, 0.0, gaussian_pair(10.0, 1.0))
        assert prediction.total_transfer == -10.0

    def test_regime_flag(self):
        assert total_momentum_transfer(4.0, 0.99, gaussian_pair(4.0, 1.0)).weak_regime
        assert not total_momentum_transfer(4.0, 1.0, gaussian_pair(4.0, 1.0)).weak_regime


class TestMassMapping:
    def test_nanotube_molecule_factor(self):
        factor = deficit_from_masses(0.64, M_H2)
        assert factor == pytest.approx(0.5635, abs=0.003)
        assert 1.0 - factor == pytest.approx(0.43, abs=0.01)

    def test_mapping_inverts_factor(self):
        factor = deficit_from_masses(0.64, M_H2)
        assert mass_mapping(factor) == pytest.approx(0.64 / M_H2, abs=1e-12)

    def test_unit_factor_identity(self):
        assert mass_mapping(1.0) == 1.0
        assert deficit_from_masses(M_H, M_H) == 1.0

    def test_polymer_range_example(self):
        assert deficit_from_masses(0.94, M_H) == pytest.approx(0.9657, abs=1e-3)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            mass_mapping(0.0)
        with pytest.raises(DomainError):
            mass_mapping(1.2)
        with pytest.raises(DomainError):
            deficit_from_masses(-0.5, 1.0)

    def test_accepts_mass_values(self):
        assert deficit_from_masses(MassValue(0.64), MassValue(M_H2)) == pytest.approx(
            math.sqrt(0.64 / M_H2), rel=1e-12
        )
