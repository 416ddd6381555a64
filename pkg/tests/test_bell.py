"""Two-particle correlation experiment against hand-derived tables."""

import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import conftest as oracle
from qrsim import (
    BellScenario,
    SWEEP_HEADER,
    ValidationError,
    build_bell_state,
    chsh,
    chsh_at_point,
    run_bell,
    sample_joint_outcomes,
    schmidt_decompose,
    sweep,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)

COEFF_CASES = [
    (INV_SQRT2, INV_SQRT2),
    (0.6, 0.8),
    (0.8, 0.6),
    (0.6, 0.8j),
]

ANGLE_CASES = [
    (0.7, 1.9),
    (math.pi / 2, math.pi / 4),
    (0.0, 2.2),
    (3.1, 5.5),
]


class TestBuildBellState:
    def test_singlet_amplitudes(self):
        psi = build_bell_state(INV_SQRT2, INV_SQRT2)
        assert psi.system.labels == ("P1", "P2")
        assert_allclose(psi.amplitudes, [0.0, INV_SQRT2, -INV_SQRT2, 0.0], atol=1e-15)

    def test_one_sided_pair_is_a_product(self):
        psi = build_bell_state(1.0, 0.0)
        assert_allclose(psi.amplitudes, [0.0, 1.0, 0.0, 0.0], atol=1e-15)
        assert schmidt_decompose(psi, "P1").rank == 1

    def test_weights_become_schmidt_coefficients(self):
        sd = schmidt_decompose(build_bell_state(0.6, 0.8), "P1")
        assert_allclose(sd.coefficients, [0.8, 0.6], atol=1e-12)
        assert sd.rank == 2

    def test_norm_band(self):
        build_bell_state(0.70710678, 0.70710678)  # near-unit input is accepted
        with pytest.raises(ValidationError, match="norm"):
            build_bell_state(1.0, 1.0)


class TestBellScenario:
    def test_renormalizes_inside_the_band(self):
        sc = BellScenario(0.70710678, 0.70710678, 0.0, 0.0)
        assert abs(sc.a) ** 2 + abs(sc.b) ** 2 == pytest.approx(1.0, abs=1e-15)

    def test_rejects_out_of_band_coefficients(self):
        with pytest.raises(ValidationError, match="norm"):
            BellScenario(0.8, 0.8, 0.0, 0.0)

    def test_rejects_bad_angles_and_values(self):
        with pytest.raises(ValidationError, match="finite"):
            BellScenario(INV_SQRT2, INV_SQRT2, math.nan, 0.0)
        with pytest.raises(ValidationError, match="outcome_values"):
            BellScenario(INV_SQRT2, INV_SQRT2, 0.0, 0.0, outcome_values=(1.0,))


# ---------------------------------------------------------------------------


class TestRunAgainstClosedForms:
    @pytest.mark.parametrize("a,b", COEFF_CASES)
    @pytest.mark.parametrize("t1,t2", ANGLE_CASES)
    def test_all_tables(self, a, b, t1, t2):
        res = run_bell(BellScenario(a, b, t1, t2))

        assert_allclose(res.quantum_table, oracle.quantum_table(a, b, t1, t2), atol=1e-10)
        assert_allclose(res.marginal1, oracle.marginal_table(a, b, t1), atol=1e-12)
        assert_allclose(res.marginal2, oracle.marginal_table(b, a, t2), atol=1e-12)
        assert_allclose(res.hidden_table, oracle.hidden_table(a, b, t1, t2), atol=1e-10)
        assert_allclose(res.quasi_table, oracle.quasi_table(a, b, t1, t2), atol=1e-10)

        want_e = float(np.sum(np.outer([1, -1], [1, -1]) * oracle.quantum_table(a, b, t1, t2)))
        assert res.E_quantum == pytest.approx(want_e, abs=1e-10)
        assert abs(res.quantum_table.sum() - 1.0) < 1e-9
        assert abs(res.hidden_table.sum() - 1.0) < 1e-9

    @pytest.mark.parametrize("a,b", COEFF_CASES)
    def test_formal_table_marginalizes_to_the_proper_one(self, a, b):
        res = run_bell(BellScenario(a, b, 0.7, 1.9))
        assert_allclose(res.quasi_table.sum(axis=0).real, res.quantum_table, atol=1e-12)
        assert_allclose(res.quasi_table.sum(axis=0).imag, 0.0, atol=1e-12)

    def test_outcome_index_bookkeeping(self):
        res = run_bell(BellScenario(0.6, 0.8, 0.7, 1.9))
        for idx in (res.m1_outcome_indices, res.m2_outcome_indices):
            assert len(idx) == 2 and len(set(idx)) == 2
            assert all(0 <= i < 3 for i in idx)


class TestSingletStructure:
    def test_proper_correlator_depends_on_the_angle_difference(self):
        rng = np.random.default_rng(101)
        for _ in range(12):
            t1, t2 = rng.uniform(0.0, 2 * math.pi, size=2)
            res = run_bell(BellScenario(INV_SQRT2, INV_SQRT2, t1, t2, include_m3=False))
            assert res.E_quantum == pytest.approx(oracle.e_quantum_singlet(t1, t2), abs=1e-10)

    def test_recorded_correlator_factorizes(self):
        rng = np.random.default_rng(102)
        for _ in range(12):
            t1, t2 = rng.uniform(0.0, 2 * math.pi, size=2)
            res = run_bell(BellScenario(INV_SQRT2, INV_SQRT2, t1, t2))
            assert res.E_hidden == pytest.approx(oracle.e_hidden_singlet(t1, t2), abs=1e-10)

    def test_equal_angles_never_agree(self):
        for t in (0.0, 0.9, 2.5):
            res = run_bell(BellScenario(INV_SQRT2, INV_SQRT2, t, t, include_m3=False))
            assert res.quantum_table[0, 0] == pytest.approx(0.0, abs=1e-12)
            assert res.quantum_table[1, 1] == pytest.approx(0.0, abs=1e-12)

    def test_first_marginal_ignores_the_far_angle(self):
        base = run_bell(BellScenario(INV_SQRT2, INV_SQRT2, 0.7, 0.0, include_m3=False))
        assert_allclose(base.marginal1, [0.5, 0.5], atol=1e-12)
        for t2 in np.linspace(0.0, 2 * math.pi, 7):
            res = run_bell(BellScenario(INV_SQRT2, INV_SQRT2, 0.7, t2, include_m3=False))
            assert_allclose(res.marginal1, base.marginal1, atol=1e-12)

    def test_formal_table_is_proper_on_the_reference_axis(self):
        for t1 in (0.0, math.pi):
            res = run_bell(BellScenario(INV_SQRT2, INV_SQRT2, t1, 1.1, include_m3=False))
            assert res.quasi.max_imag <= 1e-12
            assert res.quasi.min_real >= -1e-12

    def test_formal_table_goes_negative_off_the_reference_axis(self):
        res = run_bell(
            BellScenario(INV_SQRT2, INV_SQRT2, math.pi / 2, math.pi / 4, include_m3=False)
        )
        assert res.quasi.min_real < -1e-6


# ---------------------------------------------------------------------------


class TestChsh:
    STANDARD = (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)

    def test_standard_angles_reach_the_quantum_extreme(self):
        s = chsh(INV_SQRT2, INV_SQRT2, self.STANDARD, model="quantum")
        assert abs(s) == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-9)

    def test_recorded_model_stays_below_two(self):
        s = chsh(INV_SQRT2, INV_SQRT2, self.STANDARD, model="hidden")
        assert abs(s) <= 2.0 + 1e-9
        assert s == pytest.approx(-math.sqrt(2.0), abs=1e-9)

    def test_equal_settings_pin_the_proper_value(self):
        for t in (0.0, 1.3):
            s = chsh(INV_SQRT2, INV_SQRT2, (t, t, t, t), model="quantum")
            assert s == pytest.approx(-2.0, abs=1e-9)

    def test_outcome_values_enter_quadratically(self):
        angles = (0.2, 1.4, 0.9, 2.6)
        s = chsh(INV_SQRT2, INV_SQRT2, angles)
        # the values multiply in pairs, so a global sign flip cancels out
        flipped = chsh(INV_SQRT2, INV_SQRT2, angles, outcome_values=(-1.0, 1.0))
        assert flipped == pytest.approx(s, abs=1e-12)
        # (1, 0) turns each correlator into the both-aligned cell probability
        picked = chsh(INV_SQRT2, INV_SQRT2, angles, outcome_values=(1.0, 0.0))
        cell = lambda x, y: oracle.quantum_table(INV_SQRT2, INV_SQRT2, x, y)[0, 0]
        a1, a2, b1, b2 = angles
        want = cell(a1, b1) - cell(a1, b2) + cell(a2, b1) + cell(a2, b2)
        assert picked == pytest.approx(want, abs=1e-10)

    def test_model_and_angle_validation(self):
        with pytest.raises(ValidationError, match="quantum, hidden"):
            chsh(INV_SQRT2, INV_SQRT2, self.STANDARD, model="quasi")
        with pytest.raises(ValidationError, match="four"):
            chsh(INV_SQRT2, INV_SQRT2, (0.0, 1.0, 2.0))
        with pytest.raises(ValidationError, match="finite"):
            chsh(INV_SQRT2, INV_SQRT2, (0.0, 1.0, 2.0, math.inf))

    def test_per_point_value_closed_form(self):
        rng = np.random.default_rng(103)
        for _ in range(6):
            t1, t2 = rng.uniform(0.0, 2 * math.pi, size=2)
            want = -1.0 + math.cos(t2) - math.cos(t1) - math.cos(t1 - t2)
            got = chsh_at_point(INV_SQRT2, INV_SQRT2, t1, t2, model="quantum")
            assert got == pytest.approx(want, abs=1e-9)


class TestSweep:
    def test_small_grid(self):
        header, rows = sweep(INV_SQRT2, INV_SQRT2, points=4)
        assert header == SWEEP_HEADER
        assert len(rows) == 16
        thetas = [2 * math.pi * k / 4 for k in range(4)]
        for row in rows:
            t1, t2, e_q, e_h, s_q, s_h, max_imag, min_real = row
            assert t1 in thetas and t2 in thetas
            assert e_q == pytest.approx(oracle.e_quantum_singlet(t1, t2), abs=1e-10)
            assert e_h == pytest.approx(oracle.e_hidden_singlet(t1, t2), abs=1e-10)
            want_s = -1.0 + math.cos(t2) - math.cos(t1) - math.cos(t1 - t2)
            assert s_q == pytest.approx(want_s, abs=1e-9)
            assert abs(s_h) <= 2.0 + 1e-9
            assert max_imag >= 0.0 and min_real <= 1.0

    def test_validation(self):
        with pytest.raises(ValidationError, match="at least one"):
            sweep(INV_SQRT2, INV_SQRT2, points=0)


class TestSampling:
    def test_reproducible_counts(self):
        res = run_bell(BellScenario(INV_SQRT2, INV_SQRT2, 0.7, 1.9, include_m3=False))
        c1 = sample_joint_outcomes(res.quantum_table, 1000, seed=7)
        c2 = sample_joint_outcomes(res.quantum_table, 1000, seed=7)
        assert np.array_equal(c1, c2)
        assert c1.shape == (2, 2)
        assert c1.sum() == 1000

    def test_impossible_cells_stay_empty(self):
        res = run_bell(BellScenario(INV_SQRT2, INV_SQRT2, 1.1, 1.1, include_m3=False))
        counts = sample_joint_outcomes(res.quantum_table, 5000, seed=1)
        assert counts[0, 0] == 0 and counts[1, 1] == 0

    def test_validation(self):
        with pytest.raises(ValidationError, match="positive"):
            sample_joint_outcomes(np.ones((2, 2)) / 4, 0, seed=0)
        with pytest.raises(ValidationError, match="all-zero"):
            sample_joint_outcomes(np.zeros((2, 2)), 10, seed=0)


class TestResultShape:
    def test_optional_recorded_run(self):
        with_m3 = run_bell(BellScenario(0.6, 0.8, 0.7, 1.9, include_m3=True))
        without = run_bell(BellScenario(0.6, 0.8, 0.7, 1.9, include_m3=False))
        assert without.hidden_joint is None
        assert without.hidden_table is None
        assert without.E_hidden is None
        assert with_m3.E_hidden is not None
        # the extra parked pointer cannot shift the proper statistics
        assert without.E_quantum == pytest.approx(with_m3.E_quantum, abs=1e-12)
        assert_allclose(without.quantum_table, with_m3.quantum_table, atol=1e-12)

    def test_json_round_trip(self):
        res = run_bell(BellScenario(0.6, 0.8, 0.7, 1.9))
        blob = json.dumps(res.to_json_dict())
        data = json.loads(blob)
        assert data["a"] == [0.6, 0.0]
        assert data["E_hidden"] == pytest.approx(res.E_hidden)
        assert len(data["quasi"]["table"]) == 2
        no_m3 = run_bell(BellScenario(0.6, 0.8, 0.7, 1.9, include_m3=False))
        assert no_m3.to_json_dict()["hidden_joint"] is None
