from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biaslens import (
    Dataset,
    DistributionError,
    JointDistribution,
    Schema,
    UndefinedConditionalError,
    cond_y,
    fixture,
    from_dataset,
    marg_y,
    marg_y_given_a,
    sample_dataset,
    support,
    total_variation,
    validate,
)
from biaslens import io
from biaslens.synth import generate_fair_sp_network

F, M = 0, 1
BSC, MSC, PHD = 0, 1, 2


def _single_cell(p0, p1, rest=None):
    """2x2x1 table; remaining mass goes to group 1."""
    rest = 1 - p0 - p1 if rest is None else rest
    return JointDistribution(Schema((1,), 2), np.array([[[p0], [rest]], [[p1], [0.0]]]))


class TestSchema:
    def test_cell_index_roundtrip(self):
        s = Schema((2, 3, 4))
        for i in range(s.n_cells):
            assert s.cell_index(s.cell_coords(i)) == i

    def test_row_major_order(self):
        s = Schema((2, 3))
        assert s.cell_index((1, 0)) == 3
        assert s.cell_index((0, 2)) == 2

    def test_bad_coordinates(self):
        with pytest.raises(DistributionError):
            Schema((2, 3)).cell_index((2, 0))
        with pytest.raises(DistributionError):
            Schema((2, 3)).cell_index(6)

    def test_needs_two_groups(self):
        with pytest.raises(DistributionError):
            Schema((2,), 1)


class TestValidate:
    def test_uniform_ok(self):
        assert validate(np.full((2, 2, 3), 1 / 12)) is None

    def test_negative_entry(self):
        m = np.full((2, 2, 3), 1 / 12)
        m[0, 0, 0] = -0.1
        m[0, 0, 1] += 0.1 + 1 / 12
        assert "negative" in validate(m)

    def test_mass_deficit(self):
        m = np.full((2, 2, 3), 0.98 / 12)
        assert "0.98" in validate(m)

    def test_constructor_rejects(self):
        with pytest.raises(DistributionError, match="negative"):
            JointDistribution(Schema((3,)), np.array([-0.1] + [1.1 / 11] * 11))

    def test_nonfinite(self):
        m = np.full((2, 2, 3), 1 / 12)
        m[1, 1, 2] = np.nan
        assert "non-finite" in validate(m)


class TestConditionals:
    def test_ratio(self):
        J = _single_cell(0.1, 0.3)
        assert cond_y(J, 0, 0) == pytest.approx(0.75, abs=1e-15)

    def test_degenerate_one(self):
        J = _single_cell(0.0, 0.4)
        assert cond_y(J, 0, 0) == 1.0

    def test_zero_mass_cell(self):
        J = _single_cell(0.0, 0.0, rest=1.0)
        with pytest.raises(UndefinedConditionalError):
            cond_y(J, 0, 0)

    def test_fixture_group_rates(self):
        J = from_dataset(fixture("D_a"), exact=True)
        assert marg_y_given_a(J, M) == Fraction(5, 7)
        assert marg_y_given_a(J, F) == Fraction(10, 37)

    def test_fixture_conditionals(self):
        Jb = from_dataset(fixture("D_b"), exact=True)
        assert cond_y(Jb, (BSC,), M) == Fraction(1, 3)
        Ja = from_dataset(fixture("D_a"), exact=True)
        assert cond_y(Ja, (PHD,), F) == Fraction(2, 3)
        assert cond_y(Ja, (PHD,), M) == 1

    def test_symmetric_groups(self):
        base = np.array([0.1, 0.05, 0.1])
        J = JointDistribution.normalized(Schema((3,)), np.stack([np.stack([base, base]), np.stack([base[::-1], base[::-1]])]))
        assert marg_y_given_a(J, 0) == marg_y_given_a(J, 1)

    def test_zero_mass_group(self):
        J = JointDistribution(Schema((1,)), np.array([[[0.5], [0.0]], [[0.5], [0.0]]]))
        with pytest.raises(UndefinedConditionalError):
            marg_y_given_a(J, 1)
        with pytest.raises(UndefinedConditionalError):
            support(J, 1)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 3), st.sampled_from([1, 2, 4, 8, 16]), st.integers(0, 2**32 - 1))
    def test_brute_force_oracle(self, G_extra, C, seed):
        G = 1 + G_extra
        rs = np.random.default_rng(seed)
        schema = Schema((C,), G)
        m = rs.dirichlet(np.ones(2 * G * C))
        J = JointDistribution(schema, m)
        table = m.reshape(2, G, C)
        for a in range(G):
            num = sum(table[1, a, x] for x in range(C))
            den = sum(table[y, a, x] for y in range(2) for x in range(C))
            assert marg_y_given_a(J, a) == pytest.approx(num / den, abs=1e-14)
            for x in range(C):
                assert cond_y(J, x, a) == pytest.approx(table[1, a, x] / (table[0, a, x] + table[1, a, x]), abs=1e-14)
        assert marg_y(J) == pytest.approx(sum(table[1].ravel()), abs=1e-14)


class TestSupport:
    def test_fixture_male_full(self):
        J = from_dataset(fixture("D_a"))
        assert support(J, M) == frozenset({BSC, MSC, PHD})
        assert support(J, F) == frozenset({BSC, MSC, PHD})

    def test_zero_column_excluded(self):
        m = np.zeros((2, 2, 3))
        m[:, :, :2] = 1 / 8
        J = JointDistribution(Schema((3,)), m)
        assert support(J, 0) == frozenset({0, 1})


class TestDataset:
    def test_from_dataset_single_row(self):
        D = Dataset.from_rows(Schema((2, 2)), [(1, (1, 0), 0, 1)])
        J = from_dataset(D)
        assert J.mass[1, 0, 2] == 1.0
        assert J.mass.sum() == 1.0

    def test_smoothing(self):
        D = Dataset.from_rows(Schema((2,)), [(1, 0, 0, 4)])
        J = from_dataset(D, smoothing=1)
        assert J.mass[1, 0, 0] == pytest.approx(5 / 12)
        assert J.mass[0, 1, 1] == pytest.approx(1 / 12)

    def test_empty_rejected(self):
        with pytest.raises(DistributionError):
            from_dataset(Dataset(Schema((2,)), [], [], []))

    def test_multiplicity_positive(self):
        with pytest.raises(DistributionError):
            Dataset(Schema((2,)), [0], [0], [0], [0])

    def test_compact_merges(self):
        D = Dataset(Schema((2,)), [1, 1, 0], [0, 0, 1], [1, 1, 0], [2, 3, 1])
        C = D.compact()
        assert len(C) == 2
        assert C == D
        assert C.n == 6

    def test_csv_roundtrip(self, tmp_path):
        D = fixture("D_a_prime")
        io.write_dataset(D, tmp_path / "d.csv")
        assert io.read_dataset(tmp_path / "d.csv", D.schema) == D
        assert io.read_dataset(tmp_path / "d.csv") == D

    def test_distribution_json_roundtrip(self, tmp_path):
        J = from_dataset(fixture("D_b"), exact=True)
        io.write_distribution(J, tmp_path / "j.json")
        assert np.array_equal(io.read_distribution(tmp_path / "j.json").mass, J.mass)
        Jf = J.to_float()
        io.write_distribution(Jf, tmp_path / "f.json")
        assert np.array_equal(io.read_distribution(tmp_path / "f.json").mass, Jf.mass)


@pytest.mark.slow
def test_empirical_converges_in_tv():
    _, J = generate_fair_sp_network(k=1, cards=8, seed=3)
    D = sample_dataset(J, 10**6, seed=4)
    assert total_variation(from_dataset(D), J) < 0.01
