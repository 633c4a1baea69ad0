import pytest
from hypothesis import given
from hypothesis import strategies as st

from m3.evaluation import McNemarTable, mcnemar, paired_table

from oracles import oracle_chi2_sf_1dof


class TestMcNemar:
    def test_balanced_discordance_b_c_10(self):
        chi, p = mcnemar(McNemarTable(b=10, c=10))
        assert chi == pytest.approx(0.05, abs=1e-12)
        assert p == pytest.approx(oracle_chi2_sf_1dof(0.05), abs=1e-6)
        assert p > 0.8

    def test_b5_c15_hand_arithmetic(self):
        chi, p = mcnemar(McNemarTable(b=5, c=15))
        assert chi == pytest.approx(4.05, abs=1e-12)  # (|5-15|-1)^2 / 20
        assert p == pytest.approx(oracle_chi2_sf_1dof(4.05), abs=1e-6)
        assert p == pytest.approx(0.044, abs=5e-4)

    def test_symmetry_in_b_and_c(self):
        for b, c in [(0, 7), (3, 12), (20, 5)]:
            assert mcnemar(McNemarTable(b=b, c=c)) == mcnemar(McNemarTable(b=c, c=b))

    def test_undefined_when_no_discordant_pairs(self):
        with pytest.raises(ValueError):
            mcnemar(McNemarTable(b=0, c=0, a=50, d=50))

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            McNemarTable(b=-1, c=3)

    def test_all_small_tables_match_integration_oracle(self):
        # Every table with 1 <= b + c <= 30.
        for total in range(1, 31):
            for b in range(total + 1):
                c = total - b
                chi, p = mcnemar(McNemarTable(b=b, c=c))
                assert p == pytest.approx(oracle_chi2_sf_1dof(chi), abs=1e-6), (b, c)

    @given(st.integers(min_value=0, max_value=500), st.integers(min_value=0, max_value=500))
    def test_p_value_in_unit_interval(self, b, c):
        if b + c == 0:
            return
        chi, p = mcnemar(McNemarTable(b=b, c=c))
        assert chi >= 0.0
        assert 0.0 <= p <= 1.0


class TestPairedTable:
    def test_counts_all_four_cells(self):
        table = paired_table(
            [True, True, False, False, True],
            [True, False, True, False, False],
        )
        assert (table.a, table.b, table.c, table.d) == (1, 2, 1, 1)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            paired_table([True], [True, False])
