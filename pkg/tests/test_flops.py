import math

import pytest

from walsh_ofdm.flops import (
    CostParams,
    efficiency,
    flop_table,
    flops_jlcozf_sic,
    flops_lmmse,
    flops_lzf,
    flops_mmse_sic,
    jlcozf_sic_components,
    mmse_sic_components,
)


def two_sig(x):
    return float(f"{x:.1e}")


class TestLinear:
    def test_unit_scale(self):
        assert flops_lzf(CostParams(0, 1)) == 17.5

    def test_sigma2(self):
        assert flops_lzf(CostParams(2, 128)) == pytest.approx(1.611e9, rel=1e-3)
        assert two_sig(flops_lmmse(CostParams(2, 128))) == 1.6e9

    def test_sigma4(self):
        assert two_sig(flops_lzf(CostParams(4, 128))) == 1.0e11

    def test_lmmse_difference(self):
        for s in range(5):
            p = CostParams(s, 64)
            assert flops_lmmse(p) - flops_lzf(p) == p.n

    def test_sigma6_rows_agree(self):
        p = CostParams(6, 128)
        assert two_sig(flops_lzf(p)) == two_sig(flops_lmmse(p)) == 6.6e12


class TestMmseSic:
    def test_sigma2(self):
        assert two_sig(flops_mmse_sic(CostParams(2, 128))) == 7.4e9

    def test_hand_component(self):
        assert mmse_sic_components(CostParams(1, 1))["covariance_products"] == 33

    def test_inverse_sqrt_component(self):
        c = mmse_sic_components(CostParams(2, 128))["inverse_sqrt"]
        assert c == 3 * (10 * 512**3 + 3 * 512**2 + 2.5 * 512)
        assert c == pytest.approx(4.028e9, rel=1e-3)


class TestJlcozf:
    def test_sigma2_exact_root(self):
        value = flops_jlcozf_sic(CostParams(2, 128, 80, math.inf))
        assert value == pytest.approx(4.3e9, rel=0.02)
        # value implied by the printed MMSE-SIC efficiency of 69.2 %
        implied = flops_mmse_sic(CostParams(2, 128)) / 1.692
        assert value == pytest.approx(implied, rel=2e-3)

    def test_sigma2_series(self):
        assert two_sig(flops_jlcozf_sic(CostParams(2, 128, 80, 3))) == 1.6e9

    def test_hand_component(self):
        assert jlcozf_sic_components(CostParams(1, 2, 0))["covariance_products"] == 16

    def test_exact_root_shares_mmse_cost(self):
        p = CostParams(3, 32, 10, math.inf)
        assert jlcozf_sic_components(p)["inverse_sqrt"] == mmse_sic_components(p)["inverse_sqrt"]

    def test_per_subcarrier_switch(self):
        p = CostParams(2, 128, 80)
        diff = flops_jlcozf_sic(p, per_subcarrier_build=True) - flops_jlcozf_sic(p)
        assert diff == 4 * (37 * 80**2 + 26.5 * 80 + 9.5) * 127

    @pytest.mark.parametrize("delta", [3, math.inf])
    @pytest.mark.parametrize("sigma", [1, 2, 4])
    def test_monotone_in_tau(self, sigma, delta):
        costs = [flops_jlcozf_sic(CostParams(sigma, 32, t, delta)) for t in range(32)]
        assert all(b >= a for a, b in zip(costs, costs[1:]))

    @pytest.mark.parametrize("sigma", [2, 3, 4, 5, 6])
    @pytest.mark.parametrize("N", [16, 64, 128, 256])
    def test_branch_dominance(self, sigma, N):
        tau = N // 2
        series = flops_jlcozf_sic(CostParams(sigma, N, tau, 3))
        exact = flops_jlcozf_sic(CostParams(sigma, N, tau, math.inf))
        assert series < exact < flops_mmse_sic(CostParams(sigma, N))

    def test_tau_bounds(self):
        with pytest.raises(ValueError):
            CostParams(2, 16, 16)
        with pytest.raises(ValueError):
            CostParams(2, 16, 4, delta=5)


class TestEfficiency:
    def test_equal(self):
        assert efficiency(5.0, 5.0) == 0

    def test_sigma2(self):
        p = CostParams(2, 128, 80)
        proposed = flops_jlcozf_sic(p)
        assert efficiency(proposed, flops_mmse_sic(p)) == pytest.approx(69.2, abs=2)
        assert efficiency(proposed, flops_lzf(p)) == pytest.approx(-62.9, abs=2)

    def test_antisymmetric_sign(self):
        assert efficiency(2.0, 3.0) > 0 > efficiency(3.0, 2.0)

    def test_zero(self):
        with pytest.raises(ValueError):
            efficiency(0.0, 1.0)


def test_table_rows():
    rows = flop_table([2], [128], [80], [math.inf, 3])
    assert len(rows) == 8
    proposed = {r[4]: r[5] for r in rows if r[0] == "JLCOZF_SIC"}
    assert proposed[3] < proposed[math.inf]
    assert all(r[6] == 0 for r in rows if r[0] == "JLCOZF_SIC")
