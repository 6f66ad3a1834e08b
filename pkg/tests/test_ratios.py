import numpy as np
import pytest

from fincluster.panel import METRICS, Quarter, RawRecord, panel_from_records, quarter_span
from fincluster.panel import CompanyPanel
from fincluster.ratios import (
    FEATURES,
    RatioTensor,
    ScalingError,
    apply_scaling,
    compute_expenses,
    compute_ratios,
    fit_scaling,
    invert_scaling,
    read_ratio_table,
    write_ratio_table,
)


def make_panel(cells):
    """cells: dict company -> list of (gpi, paid, incurred, uwp) per quarter."""
    records = []
    for company, rows in cells.items():
        for j, (gpi, paid, incurred, uwp) in enumerate(rows):
            records.append(
                RawRecord(
                    company,
                    Quarter.from_index(Quarter(2013, 1).index + j),
                    gross_premium_income=gpi,
                    claims_paid=paid,
                    claims_incurred=incurred,
                    underwriting_profit=uwp,
                )
            )
    return panel_from_records(records)


def random_panel(rng, n=5, j=4):
    values = np.zeros((n, j, len(METRICS)))
    values[:, :, 0] = rng.uniform(0, 1e6, size=(n, j))  # gpi
    values[:, :, 0][rng.random((n, j)) < 0.15] = 0.0  # some zero-premium cells
    values[:, :, 1] = rng.uniform(0, 8e5, size=(n, j))  # claims paid
    values[:, :, 2] = rng.uniform(-1e5, 9e5, size=(n, j))  # claims incurred
    values[:, :, 3] = rng.uniform(-3e5, 3e5, size=(n, j))  # underwriting profit
    observed = np.ones((n, j), dtype=bool)
    return CompanyPanel(
        companies=[f"C{i}" for i in range(n)],
        periods=quarter_span(Quarter(2013, 1), Quarter.from_index(Quarter(2013, 1).index + j - 1)),
        values=values,
        observed=observed,
    )


class TestExpenses:
    def test_hand_arithmetic(self):
        assert compute_expenses(100, 60, 10) == 30

    def test_zero_case(self):
        assert compute_expenses(0, 0, 0) == 0

    def test_negative_profit(self):
        assert compute_expenses(100, 120, -30) == 10


class TestComputeRatios:
    def test_hand_example(self):
        panel = make_panel(
            {
                "A": [(100, 70, 60, 10)],
                "B": [(300, 0, 0, 0)],  # brings total market premium to 400
            }
        )
        tensor = compute_ratios(panel)
        a = tensor.values[0, 0]
        expected = {
            "market_share": 25.0,
            "claims_paid_ratio": 70.0,
            "loss_ratio": 60.0,
            "underwriting_profit_ratio": 10.0,
            "expense_ratio": 30.0,
            "combined_ratio": 90.0,
        }
        for name, value in expected.items():
            assert a[FEATURES.index(name)] == pytest.approx(value, abs=1e-12)
        assert a[FEATURES.index("claims_payout_ratio")] == pytest.approx(70 / 60 * 100)

    def test_all_zero_cell_gives_all_zero_ratios(self):
        panel = make_panel({"A": [(0, 0, 0, 0)], "B": [(100, 50, 60, 5)]})
        assert np.all(compute_ratios(panel).values[0, 0] == 0.0)

    def test_single_company_market_share_100(self):
        panel = make_panel({"A": [(100, 50, 60, 5), (80, 40, 50, 4)]})
        tensor = compute_ratios(panel)
        assert np.allclose(tensor.feature("market_share"), 100.0)

    def test_market_share_closure(self):
        rng = np.random.default_rng(7)
        panel = random_panel(rng)
        tensor = compute_ratios(panel)
        share_sum = tensor.feature("market_share").sum(axis=0)
        total = panel.metric("gross_premium_income").sum(axis=0)
        assert np.all(np.abs(share_sum[total > 0] - 100.0) < 1e-9)
        assert np.all(share_sum[total == 0] == 0.0)

    def test_combined_ratio_identity_exact(self):
        rng = np.random.default_rng(8)
        tensor = compute_ratios(random_panel(rng))
        combined = tensor.feature("combined_ratio")
        assert np.array_equal(
            combined, tensor.feature("loss_ratio") + tensor.feature("expense_ratio")
        )

    def test_accounting_identity(self):
        rng = np.random.default_rng(9)
        panel = random_panel(rng)
        tensor = compute_ratios(panel)
        gpi = panel.metric("gross_premium_income")
        total = (
            tensor.feature("expense_ratio")
            + tensor.feature("loss_ratio")
            + tensor.feature("underwriting_profit_ratio")
        )
        assert np.all(np.abs(total[gpi > 0] - 100.0) < 1e-9)


class TestScaling:
    def test_constant_feature_mean_constant_std_zero(self):
        panel = make_panel({"A": [(100, 50, 60, 5), (100, 50, 60, 5)]})
        spec = fit_scaling(compute_ratios(panel), mode="within_company")
        assert spec.std[0, FEATURES.index("loss_ratio")] == 0.0
        assert spec.mean[0, FEATURES.index("loss_ratio")] == 60.0

    def test_two_point_population_std(self):
        values = np.zeros((1, 2, len(FEATURES)))
        values[0, :, 0] = [0.0, 2.0]
        tensor = RatioTensor(["A"], quarter_span(Quarter(2013, 1), Quarter(2013, 2)), values)
        spec = fit_scaling(tensor, mode="within_company")
        assert spec.mean[0, 0] == 1.0
        assert spec.std[0, 0] == 1.0  # population std, divide by count

    def test_global_mode_on_identical_companies_matches_within(self):
        panel = make_panel(
            {"A": [(100, 50, 60, 5), (80, 40, 50, 4)], "B": [(100, 50, 60, 5), (80, 40, 50, 4)]}
        )
        tensor = compute_ratios(panel)
        within = fit_scaling(tensor, mode="within_company")
        global_ = fit_scaling(tensor, mode="global")
        assert np.allclose(global_.mean, within.mean[0])
        assert np.allclose(global_.std, within.std[0])

    def test_apply_hand_example(self):
        values = np.zeros((1, 2, len(FEATURES)))
        values[0, :, 0] = [0.0, 2.0]
        tensor = RatioTensor(["A"], quarter_span(Quarter(2013, 1), Quarter(2013, 2)), values)
        scaled = apply_scaling(tensor, fit_scaling(tensor))
        assert scaled.values[0, 0, 0] == -1.0
        assert scaled.values[0, 1, 0] == 1.0

    def test_zero_variance_maps_to_zero(self):
        panel = make_panel({"A": [(100, 50, 60, 5), (100, 50, 60, 5)]})
        tensor = compute_ratios(panel)
        scaled = apply_scaling(tensor, fit_scaling(tensor))
        assert np.all(scaled.values == 0.0)

    def test_round_trip_within_1e9(self):
        rng = np.random.default_rng(11)
        tensor = compute_ratios(random_panel(rng))
        spec = fit_scaling(tensor)
        back = invert_scaling(apply_scaling(tensor, spec), spec)
        mask = spec.std[:, None, :] > 0
        assert np.all(np.abs(back.values - tensor.values)[np.broadcast_to(mask, back.values.shape)] < 1e-9)

    def test_scaled_moments(self):
        rng = np.random.default_rng(12)
        tensor = compute_ratios(random_panel(rng))
        spec = fit_scaling(tensor)
        scaled = apply_scaling(tensor, spec)
        means = scaled.values.mean(axis=1)
        stds = scaled.values.std(axis=1)
        nonzero = spec.std > 0
        assert np.all(np.abs(means[nonzero]) < 1e-9)
        assert np.all(np.abs(stds[nonzero] - 1.0) < 1e-9)
        assert np.all(stds[~nonzero] == 0.0)

    def test_shape_mismatch_rejected(self):
        rng = np.random.default_rng(13)
        tensor = compute_ratios(random_panel(rng, n=5))
        other = compute_ratios(random_panel(rng, n=4))
        spec = fit_scaling(tensor)
        with pytest.raises(ScalingError):
            apply_scaling(other, spec)


class TestRatioTableRoundTrip:
    def test_long_format_round_trip(self, tmp_path):
        rng = np.random.default_rng(21)
        tensor = compute_ratios(random_panel(rng))
        path = tmp_path / "ratios.csv"
        write_ratio_table(tensor, path)
        again = read_ratio_table(path)
        assert again.companies == tensor.companies
        assert np.array_equal(again.values, tensor.values)
