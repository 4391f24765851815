import math

import numpy as np
import pytest

from ocdm_isac import crlb
from ocdm_isac.config import ComChannelParams, ExperimentConfig, RadarTarget
from ocdm_isac.channel import PathSpec
from ocdm_isac.experiments import (CSV_HEADER, ber_trial, bits_csv, channel_csv, complex_matrix_csv, crlb_std,
                                   estimate_rows, format_results, frame_csv, matrix_csv, rmse_trial,
                                   run_ber_sweep, run_rmse_sweep, run_single, simulate_ber, simulate_rmse,
                                   trial_rng)

INF = math.inf


@pytest.fixture(scope="module")
def quick():
    return ExperimentConfig(trials=6, snr_com_db=(0.0, 10.0, 20.0), snr_rad_db=(0.0, 10.0))


def metric(rows, name):
    return [r for r in rows if r.metric == name]


class TestBerSweep:
    def test_infinite_snr_perfect_csi_is_error_free(self, quick):
        exp = quick.replace(snr_com_db=(INF,), estimations=("perfect_csi",),
                            channel_com=ComChannelParams(doppler_max_hz=0.0, delay_spread_s=60e-9))
        rows = run_ber_sweep(exp)
        assert [r.value for r in rows] == [0.0, 0.0]

    def test_row_layout(self, quick):
        rows = run_ber_sweep(quick)
        assert len(rows) == 3 * 2 * 2
        assert {(r.estimation, r.equalizer) for r in rows} == {
            (e, q) for e in ("ls", "perfect_csi") for q in ("zf", "mmse")}
        assert all(0 <= r.value <= 0.5 for r in rows)

    def test_ber_decreases_with_snr(self):
        exp = ExperimentConfig(trials=20, snr_com_db=(0.0, 20.0), estimations=("perfect_csi",),
                               equalizers=("mmse",))
        b = simulate_ber(exp).ber()[:, 0, 0]
        assert b[1] < b[0]

    def test_trials_are_independent_of_order(self, quick):
        np.testing.assert_array_equal(ber_trial(quick, 3), ber_trial(quick, 3))
        assert not np.array_equal(trial_rng(1, 0).random(4), trial_rng(1, 1).random(4))

    def test_fixed_channel(self, quick):
        exp = quick.replace(channel_com=ComChannelParams(model="fixed", paths=(PathSpec(1.0, 20e-9),)),
                            snr_com_db=(INF,), estimations=("perfect_csi",))
        assert simulate_ber(exp).errors.sum() == 0


class TestDeterminism:
    def test_ber_csv_byte_identical(self, quick):
        a = format_results(quick, run_ber_sweep(quick, threads=1), "ber")
        b = format_results(quick, run_ber_sweep(quick, threads=1), "ber")
        c = format_results(quick, run_ber_sweep(quick, threads=4), "ber")
        assert a == b == c

    def test_rmse_csv_byte_identical(self, quick):
        a = format_results(quick, run_rmse_sweep(quick, threads=1), "rmse")
        c = format_results(quick, run_rmse_sweep(quick, threads=4), "rmse")
        assert a == c

    def test_seed_changes_output(self, quick):
        a = run_ber_sweep(quick)
        b = run_ber_sweep(quick.replace(seed=2))
        assert [r.value for r in a] != [r.value for r in b]

    def test_metadata_header(self, quick):
        text = format_results(quick, run_ber_sweep(quick), "ber")
        lines = text.split("\n")
        assert lines[0].startswith("# ocdm-isac ")
        assert any(line.startswith("# config_sha256 = ") for line in lines)
        assert lines[5] == CSV_HEADER
        assert "\r" not in text


class TestRmseSweep:
    def test_crlb_columns_match_formula(self, quick):
        rows = run_rmse_sweep(quick)
        cfg = quick.frame
        for r in metric(rows, "range_crlb"):
            assert r.value == crlb(cfg, 10 ** (r.snr_db / 10)).range_std
        for r in metric(rows, "velocity_crlb"):
            assert r.value == crlb(cfg, 10 ** (r.snr_db / 10)).velocity_std(cfg.carrier_hz)

    @staticmethod
    def _on_grid(velocity_bin):
        base = ExperimentConfig()
        cfg = base.frame
        spec = base.periodogram()
        r = cfg.delay_to_range(10 / (cfg.subcarrier_spacing * spec.m_per))
        v = cfg.doppler_to_velocity(velocity_bin / (cfg.block_duration * spec.n_per))
        exp = base.replace(trials=3, targets=(RadarTarget(r, v),), snr_rad_db=(INF,), rmse_snr_com_db=INF,
                           radar_estimation="perfect_csi")
        rows = run_rmse_sweep(exp)
        return metric(rows, "range_rmse")[0].value, metric(rows, "velocity_rmse")[0].value, rows

    def test_noiseless_on_grid_static_target_is_exact(self):
        r, v, rows = self._on_grid(0)
        assert r < 1e-9
        assert v < 1e-9
        assert metric(rows, "range_crlb")[0].value == 0.0

    def test_noiseless_on_grid_moving_target_only_ici_bias(self):
        # the Doppler ramp inside each block leaks a little energy across bins
        r, v, _ = self._on_grid(4)
        assert r < 5e-3
        assert v < 2e-2

    def test_genie_matches_error_free_decoding(self):
        base = ExperimentConfig(trials=1, snr_rad_db=(5.0,))
        genie = rmse_trial(base.replace(radar_symbols="genie"), 0)
        decoded = rmse_trial(base.replace(radar_estimation="perfect_csi", rmse_snr_com_db=INF), 0)
        for a, b in zip(genie, decoded):
            np.testing.assert_array_equal(a, b)

    def test_within_three_crlb_at_ten_db(self):
        exp = ExperimentConfig(trials=200, snr_rad_db=(10.0,), radar_symbols="genie")
        r_rmse, _ = simulate_rmse(exp).rmse()
        assert r_rmse[0, 0] <= 3 * crlb_std(exp, 10.0)[0]

    def test_crlb_share_for_two_targets(self):
        exp = ExperimentConfig(targets=(RadarTarget(20, 0, 1.0), RadarTarget(40, 10, 1.0)))
        one = ExperimentConfig()
        assert crlb_std(exp, 10.0, 0)[0] == pytest.approx(crlb_std(one, 10.0 - 10 * math.log10(2))[0])

    def test_estimates_csv(self, quick):
        res = simulate_rmse(quick)
        text = estimate_rows(quick, res)
        lines = text.strip().split("\n")
        assert lines[0].startswith("trial_seed,trial,snr_db")
        assert len(lines) == 1 + quick.trials * len(quick.snr_rad_db)
        assert res.estimates.shape == (6, 2, 1, 2)


class TestSingle:
    def test_completes_with_dumps(self):
        exp = ExperimentConfig()
        res = run_single(exp, 10.0)
        assert res["peak_to_median_db"] > 20
        assert len(res["estimates"]) == 1
        assert res["estimates"][0].range_hat == pytest.approx(20.0, abs=0.5)
        cfg = exp.frame
        assert frame_csv(res["frame"]).count("\n") == cfg.frame_len + 1
        assert channel_csv(res["channel_estimate"], res["channel_true"]).count("\n") == \
            cfg.n_subcarriers * cfg.n_symbols + 1
        assert matrix_csv(res["periodogram"]).count("\n") == 1024
        assert bits_csv(res["bits"], res["rx_bits"]).count("\n") == cfg.n_bits + 1

    def test_complex_matrix_csv(self):
        text = complex_matrix_csv(np.array([[1 + 2j, 3.5 + 0j]]))
        assert text == "1.0,2.0,3.5,0.0\n"
