import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ocdm_isac import ChannelSpec, FrameConfig, OCDMReceiver, OCDMTransmitter, PathSpec
from ocdm_isac.channel import apply_channel, complex_noise, frequency_response, random_com_channel
from ocdm_isac.fresnel import apply_dfnt, idft
from ocdm_isac.receiver import (ber, bit_errors, channel_estimate, decode_symbols, demodulate, equalize,
                                interpolate_channel, ls_estimate, qpsk_demap, qpsk_hard)
from ocdm_isac.transmitter import (frequency_grid, insert_pilots, modulate, precode_grid, qpsk_map,
                                   transmitted_pilots)

from conftest import crandn, random_bits


class TestDemodulate:
    def test_inverts_modulate(self, cfg, rng):
        Z = crandn(rng, cfg.n_subcarriers, cfg.n_symbols)
        np.testing.assert_allclose(demodulate(modulate(Z, cfg), cfg), Z, atol=1e-10)

    def test_noise_energy_preserved(self, small_cfg, rng):
        w = complex_noise(rng, small_cfg.frame_len)
        bodies = w.reshape(small_cfg.n_symbols, small_cfg.block_len)[:, small_cfg.cp_len:]
        assert np.sum(np.abs(demodulate(w, small_cfg)) ** 2) == pytest.approx(np.sum(np.abs(bodies) ** 2))

    def test_length_mismatch(self, small_cfg):
        with pytest.raises(ValueError):
            demodulate(np.zeros(small_cfg.frame_len - 1), small_cfg)


class TestLeastSquares:
    def _rx(self, cfg, rng, spec):
        Z = frequency_grid(crandn(rng, cfg.n_data, cfg.n_symbols), cfg)
        return demodulate(apply_channel(modulate(Z, cfg), spec, cfg), cfg)

    def test_flat_unit_channel(self, cfg, rng):
        np.testing.assert_allclose(ls_estimate(self._rx(cfg, rng, ChannelSpec()), cfg), 1.0, atol=1e-12)

    def test_single_tap_gain(self, cfg, rng):
        g = 0.3 - 0.8j
        H = ls_estimate(self._rx(cfg, rng, ChannelSpec((PathSpec(g),))), cfg)
        np.testing.assert_allclose(H, g, atol=1e-12)

    def test_two_path_frequency_response(self, cfg, rng):
        paths = (PathSpec(1.0, 0.0), PathSpec(0.5j, 25e-9))
        H = ls_estimate(self._rx(cfg, rng, ChannelSpec(paths)), cfg)
        kL = cfg.pilot_rows
        expected = sum(p.gain * np.exp(-2j * np.pi * kL * cfg.subcarrier_spacing * p.delay) for p in paths)
        np.testing.assert_allclose(H, np.repeat(expected[:, None], cfg.n_symbols, 1), atol=1e-9)

    def test_unbiased_under_noise(self, small_cfg):
        rng = np.random.default_rng(8)
        Yf0 = np.zeros((16, 6), dtype=complex)
        Yf0[small_cfg.pilot_rows] = (0.7 + 0.2j) * transmitted_pilots(small_cfg)[:, None]
        sigma = 0.3
        est = np.stack([ls_estimate(Yf0 + sigma * crandn(rng, 16, 6), small_cfg) for _ in range(10 ** 4)])
        se = sigma / np.sqrt(est.shape[0])
        assert np.max(np.abs(est.mean(0) - (0.7 + 0.2j))) < 3 * se * np.sqrt(2)

    def test_needs_pilots(self):
        c = FrameConfig(n_subcarriers=8, n_symbols=2, n_pilots=0)
        with pytest.raises(ValueError):
            ls_estimate(np.ones((8, 2)), c)


class TestInterpolation:
    def test_flat(self, cfg):
        H = interpolate_channel(np.full((4, 50), 0.5 + 0.5j), cfg)
        np.testing.assert_allclose(H, 0.5 + 0.5j)

    def test_order_four_circular_wrap(self):
        c = FrameConfig(n_subcarriers=4, n_symbols=1, n_pilots=2)
        H = interpolate_channel(np.array([[1.0], [3.0]]), c)
        np.testing.assert_allclose(H[:, 0], [1, 2, 3, 2])

    def test_order_four_extrapolated_edge(self):
        c = FrameConfig(n_subcarriers=4, n_symbols=1, n_pilots=2)
        H = interpolate_channel(np.array([[1.0], [3.0]]), c, edge="extrapolate")
        np.testing.assert_allclose(H[:, 0], [1, 2, 3, 4])

    @settings(max_examples=30, deadline=None)
    @given(a=st.complex_numbers(max_magnitude=10), b=st.complex_numbers(max_magnitude=10))
    def test_affine_exact_in_group_interiors(self, a, b):
        cfg = FrameConfig()
        m = np.arange(cfg.n_subcarriers)
        truth = a * m + b
        H = interpolate_channel(np.repeat(truth[cfg.pilot_rows, None], 3, 1), cfg)
        interior = m < cfg.pilot_rows[-1]
        np.testing.assert_allclose(H[interior, 0], truth[interior], atol=1e-9 * (1 + abs(a) * 256 + abs(b)))
        Hx = interpolate_channel(np.repeat(truth[cfg.pilot_rows, None], 3, 1), cfg, edge="extrapolate")
        np.testing.assert_allclose(Hx[:, 0], truth, atol=1e-9 * (1 + abs(a) * 256 + abs(b)))

    def test_pilot_rows_kept(self, cfg, rng):
        Hp = crandn(rng, 4, 50)
        np.testing.assert_array_equal(interpolate_channel(Hp, cfg)[cfg.pilot_rows], Hp)

    def test_bad_edge(self, cfg):
        with pytest.raises(ValueError):
            interpolate_channel(np.ones((4, 50)), cfg, edge="spline")


class TestEqualize:
    def test_zf_perfect_csi(self, cfg, rng):
        spec = random_com_channel(3, cfg, rng)
        Z = frequency_grid(crandn(rng, cfg.n_data, cfg.n_symbols), cfg)
        Y = demodulate(apply_channel(modulate(Z, cfg), spec, cfg), cfg)
        Zh = equalize(Y, frequency_response(spec, cfg), cfg, "zf")
        np.testing.assert_allclose(Zh, Z[cfg.data_rows], atol=1e-8)

    def test_mmse_tends_to_zf(self, small_cfg, rng):
        H = 1.0 + crandn(rng, 16, 6) * 0.3
        Y = crandn(rng, 16, 6)
        a = equalize(Y, H, small_cfg, "mmse", 1e-12)
        b = equalize(Y, H, small_cfg, "zf")
        assert np.max(np.abs(a - b)) < 1e-6

    def test_mmse_half_gain_at_noise_level(self, small_cfg):
        H = np.full((16, 6), 0.1 + 0.0j)
        Y = np.ones((16, 6), dtype=complex)
        mmse = equalize(Y, H, small_cfg, "mmse", 0.01)
        np.testing.assert_allclose(mmse, 0.5 * (1 / 0.1))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), ns=st.floats(1e-6, 10))
    def test_mmse_never_exceeds_zf_gain(self, seed, ns):
        c = FrameConfig(n_subcarriers=16, n_symbols=6, n_pilots=4)
        H = crandn(np.random.default_rng(seed), 16, 6)
        ones = np.ones((16, 6))
        assert np.all(np.abs(equalize(ones, H, c, "mmse", ns)) <= np.abs(equalize(ones, H, c, "zf")) + 1e-12)

    def test_zf_singular_bins(self, small_cfg):
        H = np.ones((16, 6), dtype=complex)
        H[1, 2] = 0
        H[5, 0] = 1e-13
        Z, n = equalize(np.ones((16, 6)), H, small_cfg, "zf", return_singular=True)
        assert n == 2
        assert np.all(np.isfinite(Z))

    def test_kind_and_ratio_validation(self, small_cfg):
        with pytest.raises(ValueError):
            equalize(np.ones((16, 6)), np.ones((16, 6)), small_cfg, "mmse")
        with pytest.raises(ValueError):
            equalize(np.ones((16, 6)), np.ones((16, 6)), small_cfg, "dfe")


class TestDecode:
    def test_loopback(self, cfg, rng):
        X = crandn(rng, cfg.n_data, cfg.n_symbols)
        Z = insert_pilots(precode_grid(X, cfg), cfg)
        np.testing.assert_allclose(decode_symbols(Z[cfg.data_rows], cfg), X, atol=1e-9)

    def test_pilotless_equals_dfnt(self, rng):
        c = FrameConfig(n_subcarriers=32, n_symbols=3, n_pilots=0)
        Z = crandn(rng, 32, 3)
        # Z is the DFT of the time-domain block, which is the IDFnT of X
        np.testing.assert_allclose(decode_symbols(Z, c), apply_dfnt(idft(Z, axis=0), 32), atol=1e-10)

    def test_ofdm_passthrough(self, small_cfg, rng):
        Z = crandn(rng, 12, 6)
        np.testing.assert_array_equal(decode_symbols(Z, small_cfg, "ofdm"), Z)

    def test_high_snr_symbol_errors(self, cfg):
        rng = np.random.default_rng(4)
        bits = random_bits(rng, cfg)
        spec = ChannelSpec((PathSpec(1.0), PathSpec(0.4j, 100e-9)))
        x = OCDMTransmitter(cfg).transform(bits)
        sigma2 = spec.total_power / 10 ** 3
        y = apply_channel(x, spec, cfg) + np.sqrt(sigma2) * complex_noise(rng, cfg.frame_len)
        X = OCDMReceiver(cfg, estimation="perfect_csi", channel=spec, noise_to_signal=sigma2).transform(y)
        assert np.array_equal(qpsk_hard(X), qpsk_map(bits, cfg))


class TestDemapAndBer:
    def test_round_trip(self, cfg, rng):
        bits = random_bits(rng, cfg)
        np.testing.assert_array_equal(qpsk_demap(qpsk_map(bits, cfg)), bits)

    def test_ber_extremes(self, rng):
        b = rng.integers(0, 2, 100)
        assert ber(b, b) == 0.0
        assert ber(1 - b, b) == 1.0
        assert bit_errors(1 - b, b) == 100

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ber(np.zeros(4), np.zeros(5))


class TestReceiverEstimator:
    @pytest.mark.parametrize("waveform", ["ocdm", "ofdm"])
    def test_noiseless_loopback(self, cfg, rng, waveform):
        bits = random_bits(rng, cfg)
        x = OCDMTransmitter(cfg, waveform).transform(bits)
        rx = OCDMReceiver(cfg, waveform, equalizer="zf").fit(x)
        assert ber(rx.predict(x), bits) == 0
        assert rx.n_singular_bins_ == 0
        np.testing.assert_allclose(rx.channel_estimate_, 1.0, atol=1e-10)

    def test_perfect_csi_requires_channel(self, small_cfg):
        with pytest.raises(ValueError):
            channel_estimate(np.ones((16, 6)), small_cfg, "perfect_csi")

    def test_mmse_ber_anchor(self, cfg):
        # 200 frames through a static 3-path channel at 15 dB
        rng = np.random.default_rng(21)
        errs = 0
        for _ in range(200):
            bits = random_bits(rng, cfg)
            spec = random_com_channel(3, cfg, rng)
            s2 = spec.total_power / 10 ** 1.5
            y = apply_channel(OCDMTransmitter(cfg).transform(bits), spec, cfg)
            y = y + np.sqrt(s2) * complex_noise(rng, cfg.frame_len)
            rx = OCDMReceiver(cfg, estimation="perfect_csi", channel=spec, noise_to_signal=s2)
            errs += bit_errors(rx.predict(y), bits)
        assert errs / (200 * cfg.n_bits) < 2e-2

    def test_get_params(self):
        p = OCDMReceiver(equalizer="zf").get_params()
        assert p["equalizer"] == "zf" and p["estimation"] == "ls"
