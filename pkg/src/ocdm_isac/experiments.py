"""Seeded Monte Carlo harnesses (BER and RMSE-vs-CRLB sweeps, single runs).

Trial ``i`` draws all of its randomness from
``SeedSequence([seed, i])``, so results do not depend on how trials are
scheduled across threads; aggregation always runs in trial order.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import io
import math

import numpy as np

from . import __version__
from .channel import (apply_channel, complex_noise, frequency_response, random_com_channel,
                      radar_targets_channel)
from .config import config_hash
from .errors import NumericalError
from .radar import crlb, extract_peaks, periodogram_2d, rebuild_grid, wipe_symbols
from .receiver import (bit_errors, channel_estimate, decode_symbols, demodulate, equalize, qpsk_demap,
                       qpsk_hard)
from .transmitter import frequency_grid, modulate, qpsk_map

CSV_HEADER = "experiment,seed,snr_db,waveform,estimation,equalizer,target,metric,value"


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    seed: int
    snr_db: float
    waveform: str
    estimation: str
    equalizer: str
    target: str
    metric: str
    value: float

    def csv(self):
        return ",".join([self.experiment, str(self.seed), _fmt(self.snr_db), self.waveform, self.estimation,
                         self.equalizer, self.target, self.metric, _fmt(self.value)])


def _fmt(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def trial_rng(seed, trial):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


def _noise_std(power, snr_db):
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return math.sqrt(power / 10.0 ** (snr_db / 10.0))


def _draw_com_channel(exp, rng):
    c = exp.channel_com
    if c.model == "fixed":
        return c.spec().validate(exp.frame)
    return random_com_channel(c.n_paths, exp.frame, rng, c.doppler_max_hz, c.delay_spread_s)


def _map(fn, n, threads):
    if threads <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


@dataclass
class BerResult:
    """Per-trial bit-error counts, ``errors[trial, snr, estimation, equalizer]``."""

    errors: np.ndarray
    n_bits: int
    snr_db: tuple
    estimations: tuple
    equalizers: tuple

    def ber(self):
        return self.errors.sum(axis=0) / (self.errors.shape[0] * self.n_bits)


def ber_trial(exp, trial, waveform=None):
    """Bit-error counts of one trial for every (SNR, estimation, equalizer)."""
    cfg = exp.frame
    waveform = waveform or exp.mode
    rng = trial_rng(exp.seed, trial)
    bits = rng.integers(0, 2, cfg.n_bits, dtype=np.uint8)
    channel = _draw_com_channel(exp, rng)
    noise = complex_noise(rng, cfg.frame_len)
    X = qpsk_map(bits, cfg)
    x = modulate(frequency_grid(X, cfg, waveform), cfg)
    Y0 = demodulate(apply_channel(x, channel, cfg), cfg)
    W = demodulate(noise, cfg)
    H_true = frequency_response(channel, cfg) if "perfect_csi" in exp.estimations else None
    out = np.zeros((len(exp.snr_com_db), len(exp.estimations), len(exp.equalizers)), dtype=np.int64)
    for s, snr in enumerate(exp.snr_com_db):
        std = _noise_std(channel.total_power, snr)
        Y = Y0 + std * W if std else Y0
        for e, est in enumerate(exp.estimations):
            H = H_true if est == "perfect_csi" else channel_estimate(Y, cfg, "ls")
            for q, eq in enumerate(exp.equalizers):
                Z = equalize(Y, H, cfg, eq, max(std * std, 1e-300))
                out[s, e, q] = bit_errors(qpsk_demap(decode_symbols(Z, cfg, waveform)), bits)
    return out


def simulate_ber(exp, threads=1, waveform=None):
    errors = _map(lambda i: ber_trial(exp, i, waveform), exp.trials, threads)
    return BerResult(np.stack(errors), exp.frame.n_bits, exp.snr_com_db, exp.estimations, exp.equalizers)


def run_ber_sweep(exp, threads=1):
    """Mean BER per SNR point, estimation mode and equalizer."""
    res = simulate_ber(exp, threads)
    ber = res.ber()
    rows = []
    for s, snr in enumerate(exp.snr_com_db):
        for e, est in enumerate(exp.estimations):
            for q, eq in enumerate(exp.equalizers):
                rows.append(ResultRow(exp.name, exp.seed, snr, exp.mode, est, eq, "", "ber", ber[s, e, q]))
    return rows


@dataclass
class RmseResult:
    """Per-trial estimation errors, arrays of shape ``(trials, snr, target)``."""

    range_err: np.ndarray
    velocity_err: np.ndarray
    estimates: np.ndarray
    snr_db: tuple

    def rmse(self):
        return (np.sqrt(np.mean(self.range_err ** 2, axis=0)),
                np.sqrt(np.mean(self.velocity_err ** 2, axis=0)))


def _truth_norm(exp):
    cfg = exp.frame
    tau = np.array([cfg.range_to_delay(t.range_m) for t in exp.targets], dtype=float)
    nu = np.array([cfg.velocity_to_doppler(t.velocity_mps) for t in exp.targets], dtype=float)
    return tau, nu


def _associate(estimates, exp):
    """Greedy nearest assignment of estimates to true targets (normalised units)."""
    cfg = exp.frame
    tau, nu = _truth_norm(exp)
    est = np.array([[e.tau_hat, e.doppler_hat] for e in estimates])
    d = ((est[:, None, 0] - tau[None, :]) * cfg.subcarrier_spacing) ** 2 + \
        ((est[:, None, 1] - nu[None, :]) * cfg.block_duration) ** 2
    order = np.full(len(tau), -1)
    d = d.copy()
    for _ in range(len(tau)):
        i, j = np.unravel_index(np.argmin(d), d.shape)
        order[j] = i
        d[i, :] = np.inf
        d[:, j] = np.inf
    return est[order]


def rmse_trial(exp, trial, waveform=None):
    """Range / velocity errors of one SUNDAE trial at every radar SNR point."""
    cfg = exp.frame
    waveform = waveform or exp.mode
    spec = exp.periodogram()
    rng = trial_rng(exp.seed, trial)
    bits = rng.integers(0, 2, cfg.n_bits, dtype=np.uint8)
    channel = _draw_com_channel(exp, rng)
    noise_com = complex_noise(rng, cfg.frame_len)
    noise_rad = complex_noise(rng, cfg.frame_len)
    radar = radar_targets_channel([(t.range_m, t.velocity_mps, t.gain) for t in exp.targets], cfg)

    X = qpsk_map(bits, cfg)
    Z_true = frequency_grid(X, cfg, waveform)
    x = modulate(Z_true, cfg)
    if exp.radar_symbols == "genie":
        Z_full = Z_true
    else:
        std_c = _noise_std(channel.total_power, exp.rmse_snr_com_db)
        Yc = demodulate(apply_channel(x, channel, cfg) + std_c * noise_com, cfg)
        H = channel_estimate(Yc, cfg, exp.radar_estimation, channel)
        Z = equalize(Yc, H, cfg, exp.radar_equalizer, max(std_c * std_c, 1e-300))
        Z_full = rebuild_grid(qpsk_hard(decode_symbols(Z, cfg, waveform)), cfg, waveform)
    Yr0 = demodulate(apply_channel(x, radar, cfg), cfg)
    Wr = demodulate(noise_rad, cfg)
    tau, nu = _truth_norm(exp)
    n_t = len(exp.targets)
    S = len(exp.snr_rad_db)
    r_err = np.zeros((S, n_t))
    v_err = np.zeros((S, n_t))
    est_out = np.zeros((S, n_t, 2))
    for s, snr in enumerate(exp.snr_rad_db):
        std = _noise_std(radar.total_power, snr)
        Yr = Yr0 + std * Wr if std else Yr0
        found = extract_peaks(wipe_symbols(Yr, Z_full, cfg), cfg, spec, n_t)
        est = _associate(found, exp)
        if not np.all(np.isfinite(est)):
            raise NumericalError("non-finite target estimate")
        r_err[s] = cfg.delay_to_range(est[:, 0] - tau)
        v_err[s] = cfg.doppler_to_velocity(est[:, 1] - nu)
        est_out[s, :, 0] = cfg.delay_to_range(est[:, 0])
        est_out[s, :, 1] = cfg.doppler_to_velocity(est[:, 1])
    return r_err, v_err, est_out


def simulate_rmse(exp, threads=1, waveform=None):
    out = _map(lambda i: rmse_trial(exp, i, waveform), exp.trials, threads)
    return RmseResult(np.stack([o[0] for o in out]), np.stack([o[1] for o in out]),
                      np.stack([o[2] for o in out]), exp.snr_rad_db)


def crlb_std(exp, snr_db, target_index=0):
    """Converted bound (range m, velocity m/s) for one target at ``snr_db``.

    The radar SNR is defined on the summed target power; each target's own
    SNR is its share of it.
    """
    cfg = exp.frame
    total = sum(abs(t.gain) ** 2 for t in exp.targets)
    share = abs(exp.targets[target_index].gain) ** 2 / total
    snr_lin = math.inf if math.isinf(snr_db) else share * 10.0 ** (snr_db / 10.0)
    if math.isinf(snr_lin):
        return 0.0, 0.0
    b = crlb(cfg, snr_lin)
    return b.range_std, b.velocity_std(cfg.carrier_hz)


def run_rmse_sweep(exp, threads=1, result=None):
    """Range / velocity RMSE per radar SNR with the converted bounds alongside."""
    res = result if result is not None else simulate_rmse(exp, threads)
    r_rmse, v_rmse = res.rmse()
    est = "genie" if exp.radar_symbols == "genie" else exp.radar_estimation
    rows = []
    for s, snr in enumerate(exp.snr_rad_db):
        for p in range(len(exp.targets)):
            cr, cv = crlb_std(exp, snr, p)
            for metric, value in (("range_rmse", r_rmse[s, p]), ("velocity_rmse", v_rmse[s, p]),
                                  ("range_crlb", cr), ("velocity_crlb", cv)):
                rows.append(ResultRow(exp.name, exp.seed, snr, exp.mode, est, exp.radar_equalizer,
                                      str(p), metric, value))
    return rows


def estimate_rows(exp, res):
    """Per-trial estimates: ``trial_seed,trial,snr_db,target,r_true,v_true,r_hat,v_hat``."""
    lines = ["trial_seed,trial,snr_db,target,range_true,velocity_true,range_hat,velocity_hat"]
    for i in range(res.estimates.shape[0]):
        seed = np.random.SeedSequence([int(exp.seed), i]).generate_state(1)[0]
        for s, snr in enumerate(exp.snr_rad_db):
            for p, t in enumerate(exp.targets):
                r_hat, v_hat = res.estimates[i, s, p]
                lines.append(",".join([str(seed), str(i), _fmt(snr), str(p), _fmt(t.range_m),
                                       _fmt(t.velocity_mps), _fmt(r_hat), _fmt(v_hat)]))
    return "\n".join(lines) + "\n"


def format_results(exp, rows, experiment):
    """Results CSV text: ``#`` metadata lines, pinned header, one row per metric."""
    buf = io.StringIO()
    buf.write(f"# ocdm-isac {__version__}\n")
    buf.write(f"# experiment = {experiment}\n")
    buf.write(f"# config_sha256 = {config_hash(exp)}\n")
    buf.write(f"# seed = {exp.seed}\n")
    buf.write(f"# trials = {exp.trials}\n")
    buf.write(CSV_HEADER + "\n")
    for row in rows:
        buf.write(row.csv() + "\n")
    return buf.getvalue()


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run_single(exp, snr_rad_db=None, trial=0):
    """One seeded end-to-end ISAC run with everything needed for the dumps."""
    cfg = exp.frame
    spec = exp.periodogram()
    waveform = exp.mode
    if snr_rad_db is None:
        snr_rad_db = exp.snr_rad_db[-1]
    rng = trial_rng(exp.seed, trial)
    bits = rng.integers(0, 2, cfg.n_bits, dtype=np.uint8)
    channel = _draw_com_channel(exp, rng)
    noise_com = complex_noise(rng, cfg.frame_len)
    noise_rad = complex_noise(rng, cfg.frame_len)
    radar = radar_targets_channel([(t.range_m, t.velocity_mps, t.gain) for t in exp.targets], cfg)

    X = qpsk_map(bits, cfg)
    Z_true = frequency_grid(X, cfg, waveform)
    x = modulate(Z_true, cfg)
    std_c = _noise_std(channel.total_power, exp.rmse_snr_com_db)
    y_com = apply_channel(x, channel, cfg) + std_c * noise_com
    std_r = _noise_std(radar.total_power, snr_rad_db)
    y_rad = apply_channel(x, radar, cfg) + std_r * noise_rad

    Yc = demodulate(y_com, cfg)
    H_est = channel_estimate(Yc, cfg, exp.radar_estimation, channel)
    Z = equalize(Yc, H_est, cfg, exp.radar_equalizer, max(std_c * std_c, 1e-300))
    X_soft = decode_symbols(Z, cfg, waveform)
    X_hat = qpsk_hard(X_soft)
    rx_bits = qpsk_demap(X_soft)
    Z_full = Z_true if exp.radar_symbols == "genie" else rebuild_grid(X_hat, cfg, waveform)
    W = wipe_symbols(demodulate(y_rad, cfg), Z_full, cfg)
    surface = periodogram_2d(W, spec)
    found = extract_peaks(W, cfg, spec, len(exp.targets), surface=surface)
    return {
        "frame": x,
        "bits": bits,
        "rx_bits": rx_bits,
        "ber": bit_errors(rx_bits, bits) / bits.size,
        "channel": channel,
        "channel_estimate": H_est,
        "channel_true": frequency_response(channel, cfg),
        "periodogram": surface,
        "estimates": found,
        "peak_to_median_db": float(10 * np.log10(surface.max() / np.median(surface))),
        "snr_rad_db": snr_rad_db,
    }


def frame_csv(x):
    lines = ["index,re,im"] + [f"{i},{_fmt(v.real)},{_fmt(v.imag)}" for i, v in enumerate(x)]
    return "\n".join(lines) + "\n"


def channel_csv(H_est, H_true):
    lines = ["m,n,est_re,est_im,true_re,true_im"]
    M, N = H_est.shape
    for m in range(M):
        for n in range(N):
            e, t = H_est[m, n], H_true[m, n]
            lines.append(f"{m},{n},{_fmt(e.real)},{_fmt(e.imag)},{_fmt(t.real)},{_fmt(t.imag)}")
    return "\n".join(lines) + "\n"


def matrix_csv(P):
    """Row-major real matrix, one text row per matrix row."""
    return "\n".join(",".join(_fmt(v) for v in row) for row in np.asarray(P)) + "\n"


def complex_matrix_csv(A):
    """Row-major complex matrix as ``re,im`` pairs."""
    A = np.asarray(A)
    return "\n".join(",".join(f"{_fmt(v.real)},{_fmt(v.imag)}" for v in row) for row in A) + "\n"


def bits_csv(bits, rx_bits):
    lines = ["index,tx,rx"] + [f"{i},{int(a)},{int(b)}" for i, (a, b) in enumerate(zip(bits, rx_bits))]
    return "\n".join(lines) + "\n"
