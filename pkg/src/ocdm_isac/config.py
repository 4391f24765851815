"""Experiment configuration: an INI-style, sectioned key = value file.

Grammar (see README for the full key list)::

    file     := { comment | section }
    section  := "[" name "]" NEWLINE { entry | comment }
    entry    := key ( "=" | ":" ) value [ inline-comment ] NEWLINE
    comment  := ("#" | ";") text NEWLINE

Lists are comma separated. ``inf`` is accepted wherever an SNR is expected.
Every validation error is reported as ``path:line: message``.
"""

from dataclasses import dataclass, field, replace
from decimal import Decimal, localcontext
from fractions import Fraction
import configparser
import hashlib
import math
import re

from .channel import ChannelSpec, PathSpec, radar_target_channel
from .errors import ConfigError, ConstraintViolation
from .frame import FrameConfig
from .radar import REFINEMENTS, PeriodogramSpec
from .receiver import EQUALIZERS, ESTIMATIONS
from .transmitter import WAVEFORMS


@dataclass(frozen=True)
class ComChannelParams:
    """Communications channel generator.

    ``model="random"`` draws ``n_paths`` CN(0, 1) paths per trial with delays
    uniform on ``[0, delay_spread_s]`` and Dopplers uniform on
    ``[-doppler_max_hz, doppler_max_hz]``; ``model="fixed"`` uses ``paths``.
    """

    model: str = "random"
    n_paths: int = 3
    doppler_max_hz: float = 1000.0
    delay_spread_s: float = 2e-10
    paths: tuple = ()

    def spec(self):
        return ChannelSpec(self.paths, kind="com")


@dataclass(frozen=True)
class RadarTarget:
    range_m: float
    velocity_mps: float
    gain: complex = 1.0 + 0.0j


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "ocdm-isac"
    frame: FrameConfig = field(default_factory=FrameConfig)
    channel_com: ComChannelParams = field(default_factory=ComChannelParams)
    targets: tuple = (RadarTarget(20.0, 22.22),)
    snr_com_db: tuple = tuple(float(s) for s in range(0, 21, 2))
    snr_rad_db: tuple = (0.0, 5.0, 10.0, 15.0)
    rmse_snr_com_db: float = 15.0
    trials: int = 500
    seed: int = 1
    mode: str = "ocdm"
    equalizers: tuple = ("zf", "mmse")
    estimations: tuple = ("ls", "perfect_csi")
    radar_equalizer: str = "mmse"
    radar_estimation: str = "ls"
    radar_symbols: str = "decoded"
    periodogram_oversample: tuple = (4, 4)
    refine: str = "ml"

    def periodogram(self):
        return PeriodogramSpec.oversampled(self.frame, *self.periodogram_oversample, refine=self.refine)

    def replace(self, **changes):
        return replace(self, **changes)


_KEY_RE = re.compile(r"^\s*([^\s=:#;\[][^=:]*?)\s*[=:]")
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")


def _line_index(text):
    index = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = _SECTION_RE.match(line)
        if s:
            section = s.group(1).strip()
            index[(section, None)] = lineno
            continue
        k = _KEY_RE.match(line)
        if k and section is not None:
            index[(section, k.group(1).strip().lower())] = lineno
    return index


_REQUIRED = object()


class _Reader:
    def __init__(self, parser, index, path):
        self.parser = parser
        self.index = index
        self.path = path
        self.used = set()

    def fail(self, section, key, message):
        line = self.index.get((section, key), self.index.get((section, None)))
        raise ConfigError(message, self.path, line)

    def has(self, section, key):
        return self.parser.has_option(section, key)

    def get(self, section, key, conv, default=_REQUIRED):
        self.used.add((section, key))
        if not self.parser.has_option(section, key):
            if default is _REQUIRED:
                self.fail(section, key, f"missing key [{section}] {key}")
            return default
        raw = self.parser.get(section, key).strip()
        try:
            return conv(raw)
        except (ValueError, TypeError, ZeroDivisionError) as exc:
            self.fail(section, key, f"[{section}] {key} = {raw!r}: {exc}")

    def choice(self, section, key, options, default):
        value = self.get(section, key, str, default).lower()
        if value not in options:
            self.fail(section, key, f"[{section}] {key} must be one of {', '.join(options)}, got {value!r}")
        return value


def _float(s):
    return float(s)


def _int(s):
    try:
        return int(s, 10)
    except ValueError:
        pass
    v = float(s)
    if not v.is_integer():
        raise ValueError("expected an integer")
    return int(v)


def _float_list(s):
    items = [t.strip() for t in s.split(",") if t.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(t) for t in items)


def _word_list(s):
    items = tuple(t.strip().lower() for t in s.split(",") if t.strip())
    if not items:
        raise ValueError("empty list")
    return items


def _numbers(s, count):
    vals = _float_list(s)
    if len(vals) != count:
        raise ValueError(f"expected {count} comma-separated numbers, got {len(vals)}")
    return vals


def _fraction(s):
    return Fraction(s.strip())


def _boost(s):
    return None if s.lower() in ("auto", "none") else float(s)


def parse_config(text, path="<config>"):
    """Parse and validate experiment configuration text."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], path, getattr(exc, "lineno", None)) from exc
    known = {"frame", "channel_com", "radar", "experiment", "periodogram"}
    index = _line_index(text)
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]", path, index.get((section, None)))
    r = _Reader(parser, index, path)
    for section in known:
        if not parser.has_section(section):
            parser.add_section(section)

    d = ExperimentConfig()
    df = d.frame
    try:
        frame = FrameConfig(
            carrier_hz=r.get("frame", "carrier_hz", _float, df.carrier_hz),
            bandwidth_hz=r.get("frame", "bandwidth_hz", _float, df.bandwidth_hz),
            n_subcarriers=r.get("frame", "subcarriers", _int, df.n_subcarriers),
            n_symbols=r.get("frame", "symbols", _int, df.n_symbols),
            n_pilots=r.get("frame", "pilots", _int, df.n_pilots),
            cp_ratio=r.get("frame", "cp_ratio", _fraction, df.cp_ratio),
            modulation=r.get("frame", "modulation", str, df.modulation).lower(),
            pilot_boost=r.get("frame", "pilot_boost", _boost, None),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        r.fail("frame", None, f"[frame]: {exc}")

    dc = d.channel_com
    model = r.choice("channel_com", "model", ("random", "fixed"), dc.model)
    paths = []
    for key in sorted(k for k in parser.options("channel_com") if re.fullmatch(r"path\d+", k)):
        re_, im_, delay_s, dop = r.get("channel_com", key, _path_entry)
        try:
            paths.append(PathSpec(complex(re_, im_), delay_s, dop))
        except ConstraintViolation as exc:
            r.fail("channel_com", key, f"[channel_com] {key}: {exc}")
    if model == "fixed" and not paths:
        r.fail("channel_com", "model", "model = fixed needs at least one pathN entry")
    com = ComChannelParams(
        model=model,
        n_paths=r.get("channel_com", "paths", _int, dc.n_paths),
        doppler_max_hz=r.get("channel_com", "doppler_max_hz", _float, dc.doppler_max_hz),
        delay_spread_s=r.get("channel_com", "delay_spread_ns", _ns_to_s, dc.delay_spread_s),
        paths=tuple(paths),
    )
    if com.n_paths < 1:
        r.fail("channel_com", "paths", "paths must be >= 1")
    if not 0 <= com.doppler_max_hz < frame.subcarrier_spacing:
        r.fail("channel_com", "doppler_max_hz", f"doppler_max_hz must be in [0, {frame.subcarrier_spacing:g})")
    if not 0 <= com.delay_spread_s < frame.cp_duration:
        r.fail("channel_com", "delay_spread_ns", f"delay_spread_ns must be in [0, {frame.cp_duration * 1e9:g})")
    if paths:
        try:
            com.spec().validate(frame)
        except ConstraintViolation as exc:
            r.fail("channel_com", "path0", f"[channel_com]: {exc}")

    targets = []
    for key in sorted((k for k in parser.options("radar") if re.fullmatch(r"target\d+", k)),
                      key=lambda k: int(k[6:])):
        rng_m, vel, g_re, g_im = r.get("radar", key, lambda s: _numbers(s, 4))
        t = RadarTarget(rng_m, vel, complex(g_re, g_im))
        try:
            radar_target_channel(t.range_m, t.velocity_mps, t.gain, frame)
        except ConstraintViolation as exc:
            r.fail("radar", key, f"[radar] {key}: {exc}")
        targets.append(t)
    if not targets:
        targets = list(d.targets)
    radar_eq = r.choice("radar", "equalizer", EQUALIZERS, d.radar_equalizer)
    radar_est = r.choice("radar", "estimation", ESTIMATIONS, d.radar_estimation)
    radar_sym = r.choice("radar", "symbols", ("decoded", "genie"), d.radar_symbols)

    equalizers = r.get("experiment", "equalizers", _word_list, d.equalizers)
    for e in equalizers:
        if e not in EQUALIZERS:
            r.fail("experiment", "equalizers", f"unknown equalizer {e!r}")
    estimations = r.get("experiment", "estimations", _word_list, d.estimations)
    for e in estimations:
        if e not in ESTIMATIONS:
            r.fail("experiment", "estimations", f"unknown estimation mode {e!r}")
    if "ls" in estimations + (radar_est,) and not frame.n_pilots:
        r.fail("experiment", "estimations", "ls estimation needs [frame] pilots > 0")
    trials = r.get("experiment", "trials", _int, d.trials)
    if trials < 1:
        r.fail("experiment", "trials", "trials must be >= 1")
    seed = r.get("experiment", "seed", _int, d.seed)
    if not 0 <= seed < 2 ** 64:
        r.fail("experiment", "seed", "seed must be an unsigned 64-bit integer")
    snr_rad = r.get("experiment", "snr_rad_db", _float_list, d.snr_rad_db)
    if any(math.isnan(s) for s in snr_rad):
        r.fail("experiment", "snr_rad_db", "NaN SNR")

    over = (r.get("periodogram", "oversample_m", _float, float(d.periodogram_oversample[0])),
            r.get("periodogram", "oversample_n", _float, float(d.periodogram_oversample[1])))
    for key, f in zip(("oversample_m", "oversample_n"), over):
        if not f > 1:
            r.fail("periodogram", key, f"{key} must exceed 1")
    over = tuple(int(f) if float(f).is_integer() else f for f in over)
    refine = r.choice("periodogram", "refine", REFINEMENTS, d.refine)

    cfg = ExperimentConfig(
        name=r.get("experiment", "name", str, d.name),
        frame=frame,
        channel_com=com,
        targets=tuple(targets),
        snr_com_db=r.get("experiment", "snr_com_db", _float_list, d.snr_com_db),
        snr_rad_db=snr_rad,
        rmse_snr_com_db=r.get("experiment", "rmse_snr_com_db", _float, d.rmse_snr_com_db),
        trials=trials,
        seed=seed,
        mode=r.choice("experiment", "mode", WAVEFORMS, d.mode),
        equalizers=equalizers,
        estimations=estimations,
        radar_equalizer=radar_eq,
        radar_estimation=radar_est,
        radar_symbols=radar_sym,
        periodogram_oversample=over,
        refine=refine,
    )
    for section in parser.sections():
        for key in parser.options(section):
            if (section, key) not in r.used and not re.fullmatch(r"(path|target)\d+", key):
                r.fail(section, key, f"unknown key [{section}] {key}")
    cfg.periodogram().validate(frame)
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from exc
    return parse_config(text, str(path))


def _ns_to_s(text):
    """Nanosecond text to seconds, correctly rounded from the exact decimal."""
    value = Fraction(str(text).strip()) / 10 ** 9
    return float(value)


def _s_to_ns(seconds):
    """Nanosecond text that parses back to exactly ``seconds``."""
    short = repr(float(seconds) * 1e9)
    if _ns_to_s(short) == seconds:
        return short
    # exact decimal expansion; always terminates for a binary float
    with localcontext() as ctx:
        ctx.prec = 1200
        return format(Decimal(seconds) * 10 ** 9, "f")


def _path_entry(s):
    parts = [p.strip() for p in s.split(",")]
    if len(parts) != 4:
        raise ValueError(f"expected 4 comma-separated numbers, got {len(parts)}")
    return float(parts[0]), float(parts[1]), _ns_to_s(parts[2]), float(parts[3])


def _num(x):
    return repr(float(x))


def _list(xs):
    return ", ".join(_num(x) for x in xs)


def dump_config(cfg):
    """Canonical text form; ``parse_config(dump_config(c)) == c``."""
    f = cfg.frame
    c = cfg.channel_com
    lines = [
        "[frame]",
        f"carrier_hz = {_num(f.carrier_hz)}",
        f"bandwidth_hz = {_num(f.bandwidth_hz)}",
        f"subcarriers = {f.n_subcarriers}",
        f"symbols = {f.n_symbols}",
        f"pilots = {f.n_pilots}",
        f"cp_ratio = {f.cp_ratio}",
        f"modulation = {f.modulation}",
        f"pilot_boost = {'auto' if f.pilot_boost is None else _num(f.pilot_boost)}",
        "",
        "[channel_com]",
        f"model = {c.model}",
        f"paths = {c.n_paths}",
        f"doppler_max_hz = {_num(c.doppler_max_hz)}",
        f"delay_spread_ns = {_s_to_ns(c.delay_spread_s)}",
    ]
    for i, p in enumerate(c.paths):
        lines.append(f"path{i} = {_num(p.gain.real)}, {_num(p.gain.imag)}, {_s_to_ns(p.delay)}, {_num(p.doppler)}")
    lines += ["", "[radar]"]
    for i, t in enumerate(cfg.targets):
        lines.append(f"target{i} = {_list((t.range_m, t.velocity_mps, t.gain.real, t.gain.imag))}")
    lines += [
        f"equalizer = {cfg.radar_equalizer}",
        f"estimation = {cfg.radar_estimation}",
        f"symbols = {cfg.radar_symbols}",
        "",
        "[experiment]",
        f"name = {cfg.name}",
        f"seed = {cfg.seed}",
        f"trials = {cfg.trials}",
        f"mode = {cfg.mode}",
        f"snr_com_db = {_list(cfg.snr_com_db)}",
        f"snr_rad_db = {_list(cfg.snr_rad_db)}",
        f"rmse_snr_com_db = {_num(cfg.rmse_snr_com_db)}",
        f"equalizers = {', '.join(cfg.equalizers)}",
        f"estimations = {', '.join(cfg.estimations)}",
        "",
        "[periodogram]",
        f"oversample_m = {cfg.periodogram_oversample[0]}",
        f"oversample_n = {cfg.periodogram_oversample[1]}",
        f"refine = {cfg.refine}",
        "",
    ]
    return "\n".join(lines)


def config_hash(cfg):
    return hashlib.sha256(dump_config(cfg).encode("utf-8")).hexdigest()
