"""Monte Carlo bit-error-rate engine.

Every trial draws its channel, bits, noise and estimation errors from
counter-based generators keyed by ``(master_seed, trial_index, stream)``,
so results do not depend on execution order and every sweep value sees
the same realizations (common random numbers).
"""

import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import yaml

from .channel import ChannelConfig, draw_channel, effective_matrix, trial_rng
from .equalizers import (
    JlcozfParams,
    StackedModel,
    jlcozf_sic_detect,
    lmmse_detect,
    lzf_detect,
    mmse_sic_detect,
)
from .errors import ConditioningError, ConfigError, ConvergenceError, SingularMatrixError
from .transforms import TransformKind, TransformPlan

__all__ = [
    "Equalizer",
    "EstimationError",
    "SimConfig",
    "BerPoint",
    "BerCurve",
    "TrialResult",
    "SWEEP_VARIABLES",
    "NOISE_FLOOR_PSD",
    "run_trial",
    "run_ber",
    "run_sweep",
    "run_paired",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "apply_overrides",
    "write_csv",
    "summary",
]

# detectors need a positive-definite noise covariance; used when snr is +inf
NOISE_FLOOR_PSD = 1e-10

# rng streams per trial
_STREAM_BITS = 1
_STREAM_NOISE = 2
_STREAM_ESTIMATION = 3

FAILED_POLICIES = ("include", "exclude", "pessimistic")
SWEEP_VARIABLES = ("snr", "re_xi", "im_xi", "tau", "delta", "cfo", "est_error")
_JLCOZF_ONLY = {"re_xi", "im_xi", "tau", "delta"}
_RUNTIME_FAILURES = (ConditioningError, SingularMatrixError, ConvergenceError)


class Equalizer(str, Enum):
    LZF = "LZF"
    LMMSE = "LMMSE"
    MMSE_SIC = "MMSE_SIC"
    JLCOZF_SIC = "JLCOZF_SIC"


@dataclass(frozen=True)
class EstimationError:
    """Std-devs of the receiver's CFO error and per-component tap error."""

    sigma_eps: float = 0.0
    sigma_ch: float = 0.0

    def __post_init__(self):
        for name in ("sigma_eps", "sigma_ch"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be non-negative", key=f"est_error.{name}")

    @property
    def active(self):
        return self.sigma_eps > 0 or self.sigma_ch > 0


@dataclass(frozen=True)
class SimConfig:
    """Everything a BER run needs.

    SNR is the per-receive-antenna symbol SNR ``sigma_x^2 / sigma_n^2``
    with unit symbol power and unit-power channels; ``math.inf`` switches
    noise off. ``failed_policy`` says how trials whose detector fails are
    folded into the BER: ``"include"`` keeps their bits with no errors,
    ``"exclude"`` drops them, ``"pessimistic"`` counts every bit wrong.
    Failed trials are always reported separately.
    """

    channel: ChannelConfig = field(default_factory=ChannelConfig)
    transform: TransformKind = TransformKind.WALSH
    equalizer: Equalizer = Equalizer.JLCOZF_SIC
    jlcozf: JlcozfParams = field(default_factory=JlcozfParams)
    snr_db_list: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)
    trials: int = 10_000
    est_error: EstimationError = field(default_factory=EstimationError)
    master_seed: int = 0
    failed_policy: str = "include"

    def __post_init__(self):
        object.__setattr__(self, "transform", TransformKind(self.transform))
        object.__setattr__(self, "equalizer", Equalizer(self.equalizer))
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        if not self.snr_db_list:
            raise ConfigError("snr_db_list must not be empty", key="snr_db_list")
        if any(math.isnan(s) for s in self.snr_db_list):
            raise ConfigError("snr_db_list contains NaN", key="snr_db_list")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}", key="trials")
        if int(self.master_seed) != self.master_seed or self.master_seed < 0:
            raise ConfigError("master_seed must be a non-negative integer", key="master_seed")
        if self.failed_policy not in FAILED_POLICIES:
            raise ConfigError(
                f"failed_policy must be one of {FAILED_POLICIES}", key="failed_policy"
            )
        try:
            TransformPlan(self.transform, self.channel.N)
        except ValueError as exc:
            raise ConfigError(str(exc), key="channel.N") from exc

    @property
    def bits_per_trial(self):
        return self.channel.n_tx * self.channel.N


@dataclass(frozen=True)
class TrialResult:
    errors: int
    bits: int
    failed: bool = False


@dataclass
class BerPoint:
    snr_db: float
    errors: int = 0
    bits: int = 0
    failed_trials: int = 0

    @property
    def ber(self):
        return self.errors / self.bits if self.bits else 0.0


@dataclass
class BerCurve:
    """BER against SNR for one value of a sweep variable."""

    sweep_var: str
    sweep_value: object
    points: list

    def ber(self, snr_db):
        for p in self.points:
            if p.snr_db == snr_db:
                return p.ber
        raise KeyError(snr_db)


# ---------------------------------------------------------------- trial chain


class _Trial:
    """Realization of one trial; everything except the noise scale and detector."""

    def __init__(self, cfg, trial_index):
        ch = cfg.channel
        self.index = trial_index
        self.seed = cfg.master_seed
        self.channel_cfg = ch
        self.plan = TransformPlan(cfg.transform, ch.N)
        rng = trial_rng(self.seed, trial_index, _STREAM_BITS)
        self.bits = rng.integers(0, 2, size=(ch.n_tx, ch.N), dtype=np.uint8)
        rng = trial_rng(self.seed, trial_index, _STREAM_NOISE)
        noise = (rng.standard_normal((ch.n_rx, ch.N + ch.N_cp)) + 1j * rng.standard_normal(
            (ch.n_rx, ch.N + ch.N_cp)
        )) / np.sqrt(2.0)
        self.noise = self._demodulate(noise[:, ch.N_cp :])
        rng = trial_rng(self.seed, trial_index, _STREAM_ESTIMATION)
        shape = (ch.n_rx, ch.n_tx)
        self.tap_error = rng.standard_normal(shape + (ch.L, 2)) @ np.array([1.0, 1j])
        self.cfo_error = rng.standard_normal(shape)
        self._cache = {}

    def _demodulate(self, rows):
        # rows: (n_rx, N) time samples after CP removal -> stacked transform domain
        return self.plan.forward(rows.T).T.ravel()

    def realization(self, ch):
        """Channel draw and noiseless received vector for channel config ``ch``."""
        key = ("rx", ch)
        if key not in self._cache:
            real = draw_channel(dataclasses.replace(ch, seed=self.seed), self.index)
            symbols = 1.0 - 2.0 * self.bits
            x = self.plan.inverse(symbols.T).T
            x_cp = np.concatenate((x[:, ch.N - ch.N_cp :], x), axis=1)
            span = ch.N + ch.N_cp
            ramp_t = np.arange(span) / ch.N
            rx = np.zeros((ch.n_rx, span), dtype=complex)
            for j in range(ch.n_rx):
                for i in range(ch.n_tx):
                    conv = np.convolve(real.taps[j, i], x_cp[i])[:span]
                    rx[j] += np.exp(2j * np.pi * real.cfo[j, i] * ramp_t) * conv
            self._cache[key] = (real, self._demodulate(rx[:, ch.N_cp :]))
        return self._cache[key]

    def pi_blocks(self, ch, est):
        """Effective matrices built from the receiver's (possibly perturbed) knowledge."""
        key = ("pi", ch, est)
        if key not in self._cache:
            real, _ = self.realization(ch)
            taps = real.taps + est.sigma_ch * self.tap_error
            cfo = real.cfo + est.sigma_eps * self.cfo_error
            blocks = np.empty((ch.n_rx, ch.n_tx, ch.N, ch.N), dtype=complex)
            for j in range(ch.n_rx):
                for i in range(ch.n_tx):
                    blocks[j, i] = effective_matrix(self.plan, taps[j, i], cfo[j, i], N_cp=ch.N_cp)
            self._cache[key] = blocks
        return self._cache[key]

    def run(self, cfg, snr_db):
        ch = cfg.channel
        _, clean = self.realization(ch)
        noise_var = 0.0 if math.isinf(snr_db) and snr_db > 0 else 10.0 ** (-snr_db / 10.0)
        received = clean + math.sqrt(noise_var) * self.noise
        model = StackedModel(
            self.pi_blocks(ch, cfg.est_error), received, noise_psd=max(noise_var, NOISE_FLOOR_PSD)
        )
        bits = self.bits.size
        try:
            detection = _detect(cfg, model)
        except _RUNTIME_FAILURES:
            return TrialResult(errors=0, bits=bits, failed=True)
        return TrialResult(errors=int(np.count_nonzero(detection.bits != self.bits)), bits=bits)


def _detect(cfg, model):
    eq = cfg.equalizer
    if eq is Equalizer.LZF:
        return lzf_detect(model)
    if eq is Equalizer.LMMSE:
        return lmmse_detect(model, 1.0 / model.noise_psd)
    if eq is Equalizer.MMSE_SIC:
        return mmse_sic_detect(model)
    return jlcozf_sic_detect(model, cfg.jlcozf)


def run_trial(cfg, trial_index, snr_db):
    """Simulate one OFDM symbol and count bit errors.

    Returns a :class:`TrialResult`; a detector failure gives
    ``failed=True`` and zero counted errors.
    """
    return _Trial(cfg, trial_index).run(cfg, snr_db)


# ---------------------------------------------------------------- aggregation


def _fold(point, result, policy):
    if result.failed:
        point.failed_trials += 1
        if policy == "exclude":
            return
        if policy == "pessimistic":
            point.errors += result.bits
    else:
        point.errors += result.errors
    point.bits += result.bits


def _variant(cfg, variable, value):
    """``cfg`` with the sweep variable set to ``value``."""
    if variable == "snr":
        return dataclasses.replace(cfg, snr_db_list=(float(value),))
    if variable == "re_xi":
        xi = complex(float(value), cfg.jlcozf.xi.imag)
        return dataclasses.replace(cfg, jlcozf=dataclasses.replace(cfg.jlcozf, xi=xi))
    if variable == "im_xi":
        xi = complex(cfg.jlcozf.xi.real, float(value))
        return dataclasses.replace(cfg, jlcozf=dataclasses.replace(cfg.jlcozf, xi=xi))
    if variable == "tau":
        return dataclasses.replace(cfg, jlcozf=dataclasses.replace(cfg.jlcozf, tau=int(value)))
    if variable == "delta":
        return dataclasses.replace(cfg, jlcozf=dataclasses.replace(cfg.jlcozf, delta=_delta(value)))
    if variable == "cfo":
        return dataclasses.replace(
            cfg, channel=dataclasses.replace(cfg.channel, epsilon_max=float(value))
        )
    if variable == "est_error":
        if np.ndim(value) == 0:
            est = EstimationError(float(value), float(value))
        else:
            est = EstimationError(*(float(v) for v in value))
        return dataclasses.replace(cfg, est_error=est)
    raise ValueError(f"unknown sweep variable {variable!r}; choose from {SWEEP_VARIABLES}")


def _accumulate(variants, trial_range):
    """Integer counts ``[variant][snr] -> (errors, bits, failed)`` over a trial range."""
    base = variants[0]
    policy = base.failed_policy
    points = [[BerPoint(s) for s in v.snr_db_list] for v in variants]
    for t in trial_range:
        trial = _Trial(base, t)
        for v, row in zip(variants, points):
            for p in row:
                _fold(p, trial.run(v, p.snr_db), policy)
    return points


def _merge(a, b):
    for row_a, row_b in zip(a, b):
        for pa, pb in zip(row_a, row_b):
            pa.errors += pb.errors
            pa.bits += pb.bits
            pa.failed_trials += pb.failed_trials
    return a


def _run_variants(variants, trials, jobs):
    if jobs is None or jobs <= 1 or trials < 2:
        return _accumulate(variants, range(trials))
    jobs = min(jobs, trials)
    edges = np.linspace(0, trials, jobs + 1).astype(int)
    chunks = [range(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_accumulate, [variants] * len(chunks), chunks))
    total = parts[0]
    for part in parts[1:]:
        total = _merge(total, part)
    return total


def run_ber(cfg, jobs=1):
    """BER against SNR for ``cfg``; one point per entry of ``cfg.snr_db_list``."""
    (points,) = _run_variants([cfg], cfg.trials, jobs)
    return BerCurve("snr", None, points)


def run_paired(configs, jobs=1, labels=None):
    """BER curves of several configurations on identical trials.

    All configurations must share ``master_seed``, ``transform``,
    ``trials`` and the antenna/block geometry; they may differ in the
    equalizer and its parameters, the SNR list, the CFO bound and the
    estimation error. Each trial's channel and effective matrices are
    computed once and reused by every configuration.
    """
    configs = list(configs)
    if not configs:
        return []
    base = configs[0]
    for c in configs[1:]:
        same = (c.master_seed, c.transform, c.trials, c.channel.n_tx, c.channel.n_rx, c.channel.N)
        if same != (base.master_seed, base.transform, base.trials) + (
            base.channel.n_tx,
            base.channel.n_rx,
            base.channel.N,
        ):
            raise ValueError("paired configurations must share seed, transform, trials and geometry")
    labels = list(labels) if labels is not None else [c.equalizer.value for c in configs]
    points = _run_variants(configs, base.trials, jobs)
    return [BerCurve("config", label, row) for label, row in zip(labels, points)]


def run_sweep(cfg, variable, values, jobs=1):
    """One :class:`BerCurve` per value of ``variable``, on paired trials.

    Parameters
    ----------
    cfg : SimConfig
        Base configuration; every other parameter stays fixed.
    variable : str
        One of :data:`SWEEP_VARIABLES`. ``re_xi``, ``im_xi``, ``tau`` and
        ``delta`` only apply to the ``JLCOZF_SIC`` equalizer. ``est_error``
        values are either a scalar used for both std-devs or a
        ``(sigma_eps, sigma_ch)`` pair.
    values : sequence
    jobs : int
        Worker processes; the result does not depend on it.
    """
    if variable not in SWEEP_VARIABLES:
        raise ValueError(f"unknown sweep variable {variable!r}; choose from {SWEEP_VARIABLES}")
    if variable in _JLCOZF_ONLY and cfg.equalizer is not Equalizer.JLCOZF_SIC:
        raise ValueError(f"sweep variable {variable!r} does not apply to {cfg.equalizer.value}")
    values = list(values)
    if not values:
        return []
    variants = [_variant(cfg, variable, v) for v in values]
    points = _run_variants(variants, cfg.trials, jobs)
    return [BerCurve(variable, v, row) for v, row in zip(values, points)]


# ---------------------------------------------------------------- config I/O


def _delta(value):
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity", ".inf"):
            return math.inf
        value = float(value)
    value = float(value)
    return math.inf if math.isinf(value) else int(value)


def _snr(value):
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", ".inf", "off"):
        return math.inf
    return float(value)


_CHANNEL_KEYS = {f.name for f in dataclasses.fields(ChannelConfig)}
_JLCOZF_KEYS = {"xi_re", "xi_im", "tau", "delta", "signal_gain"}
_EST_KEYS = {"sigma_eps", "sigma_ch"}
_TOP_KEYS = {
    "channel",
    "transform",
    "equalizer",
    "jlcozf",
    "snr_db_list",
    "trials",
    "est_error",
    "master_seed",
    "failed_policy",
}


def _check_keys(section, allowed, prefix):
    if not isinstance(section, dict):
        raise ConfigError(f"{prefix or 'config'} must be a mapping", key=prefix or "config")
    for key in section:
        if key not in allowed:
            name = f"{prefix}.{key}" if prefix else str(key)
            raise ConfigError(f"unknown configuration key {name!r}", key=name)


def config_from_dict(data):
    """Build a :class:`SimConfig` from a nested mapping.

    Keys (units in brackets)::

        channel: n_tx, n_rx, N, N_cp, pdp_db [dB list], velocity [m/s],
                 carrier_hz [Hz], chip_duration_s [s], epsilon_max
                 [subcarrier spacings], seed, static [bool]
        transform: walsh | fourier
        equalizer: LZF | LMMSE | MMSE_SIC | JLCOZF_SIC
        jlcozf: xi_re, xi_im, tau [samples], delta [int or inf],
                signal_gain [null means N]
        snr_db_list: [dB list; inf for noise off]
        trials, master_seed, failed_policy
        est_error: sigma_eps, sigma_ch

    Unknown keys raise :class:`ConfigError` naming the dotted key.
    """
    data = dict(data or {})
    _check_keys(data, _TOP_KEYS, "")
    kwargs = {}
    try:
        ch = data.get("channel", {}) or {}
        _check_keys(ch, _CHANNEL_KEYS, "channel")
        kwargs["channel"] = ChannelConfig(**ch)
        jl = data.get("jlcozf", {}) or {}
        _check_keys(jl, _JLCOZF_KEYS, "jlcozf")
        default = JlcozfParams()
        try:
            kwargs["jlcozf"] = JlcozfParams(
                xi=complex(float(jl.get("xi_re", default.xi.real)), float(jl.get("xi_im", default.xi.imag))),
                tau=int(jl.get("tau", default.tau)),
                delta=_delta(jl.get("delta", default.delta)),
                signal_gain=None if jl.get("signal_gain") is None else float(jl["signal_gain"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), key="jlcozf") from exc
        est = data.get("est_error", {}) or {}
        _check_keys(est, _EST_KEYS, "est_error")
        kwargs["est_error"] = EstimationError(**{k: float(v) for k, v in est.items()})
        if "snr_db_list" in data:
            snrs = data["snr_db_list"]
            snrs = [snrs] if np.ndim(snrs) == 0 else snrs
            try:
                kwargs["snr_db_list"] = tuple(_snr(s) for s in snrs)
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc), key="snr_db_list") from exc
        for key in ("transform", "equalizer"):
            if key in data:
                try:
                    enum = TransformKind if key == "transform" else Equalizer
                    kwargs[key] = enum(data[key].lower() if key == "transform" else data[key].upper())
                except (ValueError, AttributeError) as exc:
                    raise ConfigError(f"invalid {key} {data[key]!r}", key=key) from exc
        for key in ("trials", "master_seed", "failed_policy"):
            if key in data:
                kwargs[key] = data[key]
        return SimConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc), key="config") from exc


def config_to_dict(cfg):
    """Inverse of :func:`config_from_dict` (JSON-friendly)."""
    ch = dataclasses.asdict(cfg.channel)
    ch["pdp_db"] = list(ch["pdp_db"])
    return {
        "channel": ch,
        "transform": cfg.transform.value,
        "equalizer": cfg.equalizer.value,
        "jlcozf": {
            "xi_re": cfg.jlcozf.xi.real,
            "xi_im": cfg.jlcozf.xi.imag,
            "tau": cfg.jlcozf.tau,
            "delta": "inf" if math.isinf(cfg.jlcozf.delta) else cfg.jlcozf.delta,
            "signal_gain": cfg.jlcozf.signal_gain,
        },
        "snr_db_list": ["inf" if math.isinf(s) else s for s in cfg.snr_db_list],
        "trials": cfg.trials,
        "est_error": dataclasses.asdict(cfg.est_error),
        "master_seed": cfg.master_seed,
        "failed_policy": cfg.failed_policy,
    }


def load_config(path):
    """Read a YAML or JSON configuration file into a nested dict."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping", key="config")
    return data


def apply_overrides(data, overrides):
    """Apply ``dotted.key=value`` strings to a nested dict (values parsed as YAML)."""
    data = json.loads(json.dumps(data or {}, default=str))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value", key=item)
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{key} does not name a nested key", key=key)
        node[parts[-1]] = yaml.safe_load(raw)
    return data


# ---------------------------------------------------------------- output

CSV_HEADER = "sweep_var,sweep_value,snr_db,errors,bits,ber,failed_trials"


def _fmt(value):
    if isinstance(value, (tuple, list)):
        return "/".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)


def write_csv(curves, fh):
    """Write curves with header ``sweep_var,sweep_value,snr_db,errors,bits,ber,failed_trials``.

    A plain SNR curve uses the SNR itself as the sweep value.
    """
    fh.write(CSV_HEADER + "\n")
    for curve in curves:
        for p in curve.points:
            value = p.snr_db if curve.sweep_value is None else curve.sweep_value
            fh.write(
                ",".join(
                    [
                        curve.sweep_var,
                        _fmt(value),
                        _fmt(p.snr_db),
                        str(p.errors),
                        str(p.bits),
                        f"{p.ber:.6e}",
                        str(p.failed_trials),
                    ]
                )
                + "\n"
            )


def summary(cfg, curves):
    """JSON-serializable summary of a run."""
    return {
        "config": config_to_dict(cfg),
        "curves": [
            {
                "sweep_var": c.sweep_var,
                "sweep_value": None if c.sweep_value is None else _fmt(c.sweep_value),
                "points": [
                    {
                        "snr_db": _fmt(p.snr_db),
                        "errors": p.errors,
                        "bits": p.bits,
                        "ber": p.ber,
                        "failed_trials": p.failed_trials,
                    }
                    for p in c.points
                ],
            }
            for c in curves
        ],
    }
