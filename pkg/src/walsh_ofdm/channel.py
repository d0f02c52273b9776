"""Rayleigh-fading MIMO channels with per-link carrier frequency offset.

Builds the structural matrices of the transceiver (cyclic-prefix insertion
and removal, the diagonal CFO phase ramp, the lower-triangular Toeplitz
impulse-response matrix) and combines them into the transform-domain
effective matrix of each transmit/receive link.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimensionError
from .transforms import TransformKind, TransformPlan, apply_transform

__all__ = [
    "VEHICULAR_A_DB",
    "SPEED_OF_LIGHT",
    "ChannelConfig",
    "ChannelRealization",
    "trial_rng",
    "jakes_taps",
    "draw_channel",
    "channel_irm",
    "cfo_matrix",
    "cp_matrices",
    "effective_matrix",
    "effective_matrix_dense",
    "interference_matrix",
]

#: ITU Vehicular A average tap powers, one tap per sample delay
VEHICULAR_A_DB = (0.0, -1.0, -9.0, -10.0, -15.0, -20.0)
SPEED_OF_LIGHT = 299_792_458.0
JAKES_OSCILLATORS = 64


@dataclass(frozen=True)
class ChannelConfig:
    """Link geometry, fading profile and CFO bound.

    ``velocity`` is in m/s, ``carrier_hz`` in Hz and ``chip_duration_s``
    in seconds. ``epsilon_max`` bounds the normalized CFO of every link.
    ``static=True`` replaces fading by the deterministic taps
    ``sqrt(tap_powers())`` on every link (e.g. an AWGN-only link with a
    single 0 dB tap).
    """

    n_tx: int = 2
    n_rx: int = 2
    N: int = 128
    N_cp: int = 16
    pdp_db: tuple = VEHICULAR_A_DB
    velocity: float = 120 / 3.6
    carrier_hz: float = 2e9
    chip_duration_s: float = 24.4e-6
    epsilon_max: float = 0.1
    seed: int = 0
    static: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pdp_db", tuple(float(p) for p in self.pdp_db))
        for name in ("n_tx", "n_rx", "N"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}", key=name)
        if not self.pdp_db:
            raise ConfigError("pdp_db must list at least one tap", key="pdp_db")
        if int(self.N_cp) != self.N_cp or not 0 <= self.N_cp < self.N:
            raise ConfigError(f"N_cp must be an integer in [0, N), got {self.N_cp!r}", key="N_cp")
        if self.N_cp < self.L - 1:
            raise ConfigError(
                f"N_cp={self.N_cp} does not cover the {self.L}-tap delay spread", key="N_cp"
            )
        if not 0 <= self.epsilon_max < 0.5:
            raise ConfigError(
                f"epsilon_max must lie in [0, 0.5), got {self.epsilon_max!r}", key="epsilon_max"
            )
        if self.seed < 0 or int(self.seed) != self.seed:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}", key="seed")

    @property
    def L(self):
        return len(self.pdp_db)

    @property
    def doppler_hz(self):
        return self.velocity * self.carrier_hz / SPEED_OF_LIGHT

    @property
    def symbol_duration_s(self):
        return (self.N + self.N_cp) * self.chip_duration_s

    def tap_powers(self):
        """Linear tap powers normalized to unit total."""
        p = 10.0 ** (np.asarray(self.pdp_db) / 10.0)
        return p / p.sum()


@dataclass(frozen=True)
class ChannelRealization:
    """Taps ``h[j, i]`` (length L) and CFOs ``eps[j, i]`` for every link.

    Index order is receive antenna first, then transmit antenna.
    """

    taps: np.ndarray = field(repr=False)
    cfo: np.ndarray

    @property
    def n_rx(self):
        return self.taps.shape[0]

    @property
    def n_tx(self):
        return self.taps.shape[1]


def trial_rng(seed, trial_index, stream=0):
    """Counter-based generator for one trial.

    Distinct ``stream`` values give independent generators for the same
    trial, e.g. channel versus noise versus bits.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial_index), int(stream)]))


def jakes_taps(rng, shape, doppler_hz, times, n_osc=JAKES_OSCILLATORS):
    """Unit-power Rayleigh processes from a randomized sum of sinusoids.

    Each process uses ``n_osc`` oscillators per quadrature with arrival
    angles ``(2*pi*n - pi + theta) / (4*n_osc)`` and independent uniform
    phases, which gives the classical Jakes Doppler spectrum.

    Returns an array of shape ``shape + (len(times),)``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    wd = 2 * np.pi * doppler_hz
    size = tuple(shape) + (n_osc,)
    theta = rng.uniform(-np.pi, np.pi, size=tuple(shape) + (1,))
    phi = rng.uniform(-np.pi, np.pi, size=size)
    psi = rng.uniform(-np.pi, np.pi, size=size)
    n = np.arange(1, n_osc + 1)
    alpha = (2 * np.pi * n - np.pi + theta) / (4 * n_osc)
    t = times[(None,) * (len(shape) + 1)]
    arg_i = wd * t * np.cos(alpha)[..., None] + phi[..., None]
    arg_q = wd * t * np.sin(alpha)[..., None] + psi[..., None]
    re = np.cos(arg_i).sum(axis=-2)
    im = np.sin(arg_q).sum(axis=-2)
    return (re + 1j * im) / np.sqrt(n_osc)


def draw_channel(cfg, trial_index):
    """Draw the fading taps and CFOs of one trial.

    Taps are frozen over the OFDM symbol (block fading) and scaled by the
    normalized power-delay profile. CFOs are uniform on
    ``[-epsilon_max, epsilon_max]`` per link. The result depends only on
    ``(cfg.seed, trial_index)``.
    """
    rng = trial_rng(cfg.seed, trial_index, stream=0)
    shape = (cfg.n_rx, cfg.n_tx, cfg.L)
    # evaluate the fading process at this trial's symbol start
    t0 = trial_index * cfg.symbol_duration_s
    fading = jakes_taps(rng, shape, cfg.doppler_hz, [t0])[..., 0]
    if cfg.static:
        fading = np.ones(shape, dtype=complex)
    taps = fading * np.sqrt(cfg.tap_powers())
    cfo = rng.uniform(-cfg.epsilon_max, cfg.epsilon_max, size=(cfg.n_rx, cfg.n_tx))
    if cfg.epsilon_max == 0:
        cfo = np.zeros_like(cfo)
    return ChannelRealization(taps=taps, cfo=cfo)


def channel_irm(h, size):
    """Lower-triangular Toeplitz convolution matrix of taps ``h``.

    Entry ``(m, p)`` is ``h[m - p]`` for ``0 <= m - p < L`` and zero
    otherwise.
    """
    h = np.asarray(h, dtype=complex).ravel()
    if h.size > size:
        raise DimensionError(f"{h.size} taps do not fit a {size}x{size} impulse-response matrix")
    col = np.zeros(size, dtype=complex)
    col[: h.size] = h
    return scipy.linalg.toeplitz(col, np.zeros(size, dtype=complex))


def _cfo_ramp(epsilon, N, length):
    return np.exp(2j * np.pi * epsilon * np.arange(length) / N)


def cfo_matrix(epsilon, N, N_cp):
    """Diagonal phase ramp ``exp(j*2*pi*epsilon*n/N)``, ``n < N + N_cp``."""
    return np.diag(_cfo_ramp(epsilon, N, N + N_cp))


def cp_matrices(N, N_cp):
    """Cyclic-prefix insertion ``(N+N_cp, N)`` and removal ``(N, N+N_cp)`` matrices."""
    if int(N_cp) != N_cp or not 0 <= N_cp < N:
        raise ValueError(f"N_cp must be an integer in [0, {N}), got {N_cp!r}")
    eye = np.eye(N)
    insert = np.vstack((eye[N - N_cp :], eye))
    remove = np.hstack((np.zeros((N, N_cp)), eye))
    return insert, remove


def _time_domain_matrix(h, epsilon, N, N_cp):
    """``P_remove @ Psi @ H @ P_insert`` without forming the large factors."""
    h = np.asarray(h, dtype=complex).ravel()
    if h.size > N + N_cp:
        raise DimensionError(f"{h.size} taps exceed the CP-extended block of {N + N_cp}")
    # column p of H @ P_insert, restricted to rows N_cp.., is h convolved with
    # the CP-extended unit vector e_p
    irm = channel_irm(h, N + N_cp)
    insert, _ = cp_matrices(N, N_cp)
    conv = (irm @ insert)[N_cp:]
    return _cfo_ramp(epsilon, N, N + N_cp)[N_cp:, None] * conv


def effective_matrix(plan, h, epsilon, N=None, N_cp=0):
    """Transform-domain link matrix ``Gamma P_- Psi H P_+ Gamma^-1``.

    Parameters
    ----------
    plan : TransformPlan
    h : array_like
        Channel taps.
    epsilon : float
        Normalized CFO of the link.
    N, N_cp : int
        Block and cyclic-prefix lengths; ``N`` defaults to ``plan.size``.
    """
    N = plan.size if N is None else N
    if N != plan.size:
        raise DimensionError(f"plan size {plan.size} does not match N={N}")
    t = _time_domain_matrix(h, epsilon, N, N_cp)
    left = apply_transform(plan, "forward", t)
    # X @ Gamma^-1 == (Gamma^-1 @ X.T).T because Gamma^-1 is symmetric for both kinds
    return apply_transform(plan, "inverse", left.T).T


def effective_matrix_dense(plan, h, epsilon, N_cp):
    """Same as :func:`effective_matrix` but as the literal five-factor product."""
    N = plan.size
    insert, remove = cp_matrices(N, N_cp)
    return (
        plan.forward_matrix()
        @ remove
        @ cfo_matrix(epsilon, N, N_cp)
        @ channel_irm(h, N + N_cp)
        @ insert
        @ plan.inverse_matrix()
    )


def interference_matrix(kind, epsilon, N):
    """``Gamma^-1 diag(exp(j*2*pi*epsilon*n/N)) Gamma`` for the given transform."""
    plan = TransformPlan(TransformKind(kind), N)
    ramp = _cfo_ramp(epsilon, N, N)
    return plan.inverse_matrix() @ (ramp[:, None] * plan.forward_matrix())
