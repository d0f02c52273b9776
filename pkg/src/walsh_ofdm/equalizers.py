"""MIMO detectors for the stacked transform-domain model.

All detectors see ``y = sum_i Psi_i X_i + noise`` where ``Psi_i`` stacks
the effective matrices of transmit antenna ``i`` over the receive
antennas. Symbols are BPSK (``+1`` for bit 0, ``-1`` for bit 1).
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConditioningError, DimensionError, SingularMatrixError
from .linalg import (
    PIVOT_RTOL,
    SeriesSpec,
    block_band_mask,
    fractional_power_series,
    recursive_block_invert,
)

__all__ = [
    "StackedModel",
    "JlcozfParams",
    "Detection",
    "hard_decision",
    "lzf_detect",
    "lmmse_detect",
    "mmse_sic_detect",
    "jlcozf_sic_detect",
    "jlcozf_sic_reference",
]

# covariance eigenvalues below this fraction of the largest are treated as zero
_EIG_RTOL = 1e-13


@dataclass
class StackedModel:
    """Received vector and link matrices of one OFDM symbol.

    ``pi_blocks`` has shape ``(n_rx, n_tx, N, N)``; ``received`` has
    length ``n_rx * N`` with receive antennas stacked in order.
    """

    pi_blocks: np.ndarray
    received: np.ndarray
    noise_psd: float = 0.0
    stream_powers: tuple = None

    def __post_init__(self):
        self.pi_blocks = np.asarray(self.pi_blocks, dtype=complex)
        self.received = np.asarray(self.received, dtype=complex).ravel()
        if self.pi_blocks.ndim != 4 or self.pi_blocks.shape[2] != self.pi_blocks.shape[3]:
            raise DimensionError(f"pi_blocks must be (n_rx, n_tx, N, N), got {self.pi_blocks.shape}")
        if self.received.size != self.n_rx * self.N:
            raise DimensionError(
                f"received vector has length {self.received.size}, expected {self.n_rx * self.N}"
            )
        if self.stream_powers is None:
            self.stream_powers = (1.0,) * self.n_tx
        if len(self.stream_powers) != self.n_tx:
            raise DimensionError(f"need {self.n_tx} stream powers, got {len(self.stream_powers)}")
        if self.noise_psd < 0:
            raise ValueError(f"noise_psd must be non-negative, got {self.noise_psd!r}")

    @property
    def n_rx(self):
        return self.pi_blocks.shape[0]

    @property
    def n_tx(self):
        return self.pi_blocks.shape[1]

    @property
    def N(self):
        return self.pi_blocks.shape[2]

    def stream_stack(self, i):
        """``Psi_i``: column ``i`` of the block grid, shape ``(n_rx*N, N)``."""
        return self.pi_blocks[:, i].reshape(self.n_rx * self.N, self.N)

    def full_matrix(self):
        """The whole ``(n_rx*N, n_tx*N)`` block matrix."""
        return self.pi_blocks.transpose(0, 2, 1, 3).reshape(self.n_rx * self.N, self.n_tx * self.N)


@dataclass(frozen=True)
class JlcozfParams:
    """Tuning of the banded SIC detector.

    ``xi.real`` weights the interferer covariance, ``xi.imag`` is the
    ridge of every per-stream solve. ``tau`` is the per-block bandwidth
    (values ``>= N-1`` mean no banding) and ``delta`` the number of series
    terms for the covariance square root (``math.inf`` for the exact
    principal root).

    ``xi`` is specified in the units of the unnormalized transform pair,
    whose modulate/demodulate round trip has gain ``N``. The detector
    multiplies the unitary-domain model by ``signal_gain`` (default ``N``)
    before applying ``xi``; pass ``signal_gain=1`` to use ``xi`` directly
    in unitary units.
    """

    xi: complex = 0.01 + 1j
    tau: int = 80
    delta: float = math.inf
    signal_gain: float = None

    def __post_init__(self):
        xi = complex(self.xi)
        object.__setattr__(self, "xi", xi)
        if xi.real < 0 or xi.imag < 0:
            raise ValueError(f"xi must have non-negative real and imaginary parts, got {xi!r}")
        if int(self.tau) != self.tau or self.tau < 0:
            raise ValueError(f"tau must be a non-negative integer, got {self.tau!r}")
        SeriesSpec(0.5, self.delta)
        if self.signal_gain is not None and not self.signal_gain > 0:
            raise ValueError(f"signal_gain must be positive, got {self.signal_gain!r}")

    def gain(self, n):
        return float(n) if self.signal_gain is None else float(self.signal_gain)


@dataclass
class Detection:
    """Soft estimates and hard bits, both shaped ``(n_tx, N)``."""

    soft: np.ndarray
    bits: np.ndarray

    @property
    def symbols(self):
        return 1 - 2 * self.bits.astype(np.int8)


def hard_decision(soft):
    """BPSK slicer on the real part; ties go to ``+1``."""
    return np.where(np.real(soft) >= 0, 1.0, -1.0)


def _detection(soft):
    soft = np.asarray(soft)
    return Detection(soft=soft, bits=(hard_decision(soft) < 0).astype(np.uint8))


def _solve(a, b, what):
    """LU solve with the package-wide relative pivot check."""
    scale = np.max(np.abs(a))
    with warnings.catch_warnings():
        # singularity is reported through the pivot check below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    if scale == 0 or np.min(np.abs(np.diagonal(lu))) < PIVOT_RTOL * scale:
        raise SingularMatrixError(f"{what} is singular")
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def lzf_detect(model):
    """Joint zero forcing ``(pi^H pi)^-1 pi^H y`` over all streams."""
    pi = model.full_matrix()
    soft = _solve(pi.conj().T @ pi, pi.conj().T @ model.received, "LZF normal matrix")
    return _detection(soft.reshape(model.n_tx, model.N))


def lmmse_detect(model, snr):
    """Joint LMMSE ``(pi^H pi + I/snr)^-1 pi^H y``; ``snr=inf`` gives LZF."""
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr!r}")
    pi = model.full_matrix()
    gram = pi.conj().T @ pi
    gram[np.diag_indices_from(gram)] += 1.0 / snr
    soft = _solve(gram, pi.conj().T @ model.received, "LMMSE matrix")
    return _detection(soft.reshape(model.n_tx, model.N))


def _inverse_sqrt_eigh(k):
    """``k^-1/2`` of a Hermitian positive definite matrix by eigendecomposition."""
    k = 0.5 * (k + k.conj().T)
    w, v = np.linalg.eigh(k)
    if w[0] <= _EIG_RTOL * max(w[-1], 0.0) or w[0] <= 0:
        raise ConditioningError(
            f"covariance is not positive definite (eigenvalues {w[0]:.3g} .. {w[-1]:.3g})"
        )
    return (v / np.sqrt(w)) @ v.conj().T


def _sqrt_eigh(k):
    """Principal square root of a Hermitian positive definite matrix."""
    k = 0.5 * (k + k.conj().T)
    w, v = np.linalg.eigh(k)
    if w[0] <= 0:
        raise ConditioningError(f"covariance is not positive definite (min eigenvalue {w[0]:.3g})")
    return (v * np.sqrt(w)) @ v.conj().T


def _ridge_solve(omega, rhs, ridge):
    gram = omega.conj().T @ omega
    gram[np.diag_indices_from(gram)] += ridge
    return _solve(gram, omega.conj().T @ rhs, "per-stream normal matrix")


def mmse_sic_detect(model):
    """Successive MMSE detection in ascending stream order.

    For stream ``a`` the covariance of noise plus not-yet-detected streams,
    ``K = S0 I + sum_{b>a} P_b Psi_b Psi_b^H``, is whitened with an exact
    eigendecomposition ``K^-1/2``, the stream is estimated by LMMSE, sliced,
    and its reconstruction ``Psi_a * sign`` is removed from the residual.
    """
    residual = model.received.copy()
    dim = model.n_rx * model.N
    stacks = [model.stream_stack(i) for i in range(model.n_tx)]
    soft = np.empty((model.n_tx, model.N), dtype=complex)
    for a in range(model.n_tx):
        k = model.noise_psd * np.eye(dim, dtype=complex)
        for b in range(a + 1, model.n_tx):
            k += model.stream_powers[b] * (stacks[b] @ stacks[b].conj().T)
        whiten = _inverse_sqrt_eigh(k)
        omega = whiten @ stacks[a]
        soft[a] = _ridge_solve(omega, whiten @ residual, 1.0 / model.stream_powers[a])
        residual = residual - stacks[a] @ hard_decision(soft[a])
    return _detection(soft)


def _effective_tau(params, n):
    return min(int(params.tau), n - 1)


def jlcozf_sic_detect(model, params):
    """Banded low-complexity SIC detector.

    Differences from :func:`mmse_sic_detect`:

    * every link matrix is cut to bandwidth ``tau`` and every product of
      banded operands is re-cut to ``tau``;
    * the covariance is ``I + Re(xi) * sum_{b>a} Xi_b Xi_b^H``, so neither
      the noise level nor stream powers are needed;
    * ``K^1/2`` comes from the truncated binomial series (finite
      ``delta``) or the exact principal root (``delta = inf``) and is
      inverted with recursive 2x2 block inversion;
    * each stream is solved with ridge ``Im(xi)``; the last stream is
      solved on the residual without whitening.
    """
    n, n_rx, n_tx = model.N, model.n_rx, model.n_tx
    tau = _effective_tau(params, n)
    banded = tau < n - 1
    stack_mask = block_band_mask(n_rx, 1, n, tau) if banded else None
    cov_mask = block_band_mask(n_rx, n_rx, n, tau) if banded else None

    def cut(x, mask):
        return np.where(mask, x, 0) if banded else x

    g = params.gain(n)
    stacks = [g * cut(model.stream_stack(i), stack_mask) for i in range(n_tx)]
    series = SeriesSpec(0.5, params.delta)
    weight, ridge = params.xi.real, params.xi.imag
    dim = n_rx * n
    residual = g * model.received
    soft = np.empty((n_tx, n), dtype=complex)
    for a in range(n_tx):
        if a < n_tx - 1:
            beta = np.zeros((dim, dim), dtype=complex)
            for b in range(a + 1, n_tx):
                beta += stacks[b] @ stacks[b].conj().T
            if math.isinf(params.delta):
                # cutting before the root would break positive definiteness
                root = cut(_sqrt_eigh(np.eye(dim) + weight * beta), cov_mask)
            else:
                beta = cut(weight * beta, cov_mask)
                root = fractional_power_series(
                    beta, series, project=(lambda x: cut(x, cov_mask)) if banded else None
                )
            try:
                whiten = cut(recursive_block_invert(root, n), cov_mask)
            except SingularMatrixError as exc:
                raise ConditioningError(f"covariance square root is singular: {exc}") from exc
            omega = cut(whiten @ stacks[a], stack_mask)
            soft[a] = _ridge_solve(omega, whiten @ residual, ridge)
        else:
            soft[a] = _ridge_solve(stacks[a], residual, ridge)
        residual = residual - stacks[a] @ hard_decision(soft[a])
    return _detection(soft)


def jlcozf_sic_reference(model, params):
    """Unbanded dense counterpart of :func:`jlcozf_sic_detect`.

    Uses the full link matrices and an eigendecomposition ``K^-1/2``.
    Matches the fast detector when ``tau >= N-1`` and ``delta`` is infinite.
    """
    n_tx, dim = model.n_tx, model.n_rx * model.N
    weight, ridge = params.xi.real, params.xi.imag
    g = params.gain(model.N)
    stacks = [g * model.stream_stack(i) for i in range(n_tx)]
    residual = g * model.received
    soft = np.empty((n_tx, model.N), dtype=complex)
    for a in range(n_tx):
        if a < n_tx - 1:
            k = np.eye(dim, dtype=complex)
            for b in range(a + 1, n_tx):
                k += weight * (stacks[b] @ stacks[b].conj().T)
            whiten = _inverse_sqrt_eigh(k)
            soft[a] = _ridge_solve(whiten @ stacks[a], whiten @ residual, ridge)
        else:
            soft[a] = _ridge_solve(stacks[a], residual, ridge)
        residual = residual - stacks[a] @ hard_decision(soft[a])
    return _detection(soft)
