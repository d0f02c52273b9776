"""Fourier and Walsh-Hadamard transform pairs used as OFDM (de)modulators.

Both kinds use the unitary ``1/sqrt(N)`` normalization in each direction,
so ``forward(inverse(x)) == x``. Walsh matrices are in natural (Kronecker)
order.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError

__all__ = [
    "TransformKind",
    "TransformPlan",
    "walsh_matrix",
    "fourier_matrix",
    "fwht",
    "apply_transform",
    "transform_pair",
]

_PHI2 = np.array([[1.0, 1.0], [1.0, -1.0]])


class TransformKind(str, Enum):
    FOURIER = "fourier"
    WALSH = "walsh"


def _log2_exact(n):
    """Return k with 2**k == n, or None."""
    if n < 1 or n & (n - 1):
        return None
    return n.bit_length() - 1


def walsh_matrix(k):
    """Normalized Walsh-Hadamard matrix of size ``2**k``.

    Built by the Kronecker recursion ``phi(2^k) = phi(2) (x) phi(2^(k-1))``
    and scaled by ``1/sqrt(2**k)``. The result is real, symmetric and
    orthogonal, so it serves as both forward and inverse transform.

    Parameters
    ----------
    k : int
        Order, ``k >= 1``.

    Returns
    -------
    numpy.ndarray
        ``(2**k, 2**k)`` float array.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"walsh_matrix needs an integer order k >= 1, got {k!r}")
    phi = _PHI2
    for _ in range(int(k) - 1):
        phi = np.kron(_PHI2, phi)
    return phi / np.sqrt(phi.shape[0])


def fourier_matrix(n):
    """Unitary DFT matrix with entry ``(m, p) = exp(-2j*pi*m*p/n)/sqrt(n)``."""
    if int(n) != n or n < 1:
        raise ValueError(f"fourier_matrix needs an integer size n >= 1, got {n!r}")
    n = int(n)
    idx = np.arange(n)
    # reduce m*p mod n before scaling so large indices keep full phase precision
    phase = np.outer(idx, idx) % n
    return np.exp(-2j * np.pi * phase / n) / np.sqrt(n)


def fwht(x, axis=0):
    """Unnormalized fast Walsh-Hadamard transform along ``axis``.

    Natural (Hadamard) ordering; equivalent to multiplying by ``phi(N)``.
    Works on real or complex input and on stacks of vectors.
    """
    a = np.array(x, copy=True)
    a = np.moveaxis(a, axis, 0)
    n = a.shape[0]
    if _log2_exact(n) is None:
        raise DimensionError(f"fwht length must be a power of two, got {n}")
    rest = a.shape[1:]
    h = 1
    while h < n:
        # pair rows (i, i+h) within each block of 2h
        a = a.reshape((n // (2 * h), 2, h) + rest)
        top = a[:, 0] + a[:, 1]
        bot = a[:, 0] - a[:, 1]
        a = np.stack((top, bot), axis=1).reshape((n,) + rest)
        h *= 2
    return np.moveaxis(a, 0, axis)


@dataclass(frozen=True)
class TransformPlan:
    """A transform kind bound to a size.

    The normalization is fixed at ``1/sqrt(size)`` in both directions.
    """

    kind: TransformKind
    size: int

    def __post_init__(self):
        kind = TransformKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if int(self.size) != self.size or self.size < 1:
            raise ValueError(f"transform size must be a positive integer, got {self.size!r}")
        if kind is TransformKind.WALSH and _log2_exact(self.size) in (None, 0):
            raise ValueError(f"Walsh transform needs size 2**k with k >= 1, got {self.size}")

    @property
    def normalization(self):
        return 1.0 / np.sqrt(self.size)

    def forward_matrix(self):
        if self.kind is TransformKind.WALSH:
            return walsh_matrix(_log2_exact(self.size)).astype(complex)
        return fourier_matrix(self.size)

    def inverse_matrix(self):
        if self.kind is TransformKind.WALSH:
            return walsh_matrix(_log2_exact(self.size)).astype(complex)
        return fourier_matrix(self.size).conj().T

    def forward(self, x):
        return apply_transform(self, "forward", x)

    def inverse(self, x):
        return apply_transform(self, "inverse", x)


def apply_transform(plan, direction, x):
    """Apply the forward or inverse transform of ``plan`` to ``x``.

    ``x`` may be a length-N vector or an array whose first axis has length
    N (each column is transformed). Uses the FFT or the fast Walsh
    butterfly rather than a dense product.
    """
    x = np.asarray(x)
    if x.ndim == 0 or x.shape[0] != plan.size:
        raise DimensionError(
            f"expected leading dimension {plan.size}, got shape {x.shape}"
        )
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    if plan.kind is TransformKind.WALSH:
        return fwht(x.astype(complex), axis=0) * plan.normalization
    if direction == "forward":
        return np.fft.fft(x, axis=0, norm="ortho")
    return np.fft.ifft(x, axis=0, norm="ortho")


def transform_pair(kind, n):
    """Dense ``(forward, inverse)`` matrices for ``kind`` at size ``n``."""
    plan = TransformPlan(kind, n)
    return plan.forward_matrix(), plan.inverse_matrix()
