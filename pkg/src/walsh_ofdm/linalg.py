"""Dense and banded complex matrix kernels.

Dense matrices are plain 2-D complex ``numpy`` arrays. :class:`BandedMatrix`
keeps only the ``2*tau + 1`` diagonals around the main one. Products of
banded matrices are re-extracted at the operating bandwidth so that every
intermediate stays at ``tau``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DimensionError, SingularMatrixError

__all__ = [
    "PIVOT_RTOL",
    "as_matrix",
    "BandedMatrix",
    "band_mask",
    "block_band_mask",
    "band_extract",
    "banded_mul",
    "banded_addsub",
    "banded_matvec",
    "SeriesSpec",
    "fractional_power_series",
    "dense_invert",
    "dense_mul",
    "dense_hermitian",
    "dense_addsub",
    "block_invert_2x2",
    "recursive_block_invert",
]

#: relative pivot threshold below which a matrix is declared singular
PIVOT_RTOL = 1e-12


def as_matrix(a, square=False, name="matrix"):
    """Validate and return ``a`` as a finite 2-D complex array."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a.astype(complex, copy=False)


def band_mask(n, tau):
    """Boolean ``(n, n)`` mask of ``|m - p| <= tau``."""
    idx = np.arange(n)
    return np.abs(idx[:, None] - idx[None, :]) <= tau


def block_band_mask(n_block_rows, n_block_cols, n, tau):
    """Mask that bands each ``n x n`` block of a block matrix at ``tau``."""
    return np.tile(band_mask(n, tau), (n_block_rows, n_block_cols))


def _check_tau(n, tau):
    if int(tau) != tau or not 0 <= tau <= n - 1:
        raise ValueError(f"bandwidth tau must be an integer in [0, {n - 1}], got {tau!r}")
    return int(tau)


class BandedMatrix:
    """Square complex matrix with zeros outside ``|row - col| <= tau``.

    Storage is by diagonal: ``bands[tau + o, m]`` holds entry
    ``(m, m + o)`` for offsets ``o`` in ``[-tau, tau]``; slots that fall
    outside the matrix are kept at zero.
    """

    __slots__ = ("size", "tau", "bands")

    def __init__(self, size, tau, bands=None):
        self.size = int(size)
        if self.size < 1:
            raise ValueError(f"size must be positive, got {size!r}")
        self.tau = _check_tau(self.size, tau)
        shape = (2 * self.tau + 1, self.size)
        if bands is None:
            bands = np.zeros(shape, dtype=complex)
        else:
            bands = np.array(bands, dtype=complex)
            if bands.shape != shape:
                raise DimensionError(f"band storage must have shape {shape}, got {bands.shape}")
            bands[~self._valid()] = 0
        self.bands = bands

    def _valid(self):
        offsets = np.arange(-self.tau, self.tau + 1)[:, None]
        cols = np.arange(self.size)[None, :] + offsets
        return (cols >= 0) & (cols < self.size)

    @classmethod
    def from_dense(cls, a, tau):
        a = as_matrix(a, square=True)
        n = a.shape[0]
        tau = _check_tau(n, tau)
        out = cls(n, tau)
        for o in range(-tau, tau + 1):
            d = np.diagonal(a, offset=o)
            if o >= 0:
                out.bands[tau + o, : n - o] = d
            else:
                out.bands[tau + o, -o:] = d
        return out

    def to_dense(self):
        n, tau = self.size, self.tau
        a = np.zeros((n, n), dtype=complex)
        rows = np.arange(n)
        for o in range(-tau, tau + 1):
            cols = rows + o
            ok = (cols >= 0) & (cols < n)
            a[rows[ok], cols[ok]] = self.bands[tau + o, ok]
        return a

    def __getitem__(self, index):
        m, p = index
        if not (0 <= m < self.size and 0 <= p < self.size):
            raise IndexError(index)
        o = p - m
        if abs(o) > self.tau:
            return 0j
        return self.bands[self.tau + o, m]

    def diagonal(self, offset=0):
        """Entries ``(m, m + offset)``; zeros when ``|offset| > tau``."""
        n = self.size
        length = n - abs(offset)
        if abs(offset) > self.tau:
            return np.zeros(length, dtype=complex)
        row = self.bands[self.tau + offset]
        return row[:length] if offset >= 0 else row[-offset:]

    def with_tau(self, tau):
        """Re-extract (or zero-pad) to a new bandwidth."""
        tau = _check_tau(self.size, tau)
        out = BandedMatrix(self.size, tau)
        keep = min(tau, self.tau)
        out.bands[tau - keep : tau + keep + 1] = self.bands[self.tau - keep : self.tau + keep + 1]
        return out

    def __neg__(self):
        return BandedMatrix(self.size, self.tau, -self.bands)

    def __add__(self, other):
        return banded_addsub(self, other, "+")

    def __sub__(self, other):
        return banded_addsub(self, other, "-")

    def __matmul__(self, other):
        if isinstance(other, BandedMatrix):
            return banded_mul(self, other)
        return banded_matvec(self, other)

    def __repr__(self):
        return f"BandedMatrix(size={self.size}, tau={self.tau})"


def band_extract(a, tau):
    """Keep entries with ``|m - p| <= tau`` of square ``a``."""
    return BandedMatrix.from_dense(a, tau)


def _conform(a, b):
    if a.size != b.size:
        raise DimensionError(f"banded operands differ in size: {a.size} vs {b.size}")


def banded_mul(a, b, tau=None):
    """Product ``a @ b`` re-extracted at ``tau`` (default: the larger input bandwidth).

    Only diagonal pairs whose offsets sum into the output band are
    touched, so the cost is ``O(N * tau**2)``.
    """
    _conform(a, b)
    n = a.size
    tau = max(a.tau, b.tau) if tau is None else _check_tau(n, tau)
    out = BandedMatrix(n, tau)
    rows = np.arange(n)
    for oa in range(-a.tau, a.tau + 1):
        da = a.bands[a.tau + oa]
        mid = rows + oa
        ok = (mid >= 0) & (mid < n)
        lo = max(-b.tau, -tau - oa)
        hi = min(b.tau, tau - oa)
        for ob in range(lo, hi + 1):
            contrib = np.zeros(n, dtype=complex)
            contrib[ok] = da[ok] * b.bands[b.tau + ob, mid[ok]]
            out.bands[tau + oa + ob] += contrib
    # clear slots that point outside the matrix
    out.bands[~out._valid()] = 0
    return out


def banded_addsub(a, b, sign="+"):
    """Entrywise ``a + b`` or ``a - b``; the result has the larger bandwidth."""
    _conform(a, b)
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    tau = max(a.tau, b.tau)
    lhs = a.with_tau(tau).bands
    rhs = b.with_tau(tau).bands
    return BandedMatrix(a.size, tau, lhs + rhs if sign == "+" else lhs - rhs)


def banded_matvec(a, u):
    """Banded matrix times vector (or stack of column vectors)."""
    u = np.asarray(u)
    if u.shape[0] != a.size:
        raise DimensionError(f"vector length {u.shape[0]} does not match size {a.size}")
    n = a.size
    out = np.zeros(u.shape, dtype=complex)
    rows = np.arange(n)
    for o in range(-a.tau, a.tau + 1):
        cols = rows + o
        ok = (cols >= 0) & (cols < n)
        d = a.bands[a.tau + o, ok]
        out[ok] += d.reshape(d.shape + (1,) * (u.ndim - 1)) * u[cols[ok]]
    return out


@dataclass(frozen=True)
class SeriesSpec:
    """Exponent and term count for the binomial series of ``(I + beta)**rho``.

    ``delta`` counts terms including the identity, so ``delta=3`` keeps
    ``I + rho*beta + rho*(rho-1)/2 * beta**2``. ``math.inf`` means iterate
    until the newest term is negligible.
    """

    rho: float = 0.5
    delta: float = math.inf

    def __post_init__(self):
        if self.delta != math.inf and (int(self.delta) != self.delta or self.delta < 1):
            raise ValueError(f"delta must be a positive integer or math.inf, got {self.delta!r}")


SERIES_TOL = 1e-12
SERIES_MAX_TERMS = 200
_DIVERGENCE_RUN = 5


def fractional_power_series(beta, spec=SeriesSpec(), project=None):
    """Truncated binomial series ``sum_t binom(rho, t) * beta**t``.

    With ``spec.delta == math.inf`` terms are added until the newest one
    has max-norm below ``1e-12`` (at most 200 terms). ``project``, when
    given, is applied to every power of ``beta`` (used to hold powers at a
    fixed block bandwidth).

    Raises
    ------
    ConvergenceError
        If the term norm grows for five consecutive terms.
    """
    beta = as_matrix(beta, square=True, name="beta")
    n = beta.shape[0]
    out = np.eye(n, dtype=complex)
    limit = SERIES_MAX_TERMS if spec.delta == math.inf else int(spec.delta)
    power = np.eye(n, dtype=complex)
    coeff = 1.0
    prev_norm = None
    growing = 0
    for t in range(1, limit):
        power = power @ beta
        if project is not None:
            power = project(power)
        coeff *= (spec.rho - (t - 1)) / t
        term = coeff * power
        out += term
        norm = np.max(np.abs(term))
        if prev_norm is not None and norm > prev_norm:
            growing += 1
            if growing >= _DIVERGENCE_RUN:
                raise ConvergenceError(
                    f"series for (I + beta)**{spec.rho} diverges: term norm {norm:.3g} "
                    f"still growing after {t + 1} terms"
                )
        else:
            growing = 0
        prev_norm = norm
        if spec.delta == math.inf and norm < SERIES_TOL:
            break
        if coeff == 0.0:
            # integer rho: the series terminates exactly
            break
    return out


def dense_invert(a, block=None):
    """Inverse via LU with a relative pivot check.

    Raises :class:`SingularMatrixError` when a pivot of ``U`` is below
    ``PIVOT_RTOL * max|a|``.
    """
    a = as_matrix(a, square=True)
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0:
        raise SingularMatrixError("cannot invert a zero matrix", block=block)
    with warnings.catch_warnings():
        # singularity is reported through the pivot check below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diagonal(lu))
    if np.min(pivots) < PIVOT_RTOL * scale:
        where = f" in block {block}" if block else ""
        raise SingularMatrixError(
            f"matrix is singular{where}: pivot {np.min(pivots):.3g} below "
            f"{PIVOT_RTOL:g} * {scale:.3g}",
            block=block,
        )
    return scipy.linalg.lu_solve((lu, piv), np.eye(a.shape[0], dtype=complex), check_finite=False)


def dense_mul(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def dense_hermitian(a):
    return np.asarray(a).conj().T


def dense_addsub(a, b, sign="+"):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    return a + b if sign == "+" else a - b


def block_invert_2x2(a, split, inverse=None):
    """Invert ``a`` through its 2x2 partition at ``split``.

    With ``a = [[A1, A2], [A3, A4]]`` and ``Phi = (A1 - A2 A4^-1 A3)^-1``::

        a^-1 = [[Phi,            -Phi A2 A4^-1],
                [-A4^-1 A3 Phi,  A4^-1 + A4^-1 A3 Phi A2 A4^-1]]

    ``inverse`` inverts the two sub-blocks; it receives the block and a
    ``block`` label and defaults to :func:`dense_invert`.
    """
    a = as_matrix(a, square=True)
    n = a.shape[0]
    if not 0 < split < n:
        raise ValueError(f"split must lie strictly inside (0, {n}), got {split!r}")
    inverse = inverse or dense_invert
    a1, a2 = a[:split, :split], a[:split, split:]
    a3, a4 = a[split:, :split], a[split:, split:]
    a4_inv = inverse(a4, block="A4")
    a4_inv_a3 = a4_inv @ a3
    a2_a4_inv = a2 @ a4_inv
    phi = inverse(a1 - a2 @ a4_inv_a3, block="schur")
    top_right = -phi @ a2_a4_inv
    out = np.empty_like(a)
    out[:split, :split] = phi
    out[:split, split:] = top_right
    out[split:, :split] = -a4_inv_a3 @ phi
    out[split:, split:] = a4_inv - a4_inv_a3 @ top_right
    return out


def recursive_block_invert(a, leaf_size):
    """Apply :func:`block_invert_2x2` recursively, halving until ``leaf_size``.

    Blocks no larger than ``leaf_size`` are inverted densely. Used to
    invert a ``2^s x 2^s`` block matrix of ``N x N`` blocks with
    ``leaf_size = N``.
    """
    a = as_matrix(a, square=True)
    n = a.shape[0]
    if n <= leaf_size or n < 2:
        return dense_invert(a)

    def inner(block_matrix, block=None):
        try:
            return recursive_block_invert(block_matrix, leaf_size)
        except SingularMatrixError as exc:
            raise SingularMatrixError(str(exc), block=block or exc.block) from exc

    return block_invert_2x2(a, n // 2, inverse=inner)
