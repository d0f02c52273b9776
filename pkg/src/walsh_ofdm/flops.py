"""Closed-form flop counts for the four detectors.

Costs follow the per-operation conventions of the standard tables: a real
add or multiply is 0.5 flop, a complex multiply 3 flops, and an ``N x N``
dense complex product ``8 N^3``. Banded counts use bandwidth ``tau`` for
every operand and result. ``M = 2**sigma`` is the number of streams and
``n = M * N`` the stacked dimension.
"""

import math
from dataclasses import dataclass

__all__ = [
    "CostParams",
    "dense_inverse_cost",
    "banded_inverse_cost",
    "block_inverse_cost",
    "flops_lzf",
    "flops_lmmse",
    "mmse_sic_components",
    "flops_mmse_sic",
    "jlcozf_sic_components",
    "flops_jlcozf_sic",
    "efficiency",
    "flop_table",
]


@dataclass(frozen=True)
class CostParams:
    """Problem size for a ``2**sigma x 2**sigma`` configuration.

    ``delta`` selects the square-root branch of the banded detector:
    ``math.inf`` for the exact inverse square root, ``3`` for the
    three-term series followed by block inversion.
    """

    sigma: int
    N: int
    tau: int = 0
    delta: float = math.inf

    def __post_init__(self):
        if self.sigma < 0 or self.N < 1:
            raise ValueError(f"need sigma >= 0 and N >= 1, got sigma={self.sigma}, N={self.N}")
        if not 0 <= self.tau <= max(self.N - 1, 0):
            raise ValueError(f"tau must lie in [0, N-1], got {self.tau}")
        if self.delta not in (3, math.inf):
            raise ValueError(f"delta must be 3 or math.inf, got {self.delta!r}")

    @property
    def streams(self):
        return 2**self.sigma

    @property
    def n(self):
        return self.streams * self.N


def dense_inverse_cost(size):
    """Dense complex inverse: ``8 n^3 + 2 n^2 + n``."""
    return 8 * size**3 + 2 * size**2 + size


def banded_inverse_cost(size, tau):
    """Banded complex inverse: ``n (10 tau^2 + 21 tau + 1)``."""
    return size * (10 * tau**2 + 21 * tau + 1)


def block_inverse_cost(sigma, N, tau):
    """One level of 2x2 block inversion of a ``2**sigma`` block matrix of banded blocks."""
    return 2**sigma * N * (144 * tau**2 + 88 * tau + 44)


def _half_size_inverses(sigma, N, tau):
    # two inversions of the 2**(sigma-1) block halves; a single block is a banded N x N
    if sigma <= 1:
        return 2 * banded_inverse_cost(N, tau)
    return 2 * block_inverse_cost(sigma - 1, N, tau)


def flops_lzf(p):
    n = p.n
    return 12 * n**3 + 5 * n**2 + 0.5 * n


def flops_lmmse(p):
    n = p.n
    return 12 * n**3 + 5 * n**2 + 1.5 * n


def mmse_sic_components(p):
    """Per-step costs of successive MMSE detection, keyed by step."""
    m, n, N = p.streams, p.n, p.N
    return {
        "covariance_products": sum((m - i - 1) * 4 * n**3 + 0.5 * n for i in range(m - 1)),
        "covariance_additions": sum((m - i - 1) * n**2 + 0.5 * n for i in range(m)),
        "inverse_sqrt": (m - 1) * (10 * n**3 + 3 * n**2 + 2.5 * n),
        "cancellation": (m - 1) * 1.5 * n**2,
        "whitening": (m - 1) * 4 * n**2,
        "stream_solves": m * (12 * N**3 + 5 * N**2 + 1.5 * N),
    }


def flops_mmse_sic(p):
    return sum(mmse_sic_components(p).values())


def jlcozf_sic_components(p, per_subcarrier_build=False):
    """Per-step costs of the banded SIC detector, keyed by step.

    For ``delta == 3`` the square-root step is the series construction,
    counted once per covariance matrix, plus one level of block inversion
    and the two half-size inversions it needs. ``per_subcarrier_build``
    multiplies the per-stream build cost by ``N``.
    """
    m, n, N, tau = p.streams, p.n, p.N, p.tau
    parts = {
        "covariance_products": sum(
            (m - i - 1) * n * (16 * tau**2 + 8 * tau + 4) for i in range(m - 1)
        ),
        "covariance_additions": sum((m - i - 1) * n * (8 * tau + 4) for i in range(m)),
    }
    if p.delta == math.inf:
        parts["inverse_sqrt"] = (m - 1) * (10 * n**3 + 3 * n**2 + 2.5 * n)
    else:
        parts["series"] = (m - 1) * n * (32 * tau**2 + 32 * tau + 16) + n
        parts["block_inverse"] = block_inverse_cost(p.sigma, N, tau)
        parts["half_inverses"] = _half_size_inverses(p.sigma, N, tau)
    parts["cancellation"] = (m - 1) * n * (8 * tau + 4)
    parts["whitening"] = (m - 1) * n * (8 * tau + 4)
    build = m * (37 * tau**2 + 26.5 * tau + 9.5)
    parts["stream_solves"] = build * N if per_subcarrier_build else build
    return parts


def flops_jlcozf_sic(p, per_subcarrier_build=False):
    return sum(jlcozf_sic_components(p, per_subcarrier_build).values())


def efficiency(n_proposed, n_compared):
    """Percent saving ``(n_compared - n_proposed) / n_proposed * 100``.

    Negative when the compared detector needs fewer flops.
    """
    if n_proposed == 0:
        raise ValueError("n_proposed must be non-zero")
    return (n_compared - n_proposed) / n_proposed * 100.0


def flop_table(sigmas, Ns, taus, deltas, per_subcarrier_build=False):
    """Rows of ``(equalizer, sigma, N, tau, delta, flops, efficiency_vs_proposed)``.

    Efficiency of each detector is taken against the banded detector at
    the same ``(sigma, N, tau, delta)``; the proposed row itself has
    efficiency 0. Linear and MMSE-SIC detectors ignore ``tau``/``delta``.
    """
    rows = []
    for sigma in sigmas:
        for N in Ns:
            for tau in taus:
                for delta in deltas:
                    p = CostParams(sigma, N, tau, delta)
                    proposed = flops_jlcozf_sic(p, per_subcarrier_build)
                    for name, value in (
                        ("LZF", flops_lzf(p)),
                        ("LMMSE", flops_lmmse(p)),
                        ("MMSE_SIC", flops_mmse_sic(p)),
                        ("JLCOZF_SIC", proposed),
                    ):
                        rows.append(
                            (name, sigma, N, tau, delta, value, efficiency(proposed, value))
                        )
    return rows
