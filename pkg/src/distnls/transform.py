"""Distorted Fourier transform, multipliers, and dyadic frequency tools.

The forward transform acts channel by channel,

    f#_l(k) = (-i)^l e^{-i delta_l(k)} sqrt(2/pi)
              int_0^inf (u_l(k, r) / (k r)) f_l(r) r^2 dr,

and the inverse is the conjugate-phase adjoint under the k^2 dk measure.
With V = 0 the kernel is the spherical Bessel function and the pair reduces
to the classical spherical Hankel transform of each channel, which pins the
normalization: the same code path must be exactly unitary in the flat case.

Multipliers m(k) act diagonally on the transform side and never mix
channels.  Dyadic Littlewood-Paley pieces, Sobolev norms, smoothed inverse
powers of the operator, square functions, and modulated maximal functions
are all thin wrappers around apply_multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GridMismatchError
from .grids import (AxisymmetricField, SpectralField, gauss_mu_nodes)

__all__ = [
    "MODULATION_K",
    "MultiplierSpec",
    "DyadicLadder",
    "forward",
    "inverse",
    "flat_forward",
    "flat_inverse",
    "apply_multiplier",
    "littlewood_paley",
    "sobolev_norm",
    "lambda_inverse",
    "square_function",
    "maximal_modulated",
]

# Modulation grain: phases advance by e^{2 pi i n k / (MODULATION_K * N)},
# so n indexes quarter-cells of the dyadic block at scale N.
MODULATION_K = 4


def quintic_step(t):
    """C^2 smoothstep: 0 for t <= 0, 1 for t >= 1, 6t^5 - 15t^4 + 10t^3."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def cubic_step(t):
    """C^1 smoothstep 3t^2 - 2t^3 on [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def smoothstep(t, p: int):
    """Order-p smoothstep: the unique degree 2p+1 polynomial ramp on [0, 1]
    with p vanishing derivatives at both ends, so the result is C^p.

    p = 1 and p = 2 reproduce cubic_step and quintic_step.  Higher p buys
    faster decay of synthesized bumps at the price of steeper ramps.
    """
    from math import comb

    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    acc = np.zeros_like(t)
    for j in range(p + 1):
        acc += comb(p + j, j) * comb(2 * p + 1, p - j) * (-t) ** j
    return t ** (p + 1) * acc


def lowpass_profile(x):
    """psi(x): 1 for x <= 1, 0 for x >= 2, C^2 quintic ramp between."""
    return 1.0 - quintic_step(np.asarray(x, dtype=float) - 1.0)


def band_profile(x):
    """phi(x) = psi(x) - psi(2x), supported on [1/2, 2]."""
    x = np.asarray(x, dtype=float)
    return lowpass_profile(x) - lowpass_profile(2.0 * x)


@dataclass(frozen=True)
class MultiplierSpec:
    """Radial multiplier, optionally carrying a dyadic modulation phase.

    The effective symbol is m(k) = fn(k) * exp(2 pi i n k / (K N)) with
    K = MODULATION_K; n = 0 or N = None means no modulation.
    """

    fn: object
    n: int = 0
    N: float | None = None

    def __call__(self, k):
        vals = np.asarray(self.fn(k), dtype=complex)
        if self.n != 0:
            if self.N is None:
                raise ConfigurationError("modulated multiplier needs a scale N")
            vals = vals * np.exp(2j * np.pi * self.n * np.asarray(k)
                                 / (MODULATION_K * self.N))
        return vals


class DyadicLadder:
    """Dyadic scales 2^-J .. 2^J with a C^2 partition of unity.

    band(N) returns phi(k/N) = psi(k/N) - psi(2k/N); low(N) returns psi(k/N).
    Telescoping gives psi(k / 2^-J) + sum_j phi(k / 2^j) = psi(k / 2^J),
    which is identically 1 on any grid with k_max <= 2^J.
    """

    def __init__(self, J: int = 5):
        if J < 1:
            raise ConfigurationError("ladder needs J >= 1")
        self.J = J
        self.scales = 2.0 ** np.arange(-J, J + 1)

    def low(self, N: float):
        return lambda k: lowpass_profile(np.asarray(k) / N)

    def band(self, N: float):
        return lambda k: band_profile(np.asarray(k) / N)

    def partition_defect(self, k: np.ndarray) -> float:
        """Max deviation of the ladder sum from 1 on the given momenta."""
        total = lowpass_profile(np.asarray(k) / self.scales[0])
        for N in self.scales[1:]:
            total = total + band_profile(np.asarray(k) / N)
        return float(np.max(np.abs(total - 1.0)))


def _phases(table, sign: int) -> np.ndarray:
    """(L+1, n_k) phase factors (-i)^l e^{-i delta} or i^l e^{+i delta}."""
    ls = np.arange(table.L + 1)
    il = (1j * sign) ** ls
    return il[:, None] * np.exp(1j * sign * table.delta)


def forward(f: AxisymmetricField, table) -> SpectralField:
    """Distorted transform of each channel onto the momentum grid."""
    if f.grid != table.rgrid:
        raise GridMismatchError("field and table use different radial grids")
    if f.L > table.L:
        raise ConfigurationError(
            f"field carries {f.L + 1} channels but table stops at L={table.L}"
        )
    r2w = table.rgrid.r ** 2 * table.rgrid.w
    ph = _phases(table, -1)
    out = np.empty((f.L + 1, table.kgrid.n_k), dtype=complex)
    for l in range(f.L + 1):
        out[l] = ph[l] * (table.kernel(l) @ (f.channels[l] * r2w))
    return SpectralField(table.kgrid, out)


def inverse(F: SpectralField, table) -> AxisymmetricField:
    """Adjoint-quadrature inverse of :func:`forward`."""
    if F.grid != table.kgrid:
        raise GridMismatchError("spectral field and table use different k grids")
    if F.L > table.L:
        raise ConfigurationError(
            f"field carries {F.L + 1} channels but table stops at L={table.L}"
        )
    k2v = table.kgrid.k ** 2 * table.kgrid.v
    ph = _phases(table, +1)
    out = np.empty((F.L + 1, table.rgrid.n_r), dtype=complex)
    for l in range(F.L + 1):
        out[l] = (ph[l] * F.channels[l] * k2v) @ table.kernel(l)
    return AxisymmetricField(table.rgrid, out)


def _require_flat(table):
    if table.potential.form != "zero" and table.potential.amplitude != 0.0:
        raise ConfigurationError("flat transform requires the V = 0 table")


def flat_forward(f: AxisymmetricField, flat_table) -> SpectralField:
    """Spherical Bessel transform: forward with the V = 0 table."""
    _require_flat(flat_table)
    return forward(f, flat_table)


def flat_inverse(F: SpectralField, flat_table) -> AxisymmetricField:
    """Inverse spherical Bessel transform (V = 0 table)."""
    _require_flat(flat_table)
    return inverse(F, flat_table)


def apply_spectral(F: SpectralField, m) -> SpectralField:
    """Multiply every channel of a spectral field by the radial symbol m(k)."""
    vals = np.asarray(m(F.grid.k), dtype=complex)
    return SpectralField(F.grid, F.channels * vals[None, :])


def apply_multiplier(f: AxisymmetricField, m, table) -> AxisymmetricField:
    """inverse(m(k) * forward(f)); m is a callable or MultiplierSpec."""
    return inverse(apply_spectral(forward(f, table), m), table)


def littlewood_paley(f: AxisymmetricField, N: float, table,
                     ladder: DyadicLadder | None = None,
                     mode: str = "band") -> AxisymmetricField:
    """Dyadic piece of f at scale N: band phi(k/N) or low-pass psi(k/N)."""
    ladder = ladder or DyadicLadder()
    if mode == "band":
        return apply_multiplier(f, ladder.band(N), table)
    if mode == "low":
        return apply_multiplier(f, ladder.low(N), table)
    raise ConfigurationError(f"unknown littlewood_paley mode {mode!r}")


def sobolev_norm(f: AxisymmetricField, s: float, p: float, table,
                 homogeneous: bool = True) -> float:
    """|| <H>^{s/2} f ||_p computed through the transform.

    homogeneous=True uses k^s, else (1 + k^2)^{s/2}.  For p = 2 the norm is
    evaluated directly on the transform side (Plancherel); other p go back
    through the inverse.
    """
    from .grids import lp_norm

    if homogeneous:
        m = lambda k: np.asarray(k, dtype=float) ** s
    else:
        m = lambda k: (1.0 + np.asarray(k, dtype=float) ** 2) ** (s / 2.0)
    Fm = apply_spectral(forward(f, table), m)
    if p == 2:
        return lp_norm(Fm, 2)
    return lp_norm(inverse(Fm, table), p)


def _inverse_power_profile(k):
    """1 for k <= 1, 1/k for k >= 2, monotone cubic-blended in between."""
    k = np.asarray(k, dtype=float)
    k_safe = np.where(k <= 0, 1.0, k)
    s = cubic_step(k_safe - 1.0)
    return np.where(k <= 0, 1.0, k_safe ** (-s))


def lambda_inverse(f: AxisymmetricField, alpha: float, t: float,
                   table) -> AxisymmetricField:
    """Smoothed negative power (t H)^{-alpha/2} with a low-frequency clamp.

    Multiplier t^{alpha/2} phi(sqrt(t) k)^alpha where phi is 1 below
    frequency 1/sqrt(t) and 1/k above; the clamp keeps the operator bounded
    on low frequencies while matching H^{-alpha/2} in the dispersive regime.
    """
    if t <= 0:
        raise ConfigurationError("lambda_inverse needs t > 0")
    root_t = np.sqrt(t)

    def m(k):
        return t ** (alpha / 2.0) * _inverse_power_profile(root_t * np.asarray(k)) ** alpha

    return apply_multiplier(f, m, table)


def square_function(f: AxisymmetricField, table,
                    ladder: DyadicLadder | None = None) -> AxisymmetricField:
    """Pointwise dyadic square function sqrt(sum_N |P_N f|^2).

    Includes the lowest low-pass block so the pieces resum to f; the result
    is projected back onto the field's channel range from collocation values
    (the square root is not a polynomial in mu, so this is a controlled
    re-projection, adequate for the smooth fields used in the harnesses).
    """
    ladder = ladder or DyadicLadder()
    n_mu = 2 * f.L + 4
    mu, wmu = gauss_mu_nodes(n_mu)
    F = forward(f, table)
    acc = np.abs(inverse(apply_spectral(F, ladder.low(ladder.scales[0])),
                         table).collocation(mu)) ** 2
    for N in ladder.scales[1:]:
        piece = inverse(apply_spectral(F, ladder.band(N)), table)
        acc += np.abs(piece.collocation(mu)) ** 2
    return AxisymmetricField.from_collocation(
        table.rgrid, np.sqrt(acc), f.L, mu, wmu)


def maximal_modulated(f: AxisymmetricField, n: int, table,
                      ladder: DyadicLadder | None = None) -> AxisymmetricField:
    """Pointwise max over scales of the n-modulated low-pass pieces.

    At each dyadic scale N the low-pass symbol psi(k/N) is modulated by
    e^{2 pi i n k / (K N)} before inversion; the pointwise maximum of the
    absolute values over scales is projected back to channels.
    """
    ladder = ladder or DyadicLadder()
    n_mu = 2 * f.L + 4
    mu, wmu = gauss_mu_nodes(n_mu)
    F = forward(f, table)
    best = None
    for N in ladder.scales:
        spec = MultiplierSpec(ladder.low(N), n=n, N=N)
        piece = inverse(apply_spectral(F, spec), table)
        mag = np.abs(piece.collocation(mu))
        best = mag if best is None else np.maximum(best, mag)
    return AxisymmetricField.from_collocation(table.rgrid, best, f.L, mu, wmu)
