"""Radial and momentum grids, axisymmetric fields, and quadrature.

Functions on R^3 that are symmetric about the z axis are represented by a
small number of Legendre channels,

    f(x) = sum_l f_l(r) P_l(cos theta),    0 <= l <= L,

with each channel tabulated on a shared radial grid.  The radial grid uses
the composite midpoint rule (nodes at half-integers times dr), which keeps
every node strictly away from r = 0 where the l > 0 channels have removable
singularities.  The momentum grid uses the trapezoid rule on (0, k_max]; the
k = 0 endpoint is omitted because every integrand carries a k^2 factor.

Channel products are computed by evaluating both factors on a Gauss-Legendre
collocation in mu = cos theta, multiplying pointwise, and projecting back.
Mass pushed above the retained channel cutoff is reported, not silently
dropped.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import eval_legendre

from .errors import ConfigurationError, GridMismatchError

__all__ = [
    "RadialGrid",
    "MomentumGrid",
    "AxisymmetricField",
    "SpectralField",
    "make_grids",
    "inner_product",
    "spectral_inner_product",
    "lp_norm",
    "multiply_fields",
    "multiply_radial_weight",
    "save_field_csv",
    "load_field_csv",
]


@dataclass(frozen=True)
class RadialGrid:
    """Uniform midpoint grid on (0, r_max].

    Nodes sit at r_i = (i - 1/2) * dr for i = 1..n_r, each with weight dr.
    """

    r_max: float
    n_r: int

    def __post_init__(self):
        if self.r_max <= 0 or self.n_r < 8:
            raise ConfigurationError(
                f"radial grid needs r_max > 0 and n_r >= 8, got "
                f"r_max={self.r_max}, n_r={self.n_r}"
            )

    @cached_property
    def r(self) -> np.ndarray:
        dr = self.r_max / self.n_r
        return (np.arange(1, self.n_r + 1) - 0.5) * dr

    @cached_property
    def w(self) -> np.ndarray:
        return np.full(self.n_r, self.r_max / self.n_r)

    @property
    def dr(self) -> float:
        return self.r_max / self.n_r

    def signature(self) -> str:
        return f"radial:{self.r_max!r}:{self.n_r}"


@dataclass(frozen=True)
class MomentumGrid:
    """Uniform trapezoid grid on (0, k_max].

    Nodes sit at k_j = j * dk for j = 1..n_k.  Trapezoid weights on
    [0, k_max] reduce to dk everywhere except the last node (dk/2), because
    the k = 0 endpoint contributes nothing once the k^2 measure is attached.
    """

    k_max: float
    n_k: int

    def __post_init__(self):
        if self.k_max <= 0 or self.n_k < 8:
            raise ConfigurationError(
                f"momentum grid needs k_max > 0 and n_k >= 8, got "
                f"k_max={self.k_max}, n_k={self.n_k}"
            )

    @cached_property
    def k(self) -> np.ndarray:
        dk = self.k_max / self.n_k
        return np.arange(1, self.n_k + 1) * dk

    @cached_property
    def v(self) -> np.ndarray:
        dk = self.k_max / self.n_k
        weights = np.full(self.n_k, dk)
        weights[-1] = 0.5 * dk
        return weights

    @property
    def dk(self) -> float:
        return self.k_max / self.n_k

    def signature(self) -> str:
        return f"momentum:{self.k_max!r}:{self.n_k}"


def make_grids(r_max: float = 40.0, n_r: int = 2000,
               k_max: float = 8.0, n_k: int = 256):
    """Build the default paired radial and momentum grids.

    The defaults satisfy the aliasing guard 2*pi/dk > 2*r_max: the slowest
    oscillation resolvable in k distinguishes radii out to well past r_max,
    so momentum-side quadrature does not fold distinct radii together.
    """
    rgrid = RadialGrid(r_max, n_r)
    kgrid = MomentumGrid(k_max, n_k)
    if 2.0 * np.pi / kgrid.dk <= 2.0 * rgrid.r_max:
        raise ConfigurationError(
            "momentum spacing too coarse for r_max: need 2*pi/dk > 2*r_max "
            f"(got {2.0 * np.pi / kgrid.dk:.2f} vs {2.0 * rgrid.r_max:.2f})"
        )
    return rgrid, kgrid


def gauss_mu_nodes(n_mu: int):
    """Gauss-Legendre nodes and weights for mu = cos theta on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(n_mu)
    return nodes, weights


def legendre_matrix(L: int, mu: np.ndarray) -> np.ndarray:
    """Matrix P[l, q] = P_l(mu_q) for l = 0..L."""
    ls = np.arange(L + 1)
    return eval_legendre(ls[:, None], mu[None, :])


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatchError(
            f"fields live on different grids: {a.grid} vs {b.grid}"
        )


@dataclass
class AxisymmetricField:
    """Legendre-channel representation of an axisymmetric function on R^3.

    Attributes
    ----------
    grid : RadialGrid
        Shared radial grid for all channels.
    channels : ndarray, shape (L + 1, n_r), complex
        channels[l] tabulates f_l on the grid nodes.
    """

    grid: RadialGrid
    channels: np.ndarray

    def __post_init__(self):
        self.channels = np.atleast_2d(np.asarray(self.channels, dtype=complex))
        if self.channels.shape[1] != self.grid.n_r:
            raise GridMismatchError(
                f"channel length {self.channels.shape[1]} does not match "
                f"n_r={self.grid.n_r}"
            )

    @property
    def L(self) -> int:
        return self.channels.shape[0] - 1

    @classmethod
    def from_radial(cls, grid: RadialGrid, values, L: int = 0):
        """Purely radial field: channel 0 holds the profile, others zero."""
        ch = np.zeros((L + 1, grid.n_r), dtype=complex)
        ch[0] = np.asarray(values, dtype=complex)
        return cls(grid, ch)

    @classmethod
    def from_function(cls, grid: RadialGrid, fn, L: int, n_mu: int | None = None):
        """Project f(r, mu) onto channels 0..L by Gauss-Legendre collocation."""
        if n_mu is None:
            n_mu = 2 * L + 4
        mu, wmu = gauss_mu_nodes(n_mu)
        vals = np.asarray(fn(grid.r[:, None], mu[None, :]), dtype=complex)
        P = legendre_matrix(L, mu)
        # f_l(r) = (2l+1)/2 * int f(r, mu) P_l(mu) dmu
        ls = np.arange(L + 1)
        ch = ((2 * ls[:, None] + 1) / 2.0) * np.einsum(
            "lq,q,rq->lr", P, wmu, vals
        )
        return cls(grid, ch)

    @classmethod
    def from_collocation(cls, grid: RadialGrid, vals: np.ndarray, L: int,
                         mu: np.ndarray, wmu: np.ndarray):
        """Project pointwise values f(r_i, mu_q) onto channels 0..L."""
        P = legendre_matrix(L, mu)
        ls = np.arange(L + 1)
        ch = ((2 * ls[:, None] + 1) / 2.0) * np.einsum(
            "lq,q,rq->lr", P, wmu, np.asarray(vals, dtype=complex)
        )
        return cls(grid, ch)

    def collocation(self, mu: np.ndarray) -> np.ndarray:
        """Evaluate the field at (r_i, mu_q); returns shape (n_r, n_mu)."""
        P = legendre_matrix(self.L, np.asarray(mu))
        return self.channels.T @ P

    def conjugate(self):
        return AxisymmetricField(self.grid, np.conj(self.channels))

    def copy(self):
        return AxisymmetricField(self.grid, self.channels.copy())

    def pad_channels(self, L: int):
        """Return the same field carrying at least L + 1 channels."""
        if L <= self.L:
            return self
        ch = np.zeros((L + 1, self.grid.n_r), dtype=complex)
        ch[: self.L + 1] = self.channels
        return AxisymmetricField(self.grid, ch)

    def __add__(self, other):
        _check_same_grid(self, other)
        a, b = _pad_pair(self.channels, other.channels)
        return AxisymmetricField(self.grid, a + b)

    def __sub__(self, other):
        _check_same_grid(self, other)
        a, b = _pad_pair(self.channels, other.channels)
        return AxisymmetricField(self.grid, a - b)

    def __mul__(self, scalar):
        return AxisymmetricField(self.grid, self.channels * scalar)

    __rmul__ = __mul__


def _pad_pair(a: np.ndarray, b: np.ndarray):
    """Zero-pad the shorter channel stack so both cover the same l range."""
    if a.shape[0] == b.shape[0]:
        return a, b
    n = max(a.shape[0], b.shape[0])
    if a.shape[0] < n:
        a = np.vstack([a, np.zeros((n - a.shape[0], a.shape[1]), dtype=a.dtype)])
    else:
        b = np.vstack([b, np.zeros((n - b.shape[0], b.shape[1]), dtype=b.dtype)])
    return a, b


@dataclass
class SpectralField:
    """Momentum-side mirror of :class:`AxisymmetricField`.

    channels[l] tabulates the l-th transformed channel on the momentum grid.
    """

    grid: MomentumGrid
    channels: np.ndarray

    def __post_init__(self):
        self.channels = np.atleast_2d(np.asarray(self.channels, dtype=complex))
        if self.channels.shape[1] != self.grid.n_k:
            raise GridMismatchError(
                f"channel length {self.channels.shape[1]} does not match "
                f"n_k={self.grid.n_k}"
            )

    @property
    def L(self) -> int:
        return self.channels.shape[0] - 1

    def conjugate(self):
        return SpectralField(self.grid, np.conj(self.channels))

    def copy(self):
        return SpectralField(self.grid, self.channels.copy())

    def __add__(self, other):
        _check_same_grid(self, other)
        a, b = _pad_pair(self.channels, other.channels)
        return SpectralField(self.grid, a + b)

    def __sub__(self, other):
        _check_same_grid(self, other)
        a, b = _pad_pair(self.channels, other.channels)
        return SpectralField(self.grid, a - b)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.channels * scalar)

    __rmul__ = __mul__


def inner_product(f: AxisymmetricField, g: AxisymmetricField) -> complex:
    """L^2(R^3) pairing sum_l 4 pi / (2l + 1) * int f_l conj(g_l) r^2 dr.

    Fields with different channel counts pair over the common range; the
    missing channels are implicitly zero so the result is exact.
    """
    _check_same_grid(f, g)
    n = min(f.channels.shape[0], g.channels.shape[0])
    r2w = f.grid.r ** 2 * f.grid.w
    ls = np.arange(n)
    per_l = np.einsum(
        "lr,lr,r->l", f.channels[:n], np.conj(g.channels[:n]), r2w
    )
    return complex(np.sum(4.0 * np.pi / (2 * ls + 1) * per_l))


def spectral_inner_product(F: SpectralField, G: SpectralField) -> complex:
    """Momentum-side pairing with the k^2 measure, mirroring inner_product."""
    _check_same_grid(F, G)
    n = min(F.channels.shape[0], G.channels.shape[0])
    k2v = F.grid.k ** 2 * F.grid.v
    ls = np.arange(n)
    per_l = np.einsum(
        "lk,lk,k->l", F.channels[:n], np.conj(G.channels[:n]), k2v
    )
    return complex(np.sum(4.0 * np.pi / (2 * ls + 1) * per_l))


def lp_norm(f, p: float, n_mu: int | None = None) -> float:
    """L^p norm on R^3 (or the momentum analogue with the k^2 measure).

    p = 2 is computed exactly from the channels.  Other p go through the
    angular collocation: |f|^p is not a polynomial in mu, so the quadrature
    is approximate but converges fast for the smooth fields used here.
    p = inf returns the max of |f| over the collocation.
    """
    if p == 2:
        if isinstance(f, SpectralField):
            return float(np.sqrt(max(spectral_inner_product(f, f).real, 0.0)))
        return float(np.sqrt(max(inner_product(f, f).real, 0.0)))
    if isinstance(f, SpectralField):
        x, xw = f.grid.k, f.grid.v
    else:
        x, xw = f.grid.r, f.grid.w
    if n_mu is None:
        n_mu = max(2 * f.L + 4, 8)
    mu, wmu = gauss_mu_nodes(n_mu)
    P = legendre_matrix(f.L, mu)
    vals = np.abs(f.channels.T @ P)  # (n_x, n_mu)
    if np.isinf(p):
        return float(vals.max())
    integrand = vals ** p * (x ** 2 * xw)[:, None] * wmu[None, :]
    return float((2.0 * np.pi * integrand.sum()) ** (1.0 / p))


def multiply_fields(f: AxisymmetricField, g: AxisymmetricField,
                    L_out: int | None = None):
    """Pointwise product with channel truncation accounting.

    The product of degree-L_f and degree-L_g fields has Legendre degree
    L_f + L_g.  It is formed on a Gauss-Legendre collocation fine enough to
    make every projection integral exact, projected onto channels 0..L_out,
    and the relative L^2 mass of the discarded channels is returned alongside.

    Returns
    -------
    (AxisymmetricField, float)
        Projected product and dropped-mass fraction
        ||fg - proj||_2 / ||fg||_2 (zero when nothing is truncated).
    """
    if f.grid != g.grid:
        raise GridMismatchError("product factors live on different grids")
    L_full = f.L + g.L
    if L_out is None:
        L_out = L_full
    # Exactness: the projection integrand has degree <= 2 * L_full.
    n_mu = L_full + 2
    mu, wmu = gauss_mu_nodes(n_mu)
    vals = (f.channels.T @ legendre_matrix(f.L, mu)) * \
           (g.channels.T @ legendre_matrix(g.L, mu))
    P = legendre_matrix(L_full, mu)
    ls = np.arange(L_full + 1)
    ch_full = ((2 * ls[:, None] + 1) / 2.0) * np.einsum("lq,q,rq->lr", P, wmu, vals)
    kept = min(L_out, L_full)
    out = AxisymmetricField(f.grid, ch_full[: kept + 1])
    r2w = f.grid.r ** 2 * f.grid.w
    mass_l = 4.0 * np.pi / (2 * ls + 1) * np.einsum(
        "lr,r->l", np.abs(ch_full) ** 2, r2w
    )
    total = mass_l.sum()
    dropped = mass_l[kept + 1:].sum()
    frac = float(np.sqrt(dropped / total)) if total > 0 else 0.0
    if L_out > L_full:
        out = out.pad_channels(L_out)
    return out, frac


def multiply_radial_weight(f: AxisymmetricField, weight) -> AxisymmetricField:
    """Multiply by a purely radial weight a(r); channels never mix."""
    if callable(weight):
        wvals = np.asarray(weight(f.grid.r), dtype=float)
    else:
        wvals = np.asarray(weight)
        if wvals.shape != f.grid.r.shape:
            raise GridMismatchError("radial weight length does not match grid")
    return AxisymmetricField(f.grid, f.channels * wvals[None, :])


def extend_field(f: AxisymmetricField, grid_ext: RadialGrid) -> AxisymmetricField:
    """Zero-extend a field onto a wider window with the same node spacing."""
    g = f.grid
    if grid_ext.n_r < g.n_r or abs(grid_ext.dr - g.dr) > 1e-12 * g.dr:
        raise GridMismatchError("extension grid must refine nothing, only widen")
    ch = np.zeros((f.channels.shape[0], grid_ext.n_r), dtype=f.channels.dtype)
    ch[:, :g.n_r] = f.channels
    return AxisymmetricField(grid_ext, ch)


def restrict_field(f: AxisymmetricField, grid_int: RadialGrid) -> AxisymmetricField:
    """Keep only the nodes of a narrower window with the same spacing."""
    g = f.grid
    if grid_int.n_r > g.n_r or abs(grid_int.dr - g.dr) > 1e-12 * g.dr:
        raise GridMismatchError("restriction grid must be an initial segment")
    return AxisymmetricField(grid_int, f.channels[:, :grid_int.n_r].copy())


def save_field_csv(f: AxisymmetricField, path):
    """Write a field as CSV: header row (L, n_r, r_max), rows (l, i, re, im)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["L", "n_r", "r_max"])
        writer.writerow([f.L, f.grid.n_r, repr(float(f.grid.r_max))])
        writer.writerow(["l", "i", "re", "im"])
        for l in range(f.L + 1):
            for i in range(f.grid.n_r):
                z = f.channels[l, i]
                writer.writerow([l, i, repr(float(z.real)), repr(float(z.imag))])


def load_field_csv(path) -> AxisymmetricField:
    """Inverse of :func:`save_field_csv`; reconstructs the grid from the header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["L", "n_r", "r_max"]:
            raise ConfigurationError(f"unrecognized field CSV header: {header}")
        L, n_r, r_max = next(reader)
        L, n_r, r_max = int(L), int(n_r), float(r_max)
        next(reader)  # column header
        ch = np.zeros((L + 1, n_r), dtype=complex)
        for row in reader:
            l, i, re, im = int(row[0]), int(row[1]), float(row[2]), float(row[3])
            ch[l, i] = re + 1j * im
    return AxisymmetricField(RadialGrid(r_max, n_r), ch)


def content_hash(*parts) -> str:
    """Stable short hash for cache keys built from strings and arrays."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            h.update(np.ascontiguousarray(part).tobytes())
        else:
            h.update(str(part).encode())
        h.update(b"|")
    return h.hexdigest()[:16]
