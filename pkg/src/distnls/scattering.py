"""Radial scattering solves for H = -Laplacian + V on R^3.

For each angular momentum channel l, the regular solution of

    u'' = ( l(l+1)/r^2 + V(r) - k^2 ) u,      u(r) ~ r^{l+1} near 0,

is marched across the radial grid with a fixed-step RK4 integrator and
matched to Riccati-Bessel functions beyond the potential's support.  The
match yields the phase shift delta_l(k) and the asymptotic normalization

    u_l(k, r) -> cos(delta) jhat_l(kr) - sin(delta) nhat_l(kr),

which is exactly the normalization that makes the distorted transform built
on these solutions unitary.  Tables of u and delta on a (k, r) product grid
are the single shared artifact every other module consumes.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import spherical_jn, spherical_yn

from .errors import ConfigurationError, NumericError
from .grids import (AxisymmetricField, MomentumGrid, RadialGrid, content_hash)

__all__ = [
    "Potential",
    "ScatteringTable",
    "SpectralReport",
    "build_scattering_table",
    "solve_radial",
    "check_spectrum",
    "distorted_plane_wave",
    "completeness_defect",
    "diagonalization_defect",
    "born_phase_shift",
    "closed_form_well_phase",
    "fold_principal",
    "riccati_j",
    "riccati_n",
]

_SUPPORT_FLOOR = 1e-14

logger = logging.getLogger(__name__)


def riccati_j(l: int, x: np.ndarray) -> np.ndarray:
    """Riccati-Bessel jhat_l(x) = x j_l(x); jhat_l(x) ~ sin(x - l pi/2)."""
    x = np.asarray(x, dtype=float)
    return x * spherical_jn(l, x)


def riccati_n(l: int, x: np.ndarray) -> np.ndarray:
    """Riccati-Bessel nhat_l(x) = x y_l(x); nhat_l(x) ~ -cos(x - l pi/2)."""
    x = np.asarray(x, dtype=float)
    return x * spherical_yn(l, x)


@dataclass(frozen=True)
class Potential:
    """Radial potential with a known numerical support radius.

    The callable forms are evaluated analytically at arbitrary radii (the
    integrator needs substep points between grid nodes).  R_V is the radius
    beyond which |V| falls under 1e-14 and the solution is matched to free
    Riccati-Bessel waves.
    """

    form: str
    amplitude: float = 0.0
    width: float = 1.0
    table_r: np.ndarray | None = None
    table_v: np.ndarray | None = None

    @classmethod
    def zero(cls):
        return cls("zero", 0.0, 1.0)

    @classmethod
    def gaussian(cls, amplitude: float, width: float = 1.0):
        return cls("gaussian", float(amplitude), float(width))

    @classmethod
    def exponential(cls, amplitude: float, width: float = 1.0):
        return cls("exponential", float(amplitude), float(width))

    @classmethod
    def spherical_well(cls, amplitude: float, width: float = 1.0):
        return cls("well", float(amplitude), float(width))

    @classmethod
    def from_table(cls, r, v):
        r = np.asarray(r, dtype=float)
        v = np.asarray(v, dtype=float)
        if r.ndim != 1 or r.shape != v.shape:
            raise ConfigurationError("tabulated potential needs matching 1-d arrays")
        return cls("tabulated", float(np.max(np.abs(v))), float(r[-1]),
                   table_r=r, table_v=v)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.form == "zero" or self.amplitude == 0.0:
            return np.zeros_like(r)
        if self.form == "gaussian":
            return self.amplitude * np.exp(-((r / self.width) ** 2))
        if self.form == "exponential":
            return self.amplitude * np.exp(-r / self.width)
        if self.form == "well":
            return np.where(r <= self.width, self.amplitude, 0.0)
        if self.form == "tabulated":
            spline = CubicSpline(self.table_r, self.table_v, extrapolate=False)
            out = spline(r)
            return np.where(np.isnan(out), 0.0, out)
        raise ConfigurationError(f"unknown potential form {self.form!r}")

    @property
    def support_radius(self) -> float:
        """Radius past which |V| < 1e-14."""
        a = abs(self.amplitude)
        if self.form == "zero" or a == 0.0:
            return 0.0
        if self.form == "gaussian":
            return self.width * np.sqrt(np.log(a / _SUPPORT_FLOOR))
        if self.form == "exponential":
            return self.width * np.log(a / _SUPPORT_FLOOR)
        if self.form == "well":
            return self.width
        if self.form == "tabulated":
            big = np.abs(self.table_v) > _SUPPORT_FLOOR
            return float(self.table_r[big][-1]) if big.any() else 0.0
        raise ConfigurationError(f"unknown potential form {self.form!r}")

    def decay_constant(self, rgrid: RadialGrid, power: int = 6) -> float:
        """C with |V(r)| <= C <r>^-power on the grid (a decay diagnostic)."""
        r = rgrid.r
        return float(np.max(np.abs(self(r)) * (1.0 + r ** 2) ** (power / 2)))

    @property
    def breakpoints(self) -> tuple:
        """Radii where V jumps; the integrator splits its steps there."""
        if self.form == "well" and self.amplitude != 0.0:
            return (self.width,)
        return ()

    def signature(self) -> str:
        if self.form == "tabulated":
            return "pot:tabulated:" + content_hash(self.table_r, self.table_v)
        return f"pot:{self.form}:{self.amplitude!r}:{self.width!r}"


def _march_radial(potential, l: int, ksq: np.ndarray, rgrid: RadialGrid,
                  n_sub: int = 8):
    """RK4 march of u'' = q(r) u, vectorized over the k axis.

    ksq may contain 0 (zero-energy solve).  Starts from a two-term power
    series at the first midpoint node, so no node ever sits at r = 0.
    Substeps are split at potential discontinuities, with stage radii nudged
    into the open interval so each side sees its own one-sided limit of V;
    this keeps the integrator at full order for piecewise-smooth potentials.

    Returns (u, up) with shape (len(ksq), n_r): the solution and its radial
    derivative at every node.
    """
    r = rgrid.r
    n_r = rgrid.n_r
    nk = len(ksq)
    cl = l * (l + 1.0)
    v0 = float(potential(np.array([0.0]))[0]) if potential.form != "well" \
        else potential.amplitude
    breaks = potential.breakpoints

    u = np.empty((nk, n_r))
    up = np.empty((nk, n_r))
    # Series start u = r^{l+1} (1 + a2 r^2) keeps the regular branch clean.
    a2 = (v0 - ksq) / (4.0 * l + 6.0)
    r1 = r[0]
    u[:, 0] = r1 ** (l + 1) * (1.0 + a2 * r1 ** 2)
    up[:, 0] = (l + 1.0) * r1 ** l + (l + 3.0) * a2 * r1 ** (l + 2)

    h = rgrid.dr / n_sub
    eps = 1e-12
    y1 = u[:, 0].copy()
    y2 = up[:, 0].copy()

    def rk4_piece(y1, y2, p, q):
        hh = q - p
        mid = 0.5 * (p + q)
        # Endpoint stages sample V just inside the interval (sided limits).
        qa = cl / p ** 2 + potential(min(p + eps, mid)) - ksq
        qb = cl / mid ** 2 + potential(mid) - ksq
        qc = cl / q ** 2 + potential(max(q - eps, mid)) - ksq
        k1u = y2
        k1v = qa * y1
        k2u = y2 + 0.5 * hh * k1v
        k2v = qb * (y1 + 0.5 * hh * k1u)
        k3u = y2 + 0.5 * hh * k2v
        k3v = qb * (y1 + 0.5 * hh * k2u)
        k4u = y2 + hh * k3v
        k4v = qc * (y1 + hh * k3u)
        y1 = y1 + (hh / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        y2 = y2 + (hh / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        return y1, y2

    for i in range(n_r - 1):
        base = r[i]
        for s in range(n_sub):
            ra = base + s * h
            rc = ra + h
            inside = [b for b in breaks if ra + eps < b < rc - eps]
            if not inside:
                y1, y2 = rk4_piece(y1, y2, ra, rc)
            else:
                p = ra
                for b in inside:
                    y1, y2 = rk4_piece(y1, y2, p, b)
                    p = b
                y1, y2 = rk4_piece(y1, y2, p, rc)
        u[:, i + 1] = y1
        up[:, i + 1] = y2
    return u, up


def solve_radial(potential: Potential, l: int, kgrid: MomentumGrid,
                 rgrid: RadialGrid, n_sub: int = 8):
    """Regular solutions and phase shifts for one channel at all grid momenta.

    Matching is done against (jhat_l, nhat_l) at the two grid nodes nearest
    R_V + 2 and R_V + 4, and the solution is rescaled to the asymptotically
    normalized form cos(delta) jhat - sin(delta) nhat.

    Returns
    -------
    u : ndarray (n_k, n_r)
        Normalized regular solutions.
    delta : ndarray (n_k,)
        Phase shifts as atan2 values, continuous with the returned u
        (no branch folding applied here).
    """
    rv = potential.support_radius
    need = rv + 4.0 + rgrid.dr
    if need > rgrid.r_max:
        raise ConfigurationError(
            f"r_max={rgrid.r_max} too small: potential support ends at "
            f"{rv:.2f} and matching needs {need:.2f}"
        )
    k = kgrid.k
    u, _ = _march_radial(potential, l, k ** 2, rgrid, n_sub=n_sub)
    ia = int(np.argmin(np.abs(rgrid.r - (rv + 2.0))))
    ib = int(np.argmin(np.abs(rgrid.r - (rv + 4.0))))
    ra, rb = rgrid.r[ia], rgrid.r[ib]
    ja, na = riccati_j(l, k * ra), riccati_n(l, k * ra)
    jb, nb = riccati_j(l, k * rb), riccati_n(l, k * rb)
    det = na * jb - ja * nb
    if np.min(np.abs(det)) < 1e-10:
        raise NumericError("degenerate matching system; perturb the grid")
    A = (na * u[:, ib] - nb * u[:, ia]) / det
    B = (ja * u[:, ib] - jb * u[:, ia]) / det
    amp = np.hypot(A, B)
    if np.min(amp) < 1e-14:
        raise NumericError("vanishing asymptotic amplitude in channel match")
    u = u / amp[:, None]
    delta = np.arctan2(B, A)
    return u, delta


def fold_principal(delta):
    """Fold phase shifts into the principal branch (-pi/2, pi/2] mod pi."""
    delta = np.asarray(delta, dtype=float)
    out = delta - np.pi * np.round(delta / np.pi)
    # round() sends the upper edge to -pi/2; nudge it back.
    out = np.where(np.isclose(out, -np.pi / 2), out + np.pi, out)
    return out


def _unwrap_from_top(delta):
    """Continuity unwrap anchored at the largest momentum, where delta ~ 0."""
    rev = np.unwrap(delta[::-1])
    return rev[::-1]


@dataclass
class ScatteringTable:
    """Tabulated generalized eigenfunctions for channels 0..L.

    Attributes
    ----------
    u : ndarray (L + 1, n_k, n_r)
        Asymptotically normalized regular solutions.
    delta : ndarray (L + 1, n_k)
        Phase shifts, continuity-unwrapped so that delta -> 0 at k_max.
    delta_principal : ndarray (L + 1, n_k)
        Same shifts folded into (-pi/2, pi/2] mod pi.
    """

    potential: Potential
    rgrid: RadialGrid
    kgrid: MomentumGrid
    L: int
    u: np.ndarray
    delta: np.ndarray
    delta_principal: np.ndarray
    _kernels: dict = dc_field(default_factory=dict, repr=False)

    def kernel(self, l: int) -> np.ndarray:
        """sqrt(2/pi) * u_l(k, r) / (k r), the transform kernel; cached."""
        if l not in self._kernels:
            scale = np.sqrt(2.0 / np.pi)
            kr = np.outer(self.kgrid.k, self.rgrid.r)
            self._kernels[l] = scale * self.u[l] / kr
        return self._kernels[l]

    def signature(self) -> str:
        return content_hash(self.potential.signature(), self.rgrid.signature(),
                            self.kgrid.signature(), self.L)

    def asymptotic_defect(self) -> float:
        """Max mismatch against cos(d) jhat - sin(d) nhat beyond the support."""
        rv = self.potential.support_radius
        mask = self.rgrid.r >= rv + 2.0
        r_far = self.rgrid.r[mask]
        worst = 0.0
        for l in range(self.L + 1):
            kr = np.outer(self.kgrid.k, r_far)
            ref = (np.cos(self.delta[l])[:, None] * riccati_j(l, kr)
                   - np.sin(self.delta[l])[:, None] * riccati_n(l, kr))
            worst = max(worst, float(np.max(np.abs(self.u[l][:, mask] - ref))))
        return worst

    def subsample(self, stride: int) -> "ScatteringTable":
        """Coarse-momentum view: keeps every stride-th node, same k_max."""
        if self.kgrid.n_k % stride != 0:
            raise ConfigurationError("stride must divide n_k")
        idx = np.arange(stride - 1, self.kgrid.n_k, stride)
        coarse = MomentumGrid(self.kgrid.k_max, self.kgrid.n_k // stride)
        return ScatteringTable(
            potential=self.potential, rgrid=self.rgrid, kgrid=coarse,
            L=self.L, u=self.u[:, idx, :].copy(),
            delta=self.delta[:, idx].copy(),
            delta_principal=self.delta_principal[:, idx].copy(),
        )

    def save_npz(self, path):
        np.savez_compressed(
            path, u=self.u, delta=self.delta,
            delta_principal=self.delta_principal,
            meta=np.array([self.rgrid.r_max, self.rgrid.n_r,
                           self.kgrid.k_max, self.kgrid.n_k, self.L]),
            pot=np.array([self.potential.signature()]),
        )

    @classmethod
    def load_npz(cls, path, potential: Potential) -> "ScatteringTable":
        data = np.load(path, allow_pickle=False)
        if str(data["pot"][0]) != potential.signature():
            raise ConfigurationError("cached table belongs to a different potential")
        r_max, n_r, k_max, n_k, L = data["meta"]
        return cls(potential=potential,
                   rgrid=RadialGrid(float(r_max), int(n_r)),
                   kgrid=MomentumGrid(float(k_max), int(n_k)),
                   L=int(L), u=data["u"], delta=data["delta"],
                   delta_principal=data["delta_principal"])


def build_scattering_table(potential: Potential, rgrid: RadialGrid,
                           kgrid: MomentumGrid, L: int = 2,
                           n_sub: int = 8,
                           cache_dir: str | None = None) -> ScatteringTable:
    """Solve all channels 0..L and assemble the shared table.

    A zero potential short-circuits to exact Riccati-Bessel functions with
    delta identically zero, so flat and distorted transforms share one code
    path.  With cache_dir set, tables round-trip through content-addressed
    npz files.
    """
    if L < 0:
        raise ConfigurationError("L must be >= 0")
    cache_path = None
    if cache_dir is not None:
        key = content_hash(potential.signature(), rgrid.signature(),
                           kgrid.signature(), L, n_sub)
        cache_path = os.path.join(cache_dir, f"table_{key}.npz")
        if os.path.exists(cache_path):
            return ScatteringTable.load_npz(cache_path, potential)
        logger.info("scattering table cache miss (key %s), solving", key)

    n_k, n_r = kgrid.n_k, rgrid.n_r
    u = np.empty((L + 1, n_k, n_r))
    delta = np.zeros((L + 1, n_k))
    if potential.form == "zero" or potential.amplitude == 0.0:
        kr = np.outer(kgrid.k, rgrid.r)
        for l in range(L + 1):
            u[l] = riccati_j(l, kr)
    else:
        for l in range(L + 1):
            u[l], delta[l] = solve_radial(potential, l, kgrid, rgrid, n_sub)
            delta[l] = _unwrap_from_top(delta[l])
    table = ScatteringTable(
        potential=potential, rgrid=rgrid, kgrid=kgrid, L=L, u=u,
        delta=delta, delta_principal=fold_principal(delta),
    )
    if cache_path is not None:
        os.makedirs(cache_dir, exist_ok=True)
        table.save_npz(cache_path)
    return table


def extend_table(table: ScatteringTable, r_max_ext: float,
                 L: int | None = None) -> ScatteringTable:
    """Widen the radial window using the exact exterior form of the modes.

    Beyond the potential's support every mode equals
    cos(delta) jhat_l - sin(delta) nhat_l, so the table continues to larger
    radii without re-solving anything.  Wave-operator images carry an
    algebraic tail outside any finite window; checks that compose two
    transforms need that tail, and this is the cheap way to keep it.

    The momentum spacing must still resolve the widened window
    (2 pi / dk > 2 r_max_ext), otherwise synthesis on the extension is
    aliased and the result meaningless.
    """
    rgrid, kgrid = table.rgrid, table.kgrid
    if L is None:
        L = table.L
    if L > table.L:
        raise ConfigurationError("cannot extend to more channels than tabulated")
    if r_max_ext <= rgrid.r_max:
        raise ConfigurationError("extension must exceed the current window")
    if 2.0 * np.pi / kgrid.dk <= 2.0 * r_max_ext:
        raise ConfigurationError(
            "momentum grid cannot alias-resolve the requested window: need "
            f"2 pi / dk > {2 * r_max_ext:g}, have {2 * np.pi / kgrid.dk:g}"
        )
    if rgrid.r_max < table.potential.support_radius + 2.0:
        raise ConfigurationError(
            "current window ends inside the potential support; the exterior "
            "closed form does not apply there"
        )
    dr = rgrid.dr
    n_tot = int(round(r_max_ext / dr))
    rgrid_ext = RadialGrid(n_tot * dr, n_tot)
    r_new = rgrid_ext.r[rgrid.n_r:]
    u = np.empty((L + 1, kgrid.n_k, n_tot))
    kr = np.outer(kgrid.k, r_new)
    for l in range(L + 1):
        cosd = np.cos(table.delta[l])[:, None]
        sind = np.sin(table.delta[l])[:, None]
        u[l, :, :rgrid.n_r] = table.u[l]
        u[l, :, rgrid.n_r:] = cosd * riccati_j(l, kr) - sind * riccati_n(l, kr)
    return ScatteringTable(
        potential=table.potential, rgrid=rgrid_ext, kgrid=kgrid, L=L,
        u=u, delta=table.delta[:L + 1].copy(),
        delta_principal=table.delta_principal[:L + 1].copy(),
    )


def born_phase_shift(potential: Potential, l: int, kgrid: MomentumGrid,
                     rgrid: RadialGrid) -> np.ndarray:
    """First-order phase shift -k int V(r) j_l(kr)^2 r^2 dr on the grid."""
    r, w = rgrid.r, rgrid.w
    vr = potential(r)
    kr = np.outer(kgrid.k, r)
    jl = spherical_jn(l, kr)
    return -kgrid.k * np.einsum("kr,r->k", jl ** 2, vr * r ** 2 * w)


def closed_form_well_phase(amplitude: float, width: float, k) -> np.ndarray:
    """s-wave phase shift of the spherical step V = amplitude on r < width.

    Log-derivative matching of sin(K r) inside against sin(kr + delta)
    outside; for sub-barrier momenta the interior wavenumber turns imaginary
    and tan(K a)/K continues to tanh(kappa a)/kappa.  Returned folded to the
    principal branch.
    """
    k = np.asarray(k, dtype=float)
    a = width
    inside = k ** 2 - amplitude
    out = np.empty_like(k)
    osc = inside > 0
    K = np.sqrt(np.abs(inside))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_osc = np.where(osc, np.tan(K * a) / np.where(K == 0, 1.0, K), 0.0)
        t_exp = np.where(~osc, np.tanh(K * a) / np.where(K == 0, 1.0, K), 0.0)
    t = np.where(osc, t_osc, t_exp)
    out = np.arctan(k * t) - k * a
    return fold_principal(out)


def diagonalization_defect(table: ScatteringTable, k_cap: float | None = None,
                           n_sample: int = 16) -> float:
    """Relative residual of the eigenfunction equation under second differences.

    Applies a fourth-order five-point second difference to tabulated u_l and
    compares with (l(l+1)/r^2 + V - k^2) u.  Momenta are subsampled below
    k_cap (default 0.75 k_max): beyond that the stencil's own truncation
    error, which scales like (dr k)^4 k^2, dominates the table error and the
    check would measure the stencil rather than the solve.
    """
    rg = table.rgrid
    dr = rg.dr
    if k_cap is None:
        k_cap = 0.75 * table.kgrid.k_max
    kidx = np.linspace(0, np.searchsorted(table.kgrid.k, k_cap) - 1,
                       n_sample).astype(int)
    kidx = np.unique(kidx)
    vr = table.potential(rg.r)
    worst = 0.0
    for l in range(table.L + 1):
        q = l * (l + 1.0) / rg.r ** 2 + vr
        for j in kidx:
            u = table.u[l, j]
            d2 = (-u[:-4] + 16 * u[1:-3] - 30 * u[2:-2] + 16 * u[3:-1]
                  - u[4:]) / (12.0 * dr ** 2)
            rhs = (q[2:-2] - table.kgrid.k[j] ** 2) * u[2:-2]
            denom = np.max(np.abs(rhs))
            if denom == 0:
                continue
            worst = max(worst, float(np.max(np.abs(d2 - rhs)) / denom))
    return worst


@dataclass
class SpectralReport:
    """Bound-state and threshold diagnostics for one potential."""

    bound_per_l: tuple
    total_bound: int
    resonance_score: float
    h2_ok: bool
    generic_ok: bool


def check_spectrum(potential: Potential, rgrid: RadialGrid, L: int = 2,
                   resonance_threshold: float = 0.05) -> SpectralReport:
    """Count bound states per channel and score zero-energy resonances.

    The zero-energy regular solution is marched across the grid.  Its
    interior node count equals the number of bound states in that channel;
    if the solution is still heading for a zero beyond the matching radius
    (u u' < 0 there), one more is counted.  The s-wave resonance score
    |R u'(R) / u(R)| vanishes exactly when a zero-energy resonance sits at
    threshold; scores below resonance_threshold flag the potential as
    non-generic.
    """
    rv = potential.support_radius
    R = rv + 4.0
    imatch = int(np.argmin(np.abs(rgrid.r - R)))
    counts = []
    score = np.inf
    for l in range(L + 1):
        u, up = _march_radial(potential, l, np.zeros(1), rgrid)
        u, up = u[0], up[0]
        seg = u[: imatch + 1]
        nodes = int(np.sum(np.sign(seg[1:]) * np.sign(seg[:-1]) < 0))
        extra = 1 if u[imatch] * up[imatch] < 0 else 0
        counts.append(nodes + extra)
        if l == 0:
            if u[imatch] == 0:
                score = 0.0
            else:
                score = float(abs(rgrid.r[imatch] * up[imatch] / u[imatch]))
    total = int(sum(counts))
    return SpectralReport(
        bound_per_l=tuple(counts), total_bound=total,
        resonance_score=score, h2_ok=(total == 0),
        generic_ok=(score >= resonance_threshold),
    )


def distorted_plane_wave(table: ScatteringTable, k_index: int,
                         L: int | None = None) -> AxisymmetricField:
    """Generalized plane wave with momentum k e_z as a channel expansion.

    e(x; k e_z) = sum_l i^l (2l+1) e^{i delta_l} (u_l(k, r) / (k r)) P_l(mu).
    With V = 0 this is the Rayleigh expansion of exp(i k z) truncated at L.
    """
    if L is None:
        L = table.L
    if L > table.L:
        raise ConfigurationError(f"table only carries channels up to {table.L}")
    k = table.kgrid.k[k_index]
    ch = np.empty((L + 1, table.rgrid.n_r), dtype=complex)
    for l in range(L + 1):
        radial = table.u[l, k_index] / (k * table.rgrid.r)
        ch[l] = (1j ** l) * (2 * l + 1) * np.exp(1j * table.delta[l, k_index]) * radial
    return AxisymmetricField(table.rgrid, ch)


def completeness_defect(table: ScatteringTable,
                        sigmas=(1.4, 2.0, 3.0)) -> float:
    """Worst Plancherel defect over a family of channel-pure Gaussian packets.

    For each channel l and width sigma, transforms r^l exp(-r^2 / 2 sigma^2)
    and reports max |  ||f||^2 - ||f#||^2 | / ||f||^2.  A clean table built on
    an adequate grid keeps this at quadrature-error level.
    """
    from . import transform  # local import; transform sits above this module
    from .grids import inner_product, spectral_inner_product

    worst = 0.0
    r = table.rgrid.r
    for l in range(table.L + 1):
        for sigma in sigmas:
            ch = np.zeros((l + 1, table.rgrid.n_r), dtype=complex)
            ch[l] = r ** l * np.exp(-(r ** 2) / (2.0 * sigma ** 2))
            f = AxisymmetricField(table.rgrid, ch)
            F = transform.forward(f, table)
            n2 = inner_product(f, f).real
            m2 = spectral_inner_product(F, F).real
            worst = max(worst, abs(n2 - m2) / n2)
    return float(worst)
