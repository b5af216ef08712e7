"""Discretized inhomogeneous spin ensembles.

An ensemble is a set of bins.  Each bin stands for ``weight`` identical spins
with one detuning ``delta`` and one single-spin coupling ``g`` (both rad/us),
carrying a spin-1/2 Bloch vector.  The collective coupling is the weighted RMS
``g_ens = sqrt(sum w g**2)``.

Grid sampling (the default) places detunings on equal-probability quantiles of
the truncated lineshape and builds a product grid with a set of coupling
classes, so that every detuning carries the full coupling distribution.  This
keeps the echo noise floor low at a few thousand bins.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .errors import ValidationError

LINESHAPES = ("lorentzian", "gaussian")
COUPLING_DISTS = ("uniform", "annulus")
SAMPLINGS = ("grid", "random")

_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class SpinBin:
    """One sub-population of the ensemble (single-bin view)."""

    detuning: float
    coupling: float
    weight: float
    sx: float = 0.0
    sy: float = 0.0
    sz: float = -0.5

    def __post_init__(self):
        if not self.weight > 0:
            raise ValidationError("must be > 0", "weight")
        if not self.coupling >= 0:
            raise ValidationError("must be >= 0", "coupling")
        if math.sqrt(self.sx ** 2 + self.sy ** 2 + self.sz ** 2) > 0.5 + 1e-9:
            raise ValidationError("Bloch vector longer than 1/2", "bloch")

    @property
    def bloch(self):
        return (self.sx, self.sy, self.sz)


@dataclass(frozen=True)
class EnsembleSpec:
    """Recipe for :func:`build_ensemble`.  Rates are angular (rad/us).

    ``truncation`` is the half-width of the detuning window in units of the
    FWHM ``linewidth``.  ``edge_taper`` rolls the weights off with a cos**2
    profile over that outer fraction of the window, which suppresses ringing
    from a hard band edge.  The total spin number is set either by ``g_ens``
    (collective coupling of the untruncated ensemble) or by ``n_spins``; with
    neither, every bin has weight 1.  Bins keep the spectral density of the
    untruncated line, so a truncated ensemble carries only the in-band share
    of ``g_ens**2``.
    """

    n_bins: int
    linewidth: float = 0.0
    lineshape: str = "lorentzian"
    truncation: float = 5.0
    edge_taper: float = 0.0
    coupling_dist: str = "uniform"
    g_min: float = 1.0
    g_max: float = 1.0
    coupling_classes: int = 1
    g_ens: float | None = None
    n_spins: float | None = None
    T1: float = math.inf
    T2: float = math.inf
    polarization: float = 1.0
    sampling: str = "grid"
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n_bins, (int, np.integer)) or self.n_bins < 1:
            raise ValidationError("must be an integer >= 1", "n_bins")
        if not (self.linewidth >= 0 and math.isfinite(self.linewidth)):
            raise ValidationError("must be finite and >= 0", "linewidth")
        if self.lineshape not in LINESHAPES:
            raise ValidationError(f"must be one of {LINESHAPES}", "lineshape")
        if not (self.truncation > 0 and math.isfinite(self.truncation)):
            raise ValidationError("must be finite and > 0", "truncation")
        if not 0 <= self.edge_taper <= 1:
            raise ValidationError("must lie in [0, 1]", "edge_taper")
        if self.coupling_dist not in COUPLING_DISTS:
            raise ValidationError(f"must be one of {COUPLING_DISTS}", "coupling_dist")
        if not 0 <= self.g_min <= self.g_max or not math.isfinite(self.g_max):
            raise ValidationError("need 0 <= g_min <= g_max < inf", "g_min")
        if self.coupling_dist == "annulus" and not 0 < self.g_min < self.g_max:
            raise ValidationError("annulus needs 0 < g_min < g_max", "g_min")
        if not isinstance(self.coupling_classes, (int, np.integer)) or self.coupling_classes < 1:
            raise ValidationError("must be an integer >= 1", "coupling_classes")
        if self.sampling == "grid" and self.n_bins % self.coupling_classes:
            raise ValidationError("n_bins must be a multiple of coupling_classes", "coupling_classes")
        if self.g_ens is not None and self.n_spins is not None:
            raise ValidationError("give g_ens or n_spins, not both", "g_ens")
        if self.g_ens is not None and not (self.g_ens >= 0 and math.isfinite(self.g_ens)):
            raise ValidationError("must be finite and >= 0", "g_ens")
        if self.n_spins is not None and not (self.n_spins > 0 and math.isfinite(self.n_spins)):
            raise ValidationError("must be finite and > 0", "n_spins")
        for name in ("T1", "T2"):
            if not getattr(self, name) > 0:
                raise ValidationError("must be > 0 or inf", name)
        if not -1 <= self.polarization <= 1:
            raise ValidationError("must lie in [-1, 1]", "polarization")
        if self.sampling not in SAMPLINGS:
            raise ValidationError(f"must be one of {SAMPLINGS}", "sampling")

    @property
    def band_halfwidth(self):
        return self.truncation * self.linewidth

    def mean_square_coupling(self):
        """<g**2> of the discretized coupling distribution."""
        g, mass = coupling_classes(self)
        return float(np.sum(mass * g ** 2))

    def spin_number(self):
        """Effective spin number N of the untruncated ensemble."""
        if self.g_ens is not None:
            msq = self.mean_square_coupling()
            if msq == 0:
                raise ValidationError("g_ens > 0 needs nonzero couplings", "g_ens")
            return self.g_ens ** 2 / msq
        if self.n_spins is not None:
            return float(self.n_spins)
        return float(self.n_bins)


@dataclass
class Ensemble:
    """Struct-of-arrays ensemble.  Index or iterate to get :class:`SpinBin` views."""

    detuning: np.ndarray
    coupling: np.ndarray
    weight: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    T1: float = math.inf
    T2: float = math.inf
    polarization: float = 1.0
    spec: EnsembleSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        n = len(self.detuning)
        for name in ("detuning", "coupling", "weight", "sx", "sy", "sz"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValidationError("length mismatch", name)
            setattr(self, name, arr)
        if np.any(~(self.weight > 0)):
            raise ValidationError("must be > 0", "weight")
        if np.any(~(self.coupling >= 0)):
            raise ValidationError("must be >= 0", "coupling")

    def __len__(self):
        return len(self.detuning)

    def __getitem__(self, j):
        return SpinBin(self.detuning[j], self.coupling[j], self.weight[j],
                       self.sx[j], self.sy[j], self.sz[j])

    def __iter__(self):
        return (self[j] for j in range(len(self)))

    @property
    def bins(self):
        return list(self)

    @property
    def s_minus(self):
        return self.sx - 1j * self.sy

    @property
    def sz_eq(self):
        return -0.5 * self.polarization

    def bloch_norm(self):
        return np.sqrt(self.sx ** 2 + self.sy ** 2 + self.sz ** 2)

    def copy(self):
        return Ensemble(self.detuning.copy(), self.coupling.copy(), self.weight.copy(),
                        self.sx.copy(), self.sy.copy(), self.sz.copy(),
                        self.T1, self.T2, self.polarization, self.spec)

    def with_state(self, s_minus, sz):
        out = self.copy()
        out.sx = np.ascontiguousarray(s_minus.real, dtype=float)
        out.sy = np.ascontiguousarray(-s_minus.imag, dtype=float)
        out.sz = np.ascontiguousarray(sz, dtype=float)
        return out

    def with_couplings_scaled(self, factor):
        out = self.copy()
        out.coupling = out.coupling * float(factor)
        return out

    @classmethod
    def from_bins(cls, bins, T1=math.inf, T2=math.inf, polarization=1.0):
        bins = list(bins)
        cols = np.array([(b.detuning, b.coupling, b.weight, b.sx, b.sy, b.sz) for b in bins],
                        dtype=float).reshape(-1, 6)
        return cls(*cols.T, T1=T1, T2=T2, polarization=polarization)


@dataclass(frozen=True)
class EnsembleQuantities:
    g_ens: float
    n_eff: float
    cooperativity: float


# -- lineshapes ---------------------------------------------------------------

def lineshape_cdf(x, linewidth, lineshape="lorentzian"):
    x = np.asarray(x, dtype=float)
    if lineshape == "lorentzian":
        return 0.5 + np.arctan(2.0 * x / linewidth) / np.pi
    return special.ndtr(x / (linewidth * _FWHM_TO_SIGMA))


def lineshape_ppf(u, linewidth, lineshape="lorentzian"):
    u = np.asarray(u, dtype=float)
    if lineshape == "lorentzian":
        return 0.5 * linewidth * np.tan(np.pi * (u - 0.5))
    return linewidth * _FWHM_TO_SIGMA * special.ndtri(u)


def lineshape_pdf(x, linewidth, lineshape="lorentzian"):
    x = np.asarray(x, dtype=float)
    if lineshape == "lorentzian":
        hw = 0.5 * linewidth
        return hw / (np.pi * (x ** 2 + hw ** 2))
    sigma = linewidth * _FWHM_TO_SIGMA
    return np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


# -- coupling distributions ---------------------------------------------------

def _check_annulus(g_min, g_max):
    if not g_min > 0:
        raise ValidationError("annulus needs g_min > 0", "g_min")
    if not g_max > g_min:
        raise ValidationError("annulus needs g_max > g_min", "g_max")


def annulus_coupling_pdf(g, g_min, g_max):
    """Density of couplings for spins spread uniformly over a 2-D annulus
    around a thin wire, where g is proportional to 1/r: pdf(g) ~ g**-3 on
    [g_min, g_max] and zero elsewhere.
    """
    _check_annulus(g_min, g_max)
    g = np.asarray(g, dtype=float)
    norm = 2.0 / (g_min ** -2 - g_max ** -2)
    inside = (g >= g_min) & (g <= g_max)
    with np.errstate(divide="ignore"):
        return np.where(inside, norm * np.where(inside, g, 1.0) ** -3, 0.0)


def annulus_cdf(g, g_min, g_max):
    _check_annulus(g_min, g_max)
    g = np.clip(np.asarray(g, dtype=float), g_min, g_max)
    return (g_min ** -2 - g ** -2) / (g_min ** -2 - g_max ** -2)


def annulus_ppf(u, g_min, g_max):
    _check_annulus(g_min, g_max)
    u = np.asarray(u, dtype=float)
    return (g_min ** -2 - u * (g_min ** -2 - g_max ** -2)) ** -0.5


def annulus_mean(g_min, g_max):
    _check_annulus(g_min, g_max)
    return 2.0 * (1.0 / g_min - 1.0 / g_max) / (g_min ** -2 - g_max ** -2)


def sample_annulus(n, g_min, g_max, rng):
    return annulus_ppf(rng.random(n), g_min, g_max)


def coupling_classes(spec):
    """Representative couplings and their probability masses for grid mode.

    Annulus classes are log-spaced with geometric midpoints and carry their
    true probability mass.  With a g**-3 density this gives every class a
    comparable share of g**2, so the strongly coupled tail is resolved.
    A single annulus class sits at the RMS coupling.
    """
    m = spec.coupling_classes
    if spec.coupling_dist == "uniform":
        if m == 1 or spec.g_min == spec.g_max:
            g = np.full(m, 0.5 * (spec.g_min + spec.g_max))
        else:
            g = spec.g_min + (np.arange(m) + 0.5) / m * (spec.g_max - spec.g_min)
        return g, np.full(m, 1.0 / m)
    if m == 1:
        msq = 2.0 * math.log(spec.g_max / spec.g_min) / (spec.g_min ** -2 - spec.g_max ** -2)
        return np.array([math.sqrt(msq)]), np.array([1.0])
    edges = np.geomspace(spec.g_min, spec.g_max, m + 1)
    g = np.sqrt(edges[:-1] * edges[1:])
    mass = np.diff(annulus_cdf(edges, spec.g_min, spec.g_max))
    return g, mass


def _taper(delta, half, frac):
    if frac <= 0 or half <= 0:
        return np.ones_like(delta)
    x = np.abs(delta) / half
    t = np.ones_like(delta)
    sel = x > 1 - frac
    t[sel] = np.cos(0.5 * np.pi * (x[sel] - (1 - frac)) / frac) ** 2
    return t


# -- construction -------------------------------------------------------------

def build_ensemble(spec: EnsembleSpec) -> Ensemble:
    """Discretize ``spec`` into an :class:`Ensemble` with all spins at (0, 0, -p0/2)."""
    n = spec.n_bins
    n_spins = spec.spin_number()
    half = spec.band_halfwidth

    if spec.linewidth == 0:
        lo, hi, band_mass = 0.5, 0.5, 1.0
    else:
        lo = float(lineshape_cdf(-half, spec.linewidth, spec.lineshape))
        hi = float(lineshape_cdf(half, spec.linewidth, spec.lineshape))
        band_mass = hi - lo

    def detunings(u):
        if spec.linewidth == 0:
            return np.zeros_like(u)
        return lineshape_ppf(lo + u * (hi - lo), spec.linewidth, spec.lineshape)

    if spec.sampling == "grid":
        m = spec.coupling_classes
        nd = n // m
        d = detunings((np.arange(nd) + 0.5) / nd)
        g_cls, mass = coupling_classes(spec)
        delta = np.repeat(d, m)
        g = np.tile(g_cls, nd)
        w = np.tile(mass, nd) * (n_spins * band_mass / nd)
    else:
        rng = np.random.default_rng(spec.seed)
        delta = detunings(rng.random(n))
        if spec.coupling_dist == "annulus":
            g = sample_annulus(n, spec.g_min, spec.g_max, rng)
        else:
            g = spec.g_min + rng.random(n) * (spec.g_max - spec.g_min)
        w = np.full(n, n_spins * band_mass / n)
    w = w * _taper(delta, half, spec.edge_taper)
    keep = w > 0
    if not np.all(keep):
        raise ValidationError("edge taper leaves empty bins; lower edge_taper", "edge_taper")

    sz0 = -0.5 * spec.polarization
    return Ensemble(delta, g, w, np.zeros(n), np.zeros(n), np.full(n, sz0),
                    T1=spec.T1, T2=spec.T2, polarization=spec.polarization, spec=spec)


def _arrays(bins):
    if isinstance(bins, Ensemble):
        return bins.coupling, bins.weight
    bins = list(bins)
    g = np.array([b.coupling for b in bins], dtype=float)
    w = np.array([b.weight for b in bins], dtype=float)
    return g, w


def ensemble_quantities(bins, linewidth, kappa_tot) -> EnsembleQuantities:
    """Collective coupling, spin number and cooperativity C = 4 g_ens**2/(linewidth kappa_tot)."""
    if not linewidth > 0:
        raise ValidationError("must be > 0", "linewidth")
    if not kappa_tot > 0:
        raise ValidationError("must be > 0", "kappa_tot")
    g, w = _arrays(bins)
    g2 = math.fsum(w * g * g)
    return EnsembleQuantities(math.sqrt(g2), math.fsum(w), 4.0 * g2 / (linewidth * kappa_tot))


def nominal_cooperativity(spec: EnsembleSpec, kappa_tot):
    """Cooperativity of the untruncated ensemble described by ``spec``."""
    if spec.g_ens is not None:
        g2 = spec.g_ens ** 2
    else:
        g2 = spec.spin_number() * spec.mean_square_coupling()
    return 4.0 * g2 / (spec.linewidth * kappa_tot)


def spec_with(spec: EnsembleSpec, **changes) -> EnsembleSpec:
    return replace(spec, **changes)
