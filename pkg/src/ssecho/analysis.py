"""Scaling laws and fits: filter function, echo-train scaling (eta), STE law,
CW spectroscopy, inversion recovery, cooperativity from fields, and resonance
field versus angle.

Angles are in radians unless a name ends in ``_deg``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import FitError, InsufficientDataError, ValidationError

R2_WARN = 0.9
N_STARTS = 5


# -- closed-form models ------------------------------------------------------------

def filter_function(delta_omega, kappa_tot):
    """Resonator amplitude response (kappa/2)/sqrt(delta**2 + kappa**2/4)."""
    if not kappa_tot > 0:
        raise ValidationError("must be > 0", "kappa_tot")
    d = np.asarray(delta_omega, dtype=float)
    out = 0.5 * kappa_tot / np.sqrt(d ** 2 + 0.25 * kappa_tot ** 2)
    return float(out) if out.ndim == 0 else out


def ste_amplitude(beta1, beta2, beta3):
    """Stimulated-echo amplitude law sin(b1) sin(b2) sin(b3)."""
    return np.sin(beta1) * np.sin(beta2) * np.sin(beta3)


def predict_sse(a1, eta, beta1, beta2, n):
    """Echo train A_k = a1 * (eta sin b1 sin b2)**(k-1), k = 1..n."""
    if a1 < 0:
        raise ValidationError("must be >= 0", "a1")
    if eta < 0:
        raise ValidationError("must be >= 0", "eta")
    ratio = eta * math.sin(beta1) * math.sin(beta2)
    return [a1 * ratio ** k for k in range(n)]


def cooperativity_from_fields(a_sat, a_pol):
    """C = |a_sat|/|a_pol| - 1, the resonant matched-absorber relation."""
    if abs(a_pol) == 0:
        raise ValidationError("|a_pol| must be > 0", "a_pol")
    return abs(a_sat) / abs(a_pol) - 1.0


@dataclass(frozen=True)
class AngleModel:
    """Anisotropic gyromagnetic ratios (rad/us per mT), misalignment and
    cavity frequency (rad/us)."""

    gamma_c: float
    gamma_ab: float
    phi0_deg: float = 0.0
    omega0: float = 2 * math.pi * 6500.0

    def __post_init__(self):
        if not (self.gamma_c > 0 and self.gamma_ab > 0):
            raise ValidationError("gyromagnetic ratios must be > 0", "gamma")

    @classmethod
    def from_mhz(cls, gamma_c_mhz_per_mt, gamma_ab_mhz_per_mt, phi0_deg, f0_mhz):
        tp = 2 * math.pi
        return cls(tp * gamma_c_mhz_per_mt, tp * gamma_ab_mhz_per_mt, phi0_deg, tp * f0_mhz)

    def gamma_eff(self, phi_deg):
        x = np.radians(np.asarray(phi_deg, dtype=float) - self.phi0_deg)
        return np.sqrt((self.gamma_c * np.cos(x)) ** 2 + (self.gamma_ab * np.sin(x)) ** 2)


def resonance_field(phi_deg, model: AngleModel):
    """Resonance field in mT at field angle ``phi_deg`` from the c axis."""
    b = model.omega0 / model.gamma_eff(phi_deg)
    return float(b) if np.ndim(b) == 0 else b


# -- linear fits ----------------------------------------------------------------------

@dataclass(frozen=True)
class LinearFit:
    slope: float
    r2: float
    stderr: float
    n: int


def fit_linear_through_origin(x, y) -> LinearFit:
    """Least squares y = slope * x; R**2 taken about zero."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise InsufficientDataError("need >= 3 paired points")
    sxx = float(np.dot(x, x))
    if sxx == 0:
        raise InsufficientDataError("all x are zero; slope undefined")
    slope = float(np.dot(x, y)) / sxx
    resid = y - slope * x
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.dot(y, y))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    stderr = math.sqrt(ss_res / (x.size - 1) / sxx)
    if r2 < R2_WARN:
        warnings.warn(f"linear fit R^2 = {r2:.3f} below {R2_WARN}", RuntimeWarning, stacklevel=2)
    return LinearFit(slope, r2, stderr, int(x.size))


@dataclass(frozen=True)
class EtaFit:
    eta: float
    residual_rms: float
    predicted: tuple
    ratio: float
    n_used: int
    metric: str = "peak"


def _usable(records, metric):
    amps = []
    for r in records:
        if r.flagged:
            continue
        a = r.amplitude(metric)
        if a > 0:
            amps.append((r.k, a))
    return amps


def fit_eta(records, beta1, beta2, metric="peak", weights=None) -> EtaFit:
    """Fit log A_k = c + (k-1) log(eta sin b1 sin b2) to unflagged echoes.

    ``weights`` are optional inverse variances of log A_k, one per record.
    """
    pairs = _usable(records, metric)
    if len(pairs) < 3:
        raise InsufficientDataError(f"need >= 3 usable echoes, got {len(pairs)}")
    k = np.array([p[0] for p in pairs], dtype=float)
    y = np.log([p[1] for p in pairs])
    w = np.ones_like(y) if weights is None else np.asarray(
        [wt for r, wt in zip(records, weights) if not r.flagged and r.amplitude(metric) > 0], float)
    A = np.column_stack([np.ones_like(k), k - 1])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    resid = y - A @ coef
    sb = math.sin(beta1) * math.sin(beta2)
    if sb == 0:
        raise ValidationError("sin(beta1) sin(beta2) is zero", "beta")
    ratio = math.exp(coef[1])
    pred = tuple(np.exp(A @ coef))
    return EtaFit(ratio / abs(sb), float(np.sqrt(np.mean(resid ** 2))), pred, ratio, len(pairs), metric)


@dataclass(frozen=True)
class PooledEtaFit:
    eta: float
    per_dataset: tuple
    spread: float
    residual_rms: float


def fit_eta_pooled(datasets, metric="peak") -> PooledEtaFit:
    """One eta for several trains.  ``datasets`` is a list of
    (records, beta1, beta2); each train keeps its own intercept."""
    rows, ys, offs = [], [], []
    singles = []
    n = len(datasets)
    for d, (records, b1, b2) in enumerate(datasets):
        singles.append(fit_eta(records, b1, b2, metric).eta)
        lsb = math.log(abs(math.sin(b1) * math.sin(b2)))
        for k, amp in _usable(records, metric):
            row = np.zeros(n + 1)
            row[d] = 1.0
            row[n] = k - 1
            rows.append(row)
            ys.append(math.log(amp) - (k - 1) * lsb)
    A = np.array(rows)
    y = np.array(ys)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    singles = np.array(singles)
    spread = float((singles.max() - singles.min()) / singles.mean())
    return PooledEtaFit(math.exp(coef[n]), tuple(singles), spread, float(np.sqrt(np.mean(resid ** 2))))


# -- nonlinear fits ---------------------------------------------------------------------

def _lm_multistart(residual, x0, seed=0, scale=0.3, max_nfev=4000):
    """Levenberg-Marquardt from ``x0`` and perturbed copies; keep the lowest cost."""
    rng = np.random.default_rng(seed)
    x0 = np.asarray(x0, dtype=float)
    best = None
    for i in range(N_STARTS):
        start = x0 if i == 0 else x0 + scale * rng.standard_normal(x0.size)
        try:
            res = optimize.least_squares(residual, start, method="lm", max_nfev=max_nfev,
                                         xtol=1e-15, ftol=1e-15, gtol=1e-15)
        except (ValueError, FloatingPointError):
            continue
        if not np.all(np.isfinite(res.x)):
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise FitError("all starts failed")
    if best.status <= 0:
        raise FitError(f"no convergence: {best.message}", best=best.x)
    return best


def _covariance(res, n_obs):
    J = res.jac
    dof = max(1, n_obs - J.shape[1])
    s2 = 2.0 * res.cost / dof
    try:
        return np.linalg.pinv(J.T @ J) * s2
    except np.linalg.LinAlgError:
        return np.full((J.shape[1], J.shape[1]), np.nan)


def cw_model(delta_s, g_ens, gamma, kappa):
    """kappa_tot(delta_s) = kappa + g**2 Gamma / (delta_s**2 + Gamma**2/4)."""
    d = np.asarray(delta_s, dtype=float)
    return kappa + g_ens ** 2 * gamma / (d ** 2 + 0.25 * gamma ** 2)


@dataclass(frozen=True)
class CwFit:
    g_ens: float
    gamma: float
    kappa: float
    cov_diag: tuple
    residual_rms: float
    flags: tuple = ()


def fit_cw_sweep(delta_s, kappa_obs, seed=0) -> CwFit:
    """Fit the spin-loaded cavity linewidth versus spin detuning (rad/us).

    Parameters are fitted as logarithms, so they stay positive, and the
    fit is done in units of the data scale, so it is scale-equivariant.
    """
    d = np.asarray(delta_s, dtype=float)
    k = np.asarray(kappa_obs, dtype=float)
    if d.shape != k.shape or d.size < 5:
        raise InsufficientDataError("need >= 5 points")
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(k))):
        raise ValidationError("non-finite data", "kappa_obs")
    ys = float(np.max(np.abs(k)))
    if ys == 0:
        raise InsufficientDataError("all observations are zero")
    span = float(np.ptp(k))
    if span <= 1e-12 * ys:
        return CwFit(0.0, math.nan, float(np.mean(k)), (0.0, math.nan, float(np.var(k) / k.size)),
                     float(np.std(k)), ("gamma_unidentifiable",))
    ds = float(np.max(np.abs(d))) or 1.0
    kap0 = float(np.min(k))
    peak = float(np.max(k)) - kap0
    # half-maximum width as the linewidth guess
    above = d[k - kap0 >= 0.5 * peak]
    gam0 = max(float(np.ptp(above)), 2 * float(np.min(np.diff(np.sort(d))))) if above.size else ds
    g20 = max(peak, 1e-12 * ys) * gam0 / 4.0
    x0 = np.log([g20 / (ys * ds), gam0 / ds, max(kap0, 1e-6 * ys) / ys])

    def resid(x):
        g2, gam, kap = np.exp(x)
        return (kap + g2 * gam / ((d / ds) ** 2 + 0.25 * gam ** 2)) - k / ys

    res = _lm_multistart(resid, x0, seed)
    g2, gam, kap = np.exp(res.x)
    cov = _covariance(res, d.size)
    # log-parameter covariance -> parameter variance (delta method)
    g_ens = math.sqrt(g2 * ys * ds)
    vals = np.array([g_ens, gam * ds, kap * ys])
    dlog = np.diag(cov)
    var = (vals ** 2) * dlog * np.array([0.25, 1.0, 1.0])
    flags = []
    if g2 * gam / (0.25 * gam ** 2) < 1e-6 * kap:
        flags.append("gamma_unidentifiable")
    rms = float(np.sqrt(np.mean(resid(res.x) ** 2))) * ys
    return CwFit(float(vals[0]), float(vals[1]), float(vals[2]), tuple(float(v) for v in var), rms,
                 tuple(flags))


RECOVERY_MODELS = ("mono", "bi")


@dataclass(frozen=True)
class RecoveryFit:
    model: str
    amplitudes: tuple
    t1: tuple
    baseline: float
    cov_diag: tuple
    residual_rms: float
    flags: tuple = ()


def _recovery_basis(t, t1s):
    cols = [1.0 - 2.0 * np.exp(-t / tc) for tc in t1s]
    cols.append(np.ones_like(t))
    return np.column_stack(cols)


def recovery_model(t, amplitudes, t1, baseline):
    """Inversion recovery B + sum_i A_i (1 - 2 exp(-t/T1_i))."""
    t = np.asarray(t, dtype=float)
    return baseline + sum(a * (1.0 - 2.0 * np.exp(-t / tc)) for a, tc in zip(amplitudes, t1))


def fit_recovery(t, signal, model="mono", seed=0) -> RecoveryFit:
    """Inversion-recovery fit in the units of ``t``.

    Amplitudes and baseline enter linearly and are eliminated by a linear
    solve for each trial set of time constants (variable projection); only
    the log time constants are searched nonlinearly.  For ``bi`` the faster
    constant is reported first.
    """
    if model not in RECOVERY_MODELS:
        raise ValidationError(f"must be one of {RECOVERY_MODELS}", "model")
    t = np.asarray(t, dtype=float)
    y = np.asarray(signal, dtype=float)
    n_exp = 1 if model == "mono" else 2
    n_free = 2 * n_exp + 1
    if t.shape != y.shape or t.size < 2 * n_free:
        raise InsufficientDataError(f"need >= {2 * n_free} samples")
    if np.any(np.diff(t) <= 0):
        raise ValidationError("times must be strictly increasing", "t")
    ys = float(np.max(np.abs(y))) or 1.0
    yn = y / ys
    if float(np.ptp(y)) <= 1e-12 * ys:
        return RecoveryFit(model, (0.0,) * n_exp, (math.nan,) * n_exp, float(np.mean(y)),
                           (math.nan,) * (2 * n_exp + 1), float(np.std(y)), ("t1_unidentifiable",))

    def project(logt):
        basis = _recovery_basis(t, np.exp(logt))
        coef, *_ = np.linalg.lstsq(basis, yn, rcond=None)
        return coef, basis

    def resid(logt):
        coef, basis = project(logt)
        return basis @ coef - yn

    span = t[-1] - t[0]
    pos = t[t > 0]
    t_lo = pos[0] if pos.size else span / t.size
    if n_exp == 1:
        x0 = np.log([span / 3.0])
    else:
        x0 = np.log([math.sqrt(t_lo * span / 3.0) / 3.0, span / 3.0])
        # coarse grid seed for the pair of constants
        grid = np.geomspace(t_lo / 2, 2 * span, 24)
        best = None
        for i, a in enumerate(grid):
            for b in grid[i + 1:]:
                c = float(np.sum(resid(np.log([a, b])) ** 2))
                if best is None or c < best[0]:
                    best = (c, a, b)
        x0 = np.log([best[1], best[2]])
    res = _lm_multistart(resid, x0, seed, scale=0.2)
    order = np.argsort(res.x)
    logt = res.x[order]
    coef, basis = project(logt)
    t1 = np.exp(logt)
    # full-parameter covariance from the Jacobian of the joint model
    params = np.concatenate([coef[:-1], t1, coef[-1:]])

    def full(p):
        return recovery_model(t, p[:n_exp], p[n_exp:2 * n_exp], p[-1])

    J = optimize.approx_fprime(params, full, 1e-8 * np.maximum(1.0, np.abs(params)))
    r = full(params) - yn
    dof = max(1, t.size - params.size)
    cov = np.linalg.pinv(J.T @ J) * float(r @ r) / dof
    scale = np.concatenate([np.full(n_exp, ys), np.ones(n_exp), [ys]])
    var = np.diag(cov) * scale ** 2
    flags = []
    if np.any(np.abs(coef[:-1]) < 1e-9):
        flags.append("t1_unidentifiable")
    return RecoveryFit(model, tuple(float(a * ys) for a in coef[:-1]), tuple(float(x) for x in t1),
                       float(coef[-1] * ys), tuple(float(v) for v in var),
                       float(np.sqrt(np.mean(r ** 2))) * ys, tuple(flags))
