"""Quantitative checks: kernel-norm decay laws, Gaussian bounds, volume growth.

Every inequality here carries an unquantified constant in the theory, so the
tests target EXPONENTS: norms are swept over t, fitted on log-log axes by
least squares, and the fitted slope is compared against the predicted rate.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .group import GridFunction, GridSpec, homogeneous_norm, lp_norm
from .spectral import SpectralDecomposition, delta_function, heat_kernel_column
from .stencils import apply_multi_index


@dataclass
class DecayFit:
    """Least-squares slope of log(norm) against log(t), with 1-sigma half-width."""

    t_samples: np.ndarray
    norms: np.ndarray
    fitted_slope: float
    slope_ci: float
    residual: float


def fit_loglog(t_samples: Sequence[float], norms: Sequence[float]) -> DecayFit:
    t = np.asarray(t_samples, dtype=float)
    y = np.asarray(norms, dtype=float)
    if t.size < 2:
        raise ConfigError("need at least two samples to fit a slope")
    if (t <= 0).any() or (y <= 0).any():
        raise ConfigError("log-log fit needs positive samples and norms")
    x = np.log(t)
    ly = np.log(y)
    slope, intercept = np.polyfit(x, ly, 1)
    pred = slope * x + intercept
    resid = ly - pred
    if t.size > 2:
        sigma2 = float(resid @ resid) / (t.size - 2)
        ci = math.sqrt(sigma2 / float(((x - x.mean()) ** 2).sum()))
    else:
        ci = 0.0
    return DecayFit(
        t_samples=t,
        norms=y,
        fitted_slope=float(slope),
        slope_ci=float(ci),
        residual=float(np.abs(resid).max()),
    )


def resolvable_t_window(spec: GridSpec) -> tuple[float, float]:
    """[h^2, (L/4)^2]: below, the kernel is unresolved; above, the boundary bites."""
    h = spec.spacing
    return h * h, (spec.extent / 4.0) ** 2


def check_t_window(spec: GridSpec, t_values: Sequence[float]) -> None:
    """Warn outside the advisory window, refuse far outside it."""
    lo, hi = resolvable_t_window(spec)
    t = np.asarray(t_values, dtype=float)
    if (t < lo / 8.0).any() or (t > (spec.extent / 2.0) ** 2).any():
        raise ConfigError(
            f"t range {t.min():.3g}..{t.max():.3g} is far outside the resolvable "
            f"window [{lo:.3g}, {hi:.3g}] of this grid"
        )
    if (t < lo).any() or (t > hi).any():
        warnings.warn(
            f"t range {t.min():.3g}..{t.max():.3g} leaves the advisory resolvable "
            f"window [{lo:.3g}, {hi:.3g}]; fitted exponents may carry resolution "
            "or boundary bias",
            RuntimeWarning,
        )


def kernel_norm_decay(dec: SpectralDecomposition, s: float, p: int,
                      t_values: Sequence[float]) -> DecayFit:
    """Fit ||J^s h_t||_p over t; predicted slopes -s (p=1), -s - N/4 (p=2).

    N is the homogeneous dimension (4 for heisenberg, dims for euclidean).
    """
    if p not in (1, 2):
        raise ConfigError(f"p must be 1 or 2, got {p}")
    if s <= 0:
        raise ConfigError("s must be > 0")
    check_t_window(dec.spec, t_values)
    delta = delta_function(dec.spec)
    lam = dec.eigenvalues
    svals = np.where(lam > 0, lam, 1.0) ** s
    svals[lam <= 0] = 0.0
    norms = []
    for t in t_values:
        col = dec.apply_values(svals * np.exp(-t * lam), delta)
        norms.append(lp_norm(col, p))
    return fit_loglog(t_values, norms)


def kernel_decay_target_slope(spec: GridSpec, s: float, p: int) -> float:
    N = 4 if spec.mode == "heisenberg" else spec.dims
    if p == 1:
        return -s
    return -s - N / 4.0


# ---------------------------------------------------------------------------
# Gaussian upper bound
# ---------------------------------------------------------------------------

@dataclass
class GaussianBoundResult:
    t_values: tuple
    log_gaps: np.ndarray          # per t: max over nodes of the log-gap statistic
    spread: float                 # max - min over the t set
    skipped: tuple                # per t: nonpositive kernel values skipped
    stable: bool                  # finite and spread < 2 natural-log units


def _displacements(spec: GridSpec) -> np.ndarray:
    """Node displacement from the kernel center, minimal-image on the torus."""
    coords = spec.node_coordinates()
    center = coords[spec.center_index()]
    rel = coords - center
    if spec.periodic:
        period = 2.0 * spec.extent
        rel = (rel + spec.extent) % period - spec.extent
    return rel


def _norm_for_mode(spec: GridSpec, rel: np.ndarray) -> np.ndarray:
    if spec.mode == "heisenberg":
        return homogeneous_norm(rel)
    return np.sqrt((rel ** 2).sum(axis=1))


def ball_volume(spec_mode: str, r: float, dims: int = 3,
                unit_volume: float | None = None) -> float:
    """V(r): homogeneous r^4 scaling on heisenberg, euclidean ball otherwise."""
    if spec_mode == "heisenberg":
        v1 = heisenberg_unit_ball_volume() if unit_volume is None else unit_volume
        return v1 * r ** 4
    cd = math.pi ** (dims / 2.0) / math.gamma(dims / 2.0 + 1.0)
    return cd * r ** dims


_UNIT_BALL_CACHE: dict = {}


def heisenberg_unit_ball_volume(lattice_h: float = 0.02) -> float:
    """V(1) for the homogeneous-norm unit ball, by lattice count."""
    key = round(lattice_h, 12)
    if key not in _UNIT_BALL_CACHE:
        _UNIT_BALL_CACHE[key] = measure_ball_volumes([1.0], lattice_h)[0]
    return _UNIT_BALL_CACHE[key]


def gaussian_bound_check(dec: SpectralDecomposition, t_values: Sequence[float],
                         epsilon: float, stability_window: float = 2.0) -> GaussianBoundResult:
    """Log-gap statistic for h_t(x) <= C [V(sqrt t)]^{-1} exp(-|x|^2/(4(1+eps)t)).

    G(t) = max_x [log h_t(x) + |x|^2/(4(1+eps)t) + log V(sqrt t)] over interior
    nodes carrying genuine kernel signal; a finite, t-stable G certifies the
    bound's shape.  Nonpositive values and values below the roundoff floor of
    the spectral sum (1e3 * eps_machine * peak) are skipped and counted: where
    the true kernel underflows, the column holds noise, not kernel.
    epsilon must be > 0 (the bound genuinely fails at epsilon = 0).
    """
    if epsilon <= 0:
        raise ConfigError("epsilon must be > 0")
    spec = dec.spec
    check_t_window(spec, t_values)
    rel = _displacements(spec)
    dist = _norm_for_mode(spec, rel)
    if spec.periodic:
        interior = np.full(spec.n_nodes, True)
    else:
        coords = spec.node_coordinates()
        interior = (np.abs(coords) < spec.extent - 0.5 * spec.spacing).all(axis=1)
    gaps, skipped = [], []
    for t in t_values:
        col = heat_kernel_column(dec, t).values
        floor = 1e3 * np.finfo(float).eps * col.max()
        pos = interior & (col > floor)
        skipped.append(int(interior.sum() - pos.sum()))
        g = (
            np.log(col[pos])
            + dist[pos] ** 2 / (4.0 * (1.0 + epsilon) * t)
            + np.log(ball_volume(spec.mode, math.sqrt(t), spec.dims))
        )
        gaps.append(float(g.max()))
    gaps = np.array(gaps)
    spread = float(gaps.max() - gaps.min())
    return GaussianBoundResult(
        t_values=tuple(float(t) for t in t_values),
        log_gaps=gaps,
        spread=spread,
        skipped=tuple(skipped),
        stable=bool(np.isfinite(gaps).all() and spread < stability_window),
    )


# ---------------------------------------------------------------------------
# volume growth
# ---------------------------------------------------------------------------

def measure_ball_volumes(r_values: Sequence[float], lattice_h: float,
                         norm: str = "heisenberg") -> np.ndarray:
    """Lebesgue volume of norm-balls by lattice count times h^3."""
    r = np.asarray(sorted(r_values), dtype=float)
    if (r <= 0).any():
        raise ConfigError("radii must be positive")
    rmax = r.max()
    # quartic norm < r forces |x1|,|x2| <= r and |x3| <= r^2/4
    r3max = rmax * rmax / 4.0 if norm == "heisenberg" else rmax
    ax12 = np.arange(-rmax, rmax + lattice_h / 2.0, lattice_h)
    ax3 = np.arange(-r3max, r3max + lattice_h / 2.0, lattice_h)
    counts = np.zeros(r.size, dtype=np.int64)
    x2g, x3g = np.meshgrid(ax12, ax3, indexing="ij")
    for x1 in ax12:  # slab at a time to bound memory
        if norm == "heisenberg":
            pts = np.stack(
                [np.full_like(x2g, x1), x2g, x3g], axis=-1
            ).reshape(-1, 3)
            d = homogeneous_norm(pts)
        elif norm == "euclidean":
            d = np.sqrt(x1 * x1 + x2g ** 2 + x3g ** 2).ravel()
        else:
            raise ConfigError(f"unknown norm {norm!r}")
        counts += np.searchsorted(np.sort(d), r, side="left")
    return counts * lattice_h ** 3


def volume_growth_fit(r_values: Sequence[float], lattice_h: float,
                      norm: str = "heisenberg", min_points: int = 1000) -> DecayFit:
    """Fit log V(r) against log r; slope targets 4 (heisenberg) or 3 (euclidean)."""
    vols = measure_ball_volumes(r_values, lattice_h, norm=norm)
    smallest = vols.min() / lattice_h ** 3
    if smallest < min_points:
        raise ConfigError(
            f"smallest ball holds only {int(smallest)} lattice points "
            f"(< {min_points}); decrease lattice_h"
        )
    return fit_loglog(sorted(r_values), vols)


# ---------------------------------------------------------------------------
# weighted kernel norms
# ---------------------------------------------------------------------------

def weighted_kernel_norm(dec: SpectralDecomposition, t: float, alpha: int,
                         index: Sequence[str], p: int) -> float:
    """||(1 + |x|)^alpha X^I h_t||_p with |I| <= 1, p in {1, 2}, alpha in {0, 1, 2}."""
    if len(index) > 1:
        raise ConfigError("|I| >= 2 is out of scope for weighted kernel norms")
    if p not in (1, 2):
        raise ConfigError(f"p must be 1 or 2, got {p}")
    if alpha not in (0, 1, 2):
        raise ConfigError(f"alpha must be 0, 1 or 2, got {alpha}")
    col = heat_kernel_column(dec, t)
    v = apply_multi_index(index, col)
    spec = dec.spec
    dist = _norm_for_mode(spec, _displacements(spec))
    weighted = GridFunction(spec, (1.0 + dist) ** alpha * v.values)
    return lp_norm(weighted, p)


def weighted_norm_decay(dec: SpectralDecomposition, alpha: int, index: Sequence[str],
                        p: int, t_values: Sequence[float]) -> DecayFit:
    """Fit the weighted kernel norm over t; small-t slope -|I|/2 - N/(2p')."""
    check_t_window(dec.spec, t_values)
    norms = [weighted_kernel_norm(dec, t, alpha, index, p) for t in t_values]
    return fit_loglog(t_values, norms)


def weighted_norm_target_slope(spec: GridSpec, index: Sequence[str], p: int) -> float:
    N = 4 if spec.mode == "heisenberg" else spec.dims
    p_conj_inv = 1.0 - 1.0 / p  # 1/p' with p' conjugate
    return -len(index) / 2.0 - N / 2.0 * p_conj_inv


# ---------------------------------------------------------------------------
# multiplier-kernel reconstruction, exercised through m(lambda) = lambda^s e^{-lambda}
# ---------------------------------------------------------------------------

def kernel_reconstruction_gap(dec: SpectralDecomposition, s: float, t: float,
                              window_fraction: float = 0.5) -> float:
    """Relative gap between ||J^s h_t||_1 and its convolution reconstruction.

    J^s h_t = (t/2)^{-s} M * h_{t/2} exactly in the spectral calculus, where M
    is the kernel of m((t/2) J) with m(lambda) = lambda^s e^{-lambda}; here the
    right side is reassembled with the discrete group convolution and both L1
    norms are taken over the inner window |x_i| <= window_fraction * L.
    """
    from .group import group_convolve

    spec = dec.spec
    lam = dec.eigenvalues
    delta = delta_function(spec)
    svals = np.where(lam > 0, lam, 1.0) ** s
    svals[lam <= 0] = 0.0
    direct = dec.apply_values(svals * np.exp(-t * lam), delta)
    m_vals = np.where(lam > 0, ((t / 2.0) * np.where(lam > 0, lam, 1.0)) ** s, 0.0)
    M = dec.apply_values(m_vals * np.exp(-(t / 2.0) * lam), delta)
    ht2 = dec.apply_values(np.exp(-(t / 2.0) * lam), delta)
    recon = group_convolve(M, ht2)
    scale = (t / 2.0) ** (-s)
    coords = spec.node_coordinates()
    window = (np.abs(coords) <= window_fraction * spec.extent).all(axis=1)
    w = spec.spacing ** spec.dims
    l1_direct = w * np.abs(direct.values[window]).sum()
    l1_recon = scale * w * np.abs(recon.values[window]).sum()
    return abs(l1_recon - l1_direct) / max(l1_direct, 1e-300)


# ---------------------------------------------------------------------------
# fit report export
# ---------------------------------------------------------------------------

def write_fit_report(fit: DecayFit, target: float, tolerance: float,
                     csv_path, json_path) -> bool:
    """CSV `t,norm` plus JSON {slope, target, ci, pass}; returns the pass flag."""
    ok = abs(fit.fitted_slope - target) <= tolerance
    with open(csv_path, "w", encoding="ascii") as fh:
        fh.write("t,norm\n")
        for t, v in zip(fit.t_samples, fit.norms):
            fh.write(f"{t:.17g},{v:.17g}\n")
    payload = {
        "slope": fit.fitted_slope,
        "target": target,
        "ci": fit.slope_ci,
        "tolerance": tolerance,
        "residual": fit.residual,
        "pass": bool(ok),
    }
    with open(json_path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ok
