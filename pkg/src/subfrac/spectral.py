"""Dense eigendecomposition and the spectral functional calculus m(J).

The decomposition is the computational stand-in for the spectral measure: a
multiplier m acts as Q diag(m(lambda)) Q^T, applied as two dense products.
Fractional powers, the heat semigroup and heat-kernel columns are specific
multipliers; spectral_pairing exposes the Haar-weighted pairing
sum_i m(lambda_i) (Q^T f)_i (Q^T g)_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import CapacityError, ConfigError, EvaluationError, GridMismatchError
from .group import GridFunction, GridSpec
from .stencils import DiscreteOperator

DENSE_LIMIT = 6000

EIG_CLAMP = 1e-10  # relative floor below which roundoff-negative eigenvalues clamp to 0


@dataclass
class ScalarMultiplier:
    """Pointwise-evaluable function of the spectrum, with a display label."""

    fn: Callable[[np.ndarray], np.ndarray]
    label: str = "m"

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        try:
            out = np.asarray(self.fn(lam), dtype=float)
            if out.shape != np.shape(lam):
                raise TypeError
        except (TypeError, ValueError):
            out = np.array([float(self.fn(x)) for x in np.atleast_1d(lam)])
        bad = ~np.isfinite(out)
        if bad.any():
            lam_bad = np.atleast_1d(lam)[bad][0]
            raise EvaluationError(
                f"multiplier {self.label!r} is not finite at lambda={lam_bad!r}"
            )
        return out


@dataclass
class SpectralDecomposition:
    """Ascending eigenvalues >= 0 and the orthonormal eigenbasis of an operator."""

    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    spec: GridSpec
    operator_kind: str

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    def project(self, f: GridFunction) -> np.ndarray:
        if f.spec != self.spec:
            raise GridMismatchError("function grid does not match the decomposition")
        return self.eigenvectors.T @ f.values

    def reconstruct(self, coefficients: np.ndarray) -> GridFunction:
        return GridFunction(self.spec, self.eigenvectors @ coefficients)

    def apply_values(self, values: np.ndarray, f: GridFunction) -> GridFunction:
        """Apply diag(values) in the eigenbasis: Q (values * Q^T f)."""
        return self.reconstruct(np.asarray(values) * self.project(f))


def spectral_decompose(op: DiscreteOperator, dense_limit: int = DENSE_LIMIT) -> SpectralDecomposition:
    """Full symmetric eigendecomposition; roundoff-negative eigenvalues clamp to 0."""
    N = op.spec.n_nodes
    if N > dense_limit:
        raise CapacityError(
            f"grid has {N} nodes, over the dense eigendecomposition limit {dense_limit}; "
            "use a smaller grid"
        )
    w, Q = scipy.linalg.eigh(op.matrix.toarray())
    scale = max(abs(w[0]), abs(w[-1]))
    if w[0] < -EIG_CLAMP * scale:
        raise AssertionError(
            f"operator is not PSD: min eigenvalue {w[0]:.3e} at scale {scale:.3e}"
        )
    # snap roundoff-scale eigenvalues (either sign) to exact zero so that
    # lambda^s does not amplify a spurious +1e-13 kernel eigenvalue
    w = np.where(np.abs(w) < EIG_CLAMP * scale, 0.0, w)
    w = np.clip(w, 0.0, None)
    return SpectralDecomposition(
        eigenvalues=w, eigenvectors=Q, spec=op.spec, operator_kind=op.kind
    )


def apply_multiplier(dec: SpectralDecomposition, m: ScalarMultiplier | Callable,
                     f: GridFunction) -> GridFunction:
    if not isinstance(m, ScalarMultiplier):
        m = ScalarMultiplier(m)
    return dec.apply_values(m(dec.eigenvalues), f)


def fractional_power(dec: SpectralDecomposition, s: float, f: GridFunction) -> GridFunction:
    """J^s f via the multiplier lambda^s (0^s = 0); requires s > 0."""
    if s <= 0:
        raise ConfigError(f"fractional power needs s > 0, got {s}")
    lam = dec.eigenvalues
    vals = np.where(lam > 0, lam, 1.0) ** s
    vals[lam <= 0] = 0.0
    return dec.apply_values(vals, f)


def heat_apply(dec: SpectralDecomposition, t: float, f: GridFunction) -> GridFunction:
    """H_t f = e^{-tJ} f; t >= 0, and H_0 is the identity exactly."""
    if t < 0:
        raise ConfigError(f"heat semigroup needs t >= 0, got {t}")
    if t == 0.0:
        return GridFunction(f.spec, f.values.copy())
    return dec.apply_values(np.exp(-t * dec.eigenvalues), f)


def delta_function(spec: GridSpec, node: int | None = None) -> GridFunction:
    """Discrete delta scaled by h^{-dims} so its integral is 1."""
    if node is None:
        node = spec.center_index()
    vals = np.zeros(spec.n_nodes)
    vals[node] = spec.spacing ** (-spec.dims)
    return GridFunction(spec, vals)


def heat_kernel_column(dec: SpectralDecomposition, t: float,
                       node: int | None = None) -> GridFunction:
    """H_t applied to the unit-mass discrete delta; approximates h_t(x0^{-1}.x)."""
    if t <= 0:
        raise ConfigError(f"kernel column needs t > 0, got {t}")
    return heat_apply(dec, t, delta_function(dec.spec, node))


def heat_time_derivative_check(dec: SpectralDecomposition, t: float,
                               f: GridFunction, rel_step: float = 1e-4) -> float:
    """Relative residual of d/dt H_t f = -J H_t f by centered differences in t."""
    if t <= 0:
        raise ConfigError("t must be > 0")
    dt = rel_step * t
    fwd = heat_apply(dec, t + dt, f).values
    bwd = heat_apply(dec, t - dt, f).values
    lam = dec.eigenvalues
    gen = dec.apply_values(lam * np.exp(-t * lam), f).values  # J H_t f
    num = np.linalg.norm((fwd - bwd) / (2.0 * dt) + gen)
    den = np.linalg.norm(gen)
    return float(num / den) if den > 0 else float(num)


def spectral_pairing(dec: SpectralDecomposition, f: GridFunction, g: GridFunction,
                     m: ScalarMultiplier | Callable) -> float:
    """Haar-weighted sum_i m(lambda_i) (Q^T f)_i (Q^T g)_i; m = id gives <Jf, g>."""
    if not isinstance(m, ScalarMultiplier):
        m = ScalarMultiplier(m)
    cf = dec.project(f)
    cg = dec.project(g)
    w = dec.spec.spacing ** dec.spec.dims
    return float(w * np.sum(m(dec.eigenvalues) * cf * cg))


def export_spectrum_csv(dec: SpectralDecomposition, path) -> None:
    """CSV `index,eigenvalue` at full float64 precision."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("index,eigenvalue\n")
        for i, lam in enumerate(dec.eigenvalues):
            fh.write(f"{i},{lam:.17g}\n")
