"""Heisenberg group algebra, box/torus grids, Haar-weighted norms and group convolution.

Points of the Heisenberg group are plain arrays of shape (..., 3); the group
operations below broadcast over leading axes.  Grids are uniform boxes
[-L, L]^dims with nodes enumerated x3-fastest (C order over axes x1, x2, x3).
The Haar measure is Lebesgue measure, discretized as the plain Riemann weight
h^dims per node (no endpoint halving, so Parseval against the matrix inner
product is exact).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GridMismatchError

MODES = ("heisenberg", "euclidean_box", "euclidean_torus")

IDENTITY = np.zeros(3)


# ---------------------------------------------------------------------------
# group algebra
# ---------------------------------------------------------------------------

def group_mul(x, y) -> np.ndarray:
    """Heisenberg product: (x.y)_3 picks up the twist (x1*y2 - y1*x2)/2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.empty(np.broadcast_shapes(x.shape, y.shape), dtype=float)
    out[..., 0] = x[..., 0] + y[..., 0]
    out[..., 1] = x[..., 1] + y[..., 1]
    out[..., 2] = (
        x[..., 2]
        + y[..., 2]
        + 0.5 * (x[..., 0] * y[..., 1] - y[..., 0] * x[..., 1])
    )
    return out


def group_inverse(x) -> np.ndarray:
    """Coordinate negation; the twist term cancels identically in x.x^{-1}."""
    return -np.asarray(x, dtype=float)


def dilate(alpha: float, x) -> np.ndarray:
    """Anisotropic dilation (a*x1, a*x2, a^2*x3); a group automorphism."""
    if alpha <= 0:
        raise ConfigError(f"dilation factor must be > 0, got {alpha}")
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    out[..., 0] = alpha * x[..., 0]
    out[..., 1] = alpha * x[..., 1]
    out[..., 2] = alpha * alpha * x[..., 2]
    return out


def homogeneous_norm(x) -> np.ndarray:
    """Quartic homogeneous norm ((x1^2+x2^2)^2 + 16 x3^2)^(1/4)."""
    x = np.asarray(x, dtype=float)
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    return (r2 * r2 + 16.0 * x[..., 2] ** 2) ** 0.25


def group_distance(x, y) -> np.ndarray:
    """Left-invariant distance norm(y^{-1}.x)."""
    return homogeneous_norm(group_mul(group_inverse(y), x))


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Uniform box discretization of [-L, L]^dims.

    Box modes (heisenberg, euclidean_box) carry both endpoints and require odd
    n_per_axis so the origin is a node: h = 2L/(n-1).  The torus identifies
    -L with L, drops the right endpoint and allows any n >= 3: h = 2L/n.
    """

    n_per_axis: int
    extent: float
    dims: int = 3
    mode: str = "heisenberg"

    def __post_init__(self):
        # normalize numpy scalars so header formatting and equality are plain
        object.__setattr__(self, "n_per_axis", int(self.n_per_axis))
        object.__setattr__(self, "extent", float(self.extent))
        object.__setattr__(self, "dims", int(self.dims))
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.dims not in (1, 2, 3):
            raise ConfigError(f"dims must be 1, 2 or 3, got {self.dims}")
        if self.mode == "heisenberg" and self.dims != 3:
            raise ConfigError("heisenberg mode requires dims=3")
        if self.extent <= 0:
            raise ConfigError(f"extent must be > 0, got {self.extent}")
        if self.n_per_axis < 3:
            raise ConfigError(f"n_per_axis must be >= 3, got {self.n_per_axis}")
        if self.mode != "euclidean_torus" and self.n_per_axis % 2 == 0:
            raise ConfigError(
                f"box modes need odd n_per_axis (origin must be a node), got {self.n_per_axis}"
            )

    @property
    def spacing(self) -> float:
        if self.mode == "euclidean_torus":
            return 2.0 * self.extent / self.n_per_axis
        return 2.0 * self.extent / (self.n_per_axis - 1)

    @property
    def n_nodes(self) -> int:
        return self.n_per_axis ** self.dims

    @property
    def periodic(self) -> bool:
        return self.mode == "euclidean_torus"

    def axis_coordinates(self) -> np.ndarray:
        """Per-axis node coordinates i*h - L."""
        return -self.extent + self.spacing * np.arange(self.n_per_axis)

    def node_coordinates(self) -> np.ndarray:
        """(N, dims) coordinates in x3-fastest order (last axis fastest)."""
        ax = self.axis_coordinates()
        grids = np.meshgrid(*([ax] * self.dims), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def center_index(self) -> int:
        """Flat index of the origin (box) or the node nearest it (odd-n torus)."""
        if self.mode == "euclidean_torus":
            i = self.n_per_axis // 2
        else:
            i = (self.n_per_axis - 1) // 2
        flat = 0
        for _ in range(self.dims):
            flat = flat * self.n_per_axis + i
        return flat

    def shaped(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values).reshape((self.n_per_axis,) * self.dims)


def make_grid(spec: GridSpec) -> np.ndarray:
    """Node coordinate enumeration for a spec; see GridSpec for the ordering."""
    return spec.node_coordinates()


@dataclass
class GridFunction:
    """Real samples on a grid, x3-fastest, treated as immutable once built."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != self.spec.n_nodes:
            raise GridMismatchError(
                f"expected {self.spec.n_nodes} values for this grid, got {v.size}"
            )
        object.__setattr__(self, "values", v)

    def shaped(self) -> np.ndarray:
        return self.spec.shaped(self.values)

    def copy(self) -> "GridFunction":
        return GridFunction(self.spec, self.values.copy())


def require_same_spec(f: GridFunction, g: GridFunction) -> GridSpec:
    if f.spec != g.spec:
        raise GridMismatchError(f"grid mismatch: {f.spec} vs {g.spec}")
    return f.spec


def integral(f: GridFunction) -> float:
    """Haar (= Lebesgue) integral as the plain Riemann sum h^dims * sum."""
    return float(f.spec.spacing ** f.spec.dims * f.values.sum())


def lp_norm(f: GridFunction, p) -> float:
    """Haar-weighted discrete L^p norm for p in {1, 2, inf}."""
    if p == np.inf or p == "inf":
        return float(np.abs(f.values).max(initial=0.0))
    w = f.spec.spacing ** f.spec.dims
    if p == 1:
        return float(w * np.abs(f.values).sum())
    if p == 2:
        return float(np.sqrt(w * np.square(f.values).sum()))
    raise ConfigError(f"unsupported p={p!r}; expected 1, 2 or inf")


def inner_product(f: GridFunction, g: GridFunction) -> float:
    """Haar-weighted L^2 pairing."""
    require_same_spec(f, g)
    return float(f.spec.spacing ** f.spec.dims * (f.values @ g.values))


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def group_convolve(f: GridFunction, g: GridFunction) -> GridFunction:
    """Discrete f*g(x) = h^dims * sum_y f(y) g(y^{-1}.x).

    heisenberg: the group-law offset is exact in x1, x2 (lattice-aligned);
    the twist makes the x3 component off-lattice, sampled by linear
    interpolation along x3 with zero extension outside the box.  Euclidean
    modes reduce to ordinary (torus-periodic or zero-padded) convolution.
    """
    spec = require_same_spec(f, g)
    h = spec.spacing
    if spec.mode == "euclidean_torus":
        # re-index g so the coordinate origin (center node) sits at array index 0,
        # then circular convolution is exactly the coordinate-space sum
        c = spec.n_per_axis // 2
        g0 = np.roll(g.shaped(), (-c,) * spec.dims, axis=tuple(range(spec.dims)))
        fh = np.fft.fftn(f.shaped())
        gh = np.fft.fftn(g0)
        out = np.real(np.fft.ifftn(fh * gh)) * h ** spec.dims
        return GridFunction(spec, out.ravel())
    if spec.mode == "euclidean_box":
        from scipy.signal import convolve as _conv

        full = _conv(f.shaped(), g.shaped(), mode="full", method="auto")
        c = (spec.n_per_axis - 1) // 2
        sl = tuple(slice(c, c + spec.n_per_axis) for _ in range(spec.dims))
        return GridFunction(spec, full[sl].ravel() * h ** spec.dims)
    return GridFunction(spec, _heisenberg_convolve(f.shaped(), g.shaped(), spec).ravel())


def _heisenberg_convolve(f3: np.ndarray, g3: np.ndarray, spec: GridSpec) -> np.ndarray:
    n = spec.n_per_axis
    h = spec.spacing
    ax = spec.axis_coordinates()
    half = (n - 1) // 2
    out = np.zeros((n, n, n))
    # integer index k along x3 maps to gpad[..., k+1]; both pads are zero
    gpad = np.zeros((n, n, n + 2))
    gpad[:, :, 1 : n + 1] = g3
    b1g, b2g = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    m = np.arange(2 * n - 1)
    for a1 in range(n):
        for a2 in range(n):
            c1 = a1 - b1g + half
            c2 = a2 - b2g + half
            valid = (c1 >= 0) & (c1 < n) & (c2 >= 0) & (c2 < n)
            if not valid.any():
                continue
            twist = 0.5 * (ax[a1] * ax[b2g] - ax[a2] * ax[b1g])
            vb1 = b1g[valid]
            vb2 = b2g[valid]
            vc1 = c1[valid]
            vc2 = c2[valid]
            shift = twist[valid] / h
            # row q, offset m = a3-b3+(n-1): sample g at real x3-index
            ridx = m[None, :] - (n - 1) + half + shift[:, None]
            k = np.floor(ridx).astype(int)
            w = ridx - k
            in_range = (k >= -1) & (k <= n - 1)
            rows = gpad[vc1, vc2, :]
            k0 = np.clip(k + 1, 0, n + 1)
            k1 = np.clip(k + 2, 0, n + 1)
            samp = (1.0 - w) * np.take_along_axis(rows, k0, axis=1)
            samp += w * np.take_along_axis(rows, k1, axis=1)
            samp[~in_range] = 0.0
            # out[a3] = sum_q sum_b3 f[q, b3] * samp[q, a3 - b3 + n - 1]
            windows = np.lib.stride_tricks.sliding_window_view(samp, n, axis=1)
            out[a1, a2, :] += np.einsum(
                "qb,qab->a", f3[vb1, vb2, ::-1], windows
            )
    return out * h ** 3


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

def gaussian_bump(spec: GridSpec, center, width: float) -> GridFunction:
    """Euclidean Gaussian exp(-|x-c|^2 / (2 width^2)) sampled on the grid.

    On the torus the bump is periodized over +/-1 period images per axis so
    the sampled function is smooth as a periodic function.
    """
    coords = spec.node_coordinates()
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.size != spec.dims:
        raise ConfigError(f"center must have {spec.dims} components")
    if spec.periodic:
        vals = np.zeros(spec.n_nodes)
        period = 2.0 * spec.extent
        shifts = np.array([-period, 0.0, period])
        mesh = np.meshgrid(*([shifts] * spec.dims), indexing="ij")
        for off in zip(*[g.ravel() for g in mesh]):
            d2 = ((coords - (center + np.asarray(off))) ** 2).sum(axis=1)
            vals += np.exp(-d2 / (2.0 * width ** 2))
        return GridFunction(spec, vals)
    d2 = ((coords - center) ** 2).sum(axis=1)
    return GridFunction(spec, np.exp(-d2 / (2.0 * width ** 2)))


def random_bump(spec: GridSpec, rng: np.random.Generator, width: float | None = None,
                n_bumps: int = 3, zero_mean: bool = False) -> GridFunction:
    """Seeded sum of Gaussian bumps with centers in the inner half-box.

    width defaults to max(4h, L/8) so the bumps stay machine-resolvable.
    """
    L = spec.extent
    if width is None:
        width = max(4.0 * spec.spacing, L / 8.0)
    vals = np.zeros(spec.n_nodes)
    for _ in range(n_bumps):
        center = rng.uniform(-L / 2, L / 2, size=spec.dims)
        amp = rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
        vals += amp * gaussian_bump(spec, center, width).values
    if zero_mean:
        vals -= vals.mean()
    return GridFunction(spec, vals)


# ---------------------------------------------------------------------------
# GF1 file format
# ---------------------------------------------------------------------------

def write_gf1(path, f: GridFunction) -> None:
    """One ASCII header line, then N little-endian float64 in x3-fastest order."""
    spec = f.spec
    header = f"GF1 {spec.dims} {spec.n_per_axis} {spec.extent!r} {spec.mode}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(f.values.astype("<f8").tobytes())


def read_gf1(path) -> GridFunction:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").rstrip("\n")
        parts = header.split(" ")
        if len(parts) != 5 or parts[0] != "GF1":
            raise ConfigError(f"not a GF1 file: header {header!r}")
        dims, n, L, mode = int(parts[1]), int(parts[2]), float(parts[3]), parts[4]
        spec = GridSpec(n_per_axis=n, extent=L, dims=dims, mode=mode)
        raw = fh.read(8 * spec.n_nodes)
        if len(raw) != 8 * spec.n_nodes:
            raise ConfigError(f"GF1 payload truncated: wanted {spec.n_nodes} float64")
        values = np.frombuffer(raw, dtype="<f8").copy()
    return GridFunction(spec, values)
