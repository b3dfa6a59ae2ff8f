"""Spectral discretization of A = Laplacian^2 - 2*Laplacian on a box.

The sine basis (Navier conditions u = lap(u) = 0 on the boundary) and the
periodic trigonometric basis diagonalize A exactly, so transforms, the
semigroup exp(-t*A), fractional powers A^mu and all Sobolev (semi)norms
reduce to per-mode arithmetic on real coefficient arrays.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np
from scipy.fft import dstn

BOUNDARIES = ("dirichlet_navier", "periodic")

# axis sizes up to this use a precomputed dense orthogonal transform matrix,
# which beats the FFT call overhead for the small grids used in probes
_DENSE_AXIS_LIMIT = 256


class GridMismatch(ValueError):
    """Fields living on incompatible grids were combined."""


def _workers() -> int:
    """FFT worker count, capped by the SPHEREFLOW_THREADS environment variable."""
    try:
        return max(1, int(os.environ.get("SPHEREFLOW_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class DomainSpec:
    """Box domain: per-axis length, mode count and boundary condition."""

    dim: int
    lengths: tuple
    resolution: tuple
    boundary: str = "dirichlet_navier"

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))
        object.__setattr__(self, "resolution", tuple(int(x) for x in self.resolution))
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if len(self.lengths) != self.dim or len(self.resolution) != self.dim:
            raise ValueError("lengths/resolution must have one entry per axis")
        if any(L <= 0 for L in self.lengths):
            raise ValueError("axis lengths must be positive")
        if any(n < 8 or n % 2 for n in self.resolution):
            raise ValueError("axis resolutions must be even and at least 8")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")


def _sine_matrix(n: int) -> np.ndarray:
    # orthonormal DST-I matrix, symmetric and self-inverse
    j = np.arange(1, n + 1)
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * np.outer(j, j) / (n + 1))


def _periodic_basis(n: int, length: float):
    """Orthonormal (w.r.t. the grid quadrature) real trigonometric basis.

    Row order: constant, then (cos, sin) pairs for wavenumbers 1..n/2-1,
    then the Nyquist cosine.  Returns (Q, freqs) with Q orthogonal after
    absorbing the quadrature weight.
    """
    x = np.arange(n) * (length / n)
    h = length / n
    rows = [np.full(n, 1.0 / np.sqrt(length))]
    freqs = [0]
    for m in range(1, n // 2):
        w = 2.0 * np.pi * m / length
        rows.append(np.sqrt(2.0 / length) * np.cos(w * x))
        rows.append(np.sqrt(2.0 / length) * np.sin(w * x))
        freqs += [m, m]
    rows.append(np.cos(np.pi * n * x / length) / np.sqrt(length))
    freqs.append(n // 2)
    return np.sqrt(h) * np.asarray(rows), np.asarray(freqs, dtype=float)


class SpectralGrid:
    """Collocation grid plus the eigenstructure of -Laplacian and A.

    ``lap_eigs`` holds the -Laplacian eigenvalue of each basis mode and
    ``A_eigs = lap_eigs**2 + 2*lap_eigs``, both shaped like the coefficient
    array.  On the sine basis every A eigenvalue is strictly positive; the
    periodic basis (cross-check option) carries a zero eigenvalue on the
    constant mode.
    """

    def __init__(self, spec: DomainSpec):
        self.spec = spec
        d = spec.dim
        self.shape = tuple(spec.resolution)
        self.num_points = int(np.prod(self.shape))

        if spec.boundary == "dirichlet_navier":
            step = [L / (n + 1) for L, n in zip(spec.lengths, spec.resolution)]
            self.axis_points = [
                (np.arange(1, n + 1)) * h for n, h in zip(spec.resolution, step)
            ]
            axis_lam = [
                (np.arange(1, n + 1) * np.pi / L) ** 2
                for n, L in zip(spec.resolution, spec.lengths)
            ]
            axis_mag = [np.arange(1, n + 1, dtype=float) for n in spec.resolution]
            self._axis_mats = [
                _sine_matrix(n) if n <= _DENSE_AXIS_LIMIT else None
                for n in spec.resolution
            ]
        else:
            step = [L / n for L, n in zip(spec.lengths, spec.resolution)]
            self.axis_points = [
                np.arange(n) * h for n, h in zip(spec.resolution, step)
            ]
            axis_lam, axis_mag, self._axis_mats = [], [], []
            for n, L in zip(spec.resolution, spec.lengths):
                Q, freqs = _periodic_basis(n, L)
                self._axis_mats.append(Q)
                axis_lam.append((2.0 * np.pi * freqs / L) ** 2)
                axis_mag.append(freqs)

        self.weight = float(np.prod(step))
        mesh = np.meshgrid(*axis_lam, indexing="ij")
        self.lap_eigs = np.sum(mesh, axis=0) if d > 1 else np.asarray(axis_lam[0])
        self.lap_eigs = self.lap_eigs.reshape(self.shape)
        self.A_eigs = self.lap_eigs**2 + 2.0 * self.lap_eigs
        # per-mode weight of the V-norm |u|^2 + 2|grad u|^2 + |lap u|^2
        self.V_eigs = 1.0 + 2.0 * self.lap_eigs + self.lap_eigs**2
        mag = np.meshgrid(*axis_mag, indexing="ij")
        self.mode_magnitude = np.sqrt(np.sum([m**2 for m in mag], axis=0)).reshape(
            self.shape
        )
        if spec.boundary == "dirichlet_navier" and not np.all(self.A_eigs > 0):
            raise ValueError("A must be strictly positive on the sine basis")
        self.mu_min = float(self.A_eigs.min())
        self.mu_max = float(self.A_eigs.max())
        self._sqrt_weight = np.sqrt(self.weight)

    # -- transforms -------------------------------------------------------

    def _ortho_forward(self, values: np.ndarray) -> np.ndarray:
        if self.spec.boundary == "dirichlet_navier":
            if all(m is not None for m in self._axis_mats):
                out = values
                for ax, m in enumerate(self._axis_mats):
                    out = np.moveaxis(np.tensordot(m, out, axes=(1, ax)), 0, ax)
                return out
            return dstn(values, type=1, norm="ortho", workers=_workers())
        out = values
        for ax, q in enumerate(self._axis_mats):
            out = np.moveaxis(np.tensordot(q, out, axes=(1, ax)), 0, ax)
        return out

    def _ortho_inverse(self, coeffs: np.ndarray) -> np.ndarray:
        if self.spec.boundary == "dirichlet_navier":
            # the orthonormal DST-I is its own inverse
            return self._ortho_forward(coeffs)
        out = coeffs
        for ax, q in enumerate(self._axis_mats):
            out = np.moveaxis(np.tensordot(q.T, out, axes=(1, ax)), 0, ax)
        return out

    def to_coeffs(self, values: np.ndarray) -> np.ndarray:
        return self._sqrt_weight * self._ortho_forward(values)

    def to_values(self, coeffs: np.ndarray) -> np.ndarray:
        return self._ortho_inverse(coeffs) / self._sqrt_weight

    def compatible(self, other: "SpectralGrid") -> bool:
        return self is other or self.spec == other.spec

    def __repr__(self):
        s = self.spec
        return f"SpectralGrid(dim={s.dim}, N={s.resolution}, L={s.lengths}, {s.boundary})"


def _check_same_grid(a, b):
    if not a.grid.compatible(b.grid):
        raise GridMismatch(f"grids differ: {a.grid!r} vs {b.grid!r}")


class Field:
    """Real-space state on the collocation points of a grid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: SpectralGrid, values):
        values = np.array(values, dtype=float)
        if values.size != grid.num_points:
            raise GridMismatch(
                f"expected {grid.num_points} values, got {values.size}"
            )
        values = values.reshape(grid.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.grid = grid
        self.values = values

    @classmethod
    def _wrap(cls, grid, values):
        # fast path for freshly computed arrays; skips copy and validation
        obj = object.__new__(cls)
        obj.grid = grid
        obj.values = values
        return obj

    def copy(self) -> "Field":
        return Field._wrap(self.grid, self.values.copy())

    def __add__(self, other):
        _check_same_grid(self, other)
        return Field._wrap(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return Field._wrap(self.grid, self.values - other.values)

    def __mul__(self, c):
        return Field._wrap(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return Field._wrap(self.grid, -self.values)

    def __repr__(self):
        return f"Field(shape={self.values.shape})"


class SpectralField:
    """Coefficient-space representation of a Field in the grid's eigenbasis."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: SpectralGrid, coeffs):
        coeffs = np.array(coeffs, dtype=float)
        if coeffs.size != grid.num_points:
            raise GridMismatch(
                f"expected {grid.num_points} coefficients, got {coeffs.size}"
            )
        self.grid = grid
        self.coeffs = coeffs.reshape(grid.shape)

    def __repr__(self):
        return f"SpectralField(shape={self.coeffs.shape})"


def transform_forward(f: Field) -> SpectralField:
    return SpectralField(f.grid, f.grid.to_coeffs(f.values))


def transform_inverse(c: SpectralField) -> Field:
    return Field._wrap(c.grid, c.grid.to_values(c.coeffs))


def basis_mode(grid: SpectralGrid, k) -> Field:
    """Unit-norm basis mode; ``k`` is a per-axis multi-index (1-based on sine grids)."""
    if np.isscalar(k):
        k = (k,)
    if len(k) != grid.spec.dim:
        raise GridMismatch("multi-index rank does not match grid dimension")
    coeffs = np.zeros(grid.shape)
    if grid.spec.boundary == "dirichlet_navier":
        idx = tuple(int(ki) - 1 for ki in k)
        if any(i < 0 or i >= n for i, n in zip(idx, grid.shape)):
            raise ValueError(f"mode index {k} out of range for {grid.shape}")
    else:
        idx = tuple(int(ki) for ki in k)
    coeffs[idx] = 1.0
    return transform_inverse(SpectralField(grid, coeffs))


def random_coeff_field(grid: SpectralGrid, rng: np.random.Generator, decay: float = 3.0) -> Field:
    """Random field with uniform(-1,1) coefficients damped by |k|^-decay."""
    mag = np.maximum(grid.mode_magnitude, 1.0)
    coeffs = rng.uniform(-1.0, 1.0, size=grid.shape) * mag ** (-decay)
    return transform_inverse(SpectralField(grid, coeffs))


# -- diagonal operators ----------------------------------------------------


def _scale_modes(u: Field, factor: np.ndarray) -> Field:
    c = u.grid.to_coeffs(u.values)
    return Field._wrap(u.grid, u.grid.to_values(factor * c))


def apply_laplacian(u: Field) -> Field:
    return _scale_modes(u, -u.grid.lap_eigs)


def apply_bilaplacian(u: Field) -> Field:
    return _scale_modes(u, u.grid.lap_eigs**2)


def apply_A(u: Field) -> Field:
    """Apply A = Laplacian^2 - 2*Laplacian (mode k is scaled by lam_k^2 + 2*lam_k)."""
    return _scale_modes(u, u.grid.A_eigs)


def apply_semigroup(u: Field, t: float) -> Field:
    """Apply exp(-t*A); the identity at t = 0."""
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    return _scale_modes(u, np.exp(-t * u.grid.A_eigs))


def apply_A_power(u: Field, mu: float) -> Field:
    """Apply the fractional power A^mu for mu in (0, 1]."""
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"fractional power must lie in (0, 1], got {mu}")
    return _scale_modes(u, u.grid.A_eigs**mu)


# -- inner products and norms ----------------------------------------------


def inner_l2(u: Field, v: Field) -> float:
    _check_same_grid(u, v)
    return float(u.grid.weight * np.sum(u.values * v.values))


def norm_l2(u: Field) -> float:
    return float(np.sqrt(u.grid.weight) * np.linalg.norm(u.values))


def sobolev_norms_sq(u: Field):
    """(|u|_{L2}^2, |grad u|_{L2}^2, |lap u|_{L2}^2) from one transform."""
    c2 = u.grid.to_coeffs(u.values) ** 2
    lam = u.grid.lap_eigs
    return float(c2.sum()), float((lam * c2).sum()), float((lam**2 * c2).sum())


def seminorm_h1(u: Field) -> float:
    return float(np.sqrt(sobolev_norms_sq(u)[1]))


def seminorm_h2(u: Field) -> float:
    return float(np.sqrt(sobolev_norms_sq(u)[2]))


def norm_l2n(u: Field, n: int) -> float:
    """L^{2n} norm by collocation quadrature on the native grid."""
    if n < 1 or int(n) != n:
        raise ValueError(f"n must be a positive integer, got {n}")
    p = float(u.grid.weight * np.sum(u.values ** (2 * int(n))))
    return p ** (1.0 / (2 * n))


# -- exponential integrator weights -----------------------------------------

_PHI1_SMALL = 1e-6


def phi1(z):
    """phi1(z) = (1 - exp(-z)) / z, continuous at 0 with phi1(0) = 1.

    Uses the three-term Taylor series below 1e-6 to avoid cancellation.
    Accepts scalars or arrays; negative arguments are rejected.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("phi1 requires z >= 0")
    small = z < _PHI1_SMALL
    zs = np.where(small, 1.0, z)
    out = np.where(small, 1.0 - z / 2.0 + z**2 / 6.0, -np.expm1(-zs) / zs)
    return float(out) if out.ndim == 0 else out


# -- snapshot files ----------------------------------------------------------

_MSHF_MAGIC = b"MSHF"
_MSHF_VERSION = 1


def write_snapshot(path, f: Field) -> None:
    """Write a field as an MSHF snapshot (bit-exact little-endian layout)."""
    spec = f.grid.spec
    with open(path, "wb") as fh:
        fh.write(_MSHF_MAGIC)
        fh.write(struct.pack("<IB", _MSHF_VERSION, spec.dim))
        for n, L in zip(spec.resolution, spec.lengths):
            fh.write(struct.pack("<Id", n, L))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshot(path, grid: SpectralGrid | None = None,
                  boundary: str = "dirichlet_navier") -> Field:
    """Read an MSHF snapshot; validates against ``grid`` when one is supplied."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MSHF_MAGIC:
            raise ValueError(f"{path}: not an MSHF snapshot")
        version, dim = struct.unpack("<IB", fh.read(5))
        if version != _MSHF_VERSION:
            raise ValueError(f"{path}: unsupported MSHF version {version}")
        res, lengths = [], []
        for _ in range(dim):
            n, L = struct.unpack("<Id", fh.read(12))
            res.append(n)
            lengths.append(L)
        count = int(np.prod(res))
        values = np.frombuffer(fh.read(8 * count), dtype="<f8", count=count)
    if grid is None:
        grid = SpectralGrid(DomainSpec(dim, tuple(lengths), tuple(res), boundary))
    else:
        s = grid.spec
        if s.dim != dim or tuple(s.resolution) != tuple(res) or not np.allclose(
            s.lengths, lengths
        ):
            raise GridMismatch(f"{path}: snapshot domain does not match grid")
    return Field(grid, values)
