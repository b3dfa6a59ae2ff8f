"""Nonlinearity and tangent-space projection of the constrained flow.

The evolution on the unit sphere M = {|u|_L2 = 1} is

    du/dt = pi_u(-lap^2 u + 2 lap u - a u - u^(2n-1))

with pi_u(h) = h - <h, u> u.  Expanding the projection on M gives the
equivalent form -A u + F(u) with

    F(u) = |u|_{H2}^2 u + 2 |u|_{H1}^2 u + |u|_{L2n}^{2n} u - u^(2n-1),

which is independent of the linear coefficient a.  Both forms are
implemented so their agreement can be checked numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    DomainSpec,
    Field,
    SpectralField,
    SpectralGrid,
    inner_l2,
    norm_l2,
    sobolev_norms_sq,
    transform_inverse,
)

MANIFOLD_TOL = 1e-8


class ManifoldError(ValueError):
    """A state violated the unit-sphere precondition beyond tolerance."""


@dataclass(frozen=True)
class ModelParams:
    """Nonlinearity exponent n, linear coefficient a and dealiasing policy.

    ``dealias=None`` evaluates u^(2n-1) on the native grid; an integer
    factor >= n zero-pads so the collocation power is alias-free.  With
    ``signed_power`` the power is sign(u)|u|^(2n-1) and any real n > 1/2
    is accepted.
    """

    n: float = 1
    a: float = 0.0
    dealias: int | None = None
    signed_power: bool = False

    def __post_init__(self):
        if self.signed_power:
            if self.n <= 0.5:
                raise ValueError(f"signed power requires n > 1/2, got {self.n}")
        else:
            if self.n < 1 or int(self.n) != self.n:
                raise ValueError(f"n must be a positive integer, got {self.n}")
            object.__setattr__(self, "n", int(self.n))
        if self.dealias is not None:
            if int(self.dealias) != self.dealias or self.dealias < self.n:
                raise ValueError(
                    f"zero-pad factor must be an integer >= n, got {self.dealias}"
                )
            object.__setattr__(self, "dealias", int(self.dealias))


def check_on_manifold(u: Field, tol: float = MANIFOLD_TOL) -> None:
    r = norm_l2(u)
    if abs(r - 1.0) > tol:
        raise ManifoldError(f"|u|_L2 = {r!r} is off the unit sphere by more than {tol}")


@dataclass(frozen=True)
class TangentVector:
    """A vector ``vec`` attached to a sphere point ``base`` with <vec, base> = 0."""

    base: Field
    vec: Field

    def __post_init__(self):
        check_on_manifold(self.base)
        ip = inner_l2(self.vec, self.base)
        scale = norm_l2(self.vec) * norm_l2(self.base)
        if abs(ip) > 1e-10 * max(scale, 1e-300):
            raise ManifoldError(f"vector is not tangent: <vec, base> = {ip!r}")


_fine_grid_cache: dict = {}


def _fine_grid(grid: SpectralGrid, factor: int) -> SpectralGrid:
    spec = grid.spec
    key = (spec, factor)
    if key not in _fine_grid_cache:
        fine = DomainSpec(
            spec.dim,
            spec.lengths,
            tuple(factor * n for n in spec.resolution),
            spec.boundary,
        )
        _fine_grid_cache[key] = SpectralGrid(fine)
    return _fine_grid_cache[key]


def _pad_to_fine(u: Field, factor: int) -> Field:
    """Evaluate u on a grid refined by ``factor`` via coefficient zero-padding."""
    if u.grid.spec.boundary != "dirichlet_navier":
        # the periodic basis interleaves cosine/sine pairs and rescales the
        # Nyquist row, so plain coefficient slicing would mis-embed it
        raise NotImplementedError(
            "zero-pad dealiasing is only implemented for the sine basis"
        )
    fine = _fine_grid(u.grid, factor)
    coeffs = np.zeros(fine.shape)
    sl = tuple(slice(0, n) for n in u.grid.shape)
    coeffs[sl] = u.grid.to_coeffs(u.values)
    return transform_inverse(SpectralField(fine, coeffs))


def _truncate_from_fine(w: Field, grid: SpectralGrid) -> Field:
    sl = tuple(slice(0, n) for n in grid.shape)
    coeffs = w.grid.to_coeffs(w.values)[sl]
    return transform_inverse(SpectralField(grid, coeffs))


def _pointwise_power(values: np.ndarray, n, signed: bool) -> np.ndarray:
    if signed:
        return np.sign(values) * np.abs(values) ** (2 * n - 1)
    return values ** (2 * int(n) - 1)


def _raise_overflow(values: np.ndarray):
    i = np.unravel_index(np.argmax(np.abs(values)), values.shape)
    raise OverflowError(
        f"u^(2n-1) overflowed; |u| peaks at index {i} with {values[i]!r}"
    )


def _power_values(values: np.ndarray, n, signed: bool) -> np.ndarray:
    with np.errstate(over="raise"):
        try:
            w = _pointwise_power(values, n, signed)
        except FloatingPointError:
            _raise_overflow(values)
    if not np.all(np.isfinite(w)):
        _raise_overflow(values)
    return w


def power_term(u: Field, n, dealias: int | None = None, signed: bool = False) -> Field:
    """Pointwise odd power u^(2n-1), optionally dealiased by zero padding."""
    if dealias is None:
        return Field._wrap(u.grid, _power_values(u.values, n, signed))
    fine = _pad_to_fine(u, int(dealias))
    w = Field._wrap(fine.grid, _power_values(fine.values, n, signed))
    return _truncate_from_fine(w, u.grid)


def l2n_power(u: Field, n, dealias: int | None = None, signed: bool = False) -> float:
    """The integral of u^{2n}, on the padded grid when dealiasing is active."""
    v = u if dealias is None else _pad_to_fine(u, int(dealias))
    if signed:
        return float(v.grid.weight * np.sum(np.abs(v.values) ** (2 * n)))
    return float(v.grid.weight * np.sum(v.values ** (2 * int(n))))


def _F_values(grid: SpectralGrid, values: np.ndarray, coeffs: np.ndarray,
              p: ModelParams) -> np.ndarray:
    """F(u) values given both representations of u."""
    c2 = coeffs**2
    h1sq = float((grid.lap_eigs * c2).sum())
    h2sq = float((grid.lap_eigs**2 * c2).sum())
    if p.dealias is None and not p.signed_power:
        s = float(grid.weight * np.sum(values ** (2 * int(p.n))))
        w = _power_values(values, p.n, False)
    else:
        u = Field._wrap(grid, values)
        s = l2n_power(u, p.n, p.dealias, p.signed_power)
        w = power_term(u, p.n, p.dealias, p.signed_power).values
    return (h2sq + 2.0 * h1sq + s) * values - w


def nonlinearity_F(u: Field, p: ModelParams) -> Field:
    """The four-term nonlinearity F(u); every norm factor is quadrature-consistent
    with power_term so the discrete flow keeps the exact gradient structure."""
    return Field._wrap(
        u.grid, _F_values(u.grid, u.values, u.grid.to_coeffs(u.values), p)
    )


def project_tangent(u: Field, h: Field) -> Field:
    """Orthogonal projection h - <h, u> u onto the tangent space at u in M."""
    check_on_manifold(u)
    return Field._wrap(u.grid, h.values - inner_l2(h, u) * u.values)


def expanded_rhs(u: Field, p: ModelParams) -> Field:
    """-A u + F(u) without the unit-sphere precondition.

    Coincides with projected_rhs on M; integrate() uses it for the
    dissipation ledger so that deliberately off-manifold runs (retraction
    disabled) remain well defined.
    """
    grid = u.grid
    c = grid.to_coeffs(u.values)
    f = _F_values(grid, u.values, c, p)
    return Field._wrap(grid, f - grid.to_values(grid.A_eigs * c))


def projected_rhs(u: Field, p: ModelParams) -> Field:
    """Expanded projected vector field -A u + F(u); independent of a on M."""
    check_on_manifold(u)
    return expanded_rhs(u, p)


def projected_rhs_direct(u: Field, p: ModelParams) -> Field:
    """Literal projection pi_u(-A u - a u - u^(2n-1)) of the unexpanded field."""
    g = unprojected_rhs(u, p)
    return project_tangent(u, g)


def unprojected_rhs(u: Field, p: ModelParams) -> Field:
    """The raw right-hand side -A u - a u - u^(2n-1) before any projection."""
    grid = u.grid
    c = grid.to_coeffs(u.values)
    w = power_term(u, p.n, p.dealias, p.signed_power)
    return Field._wrap(
        grid, -grid.to_values(grid.A_eigs * c) - p.a * u.values - w.values
    )


def rayleigh_quotient(u: Field) -> float:
    """<A u, u> / <u, u>; on M this is the Dirichlet quotient of A."""
    _, h1sq, h2sq = sobolev_norms_sq(u)
    return (h2sq + 2.0 * h1sq) / norm_l2(u) ** 2


def random_unit_field(grid: SpectralGrid, rng: np.random.Generator, decay: float = 3.0) -> Field:
    """Seeded random state on M: |k|^-decay spectral profile, L2-normalized."""
    from .spectral import random_coeff_field

    u = random_coeff_field(grid, rng, decay)
    r = norm_l2(u)
    if r == 0.0:
        raise ValueError("degenerate zero sample")
    return Field(grid, u.values / r)
