"""Space-fractional phase-field model: force, energy, Jacobian action, index.

The force is F(u) = -kappa * (-Delta)^(alpha/2) u + u - u^3 with three
variants: constant order (gradient system), variable order via the fast
expansion (non-gradient), and the integer-order model with a variable
diffusion coefficient kappa(x) (non-gradient). The cubic term is evaluated
pointwise in physical space (collocation, no dealiasing).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import (
    ConfigError,
    ContractError,
    DomainError,
    GridMismatchError,
    UnsupportedModelError,
)
from .fracop import (
    ConstantOrder,
    ExpansionPlan,
    VariableOrder,
    constant_order_apply,
    variable_order_apply_fast,
)
from .grid import (
    GridSpec,
    RealField,
    SpectralField,
    forward_transform,
    inverse_transform,
    norm,
)

OrderSpec = Union[ConstantOrder, VariableOrder]


@dataclass(frozen=True)
class DimerParams:
    """Half-length of the central-difference dimer along a unit direction."""

    l: float = 1e-4

    def __post_init__(self):
        if self.l <= 0.0:
            raise DomainError(f"dimer half-length must be positive, got {self.l}")


@dataclass(frozen=True)
class ModelParams:
    """Grid, fractional order, diffusion coefficient and optional fast plan.

    A variable kappa is only admitted together with order exactly 2 (the
    variable-coefficient integer-order variant); a variable order requires a
    precomputed expansion plan and a constant kappa.
    """

    grid: GridSpec
    order: OrderSpec
    kappa: Union[float, RealField]
    fast_plan: Optional[ExpansionPlan] = None

    def __post_init__(self):
        if isinstance(self.kappa, RealField):
            if self.kappa.grid != self.grid:
                raise GridMismatchError("kappa field does not live on the model grid")
            if np.min(self.kappa.values) <= 0.0:
                raise DomainError("kappa field values must be strictly positive")
            if not (isinstance(self.order, ConstantOrder) and self.order.alpha == 2.0):
                raise ConfigError(
                    "a variable diffusion coefficient requires constant order 2"
                )
        else:
            if self.kappa <= 0.0:
                raise DomainError(f"kappa must be positive, got {self.kappa}")
        if isinstance(self.order, VariableOrder):
            if self.order.field.grid != self.grid:
                raise GridMismatchError("order field does not live on the model grid")
            if not isinstance(self.kappa, RealField) and self.fast_plan is not None:
                if self.fast_plan.grid != self.grid:
                    raise GridMismatchError("fast plan does not live on the model grid")

    @property
    def is_gradient(self) -> bool:
        """True for the constant-order, constant-coefficient (gradient) variant."""
        return isinstance(self.order, ConstantOrder) and not isinstance(
            self.kappa, RealField
        )


def fractional_term(u: RealField, p: ModelParams) -> np.ndarray:
    """(-Delta)^(alpha/2) u for the configured order, as a raw array."""
    if isinstance(p.order, ConstantOrder):
        return constant_order_apply(u, p.order.alpha).values
    if p.fast_plan is None:
        raise ConfigError("variable-order models require a precomputed fast plan")
    return variable_order_apply_fast(u, p.order, p.fast_plan).values


def make_force(p: ModelParams, cubic: bool = True):
    """Compile the force into a raw-array evaluator for hot loops.

    Returns a function mapping a value array to F(values) with all
    grid-dependent quantities (symbol arrays, expansion multipliers)
    precomputed once. Leading axes beyond the grid shape are treated as batch
    dimensions. Mathematically identical to `rhs`, which remains the
    reference implementation.
    """
    g = p.grid
    kappa = p.kappa.values if isinstance(p.kappa, RealField) else p.kappa
    # the symbol depends on the wavenumber only through its magnitude, so the
    # half-spectrum of a real FFT carries the full operator
    if g.dim == 1:
        rfft_ = lambda v: np.fft.rfft(v, axis=-1)
        irfft_ = lambda c: np.fft.irfft(c, n=g.N, axis=-1)
    else:
        rfft_ = lambda v: np.fft.rfft2(v, axes=(-2, -1))
        irfft_ = lambda c: np.fft.irfft2(c, s=g.shape, axes=(-2, -1))
    if isinstance(p.order, ConstantOrder):
        lam = g.multipliers()
        sym = np.zeros_like(lam)
        nz = lam > 0.0
        sym[nz] = lam[nz] ** (p.order.alpha / 2.0)
        sym_r = sym[..., : g.N // 2 + 1].copy()

        def frac(values):
            return irfft_(sym_r * rfft_(values))

    else:
        if p.fast_plan is None:
            raise ConfigError("variable-order models require a precomputed fast plan")
        tm = p.fast_plan.term_multipliers[..., : g.N // 2 + 1].copy()
        shift = p.order.field.values - 1.0

        def frac(values):
            c = rfft_(values)
            acc = irfft_(tm[0] * c)
            weight = shift.copy()
            for s in range(1, tm.shape[0]):
                acc += weight * irfft_(tm[s] * c)
                weight = weight * shift
            return acc

        if g.dim == 1:
            # at 1D sizes a dense matrix application beats S+1 transforms
            # per call; rows of frac(I) give the operator columns
            op_rows = frac(np.eye(g.N))

            def frac(values):  # noqa: F811
                return values @ op_rows

    if cubic:

        def force(values):
            # values * values * values: np.power is an order of magnitude
            # slower than two multiplies on these array sizes
            return -kappa * frac(values) + values - values * values * values

    else:

        def force(values):
            return -kappa * frac(values) + values

    return force


def rhs(u: RealField, p: ModelParams, cubic: bool = True) -> RealField:
    """Force F(u) = -kappa * (-Delta)^(alpha/2) u + u - u^3.

    `cubic=False` drops the cubic term; this linear variant exists as a test
    hook for exactness checks of the dimer.
    """
    if u.grid != p.grid:
        raise GridMismatchError("state field does not live on the model grid")
    frac = fractional_term(u, p)
    kappa = p.kappa.values if isinstance(p.kappa, RealField) else p.kappa
    out = -kappa * frac + u.values
    if cubic:
        out = out - u.values * u.values * u.values
    return RealField(u.grid, out)


def _spectral_gradient(u: RealField) -> list:
    g = u.grid
    c = forward_transform(u).coeffs
    k = g.wave_indices().astype(float)
    parts = []
    if g.dim == 1:
        parts.append(inverse_transform(SpectralField(g, 2j * np.pi * k * c)).values)
    else:
        parts.append(
            inverse_transform(SpectralField(g, 2j * np.pi * k[:, None] * c)).values
        )
        parts.append(
            inverse_transform(SpectralField(g, 2j * np.pi * k[None, :] * c)).values
        )
    return parts


def energy(u: RealField, p: ModelParams) -> float:
    """Ginzburg-Landau energy for the integer-order constant-coefficient model.

    No energy functional is defined for fractional or variable-order variants.
    """
    if not (
        isinstance(p.order, ConstantOrder)
        and p.order.alpha == 2.0
        and not isinstance(p.kappa, RealField)
    ):
        raise UnsupportedModelError(
            "energy is defined only for constant order 2 with constant kappa"
        )
    if u.grid != p.grid:
        raise GridMismatchError("state field does not live on the model grid")
    g = u.grid
    grad_sq = sum(gpart**2 for gpart in _spectral_gradient(u))
    density = 0.5 * p.kappa * grad_sq + 0.25 * (1.0 - u.values**2) ** 2
    return float(g.h**g.dim * np.sum(density))


def jacobian_apply(
    u: RealField, v: RealField, p: ModelParams, d: DimerParams = DimerParams()
) -> RealField:
    """Dimer approximation [F(u + l v) - F(u - l v)] / (2 l) of J(u) v.

    Requires v to have unit h^dim-weighted L2 norm.
    """
    if u.grid != v.grid or u.grid != p.grid:
        raise GridMismatchError("state and direction must live on the model grid")
    nv = norm(v)
    if abs(nv - 1.0) > 1e-8:
        raise ContractError(f"direction must have unit grid norm, got {nv}")
    l = d.l
    up = RealField(u.grid, u.values + l * v.values)
    um = RealField(u.grid, u.values - l * v.values)
    return RealField(u.grid, (rhs(up, p).values - rhs(um, p).values) / (2.0 * l))


def homogeneous_spectrum(p: ModelParams, state: float) -> np.ndarray:
    """Linearized eigenvalues of F at a homogeneous state, sorted descending."""
    if not p.is_gradient:
        raise UnsupportedModelError(
            "analytic spectra require constant order and constant kappa; "
            "use compute_index for variable models"
        )
    if state not in (0.0, 1.0, -1.0):
        raise DomainError(f"homogeneous state must be one of 0, +1, -1, got {state}")
    lam = p.grid.multipliers()
    sym = np.zeros_like(lam)
    nz = lam > 0.0
    sym[nz] = lam[nz] ** (p.order.alpha / 2.0)
    eigs = (1.0 - 3.0 * state**2) - p.kappa * sym
    return np.sort(eigs.reshape(-1))[::-1]


def homogeneous_index(
    p: ModelParams, state: float = 0.0, degenerate_tol: float = 1e-12
) -> int:
    """Count of unstable linearized modes at a homogeneous state.

    Eigenvalues within +-degenerate_tol of zero are flagged (bifurcation
    vicinity) rather than silently counted.
    """
    eigs = homogeneous_spectrum(p, state)
    n_degenerate = int(np.sum(np.abs(eigs) <= degenerate_tol))
    if n_degenerate:
        warnings.warn(
            f"{n_degenerate} linearized eigenvalue(s) within {degenerate_tol} of zero; "
            "the index is ambiguous at this parameter point",
            stacklevel=2,
        )
    return int(np.sum(eigs > degenerate_tol))
