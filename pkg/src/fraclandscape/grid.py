"""Periodic uniform grids on [0,1]^d and discrete Fourier transforms.

Conventions used throughout the package:

* the grid has N points per direction, spacing h = 1/N, nodes x_i = i*h;
* wave indices run over {-N/2, ..., N/2-1} and are stored in wrapped
  (standard FFT) order, i.e. index k lives at array position k mod N;
* the forward transform carries the h^dim quadrature prefactor and the
  inverse carries none, so a forward/inverse round trip is the identity;
* inner products and norms are h^dim-weighted so they approximate the
  continuum L2 quantities independently of resolution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, GridMismatchError


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid descriptor: dimension and points per direction."""

    dim: int
    N: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ContractError(f"dim must be 1 or 2, got {self.dim}")
        if self.N < 4 or self.N % 2 != 0:
            raise ContractError(f"N must be an even integer >= 4, got {self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.dim

    @property
    def npoints(self) -> int:
        return self.N**self.dim

    def wave_indices(self) -> np.ndarray:
        """Integer wave numbers in wrapped storage order: 0..N/2-1, -N/2..-1."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N).astype(np.int64)

    def coords(self):
        """Grid node coordinates; x for 1D, meshgrid (X, Y) with X[i,j]=x_i for 2D."""
        x = np.arange(self.N) * self.h
        if self.dim == 1:
            return x
        return np.meshgrid(x, x, indexing="ij")

    def multipliers(self) -> np.ndarray:
        """Base symbol 4*pi^2*|k|^2 on the full wrapped index set."""
        k = self.wave_indices().astype(float)
        if self.dim == 1:
            return 4.0 * np.pi**2 * k**2
        k2 = k**2
        return 4.0 * np.pi**2 * (k2[:, None] + k2[None, :])


def multiplier(index, dim: int = 1) -> float:
    """Base symbol 4*pi^2*k^2 (1D) or 4*pi^2*(k^2+l^2) (2D) for one wave index."""
    if np.isscalar(index):
        if dim != 1:
            raise ContractError("scalar index requires dim=1")
        return 4.0 * np.pi**2 * float(index) ** 2
    k, l = index
    return 4.0 * np.pi**2 * (float(k) ** 2 + float(l) ** 2)


@dataclass(frozen=True)
class RealField:
    """Real-valued samples on a grid, row-major by (i, j) in 2D."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ContractError(
                f"values shape {v.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ContractError("field values must be finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "RealField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "RealField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "RealField":
        if grid.dim == 1:
            return cls(grid, fn(grid.coords()))
        X, Y = grid.coords()
        return cls(grid, fn(X, Y))

    def with_values(self, values: np.ndarray) -> "RealField":
        return RealField(self.grid, values)

    def to_csv(self, path) -> None:
        write_field_csv(self, path)

    @classmethod
    def from_csv(cls, path) -> "RealField":
        return read_field_csv(path)


@dataclass(frozen=True)
class SpectralField:
    """Complex Fourier coefficients on the wrapped wave-index set of a grid."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise ContractError(
                f"coeffs shape {c.shape} does not match grid shape {self.grid.shape}"
            )
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)


def grid_inner(grid: GridSpec, a: np.ndarray, b: np.ndarray) -> float:
    """h^dim-weighted discrete L2 inner product."""
    return float(grid.h**grid.dim * np.sum(a * b))


def grid_norm(grid: GridSpec, a: np.ndarray) -> float:
    return float(np.sqrt(grid.h**grid.dim * np.sum(a * a)))


def inner(a: RealField, b: RealField) -> float:
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")
    return grid_inner(a.grid, a.values, b.values)


def norm(a: RealField) -> float:
    return grid_norm(a.grid, a.values)


def forward_transform(u: RealField) -> SpectralField:
    """Discrete Fourier analysis with the h^dim quadrature prefactor."""
    g = u.grid
    c = np.fft.fftn(u.values) * g.h**g.dim
    return SpectralField(g, c)


def inverse_transform(c: SpectralField, return_residue: bool = False):
    """Fourier synthesis at the grid nodes.

    Returns the real part of the synthesized samples; the discarded maximum
    imaginary magnitude is available as a diagnostic via return_residue=True.
    """
    g = c.grid
    w = np.fft.ifftn(c.coeffs) * g.npoints
    residue = float(np.max(np.abs(w.imag))) if w.size else 0.0
    field = RealField(g, w.real)
    if return_residue:
        return field, residue
    return field


# --- CSV serialization -------------------------------------------------------

_FMT = "%.17g"


def write_field_csv(u: RealField, path) -> None:
    g = u.grid
    with open(path, "w") as f:
        f.write(f"# grid dim={g.dim} N={g.N}\n")
        if g.dim == 1:
            for v in u.values:
                f.write(_FMT % v + "\n")
        else:
            for row in u.values:
                f.write(",".join(_FMT % v for v in row) + "\n")


def read_field_csv(path) -> RealField:
    with open(path) as f:
        header = f.readline().strip()
        if not header.startswith("# grid"):
            raise ContractError(f"{path}: missing '# grid' header line")
        parts = dict(p.split("=") for p in header[len("# grid") :].split())
        dim, N = int(parts["dim"]), int(parts["N"])
        rows = [line.strip() for line in f if line.strip()]
    grid = GridSpec(dim, N)
    if dim == 1:
        values = np.array([float(r) for r in rows])
    else:
        values = np.array([[float(v) for v in r.split(",")] for r in rows])
    return RealField(grid, values)
