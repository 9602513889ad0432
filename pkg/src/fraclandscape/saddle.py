"""Discrete high-index saddle dynamics and a-posteriori index computation.

One iteration reflects the force across the span of the k direction fields,
updates each direction by a raw dimer step at the new state, and restores
orthonormality with a modified Gram-Schmidt pass; the same discrete form
serves gradient and non-gradient models. All projections use the
h^dim-weighted inner product.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .errors import CapacityError, ContractError, DegeneracyError, GridMismatchError
from .grid import GridSpec, RealField, grid_inner, grid_norm
from .phasefield import DimerParams, ModelParams, jacobian_apply, make_force, rhs

#: largest state dimension for which a dense Jacobian eigensolve is attempted
DENSE_INDEX_CAP = 4096

#: eigenvalues with real part above this threshold count as unstable;
#: eigenvalues within +-tol of zero are flagged as degenerate
INDEX_ZERO_TOL = 1e-8

#: state-norm threshold treated as divergence of the explicit iteration
DIVERGENCE_NORM = 1e3


@dataclass(frozen=True)
class SaddleConfig:
    """Step sizes, dimer length, and convergence controls for one trajectory."""

    k: int
    tau: float = 1e-3
    sigma: float = 1e-3
    dimer: DimerParams = field(default_factory=DimerParams)
    max_iters: int = 1_000_000
    resid_tol: float = 1e-8
    direction_tol: float = 1e-8
    k_cap: int = 20

    def __post_init__(self):
        if self.k < 0 or self.k > self.k_cap:
            raise ContractError(f"target index must lie in [0, {self.k_cap}], got {self.k}")
        for name in ("tau", "sigma", "resid_tol", "direction_tol"):
            if getattr(self, name) <= 0.0:
                raise ContractError(f"{name} must be positive")


@dataclass(frozen=True)
class SaddleState:
    """State field plus k orthonormal direction fields and iteration metadata."""

    u: RealField
    directions: np.ndarray  # shape (k, *grid.shape)
    iter: int = 0
    residual: float = float("nan")

    def __post_init__(self):
        V = np.asarray(self.directions, dtype=float)
        if V.ndim != self.u.grid.dim + 1 or V.shape[1:] != self.u.grid.shape:
            raise ContractError("direction stack shape does not match the grid")
        V = V.copy()
        V.flags.writeable = False
        object.__setattr__(self, "directions", V)

    @property
    def k(self) -> int:
        return self.directions.shape[0]


@dataclass
class ConvergenceReport:
    converged: bool
    final_residual: float
    iters: int
    reason: str = ""
    index: Optional[int] = None
    eigenvalues: Optional[List[float]] = None


def orthonormalize(V: np.ndarray, grid: GridSpec, degeneracy_tol: float = 1e-10) -> np.ndarray:
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    Vectors are rows of V over the grid; inner products are h^dim-weighted.
    Raises DegeneracyError naming the first numerically dependent column.
    """
    V = np.array(V, dtype=float)
    k = V.shape[0]
    for _ in range(2):  # second pass restores orthogonality lost to round-off
        for i in range(k):
            for j in range(i):
                V[i] -= grid_inner(grid, V[j], V[i]) * V[j]
            nrm = grid_norm(grid, V[i])
            if nrm < degeneracy_tol:
                raise DegeneracyError(i, nrm)
            V[i] /= nrm
    return V


def initial_directions(grid: GridSpec, k: int) -> np.ndarray:
    """Leading unit Fourier modes sorted by symbol value ascending.

    These are the analytically softest directions at the homogeneous zero
    state and the default direction initialization when none is supplied.
    """
    lam = grid.multipliers()
    idx = grid.wave_indices()
    if grid.dim == 1:
        keys = sorted((float(lam[pos]), abs(int(kk)), int(kk)) for pos, kk in enumerate(idx))
        modes = [(key[2], None) for key in keys]
    else:
        keys = sorted(
            (float(lam[pi, pj]), abs(int(ki)) + abs(int(kj)), int(ki), int(kj))
            for pi, ki in enumerate(idx)
            for pj, kj in enumerate(idx)
        )
        modes = [(key[2], key[3]) for key in keys]
    coords = grid.coords()
    out: list = []
    for ki, kj in modes:
        if grid.dim == 1:
            phase = 2 * np.pi * ki * coords
        else:
            phase = 2 * np.pi * (ki * coords[0] + kj * coords[1])
        for trig in (np.cos, np.sin):
            w = trig(phase)
            for existing in out:
                w = w - grid_inner(grid, existing, w) * existing
            nrm = grid_norm(grid, w)
            if nrm < 1e-8:  # sin of the zero mode, duplicates of +-k pairs
                continue
            out.append(w / nrm)
            if len(out) == k:
                return np.array(out)
    raise ContractError(f"cannot build {k} orthonormal Fourier directions on this grid")


def step(s: SaddleState, p: ModelParams, c: SaddleConfig) -> SaddleState:
    """One discrete saddle-dynamics iteration.

    The direction update applies the raw dimer at the new state; projection is
    delegated entirely to the subsequent orthonormalization.
    """
    g = s.u.grid
    f = rhs(s.u, p).values
    residual = grid_norm(g, f)
    force = f.copy()
    for j in range(s.k):
        force -= 2.0 * grid_inner(g, s.directions[j], f) * s.directions[j]
    u_new = RealField(g, s.u.values + c.tau * force)
    if s.k == 0:
        return SaddleState(u_new, s.directions, s.iter + 1, residual)
    V_new = np.empty_like(s.directions)
    for i in range(s.k):
        v = RealField(g, s.directions[i])
        jv = jacobian_apply(u_new, v, p, c.dimer).values
        V_new[i] = s.directions[i] + c.sigma * jv
    V_new = orthonormalize(V_new, g)
    return SaddleState(u_new, V_new, s.iter + 1, residual)


def stable_step_bound(p: ModelParams) -> float:
    """Explicit-Euler stability bound for the stiffest linearized mode."""
    from .fracop import ConstantOrder

    lam_max = float(np.max(p.grid.multipliers()))
    if isinstance(p.order, ConstantOrder):
        alpha_max = p.order.alpha
    else:
        alpha_max = float(np.max(p.order.field.values))
    kappa_max = (
        float(np.max(p.kappa.values)) if not np.isscalar(p.kappa) else float(p.kappa)
    )
    stiff = kappa_max * lam_max ** (alpha_max / 2.0) + 1.0
    return 1.8 / stiff


def run(
    s0: SaddleState,
    p: ModelParams,
    c: SaddleConfig,
    log_path=None,
    log_stride: int = 0,
):
    """Iterate the saddle dynamics to convergence or exhaustion.

    Convergence requires both the force norm and the largest direction change
    to fall below their tolerances. Step sizes are clamped a priori to the
    explicit stability bound of the stiffest linearized mode; genuine blow-up
    (non-finite or huge residual or state) additionally halves both step
    sizes and retries from the current iterate. Persistent divergence or
    iteration exhaustion yields a non-converged report rather than an error.
    """
    if s0.k != c.k:
        raise ContractError(f"state carries {s0.k} directions but config targets k={c.k}")
    g = s0.u.grid
    bound = stable_step_bound(p)
    tau = min(c.tau, bound)
    sigma = min(c.sigma, bound)
    force = make_force(p)
    weight = g.h**g.dim
    l = c.dimer.l
    k = c.k

    def wnorm(a):
        return float(np.sqrt(weight * np.vdot(a, a).real))

    u = s0.u.values.copy()
    V = s0.directions.copy()
    niter = s0.iter
    halvings = 0
    log_file = open(log_path, "w") if log_path and log_stride > 0 else None
    if log_file:
        ray_cols = ",".join(f"rayleigh_{i+1}" for i in range(k))
        log_file.write("iter,residual,du_norm" + ("," + ray_cols if k else "") + "\n")
    try:
        f = force(u)
        for _ in range(c.max_iters):
            resid = wnorm(f)
            fr = f
            for j in range(k):
                fr = fr - (2.0 * weight * np.vdot(V[j], f).real) * V[j]
            u_new = u + tau * fr
            # residual growth alone is legitimate (escape from an unstable
            # stationary point); only genuine blow-up triggers a revert
            overflow = not np.isfinite(resid) or resid > 1e6
            V_new = V
            f_new = f
            if not overflow and k:
                # one batched evaluation: the force at the new state plus all
                # 2k dimer probes around it
                probes = np.concatenate([u_new[None], u_new + l * V, u_new - l * V])
                fp = force(probes)
                f_new = fp[0]
                V_new = V + (sigma / (2.0 * l)) * (fp[1 : k + 1] - fp[k + 1 :])
                try:
                    V_new = orthonormalize(V_new, g)
                except DegeneracyError:
                    overflow = True
            elif not overflow:
                f_new = force(u_new)
            if (
                overflow
                or not np.all(np.isfinite(u_new))
                or wnorm(u_new) > DIVERGENCE_NORM
            ):
                halvings += 1
                if halvings > 30:
                    state = SaddleState(RealField(g, u), V, niter, resid)
                    return state, ConvergenceReport(
                        False, resid, niter, reason="diverged"
                    )
                tau /= 2.0
                sigma /= 2.0
                continue
            niter += 1
            du = wnorm(u_new - u)
            dv = max((wnorm(V_new[i] - V[i]) for i in range(k)), default=0.0)
            if log_file and niter % log_stride == 0:
                row = f"{niter},{resid:.17g},{du:.17g}"
                for i in range(k):
                    jv = (
                        force(u_new + l * V_new[i]) - force(u_new - l * V_new[i])
                    ) / (2.0 * l)
                    row += f",{weight * np.vdot(V_new[i], jv).real:.17g}"
                log_file.write(row + "\n")
            u = u_new
            V = V_new
            f = f_new
            # resid is the force norm at the pre-step point; confirm
            # convergence against the fresh force at the new state
            if resid <= c.resid_tol and dv <= c.direction_tol:
                final_resid = wnorm(f)
                if final_resid <= c.resid_tol:
                    state = SaddleState(RealField(g, u), V, niter, final_resid)
                    return state, ConvergenceReport(True, final_resid, niter)
        final_resid = wnorm(f)
        state = SaddleState(RealField(g, u), V, niter, final_resid)
        return state, ConvergenceReport(
            False, final_resid, niter, reason="max_iters"
        )
    finally:
        if log_file:
            log_file.close()


def assemble_jacobian(
    u: RealField, p: ModelParams, d: DimerParams = DimerParams()
) -> np.ndarray:
    """Dense Jacobian from dimer products against all grid basis vectors."""
    g = u.grid
    M = g.npoints
    if M > DENSE_INDEX_CAP:
        raise CapacityError(
            f"dense index certification supports at most {DENSE_INDEX_CAP} unknowns; "
            f"got {M}. Use a smaller grid."
        )
    scale = np.sqrt(g.h**g.dim)
    force = make_force(p)
    uv = u.values
    l = d.l
    J = np.empty((M, M))
    basis = np.zeros(M)
    for i in range(M):
        basis[i] = 1.0 / scale
        v = basis.reshape(g.shape)
        col = (force(uv + l * v) - force(uv - l * v)) / (2.0 * l)
        J[:, i] = scale * col.reshape(-1)
        basis[i] = 0.0
    return J


def unstable_directions(
    u: RealField,
    p: ModelParams,
    d: DimerParams = DimerParams(),
    zero_tol: float = INDEX_ZERO_TOL,
):
    """Index, spectrum and an orthonormal basis of the unstable subspace.

    Like compute_index but also returns the eigenvectors for eigenvalues
    above zero_tol as grid fields of unit weighted norm, shape (index,) +
    grid.shape. These are the reliable expansion directions for a saddle
    found by the dynamics: the directions carried by the run itself can be
    locked into a symmetry-invariant subspace of the trajectory and miss
    part of the true unstable subspace.
    """
    J = assemble_jacobian(u, p, d)
    g = u.grid
    scale = np.sqrt(g.h**g.dim)
    if p.is_gradient:
        eigs, vecs = np.linalg.eigh(0.5 * (J + J.T))
        eigs, vecs = eigs[::-1], vecs[:, ::-1]
        real_parts = eigs
        spectrum = [float(e) for e in eigs]
        raw = [vecs[:, j] for j in range(int(np.sum(eigs > zero_tol)))]
    else:
        eigs, vecs = np.linalg.eig(J)
        order = np.argsort(-eigs.real)
        eigs, vecs = eigs[order], vecs[:, order]
        real_parts = eigs.real
        spectrum = [complex(e) for e in eigs]
        raw = []
        for j in range(int(np.sum(real_parts > zero_tol))):
            for part in (vecs[:, j].real, vecs[:, j].imag):
                if np.linalg.norm(part) > 1e-10:
                    raw.append(part)
    index = int(np.sum(real_parts > zero_tol))
    directions = None
    if index:
        fields = [c.reshape(g.shape) / scale for c in raw]
        directions = orthonormalize_subset(np.array(fields), g, index)
    return index, spectrum, directions


def orthonormalize_subset(V: np.ndarray, grid: GridSpec, count: int) -> np.ndarray:
    """First `count` orthonormal vectors spanned by the rows of V.

    Unlike orthonormalize, numerically dependent rows are skipped rather
    than rejected (complex eigenpairs contribute redundant real/imag parts).
    """
    out: list = []
    for row in V:
        w = row.copy()
        for existing in out:
            w -= grid_inner(grid, existing, w) * existing
        nrm = grid_norm(grid, w)
        if nrm < 1e-8:
            continue
        out.append(w / nrm)
        if len(out) == count:
            break
    if len(out) < count:
        raise DegeneracyError(len(out), 0.0)
    return np.array(out)


def compute_index(
    u: RealField,
    p: ModelParams,
    d: DimerParams = DimerParams(),
    zero_tol: float = INDEX_ZERO_TOL,
):
    """Morse index of an approximately stationary state from the dense Jacobian.

    Counts eigenvalues with real part above zero_tol, which covers the
    gradient case (negative-Hessian count) and the non-gradient case
    (positive-real-part count) uniformly. Returns (index, eigenvalues sorted
    by descending real part). Gradient models use the symmetrized matrix and a
    symmetric eigensolver; dimer asymmetry there is pure noise.
    """
    J = assemble_jacobian(u, p, d)
    if p.is_gradient:
        eigs = np.linalg.eigvalsh(0.5 * (J + J.T))[::-1]
        real_parts = eigs
        spectrum = [float(e) for e in eigs]
    else:
        eigs = np.linalg.eigvals(J)
        order = np.argsort(-eigs.real)
        eigs = eigs[order]
        real_parts = eigs.real
        spectrum = [complex(e) for e in eigs]
    n_degenerate = int(np.sum(np.abs(real_parts) <= zero_tol))
    if n_degenerate:
        warnings.warn(
            f"{n_degenerate} Jacobian eigenvalue(s) within {zero_tol} of zero; "
            "the computed index is ambiguous",
            stacklevel=2,
        )
    return int(np.sum(real_parts > zero_tol)), spectrum
