"""Solution-landscape construction on top of the saddle dynamics.

Converged stationary states are canonicalized modulo the model's exact grid
symmetries (translations, global sign flip), deduplicated by a quantized
signature, certified with a dense-Jacobian index, and assembled into a
directed graph whose edges record the search that produced each connection.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field as dc_field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractError, UnsupportedModelError
from .fracop import ConstantOrder, VariableOrder, constant_order_apply
from .grid import GridSpec, RealField, grid_norm, norm
from .phasefield import (
    ModelParams,
    fractional_term,
    homogeneous_index,
    homogeneous_spectrum,
    rhs,
)
from .saddle import (
    INDEX_ZERO_TOL,
    ConvergenceReport,
    SaddleConfig,
    SaddleState,
    compute_index,
    initial_directions,
    orthonormalize,
    run,
    unstable_directions,
)

SIGNATURE_QUANTUM = 1e-6

DEFAULT_EPSILON = 0.1
DEFAULT_BRANCH_BUDGET = 64
DEFAULT_NODE_BUDGET = 512


# --- canonicalization --------------------------------------------------------


def _quantize(values: np.ndarray) -> np.ndarray:
    return np.round(values / SIGNATURE_QUANTUM).astype(np.int64)


def _lex_greater(a: np.ndarray, b: np.ndarray) -> bool:
    diff = a - b
    nz = np.nonzero(diff.reshape(-1))[0]
    if nz.size == 0:
        return False
    return diff.reshape(-1)[nz[0]] > 0


def canonicalize(
    u: RealField, translation: bool = True, sign: bool = True
) -> Tuple[RealField, str, Tuple[int, Tuple[int, ...]]]:
    """Symmetry-orbit representative, its signature, and the applied transform.

    Among the enabled symmetry images the representative is the one whose
    value sequence, rolled so a position of the maximum value comes first, is
    lexicographically largest after quantization. Returns (representative,
    signature, (sign, shift)) where applying `sign` and rolling by `shift`
    maps the input onto the representative.
    """
    g = u.grid
    axes = tuple(range(g.dim))
    best = None
    signs = (1, -1) if sign else (1,)
    for s in signs:
        w = s * u.values
        q = _quantize(w)
        if translation and np.ptp(q) != 0:
            flat_max = np.flatnonzero(q.reshape(-1) == q.max())
            shifts = [np.unravel_index(i, g.shape) for i in flat_max]
        else:
            shifts = [(0,) * g.dim]
        for shift in shifts:
            cand = np.roll(w, tuple(-x for x in shift), axis=axes)
            qc = _quantize(cand)
            if best is None or _lex_greater(qc, best[0]):
                best = (qc, cand, s, shift)
    q_best, values, s, shift = best
    rep = RealField(g, values)
    sig = hashlib.sha1(
        q_best.tobytes() + f"|{g.dim}|{g.N}".encode()
    ).hexdigest()[:16]
    return rep, sig, (s, tuple(int(x) for x in shift))


def apply_transform(values: np.ndarray, transform) -> np.ndarray:
    """Apply a (sign, shift) transform returned by canonicalize to an array."""
    s, shift = transform
    axes = tuple(range(len(shift)))
    return np.roll(s * values, tuple(-x for x in shift), axis=axes)


MERGE_TOL = 1e-5


def orbit_distance(
    a: RealField, b: RealField, translation: bool = True, sign: bool = True
) -> float:
    """Max-abs distance between two fields minimized over enabled symmetries.

    The best circular shift is located by FFT cross-correlation (argmax of
    <shift(a), b>), so the cost is O(N log N) instead of trying every shift.
    Used as a robust merge test behind the quantized-signature fast path:
    two independently converged copies of one stationary state agree only to
    roughly the residual tolerance, which is enough to flip quantization
    cells and change the hash but is far below the gap between genuinely
    distinct states.
    """
    if a.grid != b.grid:
        raise ContractError("orbit distance requires a common grid")
    g = a.grid
    axes = tuple(range(g.dim))
    best = np.inf
    signs = (1, -1) if sign else (1,)
    for s in signs:
        w = s * a.values
        if translation:
            corr = np.fft.ifftn(
                np.fft.fftn(w, axes=axes).conj() * np.fft.fftn(b.values, axes=axes),
                axes=axes,
            ).real
            shift = np.unravel_index(np.argmax(corr), g.shape)
            cand = np.roll(w, shift, axis=axes)
        else:
            cand = w
        best = min(best, float(np.max(np.abs(cand - b.values))))
    return best


# --- graph types -------------------------------------------------------------


@dataclass
class LandscapeNode:
    id: str
    u: RealField
    index: int
    residual: float
    eigenvalues: List[float]
    provenance: List[tuple] = dc_field(default_factory=list)
    directions: Optional[np.ndarray] = None  # in-memory only, not serialized


@dataclass
class LandscapeGraph:
    nodes: Dict[str, LandscapeNode] = dc_field(default_factory=dict)
    edges: List[dict] = dc_field(default_factory=list)
    rejections: List[dict] = dc_field(default_factory=list)
    warning: str = ""

    def add_node(self, node: LandscapeNode) -> None:
        self.nodes[node.id] = node

    def add_edge(
        self, src: str, dst: str, direction: int, sign: int, epsilon: float, mode: str
    ) -> None:
        edge = {
            "from": src,
            "to": dst,
            "direction": direction,
            "sign": sign,
            "epsilon": epsilon,
            "mode": mode,
        }
        if edge not in self.edges:
            self.edges.append(edge)

    def summary(self) -> Dict[int, int]:
        """Map index -> number of canonical classes."""
        out: Dict[int, int] = {}
        for node in self.nodes.values():
            out[node.index] = out.get(node.index, 0) + 1
        return dict(sorted(out.items(), reverse=True))

    def to_json(self) -> str:
        doc = {
            "nodes": [
                {
                    "id": n.id,
                    "index": n.index,
                    "residual": n.residual,
                    "eigenvalues": n.eigenvalues,
                    "field_ref": f"fields/{n.id}.csv",
                }
                for n in sorted(self.nodes.values(), key=lambda n: (-n.index, n.id))
            ],
            "edges": sorted(
                self.edges, key=lambda e: (e["from"], e["to"], e["direction"], e["sign"])
            ),
            "warning": self.warning,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    def save(self, directory) -> None:
        os.makedirs(os.path.join(directory, "fields"), exist_ok=True)
        with open(os.path.join(directory, "graph.json"), "w") as f:
            f.write(self.to_json() + "\n")
        for node in self.nodes.values():
            node.u.to_csv(os.path.join(directory, "fields", f"{node.id}.csv"))


@dataclass
class SearchPlan:
    mode: str  # "downward" | "upward"
    target_indices: Sequence[int]
    epsilon: float = DEFAULT_EPSILON
    branch_budget: int = DEFAULT_BRANCH_BUDGET
    node_budget: int = DEFAULT_NODE_BUDGET
    translation_symmetry: bool = True
    sign_symmetry: bool = True

    def __post_init__(self):
        if self.mode not in ("downward", "upward"):
            raise ContractError(f"unknown search mode {self.mode!r}")
        if self.epsilon <= 0.0:
            raise ContractError("perturbation magnitude must be positive")


# --- search drivers ----------------------------------------------------------


def _admit(
    state: SaddleState,
    report: ConvergenceReport,
    p: ModelParams,
    c: SaddleConfig,
    plan: SearchPlan,
    graph: LandscapeGraph,
    provenance: tuple,
):
    """Canonicalize, verify, index and insert one converged run result.

    Returns the node (new or existing) or None when the result was rejected.
    """
    rep, sig, transform = canonicalize(
        state.u, plan.translation_symmetry, plan.sign_symmetry
    )
    if sig in graph.nodes:
        graph.nodes[sig].provenance.append(provenance)
        return graph.nodes[sig]
    # the signature only matches bit-identical orbits; catch independently
    # converged copies of a known state by direct aligned comparison
    for existing in graph.nodes.values():
        if (
            orbit_distance(
                rep, existing.u, plan.translation_symmetry, plan.sign_symmetry
            )
            <= MERGE_TOL
        ):
            existing.provenance.append(provenance)
            return existing
    residual = norm(rhs(rep, p))
    if residual > c.resid_tol:
        graph.rejections.append(
            {"provenance": provenance, "reason": "canonical residual above tolerance"}
        )
        return None
    # certify the index and take the expansion directions from the dense
    # Jacobian at the canonical representative: the run's own directions can
    # be locked in a symmetry-invariant subspace of its trajectory
    index, spectrum, directions = unstable_directions(rep, p, c.dimer)
    node = LandscapeNode(
        id=sig,
        u=rep,
        index=index,
        residual=residual,
        eigenvalues=[float(np.real(e)) for e in spectrum],
        provenance=[provenance],
        directions=directions,
    )
    graph.add_node(node)
    return node


def _expand_parent(
    parent: LandscapeNode,
    p: ModelParams,
    c: SaddleConfig,
    plan: SearchPlan,
    graph: LandscapeGraph,
) -> List[LandscapeNode]:
    """Launch the downward menu from one parent; returns newly created nodes."""
    k_avail = 0 if parent.directions is None else parent.directions.shape[0]
    k_eff = min(parent.index, k_avail)
    new_nodes: List[LandscapeNode] = []
    children = 0
    targets = sorted((m for m in plan.target_indices if m < parent.index), reverse=True)
    for m in targets:
        for i in range(m + 1, k_eff + 1):
            for sgn in (1, -1):
                if children >= plan.branch_budget or len(graph.nodes) >= plan.node_budget:
                    return new_nodes
                u0 = RealField(
                    p.grid,
                    parent.u.values + sgn * plan.epsilon * parent.directions[i - 1],
                )
                s0 = SaddleState(u0, parent.directions[:m].copy())
                state, report = run(s0, p, replace(c, k=m))
                provenance = (parent.id, i, sgn, plan.epsilon)
                if not report.converged:
                    graph.rejections.append(
                        {"provenance": provenance, "reason": report.reason}
                    )
                    continue
                existed = set(graph.nodes)
                node = _admit(state, report, p, c, plan, graph, provenance)
                if node is None:
                    continue
                if node.index < parent.index:
                    graph.add_edge(parent.id, node.id, i, sgn, plan.epsilon, "downward")
                    children += 1
                if node.id not in existed:
                    new_nodes.append(node)
    return new_nodes


def downward_search(
    parent: LandscapeNode,
    p: ModelParams,
    c: SaddleConfig,
    plan: SearchPlan,
    graph: LandscapeGraph,
) -> List[LandscapeNode]:
    """Breadth-first downward closure from a parent saddle.

    Newly found saddles are themselves expanded (highest index first) until no
    new nodes appear or the budgets are exhausted.
    """
    if parent.id not in graph.nodes:
        graph.add_node(parent)
    found: List[LandscapeNode] = []
    queue = [parent]
    while queue:
        queue.sort(key=lambda n: (-n.index, n.id))
        node = queue.pop(0)
        if node.index == 0:
            continue
        sub_plan = replace(
            plan, target_indices=[m for m in plan.target_indices if m < node.index]
        )
        new_nodes = _expand_parent(node, p, c, sub_plan, graph)
        found.extend(new_nodes)
        queue.extend(n for n in new_nodes if n.index > 0 and n.directions is not None)
        if len(graph.nodes) >= plan.node_budget:
            graph.warning = "node budget exhausted; graph may be partial"
            break
    return found


def relax_directions(
    u: RealField,
    V: np.ndarray,
    p: ModelParams,
    c: SaddleConfig,
    max_iters: int,
) -> Tuple[np.ndarray, bool]:
    """Relax the direction dynamics at a frozen state until stagnation."""
    from .phasefield import jacobian_apply

    g = u.grid
    V = orthonormalize(V, g)
    for _ in range(max_iters):
        V_new = np.empty_like(V)
        for i in range(V.shape[0]):
            jv = jacobian_apply(u, RealField(g, V[i]), p, c.dimer).values
            V_new[i] = V[i] + c.sigma * jv
        V_new = orthonormalize(V_new, g)
        dv = max(grid_norm(g, V_new[i] - V[i]) for i in range(V.shape[0]))
        V = V_new
        if dv <= c.direction_tol:
            return V, True
    return V, False


def upward_search(
    parent: LandscapeNode,
    p: ModelParams,
    c: SaddleConfig,
    plan: SearchPlan,
    graph: LandscapeGraph,
) -> List[LandscapeNode]:
    """Search higher-index saddles above a parent by extending its directions.

    The direction set is first grown to the target count by relaxing the
    direction dynamics at the frozen parent state (new slots start from the
    softest unused Fourier modes); runs then start from perturbations along
    the added directions. Edges are oriented from the higher-index state found
    down to the starting node.
    """
    if parent.id not in graph.nodes:
        graph.add_node(parent)
    k = 0 if parent.directions is None else parent.directions.shape[0]
    targets = sorted(set(plan.target_indices))
    if any(m <= parent.index for m in targets):
        raise ContractError("upward targets must exceed the parent index")
    found: List[LandscapeNode] = []
    for m in targets:
        seeds = initial_directions(p.grid, m + k + 2)
        V = parent.directions.copy() if k else np.empty((0,) + p.grid.shape)
        for seed in seeds:
            if V.shape[0] == m:
                break
            w = seed.copy()
            for existing in V:
                w -= (
                    p.grid.h**p.grid.dim * np.sum(existing * w)
                ) * existing
            nrm = grid_norm(p.grid, w)
            if nrm < 1e-8:
                continue
            V = np.vstack([V, (w / nrm)[None]])
        V, ok = relax_directions(parent.u, V, p, c, max(1, c.max_iters // 10))
        if not ok:
            graph.rejections.append(
                {
                    "provenance": (parent.id, "upward", m),
                    "reason": "direction relaxation stagnated",
                }
            )
            continue
        for i in range(k + 1, m + 1):
            for sgn in (1, -1):
                if len(graph.nodes) >= plan.node_budget:
                    return found
                u0 = RealField(
                    p.grid, parent.u.values + sgn * plan.epsilon * V[i - 1]
                )
                s0 = SaddleState(u0, V[:m].copy())
                state, report = run(s0, p, replace(c, k=m))
                provenance = (parent.id, i, sgn, plan.epsilon)
                if not report.converged:
                    graph.rejections.append(
                        {"provenance": provenance, "reason": report.reason}
                    )
                    continue
                existed = set(graph.nodes)
                node = _admit(state, report, p, c, plan, graph, provenance)
                if node is None:
                    continue
                if node.index > parent.index:
                    graph.add_edge(node.id, parent.id, i, sgn, plan.epsilon, "upward")
                if node.id not in existed:
                    found.append(node)
    return found


# --- parent-state setup and full builds -------------------------------------


def linear_operator_matrix(p: ModelParams) -> np.ndarray:
    """Dense Jacobian of F at the homogeneous zero state (exact, no dimer)."""
    g = p.grid
    M = g.npoints
    kappa = p.kappa.values if isinstance(p.kappa, RealField) else p.kappa
    J = np.empty((M, M))
    basis = np.zeros(M)
    for j in range(M):
        basis[j] = 1.0
        e = RealField(g, basis.reshape(g.shape))
        J[:, j] = (-kappa * fractional_term(e, p)).reshape(-1)
        basis[j] = 0.0
    J[np.diag_indices(M)] += 1.0
    return J


def _mixed_unstable_basis(
    g: GridSpec, eigs: np.ndarray, index: int, tol: float = 1e-10
) -> np.ndarray:
    """Unstable-eigenspace basis with degenerate clusters pairwise mixed.

    Any orthonormal basis of a degenerate eigenvalue cluster is equally
    valid analytically, but the choice matters for the search: pure Fourier
    modes leave the dynamics trapped in single-axis invariant subspaces
    (perturbing a 2D zero state along cos(2*pi*y) can never grow x-structure),
    hiding genuinely multi-dimensional saddles. Within each cluster of equal
    eigenvalues the first and second halves of the Fourier modes are
    therefore replaced by their normalized sums and differences, e.g.
    {cos x, sin x, cos y, sin y} -> {(cos x + cos y)/sqrt2,
    (sin x + sin y)/sqrt2, (cos x - cos y)/sqrt2, (sin x - sin y)/sqrt2}.
    The result is deterministic and spans the same space.
    """
    V = initial_directions(g, index)
    out = V.copy()
    start = 0
    for stop in range(1, index + 1):
        if stop < index and abs(eigs[stop] - eigs[start]) <= tol:
            continue
        size = stop - start
        if size > 1 and size % 2 == 0:
            half = size // 2
            a = V[start : start + half]
            b = V[start + half : stop]
            out[start : start + half] = (a + b) / np.sqrt(2.0)
            out[start + half : stop] = (a - b) / np.sqrt(2.0)
        start = stop
    return out


def zero_state_node(p: ModelParams) -> LandscapeNode:
    """The homogeneous zero state with its index and unstable directions."""
    g = p.grid
    u0 = RealField.zeros(g)
    if p.is_gradient:
        index = homogeneous_index(p)
        eigs = homogeneous_spectrum(p, 0.0)
        directions = _mixed_unstable_basis(g, eigs, index) if index else None
        spectrum = [float(e) for e in eigs]
    else:
        J = linear_operator_matrix(p)
        w, vecs = np.linalg.eig(J)
        order = np.argsort(-w.real)
        w, vecs = w[order], vecs[:, order]
        index = int(np.sum(w.real > INDEX_ZERO_TOL))
        spectrum = [float(e) for e in w.real]
        raw = []
        for j in range(index):
            for part in (vecs[:, j].real, vecs[:, j].imag):
                if np.linalg.norm(part) > 1e-10:
                    raw.append(part.reshape(g.shape))
        directions = None
        if raw:
            V: List[np.ndarray] = []
            for cand in raw:
                w_ = cand.copy()
                for existing in V:
                    w_ -= (g.h**g.dim * np.sum(existing * w_)) * existing
                nrm = grid_norm(g, w_)
                if nrm < 1e-8:
                    continue
                V.append(w_ / nrm)
                if len(V) == index:
                    break
            directions = np.array(V)
    _, sig, _ = canonicalize(u0)
    return LandscapeNode(
        id=sig,
        u=u0,
        index=index,
        residual=0.0,
        eigenvalues=spectrum,
        provenance=[("seed", 0, 0, 0.0)],
        directions=directions,
    )


def build_landscape(
    p: ModelParams,
    c: SaddleConfig,
    epsilon: float = DEFAULT_EPSILON,
    target_indices: Optional[Sequence[int]] = None,
    branch_budget: int = DEFAULT_BRANCH_BUDGET,
    node_budget: int = DEFAULT_NODE_BUDGET,
    symmetries: Optional[Tuple[bool, bool]] = None,
) -> LandscapeGraph:
    """Downward closure of the landscape rooted at the homogeneous zero state.

    By default node identity merges translation orbits for constant-order
    constant-coefficient models and nothing otherwise (variable coefficients
    break grid translations). Sign pairs are kept as distinct nodes — the
    graph is closed under the sign flip instead — so homogeneous +1/-1 and
    other sign partners count separately.
    """
    parent = zero_state_node(p)
    if symmetries is None:
        symmetries = (p.is_gradient, False)
    plan = SearchPlan(
        mode="downward",
        target_indices=(
            list(range(parent.index - 1, -1, -1))
            if target_indices is None
            else list(target_indices)
        ),
        epsilon=epsilon,
        branch_budget=branch_budget,
        node_budget=node_budget,
        translation_symmetry=symmetries[0],
        sign_symmetry=symmetries[1],
    )
    graph = LandscapeGraph()
    graph.add_node(parent)
    downward_search(parent, p, c, plan, graph)
    return graph


# --- parameter sweeps and coefficient matching ------------------------------


def index_sweep(
    grid: GridSpec, alphas: Sequence[float], kappas: Sequence[float]
) -> Tuple[List[tuple], List[tuple]]:
    """Index of the zero state on a (kappa, alpha) grid plus analytic jumps.

    Returns (rows, jumps): rows of (kappa, alpha, index) and the jump loci
    alpha*(k) = 2 ln(1/kappa) / ln(4 pi^2 k^2) that fall inside (0, 2].
    """
    rows = []
    for kappa in kappas:
        for alpha in alphas:
            p = ModelParams(grid, ConstantOrder(float(alpha)), float(kappa))
            rows.append((float(kappa), float(alpha), homogeneous_index(p)))
    jumps = []
    for kappa in kappas:
        for k in range(1, grid.N // 2 + 1):
            denom = np.log(4.0 * np.pi**2 * k**2)
            if denom <= 0.0:
                continue
            alpha_star = 2.0 * np.log(1.0 / kappa) / denom
            if 0.0 < alpha_star <= 2.0:
                jumps.append((float(kappa), k, float(alpha_star)))
    return rows, jumps


@dataclass(frozen=True)
class ConstantMatch:
    """Kappa interval for which the order-2 model matches a target index."""

    target_index: int
    kappa_lo: float
    kappa_hi: float

    @property
    def feasible(self) -> bool:
        return self.kappa_lo < self.kappa_hi


def match_constant_order(alpha: float, kappa: float, grid: GridSpec) -> ConstantMatch:
    """Interval of diffusion coefficients matching a fractional model's index.

    The integer-order zero-state index is #{lambda < 1/kappa'}, a step
    function of kappa'; the returned open interval is where it equals the
    fractional model's index.
    """
    target = homogeneous_index(ModelParams(grid, ConstantOrder(alpha), kappa))
    lam = np.sort(grid.multipliers().reshape(-1))
    M = lam.size
    lo = 0.0 if target >= M else 1.0 / lam[target]
    hi = np.inf if lam[target - 1] == 0.0 else 1.0 / lam[target - 1]
    return ConstantMatch(target, float(lo), float(hi))


def match_variable_order(
    p: ModelParams,
    a_values: Sequence[float],
    b_values: Sequence[float],
) -> Tuple[int, List[Tuple[float, float]]]:
    """Grid search over kappa(x) = a + b cos(2 pi x) matching the zero index.

    The target is the dense-Jacobian index of the zero state under the given
    variable-order model; candidates are variable-coefficient integer-order
    models. Returns (target_index, matching (a, b) pairs); an empty list means
    no match in the searched grid.
    """
    if not isinstance(p.order, VariableOrder):
        raise UnsupportedModelError("variable-order matching needs a variable order")
    g = p.grid
    J = linear_operator_matrix(p)
    target = int(np.sum(np.linalg.eigvals(J).real > INDEX_ZERO_TOL))
    x = g.coords() if g.dim == 1 else g.coords()[0]
    matches = []
    for a in a_values:
        for b in b_values:
            kvals = a + b * np.cos(2.0 * np.pi * x)
            if np.min(kvals) <= 0.0:
                continue
            candidate = ModelParams(g, ConstantOrder(2.0), RealField(g, kvals))
            Jc = linear_operator_matrix(candidate)
            idx = int(np.sum(np.linalg.eigvals(Jc).real > INDEX_ZERO_TOL))
            if idx == target:
                matches.append((float(a), float(b)))
    return target, matches
