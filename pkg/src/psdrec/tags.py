"""Tag operators, approximate-containment tests, hierarchy graphs, and DOT export.

A tag's operator is the mean of the like-effects of its member items; it maps
a user state to that user's probability of liking a random item with the tag.
Two containment tests between tags t and t' are provided:

* subset_simple: trace overlap, tr(E_t E_t') >= (1 - eps) tr(E_t).
* subset_sdp: spectral gate max eig(E_t) >= 1 - eps/2, plus infeasibility of
  a state accepted by E_t with probability >= 1 - eps/2 whose acceptance
  probabilities under E_t and E_t' differ by more than eps/2. Feasibility is
  decided heuristically by projected gradient ascent with random restarts,
  so the test is exact only up to heuristic error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import InvalidInput, NumericalFailure

__all__ = [
    "TagOperator",
    "HierarchyGraph",
    "SdpConfig",
    "tag_operator",
    "subset_simple",
    "subset_sdp",
    "build_hierarchy",
    "export_dot",
]

# Deterministic slack on the strict feasibility threshold eps/2.
THRESHOLD_SLACK = 1e-9


@dataclass(frozen=True)
class TagOperator:
    """Mean like-effect of a tag's member items."""

    name: str
    matrix: np.ndarray
    members: int

    def __post_init__(self):
        matrix = np.asarray(self.matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidInput("TagOperator: matrix must be square")
        w = np.linalg.eigvalsh(0.5 * (matrix + np.conj(matrix.T)))
        if w[0] < -1e-8 or w[-1] > 1.0 + 1e-8:
            raise InvalidInput(
                f"TagOperator: eigenvalues must lie in [0, 1], got [{w[0]:.3e}, {w[-1]:.3e}]"
            )
        object.__setattr__(self, "matrix", matrix)


@dataclass(frozen=True)
class SdpConfig:
    """Heuristic solver knobs for subset_sdp."""

    restarts: int = 16
    steps: int = 200
    seed: int = 0
    final_step: float = 1e-5


@dataclass(frozen=True)
class HierarchyGraph:
    """Directed graph over tag names; an edge (t, t') means t is contained
    in t' at the recorded eps under the recorded method. No self-loops."""

    vertices: tuple
    edges: tuple
    eps: float
    method: str

    def __post_init__(self):
        vset = set(self.vertices)
        for a, b in self.edges:
            if a not in vset or b not in vset:
                raise InvalidInput(f"HierarchyGraph: edge ({a!r}, {b!r}) uses unknown vertex")
            if a == b:
                raise InvalidInput(f"HierarchyGraph: self-loop on {a!r}")


def tag_operator(m, members, name=""):
    """Arithmetic mean of the like-effects of the member items."""
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        raise InvalidInput("tag_operator: empty member set")
    if members.min() < 0 or members.max() >= m.I:
        raise InvalidInput("tag_operator: member index out of range")
    e = linalg.hermitianize(np.mean(m.items[members, 0], axis=0))
    return TagOperator(name=name, matrix=e, members=int(members.size))


def _check_pair(t, tp, eps):
    if t.matrix.shape != tp.matrix.shape:
        raise InvalidInput("tag operators have different dimensions")
    if not 0.0 <= eps < 1.0:
        raise InvalidInput(f"eps must lie in [0, 1), got {eps}")


def subset_simple(t, tp, eps):
    """True iff tr(E_t E_t') >= (1 - eps) tr(E_t)."""
    _check_pair(t, tp, eps)
    overlap = linalg.trace_inner(t.matrix, tp.matrix)
    return bool(overlap >= (1.0 - eps) * np.real(np.trace(t.matrix)))


def _project_accepting(rhos, e, c, rounds=100, tol=1e-11):
    """Dykstra projection of a stack of matrices onto the accepting set
    {rho density matrix, tr(rho e) >= c}."""
    en2 = float(np.real(np.sum(np.conj(e) * e)))
    x = rhos
    p = np.zeros_like(rhos)
    q = np.zeros_like(rhos)
    for _ in range(rounds):
        y = linalg.project_to_spectrahedron(linalg.hermitianize(x + p))
        p = x + p - y
        mid = y + q
        gaps = c - np.real(np.einsum("bij,ij->b", mid, np.conj(e)))
        x = mid + (np.maximum(gaps, 0.0) / en2)[:, None, None] * e
        q = mid - x
        if float(np.max(np.abs(x - y))) <= tol:
            break
    return linalg.project_to_spectrahedron(linalg.hermitianize(x))


def _ascend(starts, directions, e, c, steps, final_step, stop_above):
    """Batched projected gradient ascent of tr(rho directions[b]) over the
    accepting set; geometric step annealing, best iterate kept per slice.
    Returns early once any slice exceeds stop_above."""
    gnorm = np.sqrt(np.real(np.einsum("bij,bij->b", np.conj(directions), directions)))
    step = 1.0 / np.maximum(gnorm, 1e-12)
    decay = (final_step / step) ** (1.0 / max(steps - 1, 1))
    rho = starts
    best = np.real(np.einsum("bij,bij->b", np.conj(directions), rho))
    for _ in range(steps):
        rho = _project_accepting(rho + step[:, None, None] * directions, e, c)
        vals = np.real(np.einsum("bij,bij->b", np.conj(directions), rho))
        best = np.maximum(best, vals)
        if float(np.max(best)) > stop_above:
            break
        step = step * decay
    return float(np.max(best))


def subset_sdp(t, tp, eps, cfg=None):
    """Spectral-gate plus feasibility containment test.

    True iff max eig(E_t) >= 1 - eps/2 and no state rho with
    tr(rho E_t) >= 1 - eps/2 attains |tr(rho (E_t' - E_t))| > eps/2.
    The feasibility search maximizes both signed directions by projected
    gradient ascent from cfg.restarts random starts.
    """
    _check_pair(t, tp, eps)
    cfg = cfg or SdpConfig()
    c = 1.0 - eps / 2.0
    et = linalg.hermitianize(t.matrix)
    w, v = np.linalg.eigh(et)
    if w[-1] < c:
        return False
    diff = linalg.hermitianize(tp.matrix - t.matrix)
    if float(np.max(np.abs(diff))) == 0.0:
        return True

    d = et.shape[0]
    rng = np.random.default_rng(cfg.seed)
    top = np.outer(v[:, -1], np.conj(v[:, -1]))
    n_random = max(cfg.restarts - 1, 0)
    g = rng.standard_normal((n_random, d, d))
    if np.iscomplexobj(et):
        g = g + 1j * rng.standard_normal((n_random, d, d))
    raw = linalg.hermitianize(np.einsum("bij,bkj->bik", g, np.conj(g)))
    traces = np.maximum(np.real(np.einsum("bii->b", raw)), 1e-12)
    starts = np.concatenate([top[None], raw / traces[:, None, None]])
    starts = _project_accepting(starts, et, c)

    # One batch per signed direction: every restart ascends in parallel.
    threshold = eps / 2.0 + THRESHOLD_SLACK
    starts = np.concatenate([starts, starts])
    directions = np.concatenate(
        [np.broadcast_to(diff, starts[: cfg.restarts].shape), np.broadcast_to(-diff, starts[: cfg.restarts].shape)]
    )
    best = _ascend(starts, directions, et, c, cfg.steps, cfg.final_step, threshold)
    if not np.isfinite(best):
        raise NumericalFailure("subset_sdp: ascent produced a non-finite value")
    return best <= threshold


def build_hierarchy(m, catalog, eps, method="simple", cfg=None):
    """Evaluate the chosen containment test on all ordered tag pairs."""
    if method not in ("simple", "sdp"):
        raise InvalidInput(f"build_hierarchy: unknown method {method!r}")
    ops = {tag: tag_operator(m, catalog.membership[tag], tag) for tag in catalog.tags}
    edges = []
    for a in catalog.tags:
        for b in catalog.tags:
            if a == b:
                continue
            if method == "simple":
                related = subset_simple(ops[a], ops[b], eps)
            else:
                related = subset_sdp(ops[a], ops[b], eps, cfg)
            if related:
                edges.append((a, b))
    return HierarchyGraph(
        vertices=tuple(sorted(catalog.tags)), edges=tuple(sorted(edges)), eps=float(eps), method=method
    )


def _quote(name):
    return '"' + str(name).replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(g):
    """Render the hierarchy as DOT text.

    Vertices in lexicographic order; mutual edges rendered once with
    dir=both; the empty graph renders as `digraph { }`.
    """
    if not g.vertices:
        return "digraph { }\n"
    lines = ["digraph {"]
    for v in sorted(g.vertices):
        lines.append(f"  {_quote(v)};")
    edge_set = set(g.edges)
    for a, b in sorted(edge_set):
        if (b, a) in edge_set:
            if a < b:
                lines.append(f"  {_quote(a)} -> {_quote(b)} [dir=both];")
        else:
            lines.append(f"  {_quote(a)} -> {_quote(b)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
