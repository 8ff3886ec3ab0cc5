"""Dependency graph of the kinematic scalar components.

Nodes are scalar components and those of their derivatives that appear in
the energy (``u^1``, ``u^1_,1``, ``P^1_1,1``, ...).  Two nodes share an edge
when the quadratic form couples them; the edge weight is
``-1/2 d^2 Psi / (da db)`` and its label names the modulus responsible.
A derivative node is tied to its base field by a ``∂₁`` edge.  Connected
components are independent ODE subsystems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

from . import terms as T
from .assembly import LinearBVP
from .model import BeamConfig, derivative_label, parse_dof

DERIV = "∂₁"

_GROUP_LABELS = {
    "sym_P_term": "a",
    "N_norm_term": "b",
    "gradN_term": "c",
    "d_penalty_term": "d",
    "e_penalty_term": "e",
    "curl_coupling_term": "d·ℓ⁴/12",
}


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    label: str
    weight: float  # nan for derivative links


@dataclass(frozen=True)
class DependencyGraph:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    def neighbours(self, node: str) -> list[str]:
        out = [e.b for e in self.edges if e.a == node] + [e.a for e in self.edges if e.b == node]
        return sorted(out)

    def edge(self, a: str, b: str):
        for e in self.edges:
            if {e.a, e.b} == {a, b}:
                return e
        return None

    def to_edge_list(self) -> str:
        """Tab-separated ``node node label weight`` lines, isolated nodes as ``node``."""
        lines = []
        for e in self.edges:
            w = "" if np.isnan(e.weight) else f"{e.weight:.17g}"
            lines.append(f"{e.a}\t{e.b}\t{e.label}\t{w}".rstrip("\t"))
        used = {e.a for e in self.edges} | {e.b for e in self.edges}
        lines.extend(n for n in self.nodes if n not in used)
        return "\n".join(lines) + "\n"

    def write_edge_list(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_edge_list())


def _label(term: T.Term) -> str:
    label = _GROUP_LABELS[term.group]
    # a*l^4/12 on the transversal N slices, e*l^4/12 on their gradient
    if term.group == "sym_P_term" and term.parts[0][2].startswith("N"):
        return "a·ℓ⁴/12"
    if term.group == "e_penalty_term" and len(term.parts) == 1:
        return "e·ℓ⁴/12"
    return label


def build_graph(config: BeamConfig) -> DependencyGraph:
    """Graph over the regime's fields and the derivatives the energy involves."""
    weights: dict = {}
    labels: dict = {}
    for t in T.quadratic_form(config):
        nodes = [(c, derivative_label(p, r)) for c, r, p in t.parts]
        for (ca, na), (cb, nb) in ((x, y) for i, x in enumerate(nodes) for y in nodes[i + 1 :]):
            if na == nb:
                continue
            key = tuple(sorted((na, nb)))
            # Psi contains 2 kappa ca cb x_a x_b, so -1/2 of the mixed second derivative is -kappa ca cb
            weights[key] = weights.get(key, 0.0) - t.kappa * ca * cb
            labels[key] = _label(t)
    edges = [Edge(a, b, labels[(a, b)], w) for (a, b), w in weights.items() if w != 0.0]
    used = {e.a for e in edges} | {e.b for e in edges}
    # derivative links for every derivative node carrying an energy edge, down to the base field
    links = set()
    for node in used:
        base, order = parse_dof(node)
        for k in range(order, 0, -1):
            links.add((derivative_label(base, k - 1), derivative_label(base, k)))
    edges += [Edge(a, b, DERIV, float("nan")) for a, b in links]
    names = set(T.unknowns(config)) | {e.a for e in edges} | {e.b for e in edges}
    edges.sort(key=lambda e: (e.a, e.b))
    return DependencyGraph(tuple(sorted(names)), tuple(edges))


def connected_components(g: DependencyGraph) -> list[tuple[str, ...]]:
    """Components with sorted members, ordered by their smallest label."""
    index = {n: k for k, n in enumerate(g.nodes)}
    rows = [index[e.a] for e in g.edges]
    cols = [index[e.b] for e in g.edges]
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(g.nodes),) * 2)
    _, lab = _cc(adj, directed=False)
    groups: dict = {}
    for node, c in zip(g.nodes, lab):
        groups.setdefault(c, []).append(node)
    return sorted((tuple(sorted(v)) for v in groups.values()), key=lambda c: c[0])


def component_of(partition, label: str):
    for comp in partition:
        if label in comp:
            return comp
    return None


def verify_block_structure(bvp: LinearBVP, partition) -> bool:
    """True iff no bulk or flux coefficient couples unknowns of different blocks.

    Unknowns are matched to blocks through their base label; an unknown that
    appears in no block forms its own block.
    """
    block = {}
    for k, comp in enumerate(partition):
        for node in comp:
            block.setdefault(parse_dof(node)[0], k)
    ids = [block.get(p, ("own", p)) for p in bvp.unknowns]
    m = len(bvp.unknowns)
    coupling = np.any(bvp.bulk_coeffs != 0.0, axis=2)
    for end in ("0", "L"):
        for row in bvp.boundary_rows[end]:
            if row.kind != "natural":
                continue
            q = bvp.unknowns.index(parse_dof(row.dof)[0])
            coupling[q] |= np.any(row.flux != 0.0, axis=1)
    for q in range(m):
        for p in range(m):
            if coupling[q, p] and ids[q] != ids[p]:
                return False
    return True
