"""Counter automaton presenting the coupled subshift at one parameter value.

A state is ``(symbol, phase)``.  ``phase`` counts the position inside the
current block, starting at 1 on the entry symbol, and saturates at ``TOP``
after the constrained prefix (``cap = n_m`` in the alpha well and ``n'_m`` in
the delta well).  Moves inside the prefix use the primed matrix, every other
move inside a well uses the full one, and a green transition needs the block
to be at least ``cap`` long.

With ``linked_prefix`` the prefix covers positions ``1 .. cap`` (the first
``cap - 1`` symbols and the transition out of them are primed-eligible); the
literal rule stops at position ``cap - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ..transfer import Potential, TransferOperatorMatrix
from .family import ConstraintViolation, CoupledFamily

__all__ = ["TOP", "AutomatonSFT", "build_sigma_m", "automaton_operator", "automaton_words"]

TOP = 0  # saturated phase; prefix phases are numbered from 1


@dataclass(frozen=True, eq=False)
class AutomatonSFT:
    family: CoupledFamily = field(repr=False)
    m: int
    n: int
    nprime: int
    states: tuple
    adjacency: csr_matrix = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.states)

    def projection(self, i: int):
        return self.states[i][0]

    @property
    def green_edges(self) -> list[tuple[int, int]]:
        fam = self.family
        adj = self.adjacency
        out = []
        for i in range(self.size):
            for j in adj.indices[adj.indptr[i] : adj.indptr[i + 1]]:
                if fam.well_of(self.states[i][0]) != fam.well_of(self.states[j][0]):
                    out.append((i, int(j)))
        return out

    def well_mask(self, well: str) -> np.ndarray:
        return np.array([self.family.well_of(s) == well for s, _ in self.states])


def _well_edges(family: CoupledFamily, well: str, cap: int):
    """Nodes, internal edges and exit-capable nodes of one well."""
    full = family.A if well == "A" else family.D
    sub = family.Aprime if well == "A" else family.Dprime
    syms = full.symbols
    last = cap if family.linked_prefix else cap - 1  # last primed position
    phases = list(range(1, last + 1)) + [TOP]
    nodes = [(s, p) for s in syms for p in phases]
    edges = []
    for s in syms:
        for t in syms:
            if sub.allowed(s, t):
                edges += [((s, p), (t, p + 1)) for p in range(1, last)]
            if full.allowed(s, t):
                edges.append(((s, last), (t, TOP)))
                edges.append(((s, TOP), (t, TOP)))
    exits = [(s, TOP) for s in syms]
    if family.linked_prefix:
        exits += [(s, cap) for s in syms]
    return nodes, edges, exits


def build_sigma_m(family: CoupledFamily, m: int) -> AutomatonSFT:
    """Recurrent core of the counter automaton for parameter ``m``."""
    n, nprime = family.sequence(m)
    if n < 2 or nprime < 2:
        raise ConstraintViolation("block lengths n_m, n'_m must be >= 2")
    if family.mode == "thm1.2":
        for well, sub in (("A", family.Aprime), ("D", family.Dprime)):
            for s in family.entry_symbols(well):
                if not sub.transitions[sub.index(s)].any():
                    raise ConstraintViolation(f"entry symbol {s} has an all-zero row in {well}'")
    nodes_a, edges_a, exits_a = _well_edges(family, "A", n)
    nodes_d, edges_d, exits_d = _well_edges(family, "D", nprime)
    nodes = nodes_a + nodes_d
    edges = edges_a + edges_d
    exit_phases = {}
    for s, p in exits_a + exits_d:
        exit_phases.setdefault(s, []).append(p)
    for a, b in family.green_edges:
        edges += [((a, p), (b, 1)) for p in exit_phases[a]]
    index = {v: i for i, v in enumerate(nodes)}
    rows = [index[u] for u, _ in edges]
    cols = [index[v] for _, v in edges]
    adj = csr_matrix((np.ones(len(edges)), (rows, cols)), shape=(len(nodes), len(nodes)))
    adj.sum_duplicates()
    adj.data[:] = 1.0

    _, labels = connected_components(adj, directed=True, connection="strong")
    entry = [index[(b, 1)] for _, b in family.green_edges]
    core_labels = {labels[i] for i in entry}
    if len(core_labels) != 1:
        raise ConstraintViolation("the two wells do not form one irreducible core")
    core = np.flatnonzero(labels == core_labels.pop())
    if len(core) < 2:
        raise ValueError("recurrent core is empty")
    sub = adj[core][:, core].tocsr()
    states = tuple(nodes[i] for i in core)
    return AutomatonSFT(family, m, n, nprime, states, sub)


def automaton_operator(aut: AutomatonSFT, potential: Potential | None = None, depth: int | None = None) -> TransferOperatorMatrix:
    """Weighted block graph of the automaton for a locally constant potential.

    States are paths of ``depth`` automaton states (default: the potential
    depth); the weight of a path is ``exp(phi(projected word))``.
    """
    pot = potential if potential is not None else aut.family.potential
    k = depth if depth is not None else pot.depth
    if k < pot.depth:
        raise ValueError("block depth below the potential depth")
    adj = aut.adjacency
    succ = [adj.indices[adj.indptr[i] : adj.indptr[i + 1]] for i in range(aut.size)]
    paths = [(i,) for i in range(aut.size)]
    for _ in range(k - 1):
        paths = [p + (int(j),) for p in paths for j in succ[p[-1]]]
    words = tuple(tuple(aut.states[i][0] for i in p) for p in paths)
    if k == 1:
        mat = adj.copy()
        weights = np.array([math.exp(pot(w)) for w in words])
        mat = csr_matrix(mat.multiply(weights[:, None]))
        return TransferOperatorMatrix(tuple(aut.states), words, mat, 1)
    by_prefix: dict[tuple, list[int]] = {}
    for j, p in enumerate(paths):
        by_prefix.setdefault(p[:-1], []).append(j)
    rows, cols, vals = [], [], []
    for i, p in enumerate(paths):
        w = math.exp(pot(words[i][: pot.depth]))
        for j in by_prefix.get(p[1:], ()):
            rows.append(i)
            cols.append(j)
            vals.append(w)
    mat = csr_matrix((vals, (rows, cols)), shape=(len(paths), len(paths)))
    labels = tuple(tuple(aut.states[i] for i in p) for p in paths)
    return TransferOperatorMatrix(labels, words, mat, k)


def automaton_words(aut: AutomatonSFT, length: int) -> set[tuple]:
    """Projected words of ``length`` read along core paths."""
    adj = aut.adjacency
    frontier = {((aut.states[i][0],), i) for i in range(aut.size)}
    for _ in range(length - 1):
        nxt = set()
        for word, i in frontier:
            for j in adj.indices[adj.indptr[i] : adj.indptr[i + 1]]:
                nxt.add((word + (aut.states[j][0],), int(j)))
        frontier = nxt
    return {w for w, _ in frontier}
