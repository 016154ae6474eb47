"""Empirical mechanisms over a shared discretization, plus inference.

For one view and a windowed dataset this module fits, per node and per
window, a marginal probability vector (root nodes) or a conditional
probability table (nodes with parents), all over one shared
discretization. Exact marginals of any node under a per-node window
assignment are computed by variable elimination; a sampled fallback uses
ancestral sampling. Jensen-Shannon divergence (natural log) is the
default shift measure, with total variation available as an alternative.

Numeric variables are binned on quantiles of both windows pooled, so a
location shift in the current window keeps parent-child conditionals
expressible instead of collapsing into a single edge bin. Categorical
variables keep the reference window's categories plus an "unseen" bucket.
Conditional rows for parent configurations with no observations in one
window fall back to the pooled fit: absent evidence, the mechanism is
assumed unchanged. This is what lets a brand-new modulator value show up
as a change of the modulator's own mechanism rather than of every
downstream table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .dataset import ViewTable, WindowedDataset, resolve_column, view_matrix
from .errors import (
    EmptyTable,
    InsufficientData,
    LengthMismatch,
    NoDataForView,
    NotNormalized,
    StateSpaceTooLarge,
)
from .mapcore import NodeKind, SystemMap, View

DEFAULT_BINS = 8
DEFAULT_ALPHA = 1.0
DEFAULT_STATE_LIMIT = 1_000_000
UNSEEN = "__unseen__"


# ---------------------------------------------------------------------------
# discretization

@dataclass(frozen=True)
class NumericBins:
    """Quantile bins for a numeric variable; interior edges only."""

    edges: tuple[float, ...]

    @property
    def n_states(self) -> int:
        return len(self.edges) + 1

    def encode(self, values: np.ndarray) -> np.ndarray:
        floats = np.array([float(v) for v in values])
        return np.searchsorted(np.array(self.edges), floats, side="right")


@dataclass(frozen=True)
class CategoryList:
    """Known categories (reference window), with a trailing unseen bucket."""

    categories: tuple[str, ...]

    @property
    def n_states(self) -> int:
        return len(self.categories) + 1

    def encode(self, values: np.ndarray) -> np.ndarray:
        index = {c: i for i, c in enumerate(self.categories)}
        unseen = len(self.categories)
        return np.array([index.get(v, unseen) for v in values], dtype=np.int64)

    def labels(self) -> tuple[str, ...]:
        return self.categories + (UNSEEN,)


VariableBins = Union[NumericBins, CategoryList]


@dataclass(frozen=True)
class Discretization:
    """Per-variable binning shared by both windows."""

    variables: dict[str, VariableBins] = field(hash=False)

    def n_states(self, qname: str) -> int:
        return self.variables[qname].n_states

    def encode(self, qname: str, values: np.ndarray) -> np.ndarray:
        return self.variables[qname].encode(values)


def _is_numeric(values) -> bool:
    try:
        for v in values:
            float(v)
    except (TypeError, ValueError):
        return False
    return True


def fit_variable(ref_values, k: int, kind: NodeKind = NodeKind.DATA,
                 extra_values=None) -> VariableBins:
    """Bins for one variable: pooled quantiles (numeric) or categories."""
    ref_values = np.asarray(ref_values, dtype=object)
    pooled = ref_values
    if extra_values is not None and len(extra_values):
        pooled = np.concatenate([ref_values, np.asarray(extra_values, dtype=object)])
    if kind is NodeKind.MODULATOR or not _is_numeric(pooled):
        return CategoryList(tuple(sorted(set(map(str, ref_values)))))
    floats = np.array([float(v) for v in pooled])
    qs = np.quantile(floats, [i / k for i in range(1, k)])
    edges = []
    for e in qs:
        if not edges or e > edges[-1]:
            edges.append(float(e))
    return NumericBins(tuple(edges))


def fit_discretization(system_map: SystemMap, table: ViewTable, k: int,
                       cur_table: Optional[ViewTable] = None) -> Discretization:
    """Fit bins for every node of a view table.

    ``table`` is the reference window; when ``cur_table`` is given, numeric
    quantiles are computed on both windows pooled (categories still come
    from the reference window only).
    """
    if k < 2:
        raise ValueError(f"bin count must be >= 2, got {k}")
    if table.n_rows == 0:
        raise EmptyTable("cannot fit a discretization on an empty table")
    variables = {}
    for qname in table.nodes:
        kind = system_map.node(qname).kind
        extra = None
        if cur_table is not None and qname in cur_table.columns:
            extra = cur_table.columns[qname]
        variables[qname] = fit_variable(table.columns[qname], k, kind, extra)
    return Discretization(variables)


# ---------------------------------------------------------------------------
# mechanism sets

@dataclass
class MechanismSet:
    """Fitted ref/cur mechanisms for the nodes of one view DAG.

    ``tables[node][window]`` has shape ``(*parent_states, child_states)``
    with parent axes in lexicographic parent order. Every row is a
    probability vector with strictly positive entries.
    """

    view: View
    nodes: tuple[str, ...]
    parents: dict[str, tuple[str, ...]]
    topo: tuple[str, ...]
    disc: Discretization
    tables: dict[str, dict[str, np.ndarray]]
    alpha: float
    excluded: tuple[str, ...] = ()

    def n_states(self, qname: str) -> int:
        return self.disc.n_states(qname)

    def table(self, qname: str, window: str) -> np.ndarray:
        return self.tables[qname][window]

    def ancestors(self, qname: str) -> set:
        seen = set()
        stack = list(self.parents[qname])
        while stack:
            p = stack.pop()
            if p not in seen:
                seen.add(p)
                stack.extend(self.parents[p])
        return seen

    def changed(self, qname: str) -> bool:
        """Whether the ref and cur tables differ at all."""
        return not np.array_equal(self.tables[qname]["ref"], self.tables[qname]["cur"])


def _smoothed(counts: np.ndarray, alpha: float) -> np.ndarray:
    t = counts + alpha
    return t / t.sum(axis=-1, keepdims=True)


def fit_mechanisms(system_map: SystemMap, ds: WindowedDataset, view: View,
                   k: int = DEFAULT_BINS, alpha: float = DEFAULT_ALPHA) -> MechanismSet:
    """Fit ref and cur mechanisms for one view over a shared discretization."""
    ref_t = view_matrix(ds, system_map, view, "ref")
    cur_t = view_matrix(ds, system_map, view, "cur")
    common = tuple(q for q in ref_t.nodes if q in set(cur_t.nodes))
    if not common:
        raise NoDataForView(f"no nodes with data in both windows for view '{view.name}'")
    excluded = tuple(sorted(set(ref_t.excluded) | set(cur_t.excluded)
                            | (set(ref_t.nodes) ^ set(cur_t.nodes))))

    disc = fit_discretization(
        system_map,
        ViewTable(view, "ref", common, {q: ref_t.columns[q] for q in common},
                  ref_t.excluded, ref_t.n_rows),
        k,
        ViewTable(view, "cur", common, {q: cur_t.columns[q] for q in common},
                  cur_t.excluded, cur_t.n_rows),
    )

    graph = system_map.view_graph(view)
    in_set = set(common)
    parents = {q: tuple(p for p in graph.parents[q] if p in in_set) for q in common}
    topo = tuple(q for q in graph.topo if q in in_set)

    codes = {
        "ref": {q: disc.encode(q, ref_t.columns[q]) for q in common},
        "cur": {q: disc.encode(q, cur_t.columns[q]) for q in common},
    }

    tables: dict[str, dict[str, np.ndarray]] = {}
    for q in common:
        pa = parents[q]
        child_k = disc.n_states(q)
        pa_dims = tuple(disc.n_states(p) for p in pa)
        n_cfg = int(np.prod(pa_dims)) if pa else 1
        counts = {}
        for w in ("ref", "cur"):
            if pa:
                cfg = np.ravel_multi_index([codes[w][p] for p in pa], pa_dims)
            else:
                cfg = np.zeros(len(codes[w][q]), dtype=np.int64)
            flat = np.bincount(cfg * child_k + codes[w][q], minlength=n_cfg * child_k)
            counts[w] = flat.reshape(n_cfg, child_k).astype(float)
        pooled = counts["ref"] + counts["cur"]
        pooled_tab = _smoothed(pooled, alpha)
        tables[q] = {}
        for w in ("ref", "cur"):
            tab = _smoothed(counts[w], alpha)
            empty = counts[w].sum(axis=1) == 0
            if np.any(empty):
                tab[empty] = pooled_tab[empty]
            tables[q][w] = tab.reshape(pa_dims + (child_k,))

    return MechanismSet(
        view=view, nodes=common, parents=parents, topo=topo, disc=disc,
        tables=tables, alpha=alpha, excluded=excluded,
    )


# ---------------------------------------------------------------------------
# exact inference by variable elimination

def _factor_for(mech: MechanismSet, node: str, window: str):
    pa = mech.parents[node]
    scope = pa + (node,)
    order = tuple(sorted(scope))
    table = mech.table(node, window)
    perm = [scope.index(v) for v in order]
    return order, np.transpose(table, perm)


def _broadcast(array: np.ndarray, scope, allvars) -> np.ndarray:
    dims = dict(zip(scope, array.shape))
    return array.reshape([dims.get(v, 1) for v in allvars])


def _multiply(f1, f2, limit):
    s1, a1 = f1
    s2, a2 = f2
    allvars = tuple(sorted(set(s1) | set(s2)))
    dims = dict(zip(s1, a1.shape))
    dims.update(zip(s2, a2.shape))
    size = 1
    for v in allvars:
        size *= dims[v]
    if size > limit:
        raise StateSpaceTooLarge(
            f"factor over {allvars} has {size} states (limit {limit})"
        )
    return allvars, _broadcast(a1, s1, allvars) * _broadcast(a2, s2, allvars)


def window_assignment(mech: MechanismSet, cur_nodes) -> dict:
    """Assignment using cur mechanisms for ``cur_nodes``, ref elsewhere."""
    cur = set(cur_nodes)
    return {q: ("cur" if q in cur else "ref") for q in mech.nodes}


def target_marginal(mech: MechanismSet, assignment: dict, target: str,
                    limit: int = DEFAULT_STATE_LIMIT) -> np.ndarray:
    """Exact marginal of ``target`` under a per-node window assignment.

    Only the target's ancestors participate (other factors integrate to
    one). Elimination order is min-degree with lexicographic tie-breaks,
    so results are bit-deterministic.
    """
    if target not in mech.parents:
        raise KeyError(f"'{target}' is not a fitted node of view '{mech.view.name}'")
    relevant = mech.ancestors(target) | {target}
    factors = [
        _factor_for(mech, q, assignment.get(q, "ref")) for q in sorted(relevant)
    ]
    to_eliminate = set(relevant) - {target}

    while to_eliminate:
        neighbors = {v: set() for v in to_eliminate}
        for scope, _ in factors:
            for v in scope:
                if v in neighbors:
                    neighbors[v].update(scope)
        victim = min(to_eliminate, key=lambda v: (len(neighbors[v] - {v}), v))
        group = [f for f in factors if victim in f[0]]
        rest = [f for f in factors if victim not in f[0]]
        prod = group[0]
        for f in group[1:]:
            prod = _multiply(prod, f, limit)
        scope, array = prod
        axis = scope.index(victim)
        summed = array.sum(axis=axis)
        new_scope = tuple(v for v in scope if v != victim)
        if new_scope:
            rest.append((new_scope, summed))
        else:
            rest.append(((), summed))
        factors = rest
        to_eliminate.discard(victim)

    out = None
    for scope, array in factors:
        if scope == (target,):
            out = array.copy() if out is None else out * array
    # scalar factors can arise from disconnected eliminated components
    for scope, array in factors:
        if scope == ():
            out = out * float(array)
    return out


def sample_marginal(mech: MechanismSet, assignment: dict, target: str,
                    m: int, seed) -> np.ndarray:
    """Histogram of ``m`` ancestral samples of ``target``; seed-deterministic."""
    if m < 1:
        raise ValueError(f"sample count must be >= 1, got {m}")
    rng = np.random.default_rng(seed)
    relevant = mech.ancestors(target) | {target}
    samples: dict[str, np.ndarray] = {}
    for node in mech.topo:
        if node not in relevant:
            continue
        table = mech.table(node, assignment.get(node, "ref"))
        k = mech.n_states(node)
        flat = table.reshape(-1, k)
        pa = mech.parents[node]
        if pa:
            dims = tuple(mech.n_states(p) for p in pa)
            idx = np.ravel_multi_index([samples[p] for p in pa], dims)
        else:
            idx = np.zeros(m, dtype=np.int64)
        cdf = np.cumsum(flat[idx], axis=1)
        u = rng.random(m)
        codes = (u[:, None] > cdf).sum(axis=1)
        samples[node] = np.minimum(codes, k - 1)
    k = mech.n_states(target)
    return np.bincount(samples[target], minlength=k) / m


# ---------------------------------------------------------------------------
# divergences

def _check_pair(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.ndim != 1 or q.ndim != 1 or p.shape != q.shape:
        raise LengthMismatch(f"vector lengths differ: {p.shape} vs {q.shape}")
    for v in (p, q):
        if np.any(v < 0) or abs(float(v.sum()) - 1.0) > 1e-9:
            raise NotNormalized("probability vector does not sum to 1")
    return p, q


def jsd(p, q) -> float:
    """Jensen-Shannon divergence, natural log; symmetric, in [0, ln 2]."""
    p, q = _check_pair(p, q)
    m = 0.5 * (p + q)

    def kl(a):
        mask = a > 0
        return float(np.sum(a[mask] * np.log(a[mask] / m[mask])))

    return 0.5 * kl(p) + 0.5 * kl(q)


def total_variation(p, q) -> float:
    p, q = _check_pair(p, q)
    return 0.5 * float(np.abs(p - q).sum())


def divergence(p, q, kind: str = "jsd") -> float:
    if kind == "jsd":
        return jsd(p, q)
    if kind == "tv":
        return total_variation(p, q)
    raise ValueError(f"unknown divergence '{kind}'")


# ---------------------------------------------------------------------------
# two-sample permutation shift test

@dataclass(frozen=True)
class ShiftTestResult:
    node: str
    statistic: float
    p_value: float


def shift_test(ds: WindowedDataset, system_map: SystemMap, node: str,
               B: int = 1000, seed=0, k: int = DEFAULT_BINS,
               div: str = "jsd") -> ShiftTestResult:
    """Permutation two-sample test on one variable's binned marginals.

    Statistic: divergence between the per-window bin histograms. The
    pooled rows are re-split ``B`` times preserving window sizes;
    p = (1 + #{permutation statistic >= observed}) / (B + 1).
    """
    if B < 100:
        raise ValueError(f"need at least 100 permutations, got {B}")
    col = resolve_column(ds, system_map, node)
    if col is None:
        raise InsufficientData(f"no data column for '{node}'")
    values = ds.columns[col]
    present = values != ""
    ref_vals = values[present & ds.window_mask("ref")]
    cur_vals = values[present & ds.window_mask("cur")]
    if len(ref_vals) < 30 or len(cur_vals) < 30:
        raise InsufficientData(
            f"'{node}': {len(ref_vals)} ref / {len(cur_vals)} cur rows (need 30 each)"
        )
    bins = fit_variable(ref_vals, k, system_map.node(node).kind, cur_vals)
    n_states = bins.n_states
    ref_codes = bins.encode(ref_vals)
    cur_codes = bins.encode(cur_vals)

    def stat(a, b):
        return divergence(
            np.bincount(a, minlength=n_states) / len(a),
            np.bincount(b, minlength=n_states) / len(b),
            div,
        )

    observed = stat(ref_codes, cur_codes)
    pooled = np.concatenate([ref_codes, cur_codes])
    n_ref = len(ref_codes)
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(B):
        perm = rng.permutation(pooled)
        if stat(perm[:n_ref], perm[n_ref:]) >= observed:
            hits += 1
    return ShiftTestResult(node=node, statistic=observed,
                           p_value=(1 + hits) / (B + 1))
