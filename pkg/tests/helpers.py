"""Shared oracles and random-instance builders for the test suite.

The inference oracle enumerates the full joint distribution directly, so
it shares no code path with variable elimination. The random builders
produce structurally valid maps and mechanism sets from a seeded
generator, for property-style checks over many instances.
"""

from __future__ import annotations

import functools
import itertools

import numpy as np

from mlsysmap.mapcore import Node, NodeKind, Relation, RelationKind, View, build_map
from mlsysmap.mechanisms import Discretization, MechanismSet, NumericBins
from mlsysmap.simulator import ScenarioConfig, generate


# ---------------------------------------------------------------------------
# inference oracle

def brute_force_marginal(mech: MechanismSet, assignment: dict, target: str):
    """Marginal of ``target`` by full enumeration of its ancestral joint."""
    relevant = sorted(mech.ancestors(target) | {target})
    dims = [mech.n_states(q) for q in relevant]
    out = np.zeros(mech.n_states(target))
    for combo in itertools.product(*(range(d) for d in dims)):
        state = dict(zip(relevant, combo))
        p = 1.0
        for q in relevant:
            table = mech.table(q, assignment.get(q, "ref"))
            idx = tuple(state[pa] for pa in mech.parents[q]) + (state[q],)
            p *= float(table[idx])
        out[state[target]] += p
    return out


# ---------------------------------------------------------------------------
# random mechanism sets

def random_mechanism_set(rng, n_nodes=None, max_states=3, p_edge=0.5,
                         changed=None) -> MechanismSet:
    """Random DAG with random CPTs for both windows.

    ``changed``: None for fully independent ref/cur tables, otherwise the
    set of node indices whose cur table differs (the rest share arrays).
    """
    if n_nodes is None:
        n_nodes = int(rng.integers(2, 6))
    names = tuple(f"system.n{i}" for i in range(n_nodes))
    parents = {}
    for j, q in enumerate(names):
        parents[q] = tuple(names[i] for i in range(j) if rng.random() < p_edge)
    states = {q: int(rng.integers(2, max_states + 1)) for q in names}
    disc = Discretization({
        q: NumericBins(tuple(float(e) for e in range(1, states[q])))
        for q in names
    })
    tables = {}
    for j, q in enumerate(names):
        shape = tuple(states[p] for p in parents[q]) + (states[q],)
        n_rows = int(np.prod(shape[:-1], dtype=np.int64)) if len(shape) > 1 else 1

        def cpt():
            return rng.dirichlet(np.ones(states[q]), size=n_rows).reshape(shape)

        ref = cpt()
        if changed is not None and j not in changed:
            cur = ref
        else:
            cur = cpt()
        tables[q] = {"ref": ref, "cur": cur}
    return MechanismSet(view=View.system(), nodes=names, parents=parents,
                        topo=names, disc=disc, tables=tables, alpha=1.0)


# ---------------------------------------------------------------------------
# random valid maps

def random_map(rng, name="rmap"):
    """A random structurally valid map exercising every relation kind."""
    nodes, relations = [], []
    sysview = View.system()
    nd = int(rng.integers(2, 6))
    for i in range(nd):
        nodes.append(Node(sysview, f"s{i}", NodeKind.DATA))
    for j in range(nd):
        for i in range(j):
            if rng.random() < 0.4:
                relations.append(
                    Relation(f"system.s{i}", f"system.s{j}", RelationKind.CAUSAL))

    n_sub = int(rng.integers(1, min(3, nd) + 1))
    for k in range(n_sub):
        v = View.subsystem(f"sub{k}")
        term = Node(v, "out", NodeKind.DATA)
        nodes.append(term)
        for m in range(int(rng.integers(0, 3))):
            inp = Node(v, f"in{m}", NodeKind.DATA, boundary=bool(rng.random() < 0.5))
            nodes.append(inp)
            relations.append(Relation(inp.qname, term.qname, RelationKind.CAUSAL))
        if rng.random() < 0.5:
            mod = Node(v, "knob", NodeKind.MODULATOR)
            nodes.append(mod)
            relations.append(Relation(mod.qname, term.qname, RelationKind.CAUSAL))
        relations.append(Relation(term.qname, f"system.s{k}", RelationKind.MAPPING))

    if rng.random() < 0.7:
        env = View.environment()
        nr = int(rng.integers(1, 4))
        for i in range(nr):
            nodes.append(Node(env, f"r{i}", NodeKind.RANDOM))
        for j in range(nr):
            for i in range(j):
                if rng.random() < 0.3:
                    relations.append(
                        Relation(f"env.r{i}", f"env.r{j}", RelationKind.CAUSAL))
        causal_dsts = {r.dst for r in relations if r.kind is RelationKind.CAUSAL}
        roots = [f"system.s{j}" for j in range(nd)
                 if f"system.s{j}" not in causal_dsts]
        if roots and rng.random() < 0.8:
            relations.append(Relation("env.r0", roots[0], RelationKind.MEASURE))
        if rng.random() < 0.5:
            relations.append(
                Relation(f"system.s{nd - 1}", f"env.r{nr - 1}", RelationKind.ACTUATE))

    return build_map(name, nodes, relations)


# ---------------------------------------------------------------------------
# shared scenario cache (simulation is deterministic, so caching is safe)

@functools.lru_cache(maxsize=None)
def simulate(scenario: str, n: int = 5000, seed: int = 0):
    return generate(ScenarioConfig(scenario, n=n, seed=seed))
