"""Mechanism-swap set function and Shapley attribution.

The game value of a node subset S is the divergence between the target's
marginal when the nodes in S use their current-window mechanisms (all
others staying on reference) and the all-reference marginal. Shapley
values over this game split the observed shift across the nodes whose
mechanisms changed. Players are all fitted nodes of the view, including
the target itself, so a local mechanism change at the target is
attributable to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import mechanisms as mech_mod
from .errors import StateSpaceTooLarge, TooManyPlayers
from .mapcore import View
from .mechanisms import MechanismSet, divergence, sample_marginal, target_marginal

EXACT_PLAYER_LIMIT = 12
DEFAULT_TAU = 0.5
DEFAULT_BRANCH_CUTOFF = 0.2
DEFAULT_EPSILON = 2e-3
FALLBACK_SAMPLES = 20_000


@dataclass(frozen=True)
class Classification:
    """Where attribution mass lands: one node, several, or nowhere."""

    kind: str                    # "concentrated" | "distributed" | "negligible"
    nodes: tuple[str, ...] = ()

    @property
    def top(self) -> Optional[str]:
        return self.nodes[0] if self.nodes else None


@dataclass
class AttributionResult:
    view: View
    target: str
    players: tuple[str, ...]
    phi: dict[str, float]
    total: float                 # v(N), the full mechanism-swap shift
    shares: dict[str, float]     # |phi| normalized; all zero when sum is zero
    mode: str                    # "exact" | "sampled"
    classification: Classification

    def ordered_shares(self) -> list[tuple[str, float]]:
        return sorted(self.shares.items(), key=lambda kv: (-kv[1], kv[0]))


class MechanismSwapGame:
    """Cached set function v(S) over one mechanism set and target."""

    def __init__(self, mech: MechanismSet, target: str, div: str = "jsd",
                 state_limit: int = mech_mod.DEFAULT_STATE_LIMIT,
                 fallback_samples: int = FALLBACK_SAMPLES, seed=0):
        self.mech = mech
        self.target = target
        self.div = div
        self.state_limit = state_limit
        self.fallback_samples = fallback_samples
        self.seed = seed
        self.players = mech.nodes
        self._index = {p: 1 << i for i, p in enumerate(self.players)}
        self._cache: dict[int, float] = {}
        self.used_sampling = False
        self._baseline = self._marginal(frozenset())

    def _marginal(self, subset) -> np.ndarray:
        assignment = mech_mod.window_assignment(self.mech, subset)
        try:
            return target_marginal(self.mech, assignment, self.target,
                                   limit=self.state_limit)
        except StateSpaceTooLarge:
            self.used_sampling = True
            key = sum(self._index[p] for p in subset)
            return sample_marginal(self.mech, assignment, self.target,
                                   self.fallback_samples, [self.seed, key])

    def __call__(self, subset) -> float:
        key = sum(self._index[p] for p in subset)
        if key not in self._cache:
            p = self._marginal(subset)
            self._cache[key] = divergence(p, self._baseline, self.div)
        return self._cache[key]


def set_function(mech: MechanismSet, subset, target: str, div: str = "jsd",
                 state_limit: int = mech_mod.DEFAULT_STATE_LIMIT) -> float:
    """v(S): shift of the target marginal when S uses current mechanisms."""
    game = MechanismSwapGame(mech, target, div, state_limit)
    return game(frozenset(subset))


# ---------------------------------------------------------------------------
# generic Shapley solvers (usable with any set function)

def exact_shapley(v: Callable, players: Sequence[str]) -> dict[str, float]:
    """Exact Shapley values by full subset enumeration.

    v takes a frozenset of player names. Accumulation order is canonical
    (sorted players, increasing subset bitmask) so results are
    bit-deterministic.
    """
    players = sorted(players)
    n = len(players)
    if n > EXACT_PLAYER_LIMIT:
        raise TooManyPlayers(f"{n} players exceeds exact limit {EXACT_PLAYER_LIMIT}")
    values = {}
    for mask in range(1 << n):
        subset = frozenset(players[i] for i in range(n) if mask >> i & 1)
        values[mask] = v(subset)
    fact = [math.factorial(i) for i in range(n + 1)]
    weights = [fact[s] * fact[n - s - 1] / fact[n] for s in range(n)]
    phi = {p: 0.0 for p in players}
    for i, p in enumerate(players):
        bit = 1 << i
        for mask in range(1 << n):
            if mask & bit:
                continue
            s = bin(mask).count("1")
            phi[p] += weights[s] * (values[mask | bit] - values[mask])
    return phi


def sampled_shapley(v: Callable, players: Sequence[str], permutations: int,
                    seed) -> dict[str, float]:
    """Mean marginal contribution over sampled player orders."""
    if permutations < 1:
        raise ValueError(f"need at least 1 permutation, got {permutations}")
    players = sorted(players)
    n = len(players)
    rng = np.random.default_rng(seed)
    phi = {p: 0.0 for p in players}
    for _ in range(permutations):
        order = rng.permutation(n)
        prefix: set = set()
        prev = v(frozenset())
        for idx in order:
            p = players[idx]
            prefix.add(p)
            val = v(frozenset(prefix))
            phi[p] += val - prev
            prev = val
    return {p: phi[p] / permutations for p in players}


# ---------------------------------------------------------------------------
# classification and top-level entry points

def classify(phi: dict, total: float, tau: float = DEFAULT_TAU,
             epsilon: float = DEFAULT_EPSILON,
             branch_cutoff: float = DEFAULT_BRANCH_CUTOFF) -> Classification:
    """Concentrated / distributed / negligible, on absolute-value shares."""
    if total < epsilon:
        return Classification("negligible")
    abs_sum = sum(abs(x) for x in phi.values())
    if abs_sum == 0.0:
        return Classification("negligible")
    shares = {p: abs(x) / abs_sum for p, x in phi.items()}
    ranked = sorted(shares.items(), key=lambda kv: (-kv[1], kv[0]))
    if ranked[0][1] >= tau:
        return Classification("concentrated", (ranked[0][0],))
    tops = tuple(p for p, s in ranked if s >= branch_cutoff)
    return Classification("distributed", tops)


def shares_of(phi: dict) -> dict:
    abs_sum = sum(abs(x) for x in phi.values())
    if abs_sum == 0.0:
        return {p: 0.0 for p in phi}
    return {p: abs(x) / abs_sum for p, x in phi.items()}


def _build_result(mech, target, phi, total, mode, tau, epsilon, branch_cutoff):
    return AttributionResult(
        view=mech.view,
        target=target,
        players=tuple(sorted(phi)),
        phi=phi,
        total=total,
        shares=shares_of(phi),
        mode=mode,
        classification=classify(phi, total, tau, epsilon, branch_cutoff),
    )


def shapley_exact(mech: MechanismSet, target: str, div: str = "jsd",
                  tau: float = DEFAULT_TAU, epsilon: float = DEFAULT_EPSILON,
                  branch_cutoff: float = DEFAULT_BRANCH_CUTOFF,
                  state_limit: int = mech_mod.DEFAULT_STATE_LIMIT,
                  seed=0) -> AttributionResult:
    """Exact mechanism-swap Shapley attribution for one target."""
    game = MechanismSwapGame(mech, target, div, state_limit, seed=seed)
    phi = exact_shapley(game, game.players)
    total = game(frozenset(game.players))
    mode = "sampled" if game.used_sampling else "exact"
    return _build_result(mech, target, phi, total, mode, tau, epsilon, branch_cutoff)


def shapley_sampled(mech: MechanismSet, target: str, permutations: int, seed,
                    div: str = "jsd", tau: float = DEFAULT_TAU,
                    epsilon: float = DEFAULT_EPSILON,
                    branch_cutoff: float = DEFAULT_BRANCH_CUTOFF,
                    state_limit: int = mech_mod.DEFAULT_STATE_LIMIT) -> AttributionResult:
    """Permutation-sampled Shapley attribution; deterministic given seed."""
    game = MechanismSwapGame(mech, target, div, state_limit, seed=seed)
    phi = sampled_shapley(game, game.players, permutations, seed)
    total = game(frozenset(game.players))
    return _build_result(mech, target, phi, total, "sampled", tau, epsilon, branch_cutoff)


def attribute(mech: MechanismSet, target: str, mode: str = "auto",
              permutations: int = 500, seed=0, **kwargs) -> AttributionResult:
    """Dispatch to exact or sampled attribution based on player count."""
    if mode == "exact" or (mode == "auto" and len(mech.nodes) <= EXACT_PLAYER_LIMIT):
        return shapley_exact(mech, target, seed=seed, **kwargs)
    return shapley_sampled(mech, target, permutations, seed, **kwargs)
