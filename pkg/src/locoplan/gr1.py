"""Explicit-state solver for two-player games with GR(1) winning conditions.

The game alternates environment and system moves over a finite state set:
from state ``v`` the environment picks one of its allowed actions, then the
system picks a successor state consistent with that action.  The winning
condition is the usual assume-guarantee pair of justice families: if every
environment justice predicate holds infinitely often along a play, every
system justice predicate must too.

The solver runs the classic triple-nested fixpoint over enumerated states
(the state counts here are tiny, so no symbolic representation is needed)
and keeps the intermediate layers so a deterministic strategy can be
extracted afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np


@dataclass
class Gr1Game:
    """Enumerated two-player game.

    ``env_moves[v]`` lists the environment action ids playable at state
    ``v``; ``sys_succ[v][k]`` lists the successor states the system may
    choose after the environment played ``env_moves[v][k]``.  An empty
    successor list models a system deadlock (the environment wins there).
    """

    n_states: int
    env_moves: List[List[int]]
    sys_succ: List[List[List[int]]]
    env_justice: List[np.ndarray]
    sys_justice: List[np.ndarray]

    def __post_init__(self):
        assert len(self.env_moves) == self.n_states
        assert len(self.sys_succ) == self.n_states
        for v in range(self.n_states):
            assert len(self.env_moves[v]) == len(self.sys_succ[v])
            assert self.env_moves[v], f"state {v} has no environment moves"
        self._build_arrays()

    def _build_arrays(self):
        # Flattened edge arrays for a vectorized controllable-predecessor.
        # Empty successor lists get a sentinel edge to a dead state (index
        # n_states) that never belongs to any target set.
        pair_ptr = [0]
        pair_state = []
        edges = []
        state_ptr = [0]
        for v in range(self.n_states):
            for succs in self.sys_succ[v]:
                pair_state.append(v)
                edges.extend(succs if succs else [self.n_states])
                pair_ptr.append(len(edges))
            state_ptr.append(len(pair_state))
        self._edge_succ = np.asarray(edges, dtype=np.int32)
        self._pair_ptr = np.asarray(pair_ptr, dtype=np.int64)
        self._state_ptr = np.asarray(state_ptr, dtype=np.int64)
        self._n_pairs = len(pair_state)

    def cpre(self, S: np.ndarray) -> np.ndarray:
        """States from which, whatever the environment plays, the system
        can move into ``S``."""
        ext = np.zeros(self.n_states + 1, dtype=np.int8)
        ext[: self.n_states] = S
        edge_vals = ext[self._edge_succ]
        pair_any = np.maximum.reduceat(edge_vals, self._pair_ptr[:-1])
        state_all = np.minimum.reduceat(pair_any, self._state_ptr[:-1])
        return state_all.astype(bool)


@dataclass
class Gr1Solution:
    """Winning region plus the fixpoint layers needed for play."""

    game: Gr1Game
    winning: np.ndarray
    cpre_winning: np.ndarray
    #: per system goal j: list of Y-layers (each a bool array), innermost first
    layers: List[List[np.ndarray]]
    #: per (j, layer): per env goal i the X fixpoint set
    xsets: List[List[List[np.ndarray]]]
    #: per system goal j: rank array (layer index, -1 outside)
    ranks: List[np.ndarray]

    def n_sys_goals(self) -> int:
        return len(self.game.sys_justice)

    def choose(
        self,
        v: int,
        goal: int,
        env_k: int,
        order_key: Callable[[int], tuple],
    ) -> Tuple[int, int]:
        """Deterministic system response at state ``v`` pursuing goal index
        ``goal``, after the environment played move slot ``env_k``.

        Returns ``(successor_state, next_goal)``.  Ties between equally
        acceptable successors break on ``order_key``.
        """
        game = self.game
        succs = game.sys_succ[v][env_k]
        n_goals = self.n_sys_goals()

        def best(cands: Sequence[int], rank_goal: int) -> int:
            r = self.ranks[rank_goal]
            return min(cands, key=lambda w: (int(r[w]) if r[w] >= 0 else 1 << 30, order_key(w)))

        # 1. Goal satisfied here and the winning region is controllable:
        #    advance the goal counter and stay in the winning region.
        if game.sys_justice[goal][v] and self.cpre_winning[v]:
            nxt = (goal + 1) % n_goals
            cands = [w for w in succs if self.winning[w]]
            if cands:
                return best(cands, nxt), nxt

        rho = int(self.ranks[goal][v])
        if rho > 0:
            # 2. Strict rank descent toward the goal when available.
            lower = self.layers[goal][rho - 1]
            cands = [w for w in succs if lower[w]]
            if cands:
                return best(cands, goal), goal
        if rho >= 0:
            # 3. Hold inside an X set, blocking one environment justice goal.
            for X in self.xsets[goal][rho]:
                if X[v]:
                    cands = [w for w in succs if X[w]]
                    if cands:
                        return best(cands, goal), goal
        # Fallback (unreachable for states in the winning region under
        # admissible environments): any winning successor, else any.
        cands = [w for w in succs if self.winning[w]] or list(succs)
        if not cands:
            raise RuntimeError(f"no system response at state {v}")
        return best(cands, goal), goal


def solve_gr1(game: Gr1Game) -> Gr1Solution:
    """Compute the GR(1) winning region and strategy layers.

    Winning region: nu Z. AND_j mu Y. OR_i nu X.
    ((G_j and cpre Z) or cpre Y or (not A_i and cpre X)).
    """
    n = game.n_states
    if not game.sys_justice or not game.env_justice:
        raise ValueError("at least one justice goal is required on each side")

    Z = np.ones(n, dtype=bool)
    while True:
        newZ = Z.copy()
        for G in game.sys_justice:
            Y = _mu_y(game, Z, G)[0]
            newZ &= Y
        if (newZ == Z).all():
            break
        Z = newZ

    layers_all: List[List[np.ndarray]] = []
    xsets_all: List[List[List[np.ndarray]]] = []
    ranks: List[np.ndarray] = []
    for G in game.sys_justice:
        Y, layers, xsets = _mu_y(game, Z, G)
        layers_all.append(layers)
        xsets_all.append(xsets)
        rank = np.full(n, -1, dtype=np.int32)
        for idx in range(len(layers) - 1, -1, -1):
            rank[layers[idx]] = idx
        ranks.append(rank)
    return Gr1Solution(
        game=game,
        winning=Z,
        cpre_winning=game.cpre(Z),
        layers=layers_all,
        xsets=xsets_all,
        ranks=ranks,
    )


def _mu_y(
    game: Gr1Game, Z: np.ndarray, G: np.ndarray
) -> Tuple[np.ndarray, List[np.ndarray], List[List[np.ndarray]]]:
    n = game.n_states
    base_goal = G & game.cpre(Z)
    Y = np.zeros(n, dtype=bool)
    layers: List[np.ndarray] = []
    xsets: List[List[np.ndarray]] = []
    while True:
        base = base_goal | game.cpre(Y)
        newY = np.zeros(n, dtype=bool)
        xs: List[np.ndarray] = []
        for A in game.env_justice:
            X = np.ones(n, dtype=bool)
            while True:
                Xn = base | (~A & game.cpre(X))
                if (Xn == X).all():
                    break
                X = Xn
            newY |= X
            xs.append(X)
        if (newY == Y).all():
            return Y, layers, xsets
        Y = newY
        layers.append(Y.copy())
        xsets.append(xs)
