"""Product Markov chain of a game played by finite-memory automata.

Nodes are (memory tuple, state) pairs reachable from the start. The chain is
exact: evaluating discounted or finite-horizon payoffs on it involves no
sampling.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .game_model import AutomatonStrategy, StochasticGame

DEFAULT_CAP = 10**6


class ChainTooLarge(RuntimeError):
    pass


@dataclass(eq=False)
class ProductChain:
    game: StochasticGame
    nodes: list[tuple[tuple, int]]
    P: sp.csr_matrix  # node -> node transition probabilities
    W: sp.csr_matrix  # node -> game row (action-profile) probabilities

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def node_state(self) -> np.ndarray:
        return np.fromiter((s for _, s in self.nodes), dtype=int, count=len(self.nodes))

    def stage_payoff(self) -> np.ndarray:
        """Expected stage payoff at each node (nodes x players)."""
        return np.asarray(self.W @ self.game.U)

    def discounted_node_occupation(self, lam: float, start: int = 0) -> np.ndarray:
        n = self.size
        rhs = np.zeros(n)
        rhs[start] = 1.0 - lam
        A = (sp.identity(n, format="csc") - lam * self.P.T.tocsc())
        mu = spla.spsolve(A, rhs) if n > 1 else rhs / A.toarray()[0, 0]
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        resid = np.abs(A @ mu - rhs).max()
        if resid > 1e-6:
            raise RuntimeError(f"occupation solve residual {resid:.3g}")
        return mu

    def row_occupation(self, lam: float, start: int = 0) -> np.ndarray:
        mu = self.discounted_node_occupation(lam, start)
        return np.asarray(self.W.T @ mu).ravel()

    def average_payoffs(self, horizons, start: int = 0) -> dict[int, np.ndarray]:
        """Expected average payoff over the first N stages for each N in ``horizons``."""
        horizons = sorted(set(int(h) for h in horizons))
        r = self.stage_payoff()
        d = np.zeros(self.size)
        d[start] = 1.0
        PT = self.P.T.tocsr()
        total = np.zeros(self.game.n_players)
        out, n = {}, 0
        for h in horizons:
            while n < h:
                total += d @ r
                d = PT @ d
                n += 1
            out[h] = total / h
        return out


def build_chain(
    game: StochasticGame,
    automata: tuple[AutomatonStrategy, ...],
    s0: int,
    cap: int = DEFAULT_CAP,
) -> ProductChain:
    start = (tuple(a.initial for a in automata), s0)
    index = {start: 0}
    nodes = [start]
    queue = deque([start])
    P_rows, P_cols, P_vals = [], [], []
    W_rows, W_cols, W_vals = [], [], []
    Q = game.Q
    acts = game.pair_actions
    while queue:
        node = queue.popleft()
        k = index[node]
        mem, s = node
        mixes = [a.emit(m, s) for a, m in zip(automata, mem)]
        for row in game.rows(s):
            prof = tuple(int(x) for x in acts[row])
            w = 1.0
            for i, mix in enumerate(mixes):
                w *= mix[prof[i]]
                if w == 0.0:
                    break
            if w == 0.0:
                continue
            W_rows.append(k)
            W_cols.append(row)
            W_vals.append(w)
            for t in np.nonzero(Q[row] > 0.0)[0]:
                t = int(t)
                new_mem = tuple(a.update(m, s, prof, t) for a, m in zip(automata, mem))
                nxt = (new_mem, t)
                j = index.get(nxt)
                if j is None:
                    if len(nodes) >= cap:
                        raise ChainTooLarge(f"product chain exceeds {cap} nodes")
                    j = len(nodes)
                    index[nxt] = j
                    nodes.append(nxt)
                    queue.append(nxt)
                P_rows.append(k)
                P_cols.append(j)
                P_vals.append(w * Q[row, t])
    n = len(nodes)
    P = sp.csr_matrix((P_vals, (P_rows, P_cols)), shape=(n, n))
    W = sp.csr_matrix((W_vals, (W_rows, W_cols)), shape=(n, game.n_pairs))
    return ProductChain(game, nodes, P, W)
