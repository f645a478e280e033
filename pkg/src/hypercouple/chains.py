"""Glauber dynamics for hypergraph independent sets and proper colourings.

Each step consumes its randomness in a fixed order (vertex, then coin or
colour) so that two copies driven by the same draws realise the identity
coupling. The independent-set coin ``u`` is uniform on [0, 1): the move is
"occupy v" when ``u < lam/(1+lam)`` and "vacate v" otherwise. That gives
removal probability 1/(1+lam) and insertion probability lam/(1+lam), and
the coin is consumed even when an insertion is blocked.

Scalar step functions work on one state and return a new one. The
``*_batch`` kernels update ``R`` independent states in place and are what
the experiments use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Collection, Sequence

import numpy as np

from .hypergraph import Hypergraph


class Kind(str, Enum):
    INDSET = "indset"
    COLOURING = "colouring"


@dataclass(frozen=True)
class ChainParams:
    kind: Kind
    lam: float = 1.0
    q: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.INDSET:
            if not self.lam > 0:
                raise ValueError(f"fugacity must be positive, got {self.lam}")
        else:
            if self.q is None or self.q < 2:
                raise ValueError(f"colouring chain needs q >= 2, got {self.q}")

    @classmethod
    def indset(cls, lam: float = 1.0) -> "ChainParams":
        return cls(Kind.INDSET, lam=lam)

    @classmethod
    def colouring(cls, q: int) -> "ChainParams":
        return cls(Kind.COLOURING, q=q)

    @property
    def occupy_prob(self) -> float:
        return float(self.lam) / (1.0 + float(self.lam))

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        if self.kind is Kind.INDSET:
            d["lambda"] = float(self.lam)
        else:
            d["q"] = self.q
        return d


class InfeasibleStateError(ValueError):
    pass


def as_mask(n: int, S) -> np.ndarray:
    """Boolean membership vector from a mask or a set of vertex indices."""
    if isinstance(S, (set, frozenset)):
        mask = np.zeros(n, dtype=bool)
        idx = list(S)
        if idx and (min(idx) < 0 or max(idx) >= n):
            raise ValueError("vertex index out of range")
        mask[idx] = True
        return mask
    mask = np.asarray(S, dtype=bool)
    if mask.shape != (n,):
        raise ValueError(f"membership vector must have length {n}, got shape {mask.shape}")
    return mask


def is_independent(H: Hypergraph, S) -> bool:
    """True iff no edge of ``H`` lies entirely inside ``S``."""
    mask = as_mask(H.n, S)
    return not any(all(mask[v] for v in e) for e in H.edges)


def is_proper(H: Hypergraph, colours: Sequence[int], q: int | None = None) -> bool:
    """True iff no edge is monochromatic (and, given ``q``, colours lie in 1..q)."""
    c = np.asarray(colours)
    if c.shape != (H.n,):
        raise ValueError(f"colouring must have length {H.n}")
    if q is not None and H.n and (c.min() < 1 or c.max() > q):
        return False
    return not any(len({int(c[v]) for v in e}) == 1 for e in H.edges)


def can_insert(H: Hypergraph, X: np.ndarray, v: int) -> bool:
    """Whether ``X ∪ {v}`` is independent, assuming ``X`` is."""
    for j in H.incidence[v]:
        if all(X[u] for u in H.edges[j] if u != v):
            return False
    return True


def can_recolour(H: Hypergraph, c: np.ndarray, v: int, k: int) -> bool:
    """Whether giving ``v`` colour ``k`` leaves every edge through ``v`` non-monochromatic."""
    for j in H.incidence[v]:
        if all(c[u] == k for u in H.edges[j] if u != v):
            return False
    return True


def indset_step(H: Hypergraph, X: np.ndarray, lam: float, v: int, u: float) -> np.ndarray:
    """One Glauber step with vertex ``v`` and coin ``u``; returns the new state."""
    occupy = u < lam / (1.0 + lam)
    if X[v]:
        if occupy:
            return X
        Y = X.copy()
        Y[v] = False
        return Y
    if occupy and can_insert(H, X, v):
        Y = X.copy()
        Y[v] = True
        return Y
    return X


def colouring_step(H: Hypergraph, c: np.ndarray, q: int, v: int, k: int) -> np.ndarray:
    """Propose recolouring ``v`` to ``k``; accept iff the result is proper."""
    if c[v] == k or not can_recolour(H, c, v, k):
        return c
    d = c.copy()
    d[v] = k
    return d


def step(H: Hypergraph, state: np.ndarray, params: ChainParams, v: int, r) -> np.ndarray:
    """Dispatch on chain kind. ``r`` is the coin (indset) or colour (colouring)."""
    if params.kind is Kind.INDSET:
        return indset_step(H, state, params.lam, v, r)
    return colouring_step(H, state, params.q, v, r)


def draw(rng: np.random.Generator, n: int, params: ChainParams, size=None):
    """Draw (vertex, coin-or-colour) in the fixed order used by every step."""
    v = rng.integers(0, n, size=size)
    if params.kind is Kind.INDSET:
        r = rng.random(size=size)
    else:
        r = rng.integers(1, params.q + 1, size=size)
    return v, r


# -- vectorised kernels -------------------------------------------------------


def _blocked(H: Hypergraph, state: np.ndarray, v: np.ndarray, target) -> np.ndarray:
    """Rows whose proposal at ``v`` would complete an edge.

    For independent sets ``target`` is True (occupied); for colourings it is
    the proposed colour per row. ``state`` carries one sentinel column at
    index n so padded member slots can be gathered; they count as matching.
    """
    inc, members, sizes = H.padded
    R = len(v)
    mem = members[inc[v]]  # (R, D, w)
    vals = state[np.arange(R)[:, None, None], mem]
    target = np.broadcast_to(np.asarray(target), (R,)).reshape(R, 1, 1)
    hit = (vals == target) | (mem == v[:, None, None]) | (mem == H.n)
    real = sizes[inc[v]] > 0  # (R, D)
    return (hit.all(axis=2) & real).any(axis=1)


def with_sentinel(states: np.ndarray, fill) -> np.ndarray:
    """Append the sentinel column used by the batch kernels."""
    R = states.shape[0]
    pad = np.full((R, 1), fill, dtype=states.dtype)
    return np.concatenate([states, pad], axis=1)


def indset_step_batch(H: Hypergraph, X: np.ndarray, lam: float, v: np.ndarray, u: np.ndarray) -> np.ndarray:
    """In-place step for ``R`` states; ``X`` is ``(R, n+1)`` bool with a False sentinel.

    Returns the boolean vector of rows whose state changed.
    """
    R = len(v)
    rows = np.arange(R)
    occupy = u < lam / (1.0 + lam)
    cur = X[rows, v]
    remove = cur & ~occupy
    want = ~cur & occupy
    add = want.copy()
    if want.any():
        idx = np.flatnonzero(want)
        add[idx] = ~_blocked(H, X[idx], v[idx], True)
    X[rows[remove], v[remove]] = False
    X[rows[add], v[add]] = True
    return remove | add


def colouring_step_batch(H: Hypergraph, C: np.ndarray, v: np.ndarray, k: np.ndarray) -> np.ndarray:
    """In-place step for ``R`` colourings; ``C`` is ``(R, n+1)`` int with a 0 sentinel."""
    R = len(v)
    rows = np.arange(R)
    change = C[rows, v] != k
    if change.any():
        idx = np.flatnonzero(change)
        change[idx] = ~_blocked(H, C[idx], v[idx], k[idx])
    C[rows[change], v[change]] = k[change]
    return change


def step_batch(H: Hypergraph, states: np.ndarray, params: ChainParams, v, r) -> np.ndarray:
    if params.kind is Kind.INDSET:
        return indset_step_batch(H, states, params.lam, v, r)
    return colouring_step_batch(H, states, v, r)


# -- initial states and runs ------------------------------------------------


def greedy_colouring(
    H: Hypergraph, q: int, seed: int | None = None, attempts: int = 50
) -> np.ndarray | None:
    """Find a proper q-colouring by randomised greedy assignment.

    The first attempt colours vertices in index order with the smallest
    legal colour; later attempts shuffle the order and colour choice. Returns
    ``None`` when every attempt fails.
    """
    rng = np.random.default_rng(seed)
    for attempt in range(attempts):
        order = np.arange(H.n) if attempt == 0 else rng.permutation(H.n)
        c = np.zeros(H.n, dtype=np.int64)
        ok = True
        for v in order:
            choices = np.arange(1, q + 1) if attempt == 0 else rng.permutation(np.arange(1, q + 1))
            for k in choices:
                # an edge only becomes monochromatic once all its vertices are coloured
                if all(
                    not all(c[u] == k for u in H.edges[j] if u != v)
                    for j in H.incidence[v]
                ):
                    c[v] = k
                    break
            else:
                ok = False
                break
        if ok:
            return c
    return None


def initial_state(H: Hypergraph, params: ChainParams, seed: int | None = None) -> np.ndarray:
    """Empty set for independent sets; a greedy proper colouring otherwise."""
    if params.kind is Kind.INDSET:
        return np.zeros(H.n, dtype=bool)
    c = greedy_colouring(H, params.q, seed=seed)
    if c is None:
        raise InfeasibleStateError(f"no proper {params.q}-colouring found by greedy search")
    return c


def check_feasible(H: Hypergraph, params: ChainParams, state) -> np.ndarray:
    if params.kind is Kind.INDSET:
        X = as_mask(H.n, state)
        if not is_independent(H, X):
            raise InfeasibleStateError("initial state is not an independent set")
        return X.copy()
    c = np.asarray(state, dtype=np.int64)
    if not is_proper(H, c, params.q):
        raise InfeasibleStateError("initial state is not a proper colouring")
    return c.copy()


@dataclass
class Trajectory:
    seed: int | None
    t_max: int
    final_state: np.ndarray
    acceptance_count: int
    stride: int | None = None
    samples: list[np.ndarray] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "seed": self.seed,
            "t_max": self.t_max,
            "final_state": _state_json(self.final_state),
            "acceptance_count": self.acceptance_count,
        }
        if self.stride:
            d["stride"] = self.stride
            d["samples"] = [_state_json(s) for s in self.samples]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _state_json(state: np.ndarray) -> list[int]:
    if state.dtype == bool:
        return [int(i) for i in np.flatnonzero(state)]
    return [int(x) for x in state]


def run_chain(
    H: Hypergraph,
    params: ChainParams,
    X0,
    t_max: int,
    seed: int | None = None,
    stride: int | None = None,
) -> Trajectory:
    """Run ``t_max`` steps from ``X0``; optionally keep every ``stride``-th state.

    Sampled states are taken after steps ``stride, 2*stride, ...``.
    """
    state = check_feasible(H, params, X0)
    rng = np.random.default_rng(seed)
    samples: list[np.ndarray] = []
    accepted = 0
    if t_max > 0:
        vs, rs = draw(rng, H.n, params, size=t_max)
        for t in range(t_max):
            nxt = step(H, state, params, int(vs[t]), rs[t].item())
            if nxt is not state:
                accepted += 1
                state = nxt
            if stride and (t + 1) % stride == 0:
                samples.append(state.copy())
    return Trajectory(seed, t_max, state, accepted, stride, samples)


def frozen_check(H: Hypergraph, c: Sequence[int], q: int) -> int:
    """Number of the n*q proposals (v, k) that would change the colouring."""
    col = np.asarray(c, dtype=np.int64)
    if not is_proper(H, col, q):
        raise InfeasibleStateError("frozen_check needs a proper colouring")
    return sum(
        1
        for v in range(H.n)
        for k in range(1, q + 1)
        if col[v] != k and can_recolour(H, col, v, k)
    )


def random_independent_set(H: Hypergraph, lam: float, rng: np.random.Generator, sweeps: int = 20) -> np.ndarray:
    """An approximately stationary independent set: ``sweeps * n`` Glauber steps from the empty set."""
    X = np.zeros((1, H.n + 1), dtype=bool)
    for _ in range(sweeps * max(H.n, 1)):
        v = rng.integers(0, H.n, size=1)
        u = rng.random(size=1)
        indset_step_batch(H, X, lam, v, u)
    return X[0, : H.n].copy()


def random_proper_colouring(
    H: Hypergraph, q: int, rng: np.random.Generator, sweeps: int = 20
) -> np.ndarray | None:
    start = greedy_colouring(H, q, seed=int(rng.integers(2**31)))
    if start is None:
        return None
    C = with_sentinel(start[None, :], 0)
    for _ in range(sweeps * max(H.n, 1)):
        v = rng.integers(0, H.n, size=1)
        k = rng.integers(1, q + 1, size=1)
        colouring_step_batch(H, C, v, k)
    return C[0, : H.n].copy()
