"""Exact enumeration oracles and closed-form counting identities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product

import numpy as np

from .chains import (
    ChainParams,
    Kind,
    check_feasible,
    frozen_check,
    initial_state,
    step_batch,
    with_sentinel,
)
from .hypergraph import Hypergraph, gen_blowup

MAX_SUBSET_VERTICES = 25
MAX_COLOURINGS = 10**8
MAX_STATES = 10**5
_CHUNK = 1 << 20


class EnumerationLimitError(ValueError):
    pass


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x) if hasattr(np, "bitwise_count") else np.array([bin(int(v)).count("1") for v in x])


def _edge_masks(H: Hypergraph) -> list[int]:
    return [sum(1 << v for v in e) for e in H.edges]


def independent_set_codes(H: Hypergraph, max_n: int = MAX_SUBSET_VERTICES):
    """Yield arrays of bitmask codes (bit v set = v occupied) of independent sets."""
    if H.n > max_n:
        raise EnumerationLimitError(f"2^{H.n} subsets exceeds the limit 2^{max_n}")
    masks = np.array(_edge_masks(H), dtype=np.int64)
    total = 1 << H.n
    for start in range(0, total, _CHUNK):
        s = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        ok = np.ones(len(s), dtype=bool)
        for em in masks:
            ok &= (s & em) != em
        yield s[ok]


@dataclass(frozen=True)
class CountProfile:
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def partition(self, lam):
        """Sum of counts[i] * lam^i; exact for int/Fraction ``lam``."""
        x = Fraction(lam) if isinstance(lam, (int, Fraction)) else float(lam)
        return sum(c * x**i for i, c in enumerate(self.counts))

    def to_dict(self, lam=None) -> dict:
        d = {"N_i": list(self.counts), "total": self.total}
        if lam is not None:
            z = self.partition(lam)
            d["lambda"] = str(lam)
            d["Z"] = str(z) if isinstance(z, Fraction) else z
        return d


def count_independent_sets(H: Hypergraph, max_n: int = MAX_SUBSET_VERTICES) -> CountProfile:
    counts = np.zeros(H.n + 1, dtype=np.int64)
    for codes in independent_set_codes(H, max_n):
        counts += np.bincount(_popcount(codes), minlength=H.n + 1)
    return CountProfile(tuple(int(c) for c in counts))


def colouring_codes(H: Hypergraph, q: int, max_states: int = MAX_COLOURINGS):
    """Yield (codes, digits) chunks of proper colourings.

    A colouring's code is sum (c_v - 1) q^v; ``digits`` holds colours 1..q.
    """
    if q < 1:
        raise ValueError("q must be positive")
    total = q**H.n
    if total > max_states:
        raise EnumerationLimitError(f"{q}^{H.n} colourings exceeds the limit {max_states}")
    powers = q ** np.arange(H.n, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        s = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        digits = (s[:, None] // powers[None, :]) % q + 1 if H.n else np.zeros((len(s), 0), dtype=np.int64)
        ok = np.ones(len(s), dtype=bool)
        for e in H.edges:
            col = digits[:, list(e)]
            ok &= ~(col == col[:, :1]).all(axis=1)
        yield s[ok], digits[ok]


def count_colourings(H: Hypergraph, q: int, max_states: int = MAX_COLOURINGS) -> int:
    return sum(len(codes) for codes, _ in colouring_codes(H, q, max_states))


def hardcore_partition(G: Hypergraph, lam, max_n: int = MAX_SUBSET_VERTICES):
    """Hard-core partition function Z_G(lam) of a graph."""
    if not G.is_graph:
        raise ValueError("hard-core partition function needs a graph")
    return count_independent_sets(G, max_n).partition(lam)


@dataclass(frozen=True)
class BlowupCheck:
    k: int
    lhs: int
    rhs: Fraction

    @property
    def equal(self) -> bool:
        return self.lhs == self.rhs

    def to_dict(self) -> dict:
        return {"k": self.k, "lhs": self.lhs, "rhs": str(self.rhs), "equal": self.equal}


def blowup_identity_check(G: Hypergraph, m: int, max_n: int = MAX_SUBSET_VERTICES) -> BlowupCheck:
    """Compare the independent-set count of the blow-up with (2^k-1)^n Z_G(1/(2^k-1))."""
    H, k = gen_blowup(G, m)
    if H.n > max_n:
        raise EnumerationLimitError(f"blow-up has {H.n} vertices, limit {max_n}")
    lhs = count_independent_sets(H, max_n).total
    w = 2**k - 1
    rhs = Fraction(w) ** G.n * hardcore_partition(G, Fraction(1, w), max_n)
    return BlowupCheck(k, lhs, rhs)


# -- edge-cover and weak-colouring formulas -------------------------------------------------


@dataclass(frozen=True)
class EdgeCoverCount:
    m: int
    covers: int
    fixed_uncovered: int


def _cover_formula(m: int) -> int:
    if m < 0:
        return 0
    return sum((-1) ** i * math.comb(m, i) * 2 ** math.comb(m - i, 2) for i in range(m + 1))


def edge_cover_count(m: int, mode: str = "formula", max_edges: int = 20) -> EdgeCoverCount:
    """Edge covers of K_m, and edge sets leaving vertex 0 (only) uncovered.

    The second count equals the number of covers of K_{m-1}.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if mode == "formula":
        return EdgeCoverCount(m, _cover_formula(m), _cover_formula(m - 1))
    if mode != "brute":
        raise ValueError(f"mode must be 'formula' or 'brute', got {mode!r}")
    edges = list(combinations(range(m), 2))
    if len(edges) > max_edges:
        raise EnumerationLimitError(f"K_{m} has {len(edges)} edges, limit {max_edges}")
    full = (1 << m) - 1
    covers = fixed = 0
    for sel in product((0, 1), repeat=len(edges)):
        covered = 0
        for on, (a, b) in zip(sel, edges):
            if on:
                covered |= (1 << a) | (1 << b)
        if covered == full:
            covers += 1
        elif covered == full & ~1:
            fixed += 1
    return EdgeCoverCount(m, covers, fixed)


@dataclass(frozen=True)
class WeakColouringCount:
    m: int
    q: int
    weak: int
    fixed_mono: int


def weak_edge_colouring_count(m: int, q: int, mode: str = "formula", max_states: int = 10**8) -> WeakColouringCount:
    """Edge q-colourings of K_m with no monochromatic vertex (``weak``), and
    those where vertex 0 is monochromatic and no other vertex is (``fixed_mono``).

    A vertex is monochromatic when all its incident edges share one colour.
    """
    if m < 2 or q < 1:
        raise ValueError("need m >= 2 and q >= 1")
    if mode == "formula":
        weak = q ** math.comb(m, 2) + q * sum(
            (-1) ** i * math.comb(m, i) * q ** math.comb(m - i, 2) for i in range(1, m + 1)
        )
        fixed = q * sum(
            (-1) ** i * math.comb(m - 1, i) * q ** math.comb(m - i - 1, 2) for i in range(m)
        )
        return WeakColouringCount(m, q, weak, fixed)
    if mode != "brute":
        raise ValueError(f"mode must be 'formula' or 'brute', got {mode!r}")
    edges = list(combinations(range(m), 2))
    if q ** len(edges) > max_states:
        raise EnumerationLimitError(f"{q}^{len(edges)} edge colourings exceeds the limit {max_states}")
    incident = [[j for j, e in enumerate(edges) if v in e] for v in range(m)]
    weak = fixed = 0
    for col in product(range(q), repeat=len(edges)):
        mono = [len({col[j] for j in inc}) == 1 for inc in incident]
        if not any(mono):
            weak += 1
        elif mono[0] and not any(mono[1:]):
            fixed += 1
    return WeakColouringCount(m, q, weak, fixed)


# -- stationarity ---------------------------------------------------------------


@dataclass
class TVReport:
    support_size: int
    exact: dict
    empirical: dict
    tv: float
    steps: int
    burn_in: int
    samples: int
    stride: int
    unvisited: int
    non_ergodic: bool

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["exact"] = {str(k): v for k, v in self.exact.items()}
        d["empirical"] = {str(k): v for k, v in self.empirical.items()}
        return d


def exact_stationary(H: Hypergraph, params: ChainParams, max_states: int = MAX_STATES) -> dict[int, float]:
    """Stationary law keyed by state code: lam^|I| weights, or uniform on proper colourings."""
    if params.kind is Kind.INDSET:
        codes = np.concatenate(list(independent_set_codes(H)))
        if len(codes) > max_states:
            raise EnumerationLimitError(f"{len(codes)} states exceeds the limit {max_states}")
        w = float(params.lam) ** _popcount(codes).astype(float)
    else:
        if params.q**H.n > max(max_states, MAX_COLOURINGS):
            raise EnumerationLimitError("colouring space too large")
        codes = np.concatenate([c for c, _ in colouring_codes(H, params.q)])
        if len(codes) > max_states:
            raise EnumerationLimitError(f"{len(codes)} states exceeds the limit {max_states}")
        w = np.ones(len(codes))
    w = w / w.sum()
    return {int(c): float(p) for c, p in zip(codes, w)}


def encode_states(states: np.ndarray, params: ChainParams) -> np.ndarray:
    """Codes matching :func:`exact_stationary` for rows of ``states``."""
    n = states.shape[1]
    if params.kind is Kind.INDSET:
        return states.astype(np.int64) @ (np.int64(1) << np.arange(n, dtype=np.int64))
    return (states.astype(np.int64) - 1) @ (params.q ** np.arange(n, dtype=np.int64))


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def stationary_tv(
    H: Hypergraph,
    params: ChainParams,
    burn_in: int = 1000,
    samples: int = 10**6,
    stride: int = 1,
    seed: int | None = None,
    chains: int = 1000,
    X0=None,
) -> TVReport:
    """Compare strided chain samples with the exact stationary law.

    ``chains`` independent copies run in lockstep from ``X0`` (default: the
    empty set, or a greedy colouring); each contributes ``samples/chains``
    states taken every ``stride`` steps after ``burn_in`` steps. Exact
    states never visited are counted in ``unvisited`` and, like a frozen
    start, set ``non_ergodic`` as evidence (not proof) of a reducible chain.
    """
    exact = exact_stationary(H, params)
    start = initial_state(H, params, seed) if X0 is None else check_feasible(H, params, X0)
    chains = max(1, min(chains, samples))
    per_chain = math.ceil(samples / chains)
    fill = False if params.kind is Kind.INDSET else 0
    S = with_sentinel(np.repeat(start[None, :], chains, axis=0), fill)
    rng = np.random.default_rng(seed)
    q = params.q

    def advance():
        v = rng.integers(0, H.n, size=chains)
        r = rng.random(size=chains) if params.kind is Kind.INDSET else rng.integers(1, q + 1, size=chains)
        step_batch(H, S, params, v, r)

    for _ in range(burn_in):
        advance()
    counts: dict[int, int] = {}
    taken = 0
    for _ in range(per_chain):
        for _ in range(stride):
            advance()
        codes = encode_states(S[:, : H.n], params)
        if taken + chains > samples:
            codes = codes[: samples - taken]
        vals, cnt = np.unique(codes, return_counts=True)
        for c, k in zip(vals.tolist(), cnt.tolist()):
            counts[c] = counts.get(c, 0) + k
        taken += len(codes)
    empirical = {c: k / taken for c, k in counts.items()}
    unvisited = sum(1 for c in exact if c not in counts)
    frozen = params.kind is Kind.COLOURING and frozen_check(H, start, params.q) == 0
    return TVReport(
        support_size=len(exact),
        exact=exact,
        empirical=empirical,
        tv=total_variation(exact, empirical),
        steps=burn_in + per_chain * stride,
        burn_in=burn_in,
        samples=taken,
        stride=stride,
        unvisited=unvisited,
        non_ergodic=frozen or unvisited > 0,
    )
