"""Identity coupling of two Glauber chains and the experiments built on it.

Two copies are driven by the same (vertex, coin/colour) draws. Starting at
Hamming distance 1, the stopping time T is the first step at which the
distance changes; :func:`stopping_experiment` estimates E[d(X_T, Y_T)]
(``alpha_hat``) and the per-step stopping probability (``p_hat``).

Replicates run in blocks of :data:`BLOCK` with block ``b`` seeded from
``SeedSequence(seed, spawn_key=(1, b))``, so results do not depend on how
blocks are spread over worker processes.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Union

import numpy as np

from .chains import (
    ChainParams,
    InfeasibleStateError,
    Kind,
    can_insert,
    can_recolour,
    check_feasible,
    draw,
    greedy_colouring,
    random_independent_set,
    random_proper_colouring,
    step,
    step_batch,
    with_sentinel,
)
from .hypergraph import Hypergraph

BLOCK = 2000

WPolicy = Union[str, int]


class NoAdjacentPairError(InfeasibleStateError):
    pass


def hamming(X: np.ndarray, Y: np.ndarray) -> int:
    return int(np.count_nonzero(np.asarray(X) != np.asarray(Y)))


@dataclass
class CoupledPair:
    X: np.ndarray
    Y: np.ndarray
    hamming: int = -1
    steps_taken: int = 0

    def __post_init__(self):
        if self.hamming < 0:
            self.hamming = hamming(self.X, self.Y)


def coupled_step(H: Hypergraph, pair: CoupledPair, params: ChainParams, v: int, r) -> CoupledPair:
    """Apply the same proposal to both copies; only vertex ``v`` can change."""
    X2 = step(H, pair.X, params, v, r)
    Y2 = step(H, pair.Y, params, v, r)
    h = pair.hamming - int(pair.X[v] != pair.Y[v]) + int(X2[v] != Y2[v])
    return CoupledPair(X2, Y2, h, pair.steps_taken + 1)


# -- adjacent pairs -------------------------------------------------------------


def _pick_w(H: Hypergraph, policy: WPolicy, rng: np.random.Generator) -> int:
    if isinstance(policy, (int, np.integer)) and not isinstance(policy, bool):
        if not 0 <= policy < H.n:
            raise ValueError(f"fixed w={policy} out of range")
        return int(policy)
    top = [v for v, d in enumerate(H.degrees) if d == H.max_degree]
    return int(rng.choice(top))


def adjacent_pair(
    H: Hypergraph, params: ChainParams, policy: WPolicy, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, int]:
    """A feasible pair (X, Y) differing only at the returned vertex w.

    ``policy`` is ``"adversarial"``, ``"random"`` or a fixed vertex. w is a
    random maximum-degree vertex unless fixed. For independent sets Y = X ∪ {w}.

    Adversarial independent-set pairs start from the empty set and greedily
    occupy neighbours of w while Y stays independent, so most edges through
    w are critical. Adversarial colouring pairs greedily recolour neighbours
    of w to X(w) or Y(w) wherever both copies stay proper.
    """
    if H.n == 0:
        raise NoAdjacentPairError("empty hypergraph")
    if isinstance(policy, str) and policy not in ("adversarial", "random"):
        raise ValueError(f"unknown w policy {policy!r}")
    if params.kind is Kind.INDSET:
        return _indset_pair(H, params, policy, rng)
    return _colouring_pair(H, params, policy, rng)


def _indset_pair(H, params, policy, rng):
    w = _pick_w(H, policy, rng)
    if policy == "random":
        X = random_independent_set(H, float(params.lam), rng)
        X[w] = False
        for j in H.incidence[w]:
            rest = [u for u in H.edges[j] if u != w]
            if all(X[u] for u in rest):
                X[int(rng.choice(rest))] = False
    else:
        X = np.zeros(H.n, dtype=bool)
        if policy == "adversarial":
            Y = X.copy()
            Y[w] = True
            for u in rng.permutation(sorted(H.neighbours(w))):
                if can_insert(H, Y, int(u)):
                    Y[u] = True
            X = Y.copy()
            X[w] = False
    Y = X.copy()
    Y[w] = True
    return X, Y, w


def _colouring_pair(H, params, policy, rng):
    q = params.q
    if policy == "random":
        X = random_proper_colouring(H, q, rng)
    else:
        X = greedy_colouring(H, q, seed=int(rng.integers(2**31)))
    if X is None:
        raise NoAdjacentPairError(f"no proper {q}-colouring found")
    if isinstance(policy, str):
        top = [v for v, d in enumerate(H.degrees) if d == H.max_degree]
        rest = [v for v in range(H.n) if v not in set(top)]
        candidates = list(rng.permutation(top)) + list(rng.permutation(rest))
    else:
        candidates = [_pick_w(H, policy, rng)]
    for w in map(int, candidates):
        options = [k for k in range(1, q + 1) if k != X[w] and can_recolour(H, X, w, k)]
        if not options:
            continue
        Y = X.copy()
        Y[w] = int(rng.choice(options))
        if policy == "adversarial":
            red, blue = int(X[w]), int(Y[w])
            for u in rng.permutation(sorted(H.neighbours(w))):
                u = int(u)
                for k in rng.permutation([red, blue]):
                    k = int(k)
                    if X[u] != k and can_recolour(H, X, u, k) and can_recolour(H, Y, u, k):
                        X[u] = Y[u] = k
                        break
        return X, Y, w
    raise NoAdjacentPairError("no vertex can be recoloured to form an adjacent pair")


# -- batched coupled runs -------------------------------------------------------


def _block_rng(seed_seq: np.random.SeedSequence, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed_seq.entropy, spawn_key=(1, block)))


def _run_block(
    H: Hypergraph,
    params: ChainParams,
    X0: np.ndarray,
    Y0: np.ndarray,
    size: int,
    t_max: int,
    rng: np.random.Generator,
    stop: Callable[[np.ndarray], np.ndarray],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run ``size`` coupled copies until ``stop(distance)`` or ``t_max``.

    Returns per-replicate (stop time, distance at stop, censored flag).
    Finished replicates are compacted out of the working arrays.
    """
    fill = False if params.kind is Kind.INDSET else 0
    X = with_sentinel(np.repeat(np.asarray(X0)[None, :], size, axis=0), fill)
    Y = with_sentinel(np.repeat(np.asarray(Y0)[None, :], size, axis=0), fill)
    h = np.full(size, hamming(X0, Y0), dtype=np.int64)
    T = np.full(size, t_max, dtype=np.int64)
    D = h.copy()
    censored = np.ones(size, dtype=bool)
    alive = np.arange(size)

    done = stop(h)
    if done.any():
        T[done] = 0
        censored[done] = False
        keep = ~done
        X, Y, h, alive = X[keep], Y[keep], h[keep], alive[keep]

    t = 0
    while len(alive) and t < t_max:
        t += 1
        v, r = draw(rng, H.n, params, size=len(alive))
        rows = np.arange(len(alive))
        before = X[rows, v] != Y[rows, v]
        step_batch(H, X, params, v, r)
        step_batch(H, Y, params, v, r)
        h += (X[rows, v] != Y[rows, v]).astype(np.int64) - before
        done = stop(h)
        if done.any():
            idx = alive[done]
            T[idx] = t
            D[idx] = h[done]
            censored[idx] = False
            keep = ~done
            X, Y, h, alive = X[keep], Y[keep], h[keep], alive[keep]
    D[alive] = h
    return T, D, censored


def _changed_from_one(h: np.ndarray) -> np.ndarray:
    return h != 1


def _coalesced(h: np.ndarray) -> np.ndarray:
    return h == 0


def _block_task(args):
    H, params, X0, Y0, size, t_max, entropy, b, stop_name = args
    stop = _changed_from_one if stop_name == "change" else _coalesced
    rng = _block_rng(np.random.SeedSequence(entropy), b)
    return _run_block(H, params, X0, Y0, size, t_max, rng, stop)


def _run_blocks(H, params, X0, Y0, replicates, t_max, seed_seq, stop_name, jobs):
    sizes = [min(BLOCK, replicates - s) for s in range(0, replicates, BLOCK)]
    tasks = [(H, params, X0, Y0, sz, t_max, seed_seq.entropy, b, stop_name) for b, sz in enumerate(sizes)]
    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_block_task, tasks))
    else:
        results = [_block_task(t) for t in tasks]
    if not results:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0, dtype=bool)
    return tuple(np.concatenate(parts) for parts in zip(*results))


# -- stopping-time experiment -----------------------------------------------------


@dataclass
class StoppingStats:
    replicates: int
    seed: int
    w: int
    t_max: int
    alpha_hat: float
    alpha_se: float
    p_hat: float
    p_se: float
    coupled: int
    diverged: int
    censored: int
    t_histogram: dict = field(default_factory=dict)
    distance_histogram: dict = field(default_factory=dict)
    T: np.ndarray = field(default=None, repr=False)
    D: np.ndarray = field(default=None, repr=False)
    censored_mask: np.ndarray = field(default=None, repr=False)

    @property
    def mean_T(self) -> float:
        done = ~self.censored_mask
        return float(self.T[done].mean()) if done.any() else math.nan

    def alpha_upper(self, z: float = 2.326) -> float:
        """One-sided upper confidence limit (default 99%)."""
        return self.alpha_hat + z * self.alpha_se

    def summary(self) -> dict:
        return {
            "replicates": self.replicates,
            "seed": self.seed,
            "w": self.w,
            "t_max": self.t_max,
            "alpha_hat": self.alpha_hat,
            "alpha_se": self.alpha_se,
            "alpha_ci95": [self.alpha_hat - 1.96 * self.alpha_se, self.alpha_hat + 1.96 * self.alpha_se],
            "alpha_below_one_99": bool(self.alpha_upper() < 1),
            "p_hat": self.p_hat,
            "p_se": self.p_se,
            "p_ci95": [self.p_hat - 1.96 * self.p_se, self.p_hat + 1.96 * self.p_se],
            "coupled": self.coupled,
            "diverged": self.diverged,
            "censored": self.censored,
            "mean_T": self.mean_T,
            "t_histogram": {str(k): v for k, v in sorted(self.t_histogram.items())},
            "distance_histogram": {str(k): v for k, v in sorted(self.distance_histogram.items())},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["replicate", "T", "distance", "censored"])
        for i, (t, d, c) in enumerate(zip(self.T, self.D, self.censored_mask)):
            writer.writerow([i, int(t), int(d), int(c)])
        return buf.getvalue()


def default_t_max(H: Hypergraph) -> int:
    return 40 * max(H.max_degree, 1) * max(H.n, 1)


def stopping_experiment(
    H: Hypergraph,
    params: ChainParams,
    w_policy: WPolicy = "adversarial",
    replicates: int = 10_000,
    seed: int | None = None,
    t_max: int | None = None,
    jobs: int = 1,
    pair: tuple[np.ndarray, np.ndarray] | None = None,
) -> StoppingStats:
    """Estimate E[d(X_T, Y_T)] and the per-step stopping rate from one adjacent pair.

    Censored replicates (no change by ``t_max``) are reported separately and
    excluded from ``alpha_hat``. ``p_hat`` is stops per step spent at
    distance 1, with a delta-method standard error.
    """
    if replicates < 1:
        raise ValueError("replicates must be positive")
    ss = np.random.SeedSequence(seed)
    t_max = default_t_max(H) if t_max is None else t_max
    if pair is None:
        pair_rng = np.random.default_rng(np.random.SeedSequence(ss.entropy, spawn_key=(0,)))
        X0, Y0, w = adjacent_pair(H, params, w_policy, pair_rng)
    else:
        X0 = check_feasible(H, params, pair[0])
        Y0 = check_feasible(H, params, pair[1])
        diff = np.flatnonzero(np.asarray(X0) != np.asarray(Y0))
        if len(diff) != 1:
            raise NoAdjacentPairError("supplied pair must differ at exactly one vertex")
        w = int(diff[0])

    T, D, cens = _run_blocks(H, params, X0, Y0, replicates, t_max, ss, "change", jobs)
    done = ~cens
    n_done = int(done.sum())
    d_done = D[done].astype(float)
    alpha_hat = float(d_done.mean()) if n_done else math.nan
    alpha_se = float(d_done.std(ddof=1) / math.sqrt(n_done)) if n_done > 1 else math.nan

    stops = done.astype(float)
    steps = T.astype(float)
    p_hat = stops.sum() / steps.sum() if steps.sum() > 0 else math.nan
    resid = stops - p_hat * steps
    p_se = float(math.sqrt(resid.var(ddof=1) / replicates) / steps.mean()) if replicates > 1 else math.nan

    return StoppingStats(
        replicates=replicates,
        seed=int(ss.entropy),
        w=w,
        t_max=t_max,
        alpha_hat=alpha_hat,
        alpha_se=alpha_se,
        p_hat=float(p_hat),
        p_se=p_se,
        coupled=int((D[done] == 0).sum()),
        diverged=int((D[done] > 1).sum()),
        censored=int(cens.sum()),
        t_histogram=dict(Counter(T[done].tolist())),
        distance_histogram=dict(Counter(D[done].tolist())),
        T=T,
        D=D,
        censored_mask=cens,
    )


# -- exact one-step drift -------------------------------------------------------


def one_step_drift_exact(H: Hypergraph, X, Y, params: ChainParams):
    """Exact E[d(X_1, Y_1)] over all proposals of one coupled step.

    Colourings enumerate the n*q equally likely (v, k) proposals and return a
    Fraction. Independent sets enumerate n vertices times the occupy/vacate
    branch; the result is a Fraction when the fugacity is int or Fraction.
    """
    X = check_feasible(H, params, X)
    Y = check_feasible(H, params, Y)
    n = H.n
    pair = CoupledPair(X, Y)
    if params.kind is Kind.COLOURING:
        total = 0
        for v in range(n):
            for k in range(1, params.q + 1):
                total += coupled_step(H, pair, params, v, k).hamming
        return Fraction(total, n * params.q)
    lam = params.lam
    exact = isinstance(lam, (int, Fraction)) and not isinstance(lam, bool)
    occ = Fraction(lam) / (1 + Fraction(lam)) if exact else float(lam) / (1.0 + float(lam))
    acc = 0
    for v in range(n):
        d_occ = coupled_step(H, pair, params, v, 0.0).hamming
        d_vac = coupled_step(H, pair, params, v, 1.0).hamming
        acc += occ * d_occ + (1 - occ) * d_vac
    return acc / n


def one_step_drift_mc(
    H: Hypergraph, X, Y, params: ChainParams, samples: int = 100_000, seed: int | None = None
) -> tuple[float, float]:
    """Monte Carlo estimate (mean, standard error) of the one-step expected distance."""
    X = check_feasible(H, params, X)
    Y = check_feasible(H, params, Y)
    rng = np.random.default_rng(seed)
    fill = False if params.kind is Kind.INDSET else 0
    Xs = with_sentinel(np.repeat(X[None, :], samples, axis=0), fill)
    Ys = with_sentinel(np.repeat(Y[None, :], samples, axis=0), fill)
    v, r = draw(rng, H.n, params, size=samples)
    step_batch(H, Xs, params, v, r)
    step_batch(H, Ys, params, v, r)
    d = (Xs[:, : H.n] != Ys[:, : H.n]).sum(axis=1).astype(float)
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(samples))


# -- gambler's game ---------------------------------------------------------------


@dataclass(frozen=True)
class GamblerParams:
    """Branching game: each active game ends each step with probability ``p``;
    an ended game is lost with probability ``alpha/loss_l`` and then spawns
    ``loss_l`` new games, so each game spawns ``alpha`` games in expectation.
    """

    p: float
    alpha: float
    d2: int = 2
    loss_l: int | None = None
    t_max: int = 200
    replicates: int = 100_000

    def __post_init__(self):
        if self.loss_l is None:
            object.__setattr__(self, "loss_l", self.d2)
        if not 0 < self.p <= 1:
            raise ValueError(f"need 0 < p <= 1, got {self.p}")
        if not 0 <= self.alpha < 1:
            raise ValueError(f"need 0 <= alpha < 1, got {self.alpha}")
        if not 1 <= self.loss_l <= self.d2:
            raise ValueError(f"need 1 <= loss_l <= d2, got loss_l={self.loss_l}, d2={self.d2}")
        if self.alpha > self.loss_l:
            raise ValueError("alpha cannot exceed loss_l")
        if self.replicates < 1 or self.t_max < 0:
            raise ValueError("replicates must be positive and t_max non-negative")

    @property
    def loss_prob(self) -> float:
        return self.alpha / self.loss_l


@dataclass
class GamblerResult:
    mean: np.ndarray
    se: np.ndarray
    params: GamblerParams

    def at(self, t: int) -> tuple[float, float]:
        return float(self.mean[t]), float(self.se[t])


def gambler_game(gp: GamblerParams, seed: int | None = None) -> GamblerResult:
    """Mean number of active games N(t), t = 0..t_max, over independent replicates.

    Games are simulated as independent, the extremal case for the tail bound.
    """
    rng = np.random.default_rng(seed)
    N = np.ones(gp.replicates, dtype=np.int64)
    mean = np.empty(gp.t_max + 1)
    se = np.empty(gp.t_max + 1)
    mean[0], se[0] = 1.0, 0.0
    sqrt_r = math.sqrt(gp.replicates)
    for t in range(1, gp.t_max + 1):
        ended = rng.binomial(N, gp.p)
        lost = rng.binomial(ended, gp.loss_prob)
        N = N - ended + gp.loss_l * lost
        mean[t] = N.mean()
        se[t] = N.std(ddof=1) / sqrt_r if gp.replicates > 1 else 0.0
    return GamblerResult(mean, se, gp)


# -- coalescence ------------------------------------------------------------------


@dataclass(frozen=True)
class CoalescenceResult:
    time: int | None
    t_max: int
    seed: int

    @property
    def timed_out(self) -> bool:
        return self.time is None


def coalescence_time(
    H: Hypergraph, params: ChainParams, X0, Y0, t_max: int | None = None, seed: int | None = None
) -> CoalescenceResult:
    """First step at which the coupled copies agree, or a timeout."""
    X = check_feasible(H, params, X0)
    Y = check_feasible(H, params, Y0)
    ss = np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    t_max = default_t_max(H) if t_max is None else t_max
    pair = CoupledPair(X, Y)
    if pair.hamming == 0:
        return CoalescenceResult(0, t_max, int(ss.entropy))
    chunk = 4096
    t = 0
    while t < t_max:
        vs, rs = draw(rng, H.n, params, size=min(chunk, t_max - t))
        for v, r in zip(vs.tolist(), rs.tolist()):
            t += 1
            pair = coupled_step(H, pair, params, v, r)
            if pair.hamming == 0:
                return CoalescenceResult(t, t_max, int(ss.entropy))
    return CoalescenceResult(None, t_max, int(ss.entropy))


def coalescence_times(
    H: Hypergraph,
    params: ChainParams,
    X0,
    Y0,
    replicates: int,
    t_max: int | None = None,
    seed: int | None = None,
    jobs: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised coalescence times for many replicates: (times, censored mask)."""
    X = check_feasible(H, params, X0)
    Y = check_feasible(H, params, Y0)
    t_max = default_t_max(H) if t_max is None else t_max
    T, _, cens = _run_blocks(H, params, X, Y, replicates, t_max, np.random.SeedSequence(seed), "coalesce", jobs)
    return T, cens
