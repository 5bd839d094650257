"""Two-level quality-diversity search for the grasp waypoint.

High level: a centroidal Voronoi tessellation of a box spanned by the
prior's hand and object positions; unvisited centroids are tried in an
order that spreads them out. Low level: a local surrogate search in a small
box around a visited centroid, picked with a softmax over how much that
centroid's reward deviated from the unmodified prior's.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .core import Trajectory, ViewError
from .surrogate import make_optimizer


class Exhausted(ViewError):
    pass


NU_MIN = 1e-6
SIGMA_FLOOR = 1e-9
P_EXPLORE_MIN = 0.05
DELTA_MIN = 0.05


@dataclass(frozen=True)
class GraspSearchRegion:
    lo: np.ndarray
    hi: np.ndarray
    j_hat: np.ndarray
    delta: float
    coincident: bool = False

    def __post_init__(self):
        for name in ("lo", "hi", "j_hat"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.lo > self.hi):
            raise ValueError("region needs lo <= hi")

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2.0

    def contains(self, p, tol=1e-9) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def clip(self, lo, hi) -> "GraspSearchRegion":
        """Intersect with another box (typically the workspace)."""
        nlo = np.maximum(self.lo, lo)
        nhi = np.minimum(self.hi, hi)
        nhi = np.maximum(nhi, nlo)
        return GraspSearchRegion(nlo, nhi, self.j_hat, self.delta, self.coincident)

    def sub_box(self, center, radius):
        """Box of half-width ``radius`` around ``center``, clipped to the region."""
        c = np.asarray(center, dtype=float)
        return np.clip(c - radius, self.lo, self.hi), np.clip(c + radius, self.lo, self.hi)


def build_region(hand_grasp, object_grasp, delta: float, delta_min: float = DELTA_MIN) -> GraspSearchRegion:
    """Box around the hand->object diagonal extended by ``delta`` at both ends."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    h = np.asarray(getattr(hand_grasp, "position", hand_grasp), dtype=float)
    o = np.asarray(getattr(object_grasp, "position", object_grasp), dtype=float)
    d = h - o
    n = float(np.linalg.norm(d))
    if n < 1e-9:
        j = np.ones(3) / math.sqrt(3.0)
        return GraspSearchRegion(o - delta, o + delta, j, delta, coincident=True)
    j = d / n
    a = h + delta * j
    b = o - delta * j
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    c = (lo + hi) / 2.0
    half = np.maximum((hi - lo) / 2.0, delta_min)
    return GraspSearchRegion(c - half, c + half, j, delta)


def kmeans_pp(points: np.ndarray, k: int, rng) -> np.ndarray:
    """k-means++ seeding (D^2 weighting)."""
    n = points.shape[0]
    idx = [int(rng.integers(n))]
    d2 = ((points - points[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        nxt = int(rng.integers(n)) if total <= 0 else int(rng.choice(n, p=d2 / total))
        idx.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return points[idx].copy()


def tessellate(region: GraspSearchRegion, M: int, rng_seed=None, samples_per_cell: int = 100,
               max_iter: int = 100) -> np.ndarray:
    """M centroids of a CVT of the region, via k-means on uniform samples."""
    if M < 2:
        raise ValueError("M must be >= 2")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    pts = region.lo + (region.hi - region.lo) * rng.random((samples_per_cell * M, region.lo.shape[0]))
    init = kmeans_pp(pts, M, rng)
    cent, _, _ = kernels.lloyd(pts, init, max_iter)
    return np.asarray(cent)


@dataclass
class VisitedEntry:
    position: np.ndarray
    reward: float
    phase: str = "high"


@dataclass
class HighLevelArchive:
    unvisited: list
    center: np.ndarray
    k: int = 3
    r0: float = 0.0
    visited: list = field(default_factory=list)

    def __post_init__(self):
        self.unvisited = [np.asarray(u, dtype=float) for u in self.unvisited]
        self.center = np.asarray(self.center, dtype=float)

    def visit(self, index: int) -> np.ndarray:
        return self.unvisited.pop(index)

    def add(self, position, reward: float, phase: str = "high") -> None:
        self.visited.append(VisitedEntry(np.asarray(position, dtype=float), float(reward), phase))

    def rewards(self) -> np.ndarray:
        return np.array([v.reward for v in self.visited])

    def sigmas(self) -> np.ndarray:
        return sigma_of(self.rewards(), self.r0)

    @property
    def sigma_max(self) -> float:
        s = self.sigmas()
        return float(s.max()) if s.size else 0.0


def sigma_of(rewards, r0: float) -> np.ndarray:
    """Deviation from the prior's reward, normalized by the largest deviation."""
    dev = np.abs(np.asarray(rewards, dtype=float) - r0)
    m = dev.max() if dev.size else 0.0
    return dev / m if m > 0 else np.zeros_like(dev)


def high_level_scores(unvisited: np.ndarray, visited: np.ndarray, k: int) -> np.ndarray:
    """Mean distance to the k nearest visited plus the inverse distance variance."""
    dist = np.linalg.norm(unvisited[:, None, :] - visited[None, :, :], axis=2)
    kk = min(k, visited.shape[0])
    score = np.sort(dist, axis=1)[:, :kk].mean(axis=1)
    if visited.shape[0] >= 2:
        score = score + 1.0 / np.maximum(dist.var(axis=1), NU_MIN)
    return score


def next_high_level(archive: HighLevelArchive) -> int:
    """Index into ``archive.unvisited`` of the next centroid to try."""
    if not archive.unvisited:
        raise Exhausted("no unvisited centroids left")
    U = np.array(archive.unvisited)
    if not archive.visited:
        return int(np.argmin(np.linalg.norm(U - archive.center, axis=1)))
    V = np.array([v.position for v in archive.visited])
    return int(np.argmax(high_level_scores(U, V, archive.k)))


def random_high_level(archive: HighLevelArchive, rng) -> int:
    """Uniform choice among unvisited centroids (ablation control)."""
    if not archive.unvisited:
        raise Exhausted("no unvisited centroids left")
    return int(rng.integers(len(archive.unvisited)))


@dataclass(frozen=True)
class ExploitationPolicy:
    gamma: float = 5.0
    epsilon: float = 0.04
    alpha: float = 0.3

    def __post_init__(self):
        if not (self.gamma > 0 and self.epsilon > 0 and self.alpha > 0):
            raise ValueError("gamma, epsilon and alpha must be positive")


def softmax_probs(sigmas, gamma: float) -> np.ndarray:
    z = gamma * np.asarray(sigmas, dtype=float)
    e = np.exp(z - z.max())
    return e / e.sum()


def sample_exploit(archive: HighLevelArchive, gamma: float, rng) -> int:
    """Index into ``archive.visited`` drawn with softmax(gamma * sigma)."""
    if not archive.visited:
        raise Exhausted("nothing visited to exploit")
    p = softmax_probs(archive.sigmas(), gamma)
    return int(rng.choice(len(p), p=p))


def p_explore(alpha: float, sigma_max: float) -> float:
    return float(min(1.0, max(P_EXPLORE_MIN, alpha / max(sigma_max, SIGMA_FLOOR))))


@dataclass
class GraspResult:
    waypoint: np.ndarray
    rollouts: int
    success: bool
    reward: float
    trajectory: Trajectory
    log: list = field(default_factory=list)


def candidate_trajectory(prior_grasp: Trajectory, omega) -> Trajectory:
    """Prior grasp segment with its grasp waypoint (second to last) moved to ``omega``."""
    pos = prior_grasp.positions
    pos[-2] = omega
    return prior_grasp.with_positions(pos)


def grasp_search(region: GraspSearchRegion, prior_grasp: Trajectory, env_eval: Callable,
                 policy: ExploitationPolicy = ExploitationPolicy(), M: int = 30, budget: int = 60,
                 rng_seed=None, k: int = 3, r0: float | None = None, optimizer: str = "gp",
                 high_level: str = "regularized") -> GraspResult:
    """Search for a grasp waypoint; stops at the first grasp or when ``budget`` runs out.

    ``env_eval(traj) -> (EpisodeResult, RewardSeries)``. ``prior_grasp`` ends
    with (grasp waypoint, next waypoint). When ``r0`` is None the unmodified
    prior is executed first and counts against the budget.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(rng_seed)
    log = []
    used = 0
    best = (-math.inf, prior_grasp[-2].position, prior_grasp)

    def run(omega, phase, sigma_max):
        nonlocal used, best
        traj = candidate_trajectory(prior_grasp, omega)
        res, rew = env_eval(traj)
        used += 1
        total = rew.total
        log.append({"rollout": used, "phase": phase, "candidate": [float(v) for v in omega],
                    "reward": total, "sigma_max": sigma_max, "grasped": res.grasped})
        if res.grasped or total > best[0]:
            best = (total, np.asarray(omega, dtype=float), traj)
        return res, total

    if r0 is None:
        res, r0 = run(prior_grasp[-2].position, "prior", 0.0)
        if res.grasped:
            return GraspResult(best[1], used, True, best[0], best[2], log)

    archive = HighLevelArchive(list(tessellate(region, M, rng)), region.center, k, r0)
    local = {}
    while used < budget:
        smax = archive.sigma_max
        explore = bool(archive.unvisited) and (not archive.visited or rng.random() < p_explore(policy.alpha, smax))
        if explore:
            i = next_high_level(archive) if high_level == "regularized" else random_high_level(archive, rng)
            omega = archive.visit(i)
            res, total = run(omega, "high", smax)
            archive.add(omega, total, "high")
        else:
            j = sample_exploit(archive, policy.gamma, rng)
            seed = archive.visited[j]
            opt = local.get(j)
            if opt is None:
                lo, hi = region.sub_box(seed.position, policy.epsilon)
                opt = make_optimizer(optimizer, lo, hi, int(rng.integers(2 ** 31)))
                opt.tell(np.clip(seed.position, lo, hi), seed.reward)
                local[j] = opt
            omega = opt.ask()
            res, total = run(omega, "low", smax)
            opt.tell(omega, total)
            if total > seed.reward:
                archive.add(omega, total, "low")
        if res.grasped:
            return GraspResult(best[1], used, True, best[0], best[2], log)
    return GraspResult(best[1], used, False, best[0], best[2], log)


def high_level_order(centroids, center, k: int = 3, rule: str = "regularized", rng=None) -> list[int]:
    """Order in which a pure high-level sweep visits ``centroids`` (indices)."""
    cents = [np.asarray(c, dtype=float) for c in centroids]
    archive = HighLevelArchive(list(cents), center, k)
    ids = list(range(len(cents)))
    order = []
    while archive.unvisited:
        i = next_high_level(archive) if rule == "regularized" else random_high_level(archive, rng)
        archive.add(archive.visit(i), 0.0)
        order.append(ids.pop(i))
    return order
