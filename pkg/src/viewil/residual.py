"""Per-waypoint residual corrector: a 3-h-h-3 ReLU MLP trained with Adam.

Coordinates are mapped from the workspace box to [-1, 1] before the network
and back after it. The network outputs the corrected waypoint directly; the
correction is ``predict(w) - w``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Trajectory, TrajectoryKind, ViewError


class EmptyDataset(ViewError, ValueError):
    pass


@dataclass
class ResidualDataset:
    prior: list = field(default_factory=list)
    solved: list = field(default_factory=list)

    def add(self, prior_pos, solved_pos) -> None:
        p = np.asarray(prior_pos, dtype=float).reshape(3)
        s = np.asarray(solved_pos, dtype=float).reshape(3)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(s))):
            raise ValueError("pairs must be finite")
        self.prior.append(p)
        self.solved.append(s)

    def __len__(self):
        return len(self.prior)

    def arrays(self):
        return np.array(self.prior).reshape(-1, 3), np.array(self.solved).reshape(-1, 3)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            for p, s in zip(self.prior, self.solved):
                fh.write(json.dumps({"prior": p.tolist(), "solved": s.tolist()}) + "\n")

    @classmethod
    def load(cls, path) -> "ResidualDataset":
        ds = cls()
        for line in Path(path).read_text().splitlines():
            if line.strip():
                d = json.loads(line)
                ds.add(d["prior"], d["solved"])
        return ds


@dataclass
class ResidualModel:
    weights: list
    biases: list
    lo: np.ndarray
    hi: np.ndarray

    def _scale(self):
        return (self.hi - self.lo) / 2.0, (self.hi + self.lo) / 2.0

    def normalize(self, x):
        half, mid = self._scale()
        return (np.asarray(x, dtype=float) - mid) / half

    def denormalize(self, z):
        half, mid = self._scale()
        return z * half + mid

    def predict(self, points) -> np.ndarray:
        z = self.normalize(np.atleast_2d(points))
        return self.denormalize(forward(self.weights, self.biases, z)[0])

    def correction(self, points) -> np.ndarray:
        return self.predict(points) - np.atleast_2d(points)

    def to_dict(self) -> dict:
        return {
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "layers": [{"shape": list(W.shape), "weights": W.ravel().tolist(), "bias": b.tolist()}
                       for W, b in zip(self.weights, self.biases)],
        }

    @classmethod
    def from_dict(cls, d) -> "ResidualModel":
        ws, bs = [], []
        for layer in d["layers"]:
            ws.append(np.array(layer["weights"], dtype=float).reshape(layer["shape"]))
            bs.append(np.array(layer["bias"], dtype=float))
        return cls(ws, bs, np.array(d["lo"], dtype=float), np.array(d["hi"], dtype=float))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "ResidualModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def init_params(hidden: int, rng):
    sizes = [3, hidden, hidden, 3]
    ws = [rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b)) for a, b in zip(sizes, sizes[1:])]
    bs = [np.zeros(b) for b in sizes[1:]]
    return ws, bs


def forward(ws, bs, x):
    """Returns (output, cache of layer inputs and pre-activations)."""
    acts, pre = [x], []
    h = x
    for i, (W, b) in enumerate(zip(ws, bs)):
        z = h @ W + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < len(ws) - 1 else z
        acts.append(h)
    return h, (acts, pre)


def loss_and_grad(ws, bs, x, y):
    """Mean squared error over all elements and its parameter gradients."""
    out, (acts, pre) = forward(ws, bs, x)
    diff = out - y
    loss = float(np.mean(diff ** 2))
    g = 2.0 * diff / diff.size
    gws, gbs = [None] * len(ws), [None] * len(ws)
    for i in range(len(ws) - 1, -1, -1):
        if i < len(ws) - 1:
            g = g * (pre[i] > 0)
        gws[i] = acts[i].T @ g
        gbs[i] = g.sum(axis=0)
        g = g @ ws[i].T
    return loss, gws, gbs


def train(dataset: ResidualDataset, epochs: int = 100, lr: float = 0.01, decay: float = 0.15, batch: int = 32,
          rng_seed=0, hidden: int = 64, lo=(0.0, -0.5, 0.0), hi=(1.0, 0.5, 0.5), beta1: float = 0.9,
          beta2: float = 0.999, eps: float = 1e-8) -> ResidualModel:
    """Fit prior -> solved waypoints with Adam; lr is scaled by ``decay`` at 40% and 80% of epochs."""
    if len(dataset) == 0:
        raise EmptyDataset("residual dataset is empty")
    rng = np.random.default_rng(rng_seed)
    ws, bs = init_params(hidden, rng)
    model = ResidualModel(ws, bs, np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    xp, ys = dataset.arrays()
    X, Y = model.normalize(xp), model.normalize(ys)
    params = ws + bs
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    milestones = {int(round(0.4 * epochs)), int(round(0.8 * epochs))}
    step = 0
    rate = lr
    for epoch in range(epochs):
        if epoch in milestones and epoch > 0:
            rate *= decay
        order = rng.permutation(len(X))
        for s in range(0, len(X), batch):
            idx = order[s:s + batch]
            _, gws, gbs = loss_and_grad(ws, bs, X[idx], Y[idx])
            step += 1
            for p, g, mi, vi in zip(params, gws + gbs, m, v):
                mi *= beta1
                mi += (1 - beta1) * g
                vi *= beta2
                vi += (1 - beta2) * g * g
                mhat = mi / (1 - beta1 ** step)
                vhat = vi / (1 - beta2 ** step)
                p -= rate * mhat / (np.sqrt(vhat) + eps)
    for p in params:
        if not np.all(np.isfinite(p)):
            raise FloatingPointError("residual training diverged")
    return model


def dataset_loss(model: ResidualModel, dataset: ResidualDataset) -> float:
    xp, ys = dataset.arrays()
    out = forward(model.weights, model.biases, model.normalize(xp))[0]
    return float(np.mean((out - model.normalize(ys)) ** 2))


def correct(model: ResidualModel, traj: Trajectory) -> Trajectory:
    """Replace each waypoint position by the model's prediction."""
    return traj.with_positions(model.predict(traj.positions), TrajectoryKind.CORRECTED)
