"""Learn per-user preference translation vectors from pair feedback.

Feedback says how similar a user wants pairs of items to be: a +1 pair
should move closer, a -1 pair further apart. Translating all item vectors
by a shared w changes pairwise cosines; minimizing

    (1/m) * sum F(v_i, v_j) * [cos(v_i, v_j) - cos(v_i + w, v_j + w)]
          + gamma * ||w||^2

over w pushes the feedback-weighted similarity shift as positive as the L2
leash allows. The objective is non-convex, so training returns the best
full-batch iterate ever seen, which keeps the returned objective at or
below the w = 0 value of exactly 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import FeedbackMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    gamma: float = 3.0
    lr: float = 0.01
    epochs: int = 200
    batch: int = 32
    seed: int = 0
    tol: float = 1e-6
    max_grad_norm: float = 10.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 1 or self.batch < 1:
            raise ValueError("epochs and batch must be >= 1")


@dataclass
class PreferenceVector:
    user: str
    w: np.ndarray
    objective: float
    epochs_run: int
    restarts: int = 0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if not np.all(np.isfinite(self.w)):
            raise ValueError("preference vector must be finite")


@dataclass
class _Instance:
    Vi: np.ndarray
    Vj: np.ndarray
    F: np.ndarray
    base: np.ndarray = field(init=False)

    def __post_init__(self):
        self.base = _row_cos(self.Vi, self.Vj)

    @property
    def m(self) -> int:
        return len(self.F)


def _row_cos(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    dots = np.einsum("ij,ij->i", A, B)
    denom = np.linalg.norm(A, axis=1) * np.linalg.norm(B, axis=1)
    return np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)


def pack_instance(feedback: FeedbackMatrix, vectors) -> _Instance:
    """Collect the non-zero entries of F_u^d into training arrays.

    Zero-labeled entries contribute nothing to the sum and are dropped; an
    entirely empty matrix is an error.
    """
    if not feedback:
        raise ValueError(f"no feedback for user {feedback.user!r}")
    entries = [fb for fb in feedback if fb.label != 0.0]
    Vi = np.asarray([vectors[fb.rec] for fb in entries], dtype=float)
    Vj = np.asarray([vectors[fb.other] for fb in entries], dtype=float)
    F = np.asarray([fb.label for fb in entries], dtype=float)
    if entries:
        return _Instance(Vi, Vj, F)
    d = len(next(iter(vectors.values())))
    return _Instance(np.zeros((0, d)), np.zeros((0, d)), F)


def _objective(inst: _Instance, w: np.ndarray, gamma: float) -> float:
    shift = inst.base - _row_cos(inst.Vi + w, inst.Vj + w)
    pair_term = float(inst.F @ shift) / max(inst.m, 1)
    return pair_term + gamma * float(w @ w)


def _gradient(inst: _Instance, w: np.ndarray, gamma: float) -> np.ndarray:
    # d cos(a,b)/dw with a = v_i + w, b = v_j + w (both arguments shift):
    #   (a + b)/(|a||b|) - cos * (a/|a|^2 + b/|b|^2)
    # pairs where a or b is the zero vector contribute a subgradient of 0
    a = inst.Vi + w
    b = inst.Vj + w
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    valid = (na > 0) & (nb > 0)
    denom = np.where(valid, na * nb, 1.0)
    cos = np.where(valid, np.einsum("ij,ij->i", a, b) / denom, 0.0)
    na2 = np.where(na > 0, na**2, 1.0)
    nb2 = np.where(nb > 0, nb**2, 1.0)
    dcos = (a + b) / denom[:, None] - cos[:, None] * (a / na2[:, None] + b / nb2[:, None])
    dcos[~valid] = 0.0
    grad = -(inst.F[:, None] * dcos).sum(axis=0) / max(inst.m, 1)
    return grad + 2.0 * gamma * w


def objective(w, feedback: FeedbackMatrix, vectors, gamma: float) -> float:
    return _objective(pack_instance(feedback, vectors), np.asarray(w, dtype=float), gamma)


def gradient(w, feedback: FeedbackMatrix, vectors, gamma: float) -> np.ndarray:
    return _gradient(pack_instance(feedback, vectors), np.asarray(w, dtype=float), gamma)


def _clip(g: np.ndarray, max_norm: float) -> np.ndarray:
    n = float(np.linalg.norm(g))
    if n > max_norm:
        return g * (max_norm / n)
    return g


def learn_preference(
    feedback: FeedbackMatrix, vectors, config: OptimizerConfig = OptimizerConfig()
) -> PreferenceVector:
    """Mini-batch SGD from w = 0, returning the best full-batch iterate.

    Non-finite objectives count as divergence: the learning rate is halved
    and training restarts, at most 3 times.
    """
    inst = pack_instance(feedback, vectors)
    d = inst.Vi.shape[1] if inst.m else len(next(iter(vectors.values())))
    if inst.m == 0:
        return PreferenceVector(feedback.user, np.zeros(d), 0.0, epochs_run=0)

    batch_size = min(inst.m, config.batch)
    for attempt in range(4):
        lr = config.lr / 2**attempt
        rng = np.random.default_rng(config.seed)
        w = np.zeros(d)
        best_w = w.copy()
        best_obj = 0.0  # objective at w = 0 is identically 0
        prev_obj = 0.0
        diverged = False
        epochs_run = 0
        for epoch in range(1, config.epochs + 1):
            epochs_run = epoch
            order = rng.permutation(inst.m)
            # overflow in a diverging run is expected and detected below
            with np.errstate(over="ignore", invalid="ignore"):
                for start in range(0, inst.m, batch_size):
                    idx = order[start : start + batch_size]
                    sub = _Instance(inst.Vi[idx], inst.Vj[idx], inst.F[idx])
                    g = _clip(_gradient(sub, w, config.gamma), config.max_grad_norm)
                    w = w - lr * g
                obj = _objective(inst, w, config.gamma)
            if not np.isfinite(obj) or not np.all(np.isfinite(w)):
                diverged = True
                break
            if obj < best_obj:
                best_obj = obj
                best_w = w.copy()
            if prev_obj - obj < config.tol:
                break
            prev_obj = obj
        if not diverged:
            return PreferenceVector(
                feedback.user, best_w, best_obj, epochs_run, restarts=attempt
            )
        logger.warning(
            "training diverged for user %s at lr=%g, halving and restarting",
            feedback.user,
            lr,
        )
    raise RuntimeError(
        f"training for user {feedback.user!r} diverged after 3 lr restarts"
    )
