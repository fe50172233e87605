"""Adam/AdamW, polynomial learning-rate decay, and the round-based trainer.

Training proceeds in rounds; each round can first refine the grid to a
larger interval count, then runs a fixed number of optimiser steps at its
own (optionally decaying) learning rate.  Per-round train/test RMSE is
recorded; a round whose forward pass goes non-finite is marked failed and
skipped, mirroring how failed runs are accounted for rather than crashed on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import AdaptKanNet, NonFiniteError, sparsity_penalty


class Adam:
    """Bias-corrected Adam; ``decoupled=True`` gives AdamW-style weight decay.

    State is keyed by parameter position, so the caller must pass parameter
    and gradient lists in a stable order.  Updates happen in place.
    """

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0, decoupled: bool = False):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.decoupled = decoupled
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if not self.decoupled and self.weight_decay:
                g = g + self.weight_decay * p
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if self.decoupled and self.weight_decay:
                p -= lr * self.weight_decay * p
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def lr_at(lr0: float, step: int, steps: int, poly_decay: bool = True) -> float:
    """Learning rate at ``step`` within a round of ``steps`` total.

    With decay enabled the rate follows lr0 * (1 - 0.9 * (t / steps)^2),
    reaching lr0 / 10 at the end of the round; otherwise it stays at lr0.
    """
    if not poly_decay:
        return lr0
    frac = step / steps
    return lr0 * (1.0 - 0.9 * frac * frac)


@dataclass
class Round:
    lr: float
    steps: int
    omega: int

    def __post_init__(self):
        if self.steps <= 0:
            raise ValueError(f"need steps > 0, got {self.steps}")


@dataclass
class TrainPlan:
    """Full training recipe: per-round settings plus optimiser choices."""

    rounds: list
    optimizer: str = "adam"
    weight_decay: float = 0.0
    poly_decay: bool = True
    batch_size: int = 128
    seed: int = 0
    sparsity_lambda: float = 0.0

    def __post_init__(self):
        self.rounds = [r if isinstance(r, Round) else Round(**r) for r in self.rounds]
        omegas = [r.omega for r in self.rounds]
        if any(b < a for a, b in zip(omegas, omegas[1:])):
            raise ValueError(f"round omegas must be non-decreasing, got {omegas}")
        if self.optimizer not in ("adam", "adamw"):
            raise ValueError(f"optimizer must be 'adam' or 'adamw', got {self.optimizer!r}")


def _rmse(net: AdaptKanNet, X: np.ndarray, y: np.ndarray) -> float:
    pred, _ = net.forward(X, record=False)
    return float(np.sqrt(np.mean((pred - y) ** 2)))


def train(net: AdaptKanNet, data, plan: TrainPlan, adapt_mode: str = "auto",
          manual_every: int | None = None, batch_hook=None):
    """Run the plan on (X_train, y_train, X_test, y_test).

    ``adapt_mode`` selects the automatic per-step domain adaptation
    ("auto"), the forced single-batch baseline every ``manual_every`` epochs
    ("manual"), or no adaptation at all ("none").  ``batch_hook(epoch, X, y)``
    may replace each batch before it is used (e.g. to inject corruption).
    Returns one history dict per round: round, omega, lr, train_rmse,
    test_rmse, adapt_events, fail.
    """
    if adapt_mode not in ("auto", "manual", "none"):
        raise ValueError(f"unknown adapt_mode {adapt_mode!r}")
    if adapt_mode == "manual" and not manual_every:
        raise ValueError("manual adaptation needs manual_every >= 1")
    X_tr, y_tr, X_te, y_te = (np.asarray(a, dtype=float) for a in data)
    y_tr = y_tr.reshape(len(X_tr), -1)
    y_te = y_te.reshape(len(X_te), -1)
    rng = np.random.default_rng(plan.seed)
    N = len(X_tr)
    bs = min(plan.batch_size, N)

    order = rng.permutation(N)
    pos = 0
    epoch = 0
    fresh_epoch = True
    history = []

    for ri, rd in enumerate(plan.rounds):
        if rd.omega > net.omega:
            net.refine_all(rd.omega)
        opt = Adam(lr=rd.lr, weight_decay=plan.weight_decay,
                   decoupled=plan.optimizer == "adamw")
        events_before = net.adapt_events
        fail = 0
        for t in range(rd.steps):
            if pos + bs > N:
                order = rng.permutation(N)
                pos = 0
                epoch += 1
                fresh_epoch = True
            idx = order[pos:pos + bs]
            pos += bs
            Xb, yb = X_tr[idx], y_tr[idx]
            if batch_hook is not None:
                Xb, yb = batch_hook(epoch, Xb, yb)
            try:
                if adapt_mode == "manual" and fresh_epoch and epoch % manual_every == 0:
                    net.manual_adapt_all(Xb)
                fresh_epoch = False
                Y, caches = net.forward(Xb, record=adapt_mode == "auto")
                grad_out = 2.0 * (Y - yb) / yb.size
                _, extras = sparsity_penalty(net, caches, plan.sparsity_lambda)
                grads, _ = net.backward(caches, grad_out, extras)
            except NonFiniteError:
                fail = 1
                break
            opt.step(net.parameters(), net.gradient_list(grads),
                     lr=lr_at(rd.lr, t, rd.steps, plan.poly_decay))
        try:
            train_rmse = _rmse(net, X_tr, y_tr) if not fail else math.nan
            test_rmse = _rmse(net, X_te, y_te) if not fail else math.nan
        except NonFiniteError:
            fail = 1
            train_rmse = test_rmse = math.nan
        history.append({
            "round": ri,
            "omega": rd.omega,
            "lr": rd.lr,
            "train_rmse": train_rmse,
            "test_rmse": test_rmse,
            "adapt_events": net.adapt_events - events_before,
            "fail": fail,
        })
    return history
