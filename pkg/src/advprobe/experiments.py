"""Desk-scale experiment drivers shared by the CLI and the acceptance tests."""
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .attacks import (AttackConfig, CWParams, closed_form_cw_delta, cw_l2_batch,
                      interpolate_adversarial, run_attack)
from .attacks.base import TARGETED
from .network import Linear, Network
from .theory import NotApplicable, c_bound_cw, digest, ratio_verdict


@dataclass
class SweepResult:
    grid: List[float]
    accuracy: List[float]
    success_rate: List[float]
    mean_loss: List[float]
    sample_count: int
    model_digest: str
    vary: str = "eps"
    per_sample_losses: np.ndarray = field(default=None, repr=False)


def model_digest(net):
    return digest(*[getattr(l, "weight") for l in net.layers if hasattr(l, "weight")])


def parse_grid(spec):
    """``start:end:step`` (end inclusive) or a comma list; must be strictly increasing."""
    if "," in spec or ":" not in spec:
        values = [float(v) for v in spec.split(",") if v.strip()]
    else:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must be start:end:step, got {spec!r}")
        start, end, step = (float(p) for p in parts)
        if step <= 0 or not start < end:
            raise ValueError(f"empty grid {spec!r}: need start < end and step > 0")
        count = int(np.floor((end - start) / step + 1e-9)) + 1
        values = [round(start + i * step, 12) for i in range(count)]
    if not values:
        raise ValueError("empty grid")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("grid must be strictly increasing")
    return values


def sweep(net, X, labels, config, grid, vary="eps"):
    """Evaluate ``config`` at each grid value of epsilon (``vary="eps"``) or of the
    iteration count (``vary="iters"``).

    For CW the adversarial is solved once and scaled by each epsilon via
    :func:`interpolate_adversarial`.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    if vary not in ("eps", "iters"):
        raise ValueError("vary must be 'eps' or 'iters'")
    targeted = config.method in TARGETED
    loss_labels = np.full(len(X), config.target) if targeted else labels
    acc, succ, mean_loss, all_losses = [], [], [], []
    cw_adv = None
    for value in grid:
        if config.method == "cw":
            if vary != "eps":
                raise ValueError("cw sweeps vary epsilon only")
            if cw_adv is None:
                cw = config.cw
                cw_adv, _ = cw_l2_batch(net, X, loss_labels, cw.c, cw.kappa,
                                        cw.learning_rate, cw.steps)
            X_adv = interpolate_adversarial(X, cw_adv, value)
        else:
            kw = {"epsilon": value} if vary == "eps" else {"iterations": int(value)}
            cfg = AttackConfig(**{**config.__dict__, **kw})
            X_adv = np.array([r.adversarial for r in run_attack(net, X, labels, cfg)])
        pred = net.predict(X_adv)
        losses = net.losses(X_adv, loss_labels)
        acc.append(float(np.mean(pred == labels)))
        if targeted:
            succ.append(float(np.mean(pred == config.target)))
        else:
            succ.append(float(np.mean(pred != net.predict(X))))
        mean_loss.append(float(np.mean(losses)))
        all_losses.append(losses)
    return SweepResult(list(grid), acc, succ, mean_loss, len(X), model_digest(net), vary,
                       np.array(all_losses))


# -- closed-form vs iterative CW ------------------------------------------------------


@dataclass
class CWComparison:
    c: float
    bound: float
    closed_delta: np.ndarray
    iterative_delta: np.ndarray
    closed_verdict: str
    iterative_verdict: str

    @property
    def rel_l2_diff(self):
        diff = float(np.linalg.norm(self.iterative_delta - self.closed_delta))
        ref = float(np.linalg.norm(self.closed_delta))
        return diff / ref if ref > 0 else diff


def random_cw_instances(count, seed=0, k_range=(2, 10), n_range=(2, 20), c_frac=0.5,
                        box_margin=0.05):
    """One-layer instances with ``x`` in ``[0.25, 0.75]^n`` whose closed-form
    adversarial stays inside ``[box_margin, 1 - box_margin]`` (box inactive).

    Yields ``(W, x, y, t)``; candidates failing the box check are redrawn from the
    same stream, so the output depends only on ``seed``.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        k = int(rng.integers(k_range[0], k_range[1] + 1))
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        W = rng.standard_normal((k, n))
        x = rng.uniform(0.25, 0.75, n)
        y = int(np.argmax(W @ x))
        t = int(rng.integers(0, k - 1))
        t += t >= y
        c = c_frac * c_bound_cw(W, x, y, t)
        x_cf = x - (c / 2.0) * (W[y] - W[t])
        if np.all(x_cf > box_margin) and np.all(x_cf < 1 - box_margin):
            out.append((W, x, y, t))
    return out


def compare_cw(W, x, y, t, c, steps=2000, learning_rate=0.01, bias=None):
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    net = Network([Linear(W, bias)], (W.shape[1],), W.shape[0])
    try:
        bound = c_bound_cw(W, x, y, t, bias)
    except NotApplicable:
        bound = float("nan")
    closed = closed_form_cw_delta(W, x, y, t, c, bias)
    x_adv, _ = cw_l2_batch(net, x[None], [t], c, 0.0, learning_rate, steps)
    iterative = x_adv[0] - x
    return CWComparison(c, bound, closed, iterative,
                        ratio_verdict(W, x, x + closed, y, t),
                        ratio_verdict(W, x, x + iterative, y, t))


# -- probability shift under CW --------------------------------------------------------


@dataclass
class ProbShift:
    before: np.ndarray
    after: np.ndarray
    sample_count: int
    successes: int
    success_mask: np.ndarray = field(repr=False, default=None)
    probs_before: np.ndarray = field(repr=False, default=None)
    probs_after: np.ndarray = field(repr=False, default=None)


def prob_shift(net, X, target, cw=None):
    """Mean class probabilities over ``X`` before and after a CW attack toward ``target``."""
    cw = cw or CWParams()
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("no source-class samples to attack")
    X_adv, _ = cw_l2_batch(net, X, np.full(len(X), target), cw.c, cw.kappa,
                           cw.learning_rate, cw.steps)
    p0, p1 = net.predict_proba(X), net.predict_proba(X_adv)
    success = np.argmax(p1, axis=1) == target
    return ProbShift(p0.mean(axis=0), p1.mean(axis=0), len(X), int(success.sum()),
                     success, p0, p1)
