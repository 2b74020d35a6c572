"""Carlini-Wagner L2 attack (tanh change of variables + Adam) and its
closed-form solution for a single linear layer."""
import warnings

import numpy as np

from .adam import AdamState, adam_step
from .base import AttackResult

BOX_SQUEEZE = 1e-6
# tanh(15) < 1 in float64, so x_adv stays strictly inside (0, 1)
W_LIMIT = 15.0


def _margins(Z, targets):
    rows = np.arange(len(targets))
    others = Z.copy()
    others[rows, targets] = -np.inf
    best_other = np.argmax(others, axis=1)
    return Z[rows, best_other] - Z[rows, targets], best_other


def cw_objective(net, X, X_adv, targets, c, kappa=0.0):
    """``||x_adv - x||^2 + c * max(-kappa, max_{i!=t} Z_i - Z_t)`` per sample."""
    X = np.asarray(X, dtype=np.float64)
    margin, _ = _margins(net.logits(X_adv), np.asarray(targets, dtype=int))
    dist = ((np.asarray(X_adv) - X) ** 2).reshape(len(X), -1).sum(axis=1)
    return dist + c * np.maximum(margin, -kappa)


def cw_l2_batch(net, X, targets, c=10.0, kappa=0.0, learning_rate=0.01, steps=10):
    """Minimize the CW-L2 objective over ``w`` with ``x_adv = (tanh(w) + 1) / 2``.

    Returns ``(X_best, step_objectives)`` where ``X_best`` holds, per sample, the
    iterate with the lowest objective seen (the starting point included) and
    ``step_objectives`` has shape ``(steps, N)``.
    """
    X = np.asarray(X, dtype=np.float64)
    targets = np.asarray(targets, dtype=int)
    n = len(X)
    rows = np.arange(n)
    squeezed = np.clip(X, BOX_SQUEEZE, 1.0 - BOX_SQUEEZE)
    w = np.arctanh(2.0 * squeezed - 1.0)
    state = AdamState.zeros(w.shape)

    def evaluate(w):
        x_adv = 0.5 * (np.tanh(w) + 1.0)
        Z = net.logits(x_adv)
        margin, other = _margins(Z, targets)
        dist = ((x_adv - X) ** 2).reshape(n, -1).sum(axis=1)
        return x_adv, dist + c * np.maximum(margin, -kappa), margin, other

    x_adv, obj, margin, other = evaluate(w)
    best_x, best_obj = x_adv.copy(), obj.copy()
    history = []
    for _ in range(steps):
        cot = np.zeros((n, net.class_count))
        active = margin > -kappa
        cot[rows[active], other[active]] += c
        cot[rows[active], targets[active]] -= c
        grad_x = 2.0 * (x_adv - X) + net.vjp(x_adv, cot)
        grad_w = grad_x * 0.5 * (1.0 - np.tanh(w) ** 2)
        state, update = adam_step(state, grad_w, learning_rate)
        w = np.clip(w + update, -W_LIMIT, W_LIMIT)
        x_adv, obj, margin, other = evaluate(w)
        better = obj < best_obj
        best_x[better] = x_adv[better]
        best_obj[better] = obj[better]
        history.append(obj)
    return best_x, np.array(history).reshape(steps, n)


def cw_l2_results(net, X, targets, c=10.0, kappa=0.0, learning_rate=0.01, steps=10, labels=None):
    X = np.asarray(X, dtype=np.float64)
    targets = np.asarray(targets, dtype=int)
    if labels is not None and np.any(np.asarray(labels, dtype=int) == targets):
        raise ValueError("target must differ from the ground-truth label")
    X_adv, history = cw_l2_batch(net, X, targets, c, kappa, learning_rate, steps)
    before = net.losses(X, targets)
    after = net.losses(X_adv, targets)
    pred_before, pred_after = net.predict(X), net.predict(X_adv)
    return [
        AttackResult(
            adversarial=X_adv[i],
            loss_before=float(before[i]),
            loss_after=float(after[i]),
            label_before=int(pred_before[i]),
            label_after=int(pred_after[i]),
            per_step_losses=[float(v) for v in history[:, i]],
            success=bool(pred_after[i] == targets[i]),
            target=int(targets[i]),
        )
        for i in range(len(X))
    ]


def cw_l2(net, x, target, c=10.0, kappa=0.0, learning_rate=0.01, steps=10, label=None):
    """Single-sample CW-L2. ``per_step_losses`` holds the CW objective per Adam step;
    ``loss_before``/``loss_after`` are cross-entropies against ``target``."""
    return cw_l2_results(net, np.asarray(x)[None], [target], c, kappa, learning_rate, steps,
                         None if label is None else [label])[0]


def closed_form_cw_delta(W, x, y_label, target, c, bias=None):
    """Minimizer ``delta = -(c/2) (W[y] - W[t])`` of the box-free one-layer problem.

    Exact when ``(Wx)_y`` is the strict maximum and ``c`` is below the bound from
    :func:`advprobe.theory.c_bound_cw`; a warning is emitted otherwise.
    """
    from ..theory import NotApplicable, c_bound_cw

    W = np.asarray(W, dtype=np.float64)
    if y_label == target:
        raise ValueError("target must differ from the original label")
    try:
        bound = c_bound_cw(W, x, y_label, target, bias)
    except NotApplicable as exc:
        warnings.warn(f"closed form is not exact here: {exc}", RuntimeWarning, stacklevel=2)
    else:
        if not c < bound:
            warnings.warn(f"c={c} is not below the bound {bound}; the closed form may not be "
                          "the minimizer", RuntimeWarning, stacklevel=2)
    return -(c / 2.0) * (W[y_label] - W[target])


def interpolate_adversarial(x, x_adv, epsilon):
    """``x + epsilon * (x_adv - x)``."""
    x = np.asarray(x, dtype=np.float64)
    x_adv = np.asarray(x_adv, dtype=np.float64)
    if x.shape != x_adv.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_adv.shape}")
    return x + epsilon * (x_adv - x)
