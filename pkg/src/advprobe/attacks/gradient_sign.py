"""FGSM-style attacks: single step, iterated, clipped and targeted variants.

Every attack has a batched core (``*_batch``) working on ``(N, ...)`` arrays and
a single-sample wrapper returning an :class:`AttackResult`.
"""
import warnings

import numpy as np

from ..tensor import sign
from .base import AttackResult


def _clip_box(x_new, x, alpha):
    # [max(0, x - alpha), min(1, x + alpha)]; the outer clip wins if x itself is out of [0, 1]
    return np.clip(np.clip(x_new, x - alpha, x + alpha), 0.0, 1.0)


def sign_iterate(net, X, loss_labels, epsilon, iterations, direction=1.0, clip_alpha=None):
    """Run ``iterations`` sign-gradient steps of size ``epsilon``.

    :param direction: ``+1`` ascends the loss (untargeted), ``-1`` descends it
        (targeted, with ``loss_labels`` holding the target classes).
    :return: ``(X_adv, step_losses)`` with ``step_losses`` of shape ``(iterations, N)``.
    """
    X = np.asarray(X, dtype=np.float64)
    loss_labels = np.asarray(loss_labels, dtype=int)
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if clip_alpha is not None and clip_alpha < epsilon:
        warnings.warn(f"clip alpha {clip_alpha} < epsilon {epsilon}: steps are truncated",
                      stacklevel=3)
    X_adv = X.copy()
    losses = []
    for _ in range(iterations):
        grad = net.input_gradients(X_adv, loss_labels)
        X_adv = X_adv + direction * epsilon * sign(grad)
        if clip_alpha is not None:
            X_adv = _clip_box(X_adv, X, clip_alpha)
        losses.append(net.losses(X_adv, loss_labels))
    return X_adv, np.array(losses)


def _results(net, X, X_adv, loss_labels, step_losses, targets=None):
    before = net.losses(X, loss_labels)
    pred_before = net.predict(X)
    pred_after = net.predict(X_adv)
    out = []
    for i in range(len(X)):
        if targets is None:
            success = bool(pred_after[i] != pred_before[i])
            target = None
        else:
            target = int(targets[i])
            success = bool(pred_after[i] == target)
        out.append(AttackResult(
            adversarial=X_adv[i],
            loss_before=float(before[i]),
            loss_after=float(step_losses[-1, i]),
            label_before=int(pred_before[i]),
            label_after=int(pred_after[i]),
            per_step_losses=[float(v) for v in step_losses[:, i]],
            success=success,
            target=target,
        ))
    return out


def _check_targets(net, targets, labels):
    targets = np.asarray(targets, dtype=int)
    if np.any(targets < 0) or np.any(targets >= net.class_count):
        raise ValueError("target class out of range")
    if labels is not None and np.any(np.asarray(labels, dtype=int) == targets):
        raise ValueError("target must differ from the ground-truth label")
    return targets


def ifgsm_batch(net, X, labels, epsilon, iterations=1, clip_alpha=None):
    X_adv, losses = sign_iterate(net, X, labels, epsilon, iterations, 1.0, clip_alpha)
    return _results(net, np.asarray(X, dtype=np.float64), X_adv, labels, losses)


def ifgsm_targeted_batch(net, X, targets, epsilon, iterations=1, clip_alpha=None, labels=None):
    targets = _check_targets(net, targets, labels)
    X_adv, losses = sign_iterate(net, X, targets, epsilon, iterations, -1.0, clip_alpha)
    return _results(net, np.asarray(X, dtype=np.float64), X_adv, targets, losses, targets)


def fgsm(net, x, label, epsilon):
    """``x' = x + epsilon * sign(grad_x L(x, label))``, no box clipping."""
    return ifgsm_batch(net, np.asarray(x)[None], [label], epsilon, 1)[0]


def ifgsm(net, x, label, epsilon, iterations):
    return ifgsm_batch(net, np.asarray(x)[None], [label], epsilon, iterations)[0]


def ifgsm_clipped(net, x, label, epsilon, iterations, clip_alpha):
    """Iterated FGSM with each iterate clipped to ``[max(0, x-a), min(1, x+a)]``."""
    return ifgsm_batch(net, np.asarray(x)[None], [label], epsilon, iterations, clip_alpha)[0]


def fgsm_targeted(net, x, target, epsilon, label=None):
    """``x' = x - epsilon * sign(grad_x L(x, e_target))``.

    Losses in the result are measured against ``target``.
    """
    return ifgsm_targeted_batch(net, np.asarray(x)[None], [target], epsilon, 1,
                                labels=None if label is None else [label])[0]


def ifgsm_targeted(net, x, target, epsilon, iterations, clip_alpha=None, label=None):
    return ifgsm_targeted_batch(net, np.asarray(x)[None], [target], epsilon, iterations,
                                clip_alpha, labels=None if label is None else [label])[0]
