import numpy as np

from .adam import AdamState, adam_step
from .base import METHODS, AttackConfig, AttackResult, CWParams
from .cw import (closed_form_cw_delta, cw_l2, cw_l2_batch, cw_l2_results, cw_objective,
                 interpolate_adversarial)
from .gradient_sign import (fgsm, fgsm_targeted, ifgsm, ifgsm_batch, ifgsm_clipped,
                            ifgsm_targeted, ifgsm_targeted_batch, sign_iterate)


def run_attack(net, X, labels, config):
    """Attack every row of ``X`` as described by ``config``; one result per row."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    m = config.method
    if m in ("fgsm", "ifgsm", "ifgsm-clip"):
        iters = 1 if m == "fgsm" else config.iterations
        alpha = config.clip_alpha if m == "ifgsm-clip" else None
        return ifgsm_batch(net, X, labels, config.epsilon, iters, alpha)
    targets = np.full(len(X), config.target, dtype=int)
    if m == "cw":
        cw = config.cw
        return cw_l2_results(net, X, targets, cw.c, cw.kappa, cw.learning_rate, cw.steps)
    iters = 1 if m == "fgsm-targeted" else config.iterations
    return ifgsm_targeted_batch(net, X, targets, config.epsilon, iters, config.clip_alpha)


__all__ = [
    "AdamState", "adam_step", "METHODS", "AttackConfig", "AttackResult", "CWParams",
    "closed_form_cw_delta", "cw_l2", "cw_l2_batch", "cw_l2_results", "cw_objective",
    "interpolate_adversarial", "fgsm", "fgsm_targeted", "ifgsm", "ifgsm_batch",
    "ifgsm_clipped", "ifgsm_targeted", "ifgsm_targeted_batch", "sign_iterate", "run_attack",
]
