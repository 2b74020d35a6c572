"""Attack-strength thresholds for FGSM and CW-L2, and randomized checks of the
guarantees they come with.

Every threshold function raises :class:`NotApplicable` when one of its
hypotheses (nonzero pre-activations, nonzero gradient entries, argmax label)
fails. Suites call the matching attack at 0.9x the threshold and record one
:class:`BoundReport` per trial.
"""
import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .attacks import closed_form_cw_delta, fgsm, fgsm_targeted
from .network import Linear, Network, ReLU
from .tensor import inf_norm

NONZERO_TOL = 1e-12
LOSS_TOL = 1e-10
SAFETY = 0.9

HOLDS = "holds"
VIOLATED = "violated"
NOT_APPLICABLE = "not_applicable"


class NotApplicable(ValueError):
    """A hypothesis of the theorem fails for this instance."""


# -- thresholds -----------------------------------------------------------------


def _require_nonzero(values, what):
    smallest = float(np.min(np.abs(values)))
    if smallest <= NONZERO_TOL:
        raise NotApplicable(f"hypothesis violated: {what} has a zero entry ({smallest:.3g})")
    return smallest


def epsilon_bound_two_layer(W, x):
    """``|Wx|_min / ||W||_inf``: below it no entry of ``Wx`` changes sign under FGSM."""
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64).ravel()
    return _require_nonzero(W @ x, "Wx") / inf_norm(W)


def epsilon_bound_deep(net, x):
    """Minimum over parametric layers of ``|pre-activation|_min / ||layer matrix||_inf``."""
    _, trace = net.forward(x)
    bound = math.inf
    for i, pre in zip(net.parametric_indices, trace.pre_activations):
        smallest = _require_nonzero(pre, f"pre-activation of layer {i}")
        bound = min(bound, smallest / inf_norm(net.layer_matrix(i)))
    return bound


def check_sign_preservation(net, x, x_prime):
    """Compare signs of every pre-activation under ``x`` and ``x_prime``.

    :return: ``(preserved, flips)`` where ``flips[j]`` counts sign changes in the
        j-th linear/conv layer.
    """
    _, a = net.forward(x)
    _, b = net.forward(x_prime)
    flips = [int(np.sum(np.sign(p) != np.sign(q)))
             for p, q in zip(a.pre_activations, b.pre_activations)]
    return all(f == 0 for f in flips), flips


def _targeted_terms(T, x, target):
    z = T @ np.asarray(x, dtype=np.float64).ravel()
    # a common shift of z rescales numerator and denominator alike
    e = np.exp(z - z.max())
    A = e @ T - T[target] * e.sum()
    D = np.abs(T - T[target]).T @ e
    return A, D, e.sum()


def epsilon_bound_targeted_single(W, x, target):
    """Largest targeted-FGSM step that keeps every input-gradient sign fixed."""
    W = np.asarray(W, dtype=np.float64)
    A, D, total = _targeted_terms(W, x, target)
    # grad_x L(x, e_t) = A / sum(exp(Wx))
    _require_nonzero(A / total, "grad_x L(x, e_t)")
    return float(np.min(np.log1p(np.abs(A) / D))) / inf_norm(W)


def effective_matrix(net, x):
    """Linear map the ReLU net applies near ``x`` (ReLU pattern frozen, biases dropped)."""
    _, trace = net.forward(x)
    T = np.eye(net.input_dim)
    pre = iter(trace.pre_activations)
    last = None
    for i, layer in enumerate(net.layers):
        if isinstance(layer, ReLU):
            T = (last > 0)[:, None] * T
        else:
            T = net.layer_matrix(i) @ T
            last = next(pre)
    return T


def targeted_two_layer_bounds(W, V, x, target):
    """``(U1, U2)``: the sign-preservation bound for ``Wx`` and the targeted bound
    for the effective map ``T = V diag(Wx > 0) W``."""
    W = np.asarray(W, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64).ravel()
    u1 = epsilon_bound_two_layer(W, x)
    T = V @ ((W @ x > 0)[:, None] * W)
    u2 = epsilon_bound_targeted_single(T, x, target)
    return u1, u2


def epsilon_bound_targeted_two_layer(W, V, x, target):
    return min(targeted_two_layer_bounds(W, V, x, target))


def c_bound_cw(W, x, y_label, target, bias=None):
    """Upper bound on the CW multiplier ``c`` for the one-layer ratio guarantee.

    Rows identical to ``W[y]`` contribute ``+inf`` and are skipped. A ``bias``
    only shifts the logit gaps.
    """
    W = np.asarray(W, dtype=np.float64)
    if y_label == target:
        raise ValueError("target must differ from y")
    z = W @ np.asarray(x, dtype=np.float64).ravel()
    if bias is not None:
        z = z + np.asarray(bias, dtype=np.float64)
    others = np.delete(z, y_label)
    if not np.all(z[y_label] > others):
        raise NotApplicable(f"class {y_label} is not the strict argmax of Wx")
    gap_t = z[y_label] - z[target]
    bound = math.inf
    for j in range(len(z)):
        if j == y_label:
            continue
        row_gap = float(np.sum((W[y_label] - W[j]) ** 2))
        if row_gap == 0.0:
            continue
        bound = min(bound, (z[y_label] - z[j]) ** 2 / (row_gap * gap_t))
    return bound


def ratio_verdict(W, x, x_prime, y_label, target):
    """Did ``P(t) / P(y)`` go up? Compared as logit differences."""
    W = np.asarray(W, dtype=np.float64)
    z = W @ np.asarray(x, dtype=np.float64).ravel()
    z2 = W @ np.asarray(x_prime, dtype=np.float64).ravel()
    before = z[target] - z[y_label]
    after = z2[target] - z2[y_label]
    if after > before:
        return "increased"
    if after < before:
        return "decreased"
    return "unchanged"


def irrelevant_label_direction(W, y_label, target, k_label):
    """Predict how ``P(k) / P(y)`` moves under the closed-form CW perturbation."""
    if len({y_label, target, k_label}) != 3:
        raise ValueError("y, target and k must be three distinct labels")
    W = np.asarray(W, dtype=np.float64)
    inner = float((W[k_label] - W[y_label]) @ (W[y_label] - W[target]))
    if inner < 0:
        return "increases"
    if inner > 0:
        return "decreases"
    return "boundary"


# -- reports ------------------------------------------------------------------------


@dataclass
class BoundReport:
    theorem_id: str
    threshold: float
    epsilon_used: float
    verdict: str
    violation_magnitude: float = 0.0
    seed: int = 0
    digest: str = ""
    condition_flags: List[str] = field(default_factory=list)

    CSV_FIELDS = ("theorem_id", "threshold", "epsilon_used", "verdict",
                  "violation_magnitude", "seed")

    def csv_row(self):
        return [self.theorem_id, repr(float(self.threshold)), repr(float(self.epsilon_used)),
                self.verdict, repr(float(self.violation_magnitude)), str(self.seed)]


@dataclass
class SuiteSummary:
    theorem_id: str
    trials: int
    applicable: int
    holds: int
    violated: int
    extra: Dict[str, float] = field(default_factory=dict)

    @property
    def ok(self):
        return self.violated == 0


def digest(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype=np.float64)).tobytes())
    return h.hexdigest()[:16]


def summarize(theorem_id, reports):
    verdicts = [r.verdict for r in reports]
    return SuiteSummary(
        theorem_id,
        trials=len(reports),
        applicable=sum(v != NOT_APPLICABLE for v in verdicts),
        holds=verdicts.count(HOLDS),
        violated=verdicts.count(VIOLATED),
    )


# -- randomized suites ---------------------------------------------------------------


def linear_net(W):
    W = np.asarray(W, dtype=np.float64)
    return Network([Linear(W)], (W.shape[1],), W.shape[0])


def two_layer_net(W, V):
    return Network([Linear(W), ReLU(), Linear(V)], (W.shape[1],), V.shape[0])


def _sizes(rng, k_range=(2, 10), n_range=(2, 50)):
    k = int(rng.integers(k_range[0], k_range[1] + 1))
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    return k, n


def _other_label(rng, k, exclude):
    t = int(rng.integers(0, k - 1))
    return t + (t >= exclude)


def _loss_verdict(increase, sign_ok=True):
    # increase: how much the loss moved in the guaranteed direction
    if sign_ok and increase >= -LOSS_TOL:
        return HOLDS, 0.0
    return VIOLATED, max(0.0, -increase)


def trial_fgsm_single(seed):
    rng = np.random.default_rng(seed)
    k, n = _sizes(rng)
    W, x = rng.standard_normal((k, n)), rng.standard_normal(n)
    label = int(rng.integers(0, k))
    eps = float(10.0 ** rng.uniform(-3.0, 0.0))
    res = fgsm(linear_net(W), x, label, eps)
    verdict, mag = _loss_verdict(res.loss_after - res.loss_before)
    return BoundReport("3.1", math.inf, eps, verdict, mag, seed, digest(W, x, [label]))


def _random_two_layer(rng, hidden=(2, 30)):
    k, n = _sizes(rng)
    l = int(rng.integers(hidden[0], hidden[1] + 1))
    return rng.standard_normal((l, n)), rng.standard_normal((k, l)), rng.standard_normal(n), k


def trial_fgsm_two_layer(seed, lemma_only=False):
    rng = np.random.default_rng(seed)
    W, V, x, k = _random_two_layer(rng)
    label = int(rng.integers(0, k))
    tid = "3.3-lemma" if lemma_only else "3.2"
    d = digest(W, V, x, [label])
    try:
        bound = epsilon_bound_two_layer(W, x)
    except NotApplicable:
        return BoundReport(tid, 0.0, 0.0, NOT_APPLICABLE, 0.0, seed, d, ["zero pre-activation"])
    eps = SAFETY * bound
    net = two_layer_net(W, V)
    res = fgsm(net, x, label, eps)
    flips = int(np.sum(np.sign(W @ x) != np.sign(W @ res.adversarial)))
    flags = [] if flips == 0 else [f"layer-1 sign flips: {flips}"]
    if lemma_only:
        verdict = HOLDS if flips == 0 else VIOLATED
        return BoundReport(tid, bound, eps, verdict, float(flips), seed, d, flags)
    verdict, mag = _loss_verdict(res.loss_after - res.loss_before, flips == 0)
    return BoundReport(tid, bound, eps, verdict, mag, seed, d, flags)


def random_deep_net(rng, depth=3, n_range=(2, 30), hidden=(2, 20), k_range=(2, 10)):
    k, n = _sizes(rng, k_range, n_range)
    dims = [n] + [int(rng.integers(hidden[0], hidden[1] + 1)) for _ in range(depth - 1)] + [k]
    layers = []
    for j in range(depth):
        if j:
            layers.append(ReLU())
        layers.append(Linear(rng.standard_normal((dims[j + 1], dims[j]))))
    return Network(layers, (n,), k)


def trial_fgsm_deep(seed):
    rng = np.random.default_rng(seed)
    net = random_deep_net(rng)
    x = rng.standard_normal(net.input_dim)
    label = int(rng.integers(0, net.class_count))
    d = digest(*[l.weight for l in net.layers if not isinstance(l, ReLU)], x, [label])
    try:
        bound = epsilon_bound_deep(net, x)
    except NotApplicable:
        return BoundReport("3.3-deep", 0.0, 0.0, NOT_APPLICABLE, 0.0, seed, d,
                           ["zero pre-activation"])
    eps = SAFETY * bound
    res = fgsm(net, x, label, eps)
    preserved, flips = check_sign_preservation(net, x, res.adversarial)
    if not preserved:
        return BoundReport("3.3-deep", bound, eps, NOT_APPLICABLE, 0.0, seed, d,
                           ["bound did not preserve signs", f"flips {flips}"])
    verdict, mag = _loss_verdict(res.loss_after - res.loss_before)
    return BoundReport("3.3-deep", bound, eps, verdict, mag, seed, d, ["signs preserved"])


def trial_targeted_single(seed):
    rng = np.random.default_rng(seed)
    k, n = _sizes(rng)
    W, x = rng.standard_normal((k, n)), rng.standard_normal(n)
    y = int(rng.integers(0, k))
    t = _other_label(rng, k, y)
    d = digest(W, x, [y, t])
    try:
        bound = epsilon_bound_targeted_single(W, x, t)
    except NotApplicable:
        return BoundReport("4.1", 0.0, 0.0, NOT_APPLICABLE, 0.0, seed, d, ["zero gradient entry"])
    eps = SAFETY * bound
    res = fgsm_targeted(linear_net(W), x, t, eps)
    verdict, mag = _loss_verdict(res.loss_before - res.loss_after)
    return BoundReport("4.1", bound, eps, verdict, mag, seed, d)


def trial_targeted_two_layer(seed):
    rng = np.random.default_rng(seed)
    W, V, x, k = _random_two_layer(rng)
    y = int(rng.integers(0, k))
    t = _other_label(rng, k, y)
    d = digest(W, V, x, [y, t])
    try:
        u1, u2 = targeted_two_layer_bounds(W, V, x, t)
    except NotApplicable as exc:
        return BoundReport("4.2", 0.0, 0.0, NOT_APPLICABLE, 0.0, seed, d, [str(exc)])
    bound = min(u1, u2)
    eps = SAFETY * bound
    net = two_layer_net(W, V)
    res = fgsm_targeted(net, x, t, eps)
    verdict, mag = _loss_verdict(res.loss_before - res.loss_after)
    return BoundReport("4.2", bound, eps, verdict, mag, seed, d,
                       ["U1 binds" if u1 <= u2 else "U2 binds"])


def _cw_instance(rng, k_range=(2, 10)):
    k, n = _sizes(rng, k_range)
    W, x = rng.standard_normal((k, n)), rng.standard_normal(n)
    y = int(np.argmax(W @ x))
    t = _other_label(rng, k, y)
    return W, x, y, t


def trial_cw_ratio(seed):
    rng = np.random.default_rng(seed)
    W, x, y, t = _cw_instance(rng)
    d = digest(W, x, [y, t])
    bound = c_bound_cw(W, x, y, t)
    c = SAFETY * bound
    x_prime = x + closed_form_cw_delta(W, x, y, t, c)
    verdict = ratio_verdict(W, x, x_prime, y, t)
    keeps_argmax = int(np.argmax(W @ x_prime)) == y
    flags = [f"ratio {verdict}"] + ([] if keeps_argmax else ["y lost argmax"])
    z, z2 = W @ x, W @ x_prime
    change = (z2[t] - z2[y]) - (z[t] - z[y])
    ok = verdict == "increased" and keeps_argmax
    return BoundReport("7", bound, c, HOLDS if ok else VIOLATED,
                       0.0 if ok else max(0.0, -change), seed, d, flags)


def trial_irrelevant_label(seed):
    rng = np.random.default_rng(seed)
    W, x, y, t = _cw_instance(rng, k_range=(3, 10))
    k = W.shape[0]
    kk = int(rng.choice([j for j in range(k) if j not in (y, t)]))
    d = digest(W, x, [y, t, kk])
    bound = c_bound_cw(W, x, y, t)
    c = SAFETY * bound
    predicted = irrelevant_label_direction(W, y, t, kk)
    if predicted == "boundary":
        return BoundReport("5.3", bound, c, NOT_APPLICABLE, 0.0, seed, d, ["boundary"])
    x_prime = x + closed_form_cw_delta(W, x, y, t, c)
    z, z2 = W @ x, W @ x_prime
    change = (z2[kk] - z2[y]) - (z[kk] - z[y])
    measured = "increases" if change > 0 else "decreases" if change < 0 else "boundary"
    ok = measured == predicted
    return BoundReport("5.3", bound, c, HOLDS if ok else VIOLATED,
                       0.0 if ok else abs(change), seed, d,
                       [f"predicted {predicted}", f"measured {measured}"])


SUITES = {
    "3.1": trial_fgsm_single,
    "3.2": trial_fgsm_two_layer,
    "3.3-lemma": lambda seed: trial_fgsm_two_layer(seed, lemma_only=True),
    "3.3-deep": trial_fgsm_deep,
    "4.1": trial_targeted_single,
    "4.2": trial_targeted_two_layer,
    "7": trial_cw_ratio,
    "5.3": trial_irrelevant_label,
}


def run_suite(theorem_id, trials, seed=42):
    """Run ``trials`` independent instances; trial ``i`` uses seed ``seed + i``.

    :return: ``(reports, summary)``
    """
    if theorem_id not in SUITES:
        raise KeyError(f"unknown theorem id {theorem_id!r}; expected one of {sorted(SUITES)}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    trial = SUITES[theorem_id]
    reports = [trial(seed + i) for i in range(trials)]
    summary = summarize(theorem_id, reports)
    if theorem_id == "3.3-deep":
        # share of trials where the layer-wise formula actually kept all signs
        measured = [r for r in reports if "zero pre-activation" not in r.condition_flags]
        kept = sum(r.verdict != NOT_APPLICABLE for r in measured)
        summary.extra["sign_preservation_rate"] = kept / len(measured) if measured else 0.0
    return reports, summary
