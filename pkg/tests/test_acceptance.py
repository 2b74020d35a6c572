"""Acceptance suite: one test per primary criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""
import time
import warnings

import numpy as np
import pytest

from advprobe.arch import build_network
from advprobe.attacks import AttackConfig, CWParams, closed_form_cw_delta
from advprobe.data import load_digits_dataset
from advprobe.experiments import compare_cw, prob_shift, random_cw_instances, sweep
from advprobe.network import Adam, Conv2d, Linear, Network, ReLU, conv_as_matrix, train
from advprobe.theory import c_bound_cw, irrelevant_label_direction, run_suite
from oracles import central_difference, max_relative_error

LINES = []


def report(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
    LINES.append(line)
    print(line)
    return ok


@pytest.fixture(autouse=True)
def _show(capsys):
    # echo the verdict line even when pytest captures output
    yield
    out = capsys.readouterr().out
    with capsys.disabled():
        if out:
            print("\n" + out.rstrip())


def timed(fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - start


# -- theorem suites ----------------------------------------------------------------------


def test_criterion_01_fgsm_single_layer():
    (_, s), secs = timed(run_suite, "3.1", 1000, 42)
    ok = s.holds == 1000 and s.violated == 0 and secs < 30
    assert report(1, ok, f"loss non-decreasing in {s.holds}/1000 single-layer trials, "
                         f"{secs:.1f}s (limit 30s)")


def test_criterion_02_two_layer_sign_and_loss():
    (reports, s), secs = timed(run_suite, "3.2", 1000, 42)
    lemma = sum(not r.condition_flags for r in reports if r.verdict != "not_applicable")
    ok = s.applicable > 0 and s.holds == s.applicable and lemma == s.applicable and secs < 60
    assert report(2, ok, f"sign preserved and loss up in {s.holds}/{s.applicable} applicable "
                         f"trials ({lemma} sign-clean), {secs:.1f}s (limit 60s)")


def test_criterion_03_deep_conditional():
    _, s = run_suite("3.3-deep", 500, 42)
    rate = s.extra["sign_preservation_rate"]
    ok = s.applicable > 0 and s.violated == 0 and s.holds == s.applicable
    assert report(3, ok, f"loss up in {s.holds}/{s.applicable} sign-preserving trials; "
                         f"bound kept all signs in {rate:.1%} of trials (informational)")


def test_criterion_04_targeted_single_layer():
    _, s = run_suite("4.1", 1000, 42)
    ok = s.applicable > 0 and s.holds == s.applicable
    assert report(4, ok, f"targeted loss non-increasing in {s.holds}/{s.applicable} "
                         f"applicable trials")


def test_criterion_05_targeted_two_layer():
    _, s = run_suite("4.2", 500, 42)
    ok = s.applicable > 0 and s.holds == s.applicable
    assert report(5, ok, f"targeted loss non-increasing in {s.holds}/{s.applicable} "
                         f"applicable trials")


def test_criterion_06_cw_ratio_and_argmax():
    reports, s = run_suite("7", 1000, 42)
    increased = sum("ratio increased" in r.condition_flags for r in reports)
    kept = sum("y lost argmax" not in r.condition_flags for r in reports)
    ok = increased == 1000 and kept == 1000
    assert report(6, ok, f"ratio increased {increased}/1000, y kept argmax {kept}/1000")


def test_criterion_07_closed_form_vs_iterative_cw():
    diffs, agree = [], 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for W, x, y, t in random_cw_instances(100, seed=42):
            c = 0.5 * c_bound_cw(W, x, y, t)
            cmp = compare_cw(W, x, y, t, c, steps=2000, learning_rate=0.01)
            diffs.append(cmp.rel_l2_diff)
            agree += cmp.closed_verdict == cmp.iterative_verdict
    med = float(np.median(diffs))
    ok = med <= 1e-2 and agree == 100
    assert report(7, ok, f"median relative L2 difference {med:.2e} (limit 1e-2), "
                         f"verdicts agree {agree}/100")


def test_criterion_08_irrelevant_label_example():
    W_y, W_t = np.array([1.0, 1.0, 1.0]), np.array([1.0, 0.0, 1.0])
    x = np.ones(3)
    outcomes = []
    for W_k, expected in (([0.0, 2.0, 0.0], "decreases"), ([0.0, -1.0, 0.0], "increases")):
        W = np.array([W_y, W_t, W_k])
        predicted = irrelevant_label_direction(W, 0, 1, 2)
        c = 0.9 * c_bound_cw(W, x, 0, 1)
        z, z2 = W @ x, W @ (x + closed_form_cw_delta(W, x, 0, 1, c))
        change = (z2[2] - z2[0]) - (z[2] - z[0])
        measured = "increases" if change > 0 else "decreases" if change < 0 else "boundary"
        outcomes.append((W_k, expected, predicted, measured))
    ok = all(e == p == m for _, e, p, m in outcomes)
    detail = "; ".join(f"W_k={tuple(w)}: predicted {p}, measured {m}" for w, _, p, m in outcomes)
    assert report(8, ok, detail)


# -- gradients ---------------------------------------------------------------------------


def _random_net(rng, conv):
    if conv:
        c, h = int(rng.integers(1, 3)), int(rng.integers(4, 7))
        oc, k = int(rng.integers(1, 4)), int(rng.integers(2, 4))
        layer = Conv2d(rng.standard_normal((oc, c, k, k)), rng.standard_normal(oc),
                       int(rng.integers(1, 3)), int(rng.integers(0, 2)))
        out = int(np.prod(layer.output_shape((c, h, h))))
        classes = int(rng.integers(2, 6))
        return Network([layer, ReLU(), Linear(rng.standard_normal((classes, out)),
                                              rng.standard_normal(classes))], (c, h, h), classes)
    depth = int(rng.integers(1, 4))
    dims = [int(rng.integers(2, 10)) for _ in range(depth)] + [int(rng.integers(2, 6))]
    layers = []
    for j in range(depth):
        if j:
            layers.append(ReLU())
        layers.append(Linear(rng.standard_normal((dims[j + 1], dims[j])),
                             rng.standard_normal(dims[j + 1])))
    return Network(layers, (dims[0],), dims[-1])


def test_criterion_09_gradient_correctness():
    rng = np.random.default_rng(42)
    worst, conv_nets, conv_equiv = 0.0, 0, True
    for trial in range(200):
        conv = trial % 20 == 0
        while True:
            net = _random_net(rng, conv)
            x = rng.standard_normal(net.input_shape)
            _, trace = net.forward(x)
            if all(np.min(np.abs(p)) > 1e-3 for p in trace.pre_activations[:-1]):
                break
        label = int(rng.integers(0, net.class_count))
        grad = net.input_gradient(x, label)
        numeric = central_difference(lambda v: net.loss(v, label), x, h=1e-5)
        worst = max(worst, max_relative_error(grad, numeric))
        if conv:
            conv_nets += 1
            first = net.layers[0]
            flat = Network([Linear(conv_as_matrix(first, net.input_shape),
                                   net._layer_bias(0))] + net.layers[1:],
                           (net.input_dim,), net.class_count)
            conv_equiv &= np.allclose(flat.input_gradient(x.ravel(), label), grad.ravel(),
                                      rtol=1e-12, atol=1e-14)
    ok = worst <= 1e-4 and conv_equiv
    assert report(9, ok, f"max relative error {worst:.2e} over 200 nets ({conv_nets} conv, "
                         f"matrix-equivalent: {conv_equiv}); limit 1e-4")


# -- desk-scale experiments ------------------------------------------------------------------


@pytest.fixture(scope="module")
def digits_models():
    data = load_digits_dataset()
    train_set, test_set = data.split(0.2, seed=0)
    start = time.perf_counter()
    cnn = train(build_network("cnn:1x8x8:conv(8,3,1,1)-conv(16,3,2,1)-mlp(10)", seed=7),
                train_set, Adam(0.01), epochs=20, batch_size=32, seed=7)
    head = train(build_network("mlp:64-10", seed=7), train_set, Adam(0.01), epochs=20,
                 batch_size=32, seed=7)
    return data, test_set, cnn, head, time.perf_counter() - start


def test_criterion_10_fgsm_sweep(digits_models):
    data, test_set, cnn, head, train_secs = digits_models
    start = time.perf_counter()
    grid = [i / 100 for i in range(11)]
    cnn_sweep = sweep(cnn, test_set.inputs, test_set.labels, AttackConfig("fgsm"), grid)
    head_sweep = sweep(head, test_set.inputs, test_set.labels, AttackConfig("fgsm"), grid)
    secs = train_secs + time.perf_counter() - start
    clean, at_008 = cnn_sweep.accuracy[0], cnn_sweep.accuracy[8]
    rising = all(b > a for a, b in zip(head_sweep.mean_loss, head_sweep.mean_loss[1:]))
    ok = clean >= 0.95 and rising and clean - at_008 >= 0.30 and secs < 300
    assert report(10, ok, f"CNN clean accuracy {clean:.3f}, at eps=0.08 {at_008:.3f} "
                          f"(drop {100 * (clean - at_008):.1f} pts, need 30); single-layer "
                          f"mean loss strictly rising: {rising}; {secs:.1f}s (limit 300s)")


def test_criterion_11_targeted_iterations_and_prob_shift(digits_models):
    data, _, cnn, _, _ = digits_models
    source, target = 4, 6
    X = data.inputs[data.labels == source]
    iters = [1, 2, 4, 8, 10]
    config = AttackConfig("ifgsm-targeted", epsilon=0.02, clip_alpha=0.1, target=target)
    rates = sweep(cnn, X, np.full(len(X), source), config, iters, vary="iters").success_rate
    drops = [a - b for a, b in zip(rates, rates[1:]) if b < a]
    monotone = len(drops) == 0 or (len(drops) == 1 and drops[0] <= 0.02)
    shift = prob_shift(cnn, X, target, CWParams(c=10, kappa=0, learning_rate=0.01, steps=10))
    raised = shift.after[target] > shift.before[target]
    ok = monotone and raised
    assert report(11, ok, f"{source}->{target} success over M={iters}: "
                          f"{[round(r, 3) for r in rates]}; CW mean P(target) "
                          f"{shift.before[target]:.3e} -> {shift.after[target]:.3e}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
