"""Gradient correctness: every trainable parameter against central finite
differences, plus structural gradient properties."""

import numpy as np
import pytest

from gazeloop.graphs import build_frame_graph
from gazeloop.network import (InductiveGraphModel, LstmParams,
                              _lstm_backward_batch, _lstm_forward_batch,
                              loss_and_backward)
from gazeloop.numerics import (finite_diff_grad, finite_diff_grad_params,
                               max_relative_error)
from gazeloop.proposals import DetectionRecord
from gazeloop.scene import BoundingBox

GRAD_TOL = 1e-4
FD_STEP = 1e-5


def random_graph(n, d_app, rng, frame=0):
    dets = []
    for _ in range(n):
        x0, y0 = rng.uniform(0, 80, 2)
        w, h = rng.uniform(5, 30, 2)
        dets.append(DetectionRecord(frame, BoundingBox(x0, y0, x0 + w, y0 + h),
                                    rng.normal(0, 1, d_app)))
    return build_frame_graph(dets, 100, 100)


def model_loss_fn(graph, model, labels):
    def f(params):
        saved = model.params
        model.params = params
        try:
            loss, _ = loss_and_backward(graph, model, labels)
            return loss
        finally:
            model.params = saved
    return f


def check_gradients(graph, model, labels):
    _, analytic = loss_and_backward(graph, model, labels)
    numeric = finite_diff_grad_params(model_loss_fn(graph, model, labels),
                                      model.params, h=FD_STEP)
    worst = max(max_relative_error(analytic[name], numeric[name])
                for name in analytic)
    return worst


@pytest.mark.parametrize("aggregator", ["maxpool", "lstm"])
def test_gradients_match_finite_differences(aggregator):
    rng = np.random.default_rng(2024 if aggregator == "maxpool" else 2025)
    for _ in range(10):
        n = int(rng.integers(1, 7))
        d_app = int(rng.integers(2, 9))
        depth = int(rng.integers(1, 3))
        hidden = int(rng.integers(3, 7))
        n_classes = int(rng.integers(2, 5))
        graph = random_graph(n, d_app, rng)
        model = InductiveGraphModel.init(int(rng.integers(1 << 30)), 4 + d_app,
                                         [hidden] * depth,
                                         [f"c{i}" for i in range(n_classes)],
                                         aggregator)
        labels = [int(v) for v in rng.integers(0, n_classes, n)]
        assert check_gradients(graph, model, labels) <= GRAD_TOL


def test_lstm_aggregator_params_match_finite_differences():
    # standalone recurrent aggregator: loss = w . h_final(seq)
    rng = np.random.default_rng(11)
    d, hidden, t = 3, 3, 4
    lstm = LstmParams.init(rng, d, hidden)
    seq = rng.normal(0, 1, (1, t, d))
    probe = rng.normal(0, 1, hidden)
    params = {"wx": lstm.w_x, "wh": lstm.w_h, "b": lstm.bias}

    def run(params):
        h, _ = _lstm_forward_batch(seq, params["wx"], params["wh"], params["b"])
        return float(probe @ h[0])

    h, steps = _lstm_forward_batch(seq, params["wx"], params["wh"], params["b"])
    _, d_wx, d_wh, d_b = _lstm_backward_batch(probe[None, :], steps,
                                              params["wx"], params["wh"])
    numeric = finite_diff_grad_params(run, params, h=FD_STEP)
    assert max_relative_error(d_wx, numeric["wx"]) <= GRAD_TOL
    assert max_relative_error(d_wh, numeric["wh"]) <= GRAD_TOL
    assert max_relative_error(d_b, numeric["b"]) <= GRAD_TOL


def test_lstm_sequence_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    d, hidden, t = 3, 3, 3
    lstm = LstmParams.init(rng, d, hidden)
    seq = rng.normal(0, 1, (1, t, d))
    probe = rng.normal(0, 1, hidden)

    h, steps = _lstm_forward_batch(seq, lstm.w_x, lstm.w_h, lstm.bias)
    d_seq, _, _, _ = _lstm_backward_batch(probe[None, :], steps, lstm.w_x, lstm.w_h)

    def run(flat):
        h2, _ = _lstm_forward_batch(flat.reshape(1, t, d), lstm.w_x, lstm.w_h,
                                    lstm.bias)
        return float(probe @ h2[0])

    numeric = finite_diff_grad(run, seq.ravel().copy(), h=FD_STEP)
    assert max_relative_error(d_seq.ravel(), numeric) <= GRAD_TOL


def test_duplicated_graph_doubles_loss_and_gradients():
    rng = np.random.default_rng(5)
    graph = random_graph(3, 4, rng)
    model = InductiveGraphModel.init(1, 8, [4], ["a", "b"], "maxpool")
    labels = [0, 1, 0]
    loss1, grads1 = loss_and_backward(graph, model, labels)
    # a disjoint batch of two copies = summing the two calls
    loss2 = loss1 * 2
    grads2 = {k: g * 2 for k, g in grads1.items()}
    loss_again, grads_again = loss_and_backward(graph, model, labels)
    assert loss_again + loss1 == pytest.approx(loss2)
    for name in grads1:
        np.testing.assert_allclose(grads_again[name] + grads1[name], grads2[name],
                                   atol=1e-12)


def test_neighbor_permutation_leaves_maxpool_gradients_unchanged():
    rng = np.random.default_rng(6)
    dets = [DetectionRecord(0, BoundingBox(10 * i, 5, 10 * i + 8, 13),
                            rng.normal(0, 1, 4)) for i in range(4)]
    model = InductiveGraphModel.init(2, 8, [5], ["a", "b"], "maxpool")
    g1 = build_frame_graph(dets, 100, 100)
    g2 = build_frame_graph(dets[::-1], 100, 100)
    labels = [0, 1, 0, 1]
    loss1, grads1 = loss_and_backward(g1, model, labels)
    loss2, grads2 = loss_and_backward(g2, model, labels)
    assert loss1 == pytest.approx(loss2, abs=1e-12)
    for name in grads1:
        np.testing.assert_allclose(grads1[name], grads2[name], atol=1e-12)


def test_missing_label_rejected():
    rng = np.random.default_rng(7)
    graph = random_graph(3, 4, rng)
    model = InductiveGraphModel.init(1, 8, [4], ["a", "b"], "maxpool")
    with pytest.raises(ValueError):
        loss_and_backward(graph, model, [0, 1])
