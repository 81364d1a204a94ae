#!/usr/bin/env python3
"""Backpropagation verified against central finite differences.

Every layer of the neural substrate carries an exact hand-derived backward
pass; this script gradient-checks each one, the GRU cell, and the whole
frame-embedding generator at tiny widths, printing the worst relative
error per component.
"""

import numpy as np

from handact import nn
from handact import pipeline as pl
from handact import temporal as tm


def check(name, loss_fn, tensors, tol):
    report = nn.gradient_check(loss_fn, tensors)
    status = "ok " if report.max_rel_error < tol else "FAIL"
    worst_abs = max(e.max_abs_error for e in report.entries)
    print(f"  [{status}] {name:<34} max rel err {report.max_rel_error:.3e}"
          f"  max abs err {worst_abs:.3e}  (tol {tol:g})")


def main():
    rng = np.random.default_rng(0)
    print("gradient checks (central differences, h = 1e-5):")

    x = nn.Tensor(rng.standard_normal((2, 3)), requires_grad=True)
    lin = nn.Linear(3, 4, rng, "lin")
    check("linear", lambda: nn.softmax_cross_entropy(lin(x), [0, 2]),
          {"x": x, "w": lin.w, "b": lin.b}, 1e-6)

    conv = nn.Conv2d(2, 3, 3, rng, "conv", pad=1)
    xc = nn.Tensor(rng.standard_normal((2, 2, 4, 4)), requires_grad=True)
    check("conv + relu + avgpool",
          lambda: nn.l2_loss(nn.flatten(nn.avgpool2d(nn.relu(conv(xc)), 2)),
                             np.zeros((2, 12))),
          {"w": conv.w, "b": conv.b, "x": xc}, 1e-4)

    gamma = nn.Parameter(rng.standard_normal(3), "gamma")
    beta = nn.Parameter(rng.standard_normal(3), "beta")
    xb = nn.Tensor(rng.standard_normal((6, 3)), requires_grad=True)
    tb = rng.standard_normal((6, 3))
    check("batchnorm1d",
          lambda: nn.l2_loss(nn.relu(nn.batchnorm1d(
              xb, gamma, beta, nn.BatchNormState.for_dim(3), train=True)), tb),
          {"x": xb, "gamma": gamma, "beta": beta}, 1e-4)

    cell = nn.GRUCellParams(3, 4, rng, "gru")
    xg = nn.Tensor(rng.standard_normal((2, 3)), requires_grad=True)
    hg = nn.Tensor(rng.standard_normal((2, 4)), requires_grad=True)
    tensors = {p.name: p for p in cell.params()}
    tensors.update({"x": xg, "h": hg})
    check("gru cell",
          lambda: nn.l2_loss(nn.gru_cell(xg, hg, cell), np.zeros((2, 4))),
          tensors, 1e-5)

    cfg = pl.PipelineConfig(n_actions=3, n_objects=2, n_grasp_types=4,
                            patch_size=8, conv_channels=(2, 3), backbone_dim=10,
                            grasp_hidden=(8, 6), curvature_hidden=12,
                            curvature_dim=9, relation_hidden=8, interaction_dim=5,
                            object_embed_dim=7, mixture_hidden=(12, 10),
                            embed_dim=8, global_dim=6, dropout=0.0, seed=0)
    gen = pl.FrameEmbeddingGenerator(cfg, np.random.default_rng(0))
    hand = nn.Tensor(rng.standard_normal((2, 3, 8, 8)))
    obj = nn.Tensor(rng.standard_normal((2, 3, 8, 8)))
    glob = nn.Tensor(rng.standard_normal((2, 6)))
    target = rng.standard_normal((2, 9))
    w = pl.LossWeights()

    def generator_loss():
        out = gen.forward(hand, obj, np.ones(2), glob)
        l_obj = pl.loss_object(out["object_logits"], [0, 1])
        l_loc = pl.loss_local(out["grasp_logits"], [1, 3], out["curvature_pred"],
                              target, np.zeros(9, dtype=bool), w)
        return pl.loss_action_frame(out["action_logits"], [2, 0], l_obj, l_loc, w)

    check("frame-embedding generator", generator_loss, gen.named_params(), 1e-4)

    tmodel = tm.TemporalModel(tm.TemporalConfig(n_actions=3, input_dim=4, layers=2,
                                                hidden=3, fc_widths=(5, 4)),
                              np.random.default_rng(1))
    emb = rng.standard_normal((2, 3, 4))

    def temporal_loss():
        seq = [nn.Tensor(emb[:, t]) for t in range(3)]
        return tm.loss_action_temporal(tmodel.forward_steps(seq), [0, 2])

    check("temporal model", temporal_loss, tmodel.named_params(), 1e-4)


if __name__ == "__main__":
    main()
