"""Sequence-level action classification over frame embeddings.

A 2-layer bidirectional GRU runs over the episode's frame embeddings; a
per-step linear head yields per-frame action logits, and the per-step GRU
outputs are mean-pooled over time and pushed through three fully-connected
layers to produce the video-level action logits (the authoritative
prediction). The sequence loss is the length-normalized sum of per-frame
cross entropies plus a video-level cross entropy that gives the
aggregation head its gradient.
"""

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import EmptySequence


@dataclass
class TemporalConfig:
    n_actions: int
    input_dim: int = 256
    layers: int = 2
    hidden: int = 256
    fc_widths: tuple = (128, 64)   # hidden widths of the 3-layer aggregation stack

    def __post_init__(self):
        if self.layers < 1 or self.hidden < 1:
            raise ValueError("layers and hidden must be >= 1")


@dataclass
class EpisodePrediction:
    frame_logits: list        # N tensors of (B, n_actions)
    video_logits: nn.Tensor   # (B, n_actions)

    @property
    def n_frames(self):
        return len(self.frame_logits)


class TemporalModel:
    def __init__(self, cfg: TemporalConfig, rng=None, name="temporal"):
        self.cfg = cfg
        rng = rng if rng is not None else np.random.default_rng(0)
        self.gru = nn.BiGRU(cfg.input_dim, cfg.hidden, cfg.layers, rng, f"{name}.gru")
        width = 2 * cfg.hidden
        self.step_head = nn.Linear(width, cfg.n_actions, rng, f"{name}.step_head")
        w1, w2 = cfg.fc_widths
        self.fc1 = nn.Linear(width, w1, rng, f"{name}.fc1")
        self.fc2 = nn.Linear(w1, w2, rng, f"{name}.fc2")
        self.fc3 = nn.Linear(w2, cfg.n_actions, rng, f"{name}.fc3")

    def forward_steps(self, seq) -> EpisodePrediction:
        """seq: list of (B, input_dim) tensors, one per frame."""
        if not seq:
            raise EmptySequence("temporal model needs at least one frame")
        outs = self.gru(seq)
        frame_logits = [self.step_head(o) for o in outs]
        pooled = nn.stack_mean(outs)
        h = nn.relu(self.fc1(pooled))
        h = nn.relu(self.fc2(h))
        video_logits = self.fc3(h)
        return EpisodePrediction(frame_logits=frame_logits, video_logits=video_logits)

    def params(self):
        return (self.gru.params() + self.step_head.params() + self.fc1.params()
                + self.fc2.params() + self.fc3.params())

    def named_params(self):
        return {p.name: p for p in self.params()}


def temporal_forward(model: TemporalModel, embeddings) -> EpisodePrediction:
    """Single-episode entry point: embeddings is (N, input_dim)."""
    emb = np.asarray(embeddings.data if isinstance(embeddings, nn.Tensor) else embeddings)
    seq = [nn.Tensor(emb[t][None, :]) for t in range(emb.shape[0])]
    return model.forward_steps(seq)


def loss_action_temporal(pred: EpisodePrediction, y_action) -> nn.Tensor:
    """Length-normalized per-frame CE sum plus video-level CE."""
    y = np.asarray(y_action).reshape(-1)
    n = pred.n_frames
    total = (1.0 / n) * nn.softmax_cross_entropy(pred.frame_logits[0], y)
    for t in range(1, n):
        total = total + (1.0 / n) * nn.softmax_cross_entropy(pred.frame_logits[t], y)
    return total + nn.softmax_cross_entropy(pred.video_logits, y)


def predict_video(model: TemporalModel, embeddings) -> int:
    """Argmax of the video-level logits for one episode."""
    pred = temporal_forward(model, embeddings)
    return int(pred.video_logits.data.argmax())


def video_accuracy(model: TemporalModel, episode_embeddings: np.ndarray,
                   actions, batch: int = 64):
    """Top-1 accuracy over (E, N, D) embeddings against (E,) labels."""
    actions = np.asarray(actions)
    correct = 0
    for s in range(0, len(actions), batch):
        emb = episode_embeddings[s:s + batch]
        seq = [nn.Tensor(emb[:, t]) for t in range(emb.shape[1])]
        pred = model.forward_steps(seq)
        correct += int((pred.video_logits.data.argmax(1) == actions[s:s + batch]).sum())
    return correct / len(actions)


def video_confusion(model: TemporalModel, episode_embeddings: np.ndarray,
                    actions, n_actions: int, batch: int = 64) -> np.ndarray:
    actions = np.asarray(actions)
    confusion = np.zeros((n_actions, n_actions), dtype=np.int64)
    for s in range(0, len(actions), batch):
        emb = episode_embeddings[s:s + batch]
        seq = [nn.Tensor(emb[:, t]) for t in range(emb.shape[1])]
        pred = model.forward_steps(seq)
        np.add.at(confusion, (actions[s:s + batch], pred.video_logits.data.argmax(1)), 1)
    return confusion
