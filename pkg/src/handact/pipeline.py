"""Frame-embedding generator and the staged training driver.

Per frame, two small conv encoders (the desk-scale stand-in for pretrained
backbones) embed the primary-hand and object crops. The local network
predicts the grasp type and regresses the per-vertex hand curvature vector
(its input concatenates the backbone feature with the grasp head's
penultimate activation). A relation encoder fuses hand and object features
into an interaction embedding, the object network taps a 256-wide object
embedding, and the mixture network combines

    grasp embedding (+) curvature prediction (+) interaction embedding,
    object embedding, global scene feature

into the frame embedding plus per-frame action logits.

Losses: object cross entropy; local = grasp CE + alpha * masked squared
curvature error; frame action = action CE + beta * L_object + kappa *
L_local (alpha 0.3, beta 0.2, kappa 0.5). Training is staged: the local
and object networks pretrain on their own losses, everything refines
jointly on the composite frame loss, then the generator freezes and the
temporal model trains on the sequence loss.
"""

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from . import detection as det
from . import mesh as meshmod
from . import curvature as curv
from .errors import NonFiniteLoss, ShapeMismatch

CURVATURE_CHOICES = ("mean", "gaussian", "maximum", "minimum", "none")


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.3   # curvature regression weight inside the local loss
    beta: float = 0.2    # object-loss weight inside the frame action loss
    kappa: float = 0.5   # local-loss weight inside the frame action loss


@dataclass
class PipelineConfig:
    n_actions: int
    n_objects: int
    n_grasp_types: int = 36
    patch_size: int = 32
    channels: int = 3
    conv_channels: tuple = (8, 16)
    backbone_dim: int = 128
    grasp_hidden: tuple = (128, 64)     # second entry is the grasp embedding width
    curvature_hidden: int = 256
    curvature_dim: int = 778
    curvature_input_scale: float = 4.0  # normalizes v-hat magnitude into the mixture
    relation_hidden: int = 128
    interaction_dim: int = 64
    object_embed_dim: int = 256
    mixture_hidden: tuple = (256, 256)
    embed_dim: int = 256
    global_dim: int = det.GLOBAL_FEATURE_DIM
    dropout: float = 0.1
    curvature_kind: str = "mean"        # one of CURVATURE_CHOICES
    seed: int = 0

    def __post_init__(self):
        if self.curvature_kind not in CURVATURE_CHOICES:
            raise ValueError(f"curvature_kind must be one of {CURVATURE_CHOICES}")


@dataclass
class FrameSample:
    """One frame's model inputs, targets and class counts."""
    hand_patch: np.ndarray            # (C, P, P)
    object_patch: np.ndarray | None   # (C, P, P) or None when no object box
    global_feature: np.ndarray        # (global_dim,)
    grasp_id: int
    object_id: int
    action_id: int
    curvature_target: np.ndarray      # (curvature_dim,)
    boundary_mask: np.ndarray         # (curvature_dim,) bool, True = excluded
    n_grasp_types: int = 36
    n_objects: int = 1
    n_actions: int = 1

    def __post_init__(self):
        if not (0 <= self.grasp_id < self.n_grasp_types
                and 0 <= self.object_id < self.n_objects
                and 0 <= self.action_id < self.n_actions):
            raise ValueError("target id outside its class count")
        if not np.isfinite(self.curvature_target).all():
            raise ValueError("non-finite curvature target")


@dataclass
class FrameEmbedding:
    vector: np.ndarray          # (embed_dim,)
    action_logits: np.ndarray   # (n_actions,)


# ---------------------------------------------------------------------------
# networks
# ---------------------------------------------------------------------------

class ConvEncoder:
    """conv-pool-conv-pool-flatten-linear patch encoder.

    Also accepts precomputed feature vectors: a (B, backbone_dim) input is
    passed through untouched, so users with a real backbone can feed its
    features directly.
    """

    def __init__(self, cfg: PipelineConfig, rng, name):
        c1, c2 = cfg.conv_channels
        self.conv1 = nn.Conv2d(cfg.channels, c1, 3, rng, f"{name}.conv1", pad=1)
        self.conv2 = nn.Conv2d(c1, c2, 3, rng, f"{name}.conv2", pad=1)
        side = cfg.patch_size // 4
        self.fc = nn.Linear(c2 * side * side, cfg.backbone_dim, rng, f"{name}.fc")
        self.out_dim = cfg.backbone_dim

    def __call__(self, x: nn.Tensor) -> nn.Tensor:
        if x.data.ndim == 2:
            if x.data.shape[1] != self.out_dim:
                raise ShapeMismatch(
                    f"precomputed feature width {x.data.shape[1]} != {self.out_dim}")
            return x
        h = nn.avgpool2d(nn.relu(self.conv1(x)), 2)
        h = nn.avgpool2d(nn.relu(self.conv2(h)), 2)
        return self.fc(nn.flatten(h))

    def params(self):
        return self.conv1.params() + self.conv2.params() + self.fc.params()


class LocalNetwork:
    """Grasp-type head plus curvature regression head.

    The grasp head is two linear+relu layers then the class layer; its
    penultimate activation is the grasp embedding. The curvature head eats
    the backbone feature concatenated with that embedding. With
    curvature_kind "none" the curvature head does not exist and the
    forward returns None in its place.
    """

    def __init__(self, cfg: PipelineConfig, rng, name="local"):
        h1, h2 = cfg.grasp_hidden
        self.g1 = nn.Linear(cfg.backbone_dim, h1, rng, f"{name}.g1")
        self.g2 = nn.Linear(h1, h2, rng, f"{name}.g2")
        self.g3 = nn.Linear(h2, cfg.n_grasp_types, rng, f"{name}.g3")
        self.has_curvature = cfg.curvature_kind != "none"
        if self.has_curvature:
            self.c1 = nn.Linear(cfg.backbone_dim + h2, cfg.curvature_hidden,
                                rng, f"{name}.c1")
            self.c2 = nn.Linear(cfg.curvature_hidden, cfg.curvature_hidden,
                                rng, f"{name}.c2")
            self.c3 = nn.Linear(cfg.curvature_hidden, cfg.curvature_dim,
                                rng, f"{name}.c3")

    def __call__(self, hand_feature: nn.Tensor):
        e1 = nn.relu(self.g1(hand_feature))
        embedding = nn.relu(self.g2(e1))
        logits = self.g3(embedding)
        pred = None
        if self.has_curvature:
            joint = nn.concat([hand_feature, embedding], axis=1)
            pred = self.c3(nn.relu(self.c2(nn.relu(self.c1(joint)))))
        return logits, pred, embedding

    def params(self):
        out = self.g1.params() + self.g2.params() + self.g3.params()
        if self.has_curvature:
            out += self.c1.params() + self.c2.params() + self.c3.params()
        return out


class RelationNetwork:
    """Hand/object fusion into the interaction embedding."""

    def __init__(self, cfg: PipelineConfig, rng, name="relation"):
        self.r1 = nn.Linear(2 * cfg.backbone_dim, cfg.relation_hidden, rng, f"{name}.r1")
        self.r2 = nn.Linear(cfg.relation_hidden, cfg.interaction_dim, rng, f"{name}.r2")

    def __call__(self, hand_feature: nn.Tensor, object_feature: nn.Tensor) -> nn.Tensor:
        joint = nn.concat([hand_feature, object_feature], axis=1)
        return nn.relu(self.r2(nn.relu(self.r1(joint))))

    def params(self):
        return self.r1.params() + self.r2.params()


class ObjectNetwork:
    """Object classifier with a 256-wide embedding tap."""

    def __init__(self, cfg: PipelineConfig, rng, name="object"):
        self.o1 = nn.Linear(cfg.backbone_dim, cfg.object_embed_dim, rng, f"{name}.o1")
        self.o2 = nn.Linear(cfg.object_embed_dim, cfg.n_objects, rng, f"{name}.o2")

    def __call__(self, object_feature: nn.Tensor):
        embedding = nn.relu(self.o1(object_feature))
        return self.o2(embedding), embedding

    def params(self):
        return self.o1.params() + self.o2.params()


class MixtureNetwork:
    """Fuses local feature, object embedding and global feature.

    Three linear+relu layers (dropout after the first two) produce the
    frame embedding; a linear head maps it to per-frame action logits. The
    concatenation order (grasp embedding, curvature prediction,
    interaction, object embedding, global feature) is fixed.
    """

    def __init__(self, cfg: PipelineConfig, rng, name="mixture"):
        local_dim = cfg.grasp_hidden[1] + cfg.interaction_dim
        if cfg.curvature_kind != "none":
            local_dim += cfg.curvature_dim
        in_dim = local_dim + cfg.object_embed_dim + cfg.global_dim
        m1, m2 = cfg.mixture_hidden
        self.rate = cfg.dropout
        self.curvature_scale = cfg.curvature_input_scale
        self.m1 = nn.Linear(in_dim, m1, rng, f"{name}.m1")
        self.m2 = nn.Linear(m1, m2, rng, f"{name}.m2")
        self.m3 = nn.Linear(m2, cfg.embed_dim, rng, f"{name}.m3")
        self.head = nn.Linear(cfg.embed_dim, cfg.n_actions, rng, f"{name}.head")

    def __call__(self, grasp_embedding, curvature_pred, interaction,
                 object_embedding, global_feature, train=False, rng=None):
        parts = [grasp_embedding]
        if curvature_pred is not None:
            parts.append(self.curvature_scale * curvature_pred)
        parts += [interaction, object_embedding, global_feature]
        h = nn.concat(parts, axis=1)
        h = nn.dropout(nn.relu(self.m1(h)), self.rate, train, rng)
        h = nn.dropout(nn.relu(self.m2(h)), self.rate, train, rng)
        embedding = nn.relu(self.m3(h))
        return embedding, self.head(embedding)

    def params(self):
        return self.m1.params() + self.m2.params() + self.m3.params() + self.head.params()


class FrameEmbeddingGenerator:
    """The full per-frame model (everything except the temporal stage)."""

    def __init__(self, cfg: PipelineConfig, rng=None):
        self.cfg = cfg
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.hand_backbone = ConvEncoder(cfg, rng, "hand_backbone")
        self.object_backbone = ConvEncoder(cfg, rng, "object_backbone")
        self.local = LocalNetwork(cfg, rng)
        self.relation = RelationNetwork(cfg, rng)
        self.object_net = ObjectNetwork(cfg, rng)
        self.mixture = MixtureNetwork(cfg, rng)

    # spec-facing entry points -------------------------------------------------

    def backbone_encode(self, patch: nn.Tensor, which: str) -> nn.Tensor:
        if which == "hand":
            return self.hand_backbone(patch)
        if which == "object":
            return self.object_backbone(patch)
        raise ValueError(f"which must be 'hand' or 'object', got {which!r}")

    def local_forward(self, hand_feature):
        return self.local(hand_feature)

    def relation_forward(self, hand_feature, object_feature):
        return self.relation(hand_feature, object_feature)

    def object_forward(self, object_feature):
        return self.object_net(object_feature)

    def mixture_forward(self, grasp_embedding, curvature_pred, interaction,
                        object_embedding, global_feature, train=False, rng=None):
        return self.mixture(grasp_embedding, curvature_pred, interaction,
                            object_embedding, global_feature, train=train, rng=rng)

    def forward(self, hand, obj, obj_present, global_feat, train=False, rng=None):
        """Full forward over a batch.

        hand/obj: (B, C, P, P) tensors; obj_present: (B,) 0/1 constants used
        to zero object features for frames without an object box.
        """
        hand_feat = self.hand_backbone(hand)
        obj_feat = self.object_backbone(obj)
        if obj_present is not None:
            obj_feat = nn.mul(obj_feat, nn.Tensor(obj_present[:, None]))
        grasp_logits, curvature_pred, grasp_emb = self.local(hand_feat)
        interaction = self.relation(hand_feat, obj_feat)
        object_logits, object_emb = self.object_net(obj_feat)
        embedding, action_logits = self.mixture(
            grasp_emb, curvature_pred, interaction, object_emb, global_feat,
            train=train, rng=rng)
        return {
            "grasp_logits": grasp_logits,
            "curvature_pred": curvature_pred,
            "grasp_embedding": grasp_emb,
            "interaction": interaction,
            "object_logits": object_logits,
            "object_embedding": object_emb,
            "embedding": embedding,
            "action_logits": action_logits,
        }

    # parameter bookkeeping ----------------------------------------------------

    def local_params(self):
        return self.hand_backbone.params() + self.local.params()

    def object_params(self):
        return self.object_backbone.params() + self.object_net.params()

    def params(self):
        return (self.local_params() + self.object_params()
                + self.relation.params() + self.mixture.params())

    def named_params(self):
        return {p.name: p for p in self.params()}


# ---------------------------------------------------------------------------
# losses (Eq. 1-3 realizations)
# ---------------------------------------------------------------------------

def loss_object(object_logits: nn.Tensor, y_object) -> nn.Tensor:
    return nn.softmax_cross_entropy(object_logits, y_object)


def loss_local(grasp_logits: nn.Tensor, y_grasp, curvature_pred,
               curvature_target, boundary_mask, weights: LossWeights) -> nn.Tensor:
    """Grasp CE plus alpha * masked squared curvature error."""
    ce = nn.softmax_cross_entropy(grasp_logits, y_grasp)
    if curvature_pred is None:
        return ce
    sq = nn.l2_loss(curvature_pred, curvature_target, boundary_mask)
    return ce + weights.alpha * sq


def loss_action_frame(frame_action_logits: nn.Tensor, y_action,
                      l_object: nn.Tensor, l_local: nn.Tensor,
                      weights: LossWeights) -> nn.Tensor:
    """Action CE + beta * object loss + kappa * local loss."""
    ce = nn.softmax_cross_entropy(frame_action_logits, y_action)
    return ce + weights.beta * l_object + weights.kappa * l_local


# ---------------------------------------------------------------------------
# patch augmentation
# ---------------------------------------------------------------------------

def _hue_rotation_matrix(angle):
    """RGB hue rotation around the gray axis."""
    c, s = np.cos(angle), np.sin(angle)
    one_third = 1.0 / 3.0
    sq = np.sqrt(1.0 / 3.0)
    m = np.full((3, 3), one_third * (1.0 - c))
    m += c * np.eye(3)
    off = sq * s
    m += off * np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])
    return m


def augment_patch(patch: np.ndarray, rng, color_jitter: float = 0.5,
                  geometry_jitter: float = 0.1, enabled: bool = True) -> np.ndarray:
    """Random hue/saturation/exposure within +-color_jitter and
    translation/rotation within +-geometry_jitter of the patch extent.

    patch is (C, H, W) in [0, 1]; disabled or zero-magnitude augmentation
    returns the input unchanged.
    """
    if not enabled or (color_jitter == 0.0 and geometry_jitter == 0.0):
        return patch
    c, h, w = patch.shape
    img = patch.transpose(1, 2, 0).astype(np.float64)

    if color_jitter > 0.0:
        exposure = 1.0 + rng.uniform(-color_jitter, color_jitter)
        sat = 1.0 + rng.uniform(-color_jitter, color_jitter)
        hue = rng.uniform(-color_jitter, color_jitter) * (np.pi / 3.0)
        if c == 3:
            img = img @ _hue_rotation_matrix(hue).T
            gray = img.mean(axis=2, keepdims=True)
            img = gray + sat * (img - gray)
        img = img * exposure

    if geometry_jitter > 0.0:
        angle = rng.uniform(-geometry_jitter, geometry_jitter) * np.pi
        tx = rng.uniform(-geometry_jitter, geometry_jitter) * w
        ty = rng.uniform(-geometry_jitter, geometry_jitter) * h
        yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
        ca, sa = np.cos(angle), np.sin(angle)
        u = ca * (xx - cx) - sa * (yy - cy) + cx - tx
        v = sa * (xx - cx) + ca * (yy - cy) + cy - ty
        u = np.clip(u, 0, w - 1)
        v = np.clip(v, 0, h - 1)
        u0 = np.floor(u).astype(int)
        v0 = np.floor(v).astype(int)
        u1 = np.minimum(u0 + 1, w - 1)
        v1 = np.minimum(v0 + 1, h - 1)
        fu = (u - u0)[..., None]
        fv = (v - v0)[..., None]
        img = ((img[v0, u0] * (1 - fu) + img[v0, u1] * fu) * (1 - fv)
               + (img[v1, u0] * (1 - fu) + img[v1, u1] * fu) * fv)

    return np.clip(img, 0.0, 1.0).transpose(2, 0, 1)


# ---------------------------------------------------------------------------
# corpus loading
# ---------------------------------------------------------------------------

@dataclass
class CorpusMeta:
    n_actions: int
    n_grasp_types: int
    n_objects: int
    episodes_per_action: int
    frames_per_episode: int
    scene_size: int
    patch_size: int
    noise_level: float
    seed: int


def read_corpus_meta(corpus_dir) -> CorpusMeta:
    values = {}
    with open(os.path.join(corpus_dir, "corpus.cfg"), "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, val = (part.strip() for part in line.split("=", 1))
            values[key] = val
    return CorpusMeta(
        n_actions=int(values["n_actions"]),
        n_grasp_types=int(values["n_grasp_types"]),
        n_objects=int(values["n_objects"]),
        episodes_per_action=int(values["episodes_per_action"]),
        frames_per_episode=int(values["frames_per_episode"]),
        scene_size=int(values["scene_size"]),
        patch_size=int(values["patch_size"]),
        noise_level=float(values["noise_level"]),
        seed=int(values["seed"]),
    )


@dataclass
class CorpusData:
    """Whole corpus in memory, frames flat, episodes as index ranges."""
    meta: CorpusMeta
    episode_ids: list
    ep_action: np.ndarray          # (E,)
    ep_slices: list                # per episode: (start, end) into frame arrays
    train_ep: np.ndarray           # indices into episodes
    test_ep: np.ndarray
    hand: np.ndarray               # (N, C, P, P)
    obj: np.ndarray                # (N, C, P, P)
    obj_present: np.ndarray        # (N,)
    global_feat: np.ndarray        # (N, G)
    y_grasp: np.ndarray            # (N,)
    y_object: np.ndarray           # (N,)
    y_action: np.ndarray           # (N,)
    curvature: dict                # kind -> (N, V)
    boundary_mask: np.ndarray      # (V,)

    def frames_of(self, ep_indices):
        return np.concatenate([np.arange(*self.ep_slices[e]) for e in ep_indices])


def load_corpus(corpus_dir, kinds=("mean",), patch_size=32) -> CorpusData:
    """Read manifest, images and meshes; compute curvature targets.

    Curvature targets always come from the curvature operators applied to
    the stored mesh files of each frame.
    """
    meta = read_corpus_meta(corpus_dir)
    records = det.read_manifest(os.path.join(corpus_dir, "manifest.txt"))
    groups = det.episodes_of(records)
    episode_ids = sorted(groups)

    def read_ids(name):
        with open(os.path.join(corpus_dir, name), "r", encoding="utf-8") as fh:
            return {line.strip() for line in fh if line.strip()}

    train_ids = read_ids("split_train.txt")
    test_ids = read_ids("split_test.txt")

    kinds = tuple(k for k in kinds if k != "none")
    n = len(records)
    first = records[0]
    base = os.path.dirname(os.path.abspath(os.path.join(corpus_dir, "manifest.txt")))

    template = meshmod.load_mesh(os.path.join(base, first.mesh_path))
    adj = meshmod.build_adjacency(template)
    vdim = template.n_vertices
    boundary_mask = adj.boundary.copy()

    hand = np.empty((n, 3, patch_size, patch_size))
    obj = np.empty((n, 3, patch_size, patch_size))
    obj_present = np.zeros(n)
    global_feat = np.empty((n, det.GLOBAL_FEATURE_DIM))
    y_grasp = np.empty(n, dtype=np.int64)
    y_object = np.empty(n, dtype=np.int64)
    y_action = np.empty(n, dtype=np.int64)
    curvature = {k: np.empty((n, vdim)) for k in kinds}

    ep_action = np.empty(len(episode_ids), dtype=np.int64)
    ep_slices = []
    i = 0
    for e, eid in enumerate(episode_ids):
        frames = groups[eid]
        ep_action[e] = frames[0].action_id
        start = i
        for rec in frames:
            image = det.read_image(os.path.join(base, rec.image_path))
            d = det.oracle_detect(rec)
            hand_box = det.resolve_primary_hand(d)
            hand[i] = det.crop_and_resize(image, hand_box, patch_size).transpose(2, 0, 1)
            if d.objects:
                obj[i] = det.crop_and_resize(image, d.objects[0], patch_size).transpose(2, 0, 1)
                obj_present[i] = 1.0
            else:
                obj[i] = 0.0
            global_feat[i] = det.global_feature(image, d)
            y_grasp[i] = rec.grasp_id
            y_object[i] = rec.object_id
            y_action[i] = rec.action_id
            if kinds:
                mesh = meshmod.load_mesh(os.path.join(base, rec.mesh_path))
                fields = _curvature_fields(mesh, adj, kinds)
                for k in kinds:
                    curvature[k][i] = fields[k]
            i += 1
        ep_slices.append((start, i))

    train_ep = np.array([e for e, eid in enumerate(episode_ids) if eid in train_ids])
    test_ep = np.array([e for e, eid in enumerate(episode_ids) if eid in test_ids])
    return CorpusData(meta=meta, episode_ids=episode_ids, ep_action=ep_action,
                      ep_slices=ep_slices, train_ep=train_ep, test_ep=test_ep,
                      hand=hand, obj=obj, obj_present=obj_present,
                      global_feat=global_feat, y_grasp=y_grasp, y_object=y_object,
                      y_action=y_action, curvature=curvature,
                      boundary_mask=boundary_mask)


def _curvature_fields(mesh, adj, kinds):
    out = {}
    need_h = any(k in ("mean", "maximum", "minimum") for k in kinds)
    need_k = any(k in ("gaussian", "maximum", "minimum") for k in kinds)
    h = curv.mean_curvature(mesh, adj).values if need_h else None
    k = curv.gaussian_curvature(mesh, adj).values if need_k else None
    for kind in kinds:
        if kind == "mean":
            out[kind] = h
        elif kind == "gaussian":
            out[kind] = k
        else:
            disc = np.sqrt(np.maximum(h * h - k, 0.0))
            interior = ~adj.boundary
            val = np.where(interior, h + disc if kind == "maximum" else h - disc, 0.0)
            out[kind] = val
    return out


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    seed: int = 0
    stage_a_epochs: int = 20
    stage_b_epochs: int = 12
    stage_c_epochs: int = 40
    lr_local: float = 0.0004       # hand-network default
    lr_object: float = 0.0004
    lr_joint: float = 0.0004
    lr_temporal: float = 0.001     # halved every halving_period epochs
    halving_period: int = 50
    batch_frames: int = 64
    batch_episodes: int = 64
    augment: bool = False
    color_jitter: float = 0.5
    geometry_jitter: float = 0.1
    detector_noise: float = 0.0
    float32: bool = True
    weights: LossWeights = field(default_factory=LossWeights)


METRICS_COLUMNS = ("stage", "epoch", "loss", "grasp_acc", "object_acc",
                   "action_acc", "video_acc")


def metrics_row(stage, epoch, loss, grasp_acc="", object_acc="", action_acc="",
                video_acc=""):
    fmt = lambda x: repr(float(x)) if x != "" else ""
    return {"stage": stage, "epoch": epoch, "loss": fmt(loss),
            "grasp_acc": fmt(grasp_acc), "object_acc": fmt(object_acc),
            "action_acc": fmt(action_acc), "video_acc": fmt(video_acc)}


def write_metrics_csv(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(str(row[c]) for c in METRICS_COLUMNS) + "\n")


def _check_finite(loss_value, stage, epoch):
    if not np.isfinite(loss_value):
        raise NonFiniteLoss(f"stage {stage} epoch {epoch}: loss {loss_value}")


def _batches(n_items, batch_size, rng):
    order = rng.permutation(n_items)
    for s in range(0, n_items, batch_size):
        yield order[s:s + batch_size]


class _FrameBatcher:
    """Slices corpus frame arrays into model inputs."""

    def __init__(self, data: CorpusData, cfg: PipelineConfig, tcfg: TrainConfig):
        self.data = data
        self.cfg = cfg
        self.tcfg = tcfg
        kind = cfg.curvature_kind
        self.curv = data.curvature.get(kind) if kind != "none" else None
        self.mask = data.boundary_mask if self.curv is not None else None

    def make(self, idx, train=False, rng=None):
        d = self.data
        hand = d.hand[idx]
        obj = d.obj[idx]
        if train and self.tcfg.augment:
            hand = np.stack([augment_patch(p, rng, self.tcfg.color_jitter,
                                           self.tcfg.geometry_jitter) for p in hand])
            obj = np.stack([augment_patch(p, rng, self.tcfg.color_jitter,
                                          self.tcfg.geometry_jitter) for p in obj])
        # zero-centered pixels condition the conv encoders
        batch = {
            "hand": nn.Tensor(hand - 0.5),
            "obj": nn.Tensor(obj - 0.5),
            "obj_present": d.obj_present[idx],
            "global_feat": nn.Tensor(d.global_feat[idx]),
            "y_grasp": d.y_grasp[idx],
            "y_object": d.y_object[idx],
            "y_action": d.y_action[idx],
            "curv": self.curv[idx] if self.curv is not None else None,
            "mask": self.mask,
        }
        return batch


def _local_loss_on(gen, batch, weights):
    feat = gen.hand_backbone(batch["hand"])
    grasp_logits, curvature_pred, _ = gen.local(feat)
    return loss_local(grasp_logits, batch["y_grasp"], curvature_pred,
                      batch["curv"], batch["mask"], weights), grasp_logits


def _object_loss_on(gen, batch):
    feat = gen.object_backbone(batch["obj"])
    logits, _ = gen.object_net(feat)
    return loss_object(logits, batch["y_object"]), logits


def _joint_loss_on(gen, batch, weights, train, rng):
    out = gen.forward(batch["hand"], batch["obj"], batch["obj_present"],
                      batch["global_feat"], train=train, rng=rng)
    l_obj = loss_object(out["object_logits"], batch["y_object"])
    l_loc = loss_local(out["grasp_logits"], batch["y_grasp"],
                       out["curvature_pred"], batch["curv"], batch["mask"], weights)
    total = loss_action_frame(out["action_logits"], batch["y_action"],
                              l_obj, l_loc, weights)
    return total, out


def train_stages(data: CorpusData, cfg: PipelineConfig, tcfg: TrainConfig,
                 out_dir=None, stages=("local", "object", "joint", "temporal"),
                 generator=None, temporal_model=None):
    """Run the staged protocol and return (generator, temporal, metrics rows).

    Stage A trains the local network on its composite loss and the object
    network on cross entropy, independently. Stage B adds the mixture
    network and refines everything on the frame action loss. Stage C
    freezes the generator (its parameters are never handed to the
    optimizer) and trains the temporal model on the sequence loss.
    """
    from . import temporal as temporal_mod

    mode = "train" if tcfg.float32 else "test"
    with nn.precision(mode):
        if generator is None:
            generator = FrameEmbeddingGenerator(cfg, np.random.default_rng(cfg.seed))
        batcher = _FrameBatcher(data, cfg, tcfg)
        rng = np.random.default_rng(tcfg.seed)
        weights = tcfg.weights
        rows = []
        train_frames = data.frames_of(data.train_ep)

        if "local" in stages:
            params = generator.local_params()
            sched = nn.SgdSchedule(tcfg.lr_local, tcfg.halving_period)
            for epoch in range(tcfg.stage_a_epochs):
                total, correct, seen = 0.0, 0, 0
                for idx in _batches(len(train_frames), tcfg.batch_frames, rng):
                    batch = batcher.make(train_frames[idx], train=True, rng=rng)
                    loss, logits = _local_loss_on(generator, batch, weights)
                    _check_finite(loss.item(), "local", epoch)
                    loss.backward()
                    nn.sgd_step(params, sched, epoch)
                    total += loss.item() * len(idx)
                    correct += int((logits.data.argmax(1) == batch["y_grasp"]).sum())
                    seen += len(idx)
                rows.append(metrics_row("local", epoch, total / seen,
                                        grasp_acc=correct / seen))

        if "object" in stages:
            params = generator.object_params()
            sched = nn.SgdSchedule(tcfg.lr_object, tcfg.halving_period)
            for epoch in range(tcfg.stage_a_epochs):
                total, correct, seen = 0.0, 0, 0
                for idx in _batches(len(train_frames), tcfg.batch_frames, rng):
                    batch = batcher.make(train_frames[idx], train=True, rng=rng)
                    loss, logits = _object_loss_on(generator, batch)
                    _check_finite(loss.item(), "object", epoch)
                    loss.backward()
                    nn.sgd_step(params, sched, epoch)
                    total += loss.item() * len(idx)
                    correct += int((logits.data.argmax(1) == batch["y_object"]).sum())
                    seen += len(idx)
                rows.append(metrics_row("object", epoch, total / seen,
                                        object_acc=correct / seen))

        if "joint" in stages:
            params = generator.params()
            sched = nn.SgdSchedule(tcfg.lr_joint, tcfg.halving_period)
            for epoch in range(tcfg.stage_b_epochs):
                total, correct, seen = 0.0, 0, 0
                for idx in _batches(len(train_frames), tcfg.batch_frames, rng):
                    batch = batcher.make(train_frames[idx], train=True, rng=rng)
                    loss, out = _joint_loss_on(generator, batch, weights,
                                               train=True, rng=rng)
                    _check_finite(loss.item(), "joint", epoch)
                    loss.backward()
                    nn.sgd_step(params, sched, epoch)
                    total += loss.item() * len(idx)
                    correct += int((out["action_logits"].data.argmax(1)
                                    == batch["y_action"]).sum())
                    seen += len(idx)
                rows.append(metrics_row("joint", epoch, total / seen,
                                        action_acc=correct / seen))

        if "temporal" in stages:
            if out_dir is not None:
                nn.save_checkpoint(os.path.join(out_dir, "generator_pre_temporal.ckpt"),
                                   generator.named_params())
            tmcfg = temporal_mod.TemporalConfig(n_actions=cfg.n_actions,
                                                input_dim=cfg.embed_dim)
            if temporal_model is None:
                temporal_model = temporal_mod.TemporalModel(
                    tmcfg, np.random.default_rng(cfg.seed + 1))
            train_emb = embed_episodes(generator, data, cfg, tcfg, data.train_ep)
            sched = nn.SgdSchedule(tcfg.lr_temporal, tcfg.halving_period)
            params = temporal_model.params()
            y_ep = data.ep_action[data.train_ep]
            for epoch in range(tcfg.stage_c_epochs):
                total, correct, seen = 0.0, 0, 0
                for idx in _batches(len(data.train_ep), tcfg.batch_episodes, rng):
                    seq = [nn.Tensor(train_emb[idx, t]) for t in range(train_emb.shape[1])]
                    pred = temporal_model.forward_steps(seq)
                    loss = temporal_mod.loss_action_temporal(pred, y_ep[idx])
                    _check_finite(loss.item(), "temporal", epoch)
                    loss.backward()
                    nn.sgd_step(params, sched, epoch)
                    total += loss.item() * len(idx)
                    correct += int((pred.video_logits.data.argmax(1) == y_ep[idx]).sum())
                    seen += len(idx)
                rows.append(metrics_row("temporal", epoch, total / seen,
                                        video_acc=correct / seen))
            if out_dir is not None:
                nn.save_checkpoint(os.path.join(out_dir, "generator_post_temporal.ckpt"),
                                   generator.named_params())

    return generator, temporal_model, rows


def frame_sample(data: CorpusData, index: int, kind: str = "mean") -> FrameSample:
    """Assemble one frame's FrameSample from the loaded corpus arrays."""
    curv_target = (data.curvature[kind][index] if kind != "none"
                   else np.zeros(0))
    return FrameSample(
        hand_patch=data.hand[index],
        object_patch=data.obj[index] if data.obj_present[index] else None,
        global_feature=data.global_feat[index],
        grasp_id=int(data.y_grasp[index]),
        object_id=int(data.y_object[index]),
        action_id=int(data.y_action[index]),
        curvature_target=curv_target,
        boundary_mask=data.boundary_mask,
        n_grasp_types=data.meta.n_grasp_types,
        n_objects=data.meta.n_objects,
        n_actions=data.meta.n_actions)


def frame_embedding(generator: FrameEmbeddingGenerator,
                    sample: FrameSample) -> FrameEmbedding:
    """Run the generator on a single frame and package its embedding."""
    hand = nn.Tensor((sample.hand_patch - 0.5)[None])
    if sample.object_patch is not None:
        obj = nn.Tensor((sample.object_patch - 0.5)[None])
        present = np.ones(1)
    else:
        obj = nn.Tensor(np.zeros((1,) + sample.hand_patch.shape) - 0.5)
        present = np.zeros(1)
    out = generator.forward(hand, obj, present,
                            nn.Tensor(sample.global_feature[None]), train=False)
    return FrameEmbedding(vector=out["embedding"].data[0].copy(),
                          action_logits=out["action_logits"].data[0].copy())


def embed_episodes(generator, data: CorpusData, cfg: PipelineConfig,
                   tcfg: TrainConfig, ep_indices) -> np.ndarray:
    """Frame embeddings for whole episodes, eval mode -> (E, N, embed_dim)."""
    batcher = _FrameBatcher(data, cfg, tcfg)
    n_frames = data.meta.frames_per_episode
    eps = np.asarray(ep_indices)
    idx = data.frames_of(eps)
    chunks = []
    for s in range(0, len(idx), 256):
        batch = batcher.make(idx[s:s + 256])
        res = generator.forward(batch["hand"], batch["obj"], batch["obj_present"],
                                batch["global_feat"], train=False)
        chunks.append(res["embedding"].data)
    flat = np.concatenate(chunks, axis=0)
    return flat.reshape(len(eps), n_frames, generator.cfg.embed_dim)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class FrameMetrics:
    grasp_acc: float
    object_acc: float
    action_acc: float
    curvature_mse: float
    curvature_r2: float
    grasp_confusion: np.ndarray


def evaluate_frames(generator, data: CorpusData, cfg: PipelineConfig,
                    tcfg: TrainConfig, ep_indices) -> FrameMetrics:
    batcher = _FrameBatcher(data, cfg, tcfg)
    idx = data.frames_of(ep_indices)
    n_grasp = cfg.n_grasp_types
    confusion = np.zeros((n_grasp, n_grasp), dtype=np.int64)
    correct_g = correct_o = correct_a = 0
    sse = 0.0
    targets_sum = 0.0
    targets_sqsum = 0.0
    n_curv_entries = 0
    for s in range(0, len(idx), 256):
        sub = idx[s:s + 256]
        batch = batcher.make(sub)
        out = generator.forward(batch["hand"], batch["obj"], batch["obj_present"],
                                batch["global_feat"], train=False)
        pg = out["grasp_logits"].data.argmax(1)
        correct_g += int((pg == batch["y_grasp"]).sum())
        correct_o += int((out["object_logits"].data.argmax(1) == batch["y_object"]).sum())
        correct_a += int((out["action_logits"].data.argmax(1) == batch["y_action"]).sum())
        np.add.at(confusion, (batch["y_grasp"], pg), 1)
        if out["curvature_pred"] is not None and batch["curv"] is not None:
            keep = ~data.boundary_mask
            diff = out["curvature_pred"].data[:, keep] - batch["curv"][:, keep]
            sse += float((diff * diff).sum())
            t = batch["curv"][:, keep]
            targets_sum += float(t.sum())
            targets_sqsum += float((t * t).sum())
            n_curv_entries += t.size
    n = len(idx)
    if n_curv_entries:
        mse = sse / n_curv_entries
        mean = targets_sum / n_curv_entries
        sst = targets_sqsum - n_curv_entries * mean * mean
        r2 = 1.0 - sse / sst if sst > 0 else 0.0
    else:
        mse, r2 = float("nan"), float("nan")
    return FrameMetrics(grasp_acc=correct_g / n, object_acc=correct_o / n,
                        action_acc=correct_a / n, curvature_mse=mse,
                        curvature_r2=r2, grasp_confusion=confusion)


# ---------------------------------------------------------------------------
# curvature-kind ablation
# ---------------------------------------------------------------------------

ABLATION_KINDS = ("mean", "gaussian", "maximum", "minimum", "none")


def run_ablation(data: CorpusData, cfg: PipelineConfig, tcfg: TrainConfig,
                 kinds=ABLATION_KINDS):
    """Train one pipeline variant per curvature kind; report test accuracy.

    Returns a list of dicts (kind, video_acc, grasp_acc, action_acc). Each
    variant re-seeds identically, so the table is reproducible bit for bit
    under a fixed seed.
    """
    from . import temporal as temporal_mod

    results = []
    for kind in kinds:
        vcfg = replace(cfg, curvature_kind=kind)
        gen, tmodel, _ = train_stages(data, vcfg, tcfg)
        with nn.precision("train" if tcfg.float32 else "test"):
            fm = evaluate_frames(gen, data, vcfg, tcfg, data.test_ep)
            emb = embed_episodes(gen, data, vcfg, tcfg, data.test_ep)
            video_acc = temporal_mod.video_accuracy(
                tmodel, emb, data.ep_action[data.test_ep])
        results.append({"kind": kind, "video_acc": video_acc,
                        "grasp_acc": fm.grasp_acc, "action_acc": fm.action_acc})
    return results


def write_ablation_csv(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("kind,video_acc,grasp_acc,action_acc\n")
        for r in rows:
            fh.write(f"{r['kind']},{r['video_acc']!r},{r['grasp_acc']!r},"
                     f"{r['action_acc']!r}\n")
