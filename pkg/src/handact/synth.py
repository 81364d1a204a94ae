"""Deterministic synthetic corpus generator and mesh primitives.

Everything here is seed-driven: analytic test meshes (icosphere, grid,
cylinder), the 778-vertex deformable hand-blob template, and the desk-scale
corpus of episodes whose images, boxes, grasp scripts and per-frame meshes
are all decodable by construction. Curvature regression targets are always
computed by the curvature operators on the emitted mesh, never faked.
"""

import hashlib
import os
import shutil
from dataclasses import dataclass

import numpy as np

from . import curvature as curv
from . import detection as det
from . import taxonomy as tax
from .errors import IoError
from .mesh import TriangleMesh, build_adjacency, edge_set, write_off

# ---------------------------------------------------------------------------
# analytic primitives
# ---------------------------------------------------------------------------

def icosphere(subdivisions: int, radius: float = 1.0) -> TriangleMesh:
    """Icosahedron subdivided `subdivisions` times, projected to a sphere.

    Faces are CCW seen from outside, so outward normals and positive mean
    curvature 1/radius.
    """
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)

    verts = list(verts / np.linalg.norm(verts[0]))
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for i, j, k in faces:
            ij, jk, ki = midpoint(i, j), midpoint(j, k), midpoint(k, i)
            new_faces += [[i, ij, ki], [j, jk, ij], [k, ki, jk], [ij, jk, ki]]
        faces = np.asarray(new_faces, dtype=np.int64)

    v = np.asarray(verts)
    v = v / np.linalg.norm(v, axis=1, keepdims=True) * radius
    return TriangleMesh(v, faces)


def plane_grid(nx: int, ny: int, spacing: float = 1.0) -> TriangleMesh:
    """Flat triangulated grid in the z=0 plane, normals along +z."""
    xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    verts = np.stack([xs.ravel() * spacing, ys.ravel() * spacing,
                      np.zeros(nx * ny)], axis=1)
    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a = i * ny + j
            b = (i + 1) * ny + j
            faces.append([a, b, b + 1])
            faces.append([a, b + 1, a + 1])
    return TriangleMesh(verts, np.asarray(faces, dtype=np.int64))


def cylinder(radius: float = 0.5, height: float = 4.0,
             segments: int = 48, rings: int = 33) -> TriangleMesh:
    """Open axis-aligned (z) cylinder tube with outward-facing normals."""
    thetas = 2.0 * np.pi * np.arange(segments) / segments
    zs = np.linspace(0.0, height, rings)
    verts = np.empty((rings * segments, 3))
    for j, z in enumerate(zs):
        base = j * segments
        verts[base:base + segments, 0] = radius * np.cos(thetas)
        verts[base:base + segments, 1] = radius * np.sin(thetas)
        verts[base:base + segments, 2] = z
    faces = []
    for j in range(rings - 1):
        for i in range(segments):
            a = j * segments + i
            b = j * segments + (i + 1) % segments
            c = (j + 1) * segments + (i + 1) % segments
            d = (j + 1) * segments + i
            faces.append([a, b, c])
            faces.append([a, c, d])
    return TriangleMesh(verts, np.asarray(faces, dtype=np.int64))


# ---------------------------------------------------------------------------
# deformable hand-blob template: 778 vertices, 1538 faces, open base
# ---------------------------------------------------------------------------

TEMPLATE_RINGS = 48
TEMPLATE_SEGMENTS = 16
TEMPLATE_EXTRA_SPLITS = 9   # 769 + 9 = 778 vertices; faces follow as 2V - B - 2
TEMPLATE_VERTICES = 778
TEMPLATE_FACES = 1538


def _split_longest_interior_edge(mesh):
    """Split the longest interior edge at its midpoint (two faces -> four)."""
    edges = edge_set(mesh)
    # boundary edges appear in exactly one face
    f = mesh.faces
    directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    und = np.sort(directed, axis=1)
    keys = und[:, 0] * mesh.n_vertices + und[:, 1]
    uniq, counts = np.unique(keys, return_counts=True)
    count_of = dict(zip(uniq.tolist(), counts.tolist()))

    lengths = np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)
    order = np.lexsort((edges[:, 1], edges[:, 0], -lengths))
    for idx in order:
        a, b = int(edges[idx, 0]), int(edges[idx, 1])
        if count_of[a * mesh.n_vertices + b] == 2:
            break
    else:
        raise ValueError("no interior edge to split")

    mid = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
    new_id = mesh.n_vertices
    new_faces = []
    for tri in mesh.faces:
        tri = tri.tolist()
        if a in tri and b in tri:
            # split in two, preserving winding: the midpoint replaces b in
            # one copy and a in the other
            new_faces.append([x if x != b else new_id for x in tri])
            new_faces.append([x if x != a else new_id for x in tri])
        else:
            new_faces.append(tri)
    verts = np.vstack([mesh.vertices, mid[None, :]])
    return TriangleMesh(verts, np.asarray(new_faces, dtype=np.int64))


def hand_template() -> TriangleMesh:
    """Capsule-like blob with the hand mesh's vertex/face budget.

    48 rings of 16 segments plus a tip apex give 769 vertices with a
    16-vertex open boundary (the wrist); nine midpoint edge splits bring the
    count to 778 vertices and 1538 faces.
    """
    segs, rings = TEMPLATE_SEGMENTS, TEMPLATE_RINGS
    thetas = 2.0 * np.pi * np.arange(segs) / segs
    # model units sized so curvature magnitudes stay O(1) or below: keeps the
    # curvature regression term commensurate with the cross-entropy terms
    height = 12.0
    r0 = 4.0
    verts = np.empty((rings * segs + 1, 3))
    for j in range(rings):
        s = j / (rings - 1)
        r = r0 * np.cos(0.4 * np.pi * s)       # tapers to ~0.31 r0 at the tip ring
        z = height * s
        base = j * segs
        verts[base:base + segs, 0] = r * np.cos(thetas)
        verts[base:base + segs, 1] = r * np.sin(thetas)
        verts[base:base + segs, 2] = z
    tip_r = r0 * np.cos(0.4 * np.pi)
    verts[-1] = [0.0, 0.0, height + tip_r]

    faces = []
    for j in range(rings - 1):
        for i in range(segs):
            a = j * segs + i
            b = j * segs + (i + 1) % segs
            c = (j + 1) * segs + (i + 1) % segs
            d = (j + 1) * segs + i
            faces.append([a, b, c])
            faces.append([a, c, d])
    apex = rings * segs
    top = (rings - 1) * segs
    for i in range(segs):
        faces.append([top + i, top + (i + 1) % segs, apex])

    mesh = TriangleMesh(verts, np.asarray(faces, dtype=np.int64))
    for _ in range(TEMPLATE_EXTRA_SPLITS):
        mesh = _split_longest_interior_edge(mesh)
    return mesh


def deform_template(template: TriangleMesh, grasp_id: int, phase: float,
                    amplitude: float = 1.0, noise: float = 0.0,
                    rng: np.random.Generator | None = None) -> TriangleMesh:
    """Deterministic radial deformation keyed by grasp type and frame phase.

    Each grasp type selects a family of angular/axial bump harmonics; the
    phase (0..1 through the episode) ramps their strength. `noise` adds a
    small seeded radial perturbation. Topology is untouched.
    """
    v = template.vertices.copy()
    x, y, z = v[:, 0], v[:, 1], v[:, 2]
    theta = np.arctan2(y, x)
    zmax = z.max()
    s = z / zmax

    g = int(grasp_id)
    # phase only ramps the strength, so the curvature field stays a function
    # of what a single frame's appearance can expose (grasp + magnitude)
    amp = amplitude * (0.85 + 0.15 * float(phase))
    m1 = 2 + (g % 3)            # angular harmonic
    m2 = 1 + (g % 4)            # axial harmonic
    ph = 2.0 * np.pi * (g * 0.137 % 1.0)
    bump = (0.22 * np.sin(m1 * theta + ph) * np.sin(np.pi * s)
            + 0.16 * np.cos(m2 * np.pi * s + 0.7 * ph)
            + 0.10 * np.sin((m1 + 1) * theta - 1.3 * ph) * np.sin(2.0 * np.pi * s))
    radial = 1.0 + amp * 0.5 * bump
    if noise > 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        # low-order harmonic noise: smooth fields keep the curvature
        # perturbation proportional to the radial perturbation (white
        # per-vertex noise would be amplified at the grid scale)
        coeff = rng.standard_normal(4)
        smooth = (coeff[0] * np.sin(theta + coeff[1]) * np.sin(np.pi * s)
                  + coeff[2] * np.cos(2.0 * theta + coeff[3]) * np.sin(2.0 * np.pi * s))
        radial = radial + noise * 0.5 * smooth
    radial = np.clip(radial, 0.35, 2.2)

    r_xy = np.hypot(x, y)
    scale = np.where(r_xy > 1e-9, radial, 1.0)
    v[:, 0] = x * scale
    v[:, 1] = y * scale
    # gentle axial squash so the tip also moves
    v[:, 2] = z * (1.0 + 0.08 * amp * np.sin(0.5 * np.pi * s + ph))
    return TriangleMesh(v, template.faces.copy())


# ---------------------------------------------------------------------------
# corpus generation
# ---------------------------------------------------------------------------

@dataclass
class GeneratorConfig:
    n_actions: int = 10
    n_grasp_types: int = 8
    n_objects: int = 5
    episodes_per_action: int = 20
    frames_per_episode: int = 16
    image_size: int = 64          # scene edge, pixels
    noise_level: float = 0.02
    seed: int = 0
    hand_box_px: int = 32
    object_box_px: int = 24
    train_fraction: float = 0.8
    amp_low: float = 0.6          # deformation scale of even-indexed actions
    amp_high: float = 1.8         # of their odd-indexed partners

    def __post_init__(self):
        if self.frames_per_episode < 2:
            raise ValueError("episodes need at least 2 frames")
        if self.n_grasp_types < 4:
            raise ValueError("scripts need at least 4 grasp types")
        if self.n_grasp_types > len(tax.load_taxonomy().types):
            raise ValueError("n_grasp_types exceeds the taxonomy size")
        if self.image_size < self.hand_box_px + self.object_box_px + 8:
            raise ValueError("scene too small for disjoint hand and object boxes")


@dataclass
class EpisodeManifest:
    """One generated episode: records plus the in-memory payloads."""
    episode_id: str
    action_id: int
    records: list                      # FrameRecord per frame
    annotation: tax.TransitionAnnotation
    images: list                       # (H, W, 3) float arrays
    meshes: list                       # TriangleMesh per frame

    @property
    def n_frames(self):
        return len(self.records)


def action_script(action_id: int, cfg: GeneratorConfig):
    """Deterministic (grasp script, deformation amplitude, object id).

    Actions pair up as (2k, 2k+1): both share the object and the grasp
    sequence, differing only in deformation amplitude, so the curvature
    pathway is the only thing separating them. Scripts overlap across
    pairs (one grasp serves several actions), so grasp type alone cannot
    determine the action.
    """
    g = cfg.n_grasp_types
    pair = action_id // 2
    script = (pair % g, (pair + 1) % g, (pair + 3) % g)
    amp = cfg.amp_low if action_id % 2 == 0 else cfg.amp_high
    object_id = pair % cfg.n_objects
    return script, amp, object_id


def generate_mesh_sequence(action_id: int, grasp_labels, cfg: GeneratorConfig,
                           rng=None, template=None):
    """Per-frame deformed meshes for an episode's grasp labels."""
    if template is None:
        template = hand_template()
    _, amp, _ = action_script(action_id, cfg)
    n = len(grasp_labels)
    meshes = []
    for t, g in enumerate(grasp_labels):
        phase = t / (n - 1) if n > 1 else 0.0
        meshes.append(deform_template(template, int(g), phase, amplitude=amp,
                                      noise=cfg.noise_level, rng=rng))
    return meshes


# fixed affine from the curvature deviation magnitude (RMS of H minus the
# template's H over interior vertices) to the hand-patch brightness factor
_CURV_BRIGHT_SPAN = 0.25


def _brightness_of(curv_rms):
    x = np.clip(curv_rms / _CURV_BRIGHT_SPAN, 0.0, 1.0)
    return 0.80 + 0.28 * x


def curvature_deviation(h_values, h_template, interior):
    """Scalar deformation magnitude: RMS of the mean-curvature change."""
    d = h_values[interior] - h_template[interior]
    return float(np.sqrt(np.mean(d * d)))


def _grasp_tint(g):
    h = 2.0 * np.pi * ((g * 0.61803) % 1.0)
    return np.clip(0.62 + 0.38 * np.cos(h + np.array([0.0, 2.1, 4.2])), 0.0, 1.0)


def _object_tint(o):
    h = 2.0 * np.pi * ((o * 0.7548 + 0.31) % 1.0)
    return np.clip(0.60 + 0.40 * np.cos(h + np.array([0.0, 2.1, 4.2])), 0.0, 1.0)


def hand_patch_pattern(size: int, grasp_id: int, n_grasp_types: int,
                       brightness: float) -> np.ndarray:
    """Oriented stripes keyed to the grasp type, scaled by the curvature
    brightness factor."""
    g = int(grasp_id)
    u, v = np.meshgrid(np.arange(size) / size, np.arange(size) / size,
                       indexing="xy")
    angle = np.pi * g / max(n_grasp_types, 1)
    freq = 2 + (g % 4)
    stripes = np.sin(2.0 * np.pi * freq * (u * np.cos(angle) + v * np.sin(angle)))
    base = 0.52 + 0.30 * stripes
    patch = base[:, :, None] * _grasp_tint(g)[None, None, :] * brightness
    return np.clip(patch, 0.0, 1.0)


def object_patch_pattern(size: int, object_id: int) -> np.ndarray:
    """Checker-plus-ring pattern keyed to the object id."""
    o = int(object_id)
    cell = 3 + (o % 3)
    ii, jj = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    checker = ((ii // cell + jj // cell) % 2).astype(np.float64)
    r = np.hypot(ii - (size - 1) / 2.0, jj - (size - 1) / 2.0) / size
    ring = 0.5 + 0.5 * np.sin(2.0 * np.pi * (2 + o % 2) * r)
    base = 0.30 + 0.42 * checker + 0.16 * ring
    patch = base[:, :, None] * _object_tint(o)[None, None, :]
    return np.clip(patch, 0.0, 1.0)


def _background(size, rng):
    gx = rng.uniform(0.08, 0.22)
    gy = rng.uniform(0.08, 0.22)
    base = rng.uniform(0.12, 0.30)
    ii, jj = np.meshgrid(np.arange(size) / size, np.arange(size) / size,
                         indexing="ij")
    img = base + gx * ii + gy * jj
    return np.clip(np.repeat(img[:, :, None], 3, axis=2), 0.0, 1.0)


def generate_episode(action_id: int, episode_index: int, cfg: GeneratorConfig,
                     rng: np.random.Generator, template=None,
                     adjacency=None, template_h=None) -> EpisodeManifest:
    """Build one episode: grasp script, meshes, rendered frames, boxes.

    All content is a deterministic function of the rng stream (seeded per
    episode by the corpus generator), the action id and the config.
    """
    if template is None:
        template = hand_template()
    if adjacency is None:
        adjacency = build_adjacency(template)
    if template_h is None:
        template_h = curv.mean_curvature(template, adjacency).values
    script, amp, object_id = action_script(action_id, cfg)
    n = cfg.frames_per_episode
    eid = f"a{action_id:02d}e{episode_index:03d}"

    if n >= 4:
        # transition frames: nominal thirds with +-1 frame of episode jitter
        t1 = max(1, n // 3 + int(rng.integers(-1, 2)))
        t2 = min(n - 1, max(t1 + 1, 2 * n // 3 + int(rng.integers(-1, 2))))
        entries = ((0, script[0]), (t1, script[1]), (t2, script[2]))
    else:
        # too few frames for three segments: one transition per frame
        entries = tuple((t, script[t]) for t in range(n))
    ann = tax.TransitionAnnotation(entries=entries)
    labels = tax.expand_transitions(ann, n)

    size = cfg.image_size
    hp, op = cfg.hand_box_px, cfg.object_box_px
    hand_x0 = size - hp - int(rng.integers(0, 3))
    hand_y0 = int(rng.integers(2, size - hp - 1))
    obj_x0 = 2 + int(rng.integers(0, 4))
    obj_y0 = int(rng.integers(2, size - op - 1))

    meshes = generate_mesh_sequence(action_id, labels, cfg, rng=rng,
                                    template=template)
    interior = ~adjacency.boundary

    records, images = [], []
    y_drift = 0
    for t in range(n):
        h_field = curv.mean_curvature(meshes[t], adjacency)
        brightness = _brightness_of(
            curvature_deviation(h_field.values, template_h, interior))

        y_drift = int(np.clip(y_drift + rng.integers(-1, 2), -2, 2))
        hy = int(np.clip(hand_y0 + y_drift, 0, size - hp))
        scene = _background(size, rng)
        scene[obj_y0:obj_y0 + op, obj_x0:obj_x0 + op] = \
            object_patch_pattern(op, object_id)
        scene[hy:hy + hp, hand_x0:hand_x0 + hp] = \
            hand_patch_pattern(hp, labels[t], cfg.n_grasp_types, brightness)
        if cfg.noise_level > 0.0:
            scene = np.clip(scene + rng.uniform(-cfg.noise_level, cfg.noise_level,
                                                scene.shape), 0.0, 1.0)
        images.append(scene)

        hand_box = det.BoundingBox(hand_x0 / size, hy / size, hp / size, hp / size,
                                   cls="hand", side="right")
        obj_box = det.BoundingBox(obj_x0 / size, obj_y0 / size, op / size, op / size,
                                  cls="object")
        records.append(det.FrameRecord(
            episode_id=eid, frame_idx=t,
            image_path=f"images/{eid}_{t:03d}.ppm",
            action_id=action_id, grasp_id=int(labels[t]), object_id=object_id,
            mesh_path=f"meshes/{eid}_{t:03d}.off",
            hand_r=hand_box, hand_l=None, obj=obj_box))

    return EpisodeManifest(episode_id=eid, action_id=action_id, records=records,
                           annotation=ann, images=images, meshes=meshes)


def _episode_rank(episode_id: str) -> str:
    return hashlib.md5(episode_id.encode()).hexdigest()


def generate_corpus(cfg: GeneratorConfig, out_dir) -> dict:
    """Write a full corpus: manifest, images, meshes, annotations, splits.

    Episodes are seeded independently (seed, action, episode), so any
    generation order produces identical output. The train/test split takes
    the hash-ordered first train_fraction of each action's episodes.
    Returns a small summary dict.
    """
    out_dir = str(out_dir)
    try:
        os.makedirs(out_dir, exist_ok=True)
        os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
        os.makedirs(os.path.join(out_dir, "meshes"), exist_ok=True)
        os.makedirs(os.path.join(out_dir, "annotations"), exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create corpus directory {out_dir}: {exc}") from exc

    template = hand_template()
    adjacency = build_adjacency(template)
    template_h = curv.mean_curvature(template, adjacency).values
    _assert_grasp_meshes_distinct(template, adjacency, cfg)

    all_records = []
    train_ids, test_ids = [], []
    for action in range(cfg.n_actions):
        eids = []
        for e in range(cfg.episodes_per_action):
            rng = np.random.default_rng([cfg.seed, action, e])
            ep = generate_episode(action, e, cfg, rng, template=template,
                                  adjacency=adjacency, template_h=template_h)
            for t, rec in enumerate(ep.records):
                det.write_image(os.path.join(out_dir, rec.image_path), ep.images[t])
                write_off(ep.meshes[t], os.path.join(out_dir, rec.mesh_path))
            tax.write_annotation(ep.annotation,
                                 os.path.join(out_dir, "annotations", f"{ep.episode_id}.tsv"))
            all_records.extend(ep.records)
            eids.append(ep.episode_id)
        ranked = sorted(eids, key=_episode_rank)
        n_train = round(cfg.train_fraction * len(ranked))
        train_ids.extend(ranked[:n_train])
        test_ids.extend(ranked[n_train:])

    det.write_manifest(all_records, os.path.join(out_dir, "manifest.txt"))
    for name, ids in (("split_train.txt", train_ids), ("split_test.txt", test_ids)):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            for eid in sorted(ids):
                fh.write(eid + "\n")
    shutil.copyfile(tax.resources.files("handact").joinpath("data/taxonomy_default.tsv"),
                    os.path.join(out_dir, "taxonomy.tsv"))
    with open(os.path.join(out_dir, "corpus.cfg"), "w", encoding="utf-8") as fh:
        fh.write(f"n_actions = {cfg.n_actions}\n"
                 f"n_grasp_types = {cfg.n_grasp_types}\n"
                 f"n_objects = {cfg.n_objects}\n"
                 f"episodes_per_action = {cfg.episodes_per_action}\n"
                 f"frames_per_episode = {cfg.frames_per_episode}\n"
                 f"scene_size = {cfg.image_size}\n"
                 f"patch_size = {cfg.hand_box_px}\n"
                 f"noise_level = {cfg.noise_level!r}\n"
                 f"seed = {cfg.seed}\n")
    return {"episodes": cfg.n_actions * cfg.episodes_per_action,
            "train": len(train_ids), "test": len(test_ids),
            "frames": len(all_records)}


_GRASP_MESH_DISTANCE_FLOOR = 1.0


def _assert_grasp_meshes_distinct(template, adjacency, cfg):
    """Generator contract: distinct grasp types deform to meshes whose mean
    curvature vectors are separated in L2."""
    fields = []
    interior = ~adjacency.boundary
    for g in range(cfg.n_grasp_types):
        mesh = deform_template(template, g, phase=0.5, amplitude=1.0, noise=0.0)
        fields.append(curv.mean_curvature(mesh, adjacency).values[interior])
    for a in range(len(fields)):
        for b in range(a + 1, len(fields)):
            dist = float(np.linalg.norm(fields[a] - fields[b]))
            if dist <= _GRASP_MESH_DISTANCE_FLOOR:
                raise AssertionError(
                    f"grasp types {a} and {b} produce near-identical curvature "
                    f"(L2 {dist:.3f} <= {_GRASP_MESH_DISTANCE_FLOOR})")


def corpus_digest(corpus_dir) -> str:
    """SHA-256 over every file's path and content (order-independent)."""
    corpus_dir = str(corpus_dir)
    digest = hashlib.sha256()
    entries = []
    for root, _, files in os.walk(corpus_dir):
        for name in files:
            path = os.path.join(root, name)
            entries.append(os.path.relpath(path, corpus_dir))
    for rel in sorted(entries):
        digest.update(rel.encode())
        with open(os.path.join(corpus_dir, rel), "rb") as fh:
            digest.update(fh.read())
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# brute-force decodability oracles
# ---------------------------------------------------------------------------

def _crop_px(image, box, size):
    ih, iw = image.shape[0], image.shape[1]
    x0 = int(round(box.x * iw))
    y0 = int(round(box.y * ih))
    return image[y0:y0 + size, x0:x0 + size]


def grasp_centroid_accuracy(corpus_dir) -> float:
    """Nearest-centroid grasp classification on the raw hand crops."""
    records = det.read_manifest(os.path.join(corpus_dir, "manifest.txt"))
    cfg_px = None
    patches, labels = [], []
    for rec in records:
        image = det.read_image(os.path.join(corpus_dir, rec.image_path))
        if cfg_px is None:
            cfg_px = int(round(rec.hand_r.w * image.shape[1]))
        patches.append(_crop_px(image, rec.hand_r, cfg_px).ravel())
        labels.append(rec.grasp_id)
    patches = np.asarray(patches)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    centroids = np.stack([patches[labels == c].mean(axis=0) for c in classes])
    d2 = ((patches[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    pred = classes[d2.argmin(axis=1)]
    return float((pred == labels).mean())


def object_centroid_accuracy(corpus_dir) -> float:
    records = det.read_manifest(os.path.join(corpus_dir, "manifest.txt"))
    cfg_px = None
    patches, labels = [], []
    for rec in records:
        if rec.obj is None:
            continue
        image = det.read_image(os.path.join(corpus_dir, rec.image_path))
        if cfg_px is None:
            cfg_px = int(round(rec.obj.w * image.shape[1]))
        patches.append(_crop_px(image, rec.obj, cfg_px).ravel())
        labels.append(rec.object_id)
    patches = np.asarray(patches)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    centroids = np.stack([patches[labels == c].mean(axis=0) for c in classes])
    d2 = ((patches[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    pred = classes[d2.argmin(axis=1)]
    return float((pred == labels).mean())


def action_script_accuracy(corpus_dir, cfg: GeneratorConfig) -> float:
    """Decode each episode's action by matching its grasp script and its
    curvature amplitude class against the generator's action table."""
    from .mesh import load_mesh

    records = det.read_manifest(os.path.join(corpus_dir, "manifest.txt"))
    groups = det.episodes_of(records)
    template = hand_template()
    adjacency = build_adjacency(template)
    interior = ~adjacency.boundary
    template_h = curv.mean_curvature(template, adjacency).values

    table = {}
    for a in range(cfg.n_actions):
        script, amp, _ = action_script(a, cfg)
        table[(script, amp)] = a
    amps = sorted({amp for (_, amp) in table})

    def deviation_of(mesh):
        h = curv.mean_curvature(mesh, adjacency).values
        return curvature_deviation(h, template_h, interior)

    correct = 0
    for eid, frames in groups.items():
        ann = tax.load_annotation(os.path.join(corpus_dir, "annotations", f"{eid}.tsv"))
        script = tuple(g for _, g in ann.entries)
        t_mid = len(frames) // 2
        observed = deviation_of(load_mesh(os.path.join(corpus_dir,
                                                       frames[t_mid].mesh_path)))
        phase = t_mid / (len(frames) - 1)
        g_mid = frames[t_mid].grasp_id
        # clean references at both amplitude classes for this grasp and phase
        refs = [deviation_of(deform_template(template, g_mid, phase,
                                             amplitude=amp, noise=0.0))
                for amp in amps]
        amp = amps[int(np.argmin([abs(observed - r) for r in refs]))]
        predicted = table.get((script, amp))
        correct += int(predicted == frames[0].action_id)
    return correct / len(groups)
