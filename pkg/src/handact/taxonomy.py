"""Grasp-type taxonomy, sparse transition annotations and label statistics.

The taxonomy is configuration, not code: a line-oriented TSV of
``id<TAB>name<TAB>category`` rows. The shipped default lists 36 types in
Feix-style power/precision/intermediate groups plus non-grasp (pre-grasp)
entries such as the flattened palm. Per-episode grasp labels are stored as
transition annotations (``frame_index<TAB>grasp_id`` rows) and expanded to
dense per-frame labels as a closed-left step function.
"""

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import BadCategory, DuplicateId, EmptyAnnotation, IndexOutOfRange

CATEGORIES = ("power", "precision", "intermediate", "non-grasp")


@dataclass(frozen=True)
class GraspType:
    id: int
    name: str
    category: str


@dataclass(frozen=True)
class Taxonomy:
    types: tuple

    @property
    def n_types(self):
        return len(self.types)

    def name_of(self, grasp_id):
        return self.types[grasp_id].name


def _validate_taxonomy(types):
    seen_ids = set()
    seen_names = set()
    for t in types:
        if t.id in seen_ids:
            raise DuplicateId(f"grasp id {t.id} appears twice")
        seen_ids.add(t.id)
        if t.name in seen_names:
            raise DuplicateId(f"grasp name {t.name!r} appears twice")
        seen_names.add(t.name)
        if t.category not in CATEGORIES:
            raise BadCategory(f"unknown category {t.category!r} for {t.name!r}")
    if sorted(seen_ids) != list(range(len(types))):
        raise DuplicateId("grasp ids must be contiguous from 0")
    if not any(t.category == "non-grasp" for t in types):
        raise BadCategory("taxonomy needs at least one non-grasp (pre-grasp) entry")


def load_taxonomy(path=None) -> Taxonomy:
    """Load a taxonomy TSV; with no path, the shipped 36-entry default."""
    if path is None:
        text = resources.files("handact").joinpath("data/taxonomy_default.tsv").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    types = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise BadCategory(f"expected id<TAB>name<TAB>category, got {line!r}")
        types.append(GraspType(id=int(parts[0]), name=parts[1], category=parts[2]))
    types.sort(key=lambda t: t.id)
    _validate_taxonomy(types)
    return Taxonomy(types=tuple(types))


def write_taxonomy(taxonomy: Taxonomy, path):
    with open(path, "w", encoding="utf-8") as fh:
        for t in taxonomy.types:
            fh.write(f"{t.id}\t{t.name}\t{t.category}\n")


# ---------------------------------------------------------------------------
# transition annotations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransitionAnnotation:
    """Sparse grasp labels: (frame_index, grasp_id) at each change point."""
    entries: tuple

    def __post_init__(self):
        if not self.entries:
            raise EmptyAnnotation("annotation has no entries")
        if self.entries[0][0] != 0:
            raise IndexOutOfRange("first transition must be at frame 0")
        prev_f, prev_g = self.entries[0]
        for f, g in self.entries[1:]:
            if f <= prev_f:
                raise IndexOutOfRange("transition frames must strictly increase")
            if g == prev_g:
                raise IndexOutOfRange("consecutive transitions must change grasp id")
            prev_f, prev_g = f, g


def expand_transitions(ann: TransitionAnnotation, n_frames: int) -> np.ndarray:
    """Dense labels: frame t gets the latest transition with index <= t."""
    if n_frames <= 0:
        raise IndexOutOfRange("episode needs at least one frame")
    last_f = ann.entries[-1][0]
    if last_f >= n_frames:
        raise IndexOutOfRange(f"transition at frame {last_f} outside 0..{n_frames - 1}")
    labels = np.empty(n_frames, dtype=np.int64)
    for f, g in ann.entries:
        labels[f:] = g
    return labels


def labels_to_transitions(labels) -> TransitionAnnotation:
    """Minimal annotation reproducing the labels (inverse of expansion)."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyAnnotation("no labels to annotate")
    entries = [(0, int(labels[0]))]
    for t in range(1, labels.size):
        if labels[t] != labels[t - 1]:
            entries.append((t, int(labels[t])))
    return TransitionAnnotation(entries=tuple(entries))


def load_annotation(path) -> TransitionAnnotation:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            f, g = line.split("\t")
            entries.append((int(f), int(g)))
    return TransitionAnnotation(entries=tuple(entries))


def write_annotation(ann: TransitionAnnotation, path):
    with open(path, "w", encoding="utf-8") as fh:
        for f, g in ann.entries:
            fh.write(f"{f}\t{g}\n")


# ---------------------------------------------------------------------------
# distribution statistics
# ---------------------------------------------------------------------------

@dataclass
class DistributionReport:
    """Corpus-level grasp label statistics.

    frames_per_type[g] counts frames labeled g; type_action_matrix[g, a]
    counts frames labeled g inside episodes of action a (so its row sums
    reproduce the histogram); avg_frames_per_video[g] averages a type's
    frame count over the episodes where it occurs at all.
    """
    frames_per_type: np.ndarray
    type_action_matrix: np.ndarray
    avg_frames_per_video: np.ndarray
    n_episodes: int


def label_statistics(episodes, n_types: int, n_actions: int) -> DistributionReport:
    """episodes: iterable of (action_id, per-frame label array)."""
    episodes = list(episodes)
    if not episodes:
        raise EmptyAnnotation("no episodes to summarize")
    hist = np.zeros(n_types, dtype=np.int64)
    matrix = np.zeros((n_types, n_actions), dtype=np.int64)
    occurrences = np.zeros(n_types, dtype=np.int64)
    per_video_total = np.zeros(n_types, dtype=np.int64)
    for action_id, labels in episodes:
        labels = np.asarray(labels, dtype=np.int64)
        counts = np.bincount(labels, minlength=n_types)
        hist += counts
        matrix[:, action_id] += counts
        present = counts > 0
        occurrences += present
        per_video_total += counts
    avg = np.divide(per_video_total, occurrences,
                    out=np.zeros(n_types, dtype=np.float64), where=occurrences > 0)
    return DistributionReport(frames_per_type=hist, type_action_matrix=matrix,
                              avg_frames_per_video=avg, n_episodes=len(episodes))


def write_statistics_csv(report: DistributionReport, histogram_path, matrix_path, averages_path):
    with open(histogram_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["grasp_id", "frames"])
        for g, n in enumerate(report.frames_per_type):
            w.writerow([g, int(n)])
    with open(matrix_path, "w", newline="") as fh:
        w = csv.writer(fh)
        n_actions = report.type_action_matrix.shape[1]
        w.writerow(["grasp_id"] + [f"action_{a}" for a in range(n_actions)])
        for g in range(report.type_action_matrix.shape[0]):
            w.writerow([g] + [int(x) for x in report.type_action_matrix[g]])
    with open(averages_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["grasp_id", "avg_frames_per_video"])
        for g, x in enumerate(report.avg_frames_per_video):
            w.writerow([g, repr(float(x))])
