#!/usr/bin/env python3
"""The grasp-type taxonomy and sparse transition annotations.

Grasp labels are stored as transition frames only (the frames where the
hand configuration changes) and expanded to dense per-frame labels as a
closed-left step function. Corpus-level statistics summarize how grasp
types distribute over frames and actions.
"""

import numpy as np

from handact import taxonomy as tax


def main():
    t = tax.load_taxonomy()
    print(f"default taxonomy: {t.n_types} hand types")
    by_cat = {}
    for g in t.types:
        by_cat.setdefault(g.category, []).append(g.name)
    for cat, names in by_cat.items():
        print(f"  {cat:>12} ({len(names):2d}): {', '.join(names[:4])}"
              + (", ..." if len(names) > 4 else ""))

    print("\ntransition annotation -> per-frame labels")
    ann = tax.TransitionAnnotation(entries=((0, 33), (4, 2), (9, 13)))
    labels = tax.expand_transitions(ann, 12)
    for f, g in ann.entries:
        print(f"  frame {f:2d}: switch to {t.name_of(g)!r}")
    print("  dense labels:", labels.tolist())
    recovered = tax.labels_to_transitions(labels)
    print("  minimal re-annotation matches:", recovered == ann)

    print("\ndistribution statistics over a toy corpus")
    rng = np.random.default_rng(0)
    episodes = []
    for action in range(3):
        for _ in range(4):
            segments = rng.choice(36, size=3, replace=False)
            labels = np.repeat(segments, (4, 5, 3))
            episodes.append((action, labels))
    report = tax.label_statistics(episodes, n_types=36, n_actions=3)
    used = np.nonzero(report.frames_per_type)[0]
    print(f"  episodes: {report.n_episodes}, frames: {report.frames_per_type.sum()}")
    print(f"  grasp types used: {used.tolist()}")
    print(f"  busiest type: {t.name_of(int(report.frames_per_type.argmax()))!r} "
          f"({report.frames_per_type.max()} frames)")
    row_sums_ok = np.array_equal(report.type_action_matrix.sum(axis=1),
                                 report.frames_per_type)
    print(f"  matrix row sums equal histogram: {row_sums_ok}")


if __name__ == "__main__":
    main()
