#!/usr/bin/env python3
"""Deterministic synthetic corpus generation and its decodability oracles.

Every label planted by the generator is recoverable from the emitted data
by a brute-force decoder: grasp types and object ids by nearest-centroid
matching on the raw crops, actions by matching the grasp script plus the
curvature amplitude class. A second generation with the same seed produces
a byte-identical directory.
"""

import sys
import tempfile
import time

from handact import synth


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="handact_")
    cfg = synth.GeneratorConfig(n_actions=4, n_grasp_types=5, n_objects=2,
                                episodes_per_action=5, frames_per_episode=8,
                                noise_level=0.0, seed=11)
    t0 = time.time()
    info = synth.generate_corpus(cfg, out)
    print(f"corpus at {out}")
    print(f"  {info['episodes']} episodes ({info['train']} train / {info['test']} test), "
          f"{info['frames']} frames, generated in {time.time() - t0:.1f} s")

    digest = synth.corpus_digest(out)
    print(f"  digest: {digest[:16]}...")

    print("\naction scripts (pairs share script and object, differ in amplitude):")
    for a in range(cfg.n_actions):
        script, amp, obj = synth.action_script(a, cfg)
        print(f"  action {a}: grasps {script}, amplitude {amp}, object {obj}")

    print("\nbrute-force decodability at zero noise:")
    print(f"  grasp nearest-centroid accuracy: {synth.grasp_centroid_accuracy(out):.3f}")
    print(f"  object nearest-centroid accuracy: {synth.object_centroid_accuracy(out):.3f}")
    print(f"  action script-match accuracy:     {synth.action_script_accuracy(out, cfg):.3f}")


if __name__ == "__main__":
    main()
