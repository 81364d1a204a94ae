"""Command-line harness: curvature export, corpus synthesis, staged
training, evaluation, the curvature-kind ablation and label statistics.

All commands share the flag vocabulary --config/--seed/--out/--corpus/
--checkpoint/--kind/--stage. Config files are ``key = value`` text with
one section per stage ([generator], [pipeline], [train]); command-line
flags override file values, and every run writes the resolved
configuration snapshot plus the tool version into the output directory.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import configparser
import os
import sys
from dataclasses import fields, replace

import numpy as np

from . import __version__
from . import nn
from . import temporal as temporal_mod
from . import curvature as curvmod
from . import detection as det
from . import mesh as meshmod
from . import pipeline as pl
from . import synth
from . import taxonomy as tax
from .errors import HandactError

KIND_ALIASES = {"mean": "mean", "gaussian": "gaussian", "max": "maximum",
                "min": "minimum", "none": "none"}


def _coerce(value: str, like):
    if isinstance(like, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if isinstance(like, tuple):
        return tuple(int(x) for x in value.split(","))
    return value


def load_config_file(path):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if path:
        if not os.path.exists(path):
            raise HandactError(f"config file not found: {path}")
        cp.read(path)
    return cp


def apply_section(cp, section, instance):
    """Override dataclass fields from a config section (file wins over
    dataclass defaults; flags are applied after this and win over both)."""
    if not cp.has_section(section):
        return instance
    updates = {}
    for f in fields(instance):
        if cp.has_option(section, f.name):
            current = getattr(instance, f.name)
            updates[f.name] = _coerce(cp.get(section, f.name), current)
    return replace(instance, **updates) if updates else instance


def write_resolved(out_dir, sections):
    """Snapshot of every resolved option, plus the tool version."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "resolved.cfg")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# handact {__version__}\n")
        for name, obj in sections.items():
            fh.write(f"[{name}]\n")
            if hasattr(obj, "__dataclass_fields__"):
                for f in fields(obj):
                    val = getattr(obj, f.name)
                    if isinstance(val, tuple):
                        val = ",".join(str(x) for x in val)
                    fh.write(f"{f.name} = {val}\n")
            else:
                for key, val in obj.items():
                    fh.write(f"{key} = {val}\n")
            fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_curvature(args):
    mesh = meshmod.load_mesh(args.mesh)
    adj = meshmod.build_adjacency(mesh)
    kind = KIND_ALIASES[args.kind]
    if kind == "none":
        raise HandactError("curvature export needs a concrete kind")
    field = curvmod.compute_curvature(mesh, adj, kind)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "curvature.csv")
    curvmod.write_curvature_csv(out_csv, field)
    write_resolved(args.out, {"curvature": {"mesh": args.mesh, "kind": args.kind,
                                            "out_csv": out_csv}})
    print(f"wrote {out_csv} ({mesh.n_vertices} vertices, kind={kind})")
    return 0


def _generator_config(args, cp):
    cfg = synth.GeneratorConfig()
    cfg = apply_section(cp, "generator", cfg)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_synth(args):
    cp = load_config_file(args.config)
    cfg = _generator_config(args, cp)
    info = synth.generate_corpus(cfg, args.out)
    write_resolved(args.out, {"generator": cfg})
    print(f"corpus at {args.out}: {info['episodes']} episodes "
          f"({info['train']} train / {info['test']} test), {info['frames']} frames")
    return 0


def _pipeline_configs(args, cp, meta):
    pcfg = pl.PipelineConfig(n_actions=meta.n_actions, n_objects=meta.n_objects,
                             n_grasp_types=meta.n_grasp_types,
                             patch_size=meta.patch_size)
    pcfg = apply_section(cp, "pipeline", pcfg)
    tcfg = apply_section(cp, "train", pl.TrainConfig())
    if args.seed is not None:
        pcfg = replace(pcfg, seed=args.seed)
        tcfg = replace(tcfg, seed=args.seed)
    if getattr(args, "kind", None):
        pcfg = replace(pcfg, curvature_kind=KIND_ALIASES[args.kind])
    return pcfg, tcfg


_LOCAL_PREFIXES = ("hand_backbone.", "local.")
_OBJECT_PREFIXES = ("object_backbone.", "object.")


def _load_subset(generator, ckpt_path, prefixes):
    state = nn.load_checkpoint(ckpt_path)
    named = {name: p for name, p in generator.named_params().items()
             if name.startswith(prefixes)}
    nn.load_into(named, state)


def cmd_train(args):
    cp = load_config_file(args.config)
    meta = pl.read_corpus_meta(args.corpus)
    pcfg, tcfg = _pipeline_configs(args, cp, meta)
    os.makedirs(args.out, exist_ok=True)

    kinds = () if pcfg.curvature_kind == "none" else (pcfg.curvature_kind,)
    data = pl.load_corpus(args.corpus, kinds=kinds, patch_size=pcfg.patch_size)

    stage = args.stage
    mode = "train" if tcfg.float32 else "test"
    rows = []
    if stage == "all":
        gen, tmodel, rows = pl.train_stages(data, pcfg, tcfg, out_dir=args.out)
        with nn.precision(mode):
            nn.save_checkpoint(os.path.join(args.out, "stage_joint.ckpt"),
                               gen.named_params())
            _save_full(args.out, gen, tmodel)
    elif stage in ("local", "object"):
        gen, _, rows = pl.train_stages(data, pcfg, tcfg, stages=(stage,))
        with nn.precision(mode):
            nn.save_checkpoint(os.path.join(args.out, f"stage_{stage}.ckpt"),
                               gen.named_params())
    elif stage == "joint":
        for need in ("stage_local.ckpt", "stage_object.ckpt"):
            if not os.path.exists(os.path.join(args.out, need)):
                raise HandactError(f"joint stage needs {need} in {args.out}; "
                                   f"run the earlier stages first")
        with nn.precision(mode):
            gen = pl.FrameEmbeddingGenerator(pcfg, np.random.default_rng(pcfg.seed))
            _load_subset(gen, os.path.join(args.out, "stage_local.ckpt"), _LOCAL_PREFIXES)
            _load_subset(gen, os.path.join(args.out, "stage_object.ckpt"), _OBJECT_PREFIXES)
        gen, _, rows = pl.train_stages(data, pcfg, tcfg, stages=("joint",), generator=gen)
        with nn.precision(mode):
            nn.save_checkpoint(os.path.join(args.out, "stage_joint.ckpt"),
                               gen.named_params())
    elif stage == "temporal":
        joint_path = os.path.join(args.out, "stage_joint.ckpt")
        if not os.path.exists(joint_path):
            raise HandactError(f"temporal stage needs stage_joint.ckpt in {args.out}; "
                               f"run the joint stage first")
        with nn.precision(mode):
            gen = pl.FrameEmbeddingGenerator(pcfg, np.random.default_rng(pcfg.seed))
            nn.load_into(gen.named_params(), nn.load_checkpoint(joint_path))
        gen, tmodel, rows = pl.train_stages(data, pcfg, tcfg, stages=("temporal",),
                                            generator=gen, out_dir=args.out)
        with nn.precision(mode):
            _save_full(args.out, gen, tmodel)
    else:  # unreachable: argparse restricts choices
        raise HandactError(f"unknown stage {stage}")

    pl.write_metrics_csv(rows, os.path.join(args.out, "metrics.csv"))
    write_resolved(args.out, {"pipeline": pcfg, "train": tcfg,
                              "run": {"command": "train", "stage": stage,
                                      "corpus": args.corpus}})
    print(f"stage {stage} done; metrics in {os.path.join(args.out, 'metrics.csv')}")
    return 0


def _save_full(out_dir, gen, tmodel):
    named = dict(gen.named_params())
    named.update(tmodel.named_params())
    nn.save_checkpoint(os.path.join(out_dir, "model_full.ckpt"), named)


def _load_full(path, pcfg, meta):
    gen = pl.FrameEmbeddingGenerator(pcfg, np.random.default_rng(pcfg.seed))
    tmcfg = temporal_mod.TemporalConfig(n_actions=pcfg.n_actions,
                                        input_dim=pcfg.embed_dim)
    tmodel = temporal_mod.TemporalModel(tmcfg, np.random.default_rng(pcfg.seed + 1))
    state = nn.load_checkpoint(path)
    nn.load_into(gen.named_params(), state)
    nn.load_into(tmodel.named_params(), state)
    return gen, tmodel


def cmd_eval(args):
    cp = load_config_file(args.config)
    meta = pl.read_corpus_meta(args.corpus)
    pcfg, tcfg = _pipeline_configs(args, cp, meta)
    os.makedirs(args.out, exist_ok=True)
    kinds = () if pcfg.curvature_kind == "none" else (pcfg.curvature_kind,)
    data = pl.load_corpus(args.corpus, kinds=kinds, patch_size=pcfg.patch_size)

    mode = "train" if tcfg.float32 else "test"
    with nn.precision(mode):
        gen, tmodel = _load_full(args.checkpoint, pcfg, meta)
        fm = pl.evaluate_frames(gen, data, pcfg, tcfg, data.test_ep)
        emb = pl.embed_episodes(gen, data, pcfg, tcfg, data.test_ep)
        actions = data.ep_action[data.test_ep]
        video_acc = temporal_mod.video_accuracy(tmodel, emb, actions)
        confusion = temporal_mod.video_confusion(tmodel, emb, actions, pcfg.n_actions)

    with open(os.path.join(args.out, "eval.csv"), "w", encoding="utf-8") as fh:
        fh.write("metric,value\n")
        fh.write(f"video_accuracy,{video_acc!r}\n")
        fh.write(f"grasp_accuracy,{fm.grasp_acc!r}\n")
        fh.write(f"object_accuracy,{fm.object_acc!r}\n")
        fh.write(f"frame_action_accuracy,{fm.action_acc!r}\n")
        fh.write(f"curvature_mse,{fm.curvature_mse!r}\n")
        fh.write(f"curvature_r2,{fm.curvature_r2!r}\n")
    np.savetxt(os.path.join(args.out, "video_confusion.csv"), confusion,
               fmt="%d", delimiter=",")
    np.savetxt(os.path.join(args.out, "grasp_confusion.csv"), fm.grasp_confusion,
               fmt="%d", delimiter=",")
    write_resolved(args.out, {"pipeline": pcfg, "train": tcfg,
                              "run": {"command": "eval", "corpus": args.corpus,
                                      "checkpoint": args.checkpoint}})
    print(f"video accuracy {video_acc:.4f}, grasp accuracy {fm.grasp_acc:.4f}, "
          f"curvature R2 {fm.curvature_r2:.4f}")
    return 0


def cmd_ablate(args):
    cp = load_config_file(args.config)
    meta = pl.read_corpus_meta(args.corpus)
    pcfg, tcfg = _pipeline_configs(args, cp, meta)
    os.makedirs(args.out, exist_ok=True)
    data = pl.load_corpus(args.corpus,
                          kinds=("mean", "gaussian", "maximum", "minimum"),
                          patch_size=pcfg.patch_size)
    rows = pl.run_ablation(data, pcfg, tcfg)
    pl.write_ablation_csv(rows, os.path.join(args.out, "ablation.csv"))
    write_resolved(args.out, {"pipeline": pcfg, "train": tcfg,
                              "run": {"command": "ablate", "corpus": args.corpus}})
    for r in rows:
        print(f"{r['kind']:>8}: video accuracy {r['video_acc']:.4f}")
    return 0


def cmd_stats(args):
    os.makedirs(args.out, exist_ok=True)
    meta = pl.read_corpus_meta(args.corpus)
    records = det.read_manifest(os.path.join(args.corpus, "manifest.txt"))
    groups = det.episodes_of(records)
    episodes = []
    for eid in sorted(groups):
        frames = groups[eid]
        labels = np.array([r.grasp_id for r in frames], dtype=np.int64)
        episodes.append((frames[0].action_id, labels))
    report = tax.label_statistics(episodes, meta.n_grasp_types, meta.n_actions)
    tax.write_statistics_csv(report,
                             os.path.join(args.out, "grasp_histogram.csv"),
                             os.path.join(args.out, "grasp_action_matrix.csv"),
                             os.path.join(args.out, "grasp_video_averages.csv"))
    write_resolved(args.out, {"run": {"command": "stats", "corpus": args.corpus}})
    print(f"stats over {report.n_episodes} episodes, "
          f"{int(report.frames_per_type.sum())} frames")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="handact",
        description="Hand-action recognition toolkit: curvature fields, "
                    "synthetic corpora, staged training, evaluation.")
    parser.add_argument("--version", action="version", version=f"handact {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curvature", help="per-vertex curvature field to CSV")
    p.add_argument("--mesh", required=True)
    p.add_argument("--kind", choices=("mean", "gaussian", "max", "min"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="staged training on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--stage", choices=("local", "object", "joint", "temporal", "all"),
                   default="all")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--kind", choices=tuple(KIND_ALIASES))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--kind", choices=tuple(KIND_ALIASES))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="curvature-kind ablation table")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("stats", help="grasp-type distribution statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HandactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
