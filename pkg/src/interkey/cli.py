"""Command-line interface.

    interkey data synth --out DIR [--samples N --seed S ...]
    interkey data convert-aasce --landmarks DIR --images DIR --out FILE
    interkey data validate MANIFEST
    interkey morphology stats MANIFEST --out FILE [selection options]
    interkey train --dataset MANIFEST --out DIR [--seed S ...]
    interkey eval --checkpoint FILE --dataset MANIFEST --alpha A --beta B...
    interkey serve --checkpoint FILE --port P [--session-ttl SECONDS]
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from interkey.codec import CodecConfig
from interkey.morphology import MorphologyConfig

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


@click.group()
def main() -> None:
    """Interactive keypoint estimation toolkit."""


@main.group()
def data() -> None:
    """Dataset generation, conversion, and validation."""


@data.command()
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--samples", default=200, show_default=True)
@click.option("--vertebrae", default=4, show_default=True)
@click.option("--image-size", nargs=2, type=int, default=(64, 64), show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--faint-prob", default=0.9, show_default=True)
def synth(out_dir: Path, samples: int, vertebrae: int, image_size, seed: int,
          faint_prob: float) -> None:
    """Generate a synthetic spine dataset."""
    from interkey.data import SyntheticSpineConfig, generate_synthetic_spine
    cfg = SyntheticSpineConfig(num_vertebrae=vertebrae, image_size=tuple(image_size),
                               num_samples=samples, seed=seed, faint_prob=faint_prob)
    manifest = generate_synthetic_spine(cfg, out_dir)
    click.echo(f"wrote {len(manifest.records)} samples (K={manifest.k}) to {out_dir}")


@data.command("convert-aasce")
@click.option("--landmarks", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--images", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--val-fraction", default=0.2, show_default=True)
@click.option("--seed", default=0, show_default=True)
def convert_aasce_cmd(landmarks: Path, images: Path, out_path: Path,
                      val_fraction: float, seed: int) -> None:
    """Convert SpineWeb-style landmark files into a manifest."""
    from interkey.data import convert_aasce
    manifest = convert_aasce(landmarks, images, out_path, val_fraction, seed)
    click.echo(f"wrote {len(manifest.records)} records to {out_path}")


@data.command()
@click.argument("manifest", type=click.Path(exists=True, path_type=Path))
def validate(manifest: Path) -> None:
    """Validate a manifest file (schema, splits, image presence)."""
    from interkey.data import load_manifest
    m = load_manifest(manifest)
    splits = {s: len(m.split_records(s)) for s in ("train", "val", "test")}
    click.echo(f"OK: {m.name}, K={m.k}, records={len(m.records)}, splits={splits}")


@main.group()
def morphology() -> None:
    """Inter-keypoint relation statistics."""


@morphology.command()
@click.argument("manifest", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--mode", default="threshold", show_default=True,
              type=click.Choice(["threshold", "top_k_low_variance",
                                 "top_k_high_variance", "adjacent_points"]))
@click.option("--t-d", default=0.02, show_default=True)
@click.option("--t-a", default=0.15, show_default=True)
@click.option("--top-k", default=15, show_default=True)
@click.option("--split", default="train", show_default=True)
def stats(manifest: Path, out_path: Path, mode: str, t_d: float, t_a: float,
          top_k: int, split: str) -> None:
    """Compute relation statistics and the selected relation subsets."""
    from interkey.data import load_manifest
    from interkey.morphology import compute_relation_stats, select_relations
    m = load_manifest(manifest, check_images=False)
    w, h = m.image_size
    diag = float((w ** 2 + h ** 2) ** 0.5)
    kps = [r.keypoints() for r in m.split_records(split)]
    cfg = MorphologyConfig(t_d=t_d, t_a=t_a, selection_mode=mode, top_k=top_k)
    rel_stats = compute_relation_stats(kps, [diag] * len(kps),
                                       triple_window=cfg.triple_window)
    selected = select_relations(rel_stats, cfg, topology=m.topology)
    payload = {
        "dataset": m.name,
        "k": m.k,
        "sample_count": rel_stats.sample_count,
        "pairs": [{"indices": list(p), "mean": rel_stats.pair_mean[p],
                   "std": rel_stats.pair_std[p]} for p in sorted(rel_stats.pair_std)],
        "triples": [{"indices": list(t), "std": rel_stats.triple_std[t]}
                    for t in sorted(rel_stats.triple_std)],
        "selected": {"pairs": [list(p) for p in selected.pairs],
                     "triples": [list(t) for t in selected.triples]},
    }
    Path(out_path).write_text(json.dumps(payload, indent=2))
    click.echo(f"{len(selected.pairs)} pairs and {len(selected.triples)} triples "
               f"selected; stats written to {out_path}")


@main.command()
@click.option("--dataset", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--max-epochs", default=120, show_default=True)
@click.option("--patience", default=50, show_default=True)
@click.option("--selection-mode", default="threshold", show_default=True)
@click.option("--lambda-total", default=1.0, show_default=True)
def train(dataset: Path, out_dir: Path, seed: int, max_epochs: int, patience: int,
          selection_mode: str, lambda_total: float) -> None:
    """Train a model on a manifest dataset."""
    from interkey.data import load_manifest
    from interkey.model import ModelConfig
    from interkey.train import TrainConfig, train_model
    m = load_manifest(dataset)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_cfg = ModelConfig(k=m.k, input_size=m.image_size, lambda_total=lambda_total)
    bundle = train_model(
        m, model_cfg, CodecConfig(),
        MorphologyConfig(selection_mode=selection_mode),
        TrainConfig(seed=seed, max_epochs=max_epochs, patience=patience),
        out_path=out_dir / "model.ckpt",
    )
    click.echo(f"trained {bundle.train_steps} steps; checkpoint at {out_dir / 'model.ckpt'}")


@main.command("eval")
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--dataset", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--alpha", default=5, show_default=True)
@click.option("--beta", "betas", multiple=True, type=float, default=(1.0, 2.0, 3.0, 4.0),
              show_default=True)
@click.option("--policy", default="worst_first", show_default=True)
@click.option("--limit-images", default=0, show_default=True, help="0 = no limit")
@click.option("--split", default="test", show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("eval_out"),
              show_default=True)
@click.option("--check", is_flag=True,
              help="exit nonzero unless the model curve beats the manual curve")
def eval_cmd(checkpoint: Path, dataset: Path, alpha: int, betas, policy: str,
             limit_images: int, split: str, out_dir: Path, check: bool) -> None:
    """Evaluate a checkpoint: NoC/FR tables and revision curves."""
    from interkey.data import load_manifest
    from interkey.evaluation import (EvalConfig, build_report, manual_revision_curve,
                                     run_revision_trace, save_report)
    from interkey.model import load_checkpoint
    from interkey.simulate import start_session
    from interkey.train import prepare_samples

    bundle = load_checkpoint(checkpoint)
    m = load_manifest(dataset)
    cfg = EvalConfig(alpha=alpha, beta_list=tuple(betas), policy=policy)
    samples = prepare_samples(m, split, bundle.codec_cfg)
    if limit_images:
        samples = samples[:limit_images]
    traces, manual = [], []
    for i, s in enumerate(samples):
        traces.append(run_revision_trace(bundle.model, s.image, s.gt, cfg,
                                         bundle.codec_cfg, image_id=str(i)))
        init = start_session(bundle.model, s.image, bundle.codec_cfg).keypoints
        manual.append(manual_revision_curve(init, s.gt, alpha))
    report = build_report(traces, manual, cfg)
    path = save_report(report, out_dir)
    click.echo(report.to_json())
    click.echo(f"report written to {path}")
    if check:
        ok = all(mdl <= man + 1e-9 for mdl, man in
                 zip(report.model_curve[1:], report.manual_curve[1:]))
        if not ok:
            click.echo("CHECK FAILED: model curve above manual curve", err=True)
            sys.exit(1)
        click.echo("CHECK PASSED: model curve at or below manual curve")


@main.command()
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--port", default=8008, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--session-ttl", default=3600.0, show_default=True)
def serve(checkpoint: Path, port: int, host: str, session_ttl: float) -> None:
    """Serve the interactive refinement API over HTTP."""
    import uvicorn
    from interkey.service import app_from_checkpoint
    app = app_from_checkpoint(str(checkpoint), session_ttl=session_ttl)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
