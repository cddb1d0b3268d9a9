"""Training loop for the interactive keypoint model.

Adam with learning rate 1e-3 and batch size 4; training stops early when
validation MRE has not improved for a configurable number of epochs.
Each batch simulates user clicks; half of the batches run a two-pass
iterative scheme in which the second pass sees the detached first-pass
prediction, mirroring how inference feeds previous predictions back.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from interkey.codec import CodecConfig, encode_keypoints
from interkey.data import DatasetManifest, load_image
from interkey.evaluation import mre
from interkey.keypoints import KeypointSet
from interkey.model import (CheckpointBundle, InteractiveKeypointModel, ModelConfig,
                            save_checkpoint, total_loss)
from interkey.morphology import (MorphologyConfig, RelationSets, compute_relation_stats,
                                 select_relations)
from interkey.simulate import ClickBudgetDistribution, make_training_example, start_session

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 4
    max_epochs: int = 120
    patience: int = 50           # early stop after this many stagnant epochs
    seed: int = 0
    click_decay: float = 0.5
    iterative_prob: float = 0.5  # fraction of batches using the two-pass scheme


@dataclass
class PreparedSample:
    image: torch.Tensor      # (1, H, W)
    target_hm: torch.Tensor  # (K, H, W)
    gt: KeypointSet
    gt_coords: torch.Tensor  # (K, 2)


def prepare_samples(manifest: DatasetManifest, split: str,
                    codec_cfg: CodecConfig) -> list[PreparedSample]:
    w, h = manifest.image_size
    out = []
    for rec in manifest.split_records(split):
        img = torch.from_numpy(load_image(manifest, rec)).float().unsqueeze(0)
        gt = rec.keypoints().clamped(w, h)
        out.append(PreparedSample(
            image=img,
            target_hm=encode_keypoints(gt, codec_cfg, w, h),
            gt=gt,
            gt_coords=torch.from_numpy(gt.coords).float(),
        ))
    return out


def select_dataset_relations(manifest: DatasetManifest,
                             morph_cfg: MorphologyConfig) -> RelationSets:
    w, h = manifest.image_size
    diag = float((w ** 2 + h ** 2) ** 0.5)
    train = [r.keypoints() for r in manifest.split_records("train")]
    stats = compute_relation_stats(train, [diag] * len(train),
                                   triple_window=morph_cfg.triple_window)
    return select_relations(stats, morph_cfg, topology=manifest.topology)


def validation_mre(model: InteractiveKeypointModel, samples: list[PreparedSample],
                   codec_cfg: CodecConfig) -> float:
    vals = []
    for s in samples:
        session = start_session(model, s.image, codec_cfg)
        vals.append(mre(session.keypoints, s.gt))
    return float(np.mean(vals))


def train_model(manifest: DatasetManifest,
                model_cfg: ModelConfig,
                codec_cfg: CodecConfig,
                morph_cfg: MorphologyConfig,
                train_cfg: TrainConfig,
                out_path: Path | None = None,
                relations: RelationSets | None = None) -> CheckpointBundle:
    torch.manual_seed(train_cfg.seed)
    rng = np.random.default_rng(train_cfg.seed)
    w, h = manifest.image_size
    if (w, h) != model_cfg.input_size:
        raise ValueError("manifest image size must match model input size")

    if relations is None:
        relations = select_dataset_relations(manifest, morph_cfg)
    log.info("selected %d pairs, %d triples", len(relations.pairs), len(relations.triples))

    train_samples = prepare_samples(manifest, "train", codec_cfg)
    val_samples = prepare_samples(manifest, "val", codec_cfg)
    if not train_samples:
        raise ValueError("empty training split")

    model = InteractiveKeypointModel(model_cfg)
    opt = torch.optim.Adam(model.parameters(), lr=train_cfg.learning_rate)
    dist = ClickBudgetDistribution(k=model_cfg.k, decay=train_cfg.click_decay)

    best_mre = float("inf")
    best_state = {k: v.clone() for k, v in model.state_dict().items()}
    stagnant = 0
    steps = 0
    t0 = time.time()

    for epoch in range(train_cfg.max_epochs):
        model.train()
        order = rng.permutation(len(train_samples))
        for start in range(0, len(order), train_cfg.batch_size):
            batch = [train_samples[i] for i in order[start:start + train_cfg.batch_size]]
            images = torch.stack([s.image for s in batch])
            targets = torch.stack([s.target_hm for s in batch])
            gt_coords = torch.stack([s.gt_coords for s in batch])

            iterative = rng.random() < train_cfg.iterative_prob
            prev = None
            if iterative:
                ex0 = [make_training_example(s.gt, None, dist, codec_cfg, w, h, rng)
                       for s in batch]
                with torch.no_grad():
                    prev = model(images,
                                 torch.stack([e.interaction for e in ex0]),
                                 torch.stack([e.prev_pred for e in ex0]))
            examples = [make_training_example(s.gt, prev[i] if prev is not None else None,
                                              dist, codec_cfg, w, h, rng)
                        for i, s in enumerate(batch)]
            interaction = torch.stack([e.interaction for e in examples])
            prev_pred = torch.stack([e.prev_pred for e in examples])

            pred = model(images, interaction, prev_pred)
            loss = total_loss(pred, targets, gt_coords, relations,
                              model_cfg, codec_cfg, morph_cfg)
            opt.zero_grad()
            loss.backward()
            opt.step()
            steps += 1

        val = validation_mre(model, val_samples, codec_cfg) if val_samples else float("nan")
        if val < best_mre - 1e-6:
            best_mre = val
            best_state = {k: v.clone() for k, v in model.state_dict().items()}
            stagnant = 0
        else:
            stagnant += 1
        if epoch % 10 == 0 or stagnant == 0:
            log.info("epoch %d: val MRE %.3f px (best %.3f, %.0fs elapsed)",
                     epoch, val, best_mre, time.time() - t0)
        if stagnant >= train_cfg.patience:
            log.info("early stop at epoch %d (no improvement for %d epochs)",
                     epoch, train_cfg.patience)
            break

    model.load_state_dict(best_state)
    model.eval()
    bundle = CheckpointBundle(
        model=model, model_cfg=model_cfg, codec_cfg=codec_cfg, morph_cfg=morph_cfg,
        relations=relations,
        dataset_meta={"name": manifest.name, "k": manifest.k,
                      "keypoint_names": manifest.keypoint_names,
                      "image_size": list(manifest.image_size)},
        train_steps=steps,
    )
    if out_path is not None:
        save_checkpoint(bundle, out_path)
    return bundle
