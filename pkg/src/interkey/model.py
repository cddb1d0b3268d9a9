"""Interactive keypoint network.

Pipeline: hint fusion (image + interaction map + previous prediction)
-> encoder-decoder backbone producing a decoder feature map F_c (stride 4)
and a bottleneck feature map F_h (stride 16) -> interaction-guided channel
gate (global max-pool, two FC layers, sigmoid) recalibrating F_c
-> convolutional head -> per-pixel sigmoid -> bilinear upsample to input
resolution.

The gate is the global pathway: a click anywhere can rescale every channel
of F_c, letting a single correction move distant keypoints.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from interkey.codec import CodecConfig, decode_local_softargmax, heatmap_bce
from interkey.morphology import MorphologyConfig, RelationSets, morphology_loss

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    k: int = 16
    input_size: tuple[int, int] = (64, 64)   # (W, H)
    in_channels: int = 1
    widths: tuple[int, int, int, int] = (32, 48, 64, 96)  # strides 2/4/8/16
    k_c: int = 64                # gated decoder feature channels
    gate_reduction: int = 4      # FC bottleneck ratio in the gate
    output_stride: int = 4
    lambda_total: float = 1.0    # weight of the shape-prior term in the total loss

    def __post_init__(self) -> None:
        w, h = self.input_size
        if w % 16 or h % 16:
            raise ValueError("input size must be divisible by 16")
        if self.k_c <= 0:
            raise ValueError("k_c must be > 0")


def _conv_block(cin: int, cout: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class HintFusion(nn.Module):
    """Merge image, interaction map, and previous prediction.

    Output matches the shape of the backbone's first block output
    (stride 2, widths[0] channels), so hints enter without touching the
    backbone itself.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cin = cfg.in_channels + 2 * cfg.k
        self.block = nn.Sequential(
            _conv_block(cin, cfg.widths[0], stride=2),
            _conv_block(cfg.widths[0], cfg.widths[0]),
        )

    def forward(self, image: torch.Tensor, interaction: torch.Tensor,
                prev_pred: torch.Tensor) -> torch.Tensor:
        if image.shape[-2:] != interaction.shape[-2:] or image.shape[-2:] != prev_pred.shape[-2:]:
            raise ValueError("image, interaction, and prev_pred must share spatial shape")
        return self.block(torch.cat([image, interaction, prev_pred], dim=1))


class EncoderDecoderBackbone(nn.Module):
    """Small encoder-decoder with skip connections.

    Takes the fused hint tensor at stride 2 and returns (F_c, F_h):
    F_c is the decoder output at stride 4, F_h the bottleneck at stride 16.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        w0, w1, w2, w3 = cfg.widths
        self.down1 = _conv_block(w0, w1, stride=2)   # stride 4
        self.down2 = _conv_block(w1, w2, stride=2)   # stride 8
        self.down3 = _conv_block(w2, w3, stride=2)   # stride 16
        self.mid = _conv_block(w3, w3)
        self.up1 = _conv_block(w3 + w2, w2)          # stride 8
        self.up2 = _conv_block(w2 + w1, cfg.k_c)     # stride 4

    def forward(self, fused: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        d1 = self.down1(fused)
        d2 = self.down2(d1)
        f_h = self.mid(self.down3(d2))
        u1 = self.up1(torch.cat([F.interpolate(f_h, size=d2.shape[-2:], mode="bilinear",
                                               align_corners=False), d2], dim=1))
        f_c = self.up2(torch.cat([F.interpolate(u1, size=d1.shape[-2:], mode="bilinear",
                                                align_corners=False), d1], dim=1))
        return f_c, f_h


class InteractionGate(nn.Module):
    """Channel gate driven by the interaction map and bottleneck features.

    The interaction map is average-pooled to the bottleneck resolution,
    projected by a 1x1 conv, concatenated with F_h and fused by another
    1x1 conv; global max-pooling then squeezes spatial extent, and two FC
    layers with a sigmoid emit the per-channel gate in (0, 1).
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        u_proj = cfg.widths[0]
        self.project_u = nn.Conv2d(cfg.k, u_proj, 1)
        self.fuse = nn.Conv2d(u_proj + cfg.widths[3], cfg.k_c, 1)
        hidden = max(cfg.k_c // cfg.gate_reduction, 4)
        self.fc = nn.Sequential(
            nn.Linear(cfg.k_c, hidden),
            nn.ReLU(inplace=True),
            nn.Linear(hidden, cfg.k_c),
            nn.Sigmoid(),
        )

    def forward(self, interaction: torch.Tensor, f_h: torch.Tensor) -> torch.Tensor:
        u_small = F.adaptive_avg_pool2d(interaction, f_h.shape[-2:])
        fused = self.fuse(torch.cat([self.project_u(u_small), f_h], dim=1))
        pooled = torch.amax(fused, dim=(-2, -1))
        return self.fc(pooled)


def apply_gate(f_c: torch.Tensor, gate: torch.Tensor) -> torch.Tensor:
    """Rescale each channel of (B, C, H, W) features by a (B, C) gate."""
    if f_c.shape[:2] != gate.shape:
        raise ValueError(f"channel mismatch: {tuple(f_c.shape[:2])} vs {tuple(gate.shape)}")
    return f_c * gate.unsqueeze(-1).unsqueeze(-1)


class InteractiveKeypointModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.hint_fusion = HintFusion(cfg)
        self.backbone = EncoderDecoderBackbone(cfg)
        self.gate = InteractionGate(cfg)
        self.head = nn.Sequential(
            _conv_block(cfg.k_c, cfg.k_c),
            nn.Conv2d(cfg.k_c, cfg.k, 1),
        )
        self.gating_enabled = True  # ablation switch: False forces gate to all-ones

    def forward(self, image: torch.Tensor, interaction: torch.Tensor,
                prev_pred: torch.Tensor) -> torch.Tensor:
        """Predict (B, K, H, W) heatmaps with entries in (0, 1)."""
        fused = self.hint_fusion(image, interaction, prev_pred)
        f_c, f_h = self.backbone(fused)
        if self.gating_enabled:
            f_c = apply_gate(f_c, self.gate(interaction, f_h))
        logits = self.head(f_c)
        hm = torch.sigmoid(logits)
        out = F.interpolate(hm, size=image.shape[-2:], mode="bilinear", align_corners=False)
        if not torch.isfinite(out).all():
            raise FloatingPointError("non-finite activations in forward pass")
        return out

    def predict(self, image: torch.Tensor, interaction: torch.Tensor,
                prev_pred: torch.Tensor) -> torch.Tensor:
        """Single-image (K, H, W) inference in eval mode, no gradients."""
        self.eval()
        with torch.no_grad():
            return self.forward(image.unsqueeze(0), interaction.unsqueeze(0),
                                prev_pred.unsqueeze(0))[0]

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def total_loss(pred_hm: torch.Tensor, gt_hm: torch.Tensor, gt_coords: torch.Tensor,
               rel: RelationSets, model_cfg: ModelConfig, codec_cfg: CodecConfig,
               morph_cfg: MorphologyConfig) -> torch.Tensor:
    """BCE heatmap loss plus weighted shape-prior loss on decoded coordinates.

    `pred_hm`/`gt_hm` are (B, K, H, W); `gt_coords` is (B, K, 2).
    """
    loss = heatmap_bce(pred_hm, gt_hm)
    if torch.isnan(loss):
        raise FloatingPointError("NaN heatmap loss")
    if model_cfg.lambda_total > 0 and (rel.pairs or rel.triples):
        w, h = model_cfg.input_size
        diag = float((w ** 2 + h ** 2) ** 0.5)
        morph = pred_hm.new_zeros(())
        for b in range(pred_hm.shape[0]):
            coords, _ = decode_local_softargmax(pred_hm[b], codec_cfg)
            morph = morph + morphology_loss(coords, gt_coords[b], rel, morph_cfg, norm=diag)
        loss = loss + model_cfg.lambda_total * morph / pred_hm.shape[0]
    return loss


@dataclass
class CheckpointBundle:
    """Everything needed to run inference without external context."""
    model: InteractiveKeypointModel
    model_cfg: ModelConfig
    codec_cfg: CodecConfig
    morph_cfg: MorphologyConfig
    relations: RelationSets
    dataset_meta: dict
    train_steps: int = 0


def save_checkpoint(bundle: CheckpointBundle, path) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "model_cfg": asdict(bundle.model_cfg),
        "codec_cfg": asdict(bundle.codec_cfg),
        "morph_cfg": asdict(bundle.morph_cfg),
        "relations": {"pairs": [list(p) for p in bundle.relations.pairs],
                      "triples": [list(t) for t in bundle.relations.triples]},
        "dataset_meta": bundle.dataset_meta,
        "train_steps": bundle.train_steps,
        "state_dict": bundle.model.state_dict(),
    }
    torch.save(payload, path)


def load_checkpoint(path) -> CheckpointBundle:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {payload.get('version')}")
    model_cfg = ModelConfig(**{k: tuple(v) if isinstance(v, list) else v
                               for k, v in payload["model_cfg"].items()})
    model = InteractiveKeypointModel(model_cfg)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return CheckpointBundle(
        model=model,
        model_cfg=model_cfg,
        codec_cfg=CodecConfig(**payload["codec_cfg"]),
        morph_cfg=MorphologyConfig(**payload["morph_cfg"]),
        relations=RelationSets(
            pairs=[tuple(p) for p in payload["relations"]["pairs"]],
            triples=[tuple(t) for t in payload["relations"]["triples"]],
        ),
        dataset_meta=payload["dataset_meta"],
        train_steps=payload["train_steps"],
    )
