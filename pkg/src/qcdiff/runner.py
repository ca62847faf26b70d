"""End-to-end commands: train, sample, evaluate, compare.

Each run writes everything under ``output_dir/<run_id>/``: the resolved
config, a line-delimited JSON training log (per-step records carry the batch
indices so runs can be diffed for identical data order), per-epoch EMA
sample grids, and the retained checkpoint. With no validation split in this
per-class setting, "best" means lowest epoch-mean training loss; the rule is
recorded in the checkpoint manifest.
"""

from __future__ import annotations

import dataclasses
import json
import time
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .data import (ImageBatch, batch_from_samples, filter_class, load_idx,
                   load_npz, normalize, write_png_grid)
from .diffusion import reverse_sample, train_step
from .errors import CheckpointError, ContractError
from .metrics import FeatureExtractor, MetricRecord, fid_like, set_ssim, write_records
from .optim import AdamState, EmaShadow
from .quantum import CircuitConfig
from .rng import stream_rng
from .schedule import build_cosine_schedule
from .unet import UNet, UNetConfig
from .tensor import Tensor

BEST_CHECKPOINT = "best.ckpt"
TRAIN_LOG = "train_log.jsonl"
CONFIG_ECHO = "config.json"


def load_dataset(cfg: RunConfig) -> ImageBatch:
    paths = cfg.resolved_data_paths()
    if cfg.dataset == "mnist":
        return load_idx(paths[0], paths[1])
    return load_npz(paths[0], cfg.split)


def training_images(cfg: RunConfig) -> ImageBatch:
    """Class-filtered, optionally capped, signed-normalized train batch."""
    batch = filter_class(load_dataset(cfg), cfg.class_label)
    if len(batch) == 0:
        raise ContractError(
            f"no images with label {cfg.class_label} in {cfg.dataset} dataset")
    if cfg.max_train_images is not None and len(batch) > cfg.max_train_images:
        batch = ImageBatch(batch.data[:cfg.max_train_images],
                           batch.labels[:cfg.max_train_images], batch.normalization)
    return normalize(batch, "signed")


def unet_config(cfg: RunConfig, model: str | None = None) -> UNetConfig:
    model = model or cfg.model
    channels = 3 if cfg.dataset == "medmnist" else 1
    circuit = CircuitConfig(cfg.n_qubits, cfg.n_layers, cfg.ansatz)
    return UNetConfig(in_channels=channels, bottleneck=model, circuit=circuit,
                      skip_connections=cfg.skip_connections, workers=cfg.workers)


def _checkpoint_manifest(cfg: RunConfig, model: str, epoch: int,
                         mean_loss: float | None) -> dict:
    return {
        "kind": "checkpoint",
        "config": dataclasses.asdict(cfg),
        "model": model,
        "ansatz": cfg.ansatz,
        "epoch": epoch,
        "mean_loss": mean_loss,
        "retention": "lowest epoch-mean training loss",
        "schedule": {"timesteps": cfg.timesteps, "s": cfg.s, "beta_clip": cfg.beta_clip,
                     "normalize_alpha_bar": cfg.normalize_alpha_bar},
        "seed": cfg.seed,
    }


def _checkpoint_tensors(model: UNet, ema: EmaShadow) -> dict[str, np.ndarray]:
    tensors = {f"param/{k}": v.data for k, v in model.params.items()}
    tensors.update({f"ema/{k}": v for k, v in ema.values.items()})
    return tensors


def model_from_checkpoint(manifest: dict, tensors: dict[str, np.ndarray],
                          which: str = "ema") -> tuple[UNet, RunConfig]:
    try:
        cfg = RunConfig.from_dict(manifest["config"])
        model = manifest["model"]
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"checkpoint manifest missing field: {exc}") from exc
    prefix = f"{which}/"
    params = {}
    for name, arr in tensors.items():
        if name.startswith(prefix):
            params[name[len(prefix):]] = Tensor(arr.copy(), requires_grad=(which == "param"))
    if not params:
        raise CheckpointError(f"checkpoint holds no {which!r} tensors")
    return UNet(unet_config(cfg, model), params), cfg


class TrainResult:
    def __init__(self, run_dir: Path, epoch_losses: list[float], best_epoch: int):
        self.run_dir = run_dir
        self.epoch_losses = epoch_losses
        self.best_epoch = best_epoch
        self.checkpoint_path = run_dir / BEST_CHECKPOINT
        self.log_path = run_dir / TRAIN_LOG


def cmd_train(cfg: RunConfig, model: str | None = None) -> TrainResult:
    """Run the epoch loop; emit config echo, log, sample grids, checkpoint."""
    cfg = cfg.validate()
    model_kind = model or cfg.model
    run_dir = Path(cfg.output_dir) / cfg.run_id(model_kind)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / CONFIG_ECHO).write_text(
        cfg.replace(model=model_kind).to_json() + "\n", encoding="utf-8")

    batch = training_images(cfg)
    sched = build_cosine_schedule(cfg.timesteps, cfg.s, cfg.normalize_alpha_bar, cfg.beta_clip)
    net = UNet.create(unet_config(cfg, model_kind), cfg.seed, init_gain=cfg.init_gain)
    opt = AdamState(net.params, lr=cfg.lr)
    ema = EmaShadow(net.params, beta=cfg.ema_beta)
    batch_rng = stream_rng(cfg.seed, "batch")

    best = (float("inf"), 0)
    epoch_losses: list[float] = []
    log_path = run_dir / TRAIN_LOG
    with open(log_path, "w", encoding="utf-8") as log:
        if cfg.epochs == 0:
            save_checkpoint(run_dir / BEST_CHECKPOINT,
                            _checkpoint_manifest(cfg, model_kind, 0, None),
                            _checkpoint_tensors(net, ema))
        for epoch in range(1, cfg.epochs + 1):
            t0 = time.perf_counter()
            noise_rng = stream_rng(cfg.seed, "noise", key=f"epoch{epoch}")
            order = batch_rng.permutation(len(batch))
            step_losses = []
            for step, start in enumerate(range(0, len(order), cfg.batch_size)):
                idx = order[start:start + cfg.batch_size]
                loss = train_step(net, batch.data[idx], sched, opt, ema, noise_rng)
                step_losses.append(loss)
                log.write(json.dumps({"epoch": epoch, "step": step, "loss": loss,
                                      "indices": idx.tolist()}) + "\n")
            mean_loss = float(np.mean(step_losses))
            epoch_losses.append(mean_loss)
            log.write(json.dumps({"epoch": epoch, "mean_loss": mean_loss,
                                  "wall_time": time.perf_counter() - t0}) + "\n")
            log.flush()

            ema_net = UNet(net.cfg, ema.snapshot())
            sample_rng = stream_rng(cfg.seed, "sample", key=f"epoch{epoch}")
            grid = reverse_sample(ema_net, sched, cfg.sample_grid_n, sample_rng)
            write_png_grid(batch_from_samples(grid), cfg.sample_cols,
                           run_dir / f"epoch{epoch:03d}_samples.png")

            if mean_loss < best[0]:
                best = (mean_loss, epoch)
                save_checkpoint(run_dir / BEST_CHECKPOINT,
                                _checkpoint_manifest(cfg, model_kind, epoch, mean_loss),
                                _checkpoint_tensors(net, ema))
    return TrainResult(run_dir, epoch_losses, best[1])


def cmd_sample(checkpoint_path, n: int, seed: int, output_dir=None,
               cols: int = 4) -> tuple[Path, Path]:
    """Draw n EMA-model samples; write a PNG grid and a raw f64 dump."""
    manifest, tensors = load_checkpoint(checkpoint_path)
    if manifest.get("kind") != "checkpoint":
        raise CheckpointError(f"{checkpoint_path}: not a model checkpoint")
    net, cfg = model_from_checkpoint(manifest, tensors, which="ema")
    sched = build_cosine_schedule(cfg.timesteps, cfg.s, cfg.normalize_alpha_bar, cfg.beta_clip)
    rng = stream_rng(seed, "sample", key="cmd_sample")
    samples = reverse_sample(net, sched, n, rng)

    out_dir = Path(output_dir) if output_dir else Path(checkpoint_path).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    png_path = out_dir / f"samples_seed{seed}_n{n}.png"
    dump_path = out_dir / f"samples_seed{seed}_n{n}.bin"
    write_png_grid(batch_from_samples(samples), cols, png_path)
    save_checkpoint(dump_path,
                    {"kind": "samples", "seed": seed, "n": n,
                     "model": manifest["model"], "ansatz": manifest.get("ansatz"),
                     "config": manifest["config"]},
                    {"samples": samples})
    return png_path, dump_path


def load_samples_dump(path) -> tuple[dict, ImageBatch]:
    manifest, tensors = load_checkpoint(path)
    if manifest.get("kind") != "samples" or "samples" not in tensors:
        raise CheckpointError(f"{path}: not a samples dump")
    return manifest, batch_from_samples(tensors["samples"])


def evaluate_batches(generated: ImageBatch, reference: ImageBatch, cfg: RunConfig,
                     model_variant: str) -> list[MetricRecord]:
    extractor = FeatureExtractor(cfg.extractor, seed=cfg.seed).fit(reference)
    common = dict(dataset=cfg.dataset, class_label=cfg.class_label,
                  model_variant=model_variant, seed=cfg.seed, extractor=cfg.extractor)
    return [
        MetricRecord(metric="set_ssim",
                     value=set_ssim(generated, reference, seed=cfg.seed), **common),
        MetricRecord(metric="fid_like",
                     value=fid_like(generated, reference, extractor), **common),
    ]


def cmd_evaluate(dump_path, cfg: RunConfig, output_path=None) -> list[MetricRecord]:
    """Score a samples dump against the class-filtered reference images."""
    cfg = cfg.validate()
    manifest, generated = load_samples_dump(dump_path)
    reference = normalize(filter_class(load_dataset(cfg), cfg.class_label), "unit")
    if len(reference) == 0:
        raise ContractError(f"no reference images with label {cfg.class_label}")
    records = evaluate_batches(generated, reference, cfg,
                               model_variant=manifest.get("model", "unknown"))
    if output_path is not None:
        write_records(records, output_path)
    return records


COMPARE_TABLE = "compare.tsv"


def cmd_compare(cfg: RunConfig) -> tuple[Path, str]:
    """Train + sample + evaluate both variants under one seed; emit the table.

    The two rows share data order, noise draws, and the init of every common
    layer. Values come from substitute features, so only the direction of the
    gap is meaningful, and the footer says so.
    """
    cfg = cfg.validate()
    reference = normalize(filter_class(load_dataset(cfg), cfg.class_label), "unit")
    rows = []
    for variant in ("classical", "quantum"):
        result = cmd_train(cfg, model=variant)
        manifest, tensors = load_checkpoint(result.checkpoint_path)
        net, _ = model_from_checkpoint(manifest, tensors, which="ema")
        sched = build_cosine_schedule(cfg.timesteps, cfg.s, cfg.normalize_alpha_bar, cfg.beta_clip)
        rng = stream_rng(cfg.seed, "sample", key="compare_eval")
        samples = reverse_sample(net, sched, cfg.eval_samples, rng)
        records = evaluate_batches(batch_from_samples(samples), reference, cfg, variant)
        values = {r.metric: r.value for r in records}
        rows.append((variant, values["set_ssim"], values["fid_like"]))

    lines = ["variant\tset_ssim\tfid_like"]
    for variant, ssim_v, fid_v in rows:
        lines.append(f"{variant}\t{ssim_v:.6f}\t{fid_v:.6f}")
    lines.append(f"# extractor={cfg.extractor}: substitute features, values not comparable "
                 "to Inception-based FID; only the classical/quantum gap is meaningful")
    lines.append(f"# dataset={cfg.dataset} class={cfg.class_label} seed={cfg.seed} "
                 f"epochs={cfg.epochs} T={cfg.timesteps} ansatz={cfg.ansatz} "
                 f"max_train_images={cfg.max_train_images}")
    table = "\n".join(lines) + "\n"
    compare_dir = Path(cfg.output_dir) / f"{cfg.dataset}-c{cfg.class_label}-compare-seed{cfg.seed}"
    compare_dir.mkdir(parents=True, exist_ok=True)
    (compare_dir / CONFIG_ECHO).write_text(cfg.to_json() + "\n", encoding="utf-8")
    out_path = compare_dir / COMPARE_TABLE
    out_path.write_text(table, encoding="utf-8")
    return out_path, table
