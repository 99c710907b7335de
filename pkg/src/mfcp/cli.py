"""Batch pipeline: degrade | pretrain | calibrate | finetune | evaluate.

Commands chain through files under the configured output directory:

    split.json            train/test/complementary snapshot indices
    model_pretrained/     phase-one bundle
    calibration.json      multi-split radii and the stopping epoch
    model_final/          phase-two bundle trained on all HF pairs
    report.json           metrics and coverage for the test sets

Exit codes: 0 success, 2 validation/configuration error, 3 numeric failure.
Logging level comes from the MFCP_LOG environment variable (error|info|debug).
"""

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from . import conformal, lofi, mfae, nn
from .data import load_csv, metrics, save_csv, stratified_split

log = logging.getLogger("mfcp")

REPORT_VERSION = 1


@dataclass
class PipelineConfig:
    lf_set: str = "lf.csv"
    hf_set: str = "hf.csv"
    out_dir: str = "out"
    recipe: str = ""
    d_lf: int = 0
    d_hf: int = 0
    encoder_widths: str = "64,32,16"
    latent_dim: int = 3
    decoder_widths: str = "16,32,16"
    upscaler_hidden: int = 0  # 0 -> 1.5 * d_lf
    force_adapter: bool = False
    pretrain_epochs: int = 2000
    learning_rate: float = 1e-3
    finetune_learning_rate: float = 0.0  # 0 -> learning_rate / 10
    max_finetune_epochs: int = 2000
    patience: int = 100
    delta: float = 0.1
    score_kind: str = "normalized_l2"
    calibration_splits: int = 30
    cal_fraction: float = 0.3
    hf_fraction: float = 0.2
    test_fraction: float = 0.25
    seed: int = 0
    normalization: str = "per_node_standard"
    emit_plot: bool = True


_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def parse_config(text) -> PipelineConfig:
    """Parse the flat `key = value` config document."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    cfg = PipelineConfig()
    types = {f.name: type(getattr(cfg, f.name)) for f in dc_fields(PipelineConfig)}
    for key, val in values.items():
        if key not in types:
            raise ValueError(f"unknown config key {key!r}")
        t = types[key]
        if t is bool:
            if val.lower() not in _BOOL_WORDS:
                raise ValueError(f"config key {key}: bad boolean {val!r}")
            setattr(cfg, key, _BOOL_WORDS[val.lower()])
        elif t is int:
            setattr(cfg, key, int(val))
        elif t is float:
            setattr(cfg, key, float(val))
        else:
            setattr(cfg, key, val)
    return cfg


def dump_config(cfg) -> str:
    """Inverse of parse_config; floats keep full precision."""
    lines = []
    for f in dc_fields(PipelineConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def load_config(path) -> PipelineConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def derive_seed(master, label) -> int:
    """Stable named sub-seed so one master seed drives the whole pipeline."""
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def _widths(text):
    text = text.strip()
    if not text:
        return []
    return [int(tok) for tok in text.split(",")]


def _mfae_config(cfg) -> mfae.MfaeConfig:
    return mfae.MfaeConfig(
        d_lf=cfg.d_lf,
        d_hf=cfg.d_hf,
        encoder_widths=_widths(cfg.encoder_widths),
        latent_dim=cfg.latent_dim,
        decoder_widths=_widths(cfg.decoder_widths),
        upscaler_hidden=cfg.upscaler_hidden or None,
        force_adapter=cfg.force_adapter,
        seed=derive_seed(cfg.seed, "init"),
        pretrain_epochs=cfg.pretrain_epochs,
        adam=nn.AdamConfig(lr=cfg.learning_rate),
        normalization=cfg.normalization,
    )


def _finetune_adam(cfg) -> nn.AdamConfig:
    lr = cfg.finetune_learning_rate or cfg.learning_rate / 10.0
    return nn.AdamConfig(lr=lr)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_history(path, losses):
    with open(path, "w") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(losses, start=1):
            fh.write(f"{i},{loss:.17g}\n")


def _split_path(cfg):
    return os.path.join(cfg.out_dir, "split.json")


def _load_split(cfg):
    with open(_split_path(cfg)) as fh:
        return json.load(fh)


def _paired_matrices(lf, hf, names):
    """Column-paired (x_lf, y_hf) matrices for the given snapshot names."""
    xi = lf.indices_of(names)
    yi = hf.indices_of(names)
    return lf.fields[:, xi], hf.fields[:, yi]


# --- commands ----------------------------------------------------------------


def cmd_degrade(cfg):
    if not cfg.recipe:
        raise ValueError("degrade needs a 'recipe' path in the config")
    with open(cfg.recipe) as fh:
        recipe = lofi.DegradationRecipe.from_json(fh.read())
    hf = load_csv(cfg.hf_set)
    lf, provenance = lofi.apply_recipe(hf, recipe, master_seed=derive_seed(cfg.seed, "degrade"))
    os.makedirs(cfg.out_dir, exist_ok=True)
    out_path = os.path.join(cfg.out_dir, "lf.csv")
    save_csv(lf, out_path)
    _write_json(os.path.join(cfg.out_dir, "provenance.json"), provenance)
    log.info("degraded %d snapshots: %d -> %d nodes", hf.n_snapshots, hf.n_nodes, lf.n_nodes)
    print(out_path)


def cmd_pretrain(cfg):
    lf = load_csv(cfg.lf_set)
    hf = load_csv(cfg.hf_set)
    plan = stratified_split(hf, cfg.hf_fraction, cfg.test_fraction, derive_seed(cfg.seed, "split"))
    os.makedirs(cfg.out_dir, exist_ok=True)
    _write_json(_split_path(cfg), {
        "train_idx": plan.train_idx,
        "test_idx": plan.test_idx,
        "complementary_idx": plan.complementary_idx,
        "train_names": [hf.names[i] for i in plan.train_idx],
        "test_names": [hf.names[i] for i in plan.test_idx],
        "complementary_names": [hf.names[i] for i in plan.complementary_idx],
        "strata": plan.strata,
        "seed": plan.seed,
    })

    # LF counterparts of the HF test cases never enter any training
    test_names = {hf.names[i] for i in plan.test_idx}
    keep = [i for i, name in enumerate(lf.names) if name not in test_names]
    lf_train = lf.take(keep)

    model = mfae.pretrain(_mfae_config(cfg), lf_train)
    bundle = os.path.join(cfg.out_dir, "model_pretrained")
    mfae.save_model(model, bundle, extra={"lf_train_names": lf_train.names})
    _write_history(os.path.join(cfg.out_dir, "pretrain_history.csv"), model.pretrain_losses)
    log.info("pretrained on %d LF snapshots", lf_train.n_snapshots)
    print(bundle)


def cmd_calibrate(cfg, workers=1):
    model = mfae.load_model(os.path.join(cfg.out_dir, "model_pretrained"))
    lf = load_csv(cfg.lf_set)
    hf = load_csv(cfg.hf_set)
    split = _load_split(cfg)
    x, y = _paired_matrices(lf, hf, split["train_names"])
    result = conformal.multi_split_calibrate(
        x, y, model,
        n_splits=cfg.calibration_splits,
        cal_fraction=cfg.cal_fraction,
        delta=cfg.delta,
        kind=cfg.score_kind,
        patience=cfg.patience,
        seed=derive_seed(cfg.seed, "calibrate"),
        max_epochs=cfg.max_finetune_epochs,
        adam=_finetune_adam(cfg),
        workers=workers,
    )
    path = os.path.join(cfg.out_dir, "calibration.json")
    _write_json(path, {
        "format_version": REPORT_VERSION,
        "B": cfg.calibration_splits,
        "delta": cfg.delta,
        "kind": cfg.score_kind,
        "cal_fraction": cfg.cal_fraction,
        "seed": result.seed,
        "R_star": result.radius,
        "E_star": result.epoch,
        "splits": [
            {
                "train_idx": rec.train_idx,
                "cal_idx": rec.cal_idx,
                "k_s": rec.critical_quantile,
                "epoch": rec.epoch,
                "radius": rec.radius,
            }
            for rec in result.splits
        ],
    })
    log.info("calibrated over %d splits: E*=%d", cfg.calibration_splits, result.epoch)
    print(path)


def cmd_finetune(cfg):
    model = mfae.load_model(os.path.join(cfg.out_dir, "model_pretrained"))
    with open(os.path.join(cfg.out_dir, "calibration.json")) as fh:
        calibration = json.load(fh)
    lf = load_csv(cfg.lf_set)
    hf = load_csv(cfg.hf_set)
    split = _load_split(cfg)
    x, y = _paired_matrices(lf, hf, split["train_names"])
    e_star = int(calibration["E_star"])
    result = mfae.fine_tune(model, x, y, epochs=e_star, adam=_finetune_adam(cfg),
                            seed=derive_seed(cfg.seed, "finetune"))
    bundle = os.path.join(cfg.out_dir, "model_final")
    meta_extra = {
        "hf_train_names": split["train_names"],
        "lf_train_names": split["train_names"],
        "epochs_trained": e_star,
    }
    mfae.save_model(model, bundle, extra=meta_extra)
    _write_history(os.path.join(cfg.out_dir, "finetune_history.csv"), result.losses)
    log.info("fine-tuned on %d pairs for %d epochs", x.shape[1], e_star)
    print(bundle)


def _leakage_check(meta, test_names):
    trained = set(meta.get("hf_train_names", [])) | set(meta.get("lf_train_names", []))
    overlap = sorted(trained & set(test_names))
    if overlap:
        raise ValueError(f"test snapshots appear in training provenance: {overlap[:5]}")


def _evaluate_subset(model, radius, lf, hf, names):
    x, y = _paired_matrices(lf, hf, names)
    pred = mfae.predict(model, x)
    lower, upper = conformal.band(pred.T, radius)
    cov = conformal.coverage(lower, upper, y.T)
    m = metrics(pred, y)
    return pred, lower, upper, {
        "mae": m["mae"],
        "rmse": m["rmse"],
        "r2": m["r2"],
        "nominal": cov.nominal,
        "pointwise": cov.pointwise,
        "band_width_mean": cov.width_mean,
        "band_width_std": cov.width_std,
        "n_snapshots": len(names),
    }


def cmd_evaluate(cfg):
    bundle = os.path.join(cfg.out_dir, "model_final")
    model = mfae.load_model(bundle)
    with open(os.path.join(bundle, "meta.json")) as fh:
        meta = json.load(fh)
    with open(os.path.join(cfg.out_dir, "calibration.json")) as fh:
        calibration = json.load(fh)
    lf = load_csv(cfg.lf_set)
    hf = load_csv(cfg.hf_set)
    split = _load_split(cfg)
    test_names = split["test_names"]
    _leakage_check(meta, test_names)
    radius = np.array(calibration["R_star"], dtype=np.float64)

    pred, lower, upper, test_report = _evaluate_subset(model, radius, lf, hf, test_names)
    report = {
        "format_version": REPORT_VERSION,
        "delta": calibration["delta"],
        "kind": calibration["kind"],
        "test": test_report,
    }
    comp_names = [n for n in split.get("complementary_names", []) if n in set(lf.names)]
    if comp_names:
        _, _, _, comp_report = _evaluate_subset(model, radius, lf, hf, comp_names)
        report["complementary_test"] = comp_report

    pred_dir = os.path.join(cfg.out_dir, "predictions")
    os.makedirs(pred_dir, exist_ok=True)
    truth = hf.fields[:, hf.indices_of(test_names)]
    for j, name in enumerate(test_names):
        with open(os.path.join(pred_dir, f"{name}.csv"), "w") as fh:
            fh.write("node,x,truth,prediction,lower,upper\n")
            for i in range(hf.n_nodes):
                fh.write(
                    f"{i},{hf.coords[i, 0]:.17g},{truth[i, j]:.17g},"
                    f"{pred[i, j]:.17g},{lower[j, i]:.17g},{upper[j, i]:.17g}\n"
                )

    if cfg.emit_plot and test_names:
        try:
            svg = _section_plot_svg(hf.coords[:, 0], truth[:, 0], pred[:, 0],
                                    lower[0], upper[0], title=test_names[0])
            with open(os.path.join(cfg.out_dir, "section_plot.svg"), "w") as fh:
                fh.write(svg)
        except Exception as exc:  # plots are best-effort, never gate exit codes
            log.warning("plot emission failed: %s", exc)

    path = os.path.join(cfg.out_dir, "report.json")
    _write_json(path, report)
    log.info("test MAE %.4g, pointwise coverage %.3f",
             test_report["mae"], test_report["pointwise"])
    print(path)


def _section_plot_svg(x, truth, pred, lower, upper, title="", width=720, height=480):
    """Minimal static SVG: shaded band, prediction line, truth markers."""
    order = np.argsort(x, kind="stable")
    x = np.asarray(x)[order]
    truth, pred = np.asarray(truth)[order], np.asarray(pred)[order]
    lower, upper = np.asarray(lower)[order], np.asarray(upper)[order]
    pad = 50.0
    lo, hi = float(min(lower.min(), truth.min())), float(max(upper.max(), truth.max()))
    span_x = float(x.max() - x.min()) or 1.0
    span_y = (hi - lo) or 1.0

    def sx(v):
        return pad + (v - x.min()) / span_x * (width - 2 * pad)

    def sy(v):
        # value axis inverted so larger suction plots upward, plot-style
        return pad + (hi - v) / span_y * (height - 2 * pad)

    def pts(xs, ys):
        return " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs, ys))

    band_path = pts(x, upper) + " " + pts(x[::-1], lower[::-1])
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="24" text-anchor="middle" font-size="14">{title}</text>',
        f'<polygon points="{band_path}" fill="#f4c7c3" stroke="none" opacity="0.8"/>',
        f'<polyline points="{pts(x, pred)}" fill="none" stroke="#c0392b" stroke-width="1.5"/>',
    ]
    for a, b in zip(x, truth):
        parts.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="2.2" fill="#2a5db0"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# --- entry point -------------------------------------------------------------


def _setup_logging():
    level = os.environ.get("MFCP_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mfcp",
        description="multi-fidelity surrogate pipeline with conformal uncertainty bands",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("degrade", "pretrain", "calibrate", "finetune", "evaluate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--out", default=None, help="override out_dir")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        if name == "calibrate":
            p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                           help="parallel split workers")
    args = parser.parse_args(argv)
    _setup_logging()
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.out_dir = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if args.command == "degrade":
            cmd_degrade(cfg)
        elif args.command == "pretrain":
            cmd_pretrain(cfg)
        elif args.command == "calibrate":
            cmd_calibrate(cfg, workers=args.workers)
        elif args.command == "finetune":
            cmd_finetune(cfg)
        else:
            cmd_evaluate(cfg)
    except (nn.TrainingDiverged, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("numeric failure: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, OSError) as exc:
        log.error("validation failure: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
