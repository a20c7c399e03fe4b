# src/genconv/cli/app.py
import os

# BLAS pools stay single-threaded; --threads controls parallelism explicitly
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import orjson
from dotenv import load_dotenv

from ..core.cloud import LabeledCloud
from ..datasets.cache import read_dataset, write_dataset
from ..datasets.modelnet import load_modelnet10
from ..datasets.toy import make_toy_dataset
from ..domain.models import DataSpec, RunConfig
from ..errors import ConfigError, DataError, GenConvError, NumericalError, ShapeError
from ..logging import enable_file_logging, get_component_logger, setup_logging
from ..run_config import config_hash, load_run_config, validate_run_config
from ..services.benchmark import bench_scaling, default_counts, doubling_ratios, write_bench_csv
from ..services.checkpoint import load_checkpoint, save_checkpoint
from ..services.model import GenConvModel, build_model
from ..services.trainer import evaluate, train, write_confusion_csv, write_epoch_log
from ..settings import settings
from ..viz.filter_probe import probe_filter
from ..viz.image_writer import COLORMAPS, write_image

log = get_component_logger("cli")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

CHECKPOINT_NAME = "checkpoint.gckp"


# ─────────────────────────────
# ⚙️ Config resolution
# ─────────────────────────────
def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        out["out_dir"] = args.out
    if getattr(args, "threads", None) is not None:
        out["threads"] = args.threads
    if getattr(args, "epochs", None) is not None:
        out.setdefault("model", {})["epochs"] = args.epochs
    return out


def resolve_config(args: argparse.Namespace, default_preset: Optional[str] = None) -> RunConfig:
    """Preset, then --config, then flags; --k rewrites K in every layer."""
    preset = args.preset or (None if args.config else default_preset)
    config = load_run_config(args.config, preset, _overrides(args))
    if getattr(args, "k", None) is not None:
        data = config.model_dump(mode="json")
        for layer in data["model"]["layers"]:
            layer["k"] = args.k
        config = validate_run_config(data, "--k override")
    return config


def _threads(args: argparse.Namespace, config: Optional[RunConfig] = None) -> int:
    if getattr(args, "threads", None) is not None:
        return args.threads
    return config.threads if config is not None else settings.threads


def _prepare_out(directory: str) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    if settings.log_to_file:
        enable_file_logging(str(out))
    return out


def _write_json(path: Path, payload: Dict[str, Any]) -> None:
    path.write_bytes(orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS))


# ─────────────────────────────
# 📦 Dataset resolution
# ─────────────────────────────
def load_splits(
    data: DataSpec, seed: int, threads: int, need_train: bool = True
) -> Tuple[List[LabeledCloud], List[LabeledCloud]]:
    if data.modelnet_root:
        train_set, test_set, _, _ = load_modelnet10(
            data.modelnet_root, data.points_per_cloud, seed, threads, data.cache_dir
        )
        return train_set, test_set
    train_set: List[LabeledCloud] = []
    test_set: List[LabeledCloud] = []
    if need_train:
        if not data.train_dir:
            raise DataError("no training data configured (data.train_dir or data.modelnet_root)")
        train_set = read_dataset(data.train_dir).split("train")
    if data.test_dir:
        test_set = read_dataset(data.test_dir).split("test")
    return train_set, test_set


def _data_spec(args: argparse.Namespace, config: Optional[RunConfig]) -> DataSpec:
    data = config.data if config is not None else DataSpec()
    if getattr(args, "data", None):
        data = data.model_copy(update={"train_dir": args.data, "test_dir": args.data, "modelnet_root": None})
    return data


def _optional_config(args: argparse.Namespace) -> Optional[RunConfig]:
    if args.config or args.preset:
        return resolve_config(args)
    return None


def _checkpoint_path(args: argparse.Namespace, config: Optional[RunConfig]) -> str:
    if args.checkpoint:
        return args.checkpoint
    out_dir = args.out or (config.out_dir if config is not None else None)
    if not out_dir:
        raise ConfigError("no checkpoint given (use --checkpoint or --out)")
    return str(Path(out_dir) / CHECKPOINT_NAME)


# ─────────────────────────────
# 🧰 Subcommands
# ─────────────────────────────
def cmd_gen_toy(args: argparse.Namespace) -> int:
    config = resolve_config(args, default_preset="toy")
    data = config.data
    n_train = args.n_train if args.n_train is not None else data.n_train
    n_test = args.n_test if args.n_test is not None else data.n_test
    points = args.points or data.toy_points
    jitter = args.jitter if args.jitter is not None else data.toy_jitter
    out = Path(args.out or data.train_dir or config.out_dir)

    seed = config.model.seed
    splits = {
        "train": make_toy_dataset(n_train, seed, points, jitter, split="train"),
        "test": make_toy_dataset(n_test, seed, points, jitter, split="test"),
    }
    manifest = write_dataset(out, splits)
    print(f"wrote {n_train} train + {n_test} test clouds to {out} (manifest {manifest.name})")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if args.data:
        config = config.model_copy(update={"data": _data_spec(args, config)})
    out = _prepare_out(config.out_dir)
    threads = _threads(args, config)
    train_set, test_set = load_splits(config.data, config.model.seed, threads)

    model = build_model(config.model)
    digest = config_hash(config.model)
    print(f"parameters: {model.parameter_count}")
    log.info("train_start", clouds=len(train_set), epochs=config.model.epochs, config_hash=digest[:12])

    result = train(model, train_set, config.model) if config.model.epochs > 0 else None
    records = result.epochs if result is not None else []
    write_epoch_log(records, str(out / "epochs.csv"))
    save_checkpoint(model, str(out / CHECKPOINT_NAME))
    _write_json(out / "config.json", config.model_dump(mode="json"))

    metrics: Dict[str, Any] = {
        "config_hash": digest,
        "seed": config.model.seed,
        "parameters": model.parameter_count,
        "epochs": len(records),
        "train_accuracy": records[-1].train_acc if records else None,
        "train_loss": records[-1].mean_loss if records else None,
    }
    if records:
        print(f"final train accuracy: {records[-1].train_acc:.4f}")
    if test_set:
        report = evaluate(model, test_set, threads)
        metrics["test_accuracy"] = report.accuracy
        metrics["test_clouds"] = report.total
        write_confusion_csv(report, str(out / "confusion.csv"))
        print(f"test accuracy: {report.accuracy:.4f}")
    _write_json(out / "metrics.json", metrics)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = _optional_config(args)
    model = load_checkpoint(_checkpoint_path(args, config))
    data = _data_spec(args, config)
    _, test_set = load_splits(data, model.config.seed, _threads(args, config), need_train=False)
    if not test_set:
        raise DataError("no test data configured (--data, data.test_dir or data.modelnet_root)")

    report = evaluate(model, test_set, _threads(args, config))
    out = _prepare_out(args.out or (config.out_dir if config is not None else "."))
    write_confusion_csv(report, str(out / "confusion.csv"))
    _write_json(
        out / "eval_metrics.json",
        {"accuracy": report.accuracy, "clouds": report.total, "config_hash": config_hash(model.config)},
    )
    print(f"accuracy: {report.accuracy:.4f} ({int(np.trace(report.confusion))}/{report.total})")
    return EXIT_OK


def _layer_filter(model: GenConvModel, index: int):
    if index == len(model.layers):
        return model.head.filter
    if not 0 <= index < len(model.layers):
        raise ConfigError(f"layer {index} out of range 0..{len(model.layers)} (the last index is the head)")
    return model.layers[index].filter


def cmd_visualize(args: argparse.Namespace) -> int:
    config = _optional_config(args)
    model = load_checkpoint(_checkpoint_path(args, config))
    net = _layer_filter(model, args.layer)
    channels = [args.channel] if args.channel is not None else list(range(net.output_width))
    if any(not 0 <= c < net.output_width for c in channels):
        raise ConfigError(f"channel {args.channel} out of range 0..{net.output_width - 1}")

    out = _prepare_out(args.out or (config.out_dir if config is not None else ".")) / "filters"
    resolution = args.resolution or settings.default_resolution
    written = 0
    for channel in channels:
        image = probe_filter(
            net,
            channel,
            extent=args.extent,
            resolution=resolution,
            spatial_dims=model.config.spatial_dims,
            slices=args.slices,
        )
        suffix = ".pgm" if args.colormap == "gray" else ".ppm"
        written += len(write_image(image, out / f"layer{args.layer}_ch{channel}{suffix}", args.colormap, args.png))
    print(f"wrote {len(channels)} filter images ({written} files) at {resolution}x{resolution} to {out}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    counts = sorted(args.counts) if args.counts else default_counts()
    rows = bench_scaling(counts, k=args.k or 16, repetitions=args.repetitions, seed=args.seed or 0, spatial_dims=args.dims)
    out = _prepare_out(args.out or "runs/bench")
    write_bench_csv(rows, str(out / "bench.csv"))
    for row in rows:
        print(f"N={row.n_points:>7d}  knn {row.knn_ms:10.3f} ms  forward {row.forward_ms:10.3f} ms")
    for name in ("knn_ms", "forward_ms"):
        ratios = doubling_ratios(rows, name)
        if ratios:
            print(f"{name} per-doubling ratios: " + ", ".join(f"{r:.2f}" for r in ratios))
    return EXIT_OK


def cmd_activations(args: argparse.Namespace) -> int:
    config = _optional_config(args)
    model = load_checkpoint(_checkpoint_path(args, config))
    data = _data_spec(args, config)
    train_set, test_set = load_splits(data, model.config.seed, _threads(args, config), need_train=args.split == "train")
    items = train_set if args.split == "train" else test_set
    if not 0 <= args.index < len(items):
        raise ConfigError(f"cloud index {args.index} out of range for {len(items)} {args.split} clouds")

    activations = model.dump_activations(items[args.index].cloud, args.layer, seed=args.seed or 0)
    axes = ["x", "y", "z"][: activations.spatial_dims]
    header = ",".join(axes + [f"c{i}" for i in range(activations.feature_dims)])
    out = _prepare_out(args.out or (config.out_dir if config is not None else "."))
    target = out / f"activations_{args.split}{args.index}_layer{args.layer}.csv"
    np.savetxt(target, activations.as_matrix(), delimiter=",", fmt="%.9g", header=header, comments="")
    print(f"wrote {activations.n_points} rows to {target}")
    return EXIT_OK


# ─────────────────────────────
# 🖥️ Argument parsing
# ─────────────────────────────
def _common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", help="JSON run config")
        p.add_argument("--preset", help="bundled preset (toy, modelnet10)")
    p.add_argument("--seed", type=int, help="root seed for every random stream")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads for evaluation and data loading")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genconv", description="Generalized point-cloud convolution toolkit")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ...")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-toy", help="generate the squares/circles toy dataset")
    _common(p)
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--points", type=int)
    p.add_argument("--jitter", type=float)
    p.set_defaults(func=cmd_gen_toy)

    p = sub.add_parser("train", help="train a model and write checkpoint + epoch log")
    _common(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--k", type=int, help="neighbor count for every layer")
    p.add_argument("--data", help="PCLD dataset directory (overrides the config)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    _common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--data")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("visualize", help="render learned filters as images")
    _common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--layer", type=int, default=0, help="layer index; len(layers) selects the head")
    p.add_argument("--channel", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--extent", type=float, default=1.0)
    p.add_argument("--slices", type=int)
    p.add_argument("--colormap", choices=COLORMAPS, default="diverging")
    p.add_argument("--png", action="store_true")
    p.set_defaults(func=cmd_visualize)

    p = sub.add_parser("bench", help="KNN and forward scaling benchmark")
    _common(p, config=False)
    p.add_argument("--counts", type=int, nargs="+")
    p.add_argument("--k", type=int)
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--dims", type=int, choices=(2, 3), default=3)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("activations", help="dump per-point activations of one layer to CSV")
    _common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--data")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--layer", type=int, default=0)
    p.set_defaults(func=cmd_activations)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.func(args)
    except ConfigError as e:
        log.error("config_error", error=str(e))
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        log.error("numerical_error", error=str(e), epoch=e.epoch, cloud=e.cloud_id)
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, ShapeError) as e:
        log.error("data_error", error=str(e))
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except GenConvError as e:
        log.error("run_failed", error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        log.error("io_error", error=str(e))
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
