"""stitchviz command line: fixture building, stitch training, inversion,
benchmarking, sweeps, gradient diagnostics, and the HTTP service.

Configuration is file-first (TOML or JSON via --config) with explicit flags
taking precedence. Every command writes a RunManifest under
<out>/manifests/; reruns with identical config and seeds reproduce identical
JSON outputs up to run ids and timing fields.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .core import (
    ImageTensor,
    RunManifest,
    StitchVizError,
    UnknownLayerError,
    UnknownModelError,
    bilinear_resize_tensor,
)
from .data import TextureDataset, parse_dataset_spec
from .diagnostics import compare_variants, gradient_grid_map, gradient_map_of_fn
from .evalharness import (
    MethodSpec,
    end_layer_sweep,
    layer_correspondence,
    evaluate_inversion,
    run_benchmark,
)
from .gdinv import GdConfig, gd_invert
from .imageio import load_image, save_png
from .models.encoders import ArchitectureSpec
from .models.fixtures import build_fixtures
from .models.registry import ModelRegistry
from .stitch import StitchTrainingConfig, invert_via_gan, load_stitch, save_stitch, train_stitch

DEFAULT_ADDR = "127.0.0.1:8787"


class CliUsageError(Exception):
    pass


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise CliUsageError(f"config file not found: {path}")
    if p.suffix == ".toml":
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(p, "rb") as f:
            return tomllib.load(f)
    with open(p) as f:
        return json.load(f)


def _effective(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags (flags parse with default=None)."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        cfg.update(_load_config_file(args.config))
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _registry(args) -> ModelRegistry:
    path = getattr(args, "registry", None) or os.environ.get("STITCHVIZ_REGISTRY")
    if not path:
        raise CliUsageError("no registry: pass --registry or set STITCHVIZ_REGISTRY")
    if not Path(path).exists():
        raise CliUsageError(f"registry manifest not found: {path}")
    return ModelRegistry(path)


def _out_dirs(out: str) -> dict:
    root = Path(out)
    dirs = {name: root / name for name in ("stitches", "reports", "images", "manifests", "diagnostics")}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    return dirs


def _write_manifest(out: str, cfg: dict, model_ids=(), seeds=()) -> RunManifest:
    manifest = RunManifest(config=cfg, model_ids=list(model_ids), seeds=list(seeds))
    dirs = _out_dirs(out)
    manifest.save(dirs["manifests"] / f"{manifest.run_id}.json")
    return manifest


def _dataset(spec: str) -> TextureDataset:
    try:
        return parse_dataset_spec(spec)
    except ValueError as exc:
        raise CliUsageError(str(exc))


def _scoring(registry: ModelRegistry, enc, layer: str):
    test_id = registry.role("test")
    if not test_id or test_id == enc.model_id:
        return None
    try:
        test_enc = registry.encoder(test_id)
        test_enc.layer(layer)
    except (UnknownModelError, UnknownLayerError):
        return None
    return test_enc, layer


# ---------------------------------------------------------------- fixtures

FIXTURES_DEFAULTS = {
    "seed": 0, "train_size": 2000, "res": 128,
    "encoder_epochs": 2, "decoder_passes": 1,
}


def cmd_fixtures_build(args) -> int:
    cfg = _effective(args, FIXTURES_DEFAULTS)
    out = args.out or "out/fixtures"
    registry = build_fixtures(out, seed=cfg["seed"], train_size=cfg["train_size"],
                              res=cfg["res"], encoder_epochs=cfg["encoder_epochs"],
                              decoder_passes=cfg["decoder_passes"], log=print)
    _write_manifest(out, cfg, model_ids=registry.model_ids(), seeds=[cfg["seed"]])
    print(f"registry: {registry.manifest_path}")
    print(f"registry hash: {registry.registry_hash()}")
    return 0


# ------------------------------------------------------------ train-stitch

TRAIN_DEFAULTS = {
    "epochs": 10, "learning_rate": 0.01, "batch_size": 8, "seed": 0,
    "data": "textures:size=2000,seed=0", "val_data": "textures:size=64,seed=1",
    "bias": True,
}


def cmd_train_stitch(args) -> int:
    cfg = _effective(args, TRAIN_DEFAULTS)
    registry = _registry(args)
    enc = registry.encoder(args.encoder)
    gen = registry.generator(args.generator)
    info_x = enc.layer(args.layer)
    if (args.target is None) == (args.distance is None):
        raise CliUsageError("pass exactly one of --target or --distance")
    if args.distance is not None:
        info_y = layer_correspondence(info_x, gen, args.distance)
        delta = args.distance
    else:
        info_y = gen.layer(args.target)
        delta = None
    print(f"stitching {enc.model_id}/{args.layer} -> {gen.model_id}/{info_y.name}"
          + (f" (distance {delta:+d})" if delta is not None else ""))

    dataset = _dataset(cfg["data"])
    valset = _dataset(cfg["val_data"])
    scoring = _scoring(registry, enc, args.layer)
    tcfg = StitchTrainingConfig(
        learning_rate=cfg["learning_rate"], batch_size=cfg["batch_size"],
        epochs=cfg["epochs"], bias=cfg["bias"], seed=cfg["seed"],
    )
    stitch, history = train_stitch(
        enc, args.layer, gen, info_y.name, dataset, tcfg, valset,
        test_enc=scoring[0] if scoring else None,
        test_layer=scoring[1] if scoring else None,
        log=print,
    )
    stitch.metadata["registry_hash"] = registry.registry_hash()
    if delta is not None:
        stitch.metadata["delta"] = delta
    name = args.name or f"{enc.model_id}.{args.layer}_to_{gen.model_id}.{info_y.name}"
    dirs = _out_dirs(args.out or "out")
    path = dirs["stitches"] / name
    save_stitch(stitch, path)
    _write_manifest(args.out or "out", {**cfg, "encoder": enc.model_id, "layer": args.layer,
                                        "generator": gen.model_id, "target": info_y.name},
                    model_ids=[enc.model_id, gen.model_id], seeds=[cfg["seed"]])
    print(f"saved stitch {name} (best epoch {stitch.metadata['best_epoch']}, "
          f"val cosine {history[stitch.metadata['best_epoch']]['val_cosine_test']:.4f})")
    print(str(path) + ".json")
    return 0


# ----------------------------------------------------------------- invert

INVERT_DEFAULTS = {"seed": 0, "steps": 512, "method": "gan"}


def cmd_invert(args) -> int:
    cfg = _effective(args, INVERT_DEFAULTS)
    registry = _registry(args)
    enc = registry.encoder(args.encoder)
    enc.layer(args.layer)
    if args.image:
        data = load_image(args.image)
        ref = enc.reference_resolution
        img = ImageTensor.unit(bilinear_resize_tensor(data, ref, ref).clamp(0, 1))
        image_id = Path(args.image).stem
    else:
        ds = TextureDataset(args.sample + 1, enc.reference_resolution, seed=0)
        img = ImageTensor.unit(ds.image(args.sample))
        image_id = f"sample{args.sample}"

    method = cfg["method"]
    if method == "gan":
        if not args.stitch:
            raise CliUsageError("method 'gan' requires --stitch")
        stitch = load_stitch(args.stitch, registry=registry)
        gen = registry.generator(stitch.target.model_id)
        result = invert_via_gan(enc, args.layer, stitch, gen,
                                stitch.target.layer_name, img, seed=cfg["seed"])
    else:
        target = enc.extract(args.layer, img)
        gd = GdConfig(method=method, steps=cfg["steps"], seed=cfg["seed"],
                      resolution=enc.reference_resolution)
        result = gd_invert(enc, args.layer, target, gd)

    scoring = _scoring(registry, enc, args.layer)
    if scoring is not None:
        result.scores = evaluate_inversion(scoring[0], scoring[1], img, result.image)

    dirs = _out_dirs(args.out or "out")
    stem = f"{image_id}_{enc.model_id}.{args.layer}_{method}_seed{cfg['seed']}"
    save_png(result.image.data, dirs["images"] / f"{stem}.png")
    sidecar = {
        "config": {**cfg, "encoder": enc.model_id, "layer": args.layer, "image": image_id},
        **result.to_dict(),
    }
    with open(dirs["images"] / f"{stem}.json", "w") as f:
        json.dump(sidecar, f, indent=2)
    _write_manifest(args.out or "out", sidecar["config"],
                    model_ids=[enc.model_id], seeds=[cfg["seed"]])
    print(f"{dirs['images'] / stem}.png  wall_time {result.wall_time_s:.3f}s")
    return 0


# -------------------------------------------------------------- benchmark

BENCH_DEFAULTS = {
    "repeats": 20, "steps": 512, "seed": 0,
    "data": "textures:size=100,seed=3",
}


def _find_stitch_for_layer(stitch_dir: Path, registry, encoder_id: str, layer: str):
    candidates = []
    for manifest in sorted(stitch_dir.glob("*.json")):
        try:
            s = load_stitch(manifest, registry=registry)
        except Exception:
            continue
        if s.source.model_id == encoder_id and s.source.layer_name == layer:
            delta = s.metadata.get("delta")
            candidates.append((0 if delta == 0 else 1, manifest.stem, s))
    if not candidates:
        raise CliUsageError(f"no stitch for {encoder_id}/{layer} under {stitch_dir}")
    candidates.sort(key=lambda c: (c[0], c[1]))
    return candidates[0][2]


def cmd_benchmark(args) -> int:
    cfg = _effective(args, BENCH_DEFAULTS)
    registry = _registry(args)
    enc = registry.encoder(args.encoder)
    test_id = registry.role("test")
    if not test_id or test_id == enc.model_id:
        raise CliUsageError("benchmark requires a registered test network role")
    test_enc = registry.encoder(test_id)
    dataset = _dataset(cfg["data"])
    layers = args.layers.split(",")
    method_names = args.methods.split(",")
    stitch_dir = Path(args.stitch_dir or Path(args.out or "out") / "stitches")
    dirs = _out_dirs(args.out or "out")

    gen = None
    for layer in layers:
        methods = []
        for name in method_names:
            if name == "gan":
                stitch = _find_stitch_for_layer(stitch_dir, registry, enc.model_id, layer)
                gen = registry.generator(stitch.target.model_id)
                methods.append(MethodSpec("gan", stitch=stitch,
                                          layer_y=stitch.target.layer_name))
            elif name in ("plain", "fft_dec"):
                methods.append(MethodSpec(name, gd=GdConfig(method=name, steps=cfg["steps"])))
            else:
                raise CliUsageError(f"unknown method: {name!r}")
        report = run_benchmark(enc, layer, test_enc, layer, dataset, methods, gen=gen,
                               repeats=cfg["repeats"], base_seed=cfg["seed"],
                               protocol_extra={"dataset": cfg["data"]}, log=print)
        report.save(dirs["reports"] / f"{report.run_id}.json")
        with open(dirs["reports"] / f"{report.run_id}.csv", "w") as f:
            f.write(report.to_csv())
        print(report.render_table())
        print(f"report: {dirs['reports'] / report.run_id}.json")
    _write_manifest(args.out or "out",
                    {**cfg, "layers": layers, "methods": method_names, "encoder": enc.model_id},
                    model_ids=[enc.model_id, test_id], seeds=[cfg["seed"]])
    return 0


# ------------------------------------------------------------------ sweep

SWEEP_DEFAULTS = {"seed": 0, "data": "textures:size=32,seed=4"}


def _parse_distances(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


def cmd_sweep(args) -> int:
    cfg = _effective(args, SWEEP_DEFAULTS)
    registry = _registry(args)
    enc = registry.encoder(args.encoder)
    info_x = enc.layer(args.layer)
    deltas = _parse_distances(args.distances)
    stitch_dir = Path(args.stitch_dir or Path(args.out or "out") / "stitches")
    test_id = registry.role("test")
    if not test_id or test_id == enc.model_id:
        raise CliUsageError("sweep requires a registered test network role")
    test_enc = registry.encoder(test_id)

    stitches = {}
    gen = None
    for manifest in sorted(stitch_dir.glob("*.json")):
        try:
            s = load_stitch(manifest, registry=registry)
        except Exception:
            continue
        delta = s.metadata.get("delta")
        if (delta in deltas and s.source.model_id == enc.model_id
                and s.source.layer_name == args.layer and delta not in stitches):
            stitches[delta] = s
            gen = registry.generator(s.target.model_id)
    missing = [d for d in deltas if d not in stitches]
    if missing:
        raise CliUsageError(
            f"missing stitch checkpoints for distances {missing} under {stitch_dir}"
        )

    for delta in sorted(deltas):
        print(f"  {delta:+d} -> {layer_correspondence(info_x, gen, delta).name}")
    dataset = _dataset(cfg["data"])
    result = end_layer_sweep(enc, args.layer, gen, test_enc, args.layer,
                             stitches, dataset, base_seed=cfg["seed"], log=print)
    dirs = _out_dirs(args.out or "out")
    manifest = _write_manifest(args.out or "out",
                               {**cfg, "layer": args.layer, "distances": deltas},
                               model_ids=[enc.model_id, test_id], seeds=[cfg["seed"]])
    path = dirs["reports"] / f"sweep_{manifest.run_id}.json"
    result.save(path)
    print(f"sweep: {path}")
    return 0


# ---------------------------------------------------------- diagnose-grid

DIAG_DEFAULTS = {"seed": 0, "size": 64}


def cmd_diagnose_grid(args) -> int:
    cfg = _effective(args, DIAG_DEFAULTS)
    dirs = _out_dirs(args.out or "out")
    results = {}
    if args.fixture:
        import torch.nn as nn
        import torch.nn.functional as F

        if args.fixture == "conv1x1s2":
            fn = nn.Conv2d(3, 4, 1, stride=2, bias=False)
        elif args.fixture == "bilinear3x3":
            conv = nn.Conv2d(3, 4, 3, 1, 1)

            def fn(x, conv=conv):
                return conv(F.interpolate(x, scale_factor=0.5, mode="bilinear",
                                          align_corners=False))
        else:
            raise CliUsageError(f"unknown fixture: {args.fixture!r}")
        gmap = gradient_map_of_fn(fn, (3, cfg["size"], cfg["size"]), seed=cfg["seed"])
        results[args.fixture] = gmap
    elif args.compare:
        cmp = compare_variants(ArchitectureSpec("resnet_small"), layer=args.layer or "stage2",
                               input_size=cfg["size"], seed=cfg["seed"])
        results["strided"] = cmp["strided"]
        results["bilinear"] = cmp["bilinear"]
        print(f"noisiness strided={cmp['noisiness']['strided']:.4f} "
              f"bilinear={cmp['noisiness']['bilinear']:.4f}")
    else:
        if not args.encoder or not args.layer:
            raise CliUsageError("pass --encoder and --layer, or --fixture, or --compare")
        registry = _registry(args)
        enc = registry.encoder(args.encoder)
        results[f"{args.encoder}.{args.layer}"] = gradient_grid_map(
            enc, args.layer, input_size=cfg["size"], seed=cfg["seed"])

    summary = {}
    for name, gmap in results.items():
        png = dirs["diagnostics"] / f"{name.replace('/', '_')}.png"
        gmap.save_png(png)
        summary[name] = gmap.to_dict()
        print(f"{name}: zero_fraction={gmap.zero_fraction:.4f} period={gmap.period} -> {png}")
    out_json = dirs["diagnostics"] / "gradient_grid.json"
    with open(out_json, "w") as f:
        json.dump(summary, f, indent=2)
    _write_manifest(args.out or "out", {**cfg, "fixture": args.fixture, "layer": args.layer},
                    seeds=[cfg["seed"]])
    print(f"summary: {out_json}")
    return 0


# ------------------------------------------------------------------ serve

def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app
    from .service.state import AppState

    registry = _registry(args)
    out = Path(args.out or "out")
    state = AppState(registry,
                     stitch_dir=args.stitch_dir or out / "stitches",
                     reports_dir=args.reports_dir or out / "reports")
    ui_dir = args.ui if args.ui and Path(args.ui).exists() else None
    app = create_app(state, ui_dir=ui_dir)
    addr = args.addr or os.environ.get("STITCHVIZ_ADDR", DEFAULT_ADDR)
    host, _, port = addr.partition(":")
    uvicorn.run(app, host=host, port=int(port or 8787), log_level="info")
    return 0


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stitchviz", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML/JSON config file; flags override it")
        p.add_argument("--out", help="output directory (default ./out)")
        p.add_argument("--registry", help="registry manifest (or STITCHVIZ_REGISTRY)")
        p.add_argument("--seed", type=int)

    fixtures = sub.add_parser("fixtures", help="fixture model management")
    fsub = fixtures.add_subparsers(dest="fixtures_command", required=True)
    fb = fsub.add_parser("build", help="train and register desk-scale fixture models")
    common(fb)
    fb.add_argument("--train-size", type=int, dest="train_size")
    fb.add_argument("--res", type=int)
    fb.add_argument("--encoder-epochs", type=int, dest="encoder_epochs")
    fb.add_argument("--decoder-passes", type=int, dest="decoder_passes")
    fb.set_defaults(func=cmd_fixtures_build)

    ts = sub.add_parser("train-stitch", help="train a 1x1 stitch between two layers")
    common(ts)
    ts.add_argument("--encoder", required=True)
    ts.add_argument("--layer", required=True)
    ts.add_argument("--generator", required=True)
    ts.add_argument("--target", help="generator layer name")
    ts.add_argument("--distance", type=int, help="sampling-distance offset from the matched layer")
    ts.add_argument("--data")
    ts.add_argument("--val-data", dest="val_data")
    ts.add_argument("--epochs", type=int)
    ts.add_argument("--learning-rate", type=float, dest="learning_rate")
    ts.add_argument("--batch-size", type=int, dest="batch_size")
    ts.add_argument("--no-bias", dest="bias", action="store_false", default=None)
    ts.add_argument("--name", help="stitch checkpoint name")
    ts.set_defaults(func=cmd_train_stitch)

    inv = sub.add_parser("invert", help="invert one image's activations")
    common(inv)
    inv.add_argument("--method", choices=["gan", "fft_dec", "plain"])
    inv.add_argument("--encoder", required=True)
    inv.add_argument("--layer", required=True)
    inv.add_argument("--image", help="input image path")
    inv.add_argument("--sample", type=int, default=0, help="synthetic sample index")
    inv.add_argument("--stitch", help="stitch checkpoint path (gan)")
    inv.add_argument("--steps", type=int)
    inv.set_defaults(func=cmd_invert)

    bench = sub.add_parser("benchmark", help="compare inversion methods over a dataset")
    common(bench)
    bench.add_argument("--encoder", required=True)
    bench.add_argument("--layers", required=True, help="comma-separated encoder layers")
    bench.add_argument("--methods", default="gan,fft_dec,plain")
    bench.add_argument("--repeats", type=int)
    bench.add_argument("--steps", type=int)
    bench.add_argument("--data")
    bench.add_argument("--stitch-dir", dest="stitch_dir")
    bench.set_defaults(func=cmd_benchmark)

    sweep = sub.add_parser("sweep", help="stitch into different target layers")
    common(sweep)
    sweep.add_argument("--encoder", required=True)
    sweep.add_argument("--layer", required=True)
    sweep.add_argument("--distances", default="-2..2")
    sweep.add_argument("--data")
    sweep.add_argument("--stitch-dir", dest="stitch_dir")
    sweep.set_defaults(func=cmd_sweep)

    diag = sub.add_parser("diagnose-grid", help="gradient grid-artifact maps")
    common(diag)
    diag.add_argument("--encoder")
    diag.add_argument("--layer")
    diag.add_argument("--fixture", choices=["conv1x1s2", "bilinear3x3"])
    diag.add_argument("--compare", action="store_true",
                      help="compare strided vs bilinear desk encoders at random init")
    diag.add_argument("--size", type=int)
    diag.set_defaults(func=cmd_diagnose_grid)

    serve = sub.add_parser("serve", help="run the HTTP service")
    common(serve)
    serve.add_argument("--addr", help="host:port (or STITCHVIZ_ADDR)")
    serve.add_argument("--stitch-dir", dest="stitch_dir")
    serve.add_argument("--reports-dir", dest="reports_dir")
    serve.add_argument("--ui", help="static viewer directory to serve at /")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliUsageError, UnknownModelError, UnknownLayerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StitchVizError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
