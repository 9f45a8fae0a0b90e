"""Evaluation harness: score reconstructions in a second network's hidden
layer, benchmark inversion methods with wall-clock timing, sweep over target
layers, and pick extreme samples.

Scoring runs the original and the reconstruction through an independent test
network and compares activations at its corresponding layer; this avoids
rewarding adversarial pixel patterns that only the interpreted network sees.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import time
import uuid
from dataclasses import dataclass, field, replace

import torch

from .core import (
    ActivationTensor,
    ImageTensor,
    InversionResult,
    UnknownLayerError,
    bilinear_resize_tensor,
    nearest_resize_tensor,
)
from .gdinv import GdConfig, gd_invert
from .metrics import HIGHER_IS_BETTER, MetricConfig, compute_metrics
from .models.adapters import EncoderAdapter, GeneratorAdapter, LayerInfo, derived_seed
from .stitch import StitchLayer, apply_stitch, invert_via_gan

REPORT_VERSION = 1
DEFAULT_METRICS = ("cosine", "gram_cosine", "l1")


@dataclass(frozen=True)
class EvalProtocol:
    """Who gets interpreted, who scores, and with which metrics."""

    interpret_model_id: str
    layer_x: str
    test_model_id: str
    test_layer: str
    metric_names: tuple = DEFAULT_METRICS
    dataset_id: str = "textures"

    def __post_init__(self):
        if self.interpret_model_id == self.test_model_id:
            raise ValueError("test network must differ from the interpreted network")

    def to_dict(self) -> dict:
        return {
            "interpret_model_id": self.interpret_model_id,
            "layer_x": self.layer_x,
            "test_model_id": self.test_model_id,
            "test_layer": self.test_layer,
            "metric_names": list(self.metric_names),
            "dataset_id": self.dataset_id,
        }


def _test_activations(test_enc: EncoderAdapter, layer: str, img: ImageTensor) -> torch.Tensor:
    ref = test_enc.reference_resolution
    data = bilinear_resize_tensor(img.data, ref, ref).clamp(0.0, 1.0)
    native = test_enc.to_native(ImageTensor.unit(data)).unsqueeze(0)
    with torch.no_grad():
        return test_enc.forward_to(native, layer).squeeze(0)


def evaluate_inversion(test_enc: EncoderAdapter, test_layer: str,
                       x: ImageTensor, reconstruction: ImageTensor,
                       metric_names=DEFAULT_METRICS,
                       cfg: MetricConfig = MetricConfig()) -> dict:
    """Metric values between test-network activations of x and reconstruction."""
    ref_acts = _test_activations(test_enc, test_layer, x)
    rec_acts = _test_activations(test_enc, test_layer, reconstruction)
    return compute_metrics(rec_acts, ref_acts, metric_names, cfg)


def layer_correspondence(layer_x: LayerInfo, generator_layers, delta: int = 0) -> LayerInfo:
    """The generator layer whose distance from the output equals the encoder
    layer's distance from the input, shifted by delta (positive = closer to
    the generator output)."""
    if isinstance(generator_layers, GeneratorAdapter):
        generator_layers = generator_layers.layers()
    want = layer_x.sampling_distance - delta
    for info in generator_layers:
        if info.sampling_distance == want:
            return info
    available = sorted(i.sampling_distance for i in generator_layers)
    raise UnknownLayerError(
        f"no generator layer at sampling distance {want} "
        f"(layer {layer_x.name!r} distance {layer_x.sampling_distance}, delta {delta:+d}; "
        f"available distances {available})"
    )


@dataclass(frozen=True)
class MethodSpec:
    """One benchmark arm: the GAN stitch path or a gradient-descent baseline."""

    name: str  # "gan", "plain", or "fft_dec"
    stitch: StitchLayer | None = None
    layer_y: str | None = None
    gd: GdConfig | None = None

    def __post_init__(self):
        if self.name == "gan" and self.stitch is None:
            raise ValueError("gan method requires a stitch")
        if self.name in ("plain", "fft_dec") and self.gd is None:
            object.__setattr__(self, "gd", GdConfig(method=self.name))

    def describe(self) -> dict:
        d = {"name": self.name, "layer_y": self.layer_y}
        if self.gd is not None:
            d["gd"] = self.gd.to_dict()
        return d


def _reconstruct(method: MethodSpec, enc: EncoderAdapter, layer_x: str,
                 gen: GeneratorAdapter | None, img: ImageTensor, seed: int) -> InversionResult:
    if method.name == "gan":
        return invert_via_gan(enc, layer_x, method.stitch, gen, method.layer_y, img, seed)
    target = enc.extract(layer_x, img)
    cfg = replace(method.gd, method=method.name, seed=seed,
                  resolution=img.data.shape[-1])
    return gd_invert(enc, layer_x, target, cfg)


@dataclass
class MetricReport:
    protocol: dict
    methods: list
    dataset_size: int
    records: list = field(default_factory=list)  # {sample_id, method, layer_x, layer_y, metric, value}
    timings: dict = field(default_factory=dict)  # method -> {eval_time_s, repeats}
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    created_at: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())

    def aggregates(self) -> dict:
        """mean/std/count per (method, metric), recomputed from the records."""
        groups: dict = {}
        for r in self.records:
            groups.setdefault(r["method"], {}).setdefault(r["metric"], []).append(r["value"])
        out = {}
        for method, metrics in groups.items():
            out[method] = {}
            for metric, values in metrics.items():
                t = torch.tensor(values, dtype=torch.float64)
                out[method][metric] = {
                    "mean": float(t.mean()),
                    "std": float(t.std(unbiased=False)) if len(values) > 1 else 0.0,
                    "count": len(values),
                }
        return out

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "run_id": self.run_id,
            "created_at": self.created_at,
            "protocol": self.protocol,
            "methods": self.methods,
            "dataset_size": self.dataset_size,
            "records": self.records,
            "aggregates": self.aggregates(),
            "timings": self.timings,
        }

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @staticmethod
    def from_dict(d: dict) -> "MetricReport":
        if d.get("version") != REPORT_VERSION:
            raise ValueError(f"unsupported report version: {d.get('version')}")
        return MetricReport(
            protocol=d["protocol"],
            methods=d["methods"],
            dataset_size=d["dataset_size"],
            records=d["records"],
            timings=d["timings"],
            run_id=d["run_id"],
            created_at=d["created_at"],
        )

    @staticmethod
    def load(path) -> "MetricReport":
        with open(path) as f:
            return MetricReport.from_dict(json.load(f))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(
            buf, fieldnames=["sample_id", "method", "layer_x", "layer_y", "metric", "value"]
        )
        writer.writeheader()
        for r in self.records:
            writer.writerow(r)
        return buf.getvalue()

    def render_table(self) -> str:
        """Plain-text table: one row per method with the three metrics and time."""
        agg = self.aggregates()
        layer = self.protocol.get("layer_x", "?")
        metric_names = [m for m in DEFAULT_METRICS
                        if any(m in v for v in agg.values())]
        header = ["layer", "method"] + metric_names + ["eval time"]
        rows = [header]
        for method in agg:
            cells = [layer, method]
            for m in metric_names:
                s = agg[method].get(m)
                cells.append(f"{s['mean']:.3f} ± {s['std']:.3f}" if s else "-")
            t = self.timings.get(method, {}).get("eval_time_s")
            cells.append(f"{t:.1f}s" if t is not None else "-")
            rows.append(cells)
        widths = [max(len(str(r[i])) for r in rows) for i in range(len(header))]
        lines = []
        for i, row in enumerate(rows):
            lines.append("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines)


def run_benchmark(enc: EncoderAdapter, layer_x: str,
                  test_enc: EncoderAdapter, test_layer: str,
                  dataset, methods, gen: GeneratorAdapter | None = None,
                  repeats: int = 20, metric_names=DEFAULT_METRICS,
                  base_seed: int = 0, protocol_extra: dict | None = None,
                  log=None) -> MetricReport:
    """Benchmark each method over the dataset.

    A timed pass covers reconstruction plus metric computation for every
    sample. The GAN pass is repeated `repeats` times and the mean wall time
    reported; gradient-descent passes run once since their cost dominates.
    """
    if len(dataset) == 0:
        raise ValueError("benchmark dataset is empty")
    protocol = {
        "interpret_model_id": enc.model_id,
        "layer_x": layer_x,
        "test_model_id": test_enc.model_id,
        "test_layer": test_layer,
        "metric_names": list(metric_names),
        "repeats": repeats,
        **(protocol_extra or {}),
    }
    report = MetricReport(protocol=protocol,
                          methods=[m.describe() for m in methods],
                          dataset_size=len(dataset))

    originals = [ImageTensor.unit(dataset[i][0]) for i in range(len(dataset))]

    def timed_pass(method: MethodSpec, keep_records: bool) -> float:
        t0 = time.perf_counter()
        for i, img in enumerate(originals):
            seed = derived_seed(base_seed, "bench", method.name, i)
            result = _reconstruct(method, enc, layer_x, gen, img, seed)
            values = evaluate_inversion(test_enc, test_layer, img, result.image, metric_names)
            if keep_records:
                for metric, value in values.items():
                    report.records.append({
                        "sample_id": i,
                        "method": method.name,
                        "layer_x": layer_x,
                        "layer_y": method.layer_y,
                        "metric": metric,
                        "value": value,
                    })
        return time.perf_counter() - t0

    for method in methods:
        n_passes = repeats if method.name == "gan" else 1
        total = timed_pass(method, keep_records=True)
        for k in range(1, n_passes):
            total += timed_pass(method, keep_records=False)
            if log:
                log(f"{method.name}: timing pass {k + 1}/{n_passes}")
        report.timings[method.name] = {
            "eval_time_s": total / n_passes,
            "repeats": n_passes,
        }
        if log:
            log(f"{method.name}: {report.timings[method.name]['eval_time_s']:.2f}s per pass")
    return report


@dataclass
class SweepResult:
    """Per-delta metric values, absolute and relative to delta = 0."""

    layer_x: str
    rows: list  # {delta, metric, layer_y, absolute, relative}

    def to_dict(self) -> dict:
        return {"layer_x": self.layer_x, "rows": self.rows}

    def to_plot_data(self) -> dict:
        """Series keyed by metric: sorted (delta, relative) pairs for charting."""
        series: dict = {}
        for row in sorted(self.rows, key=lambda r: r["delta"]):
            series.setdefault(row["metric"], []).append(
                {"delta": row["delta"], "relative": row["relative"], "absolute": row["absolute"]}
            )
        return series

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump({**self.to_dict(), "plot_data": self.to_plot_data()}, f, indent=2)


def end_layer_sweep(enc: EncoderAdapter, layer_x: str, gen: GeneratorAdapter,
                    test_enc: EncoderAdapter, test_layer: str,
                    stitches: dict, dataset, metric_names=("cosine", "l1"),
                    base_seed: int = 0, log=None) -> SweepResult:
    """Evaluate stitching into target layers at several sampling-distance
    offsets; values are reported relative to the delta = 0 stitch."""
    if 0 not in stitches:
        raise ValueError("sweep requires a stitch at delta = 0 for normalization")
    info_x = enc.layer(layer_x)
    absolute: dict = {}
    layer_names: dict = {}
    for delta in sorted(stitches):
        info_y = layer_correspondence(info_x, gen, delta)
        stitch = stitches[delta]
        if stitch.target.layer_name != info_y.name:
            raise ValueError(
                f"stitch for delta {delta:+d} targets {stitch.target.layer_name!r}, "
                f"expected {info_y.name!r}"
            )
        layer_names[delta] = info_y.name
        sums = {m: 0.0 for m in metric_names}
        for i in range(len(dataset)):
            img = ImageTensor.unit(dataset[i][0])
            seed = derived_seed(base_seed, "sweep", delta, i)
            result = invert_via_gan(enc, layer_x, stitch, gen, info_y.name, img, seed)
            values = evaluate_inversion(test_enc, test_layer, img, result.image, metric_names)
            for m in metric_names:
                sums[m] += values[m]
        absolute[delta] = {m: sums[m] / len(dataset) for m in metric_names}
        if log:
            log(f"delta {delta:+d} -> {layer_names[delta]}: {absolute[delta]}")
    rows = []
    for delta in sorted(stitches):
        for m in metric_names:
            base = absolute[0][m]
            rows.append({
                "delta": delta,
                "metric": m,
                "layer_y": layer_names[delta],
                "absolute": absolute[delta][m],
                "relative": 1.0 if delta == 0 else absolute[delta][m] / base,
            })
    return SweepResult(layer_x=layer_x, rows=rows)


def select_extreme_samples(report: MetricReport, method: str, metric: str,
                           k: int, mode: str = "worst") -> list:
    """Sample ids with the k most extreme values; ties break by ascending id.

    'best' means highest for similarity metrics and lowest for L1; 'worst'
    is the opposite end.
    """
    if mode not in ("best", "worst"):
        raise ValueError(f"mode must be 'best' or 'worst', got {mode!r}")
    if metric not in HIGHER_IS_BETTER:
        raise KeyError(f"unknown metric: {metric!r}")
    rows = [r for r in report.records if r["method"] == method and r["metric"] == metric]
    if not rows:
        raise KeyError(f"no records for method {method!r} and metric {metric!r}")
    if k > len(rows):
        raise ValueError(f"k = {k} exceeds the {len(rows)} available samples")
    best_high = HIGHER_IS_BETTER[metric]
    take_high = best_high if mode == "best" else not best_high
    rows.sort(key=lambda r: (-r["value"] if take_high else r["value"], r["sample_id"]))
    return [r["sample_id"] for r in rows[:k]]


def seed_variations(enc: EncoderAdapter, layer_x: str, stitch: StitchLayer,
                    gen: GeneratorAdapter, layer_y, img: ImageTensor,
                    seeds) -> list:
    """One reconstruction per seed; activations are extracted and stitched once."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    info_y = gen.layer(layer_y)
    acts = enc.extract(layer_x, img)
    z = apply_stitch(stitch, acts)
    z = ActivationTensor(nearest_resize_tensor(z.data, info_y.height, info_y.width), z.source)
    return [gen.generate_with_injection(seed, info_y.name, z) for seed in seeds]
