"""Batch command-line front end.

Commands: ``segment`` (one case to mask + overlay + manifest), ``evaluate``
(one CSV metrics row for a prediction/truth pair), ``benchmark`` (every
method on every corpus case, CSV plus summary rows, optional marker sweep)
and ``phantom`` (synthetic case generation). All configuration comes from
flags plus an optional JSON manifest; explicit flags win over manifest
values. Reruns with identical inputs and parameters reproduce outputs
byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from . import __version__
from .errors import ToolkitError
from .imageio import load_image, load_mask, load_roi, save_image, save_mask
from .metrics import (
    METRIC_NAMES,
    CaseMetrics,
    aggregate,
    boundary_pixels,
    dice,
    evaluate_pair,
    format_mean_std,
)
from .model import BinaryMask, GrayImage, PixelSpacing
from .phantom import PhantomSpec, generate_phantom, manifest_fragment
from .pipeline import METHODS, PipelineConfig, run_segmentation
from .preprocess import ClaheConfig

CSV_HEADER = ["case", "method", "dsc", "ji", "hd_mm", "pr", "re", "error"]


@dataclass(frozen=True)
class RunManifest:
    """Complete record of one command invocation.

    Holds the full parameter set, input/output paths and toolkit version;
    feeding it back through ``--manifest`` (or rerunning the recorded
    command) reproduces the outputs bit for bit.
    """

    command: str
    parameters: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)  # file names relative to the manifest
    spacing: dict = field(default_factory=lambda: {"dx": 1.0, "dy": 1.0})
    toolkit_version: str = __version__

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "toolkit_version": self.toolkit_version,
            "parameters": self.parameters,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "spacing": self.spacing,
        }

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _parse_spacing(text: str) -> PixelSpacing:
    try:
        dx, dy = text.lower().split("x")
        return PixelSpacing(float(dx), float(dy))
    except (ValueError, TypeError) as exc:
        raise ToolkitError(f"invalid --spacing '{text}' (expected DXxDY)") from exc


def _parse_tiles(text: str) -> tuple[int, int]:
    try:
        nx, ny = text.lower().split("x")
        return int(nx), int(ny)
    except (ValueError, TypeError) as exc:
        raise ToolkitError(f"invalid --clahe-tiles '{text}' (expected NxM)") from exc


def _parse_sweep(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(":")
        a, b = int(a), int(b)
    except (ValueError, TypeError) as exc:
        raise ToolkitError(f"invalid --marker-sweep '{text}' (expected A:B)") from exc
    if not 1 <= a <= b:
        raise ToolkitError(f"invalid --marker-sweep range {a}:{b}")
    return a, b


def _fmt(value) -> str:
    return "" if value is None else f"{value:.6f}"


def _write_csv(path: Path, rows: list[list[str]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def _write_manifest(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _contour(mask: BinaryMask) -> np.ndarray:
    bits = np.zeros(mask.bits.shape, dtype=bool)
    coords = boundary_pixels(mask)
    if coords.size:
        bits[coords[:, 1], coords[:, 0]] = True
    return bits


def render_overlay(
    image: GrayImage, mask: BinaryMask, truth: BinaryMask | None = None
) -> np.ndarray:
    """8-bit composite: image with a white mask contour (truth contour, when
    given, in a second gray level underneath)."""
    base = np.rint(image.pixels * 255).astype(np.uint8)
    if truth is not None:
        base[_contour(truth)] = 170
    base[_contour(mask)] = 255
    return base


def _add_common_method_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=None, help="cluster/component count")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--markers", type=int, default=None, help="internal marker count")
    p.add_argument("--se-radius", type=int, default=None)
    p.add_argument("--no-merge-markers", action="store_const", const=True, default=None)
    p.add_argument("--pooled-variance", action="store_const", const=True, default=None)
    p.add_argument("--clahe-tiles", default=None, metavar="NxM")
    p.add_argument("--clahe-clip", type=float, default=None, metavar="F")
    p.add_argument("--clahe-bins", type=int, default=None)
    p.add_argument("--no-clahe", action="store_const", const=True, default=None)
    p.add_argument("--clahe-full-image", action="store_const", const=True, default=None)
    p.add_argument("--spacing", default=None, metavar="DXxDY")


def _param(args, manifest_params: dict, name: str, default):
    value = getattr(args, name)
    if value is not None:
        return value
    if name in manifest_params:
        return manifest_params[name]
    return default


def _pipeline_config(args, manifest_params: dict, method: str) -> PipelineConfig:
    no_clahe = args.no_clahe
    if no_clahe is None:
        # a manifest records a disabled CLAHE stage as "clahe": null
        no_clahe = "clahe" in manifest_params and manifest_params["clahe"] is None
    if no_clahe:
        clahe_cfg = None
    else:
        clahe_manifest = manifest_params.get("clahe") or {}
        tiles_flag = getattr(args, "clahe_tiles", None)
        if tiles_flag is not None:
            tiles_x, tiles_y = _parse_tiles(tiles_flag)
        else:
            tiles_x = clahe_manifest.get("tiles_x", 8)
            tiles_y = clahe_manifest.get("tiles_y", 8)
        clip = args.clahe_clip if args.clahe_clip is not None else clahe_manifest.get("clip_limit", 0.01)
        bins = args.clahe_bins if args.clahe_bins is not None else clahe_manifest.get("bins", 256)
        clahe_cfg = ClaheConfig(tiles_x=tiles_x, tiles_y=tiles_y, clip_limit=clip, bins=bins)
    if args.clahe_full_image is not None:
        full_image = bool(args.clahe_full_image)
    else:
        full_image = bool((manifest_params.get("clahe") or {}).get("full_image", False))
    if args.no_merge_markers is not None:
        merge = not args.no_merge_markers
    else:
        merge = bool(manifest_params.get("merge_markers", True))
    return PipelineConfig(
        method=method,
        k=int(_param(args, manifest_params, "k", 2)),
        max_iter=_param(args, manifest_params, "max_iter", None),
        tol=_param(args, manifest_params, "tol", None),
        seed=int(_param(args, manifest_params, "seed", 0)),
        markers=int(_param(args, manifest_params, "markers", 45)),
        se_radius=int(_param(args, manifest_params, "se_radius", 1)),
        merge_markers=merge,
        pooled_variance=bool(_param(args, manifest_params, "pooled_variance", False)),
        clahe=clahe_cfg,
        clahe_full_image=full_image,
    )


def _spacing_from(args, manifest: dict) -> PixelSpacing:
    if args.spacing is not None:
        return _parse_spacing(args.spacing)
    stored = manifest.get("spacing")
    if stored:
        return PixelSpacing(float(stored["dx"]), float(stored["dy"]))
    return PixelSpacing()


def cmd_segment(args) -> int:
    manifest_in: dict = {}
    if args.manifest:
        manifest_in = json.loads(Path(args.manifest).read_text())
        if not isinstance(manifest_in, dict):
            raise ToolkitError(f"manifest '{args.manifest}' must hold a JSON object")
    manifest_params = manifest_in.get("parameters") or {}
    if not isinstance(manifest_params, dict):
        raise ToolkitError(f"manifest '{args.manifest}' has a malformed parameters block")
    method = args.method or manifest_params.get("method")
    if method is None:
        raise ToolkitError("--method is required (or provide it via --manifest)")
    cfg = _pipeline_config(args, manifest_params, method)

    image_path = args.image or manifest_in.get("inputs", {}).get("image")
    if image_path is None:
        raise ToolkitError("--image is required (or provide it via --manifest)")
    roi_path = args.roi or manifest_in.get("inputs", {}).get("roi")
    truth_path = args.truth or manifest_in.get("inputs", {}).get("truth")

    image = load_image(image_path)
    roi = load_roi(roi_path) if roi_path else None
    truth = load_mask(truth_path) if truth_path else None

    mask = run_segmentation(image, cfg, roi)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mask_path = out_dir / "mask.png"
    overlay_path = out_dir / "overlay.png"
    save_mask(mask, mask_path)
    PILImage.fromarray(render_overlay(image, mask, truth)).save(overlay_path)
    spacing = _spacing_from(args, manifest_in)
    RunManifest(
        command="segment",
        parameters=cfg.describe(),
        inputs={
            "image": str(image_path),
            "roi": str(roi_path) if roi_path else None,
            "truth": str(truth_path) if truth_path else None,
        },
        outputs={"mask": mask_path.name, "overlay": overlay_path.name},
        spacing={"dx": spacing.dx, "dy": spacing.dy},
    ).write(out_dir / "manifest.json")
    return 0


def cmd_evaluate(args) -> int:
    spacing = _spacing_from(args, {})
    pred = load_mask(args.pred)
    truth = load_mask(args.truth)
    case_id = args.case_id or Path(args.pred).stem
    case = evaluate_pair(case_id, pred, truth, spacing)
    for name in METRIC_NAMES:
        if case.value(name) is None:
            print(f"warning: {name} undefined for case '{case_id}'", file=sys.stderr)
    row = [case_id, args.method] + [_fmt(case.value(n)) for n in METRIC_NAMES] + [""]
    rows = [CSV_HEADER, row]
    out = io.StringIO()
    csv.writer(out, lineterminator="\n").writerows(rows)
    sys.stdout.write(out.getvalue())
    if args.csv:
        _write_csv(Path(args.csv), rows)
    return 0


def _discover_cases(corpus: Path) -> list[dict]:
    if not corpus.is_dir():
        raise ToolkitError(f"corpus directory '{corpus}' does not exist")
    cases = []
    for sub in sorted(p for p in corpus.iterdir() if p.is_dir()):
        image = next((sub / f"image{ext}" for ext in (".png", ".pgm") if (sub / f"image{ext}").exists()), None)
        if image is None:
            continue
        truth = next((sub / f"truth{ext}" for ext in (".png", ".pgm") if (sub / f"truth{ext}").exists()), None)
        roi = sub / "roi.json" if (sub / "roi.json").exists() else None
        cases.append({"id": sub.name, "image": image, "truth": truth, "roi": roi})
    if not cases:
        raise ToolkitError(f"no cases found under '{corpus}'")
    return cases


def _run_benchmark_task(case: dict, method: str, args_cfg: PipelineConfig, spacing: PixelSpacing):
    image = load_image(case["image"])
    roi = load_roi(case["roi"]) if case["roi"] else None
    if case["truth"] is None:
        raise ToolkitError("missing truth mask")
    truth = load_mask(case["truth"])
    mask = run_segmentation(image, args_cfg, roi)
    return evaluate_pair(case["id"], mask, truth, spacing), mask


def cmd_benchmark(args) -> int:
    if args.jobs < 1:
        raise ToolkitError("--jobs must be at least 1")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise ToolkitError("--methods must name at least one method")
    for m in methods:
        if m not in METHODS:
            raise ToolkitError(f"unknown method '{m}' in --methods")
    configs = {m: _pipeline_config(args, {}, m) for m in methods}
    spacing = _spacing_from(args, {})
    corpus = Path(args.corpus)
    cases = _discover_cases(corpus)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = [(case, method) for case in cases for method in methods]
    results: dict[tuple[str, str], tuple[CaseMetrics | None, str | None]] = {}

    def run(task):
        case, method = task
        try:
            case_metrics, mask = _run_benchmark_task(case, method, configs[method], spacing)
            case_dir = out_dir / case["id"]
            case_dir.mkdir(parents=True, exist_ok=True)
            save_mask(mask, case_dir / f"{method}_mask.png")
            return (case["id"], method), (case_metrics, None)
        except Exception as exc:  # per-case failures never abort the run
            return (case["id"], method), (None, str(exc))

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            for key, value in pool.map(run, tasks):
                results[key] = value
    else:
        for task in tasks:
            key, value = run(task)
            results[key] = value

    rows: list[list[str]] = [CSV_HEADER]
    per_method: dict[str, list[CaseMetrics]] = {m: [] for m in methods}
    for case in cases:
        for method in methods:
            case_metrics, error = results[(case["id"], method)]
            if case_metrics is None:
                rows.append([case["id"], method, "", "", "", "", "", error or ""])
            else:
                per_method[method].append(case_metrics)
                rows.append(
                    [case["id"], method]
                    + [_fmt(case_metrics.value(n)) for n in METRIC_NAMES]
                    + [""]
                )
    for method in methods:
        if per_method[method]:
            report = aggregate(per_method[method])
            cells = [
                format_mean_std(report.summary[n].mean, report.summary[n].std)
                if report.summary[n].n > 0
                else ""
                for n in METRIC_NAMES
            ]
        else:
            cells = ["", "", "", "", ""]
        rows.append(["SUMMARY", method] + cells + [""])
    _write_csv(out_dir / "results.csv", rows)

    if args.marker_sweep:
        lo, hi = _parse_sweep(args.marker_sweep)
        sweep_rows = [["case", "n", "dsc"]]
        base = configs.get("mcwt") or _pipeline_config(args, {}, "mcwt")
        for case in cases:
            image = load_image(case["image"])
            roi = load_roi(case["roi"]) if case["roi"] else None
            truth = load_mask(case["truth"]) if case["truth"] else None
            for n in range(lo, hi + 1):
                cfg = PipelineConfig(
                    method="mcwt",
                    markers=n,
                    se_radius=base.se_radius,
                    merge_markers=base.merge_markers,
                    clahe=base.clahe,
                    clahe_full_image=base.clahe_full_image,
                )
                try:
                    if truth is None:
                        raise ToolkitError("missing truth mask")
                    mask = run_segmentation(image, cfg, roi)
                    value = _fmt(dice(mask, truth))
                except Exception:
                    value = ""
                sweep_rows.append([case["id"], str(n), value])
        _write_csv(out_dir / "marker_sweep.csv", sweep_rows)

    RunManifest(
        command="benchmark",
        parameters={
            "methods": {m: configs[m].describe() for m in methods},
            "jobs": args.jobs,
            "marker_sweep": args.marker_sweep,
        },
        inputs={"corpus": str(corpus)},
        outputs={"results": "results.csv"},
        spacing={"dx": spacing.dx, "dy": spacing.dy},
    ).write(out_dir / "manifest.json")
    return 0


def cmd_phantom(args) -> int:
    spec = PhantomSpec.from_dict(json.loads(Path(args.spec).read_text()))
    image, truth = generate_phantom(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_image(image, out_dir / "image.png", bit_depth=16)
    save_mask(truth, out_dir / "truth.png")
    _write_manifest(
        out_dir / "manifest.json",
        dict(manifest_fragment(spec), command="phantom", toolkit_version=__version__),
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lesionseg",
        description="Unsupervised bright-lesion segmentation and evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_seg = sub.add_parser("segment", help="segment one image")
    p_seg.add_argument("--image", default=None)
    p_seg.add_argument("--roi", default=None, help="ROI JSON file")
    p_seg.add_argument("--truth", default=None, help="optional truth mask for the overlay")
    p_seg.add_argument("--method", choices=METHODS, default=None)
    p_seg.add_argument("--manifest", default=None, help="JSON manifest with stored parameters")
    p_seg.add_argument("--out-dir", default=".")
    _add_common_method_flags(p_seg)
    p_seg.set_defaults(func=cmd_segment)

    p_eval = sub.add_parser("evaluate", help="compare a prediction against a truth mask")
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--method", default="", help="method name recorded in the CSV row")
    p_eval.add_argument("--case-id", default=None)
    p_eval.add_argument("--csv", default=None, help="also write the row to this file")
    p_eval.add_argument("--spacing", default=None, metavar="DXxDY")
    p_eval.set_defaults(func=cmd_evaluate)

    p_bench = sub.add_parser("benchmark", help="run methods over a corpus of cases")
    p_bench.add_argument("--corpus", required=True)
    p_bench.add_argument("--methods", default="kmeans,gmm,mcwt")
    p_bench.add_argument("--out-dir", required=True)
    p_bench.add_argument("--jobs", type=int, default=1)
    p_bench.add_argument("--marker-sweep", default=None, metavar="A:B")
    _add_common_method_flags(p_bench)
    p_bench.set_defaults(func=cmd_benchmark)

    p_ph = sub.add_parser("phantom", help="generate a synthetic case")
    p_ph.add_argument("--spec", required=True, help="phantom spec JSON")
    p_ph.add_argument("--out-dir", required=True)
    p_ph.set_defaults(func=cmd_phantom)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ToolkitError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
