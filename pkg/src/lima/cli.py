"""End-to-end commands: divide, attribute, eval, render.

Option precedence is CLI > config file > defaults; the config file is plain
JSON whose keys are the long option names with dashes replaced by underscores.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .attribution import (assign_scores_uniform, build_result, render_saliency,
                          saliency_to_png, write_result_json)
from .core import (Division, InvalidArgument, RasterImage, division_from_jsonable,
                   division_to_jsonable, load_image_png)
from .division import (DEFAULT_DELETE_THRESHOLD, divide_grid, divide_superpixel,
                       load_masks, resolve_imported_masks)
from .metrics import (FaithfulnessCurve, RevealSchedule, build_curve, deletion_auc,
                      highest_confidence, insertion_auc, mu_fidelity)
from .oracle import (IdentityOracle, LinearPrototypeOracle, ModelOracle,
                     PlantedRegionOracle, make_semantic_target)
from .remote import connect_process, connect_tcp
from .search import SearchConfig, rank
from .submodular import DEFAULT_LAMBDAS, SubmodularContext

log = logging.getLogger("lima")

DEFAULTS = {
    "division": "grid:7x7",
    "masks": None,
    "delete_threshold": DEFAULT_DELETE_THRESHOLD,
    "oracle": "builtin:planted",
    "classes": 4,
    "temperature": 1.0,
    "target": "from-image",
    "lambdas": ",".join(str(v) for v in DEFAULT_LAMBDAS),
    "search": "bi",
    "np": 8,
    "b_base": 1.0,
    "assignment": "marginal",
    "seed": 0,
    "metric_class": None,
    "mu_samples": 200,
    "out": "results",
    "saliency": None,
    "workers": 1,
    "timeout": 30.0,
}


def _resolve(args: argparse.Namespace, file_cfg: dict, key: str):
    cli_val = getattr(args, key, None)
    if cli_val is not None:
        return cli_val
    if key in file_cfg:
        return file_cfg[key]
    return DEFAULTS.get(key)


@dataclasses.dataclass
class RunConfig:
    inputs: list[str]
    division: str
    masks: str | None
    delete_threshold: float
    oracle: str
    classes: int
    temperature: float
    target: str
    lambdas: tuple[float, float, float, float]
    search: str
    n_p: int
    b_base: float
    assignment: str
    seed: int
    metric_class: int | None
    mu_samples: int
    out: str
    saliency: str | None
    workers: int
    timeout: float

    def validate(self) -> None:
        if self.search not in ("naive", "bi"):
            raise InvalidArgument("--search must be naive or bi")
        if self.assignment not in ("marginal", "uniform"):
            raise InvalidArgument("--assignment must be marginal or uniform")
        if self.workers < 1:
            raise InvalidArgument("--workers must be positive")
        missing = [p for p in self.inputs if not os.path.isfile(p)]
        if missing:
            raise InvalidArgument(f"missing input image(s): {', '.join(missing)}")
        if self.saliency and len(self.inputs) > 1:
            raise InvalidArgument("--saliency only applies to a single input")


def _parse_lambdas(text) -> tuple[float, float, float, float]:
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        vals = [float(v) for v in str(text).split(",")]
    if len(vals) != 4:
        raise InvalidArgument("--lambdas needs 4 comma-separated values")
    return tuple(vals)


def _build_division(cfg: RunConfig, image: RasterImage) -> Division:
    spec = cfg.division
    if cfg.masks is not None or spec == "masks":
        if cfg.masks is None:
            raise InvalidArgument("division 'masks' requires --masks <path>")
        masks = load_masks(cfg.masks)
        return resolve_imported_masks(image, masks, cfg.delete_threshold)
    kind, _, arg = spec.partition(":")
    if kind == "grid":
        rows, _, cols = arg.partition("x")
        return divide_grid(image, int(rows), int(cols))
    if kind == "slico":
        return divide_superpixel(image, int(arg), seed=cfg.seed)
    raise InvalidArgument(f"unknown division spec {spec!r}")


def _build_oracle(cfg: RunConfig, image: RasterImage, division: Division) -> ModelOracle:
    spec = cfg.oracle
    kind, _, arg = spec.partition(":")
    if kind == "builtin":
        rng = np.random.default_rng(cfg.seed)
        if arg == "identity":
            return IdentityOracle(image.height, image.width, image.channels,
                                  num_classes=cfg.classes)
        if arg == "planted":
            weights = rng.uniform(0.1, 1.0, size=len(division))
            return PlantedRegionOracle([m.bits for m in division.regions], weights)
        if arg == "prototype":
            protos = [RasterImage(rng.uniform(0, 1, size=(image.height, image.width,
                                                          image.channels)))
                      for _ in range(cfg.classes)]
            return LinearPrototypeOracle(protos, temperature=cfg.temperature)
        raise InvalidArgument(f"unknown builtin oracle {arg!r}")
    if kind == "cmd":
        return connect_process(shlex.split(arg), timeout=cfg.timeout)
    if kind == "tcp":
        return connect_tcp(arg, timeout=cfg.timeout)
    raise InvalidArgument(f"unknown oracle spec {spec!r}")


def _build_target_spec(cfg: RunConfig, image: RasterImage) -> dict:
    if cfg.target == "from-image":
        return {"from_image": image}
    kind, _, arg = cfg.target.partition(":")
    if kind == "class":
        return {"class_row": int(arg)}
    if kind == "file":
        with open(arg, "r", encoding="utf-8") as fh:
            return {"vector": json.load(fh)["vector"]}
    raise InvalidArgument(f"unknown target spec {cfg.target!r}")


def _attribute_one(cfg: RunConfig, image_path: str) -> dict:
    image = load_image_png(image_path)
    division = _build_division(cfg, image)
    oracle = _build_oracle(cfg, image, division)
    calls0 = oracle.call_log.snapshot()
    target = make_semantic_target(oracle, _build_target_spec(cfg, image))
    ctx = SubmodularContext(image, division, oracle, target, lambdas=cfg.lambdas)
    search_cfg = SearchConfig(algorithm="naive" if cfg.search == "naive" else "bidirectional",
                              n_p=cfg.n_p, seed=cfg.seed)
    attribution, trace = rank(ctx, search_cfg, b_base=cfg.b_base)
    if cfg.assignment == "uniform":
        attribution = dataclasses.replace(
            attribution,
            scores=tuple(assign_scores_uniform(attribution.order, cfg.b_base)))

    if cfg.metric_class is None:
        metric_class = int(np.argmax(oracle.probs([image])[0]))
    else:
        metric_class = cfg.metric_class
    ins = build_curve(image, division, attribution.order, oracle, metric_class,
                      "insertion")
    dele = build_curve(image, division, attribution.order, oracle, metric_class,
                       "deletion")
    mu = mu_fidelity(attribution.scores_by_region(), image, division, oracle,
                     metric_class, n_samples=cfg.mu_samples, seed=cfg.seed)
    metrics = {
        "class_index": metric_class,
        "insertion_auc": insertion_auc(ins),
        "deletion_auc": deletion_auc(dele),
        "mu_fidelity": mu,
        "insertion_curve": {"T": list(ins.schedule.thresholds), "values": list(ins.values)},
        "deletion_curve": {"T": list(dele.schedule.thresholds), "values": list(dele.values)},
    }
    embed_delta = oracle.call_log.embed_calls - calls0[0]
    prob_delta = oracle.call_log.prob_calls - calls0[1]
    result = build_result(image_path, image, division, attribution, trace,
                          cfg.lambdas, cfg.seed, metrics,
                          {"embed": embed_delta, "probs": prob_delta},
                          target.source)
    if hasattr(oracle, "close"):
        oracle.close()
    return result


def _output_paths(cfg: RunConfig, image_path: str) -> tuple[str, str]:
    stem = os.path.splitext(os.path.basename(image_path))[0]
    if cfg.out.endswith(".json") and len(cfg.inputs) == 1:
        json_path = cfg.out
        png_path = cfg.saliency or os.path.splitext(cfg.out)[0] + ".png"
    else:
        os.makedirs(cfg.out, exist_ok=True)
        json_path = os.path.join(cfg.out, stem + ".json")
        png_path = cfg.saliency or os.path.join(cfg.out, stem + ".png")
    parent = os.path.dirname(json_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return json_path, png_path


def cmd_attribute(args: argparse.Namespace, file_cfg: dict) -> int:
    cfg = RunConfig(
        inputs=args.images,
        division=_resolve(args, file_cfg, "division"),
        masks=_resolve(args, file_cfg, "masks"),
        delete_threshold=float(_resolve(args, file_cfg, "delete_threshold")),
        oracle=_resolve(args, file_cfg, "oracle"),
        classes=int(_resolve(args, file_cfg, "classes")),
        temperature=float(_resolve(args, file_cfg, "temperature")),
        target=_resolve(args, file_cfg, "target"),
        lambdas=_parse_lambdas(_resolve(args, file_cfg, "lambdas")),
        search=_resolve(args, file_cfg, "search"),
        n_p=int(_resolve(args, file_cfg, "np")),
        b_base=float(_resolve(args, file_cfg, "b_base")),
        assignment=_resolve(args, file_cfg, "assignment"),
        seed=int(_resolve(args, file_cfg, "seed")),
        metric_class=_resolve(args, file_cfg, "metric_class"),
        mu_samples=int(_resolve(args, file_cfg, "mu_samples")),
        out=_resolve(args, file_cfg, "out"),
        saliency=_resolve(args, file_cfg, "saliency"),
        workers=int(_resolve(args, file_cfg, "workers")),
        timeout=float(_resolve(args, file_cfg, "timeout")),
    )
    try:
        cfg.validate()
    except InvalidArgument as exc:
        log.error("%s", exc)
        return 2

    failures: list[tuple[str, str]] = []

    def run(path: str) -> None:
        result = _attribute_one(cfg, path)
        json_path, png_path = _output_paths(cfg, path)
        write_result_json(result, json_path)
        division = division_from_jsonable(result["division"], image_ref=path)
        smap = render_saliency(division, result["order"], result["scores"])
        saliency_to_png(smap, png_path)
        log.info("wrote %s and %s", json_path, png_path)

    if cfg.workers == 1:
        for path in cfg.inputs:
            try:
                run(path)
            except Exception as exc:  # per-file report, keep going
                failures.append((path, str(exc)))
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {pool.submit(run, p): p for p in cfg.inputs}
            for fut, path in futures.items():
                try:
                    fut.result()
                except Exception as exc:
                    failures.append((path, str(exc)))
    for path, msg in failures:
        log.error("failed %s: %s", path, msg)
    return 1 if failures else 0


def _metric_from_result(name: str, result: dict) -> float:
    stored = result["metrics"]
    if name == "insertion":
        curve = FaithfulnessCurve(RevealSchedule(tuple(stored["insertion_curve"]["T"])),
                                  tuple(stored["insertion_curve"]["values"]), "insertion")
        return insertion_auc(curve)
    if name == "deletion":
        curve = FaithfulnessCurve(RevealSchedule(tuple(stored["deletion_curve"]["T"])),
                                  tuple(stored["deletion_curve"]["values"]), "deletion")
        return deletion_auc(curve)
    if name.startswith("ahc"):
        _, _, frac = name.partition(":")
        curve = FaithfulnessCurve(RevealSchedule(tuple(stored["insertion_curve"]["T"])),
                                  tuple(stored["insertion_curve"]["values"]), "insertion")
        return highest_confidence(curve, float(frac) if frac else 1.0)
    if name == "mufidelity":
        return float(stored["mu_fidelity"])
    raise InvalidArgument(f"unknown metric {name!r}")


def cmd_evaluate(args: argparse.Namespace, file_cfg: dict) -> int:
    results_dir = args.results
    if not results_dir or not os.path.isdir(results_dir):
        log.error("results directory not found: %s", results_dir)
        return 2
    names = sorted(f for f in os.listdir(results_dir) if f.endswith(".json"))
    if not names:
        log.error("no result JSON files in %s", results_dir)
        return 2
    metric_names = [m.strip() for m in args.metrics.split(",") if m.strip()]
    rows = []
    for name in names:
        with open(os.path.join(results_dir, name), "r", encoding="utf-8") as fh:
            result = json.load(fh)
        rows.append([name] + [_metric_from_result(m, result) for m in metric_names])
    means = [float(np.mean([r[i + 1] for r in rows])) for i in range(len(metric_names))]
    out = args.csv or "-"
    fh = sys.stdout if out == "-" else open(out, "w", encoding="utf-8", newline="")
    try:
        writer = csv.writer(fh)
        writer.writerow(["sample"] + metric_names)
        for row in rows:
            writer.writerow(row)
        writer.writerow(["mean"] + means)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_divide(args: argparse.Namespace, file_cfg: dict) -> int:
    if not os.path.isfile(args.image):
        log.error("missing input image: %s", args.image)
        return 2
    cfg = RunConfig(
        inputs=[args.image],
        division=_resolve(args, file_cfg, "division"),
        masks=_resolve(args, file_cfg, "masks"),
        delete_threshold=float(_resolve(args, file_cfg, "delete_threshold")),
        oracle="builtin:planted", classes=2, temperature=1.0, target="from-image",
        lambdas=DEFAULT_LAMBDAS, search="bi", n_p=8, b_base=1.0,
        assignment="marginal", seed=int(_resolve(args, file_cfg, "seed")),
        metric_class=None, mu_samples=1, out="", saliency=None, workers=1,
        timeout=30.0,
    )
    image = load_image_png(args.image)
    try:
        division = _build_division(cfg, image)
    except InvalidArgument as exc:
        log.error("%s", exc)
        return 2
    payload = division_to_jsonable(division)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    log.info("wrote %s (%d regions, method %s)", args.out, len(division), division.method)
    return 0


def cmd_render(args: argparse.Namespace, file_cfg: dict) -> int:
    if not os.path.isfile(args.result):
        log.error("missing result file: %s", args.result)
        return 2
    with open(args.result, "r", encoding="utf-8") as fh:
        result = json.load(fh)
    division = division_from_jsonable(result["division"], image_ref=result.get("image", ""))
    smap = render_saliency(division, result["order"], result["scores"])
    if args.png:
        saliency_to_png(smap, args.png, colormap=args.colormap)
        log.info("wrote %s", args.png)
    if args.map_json:
        payload = {"height": smap.height, "width": smap.width,
                   "values": [float(v) for v in smap.values.ravel()]}
        with open(args.map_json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")
        log.info("wrote %s", args.map_json)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lima",
        description="Black-box attribution by greedy submodular subset selection")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--config", help="JSON config file (CLI flags win)")
    sub = parser.add_subparsers(dest="command", required=True)

    att = sub.add_parser("attribute", help="explain one or more input images")
    att.add_argument("images", nargs="+")
    att.add_argument("--division", help="grid:RxC | slico:K | masks")
    att.add_argument("--masks", help="directory of mask PNGs or RLE JSON file")
    att.add_argument("--delete-threshold", type=float, dest="delete_threshold")
    att.add_argument("--oracle",
                     help="builtin:identity|planted|prototype, cmd:<argv>, tcp:host:port")
    att.add_argument("--classes", type=int, help="classes for builtin oracles")
    att.add_argument("--temperature", type=float)
    att.add_argument("--target", help="from-image | class:K | file:vector.json")
    att.add_argument("--lambdas", help="four comma-separated weights")
    att.add_argument("--search", choices=["naive", "bi"])
    att.add_argument("--np", type=int, dest="np", help="pending negative samples")
    att.add_argument("--b-base", type=float, dest="b_base")
    att.add_argument("--assignment", choices=["marginal", "uniform"])
    att.add_argument("--seed", type=int)
    att.add_argument("--metric-class", type=int, dest="metric_class")
    att.add_argument("--mu-samples", type=int, dest="mu_samples")
    att.add_argument("--out", help="output directory (or result.json for one input)")
    att.add_argument("--saliency", help="saliency PNG path (single input)")
    att.add_argument("--workers", type=int)
    att.add_argument("--timeout", type=float)
    att.set_defaults(func=cmd_attribute)

    ev = sub.add_parser("eval", help="aggregate metrics over a results directory")
    ev.add_argument("--results", required=True)
    ev.add_argument("--metrics", default="insertion,deletion,mufidelity")
    ev.add_argument("--csv", help="output CSV path (default stdout)")
    ev.set_defaults(func=cmd_evaluate)

    dv = sub.add_parser("divide", help="run sub-region division only")
    dv.add_argument("image")
    dv.add_argument("--division")
    dv.add_argument("--masks")
    dv.add_argument("--delete-threshold", type=float, dest="delete_threshold")
    dv.add_argument("--seed", type=int)
    dv.add_argument("--out", required=True, help="division JSON path")
    dv.set_defaults(func=cmd_divide)

    rn = sub.add_parser("render", help="re-render saliency from a result JSON")
    rn.add_argument("result")
    rn.add_argument("--png")
    rn.add_argument("--map-json", dest="map_json", help="raw float map JSON path")
    rn.add_argument("--colormap", default="viridis")
    rn.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(levelname)s %(name)s: %(message)s")
    file_cfg = {}
    if args.config:
        if not os.path.isfile(args.config):
            log.error("config file not found: %s", args.config)
            return 2
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
    try:
        return args.func(args, file_cfg)
    except InvalidArgument as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
