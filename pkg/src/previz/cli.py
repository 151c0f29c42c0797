"""``previz`` command line: pipeline, single stages, rendering and metrics.

Exit codes: 0 ok, 1 internal error, 2 invalid input, 3 configuration or
credentials, 4 backend failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .agents.backends import BackendError, ConfigurationError
from .agents.protocols import Transcript
from .agents.screenplay import ValidationError
from .behaviour import EmptyCatalog, UnparseableOutput
from .camera import InvalidParams, load_registry
from .codec import CodecError
from .config import BACKENDS, ConfigError, load_config
from .io import SchemaError, load_motion_catalog, read_artifact, write_artifact
from .layout import LayoutError
from .metrics import MisalignedClips, NoCandidates, compute_report
from .pipeline import (
    STAGES,
    InputInvalid,
    make_backend,
    run_pipeline,
    stage_blocking,
    stage_camera,
    stage_layout,
    stage_regions,
    stage_script,
)
from .render import UnknownLayer, render_svg

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_CONFIG, EXIT_BACKEND = 0, 1, 2, 3, 4

INPUT_ERRORS = (
    SchemaError,
    CodecError,
    ValidationError,
    InputInvalid,
    LayoutError,
    UnknownLayer,
    MisalignedClips,
    NoCandidates,
    EmptyCatalog,
    InvalidParams,
)


class MissingPrerequisite(ValueError):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON settings file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--backend", choices=BACKENDS, help="overrides the config's backend")
    common.add_argument("--out-dir", type=Path, default=Path("out"))
    common.add_argument("--catalog", type=Path, help="motion catalog file (default: bundled)")

    p = argparse.ArgumentParser(prog="previz", description="Plan blocking and camera shots for a dialogue scene.")
    sub = p.add_subparsers(dest="command", required=True)

    pipe = sub.add_parser("pipeline", parents=[common], help="run every stage and write all artifacts")
    src = pipe.add_mutually_exclusive_group(required=True)
    src.add_argument("--idea", type=Path, help="plain-text story idea")
    src.add_argument("--screenplay", type=Path)
    pipe.add_argument("--scene", type=Path, required=True, help="scene-graph file")
    pipe.add_argument("--annotations", type=Path)

    st = sub.add_parser("stage", parents=[common], help="run one stage")
    st.add_argument("name", choices=STAGES)
    st.add_argument("--idea", type=Path)
    st.add_argument("--screenplay", type=Path)
    st.add_argument("--scene", type=Path)
    st.add_argument("--placed", type=Path)
    st.add_argument("--functional-map", type=Path)
    st.add_argument("--behaviour-plan", type=Path)
    st.add_argument("--out", type=Path, help="output file (default: in --out-dir)")

    rd = sub.add_parser("render", help="draw a top-view SVG")
    rd.add_argument("placed", type=Path, help="placed-scene file")
    rd.add_argument("--layer", required=True, help="detection, functional or shot")
    rd.add_argument("--functional-map", type=Path)
    rd.add_argument("--shots", type=Path)
    rd.add_argument("--out", type=Path, required=True)

    mt = sub.add_parser("metrics", parents=[common], help="evaluate plan files")
    mt.add_argument("--placed", type=Path)
    mt.add_argument("--behaviour-plan", type=Path)
    mt.add_argument("--shots", type=Path)
    mt.add_argument("--annotations", type=Path)
    mt.add_argument("--out", type=Path, help="report file (default: <out-dir>/metrics.json)")
    return p


def _settings(args: argparse.Namespace):
    cfg = load_config(args.config)
    if args.backend:
        cfg = replace(cfg, backend=args.backend)
    return cfg


def _need(args: argparse.Namespace, name: str) -> Path:
    value = getattr(args, name)
    if value is None:
        raise MissingPrerequisite(f"missing prerequisite: --{name.replace('_', '-')}")
    return value


def cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = _settings(args)
    backend = make_backend(cfg)  # credentials are checked before any stage runs
    scene = read_artifact(args.scene, "scene_graph")
    screenplay = read_artifact(args.screenplay, "screenplay") if args.screenplay else None
    idea = args.idea.read_text() if args.idea else None
    annotations = read_artifact(args.annotations, "annotations") if args.annotations else None
    catalog = load_motion_catalog(args.catalog)
    result = run_pipeline(
        scene,
        idea=idea,
        screenplay=screenplay,
        cfg=cfg,
        seed=args.seed,
        out_dir=args.out_dir,
        backend=backend,
        annotations=annotations,
        catalog=catalog,
    )
    for path in result.files:
        print(path)
    return EXIT_OK


def cmd_stage(args: argparse.Namespace) -> int:
    cfg = _settings(args)
    name = args.name
    log = Transcript()
    default_names = {
        "script": "screenplay.json",
        "layout": "placed_scene.json",
        "regions": "functional_map.json",
        "blocking": "behaviour_plan.json",
        "camera": "shot_plans.json",
    }
    out = args.out or args.out_dir / default_names[name]
    if name == "layout":
        scene = read_artifact(_need(args, "scene"), "scene_graph")
        backend = make_backend(cfg) if cfg.ornaments else None
        write_artifact(out, "placed_scene", stage_layout(scene, cfg, args.seed, backend, log))
    elif name == "regions":
        placed = read_artifact(_need(args, "placed"), "placed_scene")
        hints = read_artifact(args.scene, "scene_graph").sittable_hints if args.scene else None
        _, fm = stage_regions(placed, cfg, hints)
        write_artifact(out, "functional_map", fm)
    else:
        # check file prerequisites before touching the backend
        if name == "script":
            idea = _need(args, "idea").read_text()
        else:
            screenplay = read_artifact(_need(args, "screenplay"), "screenplay")
            placed = read_artifact(_need(args, "placed"), "placed_scene")
            fm = read_artifact(_need(args, "functional_map"), "functional_map")
            if name == "camera":
                plan = read_artifact(_need(args, "behaviour_plan"), "behaviour_plan")
        backend = make_backend(cfg)
        if name == "script":
            write_artifact(out, "screenplay", stage_script(idea, backend, cfg, log))
        elif name == "blocking":
            catalog = load_motion_catalog(args.catalog)
            write_artifact(out, "behaviour_plan", stage_blocking(screenplay, placed, fm, catalog, backend, cfg, log))
        else:
            registry = load_registry(overrides=cfg.camera)
            write_artifact(out, "shot_plans", stage_camera(screenplay, placed, fm, plan, backend, cfg, registry, log))
    print(out)
    return EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    placed = read_artifact(args.placed, "placed_scene")
    fm = read_artifact(args.functional_map, "functional_map") if args.functional_map else None
    shots = read_artifact(args.shots, "shot_plans").plans if args.shots else ()
    svg = render_svg(placed, args.layer, fm=fm, shots=shots)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(svg)
    print(args.out)
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    cfg = _settings(args)
    placed = read_artifact(args.placed, "placed_scene") if args.placed else None
    plan = read_artifact(args.behaviour_plan, "behaviour_plan") if args.behaviour_plan else None
    shots = read_artifact(args.shots, "shot_plans").plans if args.shots else None
    annotations = read_artifact(args.annotations, "annotations") if args.annotations else None
    registry = load_registry(overrides=cfg.camera)
    report = compute_report(placed, plan, shots, annotations, registry=registry, region_params=cfg.region)
    out = args.out or args.out_dir / "metrics.json"
    write_artifact(out, "metrics", report)
    values = report.present()
    width = max((len(k) for k in values), default=6)
    print(f"{'metric':<{width}}  value")
    for k, v in values.items():
        print(f"{k:<{width}}  {v:.4f}")
    return EXIT_OK


COMMANDS = {"pipeline": cmd_pipeline, "stage": cmd_stage, "render": cmd_render, "metrics": cmd_metrics}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    tag = args.command if args.command != "stage" else f"stage {args.name}"
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:
        stage = getattr(exc, "stage", None)
        if stage:
            tag = f"{tag}/{stage}"
        return _report(exc, tag)


def _report(exc: Exception, tag: str) -> int:
    try:
        raise exc
    except (ConfigurationError, ConfigError) as exc:
        print(f"previz [{tag}] configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BackendError, UnparseableOutput) as exc:
        print(f"previz [{tag}] backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except MissingPrerequisite as exc:
        print(f"previz [{tag}] {exc}", file=sys.stderr)
        return EXIT_INPUT
    except INPUT_ERRORS as exc:
        print(f"previz [{tag}] invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        print(f"previz [{tag}] internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
