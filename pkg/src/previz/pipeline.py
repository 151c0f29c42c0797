"""Stage functions and the end-to-end run from idea to evaluated shot plans."""

from __future__ import annotations

import json
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Union

from .agents.backends import AgentBackend, ConfigurationError, RecordingBackend, RemoteBackend, ReplayBackend, ScriptedBackend
from .agents.parsing import OrnamentsOut
from .agents.protocols import MessageKind, Transcript, ask
from .agents.responder import default_responder
from .agents.screenplay import develop_screenplay
from .behaviour import BehaviourPlan, behaviour_digest, build_detection_map, clip_digest, map_digest, plan_behaviour
from .camera import CameraRegistry, ShotContext, load_registry, plan_shot, shot_subjects
from .config import PipelineConfig
from .io import SceneSpec, ShotPlanSet, load_motion_catalog, write_artifact
from .layout import layout_scene
from .metrics import AnnotationSet, MetricsReport, compute_report
from .model import ClipRef, MotionCatalog, PlacedScene, Screenplay, validate_scene_graph, validate_screenplay
from .regions import FunctionalMap, build_functional_map, infer_sittable, select_performing_regions
from .render import render_svg

STAGES = ("script", "layout", "regions", "blocking", "camera")


class InputInvalid(ValueError):
    """An input file parsed but breaks a structural rule."""


def make_backend(cfg: PipelineConfig, kind: Optional[str] = None) -> AgentBackend:
    kind = kind or cfg.backend
    if kind == "scripted":
        fixture = {}
        if cfg.fixture:
            try:
                fixture = json.loads(Path(cfg.fixture).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigurationError(f"fixture {cfg.fixture}: {exc}") from exc
        backend: AgentBackend = ScriptedBackend(fixture, default_responder)
    elif kind == "replay":
        if not cfg.recording:
            raise ConfigurationError("replay backend needs a 'recording' file in the config")
        backend = ReplayBackend.load(Path(cfg.recording))
    elif kind == "remote":
        backend = RemoteBackend.from_env()
    else:
        raise ConfigurationError(f"unknown backend {kind!r}")
    return RecordingBackend(backend) if cfg.record_to else backend


# --------------------------------------------------------------------------
# Stages
# --------------------------------------------------------------------------


def stage_script(idea: str, backend: AgentBackend, cfg: PipelineConfig, transcript: Transcript) -> Screenplay:
    screenplay, _ = develop_screenplay(idea, backend, cfg.loop, transcript)
    return screenplay


def check_screenplay(screenplay: Screenplay) -> None:
    problems = validate_screenplay(screenplay)
    if problems:
        raise InputInvalid("; ".join(f"{v.field}: {v.detail}" for v in problems))


def stage_layout(
    spec: SceneSpec,
    cfg: PipelineConfig,
    seed: int,
    backend: Optional[AgentBackend] = None,
    transcript: Optional[Transcript] = None,
) -> PlacedScene:
    problems = validate_scene_graph(spec.graph)
    if problems:
        raise InputInvalid("; ".join(f"{v.field}: {v.detail}" for v in problems))
    suggestions = None
    if cfg.ornaments and backend is not None:
        log = (transcript or Transcript()).scope("layout")
        context = {"objects": [{"id": o.id, "label": o.label} for o in spec.graph.objects]}
        reply: OrnamentsOut = ask(
            backend, "scene_designer", context, "ornaments", cfg.loop, log, 0, MessageKind.PROPOSAL
        )
        suggestions = reply.labels
    return layout_scene(
        spec.graph,
        spec.bounds,
        cell_size=cfg.cell_size,
        seed=seed,
        ornament_suggestions=suggestions,
    )


def stage_regions(
    placed: PlacedScene, cfg: PipelineConfig, hints: Optional[Mapping[str, bool]] = None
) -> tuple[PlacedScene, FunctionalMap]:
    placed, spots = infer_sittable(placed, hints)
    regions = select_performing_regions(placed, cfg.region)
    return placed, build_functional_map(placed, regions, spots, cfg.region.tau)


def stage_blocking(
    screenplay: Screenplay,
    placed: PlacedScene,
    fm: FunctionalMap,
    catalog: MotionCatalog,
    backend: AgentBackend,
    cfg: PipelineConfig,
    transcript: Transcript,
) -> BehaviourPlan:
    plan, _ = plan_behaviour(screenplay, placed, fm, catalog, backend, cfg.loop, transcript.scope("blocking"))
    return plan


def stage_camera(
    screenplay: Screenplay,
    placed: PlacedScene,
    fm: FunctionalMap,
    plan: BehaviourPlan,
    backend: AgentBackend,
    cfg: PipelineConfig,
    registry: CameraRegistry,
    transcript: Transcript,
    *,
    validation: bool = True,
) -> ShotPlanSet:
    dm = build_detection_map(placed)
    digest = map_digest(dm, fm)
    plans = []
    for act in screenplay.acts:
        for clip in act.clips:
            ref = ClipRef(act.index, clip.index)
            if ref not in plan.clips:
                raise InputInvalid(f"behaviour plan has no clip {ref}")
            cast = plan.clips[ref]
            ctx = ShotContext(
                ref=ref,
                duration=float(clip.duration),
                subjects=shot_subjects([p for p in act.participants if p in cast], clip.speakers),
                behaviours=cast,
                placed=placed,
                prompt={"clip_ref": str(ref), "clip": clip_digest(clip), "behaviours": behaviour_digest(cast), "map": digest},
            )
            log = transcript.scope(f"camera/{ref}")
            plans.append(plan_shot(ctx, [backend, backend], backend, registry, cfg.loop, log, validation=validation))
    return ShotPlanSet(tuple(plans))


# --------------------------------------------------------------------------
# Whole run
# --------------------------------------------------------------------------


@contextmanager
def _stage(name: str):
    """Tag any exception escaping the block with the stage it came from."""
    try:
        yield
    except Exception as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise


@dataclass(frozen=True)
class PipelineResult:
    screenplay: Screenplay
    placed: PlacedScene
    functional_map: FunctionalMap
    behaviour_plan: BehaviourPlan
    shots: ShotPlanSet
    metrics: MetricsReport
    transcript: Transcript
    files: tuple[Path, ...]


def run_pipeline(
    scene: SceneSpec,
    *,
    idea: Optional[str] = None,
    screenplay: Optional[Screenplay] = None,
    cfg: Optional[PipelineConfig] = None,
    seed: int = 0,
    out_dir: Optional[Union[str, Path]] = None,
    backend: Optional[AgentBackend] = None,
    annotations: Optional[AnnotationSet] = None,
    catalog: Optional[MotionCatalog] = None,
    registry: Optional[CameraRegistry] = None,
) -> PipelineResult:
    """Script, layout, regions, blocking, camera, metrics; writes every artifact when ``out_dir`` is set."""
    cfg = cfg or PipelineConfig()
    if (idea is None) == (screenplay is None):
        raise ValueError("give exactly one of idea or screenplay")
    backend = backend or make_backend(cfg)
    catalog = catalog or load_motion_catalog()
    registry = registry or load_registry(overrides=cfg.camera)
    log = Transcript()

    with _stage("script"):
        if screenplay is None:
            screenplay = stage_script(idea, backend, cfg, log)
        else:
            check_screenplay(screenplay)
    with _stage("layout"):
        placed = stage_layout(scene, cfg, seed, backend, log)
    with _stage("regions"):
        placed, fm = stage_regions(placed, cfg, scene.sittable_hints)
    with _stage("blocking"):
        plan = stage_blocking(screenplay, placed, fm, catalog, backend, cfg, log)
    with _stage("camera"):
        shots = stage_camera(screenplay, placed, fm, plan, backend, cfg, registry, log)
    with _stage("metrics"):
        report = compute_report(placed, plan, shots.plans, annotations, registry=registry, region_params=cfg.region)

    files: list[Path] = []
    if out_dir is not None:
        out = Path(out_dir)
        files += [
            write_artifact(out / "screenplay.json", "screenplay", screenplay),
            write_artifact(out / "placed_scene.json", "placed_scene", placed),
            write_artifact(out / "functional_map.json", "functional_map", fm),
            write_artifact(out / "behaviour_plan.json", "behaviour_plan", plan),
            write_artifact(out / "shot_plans.json", "shot_plans", shots),
            write_artifact(out / "metrics.json", "metrics", report),
            write_artifact(out / "transcript.json", "transcript", log),
        ]
        for layer, kwargs in (
            ("detection", {}),
            ("functional", {"fm": fm}),
            ("shot", {"shots": shots.plans}),
        ):
            path = out / f"{layer}.svg"
            path.write_text(render_svg(placed, layer, **kwargs))
            files.append(path)
        if isinstance(backend, RecordingBackend) and cfg.record_to:
            backend.save(Path(cfg.record_to))
    return PipelineResult(screenplay, placed, fm, plan, shots, report, log, tuple(files))
