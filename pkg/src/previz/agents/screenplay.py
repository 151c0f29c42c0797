"""Screenplay development: profiles, act outline, then a reviewed draft per act."""

from __future__ import annotations

import json
from typing import Optional

from ..model import (
    Act,
    CharacterProfile,
    Clip,
    DialogueLine,
    Gender,
    Screenplay,
    Violation,
    validate_screenplay,
)
from .backends import AgentBackend
from .parsing import ActDraftOut, ActOutline, ActsOut, FeedbackOut, JudgmentOut, ProfilesOut
from .protocols import LoopConfig, MessageKind, Transcript, Verdict, ask, run_discuss_revise_judge

SCREENWRITER = "screenwriter"
DIRECTOR = "director"


class ValidationError(ValueError):
    """The finished screenplay breaks a structural rule."""

    def __init__(self, violations: list[Violation]) -> None:
        self.violations = violations
        super().__init__("; ".join(f"{v.field}: {v.detail}" for v in violations))


def _profiles(reply: ProfilesOut) -> tuple[CharacterProfile, ...]:
    return tuple(
        CharacterProfile(p.name, p.age, Gender(p.gender), p.occupation, p.traits, p.speaking_style)
        for p in reply.profiles
    )


def _clips(draft: ActDraftOut) -> tuple[Clip, ...]:
    return tuple(
        Clip(c.index, tuple(DialogueLine(ln.speaker, ln.text) for ln in c.lines), c.duration) for c in draft.clips
    )


def _act(outline: ActOutline, clips: tuple[Clip, ...]) -> Act:
    return Act(
        outline.index,
        outline.sub_topic,
        tuple(outline.participants),
        outline.scene_description,
        outline.plot,
        outline.dialogue_goal,
        clips,
    )


def _draft_json(draft: ActDraftOut) -> str:
    return json.dumps(draft.model_dump(mode="json"), sort_keys=True)


def act_violations(outline: ActOutline, draft: ActDraftOut, profiles: tuple[CharacterProfile, ...]) -> int:
    probe = Screenplay("", profiles, (_act(outline, _clips(draft)),))
    # index contiguity is a whole-screenplay rule; score the act on its own content
    return sum(1 for v in validate_screenplay(probe) if v.rule != "contiguous")


def develop_screenplay(
    idea: str,
    backend: AgentBackend,
    cfg: LoopConfig,
    transcript: Optional[Transcript] = None,
) -> tuple[Screenplay, Transcript]:
    if not idea.strip():
        raise ValueError("idea must be nonempty")
    log = transcript if transcript is not None else Transcript()
    head = log.scope("script")
    profiles = _profiles(ask(backend, SCREENWRITER, {"idea": idea}, "profiles", cfg, head, 0, MessageKind.DRAFT))
    people = [{"name": p.name, "traits": p.traits, "speaking_style": p.speaking_style} for p in profiles]
    outline: ActsOut = ask(
        backend, SCREENWRITER, {"idea": idea, "profiles": people}, "acts", cfg, head, 1, MessageKind.DRAFT
    )

    acts = []
    for a in outline.acts:
        scope = log.scope(f"script/act{a.index}")
        base = {"idea": idea, "profiles": people, "act": a.model_dump(mode="json")}

        def make_draft(base=base, scope=scope) -> ActDraftOut:
            return ask(backend, SCREENWRITER, base, "act_draft", cfg, scope, 0, MessageKind.DRAFT, log_success=False)

        def actor(name: str, base=base, scope=scope):
            def fn(draft: ActDraftOut, t: int) -> str:
                prompt = {**base, "character": name, "draft": draft.model_dump(mode="json")}
                reply: FeedbackOut = ask(
                    backend, f"actor:{name}", prompt, "feedback", cfg, scope, t, MessageKind.FEEDBACK, log_success=False
                )
                return json.dumps(reply.model_dump(mode="json"), sort_keys=True)

            return fn

        def revise(draft: ActDraftOut, notes, t: int, base=base, scope=scope) -> ActDraftOut:
            prompt = {
                **base,
                "draft": draft.model_dump(mode="json"),
                "feedback": [{"role": r, "text": x} for r, x in notes],
            }
            return ask(backend, SCREENWRITER, prompt, "act_draft", cfg, scope, t, MessageKind.REVISION, log_success=False)

        def judge(draft: ActDraftOut, t: int, base=base, scope=scope) -> Verdict:
            prompt = {**base, "draft": draft.model_dump(mode="json")}
            reply: JudgmentOut = ask(
                backend, DIRECTOR, prompt, "judgment", cfg, scope, t, MessageKind.JUDGMENT, log_success=False
            )
            return Verdict(reply.approve, reply.feedback)

        result = run_discuss_revise_judge(
            make_draft,
            [(f"actor:{n}", actor(n)) for n in a.participants],
            revise,
            judge,
            cfg,
            score=lambda d, a=a: act_violations(a, d, profiles),
            transcript=scope,
            judge_role=DIRECTOR,
            drafter_role=SCREENWRITER,
            describe=_draft_json,
        )
        acts.append(_act(a, _clips(result.artifact)))

    screenplay = Screenplay(idea, profiles, tuple(acts))
    problems = validate_screenplay(screenplay)
    if problems:
        raise ValidationError(problems)
    return screenplay, log
