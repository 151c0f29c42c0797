"""Strict schemas for backend replies.

Every reply is a JSON object validated against a pydantic model that forbids
unknown keys. ``parse_structured`` turns any failure into ``ParseError`` with
a dotted location so a retry prompt can point at the offending field.
"""

from __future__ import annotations

import json
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..model import Behaviour, State


class ParseError(ValueError):
    def __init__(self, message: str, location: str = "$") -> None:
        super().__init__(f"{location}: {message}")
        self.location = location
        self.message = message


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# -- screenplay ------------------------------------------------------------


class ProfileOut(Strict):
    name: str = Field(min_length=1)
    age: int
    gender: Literal["female", "male", "other", "unspecified"]
    occupation: str = ""
    traits: str = ""
    speaking_style: str = ""


class ProfilesOut(Strict):
    profiles: list[ProfileOut] = Field(min_length=1)


class ActOutline(Strict):
    index: int
    sub_topic: str
    participants: list[str]
    scene_description: str
    plot: str
    dialogue_goal: str


class ActsOut(Strict):
    acts: list[ActOutline] = Field(min_length=1)


class LineOut(Strict):
    speaker: str
    text: str


class ClipOut(Strict):
    index: int
    lines: list[LineOut]
    duration: Optional[float] = None


class ActDraftOut(Strict):
    clips: list[ClipOut] = Field(min_length=1)


# -- discussion ------------------------------------------------------------


class FeedbackOut(Strict):
    comments: str
    issues: list[str] = []


class JudgmentOut(Strict):
    approve: bool
    feedback: str = ""


# -- blocking and motion ---------------------------------------------------


class BehaviourOut(Strict):
    character: str
    start_state: State
    start_pos: tuple[float, float]
    start_facing: float
    end_state: State
    end_pos: tuple[float, float]
    end_facing: float

    def to_behaviour(self) -> Behaviour:
        return Behaviour(
            self.character,
            self.start_state,
            self.start_pos,
            self.start_facing,
            self.end_state,
            self.end_pos,
            self.end_facing,
        )


class PoseRef(Strict):
    """A spot given as a region parcel, a seat object id or raw coordinates."""

    state: State
    region: Optional[tuple[int, int]] = None
    seat: Optional[str] = None
    pos: Optional[tuple[float, float]] = None
    facing: Optional[float] = None


class BlockingEntry(Strict):
    character: str
    start: PoseRef
    end: Optional[PoseRef] = None


class BlockingOut(Strict):
    characters: list[BlockingEntry]


class MotionChoice(Strict):
    character: str
    motion_id: int
    reason: str = ""


class MotionOut(Strict):
    choices: list[MotionChoice]


# -- camera ----------------------------------------------------------------


class ShotProposalOut(Strict):
    type: str
    subjects: list[str] = Field(min_length=1)
    relation: Optional[str] = None
    framing: Optional[str] = None
    shot_size: Optional[str] = None
    angle: Optional[str] = None
    start_elev: Optional[str] = None
    end_elev: Optional[str] = None
    ease: Optional[str] = None
    rationale: str = ""


class CritiqueOut(Strict):
    comments: str
    concede: bool = False


class ShotJudgmentOut(Strict):
    pick: Optional[Literal[1, 2]] = None
    merged: Optional[ShotProposalOut] = None
    rationale: str = ""


class OrnamentsOut(Strict):
    labels: list[str]


SCHEMAS: dict[str, type[Strict]] = {
    "profiles": ProfilesOut,
    "acts": ActsOut,
    "act_draft": ActDraftOut,
    "feedback": FeedbackOut,
    "judgment": JudgmentOut,
    "behaviour": BehaviourOut,
    "blocking": BlockingOut,
    "motion": MotionOut,
    "shot_proposal": ShotProposalOut,
    "critique": CritiqueOut,
    "shot_judgment": ShotJudgmentOut,
    "ornaments": OrnamentsOut,
}


def _location(err: dict) -> str:
    parts = ["$"]
    for p in err.get("loc", ()):
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts)


def parse_structured(raw: str, schema_id: str) -> Any:
    """Validate ``raw`` against ``schema_id``.

    The ``behaviour`` schema yields a domain ``Behaviour``; all others yield
    their pydantic model.
    """
    model = SCHEMAS.get(schema_id)
    if model is None:
        raise KeyError(f"unknown schema id {schema_id!r}")
    text = raw.strip()
    # tolerate a fenced block around the JSON body
    if text.startswith("```"):
        text = text.strip("`")
        text = text[text.find("\n") + 1 :] if "\n" in text else text
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg} at char {exc.pos})") from exc
    if not isinstance(data, dict):
        raise ParseError("expected a JSON object")
    try:
        value = model.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = _location(first)
        raise ParseError(first.get("msg", "invalid value"), loc) from exc
    if isinstance(value, BehaviourOut):
        try:
            return value.to_behaviour()
        except ValueError as exc:
            raise ParseError(str(exc)) from exc
    return value


def schema_hint(schema_id: str) -> dict:
    """JSON schema for a reply, embedded in prompts for remote models."""
    return SCHEMAS[schema_id].model_json_schema()


Payload = Union[Strict, Behaviour]
