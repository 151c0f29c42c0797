"""The two collaboration loops and the bookkeeping they share.

Discuss-Revise-Judge: a draft collects feedback from several roles, is
revised, and is judged by a director; rejection starts another round with
the director's notes. Debate-Judge-Validation: two proposers critique each
other, a judge chooses, and the choice is validated and repaired until it
passes or the attempt budget runs out.
"""

from __future__ import annotations

import enum
import json
import threading
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Callable, Generic, Mapping, Optional, Sequence, TypeVar

from ..codec import encode
from .backends import AgentBackend, BackendError
from .parsing import ParseError, parse_structured

T = TypeVar("T")
C = TypeVar("C")


class RoleKind(str, enum.Enum):
    SCREENWRITER = "screenwriter"
    ACTOR = "actor"
    DIRECTOR = "director"
    CINEMATOGRAPHER = "cinematographer"
    SCENE_DESIGNER = "scene_designer"


@dataclass(frozen=True)
class Role:
    kind: RoleKind
    persona: str = ""
    character_binding: Optional[str] = None
    tag: str = ""

    def __post_init__(self) -> None:
        if (self.kind is RoleKind.ACTOR) != (self.character_binding is not None):
            raise ValueError("actors need a character binding and other roles must not have one")

    @property
    def label(self) -> str:
        name = self.character_binding or self.tag
        return f"{self.kind.value}:{name}" if name else self.kind.value


class MessageKind(str, enum.Enum):
    DRAFT = "draft"
    FEEDBACK = "feedback"
    REVISION = "revision"
    JUDGMENT = "judgment"
    PROPOSAL = "proposal"
    CRITIQUE = "critique"
    VALIDATION_RESULT = "validation_result"


@dataclass(frozen=True)
class TranscriptEntry:
    round: int
    role: str
    kind: MessageKind
    payload: str
    parsed: bool = True
    loop: str = ""


class Transcript:
    """Append-only message log; safe to share between threads.

    ``scope(name)`` returns a view that writes into the same log under a loop
    name. Round indices must not decrease within one loop.
    """

    def __init__(self, entries: Sequence[TranscriptEntry] = (), *, _shared=None, _loop: str = "") -> None:
        self._shared = _shared if _shared is not None else (list(entries), threading.Lock())
        self._loop = _loop

    def scope(self, loop: str) -> "Transcript":
        name = f"{self._loop}/{loop}" if self._loop else loop
        return Transcript(_shared=self._shared, _loop=name)

    def add(self, round: int, role: str, kind: MessageKind, payload: str, parsed: bool = True) -> None:
        entries, lock = self._shared
        with lock:
            for prev in reversed(entries):
                if prev.loop == self._loop:
                    if round < prev.round:
                        raise ValueError("round indices must not decrease within a loop")
                    break
            if kind is MessageKind.JUDGMENT and not role.startswith(RoleKind.DIRECTOR.value):
                raise ValueError(f"judgment from non-director role {role!r}")
            entries.append(TranscriptEntry(round, role, kind, payload, parsed, self._loop))

    @property
    def entries(self) -> tuple[TranscriptEntry, ...]:
        entries, lock = self._shared
        with lock:
            if not self._loop:
                return tuple(entries)
            prefix = self._loop + "/"
            return tuple(e for e in entries if e.loop == self._loop or e.loop.startswith(prefix))

    def of_kind(self, kind: MessageKind) -> list[TranscriptEntry]:
        return [e for e in self.entries if e.kind is kind]

    def loops(self) -> list[str]:
        return list(dict.fromkeys(e.loop for e in self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> list[dict]:
        return [
            {
                "loop": e.loop,
                "round": e.round,
                "role": e.role,
                "kind": e.kind.value,
                "payload": e.payload,
                "parsed": e.parsed,
            }
            for e in self.entries
        ]


@dataclass(frozen=True)
class LoopConfig:
    max_rounds: int = 3
    retry_on_parse_failure: int = 1
    max_validation_attempts: int = 5
    debate_exchanges: int = 1

    def __post_init__(self) -> None:
        if self.max_rounds < 1 or self.max_validation_attempts < 1:
            raise ValueError("round and validation caps must be >= 1")
        if self.retry_on_parse_failure < 0 or self.debate_exchanges < 0:
            raise ValueError("retry and exchange counts must be >= 0")


_PROMPT_CACHE: dict[str, str] = {}


def prompt_template(schema_id: str) -> str:
    """Instruction text shipped with the package for a reply schema."""
    if schema_id not in _PROMPT_CACHE:
        try:
            text = resources.files("previz.agents").joinpath("prompts", f"{schema_id}.txt").read_text()
        except FileNotFoundError:
            text = ""
        _PROMPT_CACHE[schema_id] = text
    return _PROMPT_CACHE[schema_id]


def ask(
    backend: AgentBackend,
    role: str,
    context: Mapping[str, Any],
    schema_id: str,
    cfg: LoopConfig,
    transcript: Transcript,
    round: int,
    kind: MessageKind,
    *,
    log_success: bool = True,
) -> Any:
    """One logical request with bounded re-asks on unparseable replies.

    Failed parses are always logged. Successful replies are logged unless
    ``log_success`` is false, which loop callbacks use because the loop
    records the resulting artifact itself.
    """
    prompt: dict[str, Any] = {"instruction": prompt_template(schema_id), "context": dict(context)}
    for attempt in range(cfg.retry_on_parse_failure + 1):
        raw = backend.complete(role, prompt, schema_id)
        try:
            value = parse_structured(raw, schema_id)
        except ParseError as exc:
            transcript.add(round, role, kind, raw, parsed=False)
            if attempt == cfg.retry_on_parse_failure:
                raise BackendError(f"{role} gave unparseable {schema_id} reply: {exc}") from exc
            prompt = {**prompt, "parse_error": str(exc), "previous_reply": raw}
            continue
        if log_success:
            transcript.add(round, role, kind, raw)
        return value
    raise AssertionError("unreachable")


def as_payload(value: Any) -> str:
    if hasattr(value, "model_dump"):
        return json.dumps(value.model_dump(mode="json"), sort_keys=True)
    return json.dumps(encode(value), sort_keys=True)


# --------------------------------------------------------------------------
# Discuss-Revise-Judge
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    approve: bool
    feedback: str = ""


@dataclass
class DRJResult(Generic[T]):
    artifact: T
    approved: bool
    rounds: int
    transcript: Transcript
    history: list[T] = field(default_factory=list)


FeedbackFn = Callable[[T, int], str]


def run_discuss_revise_judge(
    make_draft: Callable[[], T],
    feedback_roles: Sequence[tuple[str, Callable[[T, int], str]]],
    revise: Callable[[T, list[tuple[str, str]], int], T],
    judge: Callable[[T, int], Verdict],
    cfg: LoopConfig,
    *,
    score: Optional[Callable[[T], float]] = None,
    transcript: Optional[Transcript] = None,
    judge_role: str = "director:D2",
    drafter_role: str = "director:D1",
    describe: Callable[[Any], str] = as_payload,
) -> DRJResult[T]:
    """Draft, then up to ``cfg.max_rounds`` rounds of feedback, revision and judgment.

    Callbacks that talk to a backend log their own calls; the loop logs the
    artifacts and verdicts it sees. Rejection notes from the judge are
    handed to the next round's revision alongside the role feedback. At the
    cap the lowest-scoring revision (earliest on ties) comes back unapproved.
    """
    log = transcript if transcript is not None else Transcript()
    current = make_draft()
    log.add(0, drafter_role, MessageKind.DRAFT, describe(current))
    history: list[T] = []
    notes: list[tuple[str, str]] = []
    for t in range(1, cfg.max_rounds + 1):
        feedback = list(notes)
        for label, fn in feedback_roles:
            text = fn(current, t)
            log.add(t, label, MessageKind.FEEDBACK, text)
            feedback.append((label, text))
        current = revise(current, feedback, t)
        log.add(t, drafter_role, MessageKind.REVISION, describe(current))
        history.append(current)
        verdict = judge(current, t)
        log.add(t, judge_role, MessageKind.JUDGMENT, json.dumps({"approve": verdict.approve, "feedback": verdict.feedback}))
        if verdict.approve:
            return DRJResult(current, True, t, log, history)
        notes = [(judge_role, verdict.feedback)]
    if score is None:
        best = history[-1]
    else:
        best = min(enumerate(history), key=lambda iv: (score(iv[1]), iv[0]))[1]
    return DRJResult(best, False, cfg.max_rounds, log, history)


# --------------------------------------------------------------------------
# Debate-Judge-Validation
# --------------------------------------------------------------------------


@dataclass
class DJVResult(Generic[C]):
    choice: C
    passed: bool
    attempts: int
    fallback: bool
    transcript: Transcript
    report: Any = None


def run_debate_judge_validation(
    proposers: Sequence[Callable[[], C]],
    critique: Callable[[int, C, C, int], str],
    judge: Callable[[C, C, list[str]], C],
    validator: Callable[[C], tuple[bool, Any]],
    adjuster: Callable[[C, Any], Optional[C]],
    cfg: LoopConfig,
    *,
    transcript: Optional[Transcript] = None,
    proposer_roles: Sequence[str] = ("cinematographer:P1", "cinematographer:P2"),
    judge_role: str = "director:D",
    validator_role: str = "engine",
    describe: Callable[[Any], str] = as_payload,
    describe_report: Callable[[Any], str] = as_payload,
) -> DJVResult[C]:
    """Two proposals, cross-critiques, a judged choice, then validate-and-repair.

    Validation runs at most ``cfg.max_validation_attempts`` times. When the
    adjuster gives up or the budget is spent, the last choice is returned
    with ``fallback`` set so the caller can substitute a safe default.
    """
    if len(proposers) != 2:
        raise ValueError("exactly two proposers are required")
    log = transcript if transcript is not None else Transcript()
    proposals = []
    for role, make in zip(proposer_roles, proposers):
        p = make()
        log.add(0, role, MessageKind.PROPOSAL, describe(p))
        proposals.append(p)
    critiques: list[str] = []
    for x in range(1, cfg.debate_exchanges + 1):
        for i, role in enumerate(proposer_roles):
            text = critique(i, proposals[i], proposals[1 - i], x)
            log.add(x, role, MessageKind.CRITIQUE, text)
            critiques.append(text)
    base = cfg.debate_exchanges + 1
    choice = judge(proposals[0], proposals[1], critiques)
    log.add(base, judge_role, MessageKind.JUDGMENT, describe(choice))
    report = None
    for attempt in range(1, cfg.max_validation_attempts + 1):
        ok, report = validator(choice)
        log.add(base + attempt, validator_role, MessageKind.VALIDATION_RESULT, describe_report(report))
        if ok:
            return DJVResult(choice, True, attempt, False, log, report)
        if attempt == cfg.max_validation_attempts:
            break
        nxt = adjuster(choice, report)
        if nxt is None:
            break
        log.add(base + attempt, validator_role, MessageKind.REVISION, describe(nxt))
        choice = nxt
    return DJVResult(choice, False, attempt, True, log, report)
