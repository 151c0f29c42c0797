"""Rule-based replies for every schema, used as the scripted backend's fallback.

The answers are deterministic functions of the prompt context. They are
plausible rather than clever: everyone stands on the best free regions,
speakers talk, listeners listen, and shots default to conventional framings.
"""

from __future__ import annotations

import json
import math
from typing import Any, Mapping, Optional

DEFAULT_CAST = (
    {"name": "Clara", "age": 34, "gender": "female", "occupation": "architect", "traits": "guarded, precise",
     "speaking_style": "short sentences"},
    {"name": "Elias", "age": 41, "gender": "male", "occupation": "teacher", "traits": "withdrawn, gentle",
     "speaking_style": "hesitant"},
    {"name": "Maya", "age": 29, "gender": "female", "occupation": "journalist", "traits": "direct, restless",
     "speaking_style": "probing questions"},
)

_MIN_GAP = 1.0


def _profiles(ctx: Mapping[str, Any]) -> dict:
    return {"profiles": [dict(p) for p in DEFAULT_CAST]}


def _acts(ctx: Mapping[str, Any]) -> dict:
    names = [p["name"] for p in ctx.get("profiles", DEFAULT_CAST)]
    idea = str(ctx.get("idea", "")).strip() or "an evening conversation"
    beats = ("setup", "confrontation", "resolution")
    return {
        "acts": [
            {
                "index": i + 1,
                "sub_topic": f"{beat} of {idea}",
                "participants": names,
                "scene_description": "a living room at dusk",
                "plot": f"the {beat} unfolds",
                "dialogue_goal": f"carry the {beat}",
            }
            for i, beat in enumerate(beats)
        ]
    }


def _act_draft(ctx: Mapping[str, Any]) -> dict:
    if "draft" in ctx:
        return dict(ctx["draft"])
    names = list(ctx.get("act", {}).get("participants", ()))
    if not names:
        names = [p["name"] for p in DEFAULT_CAST]
    clips = []
    for c in range(2):
        a = names[c % len(names)]
        b = names[(c + 1) % len(names)]
        clips.append(
            {
                "index": c + 1,
                "lines": [
                    {"speaker": a, "text": f"{a} opens beat {c + 1}."},
                    {"speaker": b, "text": f"{b} answers."},
                ],
            }
        )
    return {"clips": clips}


def _feedback(role: str, ctx: Mapping[str, Any]) -> dict:
    issues = list(ctx.get("violations", ()))
    if issues:
        return {"comments": f"{role} flags {len(issues)} problem(s)", "issues": issues}
    return {"comments": f"{role} has no objections", "issues": []}


def _judgment(ctx: Mapping[str, Any]) -> dict:
    issues = list(ctx.get("violations", ()))
    if issues:
        return {"approve": False, "feedback": "fix: " + "; ".join(issues)}
    return {"approve": True, "feedback": "approved"}


def _blocking(ctx: Mapping[str, Any]) -> dict:
    names = list(ctx.get("participants", ()))
    regions = sorted(ctx.get("map", {}).get("regions", ()), key=lambda r: (r["loss"], r["parcel"]))
    chosen: list[dict] = []
    for r in regions:
        if len(chosen) == len(names):
            break
        if all(math.dist(r["center"], c["center"]) >= _MIN_GAP for c in chosen):
            chosen.append(r)
    for r in regions:
        if len(chosen) == len(names):
            break
        if r not in chosen:
            chosen.append(r)
    out = []
    previous = ctx.get("previous_end_poses", {})
    for i, name in enumerate(names):
        if i < len(chosen):
            ref = {"state": "standing", "region": chosen[i]["parcel"]}
        else:
            ref = {"state": "standing", "pos": list(ctx.get("map", {}).get("bounds", [0, 0, 0, 0])[:2])}
        entry = {"character": name, "start": ref}
        if name in previous:
            # stay put but turn towards whoever is addressed in this clip
            here = {"state": previous[name]["end_state"], "pos": previous[name]["end_pos"]}
            entry["start"] = here
            entry["end"] = here
        out.append(entry)
    return {"characters": out}


def _motion(ctx: Mapping[str, Any]) -> dict:
    catalog = {m["name"].lower(): m["id"] for m in ctx.get("catalog", ())}
    speakers = {ln["speaker"] for ln in ctx.get("clip", {}).get("lines", ())}

    def pick(names: tuple[str, ...], state: str) -> Optional[int]:
        for n in names:
            if n.lower() in catalog:
                return catalog[n.lower()]
        for m in ctx.get("catalog", ()):
            if state in m["states"]:
                return m["id"]
        return None

    choices = []
    for name, b in sorted(ctx.get("behaviours", {}).items()):
        state = b["end_state"]
        talking = name in speakers
        if state == "sitting":
            want = ("Sitting Talking",) if talking else ("Sitting Idle",)
        else:
            want = ("Talking",) if talking else ("Listening", "Standing Idle")
        mid = pick(want, state)
        if mid is not None:
            choices.append({"character": name, "motion_id": mid, "reason": "speaks" if talking else "listens"})
    return {"choices": choices}


def _shot(role: str, ctx: Mapping[str, Any]) -> dict:
    subjects = list(ctx.get("subjects", ()))
    second = role.endswith("P2")
    if len(subjects) == 1:
        return {"type": "single_static", "subjects": subjects, "shot_size": "MCU" if second else "MS",
                "angle": "eye", "rationale": "single speaker"}
    if len(subjects) == 2:
        return {"type": "two_static", "subjects": subjects, "relation": "equal",
                "framing": "two_shot" if second else "OTS_pair", "shot_size": "MS", "angle": "eye",
                "rationale": "two-person exchange"}
    return {"type": "group_static", "subjects": subjects, "shot_size": "MLS", "angle": "eye",
            "rationale": "whole group"}


def default_responder(role: str, prompt: Mapping[str, Any], schema_id: str) -> Optional[str]:
    ctx = prompt.get("context", {})
    if schema_id == "profiles":
        out = _profiles(ctx)
    elif schema_id == "acts":
        out = _acts(ctx)
    elif schema_id == "act_draft":
        out = _act_draft(ctx)
    elif schema_id == "feedback":
        out = _feedback(role, ctx)
    elif schema_id == "judgment":
        out = _judgment(ctx)
    elif schema_id == "blocking":
        out = _blocking(ctx)
    elif schema_id == "motion":
        out = _motion(ctx)
    elif schema_id == "shot_proposal":
        out = _shot(role, ctx)
    elif schema_id == "critique":
        out = {"comments": f"{role} reviewed the other proposal", "concede": False}
    elif schema_id == "shot_judgment":
        out = {"pick": 1, "rationale": "first proposal keeps screen direction"}
    elif schema_id == "ornaments":
        out = {"labels": ["plant", "book"]}
    else:
        return None
    return json.dumps(out, sort_keys=True)
