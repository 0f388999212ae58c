"""Deterministic synthetic cocktail-scene generator with known ground truth.

Builds a frame sequence, grouping timeline, and activity table from a scene
script.  Group members stand on a circle around a shared O-space center and
face it, so their attention points coincide at the center; isolated persons
stand on an outer ring facing away from the room.  Scripted events move
people between groups, and a configurable turn-taking rule drives the
activity flags:

  * the speaker inside each group rotates every `period` frames;
  * the upcoming speaker raises `hand_gesturing` for the `lead_in` frames
    before each switch;
  * listeners raise `head_gesturing` with probability `listener_head_prob`;
  * the remaining flags carry independent Bernoulli noise.

Identical (config, seed) pairs produce identical output, byte for byte once
serialized.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .annotation_io import (
    ACTIVITY_NAMES,
    ActivityRecord,
    FrameSequence,
    Group,
    GroupingTimeline,
    ParticipantFrame,
)
from .attention import normalize_angle

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


class SceneConfigError(ValueError):
    """A scene script is internally inconsistent."""


@dataclass(frozen=True)
class JoinEvent:
    frame: int
    person: int
    group: int
    walk_frames: int = 0


@dataclass(frozen=True)
class LeaveEvent:
    frame: int
    person: int
    walk_frames: int = 0


@dataclass(frozen=True)
class PassThroughEvent:
    person: int
    start: int
    frames: int
    from_point: tuple[float, float]
    to_point: tuple[float, float]


@dataclass(frozen=True)
class TorsionEvent:
    """Head-only turn: head angle offset from the torso over [start, end]."""

    person: int
    start: int
    end: int
    offset: float = math.pi / 2


@dataclass(frozen=True)
class TurnRule:
    """Deterministic turn-taking schedule inside each group."""

    period: int = 8
    lead_in: int = 3
    listener_head_prob: float = 0.25
    noise_prob: float = 0.02
    silence_frames: int = 0
    overlap_frames: int = 0

    def __post_init__(self):
        if self.period < 2:
            raise SceneConfigError("turn period must be at least 2 frames")
        if not 0 < self.lead_in < self.period:
            raise SceneConfigError("lead_in must lie strictly inside the period")
        if self.silence_frames + self.overlap_frames >= self.period:
            raise SceneConfigError("silence + overlap must leave speaking frames")


@dataclass
class SyntheticSceneConfig:
    seed: int
    participants: int
    duration: int
    groups: list[list[int]] = field(default_factory=list)
    group_radius: float = 100.0
    canvas: tuple[float, float] = (1200.0, 1200.0)
    angle_noise_sd: float = 0.0
    events: list = field(default_factory=list)
    torsion_events: list[TorsionEvent] = field(default_factory=list)
    turns: TurnRule = field(default_factory=TurnRule)

    def __post_init__(self):
        if self.participants < 1:
            raise SceneConfigError("need at least one participant")
        if self.duration < 1:
            raise SceneConfigError("duration must be at least one frame")
        if self.group_radius <= 0:
            raise SceneConfigError("group_radius must be positive")
        seen: set[int] = set()
        for i, members in enumerate(self.groups):
            if len(members) < 2:
                raise SceneConfigError(f"initial group {i} needs at least 2 members")
            for person in members:
                self._check_person(person, f"initial group {i}")
                if person in seen:
                    raise SceneConfigError(
                        f"person {person} appears in two initial groups"
                    )
                seen.add(person)
        for event in self.events:
            self._check_event(event)
        for torsion in self.torsion_events:
            self._check_person(torsion.person, "torsion event")
            if not 0 <= torsion.start <= torsion.end < self.duration:
                raise SceneConfigError(
                    f"torsion frames [{torsion.start}, {torsion.end}] outside scene"
                )

    def _check_person(self, person: int, where: str):
        if not 0 <= person < self.participants:
            raise SceneConfigError(f"{where}: unknown person {person}")

    def _check_event(self, event):
        if isinstance(event, JoinEvent):
            self._check_person(event.person, "join event")
            if event.group < 0:
                raise SceneConfigError("join event: group id must be >= 0")
            if not 0 <= event.frame < self.duration:
                raise SceneConfigError(f"join event at frame {event.frame} outside scene")
        elif isinstance(event, LeaveEvent):
            self._check_person(event.person, "leave event")
            if not 0 <= event.frame < self.duration:
                raise SceneConfigError(f"leave event at frame {event.frame} outside scene")
        elif isinstance(event, PassThroughEvent):
            self._check_person(event.person, "pass-through event")
            if event.frames < 1:
                raise SceneConfigError("pass-through needs at least one frame")
            if not 0 <= event.start < self.duration:
                raise SceneConfigError(
                    f"pass-through at frame {event.start} outside scene"
                )
        else:
            raise SceneConfigError(f"unknown event type: {event!r}")


def _event_from_dict(raw: dict):
    kind = raw.get("kind")
    if kind == "join":
        return JoinEvent(
            frame=int(raw["frame"]),
            person=int(raw["person"]),
            group=int(raw["group"]),
            walk_frames=int(raw.get("walk_frames", 0)),
        )
    if kind == "leave":
        return LeaveEvent(
            frame=int(raw["frame"]),
            person=int(raw["person"]),
            walk_frames=int(raw.get("walk_frames", 0)),
        )
    if kind == "pass_through":
        return PassThroughEvent(
            person=int(raw["person"]),
            start=int(raw["start"]),
            frames=int(raw["frames"]),
            from_point=tuple(float(v) for v in raw["from"]),
            to_point=tuple(float(v) for v in raw["to"]),
        )
    raise SceneConfigError(f"unknown event kind: {kind!r}")


def scene_config_from_dict(raw: dict) -> SyntheticSceneConfig:
    """Build a scene config from parsed JSON; `seed` is mandatory."""
    if "seed" not in raw:
        raise SceneConfigError("scene config must set an explicit seed")
    known = {
        "seed",
        "participants",
        "duration",
        "groups",
        "group_radius",
        "canvas",
        "angle_noise_sd",
        "events",
        "torsion_events",
        "turns",
    }
    unknown = set(raw) - known
    if unknown:
        raise SceneConfigError(f"unknown scene config keys: {sorted(unknown)}")
    try:
        turns = TurnRule(**raw.get("turns", {}))
    except TypeError as exc:
        raise SceneConfigError(f"bad turns block: {exc}") from None
    torsions = [
        TorsionEvent(
            person=int(t["person"]),
            start=int(t["start"]),
            end=int(t["end"]),
            offset=float(t.get("offset", math.pi / 2)),
        )
        for t in raw.get("torsion_events", [])
    ]
    return SyntheticSceneConfig(
        seed=int(raw["seed"]),
        participants=int(raw["participants"]),
        duration=int(raw["duration"]),
        groups=[list(map(int, g)) for g in raw.get("groups", [])],
        group_radius=float(raw.get("group_radius", 100.0)),
        canvas=tuple(float(v) for v in raw.get("canvas", (1200.0, 1200.0))),
        angle_noise_sd=float(raw.get("angle_noise_sd", 0.0)),
        events=[_event_from_dict(e) for e in raw.get("events", [])],
        torsion_events=torsions,
        turns=turns,
    )


def load_scene_config(path) -> SyntheticSceneConfig:
    with open(path) as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise SceneConfigError(f"{path}: not valid JSON ({exc})") from None
    return scene_config_from_dict(raw)


@dataclass
class _Walk:
    start: int
    end: int
    from_point: tuple[float, float]
    to_point: tuple[float, float]
    face: float  # orientation held during the walk

    def position_at(self, frame: int) -> tuple[float, float]:
        span = self.end - self.start + 1
        t = (frame - self.start + 1) / span
        fx, fy = self.from_point
        tx, ty = self.to_point
        return (fx + (tx - fx) * t, fy + (ty - fy) * t)


class _SceneState:
    """Mutable simulation state: membership, positions, walk plans."""

    def __init__(self, config: SyntheticSceneConfig):
        self.config = config
        cx, cy = config.canvas[0] / 2.0, config.canvas[1] / 2.0
        self.center = (cx, cy)
        scale = min(config.canvas)
        self.ring_radius = 0.30 * scale
        self.outer_radius = 0.46 * scale
        max_join_group = max(
            (e.group for e in config.events if isinstance(e, JoinEvent)), default=-1
        )
        self.n_slots = max(len(config.groups), max_join_group + 1, 1)
        self.members: dict[int, set[int]] = {
            g: set(members) for g, members in enumerate(config.groups)
        }
        self.person_group: dict[int, int] = {}
        for g, members in self.members.items():
            for person in members:
                self.person_group[person] = g
        self.walks: dict[int, _Walk] = {}
        self.positions: dict[int, tuple[float, float]] = {}
        self.orientations: dict[int, float] = {}

    def group_center(self, group: int) -> tuple[float, float]:
        angle = GOLDEN_ANGLE / 2.0 + 2.0 * math.pi * group / self.n_slots
        return (
            self.center[0] + self.ring_radius * math.cos(angle),
            self.center[1] + self.ring_radius * math.sin(angle),
        )

    def home_spot(self, person: int) -> tuple[float, float]:
        angle = GOLDEN_ANGLE * (person + 1)
        return (
            self.center[0] + self.outer_radius * math.cos(angle),
            self.center[1] + self.outer_radius * math.sin(angle),
        )

    def slot(self, person: int, group: int, members: set[int]) -> tuple[float, float]:
        ordered = sorted(members)
        rank = ordered.index(person)
        phase = 0.5 + group  # de-synchronizes slot layouts between groups
        angle = phase + 2.0 * math.pi * rank / len(ordered)
        center = self.group_center(group)
        return (
            center[0] + self.config.group_radius * math.cos(angle),
            center[1] + self.config.group_radius * math.sin(angle),
        )

    def resting_pose(self, person: int) -> tuple[tuple[float, float], float]:
        """Position and torso orientation when not walking."""
        group = self.person_group.get(person)
        if group is not None:
            position = self.slot(person, group, self.members[group])
            center = self.group_center(group)
            face = math.atan2(center[1] - position[1], center[0] - position[0])
            return position, face
        position = self.home_spot(person)
        face = math.atan2(position[1] - self.center[1], position[0] - self.center[0])
        return position, face


def _bearing(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.atan2(b[1] - a[1], b[0] - a[0])


def generate_scene(
    config: SyntheticSceneConfig,
) -> tuple[FrameSequence, GroupingTimeline, list[ActivityRecord]]:
    """Simulate the scene script into (frames, ground-truth groups, activities)."""
    state = _SceneState(config)
    rng = np.random.default_rng(config.seed)
    sequence = FrameSequence()
    timeline = GroupingTimeline()
    activities: list[ActivityRecord] = []
    persons = list(range(config.participants))

    joins = [e for e in config.events if isinstance(e, JoinEvent)]
    leaves = [e for e in config.events if isinstance(e, LeaveEvent)]
    passes = [e for e in config.events if isinstance(e, PassThroughEvent)]
    torsion_by_person: dict[int, list[TorsionEvent]] = {}
    for torsion in config.torsion_events:
        torsion_by_person.setdefault(torsion.person, []).append(torsion)

    # Seed resting poses so walks can start from a known position.
    for person in persons:
        position, face = state.resting_pose(person)
        state.positions[person] = position
        state.orientations[person] = face

    for frame in range(config.duration):
        # Start approach walks ahead of the join frame.
        for event in joins:
            if event.walk_frames > 0 and frame == max(0, event.frame - event.walk_frames):
                target_members = state.members.get(event.group, set()) | {event.person}
                target = state.slot(event.person, event.group, target_members)
                center = state.group_center(event.group)
                state.walks[event.person] = _Walk(
                    start=frame,
                    end=event.frame - 1,
                    from_point=state.positions[event.person],
                    to_point=target,
                    face=_bearing(state.positions[event.person], center),
                )
        # Membership changes fire exactly at the event frame.
        for event in joins:
            if event.frame == frame:
                old = state.person_group.pop(event.person, None)
                if old is not None:
                    state.members[old].discard(event.person)
                state.members.setdefault(event.group, set()).add(event.person)
                state.person_group[event.person] = event.group
                state.walks.pop(event.person, None)
        for event in leaves:
            if event.frame == frame:
                old = state.person_group.pop(event.person, None)
                if old is not None:
                    state.members[old].discard(event.person)
                if event.walk_frames > 0:
                    home = state.home_spot(event.person)
                    state.walks[event.person] = _Walk(
                        start=frame,
                        end=frame + event.walk_frames - 1,
                        from_point=state.positions[event.person],
                        to_point=home,
                        face=_bearing(state.positions[event.person], home),
                    )
        for event in passes:
            if event.start == frame:
                state.walks[event.person] = _Walk(
                    start=frame,
                    end=frame + event.frames - 1,
                    from_point=event.from_point,
                    to_point=event.to_point,
                    face=_bearing(event.from_point, event.to_point),
                )

        # Fixed-size random blocks per frame keep the stream layout stable.
        noise = rng.normal(0.0, config.angle_noise_sd or 0.0, size=2 * len(persons))
        uniforms = rng.random(size=(len(persons), 6))

        walking_now: set[int] = set()
        for idx, person in enumerate(persons):
            walk = state.walks.get(person)
            if walk is not None and walk.start <= frame <= walk.end:
                position = walk.position_at(frame)
                face = walk.face
                walking_now.add(person)
                if frame == walk.end:
                    del state.walks[person]
            else:
                position, face = state.resting_pose(person)
            state.positions[person] = position
            state.orientations[person] = face

            head = face
            for torsion in torsion_by_person.get(person, ()):
                if torsion.start <= frame <= torsion.end:
                    head = face + torsion.offset
            head = normalize_angle(head + noise[2 * idx])
            torso = normalize_angle(face + noise[2 * idx + 1])
            sequence.add(
                ParticipantFrame(person, frame, position[0], position[1], head, torso)
            )

        groups_now = [
            Group(group_id, frozenset(members))
            for group_id, members in sorted(state.members.items())
            if len(members) >= 2
        ]
        timeline.set_groups(frame, groups_now)

        flags_by_person = {
            person: _noise_flags(uniforms[person], config.turns, walking=person in walking_now)
            for person in persons
        }
        rule = config.turns
        for group_id, members in sorted(state.members.items()):
            if len(members) < 2:
                continue
            ordered = sorted(members)
            m = len(ordered)
            cycle = frame // rule.period
            pos = frame % rule.period
            speaker = ordered[cycle % m]
            upcoming = ordered[(cycle + 1) % m]
            silent = pos < rule.silence_frames
            overlapping = pos >= rule.period - rule.overlap_frames and rule.overlap_frames > 0
            for person in ordered:
                flags = flags_by_person[person]
                if person == speaker and not silent:
                    flags["speaking"] = 1
                if person == upcoming and overlapping:
                    flags["speaking"] = 1
                if person == upcoming and pos >= rule.period - rule.lead_in:
                    flags["hand_gesturing"] = 1
                if person != speaker and flags["speaking"] == 0:
                    if uniforms[person][5] < rule.listener_head_prob:
                        flags["head_gesturing"] = 1
        for person in persons:
            flags = flags_by_person[person]
            activities.append(
                ActivityRecord(
                    person, frame, tuple(flags[name] for name in ACTIVITY_NAMES)
                )
            )

    return sequence, timeline, activities


def _noise_flags(uniforms: np.ndarray, rule: TurnRule, walking: bool) -> dict[str, int]:
    p = rule.noise_prob
    return {
        "walking": 1 if walking else int(uniforms[0] < p),
        "stepping": int(uniforms[1] < p),
        "drinking": int(uniforms[2] < p),
        "speaking": 0,
        "hand_gesturing": 0,
        "head_gesturing": 0,
        "laughing": int(uniforms[3] < p),
        "hair_touching": int(uniforms[4] < p),
    }
