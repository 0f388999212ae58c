"""Frame-level annotation types and their CSV readers/writers.

Three plain CSV tables carry everything the pipeline consumes:

frames.csv      person_id,frame,x,y,head_angle,torso_angle   (angles in radians)
activities.csv  person_id,frame,walking,stepping,drinking,speaking,
                hand_gesturing,head_gesturing,laughing,hair_touching
groups.csv      frame,group_id,member_ids                    (member_ids ';'-separated)

Angles are normalized to [0, 2*pi) on ingestion.  Participants absent at a
frame are simply missing rows; nothing is imputed.
"""

import csv
import io
from dataclasses import dataclass, field

from .attention import normalize_angle

ACTIVITY_NAMES = (
    "walking",
    "stepping",
    "drinking",
    "speaking",
    "hand_gesturing",
    "head_gesturing",
    "laughing",
    "hair_touching",
)
SPEAKING_INDEX = ACTIVITY_NAMES.index("speaking")

FRAMES_HEADER = ("person_id", "frame", "x", "y", "head_angle", "torso_angle")
ACTIVITIES_HEADER = ("person_id", "frame") + ACTIVITY_NAMES
GROUPS_HEADER = ("frame", "group_id", "member_ids")


class AnnotationFormatError(ValueError):
    """A row of an annotation file violates the documented schema."""


@dataclass(frozen=True)
class ParticipantFrame:
    """One person's position and orientation at one frame."""

    person_id: int
    frame: int
    x: float
    y: float
    head_angle: float
    torso_angle: float

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class ActivityRecord:
    """The eight binary activity labels of one person at one frame.

    Flag order follows ACTIVITY_NAMES; speaking sits at index 3.
    """

    person_id: int
    frame: int
    flags: tuple[int, ...]

    def flag(self, name: str) -> int:
        return self.flags[ACTIVITY_NAMES.index(name)]


class FrameSequence:
    """Participant states indexed by frame, with optional frame-rate metadata.

    The frame rate is carried for reporting only; no computation uses it.
    """

    def __init__(self, rows=(), frame_rate: float | None = None):
        self._by_frame: dict[int, dict[int, ParticipantFrame]] = {}
        self.frame_rate = frame_rate
        for row in rows:
            self.add(row)

    def add(self, row: ParticipantFrame):
        at_frame = self._by_frame.setdefault(row.frame, {})
        if row.person_id in at_frame:
            raise AnnotationFormatError(
                f"duplicate entry for person {row.person_id} at frame {row.frame}"
            )
        at_frame[row.person_id] = row

    def frame_indices(self) -> list[int]:
        return sorted(self._by_frame)

    def participants_at(self, frame: int) -> dict[int, ParticipantFrame]:
        return self._by_frame.get(frame, {})

    def person_ids(self) -> set[int]:
        ids: set[int] = set()
        for at_frame in self._by_frame.values():
            ids.update(at_frame)
        return ids

    def rows(self) -> list[ParticipantFrame]:
        out = []
        for frame in self.frame_indices():
            for person in sorted(self._by_frame[frame]):
                out.append(self._by_frame[frame][person])
        return out

    def __len__(self) -> int:
        return len(self._by_frame)


@dataclass
class Group:
    """One conversational group at one frame."""

    group_id: int
    members: frozenset[int]
    center: tuple[float, float] | None = None


class GroupingTimeline:
    """Per-frame lists of groups; persons in no group at a frame are isolated."""

    def __init__(self):
        self._by_frame: dict[int, list[Group]] = {}

    def set_groups(self, frame: int, groups: list[Group]):
        seen: set[int] = set()
        for group in groups:
            overlap = seen & group.members
            if overlap:
                raise AnnotationFormatError(
                    f"frame {frame}: person(s) {sorted(overlap)} appear in two groups"
                )
            seen |= group.members
        self._by_frame[frame] = list(groups)

    def frame_indices(self) -> list[int]:
        return sorted(self._by_frame)

    def groups_at(self, frame: int) -> list[Group]:
        return self._by_frame.get(frame, [])

    def group_of(self, person: int, frame: int) -> Group | None:
        for group in self.groups_at(frame):
            if person in group.members:
                return group
        return None

    def __len__(self) -> int:
        return len(self._by_frame)


def _parse_int(raw: str, line: int, column: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise AnnotationFormatError(
            f"line {line}, column '{column}': expected an integer, got {raw!r}"
        ) from None


def _parse_float(raw: str, line: int, column: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise AnnotationFormatError(
            f"line {line}, column '{column}': expected a number, got {raw!r}"
        ) from None


def _check_header(row: list[str], expected: tuple[str, ...], what: str):
    if [c.strip() for c in row] != list(expected):
        raise AnnotationFormatError(
            f"line 1: {what} header must be {','.join(expected)}"
        )


def _check_width(row: list[str], expected: int, line: int):
    if len(row) != expected:
        raise AnnotationFormatError(
            f"line {line}: expected {expected} columns, got {len(row)}"
        )


def parse_frames(source: io.TextIOBase, frame_rate: float | None = None) -> FrameSequence:
    """Read frames.csv rows into a FrameSequence.

    Angles are normalized to [0, 2*pi).  Malformed rows and duplicate
    (person, frame) pairs raise AnnotationFormatError naming the line.
    """
    sequence = FrameSequence(frame_rate=frame_rate)
    reader = csv.reader(source)
    for line, row in enumerate(reader, start=1):
        if not row:
            continue
        if line == 1:
            _check_header(row, FRAMES_HEADER, "frames")
            continue
        _check_width(row, len(FRAMES_HEADER), line)
        record = ParticipantFrame(
            person_id=_parse_int(row[0], line, "person_id"),
            frame=_parse_int(row[1], line, "frame"),
            x=_parse_float(row[2], line, "x"),
            y=_parse_float(row[3], line, "y"),
            head_angle=normalize_angle(_parse_float(row[4], line, "head_angle")),
            torso_angle=normalize_angle(_parse_float(row[5], line, "torso_angle")),
        )
        if record.person_id < 0 or record.frame < 0:
            raise AnnotationFormatError(
                f"line {line}: person_id and frame must be non-negative"
            )
        try:
            sequence.add(record)
        except AnnotationFormatError as exc:
            raise AnnotationFormatError(f"line {line}: {exc}") from None
    return sequence


def parse_activities(source: io.TextIOBase) -> list[ActivityRecord]:
    """Read activities.csv rows; every flag must be 0 or 1."""
    records: list[ActivityRecord] = []
    seen: set[tuple[int, int]] = set()
    reader = csv.reader(source)
    for line, row in enumerate(reader, start=1):
        if not row:
            continue
        if line == 1:
            _check_header(row, ACTIVITIES_HEADER, "activities")
            continue
        _check_width(row, len(ACTIVITIES_HEADER), line)
        person = _parse_int(row[0], line, "person_id")
        frame = _parse_int(row[1], line, "frame")
        flags = []
        for name, raw in zip(ACTIVITY_NAMES, row[2:]):
            value = _parse_int(raw, line, name)
            if value not in (0, 1):
                raise AnnotationFormatError(
                    f"line {line}, column '{name}': flag must be 0 or 1, got {value}"
                )
            flags.append(value)
        if (person, frame) in seen:
            raise AnnotationFormatError(
                f"line {line}: duplicate activity row for person {person} at frame {frame}"
            )
        seen.add((person, frame))
        records.append(ActivityRecord(person, frame, tuple(flags)))
    records.sort(key=lambda r: (r.frame, r.person_id))
    return records


def parse_groundtruth(source: io.TextIOBase) -> GroupingTimeline:
    """Read groups.csv into a GroupingTimeline, enforcing per-frame disjointness."""
    per_frame: dict[int, list[Group]] = {}
    reader = csv.reader(source)
    for line, row in enumerate(reader, start=1):
        if not row:
            continue
        if line == 1:
            _check_header(row, GROUPS_HEADER, "groups")
            continue
        _check_width(row, len(GROUPS_HEADER), line)
        frame = _parse_int(row[0], line, "frame")
        group_id = _parse_int(row[1], line, "group_id")
        raw_members = [m for m in row[2].split(";") if m.strip() != ""]
        if not raw_members:
            raise AnnotationFormatError(f"line {line}: empty member list")
        members = frozenset(
            _parse_int(m.strip(), line, "member_ids") for m in raw_members
        )
        per_frame.setdefault(frame, []).append(Group(group_id, members))
    timeline = GroupingTimeline()
    for frame, groups in per_frame.items():
        try:
            timeline.set_groups(frame, groups)
        except AnnotationFormatError as exc:
            raise AnnotationFormatError(str(exc)) from None
    return timeline


def write_frames(sequence: FrameSequence, sink: io.TextIOBase):
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(FRAMES_HEADER)
    for row in sequence.rows():
        writer.writerow(
            [
                row.person_id,
                row.frame,
                repr(row.x),
                repr(row.y),
                repr(row.head_angle),
                repr(row.torso_angle),
            ]
        )


def write_activities(records: list[ActivityRecord], sink: io.TextIOBase):
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(ACTIVITIES_HEADER)
    for record in sorted(records, key=lambda r: (r.frame, r.person_id)):
        writer.writerow([record.person_id, record.frame, *record.flags])


def write_groups(timeline: GroupingTimeline, sink: io.TextIOBase):
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(GROUPS_HEADER)
    for frame in timeline.frame_indices():
        for group in sorted(timeline.groups_at(frame), key=lambda g: g.group_id):
            members = ";".join(str(m) for m in sorted(group.members))
            writer.writerow([frame, group.group_id, members])


def read_frames(path, frame_rate: float | None = None) -> FrameSequence:
    with open(path, newline="") as handle:
        try:
            return parse_frames(handle, frame_rate=frame_rate)
        except AnnotationFormatError as exc:
            raise AnnotationFormatError(f"{path}: {exc}") from None


def read_activities(path) -> list[ActivityRecord]:
    with open(path, newline="") as handle:
        try:
            return parse_activities(handle)
        except AnnotationFormatError as exc:
            raise AnnotationFormatError(f"{path}: {exc}") from None


def read_groundtruth(path) -> GroupingTimeline:
    with open(path, newline="") as handle:
        try:
            return parse_groundtruth(handle)
        except AnnotationFormatError as exc:
            raise AnnotationFormatError(f"{path}: {exc}") from None
