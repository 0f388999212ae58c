"""Dyad engagement measures: distance, reciprocal angle, and a rule score.

The engagement score tracks how long a subject has been inside (or outside)
a formation.  One frame in scores 0.5, two score 0.8, three or more score
1.0; one frame out scores 0.5, two score 0.2, longer breaks score 0.0.  A
break of at most two frames followed by a return to the same formation
resumes the interrupted run instead of starting over, so brief annotation
dropouts do not reset a long-standing engagement.

Subjects are either a single person (their membership in any group, with an
optional identity check on the group's member set) or a dyad (the two
persons sharing a group, identity checks not applicable).
"""

import math
from dataclasses import dataclass

from .annotation_io import FrameSequence, GroupingTimeline
from .attention import (
    AttentionParams,
    angular_difference,
    build_angle_tracks,
    time_weighted_angle,
)

# Breaks longer than this many frames end a run for good.
RESUME_LIMIT = 2


def interpersonal_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Euclidean distance between two positions."""
    return math.hypot(b[0] - a[0], b[1] - a[1])


def reciprocal_angle(
    position_a: tuple[float, float],
    theta_a: float,
    position_b: tuple[float, float],
    theta_b: float,
) -> float:
    """How far two orientations are from facing each other, in [0, 2*pi].

    For each person, the deviation between their orientation and the
    direction toward the other is measured; the two deviations add up.  Zero
    means perfectly face-to-face, 2*pi means both face exactly away.
    """
    if position_a == position_b:
        raise ValueError("reciprocal angle undefined for coincident positions")
    to_b = math.atan2(position_b[1] - position_a[1], position_b[0] - position_a[0])
    to_a = math.atan2(position_a[1] - position_b[1], position_a[0] - position_b[0])
    return angular_difference(theta_a, to_b) + angular_difference(theta_b, to_a)


@dataclass
class EngagementTrace:
    """Per-frame engagement scores for one subject."""

    subject: object
    frames: list[int]
    scores: list[float]


def _score_in(run: int) -> float:
    return 1.0 if run > 2 else (0.8 if run == 2 else 0.5)


def _score_out(run: int) -> float:
    return 0.0 if run > 2 else (0.2 if run == 2 else 0.5)


def _same_members(a: frozenset, b: frozenset, jaccard: float | None) -> bool:
    if jaccard is None:
        return a == b
    union = len(a | b)
    if union == 0:
        return True
    return len(a & b) / union >= jaccard


def engagement_scores(
    timeline: GroupingTimeline,
    subject,
    *,
    frames: list[int] | None = None,
    identity_jaccard: float | None = None,
) -> EngagementTrace:
    """Rule-based engagement score of a subject over time.

    subject: a person id, scored on membership in any group, or a (i, j)
        tuple, scored on the two persons sharing a group.
    frames: frames at which the subject is present and a score is wanted;
        defaults to every frame of the timeline.  Gaps inside the given
        frames count against run lengths exactly like frames outside a
        formation, but produce no score entries.
    identity_jaccard: for person subjects, treat two formations as the same
        when the Jaccard overlap of their member sets reaches this value;
        None requires identical member sets.  After a membership change that
        fails the check, the run restarts.  Dyad subjects ignore this: any
        shared group continues the dyad's engagement.

    An empty `frames` list yields an empty trace.
    """
    if isinstance(subject, tuple):
        person_i, person_j = subject
        if person_i == person_j:
            raise ValueError("a dyad needs two distinct persons")

        def observe(frame):
            group = timeline.group_of(person_i, frame)
            if group is not None and person_j in group.members:
                return group.members
            return None

        check_identity = False
    else:
        def observe(frame):
            group = timeline.group_of(subject, frame)
            return None if group is None else group.members

        check_identity = True

    if frames is None:
        frames = timeline.frame_indices()
    frames = sorted(frames)
    wanted = set(frames)
    trace_frames: list[int] = []
    scores: list[float] = []

    in_run = 0
    out_run = 0
    pending = 0  # run length suspended at the start of the current break
    pending_members: frozenset | None = None
    prev_members: frozenset | None = None

    span = range(frames[0], frames[-1] + 1) if frames else range(0)
    for frame in span:
        members = observe(frame) if frame in wanted else None
        if members is not None:
            if out_run == 0:
                if (
                    check_identity
                    and prev_members is not None
                    and not _same_members(prev_members, members, identity_jaccard)
                ):
                    in_run = 1  # switched formations without a gap
                else:
                    in_run += 1
            else:
                resumable = (
                    out_run <= RESUME_LIMIT
                    and pending > 0
                    and (
                        not check_identity
                        or _same_members(pending_members, members, identity_jaccard)
                    )
                )
                in_run = pending + 1 if resumable else 1
                out_run = 0
            prev_members = frozenset(members)
            score = _score_in(in_run)
        else:
            out_run += 1
            if out_run == 1:
                pending = in_run
                pending_members = prev_members
                in_run = 0
            if out_run > RESUME_LIMIT:
                pending = 0
                pending_members = None
            prev_members = None
            score = _score_out(out_run)
        if frame in wanted:
            trace_frames.append(frame)
            scores.append(score)
    return EngagementTrace(subject, trace_frames, scores)


@dataclass
class DyadRow:
    """One frame of the dyad report."""

    frame: int
    distance: float
    reciprocal: float
    engagement: float


def dyad_report(
    sequence: FrameSequence,
    timeline: GroupingTimeline,
    dyad: tuple[int, int],
    params: AttentionParams | None = None,
    *,
    use_torso: bool = False,
) -> list[DyadRow]:
    """Distance, reciprocal angle, and engagement for a dyad, frame by frame.

    Rows cover exactly the frames where both persons appear in the
    sequence.  Orientations come from the fused head/torso estimate unless
    `use_torso` asks for the raw torso angle.
    """
    person_i, person_j = dyad
    if person_i == person_j:
        raise ValueError("a dyad needs two distinct persons")
    params = params or AttentionParams()
    head_tracks = build_angle_tracks(sequence, "head")
    torso_tracks = build_angle_tracks(sequence, "torso")

    def fused_theta(person: int, frame: int) -> float:
        torso = _covering(torso_tracks.get(person, []), frame)
        if use_torso:
            return torso.angle_at(frame)
        head = _covering(head_tracks.get(person, []), frame)
        return time_weighted_angle(head, torso, frame, params)

    common = [
        frame
        for frame in sequence.frame_indices()
        if person_i in sequence.participants_at(frame)
        and person_j in sequence.participants_at(frame)
    ]
    if not common:
        return []
    trace = engagement_scores(timeline, (person_i, person_j), frames=common)
    engagement_at = dict(zip(trace.frames, trace.scores))
    rows = []
    for frame in common:
        row_i = sequence.participants_at(frame)[person_i]
        row_j = sequence.participants_at(frame)[person_j]
        rows.append(
            DyadRow(
                frame=frame,
                distance=interpersonal_distance(row_i.position, row_j.position),
                reciprocal=reciprocal_angle(
                    row_i.position,
                    fused_theta(person_i, frame),
                    row_j.position,
                    fused_theta(person_j, frame),
                ),
                engagement=engagement_at[frame],
            )
        )
    return rows


def _covering(tracks, frame):
    for track in tracks:
        if track.covers(frame):
            return track
    raise ValueError(f"no angle track covers frame {frame}")
