"""Circular statistics and the time-weighted center-of-attention computation.

A person's focus of attention is estimated at a social-interaction distance
``d`` along an orientation angle.  The orientation fuses the head and torso
angles: each stream is smoothed with a circular mean over a short time
window, and the two smoothed streams are combined with weights given by how
often the head diverges from the torso (a "torsion") within that window.
Sustained torsions shift the estimate toward the head; transient flicks and
annotation glitches are averaged away.
"""

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Resultant vectors shorter than this leave the mean direction undefined.
RESULTANT_EPS = 1e-9


class UndefinedAngleError(ValueError):
    """Raised when a circular mean has no defined direction."""


def normalize_angle(angle: float) -> float:
    """Map an angle in radians onto [0, 2*pi)."""
    a = math.fmod(angle, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    if a >= TWO_PI:  # fmod rounding can land exactly on 2*pi
        a = 0.0
    return a


def circular_mean(angles) -> float:
    """Mean direction of a set of angles (radians), in [0, 2*pi).

    Computed from the mean sine and cosine so that values wrapping around
    0/2*pi average correctly.

    Raises:
        UndefinedAngleError: empty input, or the resultant vector is too
            short to define a direction (e.g. two antipodal angles).
    """
    arr = np.asarray(angles, dtype=float)
    if arr.size == 0:
        raise UndefinedAngleError("circular mean of an empty set of angles")
    s = float(np.mean(np.sin(arr)))
    c = float(np.mean(np.cos(arr)))
    if math.hypot(s, c) < RESULTANT_EPS:
        raise UndefinedAngleError(
            "undefined circular mean: resultant vector is (near) zero"
        )
    return normalize_angle(math.atan2(s, c))


def angular_difference(a: float, b: float) -> float:
    """Absolute angular separation between two directions, in [0, pi]."""
    d = math.fmod(abs(a - b), TWO_PI)
    return min(d, TWO_PI - d)


@dataclass(frozen=True)
class AttentionParams:
    """Parameters of the attention estimate.

    distance: social-interaction distance in pixels (empirical, scene
        dependent).
    window: smoothing window length in frames.
    torsion_threshold: head/torso divergence (radians) beyond which a frame
        counts as a torsion.
    """

    distance: float = 100.0
    window: int = 5
    torsion_threshold: float = math.pi / 4

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("distance must be positive")
        if self.window < 1:
            raise ValueError("window must be at least 1 frame")
        if not 0.0 < self.torsion_threshold <= math.pi:
            raise ValueError("torsion_threshold must be in (0, pi]")


@dataclass
class AngleTrack:
    """One person's angle stream over a contiguous run of frames.

    kind is "head" or "torso".  angles[i] is the angle at frame
    start_frame + i, already normalized to [0, 2*pi).
    """

    person_id: int
    start_frame: int
    angles: np.ndarray
    kind: str

    @property
    def end_frame(self) -> int:
        return self.start_frame + len(self.angles) - 1

    def covers(self, frame: int) -> bool:
        return self.start_frame <= frame <= self.end_frame

    def angle_at(self, frame: int) -> float:
        if not self.covers(frame):
            raise ValueError(
                f"person {self.person_id} has no {self.kind} angle at frame {frame}"
            )
        return float(self.angles[frame - self.start_frame])


@dataclass(frozen=True)
class AttentionPoint:
    """Estimated focus of attention of one person at one frame."""

    person_id: int
    frame: int
    point: tuple[float, float]
    theta: float


def smoothed_angle(track: AngleTrack, frame: int, window: int) -> float:
    """Circular mean of a track over the frames [frame - window + 1, frame].

    The window is truncated at the start of the track, so the first frames
    of a track are smoothed over whatever history exists.
    """
    if not track.covers(frame):
        raise ValueError(
            f"person {track.person_id} absent at frame {frame}"
        )
    lo = max(track.start_frame, frame - window + 1)
    return circular_mean(track.angles[lo - track.start_frame : frame - track.start_frame + 1])


def time_weighted_angle(
    head: AngleTrack, torso: AngleTrack, frame: int, params: AttentionParams
) -> float:
    """Fused head/torso orientation at a frame, in [0, 2*pi).

    At each frame k of the window the smoothed head and torso angles are
    compared; the fraction of window frames whose divergence exceeds the
    torsion threshold becomes the head weight, the remainder the torso
    weight.  The result is the weighted circular mean of the two smoothed
    angles at the target frame.  Saturated weights (0 or 1) return the
    corresponding smoothed single-stream angle exactly.
    """
    n = params.window
    lo = max(head.start_frame, torso.start_frame, frame - n + 1)
    if not (head.covers(frame) and torso.covers(frame) and torso.covers(lo)):
        raise ValueError(
            f"person {head.person_id} lacks head/torso angles on the window ending at {frame}"
        )
    window_frames = range(lo, frame + 1)
    torsions = sum(
        1
        for k in window_frames
        if angular_difference(smoothed_angle(head, k, n), smoothed_angle(torso, k, n))
        > params.torsion_threshold
    )
    w_head = torsions / len(window_frames)

    if w_head == 1.0:
        return smoothed_angle(head, frame, n)
    if w_head == 0.0:
        return smoothed_angle(torso, frame, n)

    phi = smoothed_angle(head, frame, n)
    psi = smoothed_angle(torso, frame, n)
    w_torso = 1.0 - w_head
    s = w_head * math.sin(phi) + w_torso * math.sin(psi)
    c = w_head * math.cos(phi) + w_torso * math.cos(psi)
    if math.hypot(s, c) < RESULTANT_EPS:
        raise UndefinedAngleError(
            "undefined weighted angle: head and torso estimates cancel"
        )
    return normalize_angle(math.atan2(s, c))


def center_of_attention(
    position: tuple[float, float], theta: float, distance: float
) -> tuple[float, float]:
    """Point at `distance` pixels from `position` along direction `theta`."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    x, y = position
    return (x + distance * math.cos(theta), y + distance * math.sin(theta))


def build_angle_tracks(sequence, kind: str) -> dict[int, list[AngleTrack]]:
    """Split a frame sequence into per-person contiguous angle tracks.

    A person who leaves and re-enters the scene gets one track per
    contiguous presence run; smoothing never bridges an absence.
    """
    if kind not in ("head", "torso"):
        raise ValueError(f"unknown angle kind: {kind!r}")
    spans: dict[int, list[AngleTrack]] = {}
    current: dict[int, list[float]] = {}
    starts: dict[int, int] = {}

    def _flush(person: int):
        angles = current.pop(person)
        spans.setdefault(person, []).append(
            AngleTrack(person, starts.pop(person), np.asarray(angles, dtype=float), kind)
        )

    for frame in sequence.frame_indices():
        present = sequence.participants_at(frame)
        for person in list(current):
            if person not in present or starts[person] + len(current[person]) != frame:
                _flush(person)
        for person, row in present.items():
            angle = row.head_angle if kind == "head" else row.torso_angle
            if person in current:
                current[person].append(angle)
            else:
                current[person] = [angle]
                starts[person] = frame
    for person in list(current):
        _flush(person)
    return spans


def _track_covering(tracks: list[AngleTrack], frame: int) -> AngleTrack:
    for track in tracks:
        if track.covers(frame):
            return track
    raise ValueError(f"no track covers frame {frame}")


def compute_attention_points(
    sequence, params: AttentionParams
) -> dict[int, list[AttentionPoint]]:
    """Attention point of every present person at every frame.

    Returns a mapping frame -> points, each point carrying the fused
    orientation theta and the projected (x, y) location.
    """
    head_tracks = build_angle_tracks(sequence, "head")
    torso_tracks = build_angle_tracks(sequence, "torso")
    by_frame: dict[int, list[AttentionPoint]] = {}
    for frame in sequence.frame_indices():
        points = []
        for person, row in sorted(sequence.participants_at(frame).items()):
            head = _track_covering(head_tracks[person], frame)
            torso = _track_covering(torso_tracks[person], frame)
            theta = time_weighted_angle(head, torso, frame, params)
            point = center_of_attention((row.x, row.y), theta, params.distance)
            points.append(AttentionPoint(person, frame, point, theta))
        by_frame[frame] = points
    return by_frame
