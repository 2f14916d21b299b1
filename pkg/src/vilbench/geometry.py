"""2D poses and centerline polylines.

The map is a flat polyline with uniform lane width; all path queries
(projection, lateral distance, arc-length resampling) live here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

from .errors import DegenerateMap, MalformedMap

MIN_POINT_SPACING = 0.01  # meters between consecutive waypoints


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class Pose2D:
    """Position plus heading (CCW from +x), heading kept normalized."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise ValueError(f"non-finite pose ({self.x}, {self.y}, {self.heading})")
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    def moved(self, dx: float, dy: float, dheading: float = 0.0) -> "Pose2D":
        return Pose2D(self.x + dx, self.y + dy, self.heading + dheading)


class WaypointPath:
    """Ordered centerline waypoints, open or closed, with arc-length indexing.

    Closure is implicit: for closed paths the last->first segment exists but
    the first point is not repeated.
    """

    def __init__(self, points: Sequence[tuple[float, float]] | np.ndarray,
                 closed: bool = False, lane_width: float = 3.5):
        xy = np.asarray(points, dtype=float)
        if xy.ndim != 2 or xy.shape[1] != 2:
            raise DegenerateMap(f"expected Nx2 points, got shape {xy.shape}")
        if xy.shape[0] < 2:
            raise DegenerateMap(f"path needs at least 2 points, got {xy.shape[0]}")
        if not np.all(np.isfinite(xy)):
            raise DegenerateMap("non-finite waypoint coordinates")
        if not (lane_width > 0):
            raise DegenerateMap(f"lane_width must be > 0, got {lane_width}")

        seg_vec = np.diff(xy, axis=0)
        if closed:
            seg_vec = np.vstack([seg_vec, xy[0] - xy[-1]])
        seg_len = np.hypot(seg_vec[:, 0], seg_vec[:, 1])
        if np.any(seg_len < MIN_POINT_SPACING):
            raise DegenerateMap("consecutive waypoints closer than 0.01 m")

        self.xy = xy
        self.closed = bool(closed)
        self.lane_width = float(lane_width)
        self._seg_start = xy if closed else xy[:-1]
        self._seg_vec = seg_vec
        self._seg_len = seg_len
        # arc length of each segment start; total includes the closure segment
        self._seg_s0 = np.concatenate([[0.0], np.cumsum(seg_len)[:-1]])
        self.length = float(np.sum(seg_len))

    @property
    def points(self) -> list[Pose2D]:
        """Waypoints as poses, headings set to outgoing segment tangents."""
        headings = np.arctan2(self._seg_vec[:, 1], self._seg_vec[:, 0])
        if not self.closed:
            headings = np.concatenate([headings, headings[-1:]])
        return [Pose2D(x, y, h) for (x, y), h in zip(self.xy, headings)]

    def project(self, x: float, y: float) -> tuple[float, float]:
        """Project a point onto the polyline.

        Returns (arc_length_at_projection, distance_to_path). Projection is
        per-segment with clamping to segment endpoints.
        """
        p = np.array([x, y])
        rel = p - self._seg_start
        denom = self._seg_len ** 2
        t = np.clip((rel[:, 0] * self._seg_vec[:, 0] + rel[:, 1] * self._seg_vec[:, 1]) / denom, 0.0, 1.0)
        foot = self._seg_start + t[:, None] * self._seg_vec
        d2 = np.sum((foot - p) ** 2, axis=1)
        i = int(np.argmin(d2))
        s = self._seg_s0[i] + t[i] * self._seg_len[i]
        return float(s), float(math.sqrt(d2[i]))

    def point_at(self, s: float) -> Pose2D:
        """Pose on the path at arc length s (wraps if closed, clamps if open)."""
        if self.closed:
            s = s % self.length
        else:
            s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._seg_s0, s, side="right")) - 1
        i = min(max(i, 0), len(self._seg_len) - 1)
        t = (s - self._seg_s0[i]) / self._seg_len[i]
        x, y = self._seg_start[i] + t * self._seg_vec[i]
        heading = math.atan2(self._seg_vec[i, 1], self._seg_vec[i, 0])
        return Pose2D(float(x), float(y), heading)

    def resample_ahead(self, s0: float, horizon: float, spacing: float = 1.0) -> list[Pose2D]:
        """Points at s0 + spacing, s0 + 2*spacing, ... up to s0 + horizon."""
        n = int(math.floor(horizon / spacing + 1e-9))
        out = []
        for k in range(1, n + 1):
            s = s0 + k * spacing
            if not self.closed and s > self.length:
                break
            out.append(self.point_at(s))
        return out

    def forward_arc_distance(self, s_from: float, s_to: float) -> float:
        """Arc distance from s_from to s_to going forward along the path."""
        if self.closed:
            return (s_to - s_from) % self.length
        return s_to - s_from


def lateral_error(pose: Pose2D, path: WaypointPath) -> float:
    """Shortest Euclidean distance from a pose's position to the centerline."""
    _, d = path.project(pose.x, pose.y)
    return d


def load_map(source: str | bytes) -> WaypointPath:
    """Parse a map file: {"closed": bool, "lane_width": m, "points": [[x,y],...]}."""
    try:
        doc = json.loads(source)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedMap(f"map is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedMap("map root must be a JSON object")
    missing = {"closed", "lane_width", "points"} - doc.keys()
    if missing:
        raise MalformedMap(f"map missing fields: {sorted(missing)}")
    points = doc["points"]
    if not isinstance(points, list) or not all(
        isinstance(p, list) and len(p) == 2 and all(isinstance(v, (int, float)) for v in p)
        for p in points
    ):
        raise MalformedMap("points must be a list of [x, y] number pairs")
    return WaypointPath(points, closed=bool(doc["closed"]), lane_width=float(doc["lane_width"]))


def oval_points(straight: float = 200.0, radius: float = 30.0, spacing: float = 1.0) -> list[list[float]]:
    """Stadium track: two straights joined by two semicircles, ~`spacing` apart."""
    pts: list[list[float]] = []
    # bottom straight, left to right
    n = int(round(straight / spacing))
    for i in range(n):
        pts.append([i * spacing, 0.0])
    # right semicircle around (straight, radius), from -90 deg to +90 deg
    arc = math.pi * radius
    m = int(round(arc / spacing))
    for i in range(m):
        a = -math.pi / 2 + math.pi * i / m
        pts.append([straight + radius * math.cos(a), radius + radius * math.sin(a)])
    # top straight, right to left
    for i in range(n):
        pts.append([straight - i * spacing, 2 * radius])
    # left semicircle around (0, radius), from +90 deg to +270 deg
    for i in range(m):
        a = math.pi / 2 + math.pi * i / m
        pts.append([radius * math.cos(a), radius + radius * math.sin(a)])
    return pts


def generate_map_doc(name: str) -> dict:
    """Authoring helper: the geometry behind each bundled map file."""
    if name == "straight_1km":
        return {"closed": False, "lane_width": 3.5, "points": [[0.0, 0.0], [1000.0, 0.0]]}
    if name == "oval_588":
        return {"closed": True, "lane_width": 3.5, "points": oval_points()}
    raise MalformedMap(f"unknown bundled map {name!r}")


def builtin_map_json(name: str) -> str:
    """Source text of a bundled map file ("straight_1km", "oval_588")."""
    if name not in ("straight_1km", "oval_588"):
        raise MalformedMap(f"unknown bundled map {name!r}")
    resource = resources.files(__package__).joinpath("maps").joinpath(f"{name}.json")
    return resource.read_text(encoding="utf-8")


def builtin_map(name: str) -> WaypointPath:
    return load_map(builtin_map_json(name))
