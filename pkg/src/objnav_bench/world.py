"""Ground-truth 2D world: procedural floorplans, discrete kinematics, ray-fan sensing."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import _kernels as K
from .config import FORWARD_M, RESOLUTION_M, SUCCESS_RADIUS_M, TURN_DEG, SensorConfig
from .vocab import HM3D_GOALS, ROOM_OBJECTS

SCENE_FORMAT_VERSION = 1


class SceneGenerationError(RuntimeError):
    """Raised when no valid scene could be produced within the retry budget."""


class SceneFormatError(ValueError):
    pass


class Action(str, enum.Enum):
    FORWARD = "forward"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    STOP = "stop"


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading_deg: int = 0

    def __post_init__(self):
        if self.heading_deg % TURN_DEG != 0 or not 0 <= self.heading_deg < 360:
            raise ValueError(f"heading must be a multiple of {TURN_DEG} in [0, 360): {self.heading_deg}")

    @property
    def heading(self) -> float:
        return math.radians(self.heading_deg)

    def cell(self, res: float = RESOLUTION_M) -> tuple[int, int]:
        return int(math.floor(self.y / res)), int(math.floor(self.x / res))

    def as_tuple(self) -> tuple[float, float, int]:
        return (self.x, self.y, self.heading_deg)


@dataclass(frozen=True)
class ObjectInstance:
    category: str
    x: float
    y: float
    footprint_cells: tuple[tuple[int, int], ...]

    def cell(self, res: float = RESOLUTION_M) -> tuple[int, int]:
        return int(math.floor(self.y / res)), int(math.floor(self.x / res))


@dataclass(frozen=True)
class Room:
    kind: str
    r0: int
    c0: int
    r1: int  # exclusive
    c1: int  # exclusive

    def contains(self, r: int, c: int) -> bool:
        return self.r0 <= r < self.r1 and self.c0 <= c < self.c1


@dataclass(frozen=True, eq=False)
class Scene:
    occupied: np.ndarray  # bool, True = wall
    objects: tuple[ObjectInstance, ...]
    start_pose: Pose
    goal_category: str
    id: str = "scene"
    resolution_m: float = RESOLUTION_M
    rooms: tuple[Room, ...] = ()

    def __post_init__(self):
        self.occupied.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.occupied.shape

    def goal_objects(self) -> list[ObjectInstance]:
        return [o for o in self.objects if o.category == self.goal_category]

    def with_start(self, pose: Pose, scene_id: str | None = None) -> "Scene":
        return Scene(self.occupied, self.objects, pose, self.goal_category,
                     scene_id or self.id, self.resolution_m, self.rooms)

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return (np.array_equal(self.occupied, other.occupied) and self.objects == other.objects
                and self.start_pose == other.start_pose and self.goal_category == other.goal_category
                and self.id == other.id and self.resolution_m == other.resolution_m
                and self.rooms == other.rooms)


@dataclass(frozen=True)
class Sighting:
    category: str
    range_m: float
    bearing: float  # radians, relative to heading, counter-clockwise positive
    instance: int


@dataclass(frozen=True, eq=False)
class Observation:
    angles: np.ndarray  # ray angles relative to heading (rad)
    ranges: np.ndarray
    hits: np.ndarray
    visible_objects: tuple[Sighting, ...] = ()

    @property
    def depth(self) -> list[tuple[float, float, bool]]:
        return list(zip(self.angles.tolist(), self.ranges.tolist(), self.hits.tolist()))


# ---------------------------------------------------------------- kinematics

def step(scene: Scene, pose: Pose, action: Action | str) -> Pose:
    """Apply one discrete action; a blocked forward move leaves the pose unchanged."""
    action = Action(action)
    if action is Action.TURN_LEFT:
        return Pose(pose.x, pose.y, (pose.heading_deg + TURN_DEG) % 360)
    if action is Action.TURN_RIGHT:
        return Pose(pose.x, pose.y, (pose.heading_deg - TURN_DEG) % 360)
    if action is Action.STOP:
        return pose
    nx = round(pose.x + FORWARD_M * math.cos(pose.heading), 9)
    ny = round(pose.y + FORWARD_M * math.sin(pose.heading), 9)
    if _segment_blocked(scene, pose.x, pose.y, pose.heading, nx, ny):
        return pose
    return Pose(nx, ny, pose.heading_deg)


def _segment_blocked(scene: Scene, x0, y0, theta, x1, y1) -> bool:
    res = scene.resolution_m
    h, w = scene.shape
    r1, c1 = int(math.floor(y1 / res)), int(math.floor(x1 / res))
    if not (0 <= r1 < h and 0 <= c1 < w) or scene.occupied[r1, c1]:
        return True
    cap = int(2 * FORWARD_M / res) + 8
    rows = np.empty(cap, np.int64)
    cols = np.empty(cap, np.int64)
    t_in = np.empty(cap)
    t_out = np.empty(cap)
    n = K.traverse(x0, y0, theta, res, h, w, FORWARD_M, rows, cols, t_in, t_out)
    return bool(scene.occupied[rows[:n], cols[:n]].any())


# ---------------------------------------------------------------- sensing

def ray_angles(sensor: SensorConfig) -> np.ndarray:
    half = math.radians(sensor.fov_deg) / 2.0
    return np.linspace(-half, half, sensor.n_rays)


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def sense(scene: Scene, pose: Pose, sensor: SensorConfig = SensorConfig()) -> Observation:
    rel = ray_angles(sensor)
    ranges, hits = K.cast_rays(scene.occupied, pose.x, pose.y, rel + pose.heading,
                               sensor.max_range_m, scene.resolution_m)
    half = math.radians(sensor.fov_deg) / 2.0
    pr, pc = pose.cell(scene.resolution_m)
    seen = []
    for i, obj in enumerate(scene.objects):
        dx, dy = obj.x - pose.x, obj.y - pose.y
        rng = math.hypot(dx, dy)
        if rng > sensor.max_range_m:
            continue
        bearing = _wrap(math.atan2(dy, dx) - pose.heading) if rng > 0 else 0.0
        if abs(bearing) > half + 1e-12:
            continue
        orow, ocol = obj.cell(scene.resolution_m)
        if not K.los_clear(scene.occupied, pr, pc, orow, ocol):
            continue
        seen.append(Sighting(obj.category, rng, bearing, i))
    return Observation(rel, ranges, hits, tuple(seen))


def goal_reached(scene: Scene, pose: Pose, obs: Observation,
                 radius: float = SUCCESS_RADIUS_M) -> bool:
    return any(s.category == scene.goal_category and s.range_m <= radius
               for s in obs.visible_objects)


def sighting_position(pose: Pose, s: Sighting) -> tuple[float, float]:
    a = pose.heading + s.bearing
    return pose.x + s.range_m * math.cos(a), pose.y + s.range_m * math.sin(a)


# ---------------------------------------------------------------- validation

def success_region(scene: Scene, radius: float = SUCCESS_RADIUS_M) -> np.ndarray:
    """Free cells within ``radius`` of a goal anchor that have line of sight to it."""
    res = scene.resolution_m
    h, w = scene.shape
    region = np.zeros((h, w), dtype=bool)
    span = int(math.ceil(radius / res)) + 1
    for obj in scene.goal_objects():
        orow, ocol = obj.cell(res)
        for r in range(max(orow - span, 0), min(orow + span + 1, h)):
            for c in range(max(ocol - span, 0), min(ocol + span + 1, w)):
                if scene.occupied[r, c]:
                    continue
                cx, cy = (c + 0.5) * res, (r + 0.5) * res
                if math.hypot(cx - obj.x, cy - obj.y) <= radius + 1e-9 and \
                        K.los_clear(scene.occupied, r, c, orow, ocol):
                    region[r, c] = True
    return region


def validate_scene(scene: Scene) -> None:
    """Check the scene invariants; raises SceneGenerationError on the first violation."""
    res = scene.resolution_m
    h, w = scene.shape
    sr, sc = scene.start_pose.cell(res)
    if not (0 <= sr < h and 0 <= sc < w) or scene.occupied[sr, sc]:
        raise SceneGenerationError("start cell is not free")
    free = ~scene.occupied
    for obj in scene.objects:
        r, c = obj.cell(res)
        if not obj.footprint_cells:
            raise SceneGenerationError(f"{obj.category} has an empty footprint")
        nb = free[max(r - 1, 0):r + 2, max(c - 1, 0):c + 2]
        if not nb.any():
            raise SceneGenerationError(f"{obj.category} anchor is enclosed by walls")
    if not scene.goal_objects():
        raise SceneGenerationError(f"no {scene.goal_category} in scene")
    region = success_region(scene)
    labels, _ = ndimage.label(free, structure=np.ones((3, 3)))
    start_label = labels[sr, sc]
    if not (labels[region] == start_label).any():
        raise SceneGenerationError("goal unreachable from start")


# ---------------------------------------------------------------- generation

@dataclass(frozen=True)
class SceneParams:
    width_m: float = 8.0
    height_m: float = 6.0
    rooms: tuple[int, int] = (3, 5)
    corridor_width_m: float = 1.2
    door_width_m: float = 0.8
    wall_cells: int = 2
    min_room_m: float = 1.6
    objects_per_room: tuple[int, int] = (2, 4)
    room_objects: dict = field(default_factory=lambda: ROOM_OBJECTS)
    goal_categories: tuple[str, ...] = HM3D_GOALS
    object_clearance_m: float = 0.3
    min_start_goal_m: float = 2.0
    extra_door_prob: float = 0.3
    max_retries: int = 25
    resolution_m: float = RESOLUTION_M


def generate_scene(seed: int, params: SceneParams = SceneParams(), scene_id: str | None = None) -> Scene:
    """Deterministic floorplan for ``(seed, params)``: corridor, rooms, objects, start, goal."""
    sid = scene_id if scene_id is not None else f"scene_{seed:05d}"
    errors = []
    for attempt in range(params.max_retries):
        rng = np.random.default_rng([seed, attempt])
        try:
            scene = _generate_once(rng, params, sid)
            validate_scene(scene)
            return scene
        except SceneGenerationError as exc:
            errors.append(str(exc))
    raise SceneGenerationError(f"seed {seed}: no valid scene after {params.max_retries} tries "
                               f"(last: {errors[-1]})")


def _carve_layout(rng: np.random.Generator, p: SceneParams):
    res = p.resolution_m
    h = int(round(p.height_m / res))
    w = int(round(p.width_m / res))
    wc = p.wall_cells
    occ = np.ones((h, w), dtype=bool)
    n_rooms = int(rng.integers(p.rooms[0], p.rooms[1] + 1))
    kinds = list(p.room_objects)
    if n_rooms <= len(kinds):
        room_kinds = [kinds[i] for i in rng.permutation(len(kinds))[:n_rooms]]
    else:
        room_kinds = [kinds[i] for i in rng.integers(0, len(kinds), n_rooms)]

    if n_rooms == 1:
        occ[wc:h - wc, wc:w - wc] = False
        return occ, [Room(room_kinds[0], wc, wc, h - wc, w - wc)]

    cw = int(round(p.corridor_width_m / res))
    min_room = int(round(p.min_room_m / res))
    door = int(round(p.door_width_m / res))
    band = h - 4 * wc - cw  # rows left for the two room bands
    if band < 2 * min_room:
        raise SceneGenerationError("scene too short for corridor layout")
    top_h = int(rng.integers(min_room, band - min_room + 1))
    # rows: wall | top band | wall | corridor | wall | bottom band | wall
    top = (wc, wc + top_h)
    cor = (top[1] + wc, top[1] + wc + cw)
    bot = (cor[1] + wc, h - wc)
    occ[cor[0]:cor[1], wc:w - wc] = False

    n_top = (n_rooms + 1) // 2
    rooms: list[Room] = []
    kind_iter = iter(room_kinds)
    for (r0, r1), count, door_rows in ((top, n_top, (top[1], cor[0])),
                                       (bot, n_rooms - n_top, (cor[1], bot[0]))):
        if count == 0:
            continue
        span = w - 2 * wc - (count - 1) * wc
        if span < count * min_room:
            raise SceneGenerationError("scene too narrow for room count")
        widths = _split(rng, span, count, min_room)
        c = wc
        band_rooms = []
        for width in widths:
            room = Room(next(kind_iter), r0, c, r1, c + width)
            occ[r0:r1, c:c + width] = False
            lo, hi = c + 1, c + width - door - 1
            dc = int(rng.integers(lo, hi + 1))
            occ[door_rows[0]:door_rows[1], dc:dc + door] = False
            band_rooms.append(room)
            c += width + wc
        for a, b in zip(band_rooms, band_rooms[1:]):
            if rng.random() < p.extra_door_prob and (r1 - r0) > door + 2:
                dr = int(rng.integers(r0 + 1, r1 - door))
                occ[dr:dr + door, a.c1:b.c0] = False
        rooms.extend(band_rooms)
    rooms.append(Room("corridor", cor[0], wc, cor[1], w - wc))
    return occ, rooms


def _split(rng: np.random.Generator, total: int, count: int, minimum: int) -> list[int]:
    slack = total - count * minimum
    cuts = np.sort(rng.integers(0, slack + 1, count - 1))
    parts = np.diff(np.concatenate([[0], cuts, [slack]]))
    return [int(minimum + x) for x in parts]


def _footprint(r: int, c: int, occ: np.ndarray) -> tuple[tuple[int, int], ...]:
    h, w = occ.shape
    return tuple((rr, cc) for rr in range(r - 1, r + 2) for cc in range(c - 1, c + 2)
                 if 0 <= rr < h and 0 <= cc < w and not occ[rr, cc])


def _clearance(occ: np.ndarray, res: float) -> np.ndarray:
    return ndimage.distance_transform_edt(~occ) * res


def _generate_once(rng: np.random.Generator, p: SceneParams, sid: str) -> Scene:
    res = p.resolution_m
    occ, rooms = _carve_layout(rng, p)
    clear = _clearance(occ, res)
    objects: list[ObjectInstance] = []
    object_room: list[int] = []
    for ri, room in enumerate(rooms):
        weights = p.room_objects.get(room.kind)
        if not weights:
            continue
        cats = sorted(weights)
        probs = np.array([weights[c] for c in cats], dtype=float)
        n = min(int(rng.integers(p.objects_per_room[0], p.objects_per_room[1] + 1)), len(cats))
        chosen = rng.choice(len(cats), size=n, replace=False, p=probs / probs.sum())
        sub = clear[room.r0:room.r1, room.c0:room.c1]
        cand = np.argwhere(sub >= p.object_clearance_m) + (room.r0, room.c0)
        for ci in chosen:
            if len(cand) == 0:
                break
            for _ in range(30):
                r, c = cand[int(rng.integers(len(cand)))]
                x, y = (c + 0.5) * res, (r + 0.5) * res
                if all(math.hypot(x - o.x, y - o.y) >= 0.4 for o in objects):
                    objects.append(ObjectInstance(cats[ci], round(x, 9), round(y, 9),
                                                  _footprint(int(r), int(c), occ)))
                    object_room.append(ri)
                    break

    present = sorted({o.category for o in objects} & set(p.goal_categories))
    if not present:
        raise SceneGenerationError("no goal category placed")
    goal = present[int(rng.integers(len(present)))]
    goal_idx = [i for i, o in enumerate(objects) if o.category == goal]
    keep = goal_idx[int(rng.integers(len(goal_idx)))]
    objects = [o for i, o in enumerate(objects) if o.category != goal or i == keep]

    scene = Scene(occ, tuple(objects), Pose(0.0, 0.0, 0), goal, sid, res, tuple(rooms))
    start = sample_start(scene, rng, p.min_start_goal_m)
    if start is None:
        raise SceneGenerationError("no admissible start pose")
    return scene.with_start(start)


def sample_start(scene: Scene, rng: np.random.Generator, min_goal_dist_m: float = 2.0,
                 min_clearance_m: float = 0.15) -> Pose | None:
    """Random free start with wall clearance, outside the goal's room, reachable to the goal."""
    res = scene.resolution_m
    clear = _clearance(scene.occupied, res)
    goals = scene.goal_objects()
    ok = clear >= min_clearance_m
    rows, cols = np.nonzero(ok)
    xs, ys = (cols + 0.5) * res, (rows + 0.5) * res
    far = np.ones(len(rows), dtype=bool)
    for g in goals:
        far &= np.hypot(xs - g.x, ys - g.y) >= min_goal_dist_m
        for room in scene.rooms:
            gr, gc = g.cell(res)
            if room.kind != "corridor" and room.contains(gr, gc) and len(scene.rooms) > 1:
                inside = (rows >= room.r0) & (rows < room.r1) & (cols >= room.c0) & (cols < room.c1)
                far &= ~inside
    region = success_region(scene)
    labels, _ = ndimage.label(~scene.occupied, structure=np.ones((3, 3)))
    good_labels = set(np.unique(labels[region]).tolist()) - {0}
    reach = np.isin(labels[rows, cols], list(good_labels))
    idx = np.nonzero(far & reach)[0]
    if len(idx) == 0:
        return None
    k = int(idx[int(rng.integers(len(idx)))])
    heading = int(rng.integers(0, 360 // TURN_DEG)) * TURN_DEG
    return Pose(round(float(xs[k]), 9), round(float(ys[k]), 9), heading)


def episode_scene(scene: Scene, episode_seed: int, episode_index: int,
                  min_goal_dist_m: float = 2.0) -> Scene:
    """Episode 0 keeps the stored start; later episodes draw a fresh start from ``episode_seed``."""
    eid = f"{scene.id}/ep{episode_index}"
    if episode_index == 0:
        return scene.with_start(scene.start_pose, eid)
    pose = sample_start(scene, np.random.default_rng(episode_seed), min_goal_dist_m)
    if pose is None:
        raise SceneGenerationError(f"{eid}: no admissible start pose")
    return scene.with_start(pose, eid)


# ---------------------------------------------------------------- scene files

def _rle_row(row: np.ndarray) -> list[list[int]]:
    runs: list[list[int]] = []
    for v in row.astype(int).tolist():
        if runs and runs[-1][0] == v:
            runs[-1][1] += 1
        else:
            runs.append([v, 1])
    return runs


def scene_to_dict(scene: Scene) -> dict:
    return {
        "version": SCENE_FORMAT_VERSION,
        "id": scene.id,
        "resolution_m": scene.resolution_m,
        "shape": list(scene.shape),
        "grid": [_rle_row(r) for r in scene.occupied],
        "objects": [{"category": o.category, "x": o.x, "y": o.y} for o in scene.objects],
        "start": {"x": scene.start_pose.x, "y": scene.start_pose.y,
                  "heading_deg": scene.start_pose.heading_deg},
        "goal_category": scene.goal_category,
        "rooms": [[r.kind, r.r0, r.c0, r.r1, r.c1] for r in scene.rooms],
    }


def scene_from_dict(data: dict) -> Scene:
    version = data.get("version")
    if version != SCENE_FORMAT_VERSION:
        raise SceneFormatError(f"unsupported scene format version {version!r}")
    rows = []
    for runs in data["grid"]:
        row: list[int] = []
        for v, n in runs:
            if v not in (0, 1) or n <= 0:
                raise SceneFormatError("bad run in grid")
            row.extend([v] * n)
        rows.append(row)
    if len({len(r) for r in rows}) != 1:
        raise SceneFormatError("ragged grid rows")
    occ = np.array(rows, dtype=bool)
    res = float(data["resolution_m"])
    objects = []
    for o in data["objects"]:
        r, c = int(math.floor(o["y"] / res)), int(math.floor(o["x"] / res))
        objects.append(ObjectInstance(o["category"], float(o["x"]), float(o["y"]),
                                      _footprint(r, c, occ)))
    s = data["start"]
    rooms = tuple(Room(k, r0, c0, r1, c1) for k, r0, c0, r1, c1 in data.get("rooms", []))
    return Scene(occ, tuple(objects), Pose(float(s["x"]), float(s["y"]), int(s["heading_deg"])),
                 data["goal_category"], data.get("id", "scene"), res, rooms)


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), separators=(",", ":")) + "\n")


def load_scene(path: str | Path) -> Scene:
    return scene_from_dict(json.loads(Path(path).read_text()))


def load_scene_dir(directory: str | Path) -> list[Scene]:
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise FileNotFoundError(f"no scene files in {directory}")
    return [load_scene(p) for p in paths]
