"""Room types, the objects they hold, and the co-occurrence table derived from them.

The room/object weights drive both scene generation and the offline vote stub, so
semantic priors in generated scenes are informative by construction.
"""

from __future__ import annotations

import math

ROOM_OBJECTS: dict[str, dict[str, float]] = {
    "kitchen": {"sink": 0.9, "microwave": 0.8, "refrigerator": 0.8, "oven": 0.7,
                "dining_table": 0.2, "chair": 0.3, "plant": 0.2},
    "bathroom": {"toilet": 0.9, "bathtub": 0.7, "sink": 0.6, "towel": 0.6},
    "bedroom": {"bed": 0.9, "wardrobe": 0.7, "nightstand": 0.7, "tv": 0.2,
                "chair": 0.2, "plant": 0.2},
    "living_room": {"sofa": 0.9, "tv": 0.8, "armchair": 0.6, "plant": 0.5,
                    "bookshelf": 0.3, "chair": 0.2},
    "office": {"desk": 0.9, "monitor": 0.8, "bookshelf": 0.6, "chair": 0.6, "plant": 0.3},
    "dining_room": {"dining_table": 0.9, "chair": 0.9, "plant": 0.3},
}

VOCABULARY: tuple[str, ...] = tuple(sorted({o for objs in ROOM_OBJECTS.values() for o in objs}))

# The six HM3D ObjectNav categories (tv_monitor shortened to tv).
HM3D_GOALS: tuple[str, ...] = ("bed", "chair", "plant", "sofa", "toilet", "tv")

# Goals that live almost exclusively in one room type.
STRUCTURED_GOALS: tuple[str, ...] = ("bathtub", "bed", "microwave", "oven", "refrigerator",
                                     "sofa", "toilet")


def cooccurrence_table(room_objects: dict[str, dict[str, float]] = ROOM_OBJECTS,
                       ) -> dict[str, dict[str, float]]:
    """Cosine similarity between the room-type profiles of every object pair."""
    rooms = sorted(room_objects)
    cats = sorted({o for objs in room_objects.values() for o in objs})
    prof = {c: [room_objects[r].get(c, 0.0) for r in rooms] for c in cats}
    norm = {c: math.sqrt(sum(v * v for v in prof[c])) for c in cats}
    table: dict[str, dict[str, float]] = {}
    for a in cats:
        row = {}
        for b in cats:
            dot = sum(x * y for x, y in zip(prof[a], prof[b]))
            row[b] = round(dot / (norm[a] * norm[b]), 6) if norm[a] and norm[b] else 0.0
        table[a] = row
    return table
