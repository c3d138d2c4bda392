"""BlockWorld: verify a spatial statement about three coloured shapes.

Coordinates are image (row, column). A relation holds between two objects
when their bounding-box centres are strictly ordered along the matching
axis: "above" means a smaller row, "right" a larger column.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from beliefnet.factory import ModelGeometry
from beliefnet.outputs import STATEMENT_DIM, Conditioning
from worlds.base import Environment, Example, QuestionSpace
from worlds.errors import PlacementError
from worlds.pixels import observe_pixels

logger = logging.getLogger(__name__)

SHAPES = ("triangle", "square", "cross", "diamond")
COLORS = ("green", "blue", "yellow", "red")
RELATIONS = ("above", "below", "right", "left")
OPPOSITE = {"above": "below", "below": "above", "right": "left", "left": "right"}
RGB = {
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0),
    "red": (1.0, 0.0, 0.0),
}
OBJECT_COUNT = 3
STATEMENT_MARGIN = 2
MAX_PLACEMENT_TRIES = 200
MAX_RESTARTS = 50


def shape_mask(shape: str, size: int) -> np.ndarray:
    """Filled size×size mask whose bounding box is the full square."""
    centre = size / 2.0
    r = np.arange(size)[:, None] + 0.5
    c = np.arange(size)[None, :] + 0.5
    if shape == "square":
        return np.ones((size, size), dtype=bool)
    if shape == "triangle":
        return np.abs(c - centre) <= (r + 0.5) / 2.0
    if shape == "diamond":
        return np.abs(r - centre) + np.abs(c - centre) <= centre
    if shape == "cross":
        arm = max(2, size // 3)
        lo = (size - arm) // 2
        band_r = (r - 0.5 >= lo) & (r - 0.5 < lo + arm)
        band_c = (c - 0.5 >= lo) & (c - 0.5 < lo + arm)
        return band_r | band_c
    raise ValueError(f"unknown shape '{shape}'")


@dataclass(frozen=True)
class SceneObject:
    shape: str
    color: str
    size: int
    row: int
    col: int

    @property
    def centre(self) -> tuple[float, float]:
        return self.row + (self.size - 1) / 2.0, self.col + (self.size - 1) / 2.0

    def intersects(self, other: "SceneObject") -> bool:
        return (
            self.row < other.row + other.size and other.row < self.row + self.size
            and self.col < other.col + other.size and other.col < self.col + self.size
        )

    def as_dict(self) -> dict:
        return {"shape": self.shape, "color": self.color, "size": self.size, "row": self.row, "col": self.col}


@dataclass(frozen=True)
class BlockWorldScene:
    canvas: int
    objects: tuple[SceneObject, ...]

    def find(self, shape: str, color: str) -> Optional[SceneObject]:
        for obj in self.objects:
            if obj.shape == shape and obj.color == color:
                return obj
        return None

    def render(self) -> np.ndarray:
        """(3, canvas, canvas) RGB image at full saturation, no anti-aliasing."""
        image = np.zeros((3, self.canvas, self.canvas))
        for obj in self.objects:
            mask = shape_mask(obj.shape, obj.size)
            region = image[:, obj.row:obj.row + obj.size, obj.col:obj.col + obj.size]
            for ch, value in enumerate(RGB[obj.color]):
                region[ch][mask] = value
        return image


@dataclass(frozen=True)
class Statement:
    s1: tuple[str, str]
    relation: str
    s2: tuple[str, str]

    def describe(self) -> str:
        return f"{self.s1[1]} {self.s1[0]} {self.relation} {self.s2[1]} {self.s2[0]}"


def render_scene(scene: BlockWorldScene) -> np.ndarray:
    return scene.render()


def gen_blockworld(rng: np.random.Generator, canvas: int = 64, sizes: tuple[int, ...] = (12, 16)) -> BlockWorldScene:
    """Three objects with distinct (shape, colour) and disjoint bounding boxes."""
    for restart in range(MAX_RESTARTS):
        kinds = rng.choice(len(SHAPES) * len(COLORS), size=OBJECT_COUNT, replace=False)
        objects: list[SceneObject] = []
        for kind in kinds:
            shape, color = SHAPES[kind // len(COLORS)], COLORS[kind % len(COLORS)]
            size = int(sizes[int(rng.integers(0, len(sizes)))])
            for _ in range(MAX_PLACEMENT_TRIES):
                candidate = SceneObject(
                    shape, color, size,
                    int(rng.integers(0, canvas - size + 1)), int(rng.integers(0, canvas - size + 1)),
                )
                if not any(candidate.intersects(o) for o in objects):
                    objects.append(candidate)
                    break
            else:
                break
        if len(objects) == OBJECT_COUNT:
            return BlockWorldScene(canvas, tuple(objects))
        logger.debug("blockworld placement failed; restart %d", restart + 1)
    raise PlacementError(
        f"could not place {OBJECT_COUNT} disjoint objects of sizes {sizes} on a {canvas}px canvas "
        f"after {MAX_RESTARTS} restarts"
    )


def relation_holds(a: SceneObject, b: SceneObject, relation: str, margin: float = 0.0) -> bool:
    (ar, ac), (br, bc) = a.centre, b.centre
    if relation == "above":
        return br - ar > margin
    if relation == "below":
        return ar - br > margin
    if relation == "right":
        return ac - bc > margin
    if relation == "left":
        return bc - ac > margin
    raise ValueError(f"unknown relation '{relation}'")


def eval_statement(scene: BlockWorldScene, statement: Statement) -> bool:
    a = scene.find(*statement.s1)
    b = scene.find(*statement.s2)
    if a is None or b is None or a is b:
        return False
    return relation_holds(a, b, statement.relation)


def corrupt_statement(statement: Statement, scene: BlockWorldScene, rng: np.random.Generator) -> Statement:
    """Mutate the relation or one property of s1/s2 until the statement is false."""
    targets = ("relation", "s1.shape", "s1.color", "s2.shape", "s2.color")
    while True:
        target = targets[int(rng.integers(0, len(targets)))]
        if target == "relation":
            options = [r for r in RELATIONS if r != statement.relation]
            mutated = Statement(statement.s1, options[int(rng.integers(0, len(options)))], statement.s2)
        else:
            slot, prop = target.split(".")
            shape, color = getattr(statement, slot)
            if prop == "shape":
                options = [s for s in SHAPES if s != shape]
                desc = (options[int(rng.integers(0, len(options)))], color)
            else:
                options = [c for c in COLORS if c != color]
                desc = (shape, options[int(rng.integers(0, len(options)))])
            mutated = Statement(desc, statement.relation, statement.s2) if slot == "s1" \
                else Statement(statement.s1, statement.relation, desc)
        if not eval_statement(scene, mutated):
            return mutated


def sample_statement(scene: BlockWorldScene, rng: np.random.Generator, margin: float = STATEMENT_MARGIN) -> tuple[Statement, bool]:
    """A true statement (centres at least ``margin`` apart) or, with
    probability 1/2, a corrupted false one."""
    candidates = [
        (a, rel, b)
        for a in scene.objects for b in scene.objects if a is not b
        for rel in RELATIONS if relation_holds(a, b, rel, margin)
    ]
    a, rel, b = candidates[int(rng.integers(0, len(candidates)))]
    statement = Statement((a.shape, a.color), rel, (b.shape, b.color))
    if rng.random() < 0.5:
        return statement, True
    return corrupt_statement(statement, scene, rng), False


def encode_statement(statement: Statement) -> np.ndarray:
    """Multi-hot [s1 shape | s1 colour | s2 shape | s2 colour | relation], 4 slots each."""
    vec = np.zeros(STATEMENT_DIM)
    vec[SHAPES.index(statement.s1[0])] = 1.0
    vec[4 + COLORS.index(statement.s1[1])] = 1.0
    vec[8 + SHAPES.index(statement.s2[0])] = 1.0
    vec[12 + COLORS.index(statement.s2[1])] = 1.0
    vec[16 + RELATIONS.index(statement.relation)] = 1.0
    return vec


def scene_record(scene: BlockWorldScene, statement: Statement, truth: bool) -> dict:
    return {
        "canvas": scene.canvas,
        "objects": [o.as_dict() for o in scene.objects],
        "statement": {"s1": list(statement.s1), "relation": statement.relation, "s2": list(statement.s2)},
        "truth": bool(truth),
        "relation_convention": "bbox-centre, row/col, strict",
    }


class BlockWorldEnv(Environment):
    """Label 1 when the statement holds in the scene, 0 otherwise."""

    name = "blockworld"
    reward_kind = "label"
    x_model = "bernoulli"
    label_count = 2

    def __init__(self, canvas: int = 64, sizes: tuple[int, ...] = (12, 16), block_size: int = 4):
        if canvas % block_size:
            raise ValueError(f"block size {block_size} does not divide canvas {canvas}")
        self.canvas = canvas
        self.sizes = tuple(sizes)
        self.block_size = block_size
        blocks = (canvas // block_size) ** 2
        self.space = QuestionSpace(blocks, 3 * block_size * block_size, (3, canvas, canvas), block_size)

    @property
    def x_shape(self) -> tuple[int, ...]:
        return (3, self.canvas, self.canvas)

    def sample(self, rng: np.random.Generator) -> Example:
        scene = gen_blockworld(rng, self.canvas, self.sizes)
        statement, truth = sample_statement(scene, rng)
        return Example(
            x=scene.render(),
            y=int(truth),
            meta={"scene": scene, "statement": statement, "record": scene_record(scene, statement, truth)},
        )

    def observe(self, x: np.ndarray, question: int) -> np.ndarray:
        return observe_pixels(x, question, self.block_size)

    def conditioning(self, example: Example) -> Optional[Conditioning]:
        return Conditioning(statement=encode_statement(example.meta["statement"]))

    def geometry(self) -> ModelGeometry:
        return replace(super().geometry(), statement_dim=STATEMENT_DIM)
