"""Blocks World: four colored blocks, a gripper, and the classical
pickup/putdown/stack/unstack transitions.

World state is plain RDF under the bw: vocabulary. `bw:clear` is kept
materialized as an xsd:boolean on every block, and the gripper always
carries exactly one `bw:holding` triple — `bw:nothing` when empty — so a
full world snapshot can replace stale beliefs by (subject, predicate)
without tombstones.
"""

from __future__ import annotations

from typing import Optional

from sbtforge.rdf.terms import (
    RDF_TYPE,
    RDFS_LABEL,
    Graph,
    Term,
    Triple,
    boolean,
    iri,
    literal,
)

BW = "http://sbtforge.org/bw#"

BLOCK = iri(BW + "Block")
ON = iri(BW + "on")
ON_TABLE = iri(BW + "onTable")
CLEAR = iri(BW + "clear")
COLOR = iri(BW + "color")
HOLDING = iri(BW + "holding")
GRIPPER = iri(BW + "gripper")
NOTHING = iri(BW + "nothing")

COLORS = ("blue", "purple", "orange", "red")


def block_uri(color: str) -> Term:
    return iri(BW + color + "Block")


class BlocksWorldError(ValueError):
    """Violated action precondition; the world stays untouched."""


def build_scene(
    on_pairs: Optional[dict[str, str]] = None, holding: Optional[str] = None
) -> Graph:
    """World with the four blocks; `on_pairs` maps color → color it sits on,
    everything else rests on the table. `holding` names a gripped block."""
    on_pairs = dict(on_pairs or {})
    g = Graph()
    g.bind("bw", BW)
    for color in COLORS:
        b = block_uri(color)
        g.add(b, RDF_TYPE, BLOCK)
        g.add(b, RDFS_LABEL, literal(f"{color} block"))
        g.add(b, COLOR, literal(color))
        if color == holding:
            pass  # held: neither on a block nor on the table
        elif color in on_pairs:
            g.add(b, ON, block_uri(on_pairs[color]))
        else:
            g.add(b, ON_TABLE, boolean(True))
    g.add(GRIPPER, HOLDING, block_uri(holding) if holding else NOTHING)
    # property labels give the linker something to match relations against
    g.add(ON, RDFS_LABEL, literal("on"))
    g.add(CLEAR, RDFS_LABEL, literal("clear"))
    g.add(ON_TABLE, RDFS_LABEL, literal("on table"))
    g.add(HOLDING, RDFS_LABEL, literal("holding"))
    _recompute_clear(g)
    return g


def scene_canonical() -> Graph:
    """Purple free: red sits on orange, rest on the table."""
    return build_scene({"red": "orange"})


def scene_purple_occupied() -> Graph:
    """Purple covered by red, orange free: forces the fallback branch."""
    return build_scene({"red": "purple"})


def _held_block(world: Graph) -> Optional[Term]:
    held = world.value(GRIPPER, HOLDING, None)
    if held is None or held == NOTHING:
        return None
    return held


def _recompute_clear(world: Graph) -> None:
    held = _held_block(world)
    for b in world.subjects(RDF_TYPE, BLOCK):
        covered = bool(world.match(None, ON, b))
        for t in world.match(b, CLEAR, None):
            world.discard(t)
        world.add(b, CLEAR, boolean(not covered and b != held))


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise BlocksWorldError(message)


def apply_action(world: Graph, action: str, args: dict[str, Term]) -> Graph:
    """Classical STRIPS transition; returns a new world, never mutates."""
    g = world.copy()
    held = _held_block(g)

    def is_clear(b: Term) -> bool:
        return g.value(b, CLEAR, None) == boolean(True)

    if action == "pickup":
        x = args["block"]
        _require(held is None, "gripper already holds a block")
        _require(g.value(x, ON_TABLE, None) == boolean(True), f"{x.value} is not on the table")
        _require(is_clear(x), f"{x.value} is not clear")
        g.discard(Triple(x, ON_TABLE, boolean(True)))
        _set_holding(g, x)
    elif action == "putdown":
        x = args["block"]
        _require(held == x, f"gripper is not holding {x.value}")
        g.add(x, ON_TABLE, boolean(True))
        _set_holding(g, None)
    elif action == "stack":
        x, y = args["block"], args["target"]
        _require(x != y, "cannot stack a block on itself")
        _require(held == x, f"gripper is not holding {x.value}")
        _require(is_clear(y), f"{y.value} is not clear")
        g.add(x, ON, y)
        _set_holding(g, None)
    elif action == "unstack":
        x, y = args["block"], args["target"]
        _require(held is None, "gripper already holds a block")
        _require(Triple(x, ON, y) in g, f"{x.value} is not on {y.value}")
        _require(is_clear(x), f"{x.value} is not clear")
        g.discard(Triple(x, ON, y))
        _set_holding(g, x)
    else:
        raise BlocksWorldError(f"unknown action {action!r}")
    _recompute_clear(g)
    return g


def _set_holding(world: Graph, block: Optional[Term]) -> None:
    for t in world.match(GRIPPER, HOLDING, None):
        world.discard(t)
    world.add(GRIPPER, HOLDING, block if block is not None else NOTHING)


def check_conservation(world: Graph) -> None:
    """Each block has exactly one support (on/onTable/held); clear flags
    agree with the stacking relation. Raises on violation."""
    blocks = world.subjects(RDF_TYPE, BLOCK)
    assert len(blocks) == len(COLORS), f"expected {len(COLORS)} blocks, found {len(blocks)}"
    held = _held_block(world)
    for b in blocks:
        supports = len(world.match(b, ON, None)) + len(world.match(b, ON_TABLE, None))
        supports += 1 if b == held else 0
        if supports != 1:
            raise AssertionError(f"{b.value} has {supports} supports")
        covered = bool(world.match(None, ON, b))
        want_clear = not covered and b != held
        if world.value(b, CLEAR, None) != boolean(want_clear):
            raise AssertionError(f"{b.value} clear flag wrong")
