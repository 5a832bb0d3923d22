"""Symbolic tabletop state and the composable pick-place task library.

A task moves one object between support slots (table, shelf, or inside the
bowl). The built-in six-task set is closed under both success and the
modeled failure (a dropped object lands on the table): every end state
satisfies some task's precondition, which is what lets play run without
manual resets.
"""

from __future__ import annotations

from dataclasses import dataclass

TABLE, SHELF, BOWL = "table", "shelf", "bowl"


@dataclass(frozen=True)
class SymbolicState:
    slots: tuple      # sorted ((object_id, slot), ...)
    upright: tuple    # sorted ((object_id, bool), ...)

    @staticmethod
    def make(slots: dict, upright: dict) -> "SymbolicState":
        if set(slots) != set(upright):
            raise ValueError("slots and upright must cover the same objects")
        for obj, slot in slots.items():
            if slot == obj:
                raise ValueError(f"{obj} cannot contain itself")
        return SymbolicState(tuple(sorted(slots.items())),
                             tuple(sorted(upright.items())))

    def slot_of(self, obj: str) -> str:
        return dict(self.slots)[obj]

    def is_upright(self, obj: str) -> bool:
        return dict(self.upright)[obj]

    def with_slot(self, obj: str, slot: str) -> "SymbolicState":
        slots = dict(self.slots)
        slots[obj] = slot
        return SymbolicState.make(slots, dict(self.upright))

    def to_dict(self) -> dict:
        return {"slots": dict(self.slots), "upright": dict(self.upright)}

    @staticmethod
    def from_dict(doc: dict) -> "SymbolicState":
        return SymbolicState.make(dict(doc["slots"]), dict(doc["upright"]))


@dataclass(frozen=True)
class TaskSpec:
    id: str
    name: str
    obj: str       # the manipulated object
    source: str    # slot the object must currently occupy
    dest: str      # slot it ends up in

    def precondition(self, state: SymbolicState) -> bool:
        """Executable now: object in the source slot, object upright, and a
        tipped container cannot receive."""
        if state.slot_of(self.obj) != self.source:
            return False
        if not state.is_upright(self.obj):
            return False
        if self.dest in dict(state.slots) and not state.is_upright(self.dest):
            return False
        return True

    def apply(self, state: SymbolicState) -> SymbolicState:
        return state.with_slot(self.obj, self.dest)


def builtin_tasks():
    """The six composable pineapple/bowl tasks."""
    moves = [
        ("pineapple", TABLE, SHELF),
        ("pineapple", SHELF, TABLE),
        ("pineapple", TABLE, BOWL),
        ("pineapple", BOWL, TABLE),
        ("bowl", TABLE, SHELF),
        ("bowl", SHELF, TABLE),
    ]
    out = []
    for obj, src, dst in moves:
        tid = f"{obj}_{src}_to_{dst}"
        out.append(TaskSpec(id=tid, name=f"Place {obj} from {src} to {dst}",
                            obj=obj, source=src, dest=dst))
    return out


def task_map(tasks):
    return {t.id: t for t in tasks}
