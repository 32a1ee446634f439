"""Subject tokens and per-object positive/negative pair sets.

A prompt is given structurally as ``[(object_label, [attribute_labels...]), ...]``.
Every object and every attribute becomes one subject token. For an object ``o``
the positive set is ``{o}`` plus its own attributes and the negative set is
everything else.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import PromptError


class SubjectKind(enum.Enum):
    OBJECT = "object"
    ATTRIBUTE = "attribute"


@dataclass(frozen=True)
class SubjectToken:
    id: int
    kind: SubjectKind
    label: str
    # object id an attribute is bound to; None for objects
    owner: int | None = None


@dataclass(frozen=True, eq=True)
class PromptSpec:
    subjects: tuple[SubjectToken, ...]
    objects: tuple[int, ...]
    attributes: tuple[int, ...]
    positive_pairs: Mapping[int, frozenset[int]] = field(hash=False)
    negative_pairs: Mapping[int, frozenset[int]] = field(hash=False)

    @property
    def subject_ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self.subjects)

    def subject(self, sid: int) -> SubjectToken:
        for s in self.subjects:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def by_label(self, label: str) -> SubjectToken:
        for s in self.subjects:
            if s.label == label:
                return s
        raise KeyError(label)

    def attributes_of(self, oid: int) -> tuple[int, ...]:
        return tuple(s.id for s in self.subjects if s.owner == oid)

    def labels(self, ids: Iterable[int]) -> set[str]:
        return {self.subject(i).label for i in ids}

    def to_json(self) -> dict:
        return {
            "objects": [
                {
                    "label": self.subject(o).label,
                    "attributes": [self.subject(a).label for a in self.attributes_of(o)],
                }
                for o in self.objects
            ]
        }


def build_prompt_spec(objects: Sequence[tuple[str, Sequence[str]]]) -> PromptSpec:
    """Assign subject ids in reading order (object, then its attributes) and
    derive the pair sets."""
    if not objects:
        raise PromptError("prompt needs at least one object")
    subjects: list[SubjectToken] = []
    seen: set[str] = set()

    def add(kind: SubjectKind, label: str, owner: int | None) -> int:
        if not isinstance(label, str) or not label.strip():
            raise PromptError(f"empty {kind.value} label")
        if label in seen:
            raise PromptError(f"duplicate label {label!r}")
        seen.add(label)
        subjects.append(SubjectToken(len(subjects), kind, label, owner))
        return subjects[-1].id

    object_ids: list[int] = []
    attribute_ids: list[int] = []
    for obj_label, attr_labels in objects:
        oid = add(SubjectKind.OBJECT, obj_label, None)
        object_ids.append(oid)
        for a in attr_labels:
            attribute_ids.append(add(SubjectKind.ATTRIBUTE, a, oid))

    everything = frozenset(s.id for s in subjects)
    positive = {}
    negative = {}
    for oid in object_ids:
        pos = frozenset([oid] + [s.id for s in subjects if s.owner == oid])
        positive[oid] = pos
        negative[oid] = everything - pos
    return PromptSpec(
        subjects=tuple(subjects),
        objects=tuple(object_ids),
        attributes=tuple(attribute_ids),
        positive_pairs=positive,
        negative_pairs=negative,
    )


def prompt_from_json(data: Mapping) -> PromptSpec:
    """Parse ``{"objects": [{"label": ..., "attributes": [...]}, ...]}``."""
    try:
        items = data["objects"]
        pairs = [(o["label"], list(o.get("attributes", []))) for o in items]
    except (KeyError, TypeError) as exc:
        raise PromptError(f"malformed prompt JSON: {exc}") from exc
    return build_prompt_spec(pairs)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    object_id: int | None = None
    tokens: frozenset[int] = frozenset()


def validate(spec: PromptSpec) -> list[Violation]:
    """Every invariant violation in ``spec``; an empty list means valid."""
    out: list[Violation] = []
    ids = [s.id for s in spec.subjects]
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        out.append(Violation("duplicate-id", f"subject ids not unique: {sorted(dup)}", tokens=frozenset(dup)))
    S, O, A = set(ids), set(spec.objects), set(spec.attributes)
    if O & A:
        out.append(Violation("object-attribute-overlap", f"ids both object and attribute: {sorted(O & A)}", tokens=frozenset(O & A)))
    if O | A != S:
        diff = S ^ (O | A)
        out.append(Violation("subject-cover", f"objects and attributes do not cover subjects: {sorted(diff)}", tokens=frozenset(diff)))
    for s in spec.subjects:
        if s.id in A and s.owner not in O:
            out.append(Violation("unbound-attribute", f"attribute {s.label!r} not bound to an object", tokens=frozenset([s.id])))
    for o in spec.objects:
        pos = spec.positive_pairs.get(o)
        neg = spec.negative_pairs.get(o)
        if pos is None or neg is None:
            out.append(Violation("missing-pair-set", f"object {o} lacks a positive or negative set", object_id=o))
            continue
        if o not in pos:
            out.append(Violation("positive-missing-self", f"positive set missing self for object {o}", object_id=o, tokens=frozenset([o])))
        shared = set(pos) & set(neg)
        if shared:
            label = {x.id: x.label for x in spec.subjects}
            names = ", ".join(f"{t} ({label.get(t, '?')})" for t in sorted(shared))
            out.append(Violation("pair-overlap", f"object {o}: tokens {names} are both positive and negative", object_id=o, tokens=frozenset(shared)))
        if set(pos) | set(neg) != S:
            gap = S ^ (set(pos) | set(neg))
            out.append(Violation("pair-cover", f"object {o}: pair sets do not cover subjects: {sorted(gap)}", object_id=o, tokens=frozenset(gap)))
    return out
