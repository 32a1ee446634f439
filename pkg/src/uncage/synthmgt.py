"""Procedural stand-in for a masked generative transformer.

A scene is a handful of disc-shaped entities, each an object with (at most)
one attribute. The token vocabulary is background ``0`` plus two composite
tokens per entity ``e``: ``1 + 2e`` (object with its own attribute) and
``2 + 2e`` (object with a wrong attribute).

Logits at a cell favour its ground-truth token by ``margin``. Attention of each
entity leaks into its neighbours with strength ``overlap``, which both blurs
the attention maps and makes other entities' tokens plausible where their
bumps reach. Committed neighbours vote for their own token, so whatever is
unmasked early pulls later predictions towards it.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ContractViolation, PlacementError
from .guidance import rescale
from .prompt import PromptSpec, SubjectToken, build_prompt_spec
from .scoring import GridState

OBJECT_NAMES = ["cat", "dog", "bird", "horse", "bear", "car", "apple", "boat"]
ATTRIBUTE_NAMES = ["red", "blue", "green", "pink", "yellow", "black", "white", "purple"]

BACKGROUND = 0


def correct_token(entity: int) -> int:
    return 1 + 2 * entity


def wrong_token(entity: int) -> int:
    return 2 + 2 * entity


def token_entity(token: int) -> int:
    """Entity index a composite token belongs to; -1 for background."""
    return (token - 1) // 2 if token > 0 else -1


@dataclass(frozen=True)
class Entity:
    object_id: int
    attribute_id: int | None
    center: tuple[int, int]
    radius: float


@dataclass(frozen=True)
class SceneSpec:
    height: int
    width: int
    entities: tuple[Entity, ...]
    overlap: float = 0.7
    attn_sigma: float = 3.0
    anchor_radius: int = 1
    anchor_weight: float = 2.0
    noise_sigma: float = 1.0
    margin: float = 2.0
    ambiguity: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.overlap <= 1.0:
            raise ContractViolation(f"overlap must be in [0, 1], got {self.overlap}")
        for e in self.entities:
            r, c = e.center
            if not (0 <= r < self.height and 0 <= c < self.width):
                raise ContractViolation(f"entity center {e.center} outside {self.height}x{self.width}")
            if not e.radius > 0:
                raise ContractViolation(f"entity radius must be > 0, got {e.radius}")
        if self.attn_sigma <= 0 or self.anchor_radius < 0 or self.noise_sigma < 0:
            raise ContractViolation("attn_sigma > 0, anchor_radius >= 0, noise_sigma >= 0 required")

    @property
    def vocab_size(self) -> int:
        return 1 + 2 * len(self.entities)

    def entity_of_subject(self, sid: int) -> int:
        for i, e in enumerate(self.entities):
            if sid == e.object_id or sid == e.attribute_id:
                return i
        raise ContractViolation(f"subject {sid} is not part of this scene")

    def to_json(self) -> dict:
        d = asdict(self)
        d["entities"] = [asdict(e) | {"center": list(e.center)} for e in self.entities]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        d["entities"] = tuple(
            Entity(e["object_id"], e.get("attribute_id"), tuple(e["center"]), float(e["radius"]))
            for e in d["entities"]
        )
        return cls(**d)

    def save(self, path: str | Path, prompt: PromptSpec | None = None) -> None:
        payload = {"scene": self.to_json()}
        if prompt is not None:
            payload["prompt"] = prompt.to_json()
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))


def load_scene(path: str | Path) -> tuple[SceneSpec, PromptSpec]:
    """Read a scene file written by :meth:`SceneSpec.save`; the prompt is
    rebuilt from entity order when absent."""
    from .prompt import prompt_from_json

    payload = json.loads(Path(path).read_text())
    scene = SceneSpec.from_json(payload["scene"])
    if "prompt" in payload:
        prompt = prompt_from_json(payload["prompt"])
    else:
        prompt = _prompt_for(len(scene.entities), [e.attribute_id is not None for e in scene.entities])
    return scene, prompt


def _prompt_for(n_objects: int, with_attr: list[bool], labels=None) -> PromptSpec:
    if labels is None:
        labels = []
        for i in range(n_objects):
            obj = OBJECT_NAMES[i] if i < len(OBJECT_NAMES) else f"object{i}"
            att = ATTRIBUTE_NAMES[i] if i < len(ATTRIBUTE_NAMES) else f"attribute{i}"
            labels.append((obj, [att] if with_attr[i] else []))
    return build_prompt_spec(labels)


def gen_scene(
    rng: np.random.Generator,
    height: int,
    width: int,
    n_objects: int,
    overlap: float,
    spacing: float,
    *,
    radius: float = 3.0,
    attributes: bool = True,
    labels: list[tuple[str, list[str]]] | None = None,
    max_tries: int = 1000,
    **params,
) -> tuple[SceneSpec, PromptSpec]:
    """Place ``n_objects`` discs with centres at least ``spacing * min(H, W)``
    apart, and return the scene with its matching prompt."""
    if n_objects < 1:
        raise ContractViolation("need at least one object")
    if labels is not None:
        if len(labels) != n_objects or any(len(a) > 1 for _, a in labels):
            raise ContractViolation("labels must give one entry per object with at most one attribute")
        prompt = build_prompt_spec(labels)
    else:
        prompt = _prompt_for(n_objects, [attributes] * n_objects)
    min_dist = spacing * min(height, width)
    pad = min(int(math.ceil(radius)), (min(height, width) - 1) // 2)
    lo_r, hi_r = pad, height - 1 - pad
    lo_c, hi_c = pad, width - 1 - pad
    centers: list[tuple[int, int]] = []
    for _ in range(max_tries):
        centers = []
        for _ in range(n_objects):
            centers.append((int(rng.integers(lo_r, hi_r + 1)), int(rng.integers(lo_c, hi_c + 1))))
        if all(
            math.dist(a, b) >= min_dist for i, a in enumerate(centers) for b in centers[i + 1:]
        ):
            break
    else:
        raise PlacementError(
            f"could not place {n_objects} objects {min_dist:.2f} apart on {height}x{width} in {max_tries} tries"
        )
    entities = []
    for oid, c in zip(prompt.objects, centers):
        attrs = prompt.attributes_of(oid)
        entities.append(Entity(oid, attrs[0] if attrs else None, c, float(radius)))
    seed = int(rng.integers(0, 2**63 - 1))
    scene = SceneSpec(height, width, tuple(entities), overlap=overlap, seed=seed, **params)
    return scene, prompt


def _coords(scene: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    return np.meshgrid(np.arange(scene.height), np.arange(scene.width), indexing="ij")


def distances(scene: SceneSpec) -> np.ndarray:
    """(E, H, W) Euclidean distance of every cell to every entity centre."""
    rr, cc = _coords(scene)
    return np.stack([np.hypot(rr - e.center[0], cc - e.center[1]) for e in scene.entities])


def bumps(scene: SceneSpec) -> np.ndarray:
    d = distances(scene)
    return np.exp(-(d**2) / (2 * scene.attn_sigma**2))


def region_masks(scene: SceneSpec) -> np.ndarray:
    """(E, H, W) ground-truth regions: cells within each entity's radius,
    overlaps resolved to the nearest centre."""
    d = distances(scene)
    inside = d <= np.array([e.radius for e in scene.entities])[:, None, None]
    nearest = d.argmin(axis=0)
    return inside & (nearest[None] == np.arange(len(scene.entities))[:, None, None])


def owner_map(scene: SceneSpec) -> np.ndarray:
    """Entity index owning each cell, -1 for background."""
    regions = region_masks(scene)
    owner = np.full((scene.height, scene.width), -1, dtype=np.int64)
    for e in range(regions.shape[0]):
        owner[regions[e]] = e
    return owner


def ground_truth(scene: SceneSpec) -> np.ndarray:
    owner = owner_map(scene)
    return np.where(owner >= 0, 1 + 2 * owner, BACKGROUND).astype(np.int64)


def leaky_attention(scene: SceneSpec, subject: SubjectToken | int) -> np.ndarray:
    """Own bump plus ``overlap`` times every other entity's bump (not rescaled)."""
    sid = subject.id if isinstance(subject, SubjectToken) else int(subject)
    own = scene.entity_of_subject(sid)
    g = bumps(scene)
    return g[own] + scene.overlap * (g.sum(axis=0) - g[own])


def mock_attention(scene: SceneSpec, subject: SubjectToken | int, state: GridState | None = None, t: int = 0) -> np.ndarray:
    """:func:`leaky_attention` rescaled to [0, 1]; independent of state and step."""
    return rescale(leaky_attention(scene, subject))


def base_logits(scene: SceneSpec) -> np.ndarray:
    """State-independent part of the logits, shape (H, W, V)."""
    H, W, V = scene.height, scene.width, scene.vocab_size
    m, lam = scene.margin, scene.overlap
    g = bumps(scene)
    owner = owner_map(scene)
    gt = ground_truth(scene)
    base = np.zeros((H, W, V))
    rr, cc = _coords(scene)
    base[rr, cc, gt] = m
    E = len(scene.entities)
    leak = scene.ambiguity * lam * g
    # other entities' tokens become plausible wherever their bump reaches
    for f in range(E):
        base[..., correct_token(f)] += np.where(owner != f, m * leak[f], 0.0)
    if E > 1:
        for e in range(E):
            rival = np.delete(leak, e, axis=0).max(axis=0)
            base[..., wrong_token(e)] += np.where(owner == e, m * lam * rival, 0.0)
    return base


def anchor_term(scene: SceneSpec, state: GridState) -> np.ndarray:
    r = scene.anchor_radius
    if r == 0 or scene.anchor_weight == 0:
        return np.zeros((scene.height, scene.width, scene.vocab_size))
    votes = kernels.neighbor_votes(
        np.ascontiguousarray(state.tokens, dtype=np.int64),
        np.ascontiguousarray(~state.masked),
        scene.vocab_size,
        r,
    )
    return scene.anchor_weight * votes / ((2 * r + 1) ** 2 - 1)


def mock_logits(scene: SceneSpec, state: GridState, t: int, rng: np.random.Generator, base: np.ndarray | None = None) -> np.ndarray:
    if state.shape != (scene.height, scene.width):
        raise ContractViolation(f"grid {state.shape} does not match scene {scene.height}x{scene.width}")
    if base is None:
        base = base_logits(scene)
    logits = base + anchor_term(scene, state)
    if scene.noise_sigma > 0:
        logits = logits + rng.normal(0.0, scene.noise_sigma, size=logits.shape)
    return logits


@dataclass
class SyntheticMGT:
    """Model interface over a fixed scene.

    Noise for step ``t`` comes from a generator keyed on ``(scene.seed, t)``, so a
    query is a pure function of the grid state and the step.
    """

    scene: SceneSpec
    prompt: PromptSpec
    n_slices: int = 1
    _base: np.ndarray = field(init=False, repr=False)
    _attention: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._base = base_logits(self.scene)
        maps = np.stack([mock_attention(self.scene, sid) for sid in self.prompt.subject_ids])
        self._attention = np.broadcast_to(maps, (self.n_slices,) + maps.shape)

    @property
    def height(self) -> int:
        return self.scene.height

    @property
    def width(self) -> int:
        return self.scene.width

    @property
    def vocab_size(self) -> int:
        return self.scene.vocab_size

    def query(self, spec: PromptSpec, state: GridState, t: int) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(np.random.SeedSequence(self.scene.seed, spawn_key=(t,)))
        return mock_logits(self.scene, state, t, rng, self._base), self._attention

    def with_scene(self, **changes) -> "SyntheticMGT":
        return SyntheticMGT(replace(self.scene, **changes), self.prompt, self.n_slices)
