"""Structural feature extraction, paradigm classification, and engine routing.

Classification is a rule cascade over a structural fingerprint of the
parsed value.  Baseline mode is the four-rule matrix (graph / document /
relational / unstructured); extended mode adds key-value and vector
detection and is the operational default.
"""

import enum
from collections import deque
from dataclasses import dataclass, field
from decimal import Decimal

from .data import is_scalar
from .errors import NoEngineRegistered

VECTOR_MIN_LENGTH = 8
REASSIGN_THRESHOLD = 0.5
REASSIGN_WINDOW = 100


class StorageParadigm(enum.Enum):
    GRAPH = "graph"
    DOCUMENT = "document"
    RELATIONAL = "relational"
    KEYVALUE = "keyvalue"
    VECTOR = "vector"
    UNSTRUCTURED = "unstructured"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class StructuralProfile:
    root_kind: str                     # scalar | sequence | mapping
    max_depth: int
    top_level_keys: tuple
    children_all_mappings: bool
    children_all_sequences: bool
    children_all_scalars: bool
    record_count: int
    numeric_leaf_ratio: float
    uniform_child_length: int | None = None


@dataclass(frozen=True)
class RoutingDecision:
    paradigm: StorageParadigm
    engine_id: str
    confidence: float
    rationale: tuple
    mode: str


def _depth(value) -> int:
    if is_scalar(value):
        return 0
    children = value.values() if isinstance(value, dict) else value
    return 1 + max((_depth(c) for c in children), default=0)


def _leaf_counts(value) -> tuple[int, int]:
    """(numeric leaves, total leaves); bools are not numeric."""
    numeric = total = 0
    stack = [value]
    while stack:
        node = stack.pop()
        if isinstance(node, dict):
            stack.extend(node.values())
        elif isinstance(node, list):
            stack.extend(node)
        else:
            total += 1
            if isinstance(node, (int, Decimal)) and not isinstance(node, bool):
                numeric += 1
    return numeric, total


def extract_features(value) -> StructuralProfile:
    """Total, deterministic structural fingerprint of a parsed value."""
    if isinstance(value, dict):
        root_kind = "mapping"
        children = list(value.values())
        keys = tuple(value.keys())
        record_count = 1
    elif isinstance(value, list):
        root_kind = "sequence"
        children = list(value)
        keys = ()
        record_count = len(value)
    else:
        root_kind = "scalar"
        children = []
        keys = ()
        record_count = 1

    numeric, total = _leaf_counts(value)
    uniform = None
    if root_kind == "sequence" and children and all(isinstance(c, list) for c in children):
        lengths = {len(c) for c in children}
        if len(lengths) == 1 and (length := lengths.pop()) > 0:
            uniform = length

    return StructuralProfile(
        root_kind=root_kind,
        max_depth=_depth(value),
        top_level_keys=keys,
        children_all_mappings=all(isinstance(c, dict) for c in children),
        children_all_sequences=all(isinstance(c, list) for c in children),
        children_all_scalars=all(is_scalar(c) for c in children),
        record_count=record_count,
        numeric_leaf_ratio=(numeric / total) if total else 0.0,
        uniform_child_length=uniform,
    )


def classify_format(profile: StructuralProfile, mode: str = "extended") -> StorageParadigm:
    """Rule cascade over the profile.

    Baseline is the four-rule matrix evaluated in order (note the
    vacuous-truth quirk: an empty sequence classifies as document).
    Extended inserts the vector rule ahead of the relational rule —
    placing it after would make it unreachable — and the key-value rule
    ahead of the unstructured fall-through.
    """
    if profile.root_kind == "mapping" and "nodes" in profile.top_level_keys:
        return StorageParadigm.GRAPH
    if profile.root_kind == "sequence" and profile.children_all_mappings:
        return StorageParadigm.DOCUMENT
    if mode == "extended":
        if (profile.root_kind == "sequence"
                and profile.children_all_sequences
                and profile.record_count > 0
                and profile.uniform_child_length is not None
                and profile.uniform_child_length >= VECTOR_MIN_LENGTH
                and profile.numeric_leaf_ratio == 1.0):
            return StorageParadigm.VECTOR
    if profile.root_kind == "sequence" and profile.children_all_sequences:
        return StorageParadigm.RELATIONAL
    if mode == "extended":
        if profile.root_kind == "mapping" and profile.children_all_scalars:
            return StorageParadigm.KEYVALUE
    return StorageParadigm.UNSTRUCTURED


def route_to_engine(paradigm: StorageParadigm, registry) -> RoutingDecision:
    """Pick the registered engine; unstructured data falls back to document."""
    mode = getattr(registry, "mode", "extended")
    if paradigm is StorageParadigm.UNSTRUCTURED:
        engine = registry.engine_for(StorageParadigm.DOCUMENT)
        if engine is None:
            raise NoEngineRegistered(StorageParadigm.DOCUMENT)
        return RoutingDecision(paradigm, engine.engine_id, 1.0,
                               ("FALLBACK_UNSTRUCTURED",), mode)
    engine = registry.engine_for(paradigm)
    if engine is None:
        raise NoEngineRegistered(paradigm)
    return RoutingDecision(paradigm, engine.engine_id, 1.0,
                           (f"RULE_{paradigm.value.upper()}",), mode)


# --- feedback-driven reassignment --------------------------------------------


@dataclass
class SegmentStats:
    """Sliding window of access descriptors for one stored segment."""

    segment_id: str
    window_size: int = REASSIGN_WINDOW
    window: deque = field(default_factory=deque)

    def record_access(self, paradigm: StorageParadigm, latency_ms: float) -> None:
        self.window.append((paradigm, latency_ms))
        while len(self.window) > self.window_size:
            self.window.popleft()

    def cross_paradigm_ratio(self, current: StorageParadigm) -> float:
        if not self.window:
            return 0.0
        foreign = sum(1 for paradigm, _ in self.window if paradigm is not current)
        return foreign / len(self.window)


@dataclass(frozen=True)
class ReassignmentProposal:
    segment_id: str
    current: StorageParadigm
    proposed: StorageParadigm
    cross_paradigm_ratio: float
    plan: tuple = ("export", "reingest", "verify_record_count")


def refine_assignment(stats: SegmentStats, current: StorageParadigm,
                      threshold: float = REASSIGN_THRESHOLD):
    """Propose moving the segment to the majority foreign paradigm.

    Fires only on a full window with cross-paradigm ratio above the
    threshold; the proposal is a plan object, never applied implicitly.
    """
    if len(stats.window) < stats.window_size:
        return None
    ratio = stats.cross_paradigm_ratio(current)
    if ratio <= threshold:
        return None
    tally: dict[StorageParadigm, int] = {}
    for paradigm, _ in stats.window:
        if paradigm is not current:
            tally[paradigm] = tally.get(paradigm, 0) + 1
    majority = max(tally.items(), key=lambda item: (item[1], item[0].value))[0]
    return ReassignmentProposal(stats.segment_id, current, majority, ratio)
