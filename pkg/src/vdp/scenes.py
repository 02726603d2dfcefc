"""Rule-based scene tagging: object detections -> group counts -> a scene
category per frame -> one category per sequence.

The default rule ladder is mutually exclusive and total (every count triple
fires exactly one rule); custom ladders loaded from YAML are applied
first-match in priority order with Unknown as the fall-through.
"""

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import yaml

from .errors import ConfigError
from .detections import Detection, DetectorConfig, fetch_detections
from .frames import FrameRef


class SceneCategory(str, Enum):
    CITY = "City"
    PEDESTRIAN_TRAFFIC = "PedestrianTraffic"
    FREEWAY = "Freeway"
    RURAL = "Rural"
    UNKNOWN = "Unknown"


# Fixed tie-break order for sequence-level aggregation.
TIE_PRIORITY = (
    SceneCategory.CITY,
    SceneCategory.FREEWAY,
    SceneCategory.PEDESTRIAN_TRAFFIC,
    SceneCategory.RURAL,
    SceneCategory.UNKNOWN,
)

DEFAULT_GROUPS: dict[str, frozenset[str]] = {
    "vehicles": frozenset({"Car", "Van", "Truck"}),
    "people": frozenset({"Pedestrian", "Person_sitting", "Cyclist"}),
    "urban_vehicle": frozenset({"Tram"}),
}

GROUP_NAMES = ("vehicles", "people", "urban_vehicle")

Bound = tuple[int, int | None]  # inclusive min, inclusive max (None = unbounded)
_ANY: Bound = (0, None)


@dataclass(frozen=True)
class GroupCounts:
    vehicles: int = 0
    people: int = 0
    urban_vehicle: int = 0

    def __post_init__(self):
        for name in GROUP_NAMES:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} count must be >= 0")


@dataclass(frozen=True)
class SceneRule:
    category: SceneCategory
    vehicles: Bound = _ANY
    people: Bound = _ANY
    urban_vehicle: Bound = _ANY

    def matches(self, counts: GroupCounts) -> bool:
        for name in GROUP_NAMES:
            lo, hi = getattr(self, name)
            value = getattr(counts, name)
            if value < lo or (hi is not None and value > hi):
                return False
        return True


@dataclass(frozen=True)
class RuleSet:
    groups: Mapping[str, frozenset[str]]
    rules: tuple[SceneRule, ...]

    @staticmethod
    def default() -> "RuleSet":
        # Ladder resolving the overlaps between the plain-language rules;
        # the clauses are disjoint and cover every count triple.
        rules = (
            SceneRule(SceneCategory.CITY, urban_vehicle=(1, None)),
            SceneRule(
                SceneCategory.PEDESTRIAN_TRAFFIC,
                vehicles=(0, 0), people=(1, None), urban_vehicle=(0, 0),
            ),
            SceneRule(
                SceneCategory.FREEWAY,
                vehicles=(2, None), people=(0, 0), urban_vehicle=(0, 0),
            ),
            SceneRule(
                SceneCategory.RURAL,
                vehicles=(1, None), people=(1, 2), urban_vehicle=(0, 0),
            ),
            SceneRule(
                SceneCategory.CITY,
                vehicles=(1, None), people=(3, None), urban_vehicle=(0, 0),
            ),
            SceneRule(
                SceneCategory.RURAL,
                vehicles=(1, 1), people=(0, 0), urban_vehicle=(0, 0),
            ),
            SceneRule(
                SceneCategory.UNKNOWN,
                vehicles=(0, 0), people=(0, 0), urban_vehicle=(0, 0),
            ),
        )
        return RuleSet(groups=dict(DEFAULT_GROUPS), rules=rules)

    @staticmethod
    def from_yaml(text: str) -> "RuleSet":
        """Schema: optional ``groups`` (group name -> label list) and
        ``rules`` (list of {category, priority?, <group>: {min?, max?}}).
        Rules apply first-match, lowest priority value first; list order
        breaks priority ties."""
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid rules YAML: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("rules file must be a mapping")

        groups = dict(DEFAULT_GROUPS)
        for name, labels in (doc.get("groups") or {}).items():
            if name not in GROUP_NAMES:
                raise ConfigError(f"unknown group {name!r}, expected one of {GROUP_NAMES}")
            if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
                raise ConfigError(f"group {name!r} must be a list of label strings")
            groups[name] = frozenset(labels)

        raw_rules = doc.get("rules")
        if not isinstance(raw_rules, list) or not raw_rules:
            raise ConfigError("rules file must contain a non-empty 'rules' list")
        parsed: list[tuple[int, SceneRule]] = []
        for i, item in enumerate(raw_rules):
            if not isinstance(item, dict) or "category" not in item:
                raise ConfigError(f"rule {i} must be a mapping with a 'category'")
            try:
                category = SceneCategory(item["category"])
            except ValueError:
                raise ConfigError(
                    f"rule {i}: unknown category {item['category']!r}"
                ) from None
            bounds = {}
            for name in GROUP_NAMES:
                spec = item.get(name)
                if spec is None:
                    continue
                if not isinstance(spec, dict):
                    raise ConfigError(f"rule {i}: {name} must be a min/max mapping")
                lo = int(spec.get("min", 0))
                hi = spec.get("max")
                hi = None if hi is None else int(hi)
                if lo < 0 or (hi is not None and hi < lo):
                    raise ConfigError(f"rule {i}: bad bounds for {name}: {spec}")
                bounds[name] = (lo, hi)
            priority = int(item.get("priority", i))
            parsed.append((priority, SceneRule(category=category, **bounds)))
        parsed.sort(key=lambda pair: pair[0])
        return RuleSet(groups=groups, rules=tuple(rule for _, rule in parsed))


def group_counts(
    dets: Sequence[Detection], groups: Mapping[str, frozenset[str]] | None = None
) -> GroupCounts:
    """Count detections by exact label membership; labels outside every
    group are ignored."""
    groups = groups or DEFAULT_GROUPS
    counts = dict.fromkeys(GROUP_NAMES, 0)
    for det in dets:
        for name in GROUP_NAMES:
            if det.label in groups[name]:
                counts[name] += 1
                break
    return GroupCounts(**counts)


def classify_frame(counts: GroupCounts, rules: RuleSet | None = None) -> SceneCategory:
    """First matching rule wins; no match falls through to Unknown."""
    rules = rules or RuleSet.default()
    for rule in rules.rules:
        if rule.matches(counts):
            return rule.category
    return SceneCategory.UNKNOWN


@dataclass
class SequenceCategorization:
    per_frame: dict[str, SceneCategory]
    histogram: dict[SceneCategory, float]
    final: SceneCategory

    def histogram_rounded(self) -> dict[str, float]:
        """Report form: category name -> percent, 2 decimals."""
        return {cat.value: round(pct, 2) for cat, pct in self.histogram.items()}


def classify_sequence(per_frame: Mapping[str, SceneCategory]) -> SequenceCategorization:
    """Aggregate frame categories: histogram in percent over all categories
    plus the winning category. Ties break City > Freeway > PedestrianTraffic
    > Rural; Unknown wins only when it is the sole category present."""
    if not per_frame:
        raise ValueError("per_frame map must be non-empty")
    counts = Counter(per_frame.values())
    total = len(per_frame)
    histogram = {cat: 100.0 * counts.get(cat, 0) / total for cat in SceneCategory}

    present = {cat for cat, n in counts.items() if n > 0}
    if present == {SceneCategory.UNKNOWN}:
        final = SceneCategory.UNKNOWN
    else:
        candidates = [cat for cat in TIE_PRIORITY if cat is not SceneCategory.UNKNOWN]
        final = max(candidates, key=lambda cat: (counts.get(cat, 0), -TIE_PRIORITY.index(cat)))
    return SequenceCategorization(
        per_frame=dict(per_frame), histogram=histogram, final=final
    )


def classify_frames(
    frames: Sequence[FrameRef],
    config: DetectorConfig,
    rules: RuleSet | None = None,
) -> dict[str, SceneCategory]:
    """Fetch detections for each frame and classify it; the full per-frame
    tagging loop used by the pipeline."""
    rules = rules or RuleSet.default()
    out: dict[str, SceneCategory] = {}
    for frame in frames:
        dets = fetch_detections(frame, config)
        out[frame.frame_id] = classify_frame(group_counts(dets, rules.groups), rules)
    return out
