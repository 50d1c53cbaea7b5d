"""Machine-checkable design constraints: grammar, checker, and synthesizer.

One constraint per line, uppercase keywords, selectors are category labels
(spaces allowed) or "#i" element indices:

    PLACE <sel> AT <region>           region: top|bottom|left|right|center
    <sel> ABOVE <sel>                 also BELOW, LEFT OF, RIGHT OF, INSIDE
    <sel> LARGER THAN <sel>           also SMALLER THAN
    COUNT <category> <cmp> <n>        cmp: = | <= | >=
    ALIGN <axis> <sel>,<sel>,...      axis: left|x-center|right|top|y-center|bottom

Free-form natural-language requirements are deliberately out of this module's
reach; they travel as opaque prompt text while this grammar covers the
verifiable subset.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from .core import Element, LayoutRecord
from .metrics.geometry import ALIGNMENT_AXES, axis_value

DEFAULT_REGION_BAND = 0.33
DEFAULT_ALIGN_TOLERANCE = 0.01
EDGE_TOLERANCE = 1e-6
SYNTH_CLEARANCE = 0.05

REGIONS = ("top", "bottom", "left", "right", "center")

SATISFIED = "satisfied"
VIOLATED = "violated"
INAPPLICABLE = "inapplicable"


class ConstraintParseError(Exception):
    """Unrecognized constraint line; column is 1-based."""

    def __init__(self, message: str, line: str, column: int = 1):
        super().__init__(f"{message} (column {column}): {line!r}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Selector:
    """Picks elements by category label, or a single element by "#index"."""

    label: str | None = None
    index: int | None = None

    def __post_init__(self):
        if (self.label is None) == (self.index is None):
            raise ValueError("selector needs exactly one of label or index")

    def resolve(self, record: LayoutRecord) -> list[Element]:
        if self.index is not None:
            if 0 <= self.index < len(record.elements):
                return [record.elements[self.index]]
            return []
        return [e for e in record.elements if e.category == self.label]

    def render(self) -> str:
        return f"#{self.index}" if self.index is not None else str(self.label)

    @classmethod
    def parse(cls, token: str) -> "Selector":
        token = token.strip()
        if token.startswith("#"):
            return cls(index=int(token[1:]))
        return cls(label=token)


@dataclass(frozen=True)
class RegionConstraint:
    target: Selector
    region: str
    band: float = DEFAULT_REGION_BAND
    surface_text: str = ""

    def __post_init__(self):
        if self.region not in REGIONS:
            raise ValueError(f"unknown region {self.region!r}")
        if not 0.0 < self.band <= 0.5:
            raise ValueError(f"band fraction {self.band} outside (0, 0.5]")


@dataclass(frozen=True)
class RelationConstraint:
    rel: str  # above | below | left_of | right_of | inside
    a: Selector
    b: Selector
    surface_text: str = ""


@dataclass(frozen=True)
class SizeRelConstraint:
    comparison: str  # larger_than | smaller_than
    a: Selector
    b: Selector
    surface_text: str = ""


@dataclass(frozen=True)
class CountConstraint:
    category: str
    comparator: str  # = | <= | >=
    n: int
    surface_text: str = ""


@dataclass(frozen=True)
class AlignGroupConstraint:
    axis: str
    targets: tuple[Selector, ...]
    tolerance: float = DEFAULT_ALIGN_TOLERANCE
    surface_text: str = ""

    def __post_init__(self):
        if self.axis not in ALIGNMENT_AXES:
            raise ValueError(f"unknown alignment axis {self.axis!r}")
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")


Constraint = Union[
    RegionConstraint,
    RelationConstraint,
    SizeRelConstraint,
    CountConstraint,
    AlignGroupConstraint,
]


@dataclass(frozen=True)
class ConstraintSet:
    constraints: tuple[Constraint, ...]
    shortfall: bool = False  # synthesizer could not reach the requested count

    def __len__(self) -> int:
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def surface_lines(self) -> list[str]:
        return [c.surface_text for c in self.constraints]


_RELATION_KEYWORDS = (
    (" LEFT OF ", "left_of"),
    (" RIGHT OF ", "right_of"),
    (" LARGER THAN ", "larger_than"),
    (" SMALLER THAN ", "smaller_than"),
    (" ABOVE ", "above"),
    (" BELOW ", "below"),
    (" INSIDE ", "inside"),
)


def parse_constraint(line: str) -> Constraint:
    """Parse a single grammar line; surface_text keeps the input verbatim."""
    stripped = line.strip()
    if not stripped:
        raise ConstraintParseError("empty constraint line", line)

    if stripped.startswith("PLACE "):
        rest = stripped[len("PLACE "):]
        at = rest.rfind(" AT ")
        if at < 1:
            raise ConstraintParseError("expected 'PLACE <sel> AT <region>'", line, len("PLACE ") + 1)
        region = rest[at + len(" AT "):].strip().lower()
        if region not in REGIONS:
            column = stripped.index(" AT ") + len(" AT ") + 1
            raise ConstraintParseError(f"unknown region {region!r}", line, column)
        return RegionConstraint(
            target=Selector.parse(rest[:at]), region=region, surface_text=stripped
        )

    if stripped.startswith("COUNT "):
        rest = stripped[len("COUNT "):]
        for comparator in ("<=", ">=", "="):
            marker = f" {comparator} "
            pos = rest.rfind(marker)
            if pos > 0:
                number = rest[pos + len(marker):].strip()
                if not number.isdigit():
                    column = stripped.rfind(number) + 1 if number else len(stripped)
                    raise ConstraintParseError(f"count must be an integer, got {number!r}", line, column)
                return CountConstraint(
                    category=rest[:pos].strip(),
                    comparator=comparator,
                    n=int(number),
                    surface_text=stripped,
                )
        raise ConstraintParseError("expected 'COUNT <category> <cmp> <n>'", line, len("COUNT ") + 1)

    if stripped.startswith("ALIGN "):
        rest = stripped[len("ALIGN "):]
        parts = rest.split(None, 1)
        if len(parts) != 2:
            raise ConstraintParseError("expected 'ALIGN <axis> <sel>,<sel>,...'", line, len("ALIGN ") + 1)
        axis, sel_text = parts
        if axis not in ALIGNMENT_AXES:
            raise ConstraintParseError(f"unknown axis {axis!r}", line, len("ALIGN ") + 1)
        selectors = tuple(Selector.parse(tok) for tok in sel_text.split(",") if tok.strip())
        if not selectors:
            raise ConstraintParseError("no selectors given", line, stripped.index(sel_text) + 1)
        return AlignGroupConstraint(axis=axis, targets=selectors, surface_text=stripped)

    for keyword, rel in _RELATION_KEYWORDS:
        pos = stripped.find(keyword)
        if pos > 0:
            a = Selector.parse(stripped[:pos])
            b = Selector.parse(stripped[pos + len(keyword):])
            if rel in ("larger_than", "smaller_than"):
                return SizeRelConstraint(comparison=rel, a=a, b=b, surface_text=stripped)
            return RelationConstraint(rel=rel, a=a, b=b, surface_text=stripped)

    raise ConstraintParseError("unrecognized constraint", line)


def parse_constraint_lines(lines: Iterable[str]) -> ConstraintSet:
    """Parse grammar lines, skipping blanks and '#' comments."""
    constraints = []
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        constraints.append(parse_constraint(stripped))
    return ConstraintSet(tuple(constraints))


def load_constraints(path: str | Path) -> ConstraintSet:
    return parse_constraint_lines(Path(path).read_text(encoding="utf-8").splitlines())


def save_constraints(cset: ConstraintSet, path: str | Path) -> None:
    Path(path).write_text("\n".join(cset.surface_lines()) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ConstraintVerdict:
    constraint: Constraint
    status: str  # satisfied | violated | inapplicable
    explanation: str


@dataclass(frozen=True)
class ViolationReport:
    verdicts: tuple[ConstraintVerdict, ...]

    @property
    def vio(self) -> float:
        """Violated / applicable; 0.0 when nothing applies."""
        applicable = [v for v in self.verdicts if v.status != INAPPLICABLE]
        if not applicable:
            return 0.0
        return sum(1 for v in applicable if v.status == VIOLATED) / len(applicable)

    def counts(self) -> dict[str, int]:
        out = {SATISFIED: 0, VIOLATED: 0, INAPPLICABLE: 0}
        for v in self.verdicts:
            out[v.status] += 1
        return out


def _centroid_in_region(elem: Element, region: str, band: float) -> bool:
    cx, cy = elem.box.center()
    if region == "top":
        return cy <= band
    if region == "bottom":
        return cy >= 1.0 - band
    if region == "left":
        return cx <= band
    if region == "right":
        return cx >= 1.0 - band
    # center: a centered square of side `band`
    return max(abs(cx - 0.5), abs(cy - 0.5)) <= band / 2.0


def _box_inside(inner, outer, tol: float = EDGE_TOLERANCE) -> bool:
    return (
        inner.left >= outer.left - tol
        and inner.top >= outer.top - tol
        and inner.right <= outer.right + tol
        and inner.bottom <= outer.bottom + tol
    )


def _check_one(constraint: Constraint, record: LayoutRecord) -> ConstraintVerdict:
    if isinstance(constraint, RegionConstraint):
        selected = constraint.target.resolve(record)
        if not selected:
            return ConstraintVerdict(constraint, INAPPLICABLE, "selector matched no element")
        ok = all(_centroid_in_region(e, constraint.region, constraint.band) for e in selected)
        return ConstraintVerdict(
            constraint,
            SATISFIED if ok else VIOLATED,
            f"{len(selected)} element(s) checked against {constraint.region} band {constraint.band}",
        )

    if isinstance(constraint, RelationConstraint):
        a = constraint.a.resolve(record)
        b = constraint.b.resolve(record)
        if not a or not b:
            return ConstraintVerdict(constraint, INAPPLICABLE, "selector matched no element")
        rel = constraint.rel
        if rel == "above":
            ok = max(e.box.bottom for e in a) <= min(e.box.top for e in b) + EDGE_TOLERANCE
        elif rel == "below":
            ok = min(e.box.top for e in a) >= max(e.box.bottom for e in b) - EDGE_TOLERANCE
        elif rel == "left_of":
            ok = max(e.box.right for e in a) <= min(e.box.left for e in b) + EDGE_TOLERANCE
        elif rel == "right_of":
            ok = min(e.box.left for e in a) >= max(e.box.right for e in b) - EDGE_TOLERANCE
        elif rel == "inside":
            ok = all(any(_box_inside(ea.box, eb.box) for eb in b) for ea in a)
        else:
            raise ValueError(f"unknown relation {rel!r}")
        return ConstraintVerdict(
            constraint, SATISFIED if ok else VIOLATED, f"extremal-edge check for {rel}"
        )

    if isinstance(constraint, SizeRelConstraint):
        a = constraint.a.resolve(record)
        b = constraint.b.resolve(record)
        if not a or not b:
            return ConstraintVerdict(constraint, INAPPLICABLE, "selector matched no element")
        area_a = sum(e.box.area() for e in a)
        area_b = sum(e.box.area() for e in b)
        ok = area_a > area_b if constraint.comparison == "larger_than" else area_a < area_b
        return ConstraintVerdict(
            constraint,
            SATISFIED if ok else VIOLATED,
            f"total areas {area_a:.6f} vs {area_b:.6f}",
        )

    if isinstance(constraint, CountConstraint):
        count = sum(1 for e in record.elements if e.category == constraint.category)
        if constraint.comparator == "=":
            ok = count == constraint.n
        elif constraint.comparator == "<=":
            ok = count <= constraint.n
        else:
            ok = count >= constraint.n
        return ConstraintVerdict(
            constraint,
            SATISFIED if ok else VIOLATED,
            f"found {count} {constraint.category!r} element(s)",
        )

    if isinstance(constraint, AlignGroupConstraint):
        selected = [e for sel in constraint.targets for e in sel.resolve(record)]
        if not selected:
            return ConstraintVerdict(constraint, INAPPLICABLE, "selectors matched no element")
        values = [axis_value(e.box, constraint.axis) for e in selected]
        spread = max(values) - min(values)
        return ConstraintVerdict(
            constraint,
            SATISFIED if spread <= constraint.tolerance else VIOLATED,
            f"axis spread {spread:.6f} vs tolerance {constraint.tolerance}",
        )

    raise TypeError(f"not a constraint: {constraint!r}")


def check(record: LayoutRecord, cset: ConstraintSet) -> ViolationReport:
    """Evaluate every constraint; unresolvable selectors degrade to inapplicable."""
    return ViolationReport(tuple(_check_one(c, record) for c in cset))


def _region_candidates(record: LayoutRecord) -> list[Constraint]:
    out: list[Constraint] = []
    categories = sorted({e.category for e in record.elements})
    for category in categories:
        selector = Selector(label=category)
        elems = selector.resolve(record)
        for region in REGIONS:
            if all(_centroid_in_region(e, region, DEFAULT_REGION_BAND) for e in elems):
                out.append(
                    RegionConstraint(
                        target=selector,
                        region=region,
                        surface_text=f"PLACE {category} AT {region}",
                    )
                )
    return out


def _relation_candidates(record: LayoutRecord) -> list[Constraint]:
    out: list[Constraint] = []
    categories = sorted({e.category for e in record.elements})
    for cat_a in categories:
        a = [e for e in record.elements if e.category == cat_a]
        for cat_b in categories:
            if cat_a == cat_b:
                continue
            b = [e for e in record.elements if e.category == cat_b]
            if max(e.box.bottom for e in a) <= min(e.box.top for e in b) - SYNTH_CLEARANCE:
                out.append(
                    RelationConstraint(
                        rel="above",
                        a=Selector(label=cat_a),
                        b=Selector(label=cat_b),
                        surface_text=f"{cat_a} ABOVE {cat_b}",
                    )
                )
            if max(e.box.right for e in a) <= min(e.box.left for e in b) - SYNTH_CLEARANCE:
                out.append(
                    RelationConstraint(
                        rel="left_of",
                        a=Selector(label=cat_a),
                        b=Selector(label=cat_b),
                        surface_text=f"{cat_a} LEFT OF {cat_b}",
                    )
                )
    return out


def _count_candidates(record: LayoutRecord) -> list[Constraint]:
    counts: dict[str, int] = {}
    for e in record.elements:
        counts[e.category] = counts.get(e.category, 0) + 1
    return [
        CountConstraint(
            category=category,
            comparator="=",
            n=n,
            surface_text=f"COUNT {category} = {n}",
        )
        for category, n in sorted(counts.items())
    ]


def synthesize(gt_record: LayoutRecord, rng_seed: int, k: int = 3) -> ConstraintSet:
    """Derive k constraints the ground-truth layout itself satisfies.

    Candidates come from actual centroids (regions), actual orderings with a
    clearance margin (relations), and actual cardinalities (counts); each is
    re-verified with check() before emission. Deterministic for a fixed seed.
    If fewer than k satisfiable candidates exist the set is returned short
    with the shortfall flag raised.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not gt_record.elements:
        raise ValueError("cannot synthesize constraints for an empty layout")
    candidates: list[Constraint] = (
        _region_candidates(gt_record)
        + _relation_candidates(gt_record)
        + _count_candidates(gt_record)
    )
    rng = random.Random(rng_seed)
    rng.shuffle(candidates)
    chosen: list[Constraint] = []
    for candidate in candidates:
        if len(chosen) == k:
            break
        verdict = _check_one(candidate, gt_record)
        if verdict.status == SATISFIED:
            chosen.append(candidate)
    return ConstraintSet(tuple(chosen), shortfall=len(chosen) < k)
