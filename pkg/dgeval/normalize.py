from __future__ import annotations

import asyncio
import re
import unicodedata
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING, Optional, Union

import pyarrow as pa
import pyarrow.csv as pa_csv
from pydantic import BaseModel, ConfigDict

from .constants import Dimension, Polarity, TemplateId
from .exceptions import JudgeError
from .models import AtomicFact, FactComponents, NumericRange

if TYPE_CHECKING:
    from .judge import JudgeClient

UNIT_TABLE_PATH = Path(__file__).parent / "data" / "units_v1.tsv"
UNIT_TABLE_COLUMNS = {
    "surface": pa.string(),
    "canonical": pa.string(),
    "dimension": pa.string(),
    "factor": pa.float64(),
}

# Characters kept at the edges of a normalized text, they carry meaning for quantities.
KEPT_EDGE_CHARACTERS = {"%"}

NUMBER = r"\d+(?:\.\d+)?"
QUANTITY_PATTERN = re.compile(
    rf"(?<![\w.,])(?P<lo>{NUMBER})(?:\s*(?:-{{1,2}}|–|—|\bto\b)\s*(?P<hi>{NUMBER}))?(?![\d,]*,\d)"
)
UNIT_LOOKAHEAD = 4

NEGATION_CUES = re.compile(
    r"\b(?:do not|don't|does not|should not|must not|never|avoid|avoiding|stop|refrain from|no longer)\b"
)
ABSOLUTE_CUES = re.compile(r"\b(?:always|never|under no circumstances|at all times|only)\b")
AFFIRMATION_VERBS = frozenset(
    {
        "add",
        "apply",
        "collect",
        "cover",
        "direct",
        "drain",
        "ensure",
        "harvest",
        "irrigate",
        "keep",
        "maintain",
        "mix",
        "monitor",
        "plant",
        "plough",
        "prune",
        "remove",
        "repeat",
        "sow",
        "spray",
        "target",
        "transplant",
        "treat",
        "use",
        "water",
        "wear",
    }
)


class UnitMapping(BaseModel):
    model_config = ConfigDict(frozen=True)

    surface: str
    canonical: str
    dimension: Dimension
    factor: float = 1.0


class NoMapping(BaseModel):
    model_config = ConfigDict(frozen=True)

    raw: str


def _is_edge_noise(char: str) -> bool:
    if char in KEPT_EDGE_CHARACTERS:
        return False
    return char.isspace() or unicodedata.category(char).startswith("P")


def normalize_text(raw: str) -> str:
    """Lowercase, NFKC-normalize, collapse whitespace and trim edge punctuation."""
    text = unicodedata.normalize("NFKC", unicodedata.normalize("NFKC", raw).lower())
    text = " ".join(text.split())

    start, end = 0, len(text)
    while start < end and _is_edge_noise(text[start]):
        start += 1
    while end > start and _is_edge_noise(text[end - 1]):
        end -= 1
    return " ".join(text[start:end].split())


def _unit_key(phrase: str) -> str:
    return " ".join(normalize_text(phrase).split())


class UnitTable:
    """Mapping from surface unit phrases to their canonical unit and dimension."""

    def __init__(self, mappings: list[UnitMapping]):
        self._mappings: dict[str, UnitMapping] = {}
        dimensions: dict[str, Dimension] = {}

        for mapping in mappings:
            known = dimensions.setdefault(mapping.canonical, mapping.dimension)
            if known != mapping.dimension:
                raise ValueError(
                    f"canonical unit '{mapping.canonical}' mapped to both "
                    f"'{known.value}' and '{mapping.dimension.value}'"
                )
            self._mappings[_unit_key(mapping.surface)] = mapping

        self.max_words = max((len(key.split()) for key in self._mappings), default=1)

    @classmethod
    def load(cls, path: Union[str, Path] = UNIT_TABLE_PATH) -> UnitTable:
        table = pa_csv.read_csv(
            path,
            parse_options=pa_csv.ParseOptions(delimiter="\t", quote_char=False),
            convert_options=pa_csv.ConvertOptions(column_types=UNIT_TABLE_COLUMNS),
        )
        return cls(mappings=[UnitMapping(**row) for row in table.to_pylist()])

    @property
    def surfaces(self) -> list[str]:
        return sorted(self._mappings)

    def lookup(self, phrase: str) -> Optional[UnitMapping]:
        return self._mappings.get(_unit_key(phrase))

    def __contains__(self, phrase: str) -> bool:
        return self.lookup(phrase) is not None

    def __len__(self) -> int:
        return len(self._mappings)


@lru_cache(maxsize=1)
def get_unit_table() -> UnitTable:
    return UnitTable.load()


def canonicalize_unit(phrase: str, table: Optional[UnitTable] = None) -> Union[UnitMapping, NoMapping]:
    mapping = (table or get_unit_table()).lookup(phrase)
    if mapping is None:
        return NoMapping(raw=phrase)
    return mapping


def _match_unit(tokens: list[str], table: UnitTable) -> Optional[tuple[UnitMapping, int]]:
    """Longest unit phrase at the start of tokens, with the number of tokens consumed."""
    for size in range(min(table.max_words, len(tokens)), 0, -1):
        mapping = table.lookup(" ".join(tokens[:size]))
        if mapping:
            return mapping, size
    return None


def _compose_per_unit(tokens: list[str], mapping: UnitMapping, consumed: int, table: UnitTable) -> UnitMapping:
    """Turn '120 kg of urea per hectare' into kg per hectare when the table knows the composed unit."""
    if " per " in f" {mapping.surface} " or "/" in mapping.surface:
        return mapping

    window = tokens[consumed : consumed + UNIT_LOOKAHEAD + 1]
    if "per" not in window:
        return mapping

    per_index = window.index("per")
    rest = window[per_index + 1 :] + tokens[consumed + UNIT_LOOKAHEAD + 1 : consumed + UNIT_LOOKAHEAD + 4]
    for size in range(min(len(rest), table.max_words), 0, -1):
        composed = table.lookup(f"{mapping.surface} per {' '.join(rest[:size])}")
        if composed:
            return composed
    return mapping


def _scale(value: float, factor: float) -> float:
    return round(value * factor, 6)


def parse_numeric_range(text: str, table: Optional[UnitTable] = None) -> Optional[NumericRange]:
    """Extract the first quantity of a text as a canonical NumericRange.

    The first quantity with a known unit wins; when no unit is known the first quantity is
    returned with its raw unit and an unknown dimension. Numbers using a comma separator are
    not interpreted.
    """
    table = table or get_unit_table()
    normalized = normalize_text(text)

    fallback: Optional[NumericRange] = None
    for match in QUANTITY_PATTERN.finditer(normalized):
        lo = float(match.group("lo"))
        hi = float(match.group("hi")) if match.group("hi") else lo
        if lo > hi:
            lo, hi = hi, lo

        tokens = [token.strip(",;:()") for token in normalized[match.end() :].split()]
        tokens = [token for token in tokens if token]
        found = _match_unit(tokens, table)
        if found:
            mapping = _compose_per_unit(tokens, found[0], found[1], table)
            return NumericRange(
                lo=_scale(lo, mapping.factor),
                hi=_scale(hi, mapping.factor),
                unit=mapping.canonical,
                dimension=mapping.dimension,
            )

        if fallback is None:
            fallback = NumericRange(lo=lo, hi=hi, unit=tokens[0] if tokens else "", dimension=Dimension.UNKNOWN)

    return fallback


def range_overlap_fraction(a: NumericRange, b: NumericRange) -> Optional[float]:
    """Overlap of two ranges relative to the shorter one, None when they cannot be compared."""
    if Dimension.UNKNOWN in (a.dimension, b.dimension) or a.dimension != b.dimension or a.unit != b.unit:
        return None

    intersection = min(a.hi, b.hi) - max(a.lo, b.lo)
    if intersection < 0:
        return 0.0

    shortest = min(a.length, b.length)
    if shortest == 0:
        return 1.0
    return min(1.0, intersection / shortest)


def detect_polarity(text: str) -> Polarity:
    normalized = normalize_text(text)
    if NEGATION_CUES.search(normalized):
        return Polarity.NEGATE

    words = normalized.split()
    if words and words[0] in AFFIRMATION_VERBS:
        return Polarity.AFFIRM
    return Polarity.UNKNOWN


def deterministic_components(text: str, table: Optional[UnitTable] = None) -> FactComponents:
    normalized = normalize_text(text)
    return FactComponents(
        polarity=detect_polarity(normalized),
        quantity=parse_numeric_range(normalized, table=table),
        absolute=bool(ABSOLUTE_CUES.search(normalized)),
    )


def _optional_slot(value: Optional[str]) -> Optional[str]:
    if not value:
        return None
    return normalize_text(value) or None


async def decompose_components(fact: AtomicFact, judge: JudgeClient) -> FactComponents:
    """Fill the component slots of a fact.

    Quantity, polarity cues and absolute cues come from the deterministic rules. Subject,
    attribute, timing and method come from the judge; when the judge fails the deterministic
    slots are returned alone and the components are flagged partial.
    """
    if not fact.text.strip():
        raise ValueError("cannot decompose an empty fact")

    components = deterministic_components(fact.text)

    try:
        output = await judge.complete(TemplateId.COMPONENT_DECOMPOSITION, {"fact": fact.text})
    except JudgeError as exc:
        judge.log.warning(f"Component decomposition failed for fact {fact.id}, keeping deterministic slots: {exc}")
        return components.model_copy(update={"partial": True})

    polarity = components.polarity
    if polarity == Polarity.UNKNOWN:
        polarity = output.polarity

    return components.model_copy(
        update={
            "subject": normalize_text(output.subject),
            "attribute": normalize_text(output.attribute),
            "polarity": polarity,
            "timing": _optional_slot(output.timing),
            "method": _optional_slot(output.method),
        }
    )


async def with_components(facts: list[AtomicFact], judge: JudgeClient) -> list[AtomicFact]:
    """Decompose the facts loaded without components, the contradiction rules compare components."""
    missing = [fact for fact in facts if not fact.components.filled_slots]
    if not missing:
        return facts
    components = await asyncio.gather(*[decompose_components(fact, judge) for fact in missing])
    decomposed = {fact.id: fact.model_copy(update={"components": item}) for fact, item in zip(missing, components)}
    return [decomposed.get(fact.id, fact) for fact in facts]
