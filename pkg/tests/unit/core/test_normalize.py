import random

import pytest

from dgeval.constants import Dimension, Polarity
from dgeval.exceptions import JudgeSchemaError
from dgeval.models import AtomicFact, NumericRange
from dgeval.normalize import (
    NoMapping,
    UnitMapping,
    UnitTable,
    canonicalize_unit,
    decompose_components,
    deterministic_components,
    detect_polarity,
    get_unit_table,
    normalize_text,
    parse_numeric_range,
    range_overlap_fraction,
)
from tests.helpers.judge import SimulatedJudge, make_judge

ALPHABET = "abcXYZ019 .,;:!?()-–—%°/\t\nÉéﬁß"


def interval(lo: float, hi: float, unit: str = "kg/ha", dimension: Dimension = Dimension.MASS_PER_AREA):
    return NumericRange(lo=lo, hi=hi, unit=unit, dimension=dimension)


@pytest.mark.parametrize(
    "raw,expected",
    [
        ("Apply  UREA ", "apply urea"),
        ("Imidacloprid 17.8 SL", "imidacloprid 17.8 sl"),
        ("  ...Spray now!  ", "spray now"),
        ("Apply 2%", "apply 2%"),
        ("", ""),
    ],
)
def test_normalize_text(raw, expected):
    assert normalize_text(raw) == expected


def test_normalize_text_is_idempotent():
    rng = random.Random(11)
    for _ in range(2000):
        raw = "".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, 30)))
        once = normalize_text(raw)
        assert normalize_text(once) == once


def test_unit_table_is_consistent():
    table = get_unit_table()
    dimensions = {}
    for surface in table.surfaces:
        mapping = table.lookup(surface)
        assert mapping.canonical
        assert dimensions.setdefault(mapping.canonical, mapping.dimension) == mapping.dimension


def test_unit_table_rejects_conflicting_dimensions():
    with pytest.raises(ValueError, match="mapped to both"):
        UnitTable(
            mappings=[
                UnitMapping(surface="kg", canonical="kg", dimension=Dimension.MASS),
                UnitMapping(surface="kilo", canonical="kg", dimension=Dimension.MASS_PER_AREA),
            ]
        )


@pytest.mark.parametrize(
    "phrase,canonical,dimension",
    [
        ("kg per hectare", "kg/ha", Dimension.MASS_PER_AREA),
        ("KG/HA", "kg/ha", Dimension.MASS_PER_AREA),
        ("ml per liter of water", "ml/l", Dimension.CONCENTRATION),
        ("days", "days", Dimension.TIME_INTERVAL),
    ],
)
def test_canonicalize_unit(phrase, canonical, dimension):
    mapping = canonicalize_unit(phrase)
    assert isinstance(mapping, UnitMapping)
    assert mapping.canonical == canonical
    assert mapping.dimension == dimension


def test_canonicalize_unknown_unit():
    assert canonicalize_unit("bushels") == NoMapping(raw="bushels")


@pytest.mark.parametrize(
    "text,lo,hi,unit,dimension",
    [
        ("5–10 kg zinc per hectare", 5, 10, "kg/ha", Dimension.MASS_PER_AREA),
        ("Apply 5--10 kg zinc per hectare", 5, 10, "kg/ha", Dimension.MASS_PER_AREA),
        ("0.5 ml per liter of water", 0.5, 0.5, "ml/l", Dimension.CONCENTRATION),
        ("Spray Imidacloprid 17.8 SL at 0.5 ml per liter of water", 0.5, 0.5, "ml/l", Dimension.CONCENTRATION),
        ("every 20 days", 20, 20, "days", Dimension.TIME_INTERVAL),
        ("irrigate every 2 weeks", 14, 14, "days", Dimension.TIME_INTERVAL),
        ("apply 20 to 25 kg/ha of urea", 20, 25, "kg/ha", Dimension.MASS_PER_AREA),
        ("apply 3 bushels", 3, 3, "bushels", Dimension.UNKNOWN),
    ],
)
def test_parse_numeric_range(text, lo, hi, unit, dimension):
    parsed = parse_numeric_range(text)
    assert parsed == NumericRange(lo=lo, hi=hi, unit=unit, dimension=dimension)


def test_parse_numeric_range_converts_units():
    parsed = parse_numeric_range("50 kg per acre")
    assert parsed.unit == "kg/ha"
    assert parsed.lo == pytest.approx(123.5525)


@pytest.mark.parametrize("text", ["maintain field hygiene", "apply 1,000 kg"])
def test_parse_numeric_range_without_quantity(text):
    assert parse_numeric_range(text) is None


@pytest.mark.parametrize(
    "first,second,expected",
    [
        (interval(5, 10), interval(5, 10), 1.0),
        (interval(2, 4), interval(5, 7), 0.0),
        (interval(0, 10), interval(8, 12), 0.5),
        (interval(5, 5), interval(0, 10), 1.0),
        (interval(5, 5), interval(5, 5), 1.0),
        (interval(0.5, 0.5), interval(5, 5), 0.0),
    ],
)
def test_range_overlap_fraction(first, second, expected):
    assert range_overlap_fraction(first, second) == expected
    assert range_overlap_fraction(second, first) == expected


def test_range_overlap_fraction_incomparable():
    days = interval(14, 14, unit="days", dimension=Dimension.TIME_INTERVAL)
    unknown = interval(1, 2, unit="bags", dimension=Dimension.UNKNOWN)
    assert range_overlap_fraction(interval(1, 2), days) is None
    assert range_overlap_fraction(unknown, unknown) is None


def _overlap_oracle(first, second):
    if first.is_point or second.is_point:
        point, other = (first, second) if first.is_point else (second, first)
        return 1.0 if other.lo <= point.lo <= other.hi else 0.0
    common = [
        value for value in range(0, 41) if first.lo <= value / 2 <= first.hi and second.lo <= value / 2 <= second.hi
    ]
    if not common:
        return 0.0
    length = (max(common) - min(common)) / 2
    return length / min(first.hi - first.lo, second.hi - second.lo)


def test_range_overlap_fraction_matches_interval_arithmetic():
    rng = random.Random(42)
    for _ in range(10_000):
        bounds = [sorted(rng.randint(0, 40) / 2 for _ in range(2)) for _ in range(2)]
        first, second = interval(*bounds[0]), interval(*bounds[1])
        fraction = range_overlap_fraction(first, second)
        assert 0.0 <= fraction <= 1.0
        assert fraction == range_overlap_fraction(second, first)
        assert fraction == pytest.approx(_overlap_oracle(first, second))


@pytest.mark.parametrize(
    "text,polarity",
    [
        ("Do not harvest within 14 days", Polarity.NEGATE),
        ("Avoid spraying at noon", Polarity.NEGATE),
        ("Never mix urea with lime", Polarity.NEGATE),
        ("Spray imidacloprid", Polarity.AFFIRM),
        ("Rice needs standing water", Polarity.UNKNOWN),
    ],
)
def test_detect_polarity(text, polarity):
    assert detect_polarity(text) == polarity


def test_deterministic_components():
    components = deterministic_components("Wear gloves and always spray 2 ml/l")
    assert components.absolute
    assert components.polarity == Polarity.AFFIRM
    assert components.quantity.unit == "ml/l"


async def test_decompose_components_normalizes_judge_slots():
    backend = SimulatedJudge(
        overrides={
            "component_decomposition": {
                "subject": "Imidacloprid 17.8 SL",
                "attribute": "Spray dosage",
                "polarity": "affirm",
                "timing": "",
                "method": "Spray",
            }
        }
    )
    fact = AtomicFact(id="gf001", text="Spray Imidacloprid 17.8 SL at 0.5 ml per liter of water")

    components = await decompose_components(fact, make_judge(backend))

    assert components.subject == "imidacloprid 17.8 sl"
    assert components.attribute == "spray dosage"
    assert components.polarity == Polarity.AFFIRM
    assert components.quantity == NumericRange(lo=0.5, hi=0.5, unit="ml/l", dimension=Dimension.CONCENTRATION)
    assert components.timing is None
    assert components.method == "spray"
    assert not components.partial


async def test_decompose_components_keeps_negation(judge):
    fact = AtomicFact(id="gf005", text="Do not harvest rice within 14 days of pesticide application.")

    components = await decompose_components(fact, judge)

    assert components.polarity == Polarity.NEGATE
    assert components.quantity == NumericRange(lo=14, hi=14, unit="days", dimension=Dimension.TIME_INTERVAL)
    assert components.subject == "rice"


async def test_decompose_components_leaves_absent_slots_empty(judge):
    components = await decompose_components(AtomicFact(id="f1", text="Maintain field hygiene"), judge)

    assert components.quantity is None
    assert components.timing is None


async def test_decompose_components_judge_failure_is_partial():
    backend = SimulatedJudge(
        overrides={"component_decomposition": JudgeSchemaError(template_id="component_decomposition", raw="")}
    )
    fact = AtomicFact(id="f1", text="Apply 60 kg/ha urea at tillering")

    components = await decompose_components(fact, make_judge(backend))

    assert components.partial
    assert components.subject == ""
    assert components.quantity.lo == 60
