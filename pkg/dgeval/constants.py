import enum


class JudgeMode(str, enum.Enum):
    LIVE = "live"
    RECORD = "record"
    REPLAY = "replay"


class Polarity(str, enum.Enum):
    AFFIRM = "affirm"
    NEGATE = "negate"
    UNKNOWN = "unknown"


class Severity(str, enum.Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"


class Dimension(str, enum.Enum):
    MASS_PER_AREA = "mass-per-area"
    VOLUME_PER_AREA = "volume-per-area"
    CONCENTRATION = "concentration"
    MASS_CONCENTRATION = "mass-concentration"
    TEMPERATURE = "temperature"
    PERCENTAGE = "percentage"
    COUNT = "count"
    TIME_INTERVAL = "time-interval"
    LENGTH = "length"
    MASS = "mass"
    VOLUME = "volume"
    UNKNOWN = "unknown"


class Provenance(str, enum.Enum):
    HUMAN_CURATED = "human-curated"
    DOCUMENT = "document"
    VIDEO = "video"
    LLM_SYNTH = "llm-synth"
    WEB = "web"
    CROSS_SOURCE = "cross-source"
    MODEL_OUTPUT = "model-output"


class SpecificityClass(str, enum.Enum):
    SPECIFIC = "specific"
    NOT_SPECIFIC = "not_specific"


class RelevanceBand(str, enum.Enum):
    HIGH = "HIGH"
    MED = "MED"
    LOW = "LOW"


class RecordStatus(str, enum.Enum):
    EVALUATED = "evaluated"
    PARTIAL = "partial"
    UNEVALUATED = "unevaluated"
    EXCLUDED = "excluded"


class TemplateId(str, enum.Enum):
    FACT_GENERATION = "fact_generation"
    SPECIFICITY = "specificity"
    FACT_MATCHING = "fact_matching"
    CONTRADICTION = "contradiction"
    RELEVANCE = "relevance"
    STITCHING = "stitching"
    CONVERSATIONALITY = "conversationality"
    COMPONENT_DECOMPOSITION = "component_decomposition"
    QUALITY_SCORING = "quality_scoring"


class ReportFormat(str, enum.Enum):
    MARKDOWN = "markdown"
    CSV = "csv"
    JSON = "json"


ANCHOR_NAMES = ("entity", "location", "time", "quantity", "conditional", "mechanistic", "actionable")
CONVERSATIONALITY_DIMENSIONS = (
    "content_quality",
    "communication_style",
    "practical_advice",
    "safety_credibility",
    "conversation_flow",
    "response_format",
)
RELEVANCE_DIMENSIONS = (
    "direct_relevance",
    "ground_truth_consistency",
    "practical_implementation",
    "specificity",
    "agricultural_soundness",
)

MATCH_THRESHOLD = 0.7
INSUFFICIENT_CELL = "---"
