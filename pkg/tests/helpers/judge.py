from __future__ import annotations

import re
from typing import Any, Callable, Optional, Union

import ujson

from dgeval.config import JudgeConfig
from dgeval.constants import ANCHOR_NAMES, JudgeMode
from dgeval.judge import JudgeClient
from dgeval.normalize import normalize_text
from dgeval.types import JudgeRequest

SENTENCE_END = re.compile(r"(?<=[.!?])\s+")
WORD = re.compile(r"[\w.%/-]+")

SUBJECTS = (
    "brown planthopper",
    "imidacloprid",
    "urea",
    "zinc sulphate",
    "zinc",
    "ferrous sulphate",
    "iron",
    "dap",
    "potash",
    "mancozeb",
    "carbendazim",
    "chlorpyrifos",
    "neem oil",
    "wheat",
    "maize",
    "potato",
    "rice",
    "stem borer",
    "aphids",
    "late blight",
    "irrigation",
    "tubers",
    "grain",
    "pesticides",
)
METHODS = ("spray", "broadcast", "drip", "flood", "hand-pick", "vacuum", "top dressing", "seed treatment")
TIMINGS = re.compile(
    r"\b(?:\d+\s*(?:-\s*\d+\s*)?(?:days?|weeks?)(?: after \w+)?|daily|every \d+ days|early morning|late evening"
    r"|cooler hours|at (?:tillering|flowering|sowing|crown root initiation|tuber initiation|grain filling) stage)\b"
)
ANCHOR_CUES: dict[str, re.Pattern] = {
    "entity": re.compile(
        r"\b(?:rice|wheat|maize|potato|urea|imidacloprid|zinc|mancozeb|dap|neem|jeevamrit|chili)\b", re.I
    ),
    "location": re.compile(r"\b(?:bihar|patna|gaya|field|clay-loam soils?)\b", re.I),
    "time": re.compile(r"\b(?:\d+ days|every \d+ days|june|october|kharif|rabi|morning|evening|das)\b", re.I),
    "quantity": re.compile(r"\b\d+(?:\.\d+)?\s*(?:ml|kg|g|liters?|litres?|%|cm)", re.I),
    "conditional": re.compile(r"\b(?:if|when|more effectively than|unless)\b", re.I),
    "mechanistic": re.compile(r"\b(?:because|this will|improving|as this|so that)\b", re.I),
    "actionable": re.compile(r"\b(?:apply|spray|use|sow|irrigate|harvest|remove|wear|store|treat)\b", re.I),
}

Override = Union[str, dict, list, Exception, Callable[[JudgeRequest], Any]]


def tokens(text: str) -> set[str]:
    return set(WORD.findall(normalize_text(text)))


def similarity(first: str, second: str) -> float:
    first_tokens, second_tokens = tokens(first), tokens(second)
    if not first_tokens or not second_tokens:
        return 0.0
    return round(len(first_tokens & second_tokens) / len(first_tokens | second_tokens), 2)


class SimulatedJudge:
    """Deterministic judge backend computing its answers from the request bindings.

    Overrides replace the answer of a template: a string is returned verbatim, a dict is
    dumped as JSON, a list is consumed one item per request, an exception is raised and a
    callable receives the request.
    """

    def __init__(self, overrides: Optional[dict[str, Override]] = None, match_floor: float = 0.5):
        self.overrides = dict(overrides or {})
        self.match_floor = match_floor
        self.requests: list[JudgeRequest] = []

    def calls(self, template_id: str) -> list[JudgeRequest]:
        return [request for request in self.requests if request.template_id == template_id]

    async def __call__(self, request: JudgeRequest) -> str:
        self.requests.append(request)
        if request.template_id in self.overrides:
            return self._override(request)
        answer = getattr(self, f"answer_{request.template_id}")(request.bindings)
        return ujson.dumps(answer)

    def _override(self, request: JudgeRequest) -> str:
        override = self.overrides[request.template_id]
        if isinstance(override, list):
            override = override.pop(0) if len(override) > 1 else override[0]
        if callable(override) and not isinstance(override, Exception):
            override = override(request)
        if isinstance(override, Exception):
            raise override
        if isinstance(override, str):
            return override
        return ujson.dumps(override)

    @staticmethod
    def answer_fact_generation(bindings: dict[str, str]) -> dict:
        sentences = [sentence.strip() for sentence in SENTENCE_END.split(bindings["answer"]) if sentence.strip()]
        return {"facts": [{"text": sentence, "confidence": 0.95} for sentence in sentences]}

    @staticmethod
    def answer_component_decomposition(bindings: dict[str, str]) -> dict:
        text = normalize_text(bindings["fact"])
        subject = next((item for item in SUBJECTS if re.search(rf"\b{re.escape(item)}\b", text)), "")
        method = next((item for item in METHODS if item in text), None)
        timing = TIMINGS.search(text)
        return {
            "subject": subject,
            "attribute": "",
            "polarity": "unknown",
            "timing": timing.group(0) if timing else None,
            "method": method,
        }

    def answer_fact_matching(self, bindings: dict[str, str]) -> dict:
        candidates = ujson.loads(bindings["candidate_facts"])
        matches = []
        for candidate in candidates:
            score = similarity(bindings["golden_fact"], candidate["text"])
            if score >= self.match_floor:
                matches.append({"id": candidate["id"], "confidence": min(1.0, score + 0.2), "rationale": "overlap"})
        return {"matches": matches}

    @staticmethod
    def answer_specificity(bindings: dict[str, str]) -> dict:
        response = bindings["response"]
        answer = {}
        for name in ANCHOR_NAMES:
            found = ANCHOR_CUES[name].search(response)
            answer[name] = {"present": bool(found), "evidence": [found.group(0)] if found else []}
        return answer

    @staticmethod
    def answer_relevance(bindings: dict[str, str]) -> dict:
        overlap = similarity(bindings["response"], bindings["golden_facts"])
        base = 4 + min(5, int(overlap * 10))
        return {
            "direct_relevance": base + 1 if base < 10 else base,
            "ground_truth_consistency": base,
            "practical_implementation": base,
            "specificity": base,
            "agricultural_soundness": base,
            "gaps": [],
            "farmer_applicability": "simple to apply",
        }

    @staticmethod
    def answer_conversationality(bindings: dict[str, str]) -> dict:
        response = bindings["response"]
        greeting = 5 if response.lower().startswith(("hello", "namaste")) else 3
        return {
            "content_quality": 4,
            "communication_style": greeting,
            "practical_advice": 4,
            "safety_credibility": 4,
            "conversation_flow": 3,
            "response_format": 4,
        }

    @staticmethod
    def answer_stitching(bindings: dict[str, str]) -> dict:
        lines = [re.sub(r"^\d+\.\s*", "", line).strip() for line in bindings["facts"].splitlines() if line.strip()]
        body = " ".join(line if line.endswith(".") else f"{line}." for line in lines)
        return {"response": f"{bindings['greeting']} {body}"}

    @staticmethod
    def answer_contradiction(bindings: dict[str, str]) -> dict:
        return {"contradictions": []}

    @staticmethod
    def answer_quality_scoring(bindings: dict[str, str]) -> dict:
        score = 0.9 if re.search(r"\d", bindings["fact"]) else 0.4
        return {"confidence": 0.9, "completeness": score, "actionability": 0.8}


def make_judge(
    backend: Optional[SimulatedJudge] = None, mode: JudgeMode = JudgeMode.LIVE, **config: Any
) -> JudgeClient:
    """Judge client wired to a simulated backend, without backoff delays."""
    settings = {"backend": backend or SimulatedJudge(), "mode": mode, "retry_delay": 0, "api_key": None, **config}
    return JudgeClient(config=JudgeConfig(**settings))
