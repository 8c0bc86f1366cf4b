"""Static code-feature extraction for candidate kernels.

Two extraction modes, declared per feature in the knowledge base:

    rule      deterministic pattern matching over the source with comments
              and string literals stripped, so a mention in a comment never
              flips a feature
    assisted  delegated to a language model over the RAW source (comments
              included; they carry intent), with the KB's prompt_spec
              defining the question and the allowed answers

Every declared feature always gets a value: assisted features fall back to
their KB default when no assistant is configured, the assistant fails, or
its answer is outside the allowed set.  The extraction notes say which path
produced each value.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

from .errors import MalformedDocument
from .knowledge import CodeFeatureDef, KnowledgeBase

Assistant = Callable[[str], str]  # prompt in, raw response out


@dataclass(frozen=True)
class ExtractionNote:
    feature: str
    origin: str  # "rule" | "assisted" | "default"
    detail: str = ""


@dataclass(frozen=True)
class FeatureExtraction:
    values: Dict[str, object]
    notes: Tuple[ExtractionNote, ...]


# --- source stripping ------------------------------------------------------


def strip_comments_and_strings(source: str) -> str:
    """Remove //, /* */ comments and string/char literals from C/CUDA source.

    Newlines inside block comments are kept so line-oriented patterns still
    see the original line structure.  Escapes inside literals are honoured.
    """
    out: List[str] = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        nxt = source[i + 1] if i + 1 < n else ""
        if ch == "/" and nxt == "/":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch == "/" and nxt == "*":
            i += 2
            while i < n and not (source[i] == "*" and i + 1 < n and source[i + 1] == "/"):
                if source[i] == "\n":
                    out.append("\n")
                i += 1
            i += 2
            out.append(" ")
            continue
        if ch in ('"', "'"):
            quote = ch
            i += 1
            while i < n and source[i] != quote:
                if source[i] == "\\":
                    i += 1
                i += 1
            i += 1
            out.append(" ")
            continue
        out.append(ch)
        i += 1
    return "".join(out)


# --- rule patterns ---------------------------------------------------------


def _apply_pattern(feature: CodeFeatureDef, stripped: str):
    pattern = feature.pattern or {}
    kind = pattern.get("kind")
    if kind == "any_substring":
        return any(needle in stripped for needle in pattern.get("needles", []))
    if kind == "all_substrings":
        needles = pattern.get("needles", [])
        return bool(needles) and all(needle in stripped for needle in needles)
    if kind == "regex":
        return re.search(pattern.get("pattern", ""), stripped) is not None
    if kind == "regex_count":
        return len(re.findall(pattern.get("pattern", ""), stripped))
    if kind == "first_match_label":
        for rule in pattern.get("rules", []):
            if re.search(rule["pattern"], stripped):
                return rule["label"]
        return pattern.get("fallback", feature.default)
    raise MalformedDocument(
        f"code_features({feature.name})", f"unknown pattern kind {kind!r}"
    )


def extract_rule_features(kb: KnowledgeBase, source: str) -> Dict[str, object]:
    """Deterministic features from the stripped source."""
    stripped = strip_comments_and_strings(source)
    return {
        feature.name: _apply_pattern(feature, stripped)
        for feature in kb.code_features
        if feature.mode == "rule"
    }


# --- assisted features -----------------------------------------------------


def assisted_prompt(feature: CodeFeatureDef, source: str) -> str:
    """The question put to the assistant for one feature, raw source attached."""
    spec = feature.prompt_spec or {}
    cues = "".join(f"\n- {cue}" for cue in spec.get("cues", []))
    allowed = ", ".join(spec.get("allowed_values", []))
    return (
        f"Classify the code feature `{feature.name}`.\n"
        f"Definition: {spec.get('definition', '')}\n"
        f"Signals worth checking:{cues or ' (none listed)'}\n"
        f"Answer with exactly one of: {allowed}\n"
        "Put the answer alone inside a fenced block tagged `feature`.\n\n"
        "Source under review:\n"
        "```\n"
        f"{source}\n"
        "```\n"
    )


_FEATURE_BLOCK = re.compile(r"```feature\s*\n(.*?)```", re.DOTALL)


def parse_feature_response(text: str) -> Optional[str]:
    """Answer token from an assistant response.

    A fenced ```feature block wins; otherwise the last nonempty line is
    taken.  Returns None when there is nothing usable.
    """
    match = _FEATURE_BLOCK.search(text)
    if match:
        token = match.group(1).strip()
        return token or None
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    return lines[-1] if lines else None


def _coerce(feature: CodeFeatureDef, token: str):
    """Token -> domain value, or None when the answer is not admissible."""
    kind = feature.domain.kind
    if kind == "boolean":
        low = token.lower()
        if low in ("true", "yes"):
            return True
        if low in ("false", "no"):
            return False
        return None
    if kind == "count":
        try:
            value = int(token)
        except ValueError:
            return None
        return value if value >= 0 else None
    return token if token in feature.domain.labels else None


def extract_code_features(
    kb: KnowledgeBase, source: str, assistant: Optional[Assistant] = None
) -> FeatureExtraction:
    """All declared features for one source, rule and assisted combined.

    The result always carries every feature the KB declares.
    """
    values: Dict[str, object] = {}
    notes: List[ExtractionNote] = []
    rule_values = extract_rule_features(kb, source)
    for feature in kb.code_features:
        if feature.mode == "rule":
            values[feature.name] = rule_values[feature.name]
            notes.append(ExtractionNote(feature.name, "rule"))
            continue
        if assistant is None:
            values[feature.name] = feature.default
            notes.append(ExtractionNote(feature.name, "default", "no assistant configured"))
            continue
        try:
            response = assistant(assisted_prompt(feature, source))
        except Exception as exc:
            values[feature.name] = feature.default
            notes.append(ExtractionNote(feature.name, "default", f"assistant failed: {exc}"))
            continue
        token = parse_feature_response(response or "")
        coerced = _coerce(feature, token) if token is not None else None
        if coerced is None:
            values[feature.name] = feature.default
            notes.append(
                ExtractionNote(feature.name, "default", f"inadmissible answer {token!r}")
            )
        else:
            values[feature.name] = coerced
            notes.append(ExtractionNote(feature.name, "assisted"))
    return FeatureExtraction(values=values, notes=tuple(notes))
