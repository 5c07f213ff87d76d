"""Staged verse parsing: three sequenced LLM exchanges with typed artifacts.

Stage 1 translates and appreciates the verse, stage 2 extracts the key
visual elements with their symbolism, stage 3 expands everything into a
token-budgeted visual prompt.  Prompt templates live in assets/templates;
responses arrive in fenced JSON blocks parsed tolerantly with two retries
before giving up.  Key-element injection appends a "Must include" clause
that survives any budget truncation.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .backends.wire import estimate_tokens

__all__ = [
    "ParserError",
    "HaikuInput",
    "StageOneAnalysis",
    "KeyElement",
    "KeyElements",
    "EnhancedPrompt",
    "stage1_translate_appreciate",
    "stage2_extract_elements",
    "stage3_enhance",
    "inject_key_elements",
    "parse_haiku",
]

TOKEN_BUDGET = 225
_TEMPLATES = Path(__file__).parent / "assets" / "templates"
_RETRY_NOTE = (
    "Your previous reply could not be parsed. Respond ONLY with the fenced "
    "```json block described above, nothing else."
)
_TIGHTEN_NOTE = (
    "The scene_description was over budget. Shorten it to fit within {budget} "
    "tokens while keeping the key imagery."
)
_CLAUSE_PREFIX = "Must include: "


class ParserError(RuntimeError):
    pass


@dataclass(frozen=True)
class HaikuInput:
    text: str
    id: str = ""
    language_hint: Optional[str] = None

    def __post_init__(self):
        if not self.text.strip():
            raise ParserError("haiku text must be non-empty")
        if not self.id:
            object.__setattr__(self, "id", _slug(self.text))


def _slug(text: str) -> str:
    words = re.findall(r"[a-zA-Z]+", text.lower())[:4]
    return "-".join(words) if words else "haiku"


@dataclass(frozen=True)
class StageOneAnalysis:
    translation: str
    cultural_context: str
    appreciation: str
    attributed_poet: Optional[str] = None

    def __post_init__(self):
        if not self.translation.strip():
            raise ParserError("translation must be non-empty")


@dataclass(frozen=True)
class KeyElement:
    phrase: str
    symbolic_note: str = ""


@dataclass(frozen=True)
class KeyElements:
    elements: tuple
    emotional_themes: tuple = ()

    def __post_init__(self):
        elems = tuple(self.elements)
        if not elems:
            raise ParserError("at least one key element is required")
        seen = set()
        for e in elems:
            if not e.phrase.strip():
                raise ParserError("key element phrases must be non-empty")
            if e.phrase in seen:
                raise ParserError(f"duplicate key element phrase {e.phrase!r}")
            seen.add(e.phrase)
        object.__setattr__(self, "elements", elems)
        object.__setattr__(self, "emotional_themes", tuple(self.emotional_themes))

    @property
    def phrases(self) -> tuple:
        return tuple(e.phrase for e in self.elements)


@dataclass(frozen=True)
class EnhancedPrompt:
    text: str
    token_count: int
    key_elements_appended: bool = False

    def __post_init__(self):
        if not self.text.strip():
            raise ParserError("prompt text must be non-empty")


def _template(name: str) -> str:
    return (_TEMPLATES / name).read_text()


def _extract_json(text: str) -> dict:
    """Last fenced JSON block, tolerating a missing language tag."""
    blocks = re.findall(r"```(?:json)?\s*(.*?)```", text, re.S)
    candidates = blocks if blocks else [text]
    last_err = None
    for cand in reversed(candidates):
        cand = cand.strip()
        try:
            doc = json.loads(cand)
        except json.JSONDecodeError as exc:
            m = re.search(r"\{.*\}", cand, re.S)
            if not m:
                last_err = exc
                continue
            try:
                doc = json.loads(m.group(0))
            except json.JSONDecodeError as exc2:
                last_err = exc2
                continue
        if isinstance(doc, dict):
            return doc
    raise ParserError(f"no parseable JSON block in response: {last_err}")


def _exchange(llm, prompt: str, want_keys, retries: int = 2) -> dict:
    """One templated request with up to `retries` repair round-trips."""
    messages = [{"role": "user", "content": prompt}]
    attempt = 0
    while True:
        raw = llm.llm_complete(messages)
        try:
            doc = _extract_json(raw)
            missing = [k for k in want_keys if k not in doc]
            if missing:
                raise ParserError(f"response missing keys {missing}")
            return doc
        except ParserError:
            if attempt >= retries:
                raise
            attempt += 1
            messages = messages + [
                {"role": "assistant", "content": raw},
                {"role": "user", "content": _RETRY_NOTE},
            ]


def stage1_translate_appreciate(haiku: HaikuInput, llm) -> StageOneAnalysis:
    hint = f"(language hint: {haiku.language_hint})\n" if haiku.language_hint else ""
    prompt = _template("stage1.txt").format(haiku=haiku.text, language_hint=hint)
    doc = _exchange(llm, prompt, ("translation", "cultural_context", "appreciation"))
    poet = doc.get("attributed_poet") or None
    return StageOneAnalysis(
        translation=str(doc["translation"]),
        cultural_context=str(doc["cultural_context"]),
        appreciation=str(doc["appreciation"]),
        attributed_poet=str(poet) if poet else None,
    )


def stage2_extract_elements(haiku: HaikuInput, analysis: StageOneAnalysis, llm) -> KeyElements:
    prompt = _template("stage2.txt").format(
        haiku=haiku.text,
        translation=analysis.translation,
        appreciation=analysis.appreciation,
    )
    doc = _exchange(llm, prompt, ("elements", "emotional_themes"))
    raw = doc["elements"]
    if not isinstance(raw, list) or not raw:
        raise ParserError("elements must be a non-empty list")
    elems = []
    seen = set()
    for item in raw:
        if not isinstance(item, dict) or "phrase" not in item:
            raise ParserError(f"malformed element entry {item!r}")
        phrase = str(item["phrase"]).strip()
        if phrase in seen:  # dedupe, order preserved
            continue
        seen.add(phrase)
        elems.append(KeyElement(phrase=phrase, symbolic_note=str(item.get("symbolic_note", ""))))
    themes = tuple(str(t) for t in doc.get("emotional_themes", []))
    return KeyElements(tuple(elems), themes)


def _truncate_sentences(text: str, budget: int, count_tokens) -> str:
    sentences = re.split(r"(?<=[.!?])\s+", text.strip())
    out = ""
    for s in sentences:
        cand = (out + " " + s).strip()
        if count_tokens(cand) > budget:
            break
        out = cand
    if not out:  # no sentence boundary fits; hard word cut as last resort
        words = text.split()
        while words and count_tokens(" ".join(words)) > budget:
            words.pop()
        out = " ".join(words)
    if not out:
        raise ParserError("cannot fit any prompt content into the token budget")
    return out


def stage3_enhance(
    haiku: HaikuInput,
    analysis: StageOneAnalysis,
    elements: KeyElements,
    llm,
    count_tokens=estimate_tokens,
    budget: int = TOKEN_BUDGET,
) -> EnhancedPrompt:
    prompt = _template("stage3.txt").format(
        haiku=haiku.text,
        translation=analysis.translation,
        appreciation=analysis.appreciation,
        elements=", ".join(elements.phrases),
        budget=budget,
    )
    doc = _exchange(llm, prompt, ("scene_description",))
    text = str(doc["scene_description"]).strip()
    if count_tokens(text) > budget:
        # one re-request with a tighter instruction, then truncate
        doc = _exchange(
            llm,
            prompt + "\n" + _TIGHTEN_NOTE.format(budget=budget),
            ("scene_description",),
        )
        text = str(doc["scene_description"]).strip()
        if count_tokens(text) > budget:
            text = _truncate_sentences(text, budget, count_tokens)
    return EnhancedPrompt(text=text, token_count=count_tokens(text))


def inject_key_elements(
    prompt: EnhancedPrompt,
    elements: KeyElements,
    count_tokens=estimate_tokens,
    budget: int = TOKEN_BUDGET,
) -> EnhancedPrompt:
    """Append a protected "Must include: ..." clause listing every phrase."""
    clause = _CLAUSE_PREFIX + ", ".join(elements.phrases) + "."
    if prompt.key_elements_appended and clause in prompt.text:
        return prompt
    clause_tokens = count_tokens(clause)
    if clause_tokens > budget:
        raise ParserError(
            f"key-element clause alone needs {clause_tokens} tokens, budget is {budget}"
        )
    body = prompt.text
    if count_tokens(body + " " + clause) > budget:
        body = _truncate_sentences(body, budget - clause_tokens, count_tokens)
    text = (body + " " + clause).strip()
    return EnhancedPrompt(
        text=text, token_count=count_tokens(text), key_elements_appended=True
    )


def parse_haiku(
    haiku: HaikuInput,
    llm_stage12,
    llm_stage3=None,
    count_tokens=estimate_tokens,
    budget: int = TOKEN_BUDGET,
    disable_enhancement: bool = False,
    disable_key_elements: bool = False,
):
    """Full three-stage parse honoring the two ablation switches.

    Returns (analysis, elements, prompt).  With enhancement disabled the
    prompt is the raw verse (plus the elements clause unless that is also
    disabled); with key elements disabled the stage-3 text stands alone.
    """
    llm_stage3 = llm_stage3 or llm_stage12
    analysis = stage1_translate_appreciate(haiku, llm_stage12)
    elements = stage2_extract_elements(haiku, analysis, llm_stage12)
    if disable_enhancement:
        base = EnhancedPrompt(text=haiku.text, token_count=count_tokens(haiku.text))
    else:
        base = stage3_enhance(haiku, analysis, elements, llm_stage3, count_tokens, budget)
    if disable_key_elements:
        return analysis, elements, base
    return analysis, elements, inject_key_elements(base, elements, count_tokens, budget)
