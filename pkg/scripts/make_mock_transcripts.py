#!/usr/bin/env python3
"""Regenerate the scripted LLM transcripts for the bundled sample verses.

The mock LLM replays responses keyed by a hash of the exact request, so
this script reconstructs each stage's request with the live templates,
records the curated response under that hash, and feeds the parsed result
forward to build the next stage's request.  Rerun it whenever the stage
templates change.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from poemscene.backends.mock import MockLlm  # noqa: E402
from poemscene.backends.wire import request_hash  # noqa: E402
from poemscene import parsing  # noqa: E402

ASSETS = Path(__file__).resolve().parents[1] / "src" / "poemscene" / "assets"

OLD_POND = "An old pond / a frog jumps in / the sound of water"

STAGE1_RESPONSE = """Here is the reading.

```json
{
 "translation": "An ancient pond; a frog leaps in — the sound of water.",
 "cultural_context": "A late seventeenth-century hokku in the karumi manner, steeped in Zen-inflected attention to the momentary; the pond evokes a temple garden long undisturbed.",
 "appreciation": "The stillness of the old pond is set against the sudden movement of the frog, evoking themes of timelessness and vitality: a single splash makes the silence audible, the ancient and the instantaneous meeting in one image.",
 "attributed_poet": "Matsuo Basho"
}
```"""

STAGE2_RESPONSE = """```json
{
 "elements": [
  {"phrase": "old pond", "symbolic_note": "stillness and the weight of accumulated time"},
  {"phrase": "frog jumping in", "symbolic_note": "life and vitality breaking the stillness"},
  {"phrase": "sound of water", "symbolic_note": "the vibrancy of a fleeting, impactful moment"}
 ],
 "emotional_themes": ["tranquility", "timelessness", "sudden awakening"]
}
```"""

STAGE3_RESPONSE = """```json
{
 "scene_description": "A secluded temple garden at dusk in early spring, centered on an ancient moss-rimmed pond whose dark green water lies mirror-still beneath overhanging maple branches. A small frog is caught mid-leap from a weathered grey stone at the bank, limbs outstretched toward the surface, where the first ring of ripples is just beginning to spread. Soft slanting light catches the droplets above the splash point. Wet stones, fallen petals, and faint mist at the water's far edge give the scene hushed depth; the atmosphere is serene, timeless, and quietly alive."
}
```"""


def main() -> None:
    transcripts = {}

    def record(messages, response):
        transcripts[request_hash({"messages": messages})] = response

    hint = ""
    p1 = parsing._template("stage1.txt").format(haiku=OLD_POND, language_hint=hint)
    record([{"role": "user", "content": p1}], STAGE1_RESPONSE)

    llm = MockLlm(transcripts)
    haiku = parsing.HaikuInput(OLD_POND, id="old-pond")
    analysis = parsing.stage1_translate_appreciate(haiku, llm)

    p2 = parsing._template("stage2.txt").format(
        haiku=OLD_POND, translation=analysis.translation, appreciation=analysis.appreciation
    )
    record([{"role": "user", "content": p2}], STAGE2_RESPONSE)
    llm.transcripts = transcripts
    elements = parsing.stage2_extract_elements(haiku, analysis, llm)

    p3 = parsing._template("stage3.txt").format(
        haiku=OLD_POND,
        translation=analysis.translation,
        appreciation=analysis.appreciation,
        elements=", ".join(elements.phrases),
        budget=parsing.TOKEN_BUDGET,
    )
    record([{"role": "user", "content": p3}], STAGE3_RESPONSE)
    llm.transcripts = transcripts
    prompt = parsing.stage3_enhance(haiku, analysis, elements, llm)
    final = parsing.inject_key_elements(prompt, elements)

    out = ASSETS / "transcripts" / "old_pond.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(transcripts, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(transcripts)} transcripts; final prompt {final.token_count} tokens")
    for phrase in elements.phrases:
        assert phrase in final.text, phrase


if __name__ == "__main__":
    main()
