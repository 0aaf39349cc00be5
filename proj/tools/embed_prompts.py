#!/usr/bin/env python3
"""Regenerates src/prompt_texts.inc from the fixture files under prompts/."""
import pathlib

root = pathlib.Path(__file__).resolve().parent.parent
prompts = root / "prompts"


def body(path):
    lines = [l for l in path.read_text(encoding="utf-8").split("\n") if not l.startswith("#")]
    return "\n".join(lines).rstrip("\n")


def literal(text):
    return 'R"PROMPT(' + text + ')PROMPT"'


out = ["// Generated by tools/embed_prompts.py from prompts/. Do not edit."]
for f in sorted((prompts / "categories").glob("*.txt")):
    out.append(f'PROMPT_TEXT("categories/{f.name}", {literal(body(f))})')
for f in sorted((prompts / "tasks").glob("*.txt")):
    out.append(f'PROMPT_TEXT("tasks/{f.name}", {literal(body(f))})')
(root / "src" / "prompt_texts.inc").write_text("\n".join(out) + "\n", encoding="utf-8")
