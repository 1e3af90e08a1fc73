"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

from __future__ import annotations

LINES: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}"
    if detail:
        line += f" ({detail})"
    LINES[number] = line
    print(line)
    return ok
