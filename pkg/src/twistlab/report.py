"""Pass/fail records shared by every verification routine."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence


@dataclass
class CheckRecord:
    name: str
    claim: str
    measured: float
    tolerance: float
    passed: bool
    detail: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "claim": self.claim,
            "measured": _jsonable(self.measured),
            "tolerance": _jsonable(self.tolerance),
            "pass": bool(self.passed),
            "detail": _jsonable(self.detail),
        }


@dataclass
class VerificationReport:
    title: str
    checks: list[CheckRecord] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(
        self,
        name: str,
        claim: str,
        measured: float,
        tolerance: float,
        passed: bool | None = None,
        **detail: Any,
    ) -> CheckRecord:
        """Record a check; by default it passes when ``measured <= tolerance``."""
        if passed is None:
            passed = bool(measured <= tolerance)
        rec = CheckRecord(name, claim, float(measured), float(tolerance), bool(passed), detail)
        self.checks.append(rec)
        return rec

    def extend(self, other: "VerificationReport") -> None:
        self.checks.extend(other.checks)
        for k, v in other.timings.items():
            self.timings[f"{other.title}/{k}"] = v
        self.notes.extend(other.notes)

    @contextmanager
    def timed(self, label: str) -> Iterator[None]:
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[label] = time.perf_counter() - t0

    def failures(self) -> list[CheckRecord]:
        return [c for c in self.checks if not c.passed]

    def as_dict(self) -> dict[str, Any]:
        return {
            "title": self.title,
            "pass": self.passed,
            "checks": [c.as_dict() for c in self.checks],
            "timings": self.timings,
            "notes": list(self.notes),
        }

    def summary_lines(self) -> list[str]:
        return [
            f"{'PASS' if c.passed else 'FAIL'} {c.name}: measured={c.measured:.3e} tol={c.tolerance:.3e}"
            for c in self.checks
        ]


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return {"re": _jsonable(x.real), "im": _jsonable(x.imag)}
    if hasattr(x, "item") and callable(x.item):
        return _jsonable(x.item())
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return x
    if isinstance(x, (bool, int, str)) or x is None:
        return x
    return str(x)


def write_json(path: Path, payload: dict[str, Any]) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def format_float(x: float) -> str:
    return repr(float(x))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
