"""Uniform machine-readable report shared by every verdict-producing command."""
from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import dataclass, field
from typing import Optional

STATUSES = ("pass", "fail", "inconclusive")


@dataclass
class Check:
    id: str
    target: str
    mode: str  # symbolic | numeric
    status: str  # pass | fail | inconclusive
    max_residual: Optional[float] = None
    tolerance: Optional[float] = None
    samples: Optional[int] = None
    seed: Optional[int] = None
    location: Optional[dict] = None
    note: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"bad status {self.status!r}")

    def to_dict(self) -> dict:
        r = self.max_residual
        if r is not None and not math.isfinite(r):
            r = str(r)
        return {"id": self.id, "target": self.target, "mode": self.mode, "status": self.status,
                "max_residual": r, "tolerance": self.tolerance, "samples": self.samples,
                "seed": self.seed, "location": self.location}


def status_from(ok: bool) -> str:
    return "pass" if ok else "fail"


def merge_status(statuses) -> str:
    statuses = list(statuses)
    if "fail" in statuses:
        return "fail"
    if "inconclusive" in statuses:
        return "inconclusive"
    return "pass"


@dataclass
class Report:
    command: str
    config: dict
    checks: list = field(default_factory=list)
    details: list = field(default_factory=list)

    def add(self, *checks: Check) -> "Report":
        self.checks.extend(checks)
        return self

    def extend(self, checks) -> "Report":
        self.checks.extend(checks)
        return self

    @property
    def summary(self) -> dict:
        out = {s: 0 for s in STATUSES}
        for c in self.checks:
            out[c.status] += 1
        return out

    def exit_code(self, strict: bool = False) -> int:
        s = self.summary
        if s["fail"]:
            return 1
        if strict and s["inconclusive"]:
            return 3
        return 0

    def to_dict(self, timestamp: bool = True) -> dict:
        d = {"command": self.command, "config": self.config,
             "checks": [c.to_dict() for c in self.checks], "summary": self.summary}
        if self.details:
            d["details"] = self.details
        if timestamp:
            d["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        return d

    def to_json(self, timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(timestamp), indent=2, ensure_ascii=False) + "\n"

    def render_text(self) -> str:
        lines = [f"{self.command}: " + ", ".join(f"{k}={v}" for k, v in self.config.items())]
        for c in self.checks:
            res = "" if c.max_residual is None else f" max_residual={c.max_residual:.3g}"
            tol = "" if c.tolerance is None else f" tol={c.tolerance:g}"
            smp = "" if c.samples is None else f" samples={c.samples}"
            lines.append(f"  [{c.status.upper():>12}] {c.id} -> {c.target} ({c.mode}){res}{tol}{smp}")
            if c.note:
                lines.append(f"                 {c.note}")
        for d in self.details:
            if isinstance(d, dict) and "text" in d:
                lines.extend("  " + t for t in d["text"].splitlines())
        s = self.summary
        lines.append(f"summary: pass={s['pass']} fail={s['fail']} inconclusive={s['inconclusive']}")
        return "\n".join(lines) + "\n"
