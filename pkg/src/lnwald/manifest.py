"""Reproduction manifest: published artifacts mapped to CLI invocations and checks.

Each entry names an artifact, its acceptance criterion number (or ``None``),
a status, and a list of checks.  A check is either

* ``{"command": [...], "field": [...], ...}``: run ``lnwald <command>``, parse
  its JSON output, optionally pick the row of ``rows`` matching ``select``,
  follow ``field`` and compare with ``expected`` +- ``tolerance`` and/or the
  bounds ``lt``, ``le``, ``gt``, ``ge``; or
* ``{"pytest": "<node id>"}``: a check carried out by the test suite.
"""

from __future__ import annotations

import io
import json
import math
import os
import subprocess
import sys
from importlib import resources
from typing import Iterable, Optional

_BOUNDS = {
    "lt": lambda v, b: v < b,
    "le": lambda v, b: v <= b,
    "gt": lambda v, b: v > b,
    "ge": lambda v, b: v >= b,
}


def reproduce_manifest() -> dict:
    """The manifest as shipped in ``lnwald/data/reproduce_manifest.json``."""
    text = resources.files("lnwald").joinpath("data/reproduce_manifest.json").read_text()
    return json.loads(text)


def criterion_entries(manifest: Optional[dict] = None) -> dict:
    """Map criterion number to manifest entry id; raises if a criterion repeats."""
    manifest = manifest or reproduce_manifest()
    out = {}
    for e in manifest["entries"]:
        c = e.get("criterion")
        if c is None:
            continue
        if c in out:
            raise ValueError(f"criterion {c} appears in both {out[c]!r} and {e['id']!r}")
        out[c] = e["id"]
    return out


def _matches(row, select):
    for k, want in select.items():
        got = row.get(k)
        if isinstance(want, float) and isinstance(got, (int, float)):
            if not math.isclose(got, want, rel_tol=0, abs_tol=1e-12):
                return False
        elif got != want:
            return False
    return True


def extract(output: dict, check: dict) -> float:
    obj = output
    if "select" in check:
        rows = [r for r in output["rows"] if _matches(r, check["select"])]
        if len(rows) != 1:
            raise LookupError(f"select {check['select']} matched {len(rows)} rows")
        obj = rows[0]
    for key in check["field"]:
        obj = obj[key]
    return float(obj)


def evaluate(value: float, check: dict) -> bool:
    if not math.isfinite(value):
        return False
    ok = True
    if "expected" in check:
        ok &= abs(value - check["expected"]) <= check["tolerance"]
    for k, fn in _BOUNDS.items():
        if k in check:
            ok &= fn(value, check[k])
    return bool(ok)


def _describe(check):
    parts = []
    if "expected" in check:
        parts.append(f"{check['expected']} +- {check['tolerance']}")
    for k, sym in (("gt", ">"), ("ge", ">="), ("lt", "<"), ("le", "<=")):
        if k in check:
            parts.append(f"{sym} {check[k]}")
    return ", ".join(parts)


def run_manifest(ids: Optional[Iterable[str]] = None, include_tests: bool = False,
                 out=None, manifest: Optional[dict] = None) -> dict:
    """Execute the CLI checks of the manifest and print one line per check.

    Identical commands are run once.  ``pytest`` checks run only with
    ``include_tests`` and when the test file exists below the working
    directory; otherwise they are reported as skipped.
    """
    from .cli import main  # the CLI imports this module

    out = out or sys.stdout
    manifest = manifest or reproduce_manifest()
    wanted = set(ids) if ids else None
    cache = {}
    summary = {"passed": 0, "failed": 0, "skipped": 0}
    for e in manifest["entries"]:
        if wanted is not None and e["id"] not in wanted:
            continue
        if e["status"] == "not-implemented":
            out.write(f"[n/a ] {e['id']}: {e['reason']}\n")
            continue
        if not e.get("checks"):
            info = e.get("note") or e.get("expected_output", "no automated check")
            out.write(f"[info] {e['id']}: {info}\n")
            continue
        for check in e["checks"]:
            label = f"{e['id']} / {check.get('label', check.get('pytest', ''))}"
            if "pytest" in check:
                path = check["pytest"].split("::")[0]
                if not (include_tests and os.path.exists(path)):
                    summary["skipped"] += 1
                    out.write(f"[skip] {label} (test suite)\n")
                    continue
                rc = subprocess.call([sys.executable, "-m", "pytest", "-q", check["pytest"]],
                                     stdout=subprocess.DEVNULL)
                status = rc == 0
                out.write(f"[{'pass' if status else 'FAIL'}] {label}\n")
                summary["passed" if status else "failed"] += 1
                continue
            key = tuple(check["command"])
            if key not in cache:
                buf = io.StringIO()
                rc = main(list(key), out=buf)
                cache[key] = json.loads(buf.getvalue()) if rc == 0 else None
            try:
                value = extract(cache[key], check) if cache[key] is not None else math.nan
            except (LookupError, KeyError, TypeError, ValueError):
                value = math.nan
            status = evaluate(value, check)
            summary["passed" if status else "failed"] += 1
            out.write(f"[{'pass' if status else 'FAIL'}] {label}: {value:.4f} "
                      f"(target {_describe(check)})\n")
    out.write(f"{summary['passed']} passed, {summary['failed']} failed, "
              f"{summary['skipped']} skipped\n")
    return summary
