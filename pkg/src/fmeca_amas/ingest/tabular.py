"""
Tabular-text (CSV) model documents, laid out like a classical FMECA sheet.

One row per (failure mode, recommended action); failure-mode columns are
repeated on every row of that failure mode, and a failure mode without
recommended actions gets a single row with empty action columns. Lines
starting with ``#`` before the header carry ``key: value`` directives
(``version``, ``budget``, ``meta.<key>``). Quoting follows RFC 4180.
"""

from __future__ import annotations

import csv
import io
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from ..core import (
    DEFAULT_SCALES, DIMENSIONS, Component, Diagnostic, FailureMode, FmecaModel, Level,
    Mitigation, PreventiveAction, ValidationError,
)
from .document import FORMAT_VERSION, SUPPORTED_VERSIONS, ModelDocument, ParseError, format_rational, parse_rational
from .structured import finish

COLUMNS = (
    "component", "function", "failure_mode", "description", "causes", "effects",
    "severity", "occurrence", "detectability", "criticality", "threshold",
    "action", "action_description",
    # extension columns (not part of a classical FMECA sheet)
    "cost", "delta_severity", "delta_occurrence", "delta_detectability",
)
REQUIRED_COLUMNS = ("component", "failure_mode", "severity", "occurrence", "detectability", "threshold")
FM_FIELDS = ("component", "function", "description", "causes", "effects",
             "severity", "occurrence", "detectability", "threshold")
ACTION_FIELDS = ("action_description", "cost")


def _decode(data) -> str:
    if isinstance(data, (bytes, bytearray)):
        return bytes(data).decode("utf-8-sig")
    return data


def parse_tabular(data, strict: bool = True) -> ModelDocument:
    try:
        text = _decode(data)
    except UnicodeDecodeError as exc:
        raise ParseError([Diagnostic(Level.ERROR, "syntax-error", f"not UTF-8: {exc.reason}",
                                     f"byte {exc.start}")]) from None

    diags: List[Diagnostic] = []

    def err(line: int, message: str, code: str = "invalid-value", column: str = "") -> None:
        where = f"line {line}" + (f", column {column}" if column else "")
        diags.append(Diagnostic(Level.ERROR, code, message, where))

    lines = text.splitlines(keepends=True)
    directives: Dict[str, Tuple[int, str]] = {}
    start = 0
    while start < len(lines) and (lines[start].startswith("#") or not lines[start].strip()):
        body = lines[start].lstrip("#").strip()
        if body and ":" in body:
            key, _, value = body.partition(":")
            directives[key.strip()] = (start + 1, value.strip())
        start += 1

    version = directives.get("version", (0, FORMAT_VERSION))[1]
    if version not in SUPPORTED_VERSIONS:
        err(directives["version"][0], f"unsupported format version {version!r}", "version-mismatch")
    budget = Fraction(0)
    if "budget" not in directives:
        err(1, "missing '# budget: <amount>' directive", "invalid-value")
    else:
        try:
            budget = parse_rational(directives["budget"][1])
        except (ValueError, ZeroDivisionError) as exc:
            err(directives["budget"][0], str(exc))
    default_threshold: Optional[int] = None
    if "default_threshold" in directives:
        try:
            default_threshold = int(directives["default_threshold"][1])
        except ValueError:
            err(directives["default_threshold"][0], "default_threshold must be an integer")
    metadata = {k[5:]: v for k, (_, v) in sorted(directives.items()) if k.startswith("meta.")}
    for key, (line, _) in sorted(directives.items()):
        if key not in ("version", "budget", "default_threshold") and not key.startswith("meta."):
            level = Level.ERROR if strict else Level.WARNING
            diags.append(Diagnostic(level, "unknown-key", f"unknown directive {key!r}", f"line {line}"))

    try:
        rows = list(csv.reader(io.StringIO("".join(lines[start:])), strict=True))
    except csv.Error as exc:
        raise ParseError(diags + [Diagnostic(Level.ERROR, "syntax-error", str(exc), "csv")]) from None
    if not rows:
        err(start + 1, "missing header row", "syntax-error")
        raise ParseError(diags)

    header = [h.strip() for h in rows[0]]
    header_line = start + 1
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        err(header_line, f"header lacks required columns: {', '.join(missing)}", "syntax-error")
    for col in header:
        if col not in COLUMNS:
            level = Level.ERROR if strict else Level.WARNING
            diags.append(Diagnostic(level, "unknown-key", f"unknown column {col!r}", f"line {header_line}"))
    if len(set(header)) != len(header):
        err(header_line, "duplicate column names", "syntax-error")
    if any(d.level is Level.ERROR for d in diags):
        raise ParseError(diags)

    fm_rows: Dict[str, Dict[str, str]] = {}
    fm_actions: Dict[str, List[str]] = {}
    fm_first_line: Dict[str, int] = {}
    action_rows: Dict[str, Dict[str, str]] = {}
    mitigations: Dict[str, Dict[str, Mitigation]] = {}
    components: Dict[str, Component] = {}

    for offset, row in enumerate(rows[1:], start=1):
        line = header_line + offset
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            err(line, f"expected {len(header)} fields, found {len(row)}", "syntax-error")
            continue
        rec = {h: cell.strip() for h, cell in zip(header, row)}
        fm_id = rec.get("failure_mode", "")
        if not fm_id:
            err(line, "empty failure_mode", column="failure_mode")
            continue
        if not rec.get("component"):
            err(line, "empty component", column="component")
            continue
        components.setdefault(rec["component"], Component(rec["component"]))
        fm_view = {k: rec.get(k, "") for k in FM_FIELDS}
        if fm_id in fm_rows:
            for k in FM_FIELDS:
                if fm_rows[fm_id][k] != fm_view[k]:
                    err(line, f"failure mode {fm_id!r} repeats with a different {k}", "inconsistent-row", k)
        else:
            fm_rows[fm_id] = fm_view
            fm_actions[fm_id] = []
            fm_first_line[fm_id] = line
        crit = rec.get("criticality", "")
        if crit:
            try:
                ranks = [DEFAULT_SCALES[d].resolve(rec[d.value]) for d in DIMENSIONS]
                if int(crit) != ranks[0] * ranks[1] * ranks[2]:
                    err(line, f"criticality {crit} is not S*O*D", "criticality-mismatch", "criticality")
            except (ValueError, ValidationError):
                pass  # rank errors are reported once per failure mode below
        action_id = rec.get("action", "")
        if not action_id:
            if any(rec.get(k) for k in ("action_description", "cost", "delta_severity",
                                         "delta_occurrence", "delta_detectability")):
                err(line, "action fields given without an action id", column="action")
            continue
        if action_id in fm_actions[fm_id]:
            err(line, f"action {action_id!r} listed twice for {fm_id!r}", "duplicate-id", "action")
            continue
        fm_actions[fm_id].append(action_id)
        action_view = {k: rec.get(k, "") for k in ACTION_FIELDS}
        if action_id in action_rows:
            for k in ACTION_FIELDS:
                if action_rows[action_id][k] != action_view[k]:
                    err(line, f"action {action_id!r} repeats with a different {k}", "inconsistent-row", k)
        else:
            action_rows[action_id] = dict(action_view, line=str(line))
        deltas = []
        for d in DIMENSIONS:
            raw = rec.get(f"delta_{d.value}", "") or "0"
            try:
                deltas.append(int(raw))
            except ValueError:
                err(line, f"delta_{d.value} must be an integer", column=f"delta_{d.value}")
                deltas.append(0)
        mitigations.setdefault(action_id, {})[fm_id] = Mitigation(*deltas)

    failure_modes = []
    for fm_id, view in fm_rows.items():
        line = fm_first_line[fm_id]
        ranks = []
        for d in DIMENSIONS:
            scale = DEFAULT_SCALES[d]
            try:
                rank = scale.resolve(view[d.value])
                if not scale.scale_min <= rank <= scale.scale_max:
                    raise ValidationError(f"{d.value} rank {rank} outside scale "
                                          f"[{scale.scale_min}, {scale.scale_max}]")
                ranks.append(rank)
            except ValidationError as exc:
                if "outside scale" in str(exc):
                    err(line, str(exc), "rank-out-of-scale", d.value)
                    ranks.append(scale.scale_min)
                    continue
                code = "unknown-rank-label" if view[d.value] and not view[d.value].lstrip("-").isdigit() \
                    else "invalid-value"
                err(line, str(exc), code, d.value)
                ranks.append(DEFAULT_SCALES[d].scale_min)
        if view["threshold"]:
            try:
                threshold = int(view["threshold"])
            except ValueError:
                err(line, "threshold must be an integer", column="threshold")
                threshold = 1
        elif default_threshold is not None:
            threshold = default_threshold
        else:
            err(line, "empty threshold and no default_threshold directive", "missing-threshold", "threshold")
            threshold = 1
        failure_modes.append(FailureMode(
            id=fm_id, component_id=view["component"],
            severity=ranks[0], occurrence=ranks[1], detectability=ranks[2],
            critical_threshold=threshold,
            recommended_action_ids=tuple(sorted(fm_actions[fm_id])),
            description=view["description"], function=view["function"],
            causes=view["causes"], effects=view["effects"],
        ))

    actions = []
    for action_id, view in action_rows.items():
        cost = Fraction(0)
        if not view["cost"]:
            err(int(view["line"]), f"action {action_id!r} has no cost", column="cost")
        else:
            try:
                cost = parse_rational(view["cost"])
            except (ValueError, ZeroDivisionError) as exc:
                err(int(view["line"]), str(exc), column="cost")
        actions.append(PreventiveAction(action_id, cost, dict(sorted(mitigations[action_id].items())),
                                        view["action_description"]))

    if any(d.level is Level.ERROR for d in diags):
        raise ParseError(diags)
    model = FmecaModel(
        failure_modes=tuple(sorted(failure_modes, key=lambda f: f.id)),
        actions=tuple(sorted(actions, key=lambda a: a.id)),
        budget=budget,
        components=tuple(sorted(components.values(), key=lambda c: c.id)),
        scales=dict(DEFAULT_SCALES),
    )
    return finish(model, metadata, version, diags)


def write_tabular(doc: ModelDocument) -> bytes:
    """Serialize to the tabular dialect.

    Only what the sheet can hold is written: component names, custom
    scales and alternative groups have no column and are dropped.
    """
    model = doc.model
    buf = io.StringIO()
    buf.write(f"# version: {doc.format_version}\n")
    buf.write(f"# budget: {format_rational(model.budget)}\n")
    for key, value in sorted(doc.metadata.items()):
        buf.write(f"# meta.{key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for fm in sorted(model.failure_modes, key=lambda f: f.id):
        base = [fm.component_id, fm.function, fm.id, fm.description, fm.causes, fm.effects,
                fm.severity, fm.occurrence, fm.detectability,
                fm.severity * fm.occurrence * fm.detectability, fm.critical_threshold]
        if not fm.recommended_action_ids:
            writer.writerow(base + [""] * 6)
            continue
        for action_id in sorted(fm.recommended_action_ids):
            action = model.action(action_id)
            m = action.mitigations.get(fm.id, Mitigation())
            writer.writerow(base + [action.id, action.description, format_rational(action.cost),
                                    m.severity, m.occurrence, m.detectability])
    return buf.getvalue().encode("utf-8")
