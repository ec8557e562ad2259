"""
Structured-text (JSON) model documents.

The canonical form sorts components, failure modes and actions by id,
sorts every key, and omits empty optional fields, so two inputs that
describe the same model serialize to the same bytes.
"""

from __future__ import annotations

import json
from dataclasses import replace
from decimal import Decimal
from fractions import Fraction
from typing import Any, Dict, List

from ..core import (
    DEFAULT_SCALES, DIMENSIONS, SOLVER_ONLY_CODES, Component, Diagnostic, Dimension,
    FailureMode, FmecaModel, Level, Mitigation, PreventiveAction, RatingLevel, RatingScale,
    ValidationError, validate,
)
from .document import (
    SUPPORTED_VERSIONS, ModelDocument, ParseError, json_rational, parse_rational,
)

TOP_LEVEL_KEYS = frozenset({"version", "scales", "components", "failure_modes", "actions", "budget", "metadata"})
COMPONENT_KEYS = frozenset({"id", "name", "critical_threshold"})
FAILURE_MODE_KEYS = frozenset({
    "id", "component", "description", "function", "causes", "effects", "severity", "occurrence",
    "detectability", "critical_threshold", "recommended_actions", "alternative_groups",
})
ACTION_KEYS = frozenset({"id", "description", "cost", "mitigations"})
MITIGATION_KEYS = frozenset(d.value for d in DIMENSIONS)
LEVEL_KEYS = frozenset({"rank", "label", "description"})


class _Bad(Exception):
    def __init__(self, location: str, message: str, code: str = "invalid-value"):
        super().__init__(message)
        self.location = location
        self.message = message
        self.code = code


class _Decoder:
    def __init__(self, strict: bool):
        self.strict = strict
        self.diagnostics: List[Diagnostic] = []

    def error(self, location: str, message: str, code: str = "invalid-value") -> None:
        self.diagnostics.append(Diagnostic(Level.ERROR, code, message, location))

    def keys(self, obj: Dict[str, Any], allowed: frozenset, location: str) -> None:
        for key in sorted(set(obj) - allowed):
            level = Level.ERROR if self.strict else Level.WARNING
            self.diagnostics.append(Diagnostic(level, "unknown-key", f"unknown key {key!r}", location))

    # -- primitive readers; each raises _Bad with a location ----------------

    @staticmethod
    def obj(value, location) -> Dict[str, Any]:
        if not isinstance(value, dict):
            raise _Bad(location, "expected an object")
        return value

    @staticmethod
    def lst(value, location) -> list:
        if not isinstance(value, list):
            raise _Bad(location, "expected a list")
        return value

    @staticmethod
    def text(value, location, required=False) -> str:
        if value is None and not required:
            return ""
        if not isinstance(value, str):
            raise _Bad(location, "expected a string")
        return value

    @staticmethod
    def ident(value, location) -> str:
        if not isinstance(value, str) or not value.strip():
            raise _Bad(location, "expected a non-empty identifier string")
        return value

    @staticmethod
    def integer(value, location) -> int:
        if isinstance(value, bool):
            raise _Bad(location, "expected an integer")
        if isinstance(value, int):
            return value
        if isinstance(value, Decimal) and value == value.to_integral_value():
            return int(value)
        raise _Bad(location, "expected an integer")

    @staticmethod
    def rational(value, location) -> Fraction:
        try:
            return parse_rational(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise _Bad(location, str(exc)) from None

    @staticmethod
    def rank(scale: RatingScale, value, location) -> int:
        if isinstance(value, Decimal) and value == value.to_integral_value():
            value = int(value)
        try:
            return scale.resolve(value)
        except ValidationError as exc:
            code = "unknown-rank-label" if isinstance(value, str) else "invalid-value"
            raise _Bad(location, str(exc), code) from None

    # -- sections ----------------------------------------------------------

    def scales(self, raw) -> Dict[Dimension, RatingScale]:
        if raw is None:
            return dict(DEFAULT_SCALES)
        raw = self.obj(raw, "scales")
        self.keys(raw, MITIGATION_KEYS, "scales")
        scales = dict(DEFAULT_SCALES)
        for dim in DIMENSIONS:
            if dim.value not in raw:
                continue
            loc = f"scales.{dim.value}"
            levels = []
            for i, item in enumerate(self.lst(raw[dim.value], loc)):
                iloc = f"{loc}[{i}]"
                item = self.obj(item, iloc)
                self.keys(item, LEVEL_KEYS, iloc)
                levels.append(RatingLevel(
                    rank=self.integer(item.get("rank"), f"{iloc}.rank"),
                    label=self.text(item.get("label"), f"{iloc}.label", required=True),
                    description=self.text(item.get("description"), f"{iloc}.description"),
                ))
            if not levels:
                raise _Bad(loc, "scale needs at least one level", "invalid-scale")
            scales[dim] = RatingScale(dim, tuple(sorted(levels, key=lambda lv: lv.rank)))
        return scales

    def component(self, raw, location) -> Component:
        raw = self.obj(raw, location)
        self.keys(raw, COMPONENT_KEYS, location)
        threshold = raw.get("critical_threshold")
        return Component(
            id=self.ident(raw.get("id"), f"{location}.id"),
            name=self.text(raw.get("name"), f"{location}.name"),
            critical_threshold=None if threshold is None else self.integer(threshold, f"{location}.critical_threshold"),
        )

    def failure_mode(self, raw, location, scales, component_thresholds) -> FailureMode:
        raw = self.obj(raw, location)
        self.keys(raw, FAILURE_MODE_KEYS, location)
        fm_id = self.ident(raw.get("id"), f"{location}.id")
        component_id = self.ident(raw.get("component"), f"{location}.component")
        ranks = [self.rank(scales[d], raw.get(d.value), f"{location}.{d.value}") for d in DIMENSIONS]
        threshold = raw.get("critical_threshold")
        if threshold is None:
            threshold = component_thresholds.get(component_id)
            if threshold is None:
                raise _Bad(f"{location}.critical_threshold",
                           "no critical threshold on the failure mode or its component", "missing-threshold")
        else:
            threshold = self.integer(threshold, f"{location}.critical_threshold")
        recommended = tuple(self.ident(a, f"{location}.recommended_actions[{i}]")
                            for i, a in enumerate(self.lst(raw.get("recommended_actions", []),
                                                           f"{location}.recommended_actions")))
        groups = []
        for i, group in enumerate(self.lst(raw.get("alternative_groups", []), f"{location}.alternative_groups")):
            gloc = f"{location}.alternative_groups[{i}]"
            groups.append(tuple(sorted(self.ident(a, gloc) for a in self.lst(group, gloc))))
        return FailureMode(
            id=fm_id,
            component_id=component_id,
            severity=ranks[0],
            occurrence=ranks[1],
            detectability=ranks[2],
            critical_threshold=threshold,
            recommended_action_ids=tuple(sorted(recommended)),
            description=self.text(raw.get("description"), f"{location}.description"),
            function=self.text(raw.get("function"), f"{location}.function"),
            causes=self.text(raw.get("causes"), f"{location}.causes"),
            effects=self.text(raw.get("effects"), f"{location}.effects"),
            relation_groups=tuple(sorted(groups)),
        )

    def action(self, raw, location) -> PreventiveAction:
        raw = self.obj(raw, location)
        self.keys(raw, ACTION_KEYS, location)
        mitigations = {}
        mraw = self.obj(raw.get("mitigations", {}), f"{location}.mitigations")
        for fm_id in sorted(mraw):
            mloc = f"{location}.mitigations.{fm_id}"
            entry = self.obj(mraw[fm_id], mloc)
            self.keys(entry, MITIGATION_KEYS, mloc)
            deltas = [self.integer(entry.get(d.value, 0), f"{mloc}.{d.value}") for d in DIMENSIONS]
            mitigations[fm_id] = Mitigation(*deltas)
        if "cost" not in raw:
            raise _Bad(f"{location}.cost", "missing cost")
        return PreventiveAction(
            id=self.ident(raw.get("id"), f"{location}.id"),
            cost=self.rational(raw["cost"], f"{location}.cost"),
            mitigations=mitigations,
            description=self.text(raw.get("description"), f"{location}.description"),
        )

    def section(self, raw, name, reader) -> list:
        items = []
        for i, item in enumerate(self.lst(raw, name)):
            try:
                items.append(reader(item, f"{name}[{i}]"))
            except _Bad as bad:
                self.error(bad.location, bad.message, bad.code)
        return items


def decode_model(raw: Any, strict: bool = True) -> ModelDocument:
    """Build a document from already-decoded JSON data (``parse_float=Decimal``)."""
    dec = _Decoder(strict)
    try:
        raw = dec.obj(raw, "$")
        dec.keys(raw, TOP_LEVEL_KEYS, "$")
        version = raw.get("version")
        if version is None:
            raise _Bad("version", "missing format version", "version-mismatch")
        version = str(version)
        if version not in SUPPORTED_VERSIONS:
            raise _Bad("version", f"unsupported format version {version!r}", "version-mismatch")
        metadata = dec.obj(raw.get("metadata", {}), "metadata")
        if "budget" not in raw:
            raise _Bad("budget", "missing budget")
        budget = dec.rational(raw["budget"], "budget")
        scales = dec.scales(raw.get("scales"))
        components = dec.section(raw.get("components", []), "components", dec.component)
        thresholds = {c.id: c.critical_threshold for c in components if c.critical_threshold is not None}
        fms = dec.section(raw.get("failure_modes", []), "failure_modes",
                          lambda item, loc: dec.failure_mode(item, loc, scales, thresholds))
        actions = dec.section(raw.get("actions", []), "actions", dec.action)
    except _Bad as bad:
        dec.error(bad.location, bad.message, bad.code)
        raise ParseError(dec.diagnostics) from None

    if any(d.level is Level.ERROR for d in dec.diagnostics):
        raise ParseError(dec.diagnostics)
    model = FmecaModel(
        failure_modes=tuple(sorted(fms, key=lambda f: f.id)),
        actions=tuple(sorted(actions, key=lambda a: a.id)),
        budget=budget,
        components=tuple(sorted(components, key=lambda c: c.id)),
        scales=scales,
    )
    return finish(model, _plain(metadata), version, dec.diagnostics)


def finish(model: FmecaModel, metadata, version: str, diagnostics: List[Diagnostic]) -> ModelDocument:
    """Run model validation; anything but solver-only errors rejects the parse."""
    diagnostics = diagnostics + validate(model)
    if any(d.level is Level.ERROR and d.code not in SOLVER_ONLY_CODES for d in diagnostics):
        raise ParseError(diagnostics)
    return ModelDocument(model=model, metadata=metadata, format_version=version, diagnostics=diagnostics)


def _plain(value):
    # Decimal from parse_float -> canonical JSON-compatible values
    if isinstance(value, Decimal):
        return int(value) if value == value.to_integral_value() else str(value)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_plain(v) for v in value]
    return value


def loads(data: bytes) -> Any:
    if isinstance(data, (bytes, bytearray)):
        data = bytes(data).decode("utf-8-sig")
    return json.loads(data, parse_float=Decimal)


def parse_structured(data, strict: bool = True) -> ModelDocument:
    try:
        raw = loads(data)
    except UnicodeDecodeError as exc:
        raise ParseError([Diagnostic(Level.ERROR, "syntax-error", f"not UTF-8: {exc.reason}",
                                     f"byte {exc.start}")]) from None
    except json.JSONDecodeError as exc:
        raise ParseError([Diagnostic(Level.ERROR, "syntax-error", exc.msg,
                                     f"line {exc.lineno}, column {exc.colno}")]) from None
    except RecursionError:
        raise ParseError([Diagnostic(Level.ERROR, "syntax-error", "nesting too deep")]) from None
    return decode_model(raw, strict=strict)


# -- writing -----------------------------------------------------------------


def _scale_payload(scale: RatingScale) -> List[Dict[str, Any]]:
    out = []
    for lvl in scale.levels:
        item = {"rank": lvl.rank, "label": lvl.label}
        if lvl.description:
            item["description"] = lvl.description
        out.append(item)
    return out


def _fm_payload(fm: FailureMode) -> Dict[str, Any]:
    item: Dict[str, Any] = {
        "id": fm.id,
        "component": fm.component_id,
        "severity": fm.severity,
        "occurrence": fm.occurrence,
        "detectability": fm.detectability,
        "critical_threshold": fm.critical_threshold,
        "recommended_actions": sorted(fm.recommended_action_ids),
    }
    for key in ("description", "function", "causes", "effects"):
        if getattr(fm, key):
            item[key] = getattr(fm, key)
    if fm.relation_groups:
        item["alternative_groups"] = sorted(sorted(g) for g in fm.relation_groups)
    return item


def _action_payload(action: PreventiveAction) -> Dict[str, Any]:
    item: Dict[str, Any] = {"id": action.id, "cost": json_rational(action.cost)}
    if action.description:
        item["description"] = action.description
    mitigations = {}
    for fm_id, m in sorted(action.mitigations.items()):
        mitigations[fm_id] = {d.value: v for d, v in zip(DIMENSIONS, m.as_tuple()) if v}
    item["mitigations"] = mitigations
    return item


def model_payload(doc: ModelDocument) -> Dict[str, Any]:
    model = doc.model
    payload: Dict[str, Any] = {
        "version": doc.format_version,
        "budget": json_rational(model.budget),
        "scales": {d.value: _scale_payload(model.scales[d]) for d in DIMENSIONS},
        "components": [],
        "failure_modes": [_fm_payload(f) for f in sorted(model.failure_modes, key=lambda f: f.id)],
        "actions": [_action_payload(a) for a in sorted(model.actions, key=lambda a: a.id)],
    }
    for c in sorted(model.components, key=lambda c: c.id):
        item: Dict[str, Any] = {"id": c.id}
        if c.name:
            item["name"] = c.name
        if c.critical_threshold is not None:
            item["critical_threshold"] = c.critical_threshold
        payload["components"].append(item)
    if doc.metadata:
        payload["metadata"] = doc.metadata
    return payload


def dumps(payload: Any) -> bytes:
    return (json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def write_model(doc: ModelDocument) -> bytes:
    return dumps(model_payload(doc))


def canonical_model(model: FmecaModel) -> FmecaModel:
    """Sort every id collection so equal models compare equal."""
    return FmecaModel(
        failure_modes=tuple(sorted(
            (replace(fm, recommended_action_ids=tuple(sorted(fm.recommended_action_ids)),
                     relation_groups=tuple(sorted(tuple(sorted(g)) for g in fm.relation_groups)))
             for fm in model.failure_modes), key=lambda f: f.id)),
        actions=tuple(sorted((PreventiveAction(a.id, Fraction(a.cost), dict(sorted(a.mitigations.items())),
                                               a.description) for a in model.actions), key=lambda a: a.id)),
        budget=Fraction(model.budget),
        components=tuple(sorted(model.components, key=lambda c: c.id)),
        scales=dict(model.scales),
    )
