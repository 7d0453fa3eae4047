"""Typed data model of the island system plus file ingestion.

The system lives in a single JSON document with sections ``system``,
``generators[]``, ``wind_scenarios[]``, ``ufls_stages[]`` and ``thresholds``
(schema shipped in docs/schema). Wind scenarios can alternatively be read
from a CSV with columns (hour, scenario_label, mw). All loaded objects are
frozen value types, safe to share read-only between workers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict, fields

from .errors import ParseError, SchemaError, ValidationError


@dataclass(frozen=True)
class GeneratorSpec:
    """Static data of one thermal unit.

    cost_quadratic is (a, b, c) with hourly cost a + b*p + c*p^2 [EUR/h].
    inertia_h [s] and the governor parameters are given on the machine base
    m_base [MW]; dp_min/dp_max clamp the governor output in p.u. of m_base.
    The governor transfer from -dw to dp is
    gov_gain*(gov_b2 s^2 + gov_b1 s + 1)/(gov_a2 s^2 + gov_a1 s + 1).
    """

    id: str
    p_min: float
    p_max: float
    ramp_up: float
    ramp_down: float
    min_up: int
    min_down: int
    startup_cost: float
    cost_quadratic: tuple[float, float, float]
    inertia_h: float
    m_base: float
    gov_gain: float
    gov_a1: float
    gov_a2: float
    gov_b1: float
    gov_b2: float
    dp_min: float
    dp_max: float

    def cost_at(self, p: float) -> float:
        a, b, c = self.cost_quadratic
        return a + b * p + c * p * p


@dataclass(frozen=True)
class SystemSpec:
    """System-wide constants: MVA base, nominal frequency, load damping,
    hourly demand and horizon length."""

    s_base: float
    f_nominal: float
    load_damping: float
    demand: tuple[float, ...]
    horizon: int


@dataclass(frozen=True)
class WindScenarioSet:
    """Labeled hourly wind production scenarios, equal horizon lengths."""

    scenarios: tuple[tuple[str, tuple[float, ...]], ...]

    @property
    def count(self) -> int:
        return len(self.scenarios)

    @property
    def horizon(self) -> int:
        return len(self.scenarios[0][1])

    def labels(self) -> list[str]:
        return [label for label, _ in self.scenarios]

    def by_label(self, label: str) -> tuple[float, ...]:
        for lab, w in self.scenarios:
            if lab == label:
                return w
        raise KeyError(label)


@dataclass(frozen=True)
class UncertaintyBox:
    """Per-hour wind box [w_lo, w_hi] around a nominal profile, with a
    cardinality budget: at most budget_gamma hours may sit away from
    nominal (at a bound)."""

    w_lo: tuple[float, ...]
    w_hi: tuple[float, ...]
    w_nom: tuple[float, ...]
    budget_gamma: int

    @property
    def horizon(self) -> int:
        return len(self.w_lo)


def _require(cond: bool, cls, msg: str):
    if not cond:
        raise cls(msg)


def _field(section: dict, name: str, kind, where: str):
    if name not in section:
        raise SchemaError(f"missing field '{name}' in {where}")
    val = section[name]
    if kind is float:
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise SchemaError(f"field '{name}' in {where} must be a number")
        return float(val)
    if kind is int:
        if not isinstance(val, int) or isinstance(val, bool):
            raise SchemaError(f"field '{name}' in {where} must be an integer")
        return val
    if kind is str:
        if not isinstance(val, str):
            raise SchemaError(f"field '{name}' in {where} must be a string")
        return val
    if kind is list:
        if not isinstance(val, list):
            raise SchemaError(f"field '{name}' in {where} must be a list")
        return val
    raise AssertionError(kind)


def validate_generator(g: GeneratorSpec):
    """Raise ValidationError naming the offending field."""
    u = g.id
    _require(0.0 <= g.p_min <= g.p_max, ValidationError,
             f"unit {u}: need 0 <= p_min <= p_max, got p_min={g.p_min}, p_max={g.p_max}")
    _require(g.ramp_up > 0, ValidationError, f"unit {u}: ramp_up must be > 0")
    _require(g.ramp_down > 0, ValidationError, f"unit {u}: ramp_down must be > 0")
    _require(g.min_up >= 1, ValidationError, f"unit {u}: min_up must be >= 1")
    _require(g.min_down >= 1, ValidationError, f"unit {u}: min_down must be >= 1")
    _require(g.inertia_h > 0, ValidationError, f"unit {u}: inertia_h must be > 0")
    _require(g.m_base > 0, ValidationError, f"unit {u}: m_base must be > 0")
    _require(g.gov_gain >= 0, ValidationError, f"unit {u}: gov_gain must be >= 0")
    _require(g.gov_a2 >= 0, ValidationError, f"unit {u}: gov_a2 must be >= 0")
    _require(g.dp_min <= 0 <= g.dp_max, ValidationError,
             f"unit {u}: need dp_min <= 0 <= dp_max")
    # a proper transfer function: numerator order cannot exceed denominator order
    if g.gov_a2 == 0 and g.gov_b2 != 0:
        raise ValidationError(f"unit {u}: gov_b2 != 0 requires gov_a2 > 0")
    if g.gov_a2 == 0 and g.gov_a1 == 0 and g.gov_b1 != 0:
        raise ValidationError(f"unit {u}: gov_b1 != 0 requires gov_a1 > 0")


def validate_system(s: SystemSpec):
    _require(s.s_base > 0, ValidationError, "system: s_base must be > 0")
    _require(s.f_nominal > 0, ValidationError, "system: f_nominal must be > 0")
    _require(s.load_damping >= 0, ValidationError, "system: load_damping must be >= 0")
    _require(s.horizon >= 1, ValidationError, "system: horizon must be >= 1")
    _require(len(s.demand) == s.horizon, ValidationError,
             f"system: demand has {len(s.demand)} entries, horizon is {s.horizon}")
    for t, d in enumerate(s.demand):
        _require(d > 0, ValidationError, f"system: demand at hour {t} must be > 0")


def validate_scenarios(ws: WindScenarioSet, horizon: int):
    _require(ws.count >= 1, SchemaError, "wind_scenarios: empty scenario list")
    seen = set()
    for label, w in ws.scenarios:
        _require(label not in seen, ValidationError,
                 f"wind_scenarios: duplicate label '{label}'")
        seen.add(label)
        _require(len(w) == horizon, ValidationError,
                 f"wind_scenarios: scenario '{label}' has {len(w)} hours, horizon is {horizon}")
        for t, v in enumerate(w):
            _require(v >= 0, ValidationError,
                     f"wind_scenarios: scenario '{label}' hour {t}: wind must be >= 0")


def _parse_generator(sec: dict, idx: int) -> GeneratorSpec:
    where = f"generators[{idx}]"
    cq = _field(sec, "cost_quadratic", list, where)
    if len(cq) != 3 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in cq):
        raise SchemaError(f"{where}: cost_quadratic must be [a, b, c]")
    return GeneratorSpec(
        id=_field(sec, "id", str, where),
        p_min=_field(sec, "p_min", float, where),
        p_max=_field(sec, "p_max", float, where),
        ramp_up=_field(sec, "ramp_up", float, where),
        ramp_down=_field(sec, "ramp_down", float, where),
        min_up=_field(sec, "min_up", int, where),
        min_down=_field(sec, "min_down", int, where),
        startup_cost=_field(sec, "startup_cost", float, where),
        cost_quadratic=(float(cq[0]), float(cq[1]), float(cq[2])),
        inertia_h=_field(sec, "inertia_h", float, where),
        m_base=_field(sec, "m_base", float, where),
        gov_gain=_field(sec, "gov_gain", float, where),
        gov_a1=_field(sec, "gov_a1", float, where),
        gov_a2=_field(sec, "gov_a2", float, where),
        gov_b1=_field(sec, "gov_b1", float, where),
        gov_b2=_field(sec, "gov_b2", float, where),
        dp_min=_field(sec, "dp_min", float, where),
        dp_max=_field(sec, "dp_max", float, where),
    )


def read_document(path: str) -> dict:
    """Parse the island JSON document; no validation beyond syntax."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: top level must be an object")
    return doc


def system_from_document(doc: dict) -> tuple[SystemSpec, list[GeneratorSpec], WindScenarioSet]:
    for sec in ("system", "generators", "wind_scenarios"):
        if sec not in doc:
            raise SchemaError(f"missing section '{sec}'")
    sysec = doc["system"]
    if not isinstance(sysec, dict):
        raise SchemaError("section 'system' must be an object")
    demand = _field(sysec, "demand", list, "system")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in demand):
        raise SchemaError("system: demand must be a list of numbers")
    system = SystemSpec(
        s_base=_field(sysec, "s_base", float, "system"),
        f_nominal=_field(sysec, "f_nominal", float, "system"),
        load_damping=_field(sysec, "load_damping", float, "system"),
        demand=tuple(float(v) for v in demand),
        horizon=_field(sysec, "horizon", int, "system"),
    )
    gsecs = doc["generators"]
    if not isinstance(gsecs, list) or not gsecs:
        raise SchemaError("section 'generators' must be a nonempty list")
    gens = [_parse_generator(sec, i) for i, sec in enumerate(gsecs)]
    ids = [g.id for g in gens]
    if len(set(ids)) != len(ids):
        raise ValidationError("generators: duplicate unit ids")

    wsecs = doc["wind_scenarios"]
    if not isinstance(wsecs, list):
        raise SchemaError("section 'wind_scenarios' must be a list")
    if not wsecs:
        raise SchemaError("wind_scenarios: empty scenario list")
    scen = []
    for i, sec in enumerate(wsecs):
        where = f"wind_scenarios[{i}]"
        if not isinstance(sec, dict):
            raise SchemaError(f"{where} must be an object")
        label = _field(sec, "label", str, where)
        mw = _field(sec, "mw", list, where)
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in mw):
            raise SchemaError(f"{where}: mw must be a list of numbers")
        scen.append((label, tuple(float(v) for v in mw)))
    ws = WindScenarioSet(scenarios=tuple(scen))

    validate_system(system)
    for g in gens:
        validate_generator(g)
    validate_scenarios(ws, system.horizon)
    return system, gens, ws


def load_system(path: str) -> tuple[SystemSpec, list[GeneratorSpec], WindScenarioSet]:
    """Load and validate the island document; returns (system, gens, scenarios)."""
    return system_from_document(read_document(path))


def system_to_document(system: SystemSpec, gens: list[GeneratorSpec],
                       ws: WindScenarioSet, extra: dict | None = None) -> dict:
    """Inverse of system_from_document (modulo key order); round-trips exactly."""
    doc = dict(extra or {})
    doc["system"] = {
        "s_base": system.s_base,
        "f_nominal": system.f_nominal,
        "load_damping": system.load_damping,
        "demand": list(system.demand),
        "horizon": system.horizon,
    }
    doc["generators"] = []
    for g in gens:
        rec = asdict(g)
        rec["cost_quadratic"] = list(g.cost_quadratic)
        doc["generators"].append(rec)
    doc["wind_scenarios"] = [{"label": lab, "mw": list(w)} for lab, w in ws.scenarios]
    return doc


def save_system(path: str, system: SystemSpec, gens: list[GeneratorSpec],
                ws: WindScenarioSet, extra: dict | None = None):
    with open(path, "w") as fh:
        json.dump(system_to_document(system, gens, ws, extra), fh, indent=2)
        fh.write("\n")


def load_wind_csv(path: str) -> WindScenarioSet:
    """Read scenarios from a CSV with header hour,scenario_label,mw."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: empty CSV")
    header = [h.strip() for h in rows[0]]
    if header != ["hour", "scenario_label", "mw"]:
        raise SchemaError(f"{path}: expected header hour,scenario_label,mw, got {','.join(header)}")
    per_label: dict[str, dict[int, float]] = {}
    order: list[str] = []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"{path}:{ln}: expected 3 columns")
        try:
            hour = int(row[0])
            mw = float(row[2])
        except ValueError as exc:
            raise ParseError(f"{path}:{ln}: {exc}") from exc
        label = row[1]
        if label not in per_label:
            per_label[label] = {}
            order.append(label)
        if hour in per_label[label]:
            raise ValidationError(f"{path}:{ln}: duplicate hour {hour} for scenario '{label}'")
        per_label[label][hour] = mw
    if not per_label:
        raise SchemaError(f"{path}: no data rows")
    scen = []
    for label in order:
        hours = per_label[label]
        T = len(hours)
        if sorted(hours) != list(range(T)):
            raise ValidationError(f"{path}: scenario '{label}' hours must be contiguous from 0")
        scen.append((label, tuple(hours[t] for t in range(T))))
    ws = WindScenarioSet(scenarios=tuple(scen))
    validate_scenarios(ws, ws.horizon)
    return ws


def scenario_envelope(ws: WindScenarioSet, gamma: int) -> UncertaintyBox:
    """Per-hour min/max/mean envelope of the scenario set; gamma is clipped
    to [0, horizon]. The box contains every input scenario pointwise."""
    if ws.count < 1:
        raise SchemaError("scenario_envelope: empty scenario set")
    T = ws.horizon
    cols = [[w[t] for _, w in ws.scenarios] for t in range(T)]
    lo = tuple(min(c) for c in cols)
    hi = tuple(max(c) for c in cols)
    nom = tuple(sum(c) / len(c) for c in cols)
    g = max(0, min(int(gamma), T))
    return UncertaintyBox(w_lo=lo, w_hi=hi, w_nom=nom, budget_gamma=g)


GENERATOR_FIELDS = tuple(f.name for f in fields(GeneratorSpec))
