"""Uniform-frequency response simulation after a single-unit outage.

The island is reduced to one frequency state: the remaining online units
contribute stored energy 2*H_tilde and governor power through second-order
turbine-governor blocks, the lost unit's output enters as a load step, and
an optional staged UFLS engine sheds load on persistent threshold
violations. Everything is integrated with fixed-step RK4 so runs are
bit-reproducible; batches of incidents integrate data-parallel in chunks
over a shared unit universe.

Conventions: dw is frequency deviation in p.u. of f_nominal, governor
outputs dp_i are in p.u. of the unit's own base M_i and are weighted by
M_i/S in the swing equation, load steps are in p.u. of S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptyIsland, NumericalBlowup, ValidationError
from .grid_model import GeneratorSpec, SystemSpec

BLOWUP_LIMIT = 0.5  # p.u.; beyond this the uniform-frequency model is meaningless
_BOUND_TOL = 1e-6


# -- domain types --------------------------------------------------------------

@dataclass(frozen=True)
class OperatingPoint:
    """Online units with their dispatch at one hour, plus system context."""

    units: tuple[GeneratorSpec, ...]
    p: tuple[float, ...]  # MW, aligned with units
    demand: float  # MW
    system: SystemSpec
    hour: int = 0

    def __post_init__(self):
        if len(self.units) != len(self.p):
            raise ValidationError(
                f"operating point has {len(self.units)} units but {len(self.p)} outputs")
        if self.demand <= 0:
            raise ValidationError(f"demand must be positive, got {self.demand}")
        for gen, out in zip(self.units, self.p):
            if not gen.p_min - _BOUND_TOL <= out <= gen.p_max + _BOUND_TOL:
                raise ValidationError(
                    f"unit {gen.id}: output {out} outside [{gen.p_min}, {gen.p_max}]")

    @property
    def online(self) -> tuple[str, ...]:
        return tuple(g.id for g in self.units)

    def output_of(self, unit_id: str) -> float:
        for gen, out in zip(self.units, self.p):
            if gen.id == unit_id:
                return out
        raise ValidationError(f"unit {unit_id} is not online at hour {self.hour}")


@dataclass(frozen=True)
class UFLSStage:
    f_threshold: float  # Hz
    rocof_threshold: float  # Hz/s
    shed_fraction: float  # of the currently connected load
    delay_s: float


@dataclass(frozen=True)
class UFLSStageTable:
    stages: tuple[UFLSStage, ...]

    def __post_init__(self):
        prev = math.inf
        for k, st in enumerate(self.stages):
            if not 0.0 < st.shed_fraction <= 1.0:
                raise ValidationError(
                    f"UFLS stage {k}: shed fraction {st.shed_fraction} not in (0, 1]")
            if st.f_threshold > prev:
                raise ValidationError(
                    f"UFLS stage {k}: threshold {st.f_threshold} Hz above stage {k - 1}")
            if st.delay_s < 0:
                raise ValidationError(f"UFLS stage {k}: negative delay {st.delay_s}")
            prev = st.f_threshold

    @classmethod
    def from_rows(cls, rows) -> "UFLSStageTable":
        return cls(tuple(UFLSStage(*map(float, r)) for r in rows))

    def __len__(self) -> int:
        return len(self.stages)


@dataclass(frozen=True)
class SimOptions:
    dt: float = 1e-3  # s
    horizon: float = 15.0  # s
    ufls: bool = False
    stages: UFLSStageTable | None = None
    rocof_window: float = 0.5  # s, sliding regression window
    anti_windup: bool = False  # freeze governor states while saturated
    strict: bool = False  # raise NumericalBlowup instead of flagging

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0:
            raise ValidationError("dt and horizon must be positive")
        if self.ufls and (self.stages is None or not self.stages.stages):
            raise ValidationError("ufls enabled but no stage table given")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class FrequencyTrace:
    """Sampled post-outage response. f[0] = f_nominal; an unstable trace is
    truncated at the sample where |dw| first left the validity region."""

    dt: float
    f: np.ndarray  # Hz, shape (samples,)
    dp: np.ndarray  # p.u. per governor, shape (samples, n_units)
    unit_ids: tuple[str, ...]
    f_nominal: float
    shed_events: tuple[tuple[float, float, int], ...] = ()  # (time s, MW, stage)
    unstable: bool = False

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.f)) * self.dt

    @property
    def ufls_total(self) -> float:
        return sum(mw for _, mw, _ in self.shed_events)


@dataclass(frozen=True)
class FrequencyMetrics:
    nadir: float  # Hz
    qss: float  # Hz
    rocof: float  # Hz/s, most negative windowed slope
    ufls_total: float  # MW
    unstable: bool = False


# -- aggregate quantities -------------------------------------------------------

def equivalent_inertia(units, s_base: float) -> float:
    """sum(H_i * M_i) / S over the online units [s]."""
    units = list(units)
    if not units:
        raise EmptyIsland("no unit online; equivalent inertia undefined")
    return sum(g.inertia_h * g.m_base for g in units) / s_base


def total_gain(units, s_base: float) -> float:
    """sum(k_i * M_i) / S, the aggregate steady-state governor gain [p.u.]."""
    return sum(g.gov_gain * g.m_base for g in units) / s_base


# -- governor bank --------------------------------------------------------------

def _governor_ss(gen: GeneratorSpec):
    """State-space (A, B, C, D) of k(b2 s^2 + b1 s + 1)/(a2 s^2 + a1 s + 1),
    padded to 2 states. Validation guarantees properness (a2=0 -> b2=0)."""
    k, a1, a2, b1, b2 = gen.gov_gain, gen.gov_a1, gen.gov_a2, gen.gov_b1, gen.gov_b2
    if a2 > 0:
        d = k * b2 / a2
        a = np.array([[0.0, 1.0], [-1.0 / a2, -a1 / a2]])
        b = np.array([0.0, 1.0])
        c = np.array([(k / a2) * (1.0 - b2 / a2), (k / a2) * (b1 - b2 * a1 / a2)])
    elif a1 > 0:
        d = k * b1 / a1
        a = np.array([[-1.0 / a1, 0.0], [0.0, 0.0]])
        b = np.array([1.0, 0.0])
        c = np.array([(k / a1) * (1.0 - b1 / a1), 0.0])
    else:
        d = k
        a = np.zeros((2, 2))
        b = np.zeros(2)
        c = np.zeros(2)
    return a, b, c, d


@dataclass(frozen=True)
class _Bank:
    """Stacked governor state-space over a fixed unit universe."""

    ids: tuple[str, ...]
    a: np.ndarray  # (n, 2, 2)
    b: np.ndarray  # (n, 2)
    c: np.ndarray  # (n, 2)
    d: np.ndarray  # (n,)
    dp_lo: np.ndarray  # (n,)
    dp_hi: np.ndarray  # (n,)
    m: np.ndarray  # (n,) machine bases
    index: dict[str, int] = field(hash=False, default_factory=dict)


def _make_bank(units: list[GeneratorSpec]) -> _Bank:
    mats = [_governor_ss(g) for g in units]
    return _Bank(
        ids=tuple(g.id for g in units),
        a=np.stack([m[0] for m in mats]),
        b=np.stack([m[1] for m in mats]),
        c=np.stack([m[2] for m in mats]),
        d=np.array([m[3] for m in mats]),
        dp_lo=np.array([g.dp_min for g in units]),
        dp_hi=np.array([g.dp_max for g in units]),
        m=np.array([g.m_base for g in units]),
        index={g.id: j for j, g in enumerate(units)},
    )


def _universe(cases) -> list[GeneratorSpec]:
    """Distinct units across a batch, ordered by id; same id must mean the
    same physical unit."""
    seen: dict[str, GeneratorSpec] = {}
    for op, _ in cases:
        for g in op.units:
            if g.id in seen and seen[g.id] != g:
                raise ValidationError(f"unit id {g.id} bound to two different specs")
            seen.setdefault(g.id, g)
    return [seen[i] for i in sorted(seen)]


# -- the integrator kernel ------------------------------------------------------

def _run_chunk(bank: _Bank, system: SystemSpec, cases, opts: SimOptions,
               record_dp: bool = False):
    """Integrate a chunk of incidents over a shared unit universe.

    Returns (f_series (I, steps+1), dp_series | None, stop (I,), unstable (I,),
    shed_mw (I,), events: list of per-incident event lists).
    """
    I = len(cases)
    n = len(bank.ids)
    steps = opts.n_steps
    dt = opts.dt
    f0 = system.f_nominal
    s_base = system.s_base
    d_load = system.load_damping

    weight = np.zeros((I, n))  # M_i/S for remaining units, 0 otherwise
    dp_hi = np.broadcast_to(bank.dp_hi, (I, n)).copy()
    htilde = np.empty(I)
    delta_d = np.empty(I)  # p.u. of S, grows down as UFLS sheds
    load_mw = np.empty(I)
    for r, (op, lost) in enumerate(cases):
        if lost not in op.online:
            raise ValidationError(f"lost unit {lost} is not online at hour {op.hour}")
        remaining = [(g, out) for g, out in zip(op.units, op.p) if g.id != lost]
        if not remaining:
            raise EmptyIsland(f"outage of {lost} leaves no unit online at hour {op.hour}")
        htilde[r] = equivalent_inertia([g for g, _ in remaining], s_base)
        delta_d[r] = op.output_of(lost) / s_base
        load_mw[r] = op.demand
        for g, out in remaining:
            j = bank.index[g.id]
            weight[r, j] = g.m_base / s_base
            dp_hi[r, j] = min(g.dp_max, (g.p_max - out) / g.m_base)

    stages = opts.stages.stages if opts.ufls else ()
    ns = len(stages)
    if ns:
        thr_f = np.array([s.f_threshold for s in stages])
        thr_r = np.array([s.rocof_threshold for s in stages])
        frac = np.array([s.shed_fraction for s in stages])
        delay = np.array([s.delay_s for s in stages])
        timers = np.zeros((I, ns))
        fired = np.zeros((I, ns), dtype=bool)
    shed_mw = np.zeros(I)
    events: list[list[tuple[float, float, int]]] = [[] for _ in range(I)]

    x = np.zeros((I, n, 2))
    w = np.zeros(I)
    act = np.ones(I, dtype=bool)
    blown = np.zeros(I, dtype=bool)
    stop = np.full(I, steps, dtype=int)
    f_series = np.empty((I, steps + 1))
    f_series[:, 0] = f0
    dp_series = np.zeros((I, steps + 1, n)) if record_dp else None

    two_h = 2.0 * htilde
    a_t = np.swapaxes(bank.a, 1, 2)  # x @ a_t == A x per unit

    def output(xs, ws):
        y = np.einsum("nk,ink->in", bank.c, xs) - bank.d * ws[:, None]
        return np.clip(y, bank.dp_lo, dp_hi)

    def deriv(xs, ws):
        y = output(xs, ws)
        acc = ((y * weight).sum(axis=1) - delta_d - d_load * ws) / two_h
        xdot = np.einsum("ink,nkl->inl", xs, a_t) - bank.b * ws[:, None, None]
        if opts.anti_windup:
            raw = np.einsum("nk,ink->in", bank.c, xs) - bank.d * ws[:, None]
            xdot = np.where(((raw > dp_hi) | (raw < bank.dp_lo))[:, :, None], 0.0, xdot)
        return xdot, acc

    for step in range(steps):
        k1x, k1w = deriv(x, w)
        if ns:
            # persistence timers sampled once per step at the step's start state
            f_now = f0 * (1.0 + w)
            rocof_now = f0 * k1w
            cond = (f_now[:, None] < thr_f) | (rocof_now[:, None] < thr_r)
            cond &= act[:, None]
            timers = np.where(cond, timers + dt, 0.0)
            fire = cond & ~fired & (timers >= delay)
            if fire.any():
                for r, s in zip(*np.nonzero(fire)):
                    mw = frac[s] * (load_mw[r] - shed_mw[r])
                    shed_mw[r] += mw
                    delta_d[r] -= mw / s_base
                    events[r].append((step * dt, float(mw), int(s)))
                fired |= fire
                k1x, k1w = deriv(x, w)  # load step applies within this step
        k2x, k2w = deriv(x + 0.5 * dt * k1x, w + 0.5 * dt * k1w)
        k3x, k3w = deriv(x + 0.5 * dt * k2x, w + 0.5 * dt * k2w)
        k4x, k4w = deriv(x + dt * k3x, w + dt * k3w)
        xn = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        wn = w + (dt / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        x = np.where(act[:, None, None], xn, x)
        w = np.where(act, wn, w)
        f_series[:, step + 1] = f0 * (1.0 + w)
        if record_dp:
            dp_series[:, step + 1] = output(x, w)
        blow = act & (np.abs(w) > BLOWUP_LIMIT)
        if blow.any():
            stop[blow] = step + 1
            blown |= blow
            act &= ~blow
        if not act.any():
            break

    return f_series, dp_series, stop, blown, shed_mw, events


# -- public simulation API ------------------------------------------------------

def simulate_outage(op: OperatingPoint, lost_unit: str,
                    opts: SimOptions | None = None) -> FrequencyTrace:
    """Frequency trace for one outage; pure function of its inputs."""
    opts = opts or SimOptions()
    remaining = [g for g in op.units if g.id != lost_unit]
    bank = _make_bank(remaining) if remaining else _make_bank(list(op.units))
    f, dp, stop, unstable, _, events = _run_chunk(
        bank, op.system, [(op, lost_unit)], opts, record_dp=True)
    end = int(stop[0]) + 1
    trace = FrequencyTrace(
        dt=opts.dt,
        f=f[0, :end].copy(),
        dp=dp[0, :end].copy(),
        unit_ids=bank.ids,
        f_nominal=op.system.f_nominal,
        shed_events=tuple(events[0]),
        unstable=bool(unstable[0]),
    )
    if trace.unstable and opts.strict:
        raise NumericalBlowup(
            f"|dw| exceeded {BLOWUP_LIMIT} p.u. at t={stop[0] * opts.dt:.3f} s")
    return trace


def simulate_batch(cases, opts: SimOptions | None = None,
                   chunk_size: int = 512) -> list[FrequencyMetrics]:
    """Metrics for a batch of (OperatingPoint, lost_unit_id) incidents.

    Incidents are independent; they are integrated chunk-wise over the
    union of their units and reduced to metrics immediately, so memory
    stays bounded by the chunk. Order of results matches the input.
    """
    opts = opts or SimOptions()
    cases = list(cases)
    if not cases:
        return []
    system = cases[0][0].system
    for op, _ in cases:
        if op.system != system:
            raise ValidationError("all incidents in a batch must share one system")
    bank = _make_bank(_universe(cases))
    out: list[FrequencyMetrics] = []
    for lo in range(0, len(cases), chunk_size):
        part = cases[lo:lo + chunk_size]
        f, _, stop, unstable, shed, _ = _run_chunk(bank, system, part, opts)
        for r in range(len(part)):
            series = f[r, :int(stop[r]) + 1]
            out.append(_series_metrics(series, opts, float(shed[r]),
                                       bool(unstable[r])))
    return out


# -- metric extraction ----------------------------------------------------------

def _min_window_slope(f: np.ndarray, dt: float, window: float) -> float:
    """Most negative least-squares slope over every contiguous window of
    `window` seconds (all samples used, exact fit; cumulative sums on the
    deviation from f[0] keep the cancellation error tiny)."""
    m = len(f)
    if m < 2:
        return 0.0
    n = min(m, int(round(window / dt)) + 1)
    g = f - f[0]
    k = np.arange(m, dtype=float)
    cg = np.concatenate(([0.0], np.cumsum(g)))
    ckg = np.concatenate(([0.0], np.cumsum(k * g)))
    j = np.arange(m - n + 1, dtype=float)
    sg = cg[n:] - cg[: m - n + 1]
    skg = ckg[n:] - ckg[: m - n + 1]
    sum_m = 0.5 * n * (n - 1)
    sum_m2 = (n - 1) * n * (2 * n - 1) / 6.0
    sxx = sum_m2 - sum_m * sum_m / n
    sxy = skg - j * sg - sum_m * sg / n
    return float(np.min(sxy / (sxx * dt)))


def _series_metrics(f: np.ndarray, opts: SimOptions, ufls_mw: float,
                    unstable: bool) -> FrequencyMetrics:
    nadir = float(np.min(f))
    if unstable:
        qss = float(f[-1])
    else:
        n_q = min(len(f) - 1, int(round(1.0 / opts.dt)))
        qss = float(np.mean(f[len(f) - n_q - 1:]))
    rocof = _min_window_slope(f, opts.dt, opts.rocof_window)
    return FrequencyMetrics(nadir, qss, rocof, ufls_mw, unstable)


def extract_metrics(trace: FrequencyTrace, opts: SimOptions | None = None) -> FrequencyMetrics:
    """Reduce a trace to (nadir, qss, rocof, ufls_total); an unstable trace
    reports its last sample as qss and always labels unacceptable downstream."""
    opts = opts or SimOptions(dt=trace.dt)
    if opts.dt != trace.dt:
        opts = replace(opts, dt=trace.dt)
    return _series_metrics(trace.f, opts, trace.ufls_total, trace.unstable)


# -- exports ----------------------------------------------------------------------

def write_trace_csv(trace: FrequencyTrace, path: str):
    """CSV with columns time_s, f_hz, dp_<unit-id>... (dp in machine p.u.)."""
    with open(path, "w", encoding="utf-8") as fh:
        cols = ",".join(f"dp_{u}" for u in trace.unit_ids)
        fh.write(f"time_s,f_hz{',' + cols if cols else ''}\n")
        for k in range(len(trace.f)):
            row = [repr(k * trace.dt), repr(float(trace.f[k]))]
            row += [repr(float(v)) for v in trace.dp[k]]
            fh.write(",".join(row) + "\n")


def save_trace_archive(traces: dict[str, FrequencyTrace], path: str):
    """Compact binary archive of many traces, keyed by incident id."""
    payload: dict[str, np.ndarray] = {}
    for key, tr in traces.items():
        payload[f"{key}::f"] = tr.f
        payload[f"{key}::dp"] = tr.dp
        payload[f"{key}::meta"] = np.array(
            [tr.dt, tr.f_nominal, float(tr.unstable)])
        payload[f"{key}::units"] = np.array(tr.unit_ids)
        payload[f"{key}::shed"] = np.array(
            [(t, mw, float(s)) for t, mw, s in tr.shed_events]).reshape(-1, 3)
    np.savez_compressed(path, **payload)


def load_trace_archive(path: str) -> dict[str, FrequencyTrace]:
    data = np.load(path, allow_pickle=False)
    keys = sorted({name.split("::")[0] for name in data.files})
    out = {}
    for key in keys:
        dt, f_nom, unstable = data[f"{key}::meta"]
        shed = tuple((float(t), float(mw), int(s)) for t, mw, s in data[f"{key}::shed"])
        out[key] = FrequencyTrace(
            dt=float(dt),
            f=data[f"{key}::f"],
            dp=data[f"{key}::dp"],
            unit_ids=tuple(str(u) for u in data[f"{key}::units"]),
            f_nominal=float(f_nom),
            shed_events=shed,
            unstable=bool(unstable),
        )
    return out
