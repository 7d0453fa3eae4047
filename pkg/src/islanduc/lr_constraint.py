"""Incident dataset, logistic acceptability model, and cut-point mapping.

An incident is one simulated single-unit outage described by five dispatch
features: xi1 remaining stored energy [MW*s], xi2 remaining governor gain
[p.u.], xi3 lost power [MW], xi4 lost share of demand [-], xi5 remaining
headroom [MW]. The label is 1 when the frequency response clears all three
acceptability thresholds. The logit model over raw (unstandardized)
features feeds build_lr_block directly, so no scaling metadata needs to
travel with the coefficients.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy import stats as scistats

from .errors import (DegenerateLabels, EmptyDataset, FitNonConvergence,
                     ParseError, SchemaError, ValidationError, ZeroVariance)
from .sfr_simulator import FrequencyMetrics, OperatingPoint
from .uc_formulation import LRModel, unit_gain_share, unit_inertia_mws

FEATURE_COLUMNS = ("xi1_mws", "xi2_pu", "xi3_mw", "xi4", "xi5_mw")
DATASET_HEADER = FEATURE_COLUMNS + ("label", "reserve", "scenario", "hour", "unit")


# -- domain types ---------------------------------------------------------------

@dataclass(frozen=True)
class AcceptabilityThresholds:
    nadir_min: float = 47.5  # Hz
    rocof_min: float = -0.5  # Hz/s
    qss_min: float = 49.6  # Hz

    def __post_init__(self):
        if not self.nadir_min < self.qss_min:
            raise ValidationError(
                f"nadir_min {self.nadir_min} must lie below qss_min {self.qss_min}")


@dataclass(frozen=True)
class Incident:
    xi1: float
    xi2: float
    xi3: float
    xi4: float
    xi5: float
    label: int
    reserve: float  # reserve multiplier the commitment was solved with
    scenario: str
    hour: int
    unit: str  # the lost unit

    @property
    def provenance(self) -> tuple:
        return (self.reserve, self.scenario, self.hour, self.unit)

    @property
    def features(self) -> tuple[float, float, float, float, float]:
        return (self.xi1, self.xi2, self.xi3, self.xi4, self.xi5)


@dataclass(frozen=True)
class Dataset:
    incidents: tuple[Incident, ...]

    def __len__(self) -> int:
        return len(self.incidents)

    @property
    def features(self) -> np.ndarray:
        return np.array([inc.features for inc in self.incidents], dtype=float)

    @property
    def labels(self) -> np.ndarray:
        return np.array([inc.label for inc in self.incidents], dtype=float)


@dataclass(frozen=True)
class FitReport:
    coefficients: tuple[float, ...]  # intercept first
    iterations: int
    nll: float  # final penalized negative log-likelihood
    grad_norm: float  # per-sample gradient two-norm at the last iterate
    accuracy: float  # at cut-point 0
    auc: float
    converged: bool
    nll_path: tuple[float, ...] = ()

    def to_model(self, psi: float = 0.0) -> LRModel:
        if len(self.coefficients) != 6:
            raise ValidationError(
                f"need 5 features for a security model, fit has {len(self.coefficients) - 1}")
        return LRModel(*self.coefficients, psi=psi)


# -- features and labels ----------------------------------------------------------

def incident_features(units, outputs, demand: float, s_base: float,
                      lost_id: str) -> tuple[float, float, float, float, float]:
    """Five features of losing `lost_id` given the online units and their
    dispatch; the lost unit itself is excluded from the remaining-system
    aggregates."""
    if demand <= 0:
        raise ValidationError(f"demand must be positive, got {demand}")
    xi1 = xi2 = xi5 = 0.0
    xi3 = None
    for gen, p in zip(units, outputs):
        if gen.id == lost_id:
            xi3 = float(p)
            continue
        xi1 += unit_inertia_mws(gen)
        xi2 += unit_gain_share(gen, s_base)
        xi5 += gen.p_max - p
    if xi3 is None:
        raise ValidationError(f"lost unit {lost_id} is not among the online units")
    return (xi1, xi2, xi3, xi3 / demand, xi5)


def features_from_op(op: OperatingPoint, lost_id: str):
    return incident_features(op.units, op.p, op.demand, op.system.s_base, lost_id)


def label_incident(m: FrequencyMetrics, th: AcceptabilityThresholds) -> int:
    """1 iff every threshold is met (boundary values acceptable); unstable
    traces are unacceptable unconditionally."""
    if m.unstable:
        return 0
    ok = m.nadir >= th.nadir_min and m.rocof >= th.rocof_min and m.qss >= th.qss_min
    return 1 if ok else 0


def build_dataset(incidents) -> Dataset:
    """Dense incident table deduplicated by provenance (first occurrence
    wins); warns DegenerateLabels when only one class is present."""
    seen: dict[tuple, Incident] = {}
    for inc in incidents:
        seen.setdefault(inc.provenance, inc)
    if not seen:
        raise EmptyDataset("incident stream produced no rows")
    rows = tuple(seen.values())
    classes = {inc.label for inc in rows}
    if len(classes) == 1:
        warnings.warn(DegenerateLabels(
            f"dataset has a single class ({classes.pop()}); fits on it will fail"))
    return Dataset(rows)


# -- statistics -------------------------------------------------------------------

def pearson(x, y) -> float:
    """Product-moment correlation; refuses constant columns."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValidationError(f"length mismatch {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ZeroVariance("correlation needs at least two samples")
    dx = x - x.mean()
    dy = y - y.mean()
    vx = float(dx @ dx)
    vy = float(dy @ dy)
    if vx == 0.0 or vy == 0.0:
        raise ZeroVariance("correlation is undefined for a constant column")
    return float((dx @ dy) / math.sqrt(vx * vy))


def mann_whitney_auc(scores, labels) -> float:
    """AUC as the Mann-Whitney rank statistic with tie averaging."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n1 = int(np.sum(labels == 1))
    n0 = len(labels) - n1
    if n0 == 0 or n1 == 0:
        raise DegenerateLabels("AUC undefined with a single class")
    ranks = scistats.rankdata(scores)
    r1 = float(np.sum(ranks[labels == 1]))
    return (r1 - n1 * (n1 + 1) / 2.0) / (n0 * n1)


# -- logistic fit -----------------------------------------------------------------

def _nll(z, y, beta, ridge):
    # log(1 + e^z) - y z, summed, plus the ridge on the non-intercept terms
    base = float(np.sum(np.logaddexp(0.0, z) - y * z))
    return base + 0.5 * ridge * float(beta[1:] @ beta[1:])


def fit_logistic(features, labels, ridge: float = 1e-6, max_iters: int = 100,
                 tol: float = 1e-8, strict: bool = False) -> FitReport:
    """Newton fit of the logit model with step-halving, zero start, and a
    ridge on the slope coefficients (never the intercept) so perfectly
    separable data stays bounded. Deterministic. grad_norm and tol are
    per-sample (two-norm / n). When the iteration budget runs out the best
    iterate is returned flagged (or FitNonConvergence is raised in strict
    mode)."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValidationError(f"bad shapes: features {x.shape}, labels {y.shape}")
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise ValidationError(f"labels must be 0/1, got {classes[:5]}")
    if len(classes) < 2:
        raise DegenerateLabels("both classes are required to fit")
    n, k = x.shape
    xa = np.hstack([np.ones((n, 1)), x])
    mask = np.ones(k + 1)
    mask[0] = 0.0  # no penalty on the intercept
    beta = np.zeros(k + 1)
    z = xa @ beta
    nll = _nll(z, y, beta, ridge)
    path = [nll]
    grad_norm = math.inf
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        p = special.expit(z)
        grad = xa.T @ (p - y) + ridge * mask * beta
        grad_norm = float(np.linalg.norm(grad)) / max(1, n)
        if grad_norm <= tol:
            converged = True
            it -= 1
            break
        w = p * (1.0 - p)
        hess = (xa * w[:, None]).T @ xa + ridge * np.diag(mask)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            hess = hess + 1e-10 * np.eye(k + 1)
            step = np.linalg.solve(hess, -grad)
        alpha = 1.0
        for _ in range(40):
            cand = beta + alpha * step
            zc = xa @ cand
            cand_nll = _nll(zc, y, cand, ridge)
            if cand_nll <= nll:
                break
            alpha *= 0.5
        else:
            break  # no descent direction progress; keep the current iterate
        beta, z, nll = cand, zc, cand_nll
        path.append(nll)
    else:
        it = max_iters
    if not converged:
        p = special.expit(z)
        grad = xa.T @ (p - y) + ridge * mask * beta
        grad_norm = float(np.linalg.norm(grad)) / max(1, n)
        converged = grad_norm <= tol
    if not converged and strict:
        raise FitNonConvergence(
            f"gradient norm {grad_norm:.2e} above {tol:.0e} after {it} iterations")
    pred = (z >= 0.0).astype(float)
    accuracy = float(np.mean(pred == y))
    auc = mann_whitney_auc(z, y)
    return FitReport(tuple(float(b) for b in beta), it, float(nll), grad_norm,
                     accuracy, auc, converged, tuple(path))


# -- prediction and cut-points ------------------------------------------------------

def predict_logit(lr: LRModel, features) -> float:
    xi = np.asarray(features, dtype=float)
    if xi.shape[-1] != 5:
        raise ValidationError(f"expected 5 features, got shape {xi.shape}")
    c = np.array([lr.c1, lr.c2, lr.c3, lr.c4, lr.c5])
    out = lr.c0 + xi @ c
    return float(out) if out.ndim == 0 else out


def predict_prob(lr: LRModel, features):
    """Acceptability probability, clamped to the open interval so extreme
    logits never round to exactly 0 or 1."""
    z = predict_logit(lr, features)
    p = special.expit(np.asarray(z, dtype=float))
    p = np.clip(p, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return float(p) if p.ndim == 0 else p


def cutpoint_from_probability(p: float) -> float:
    """psi = ln(p / (1-p)), the logit of a target acceptability probability."""
    if not 0.0 < p < 1.0:
        raise ValidationError(f"probability must be inside (0, 1), got {p}")
    return math.log(p / (1.0 - p))


# -- dataset and model files ---------------------------------------------------------

def write_dataset_csv(dataset: Dataset, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(DATASET_HEADER) + "\n")
        for inc in dataset.incidents:
            fh.write(",".join([
                repr(inc.xi1), repr(inc.xi2), repr(inc.xi3), repr(inc.xi4),
                repr(inc.xi5), str(inc.label), repr(inc.reserve),
                inc.scenario, str(inc.hour), inc.unit]) + "\n")


def read_dataset_csv(path: str) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = tuple(lines[0].split(","))
    if header != DATASET_HEADER:
        raise SchemaError(f"{path}: header {lines[0]!r} does not match "
                          f"{','.join(DATASET_HEADER)!r}")
    out = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(DATASET_HEADER):
            raise ParseError(f"{path}:{ln}: expected {len(DATASET_HEADER)} fields")
        try:
            out.append(Incident(
                float(parts[0]), float(parts[1]), float(parts[2]), float(parts[3]),
                float(parts[4]), int(parts[5]), float(parts[6]), parts[7],
                int(parts[8]), parts[9]))
        except ValueError as exc:
            raise ParseError(f"{path}:{ln}: {exc}")
    if not out:
        raise EmptyDataset(f"{path}: no data rows")
    return Dataset(tuple(out))


def save_model(path: str, lr: LRModel, thresholds: AcceptabilityThresholds,
               report: FitReport | None = None):
    doc = {
        "coefficients": {f"c{j}": c for j, c in enumerate(lr.coefficients)},
        "psi": lr.psi,
        "thresholds": {
            "nadir_min_hz": thresholds.nadir_min,
            "rocof_min_hz_per_s": thresholds.rocof_min,
            "qss_min_hz": thresholds.qss_min,
        },
    }
    if report is not None:
        doc["fit"] = {
            "iterations": report.iterations,
            "nll": report.nll,
            "grad_norm": report.grad_norm,
            "accuracy_at_psi0": report.accuracy,
            "auc": report.auc,
            "converged": report.converged,
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> tuple[LRModel, AcceptabilityThresholds, dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}")
    try:
        co = doc["coefficients"]
        lr = LRModel(*(float(co[f"c{j}"]) for j in range(6)), psi=float(doc["psi"]))
        th = doc["thresholds"]
        thresholds = AcceptabilityThresholds(
            float(th["nadir_min_hz"]), float(th["rocof_min_hz_per_s"]),
            float(th["qss_min_hz"]))
    except KeyError as exc:
        raise SchemaError(f"{path}: missing key {exc}")
    return lr, thresholds, doc.get("fit", {})
