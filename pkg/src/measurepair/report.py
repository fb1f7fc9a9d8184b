"""Run modes, report assembly, and CSV/JSON persistence.

Reports embed the fully resolved configuration and a digest of the canonical
model serialization, so a report is reproducible from its own content.  All
timing lives in one isolated block; everything else in a report is a pure
function of (model, config), and JSON is emitted with sorted keys so repeated
runs are byte-identical outside that block.

CSV output uses '.' decimals, no thousands separators, UTF-8 and a mandatory
header row; floats are written in shortest round-trip form.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass
from typing import Optional

from .errors import NotProduct, ValidationError
from .models import (
    GaussianProductModel,
    KernelPairModel,
    ProductModel,
    TreeModel,
    format_prefix,
    load_model,
    serialize_model,
)
from .radicals import RadicalSum, sign_of, sqrt_rational
from . import affinity as affinity_ops
from . import decide as decide_ops
from . import montecarlo as mc
from . import tree as tree_ops

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SINGULAR = 10
EXIT_INCONCLUSIVE = 20
EXIT_VERIFY_FAILED = 12

_DECISION_EXIT = {
    decide_ops.EQUIVALENT: EXIT_OK,
    decide_ops.SINGULAR: EXIT_SINGULAR,
    decide_ops.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}


@dataclass
class RunConfig:
    model_path: str
    mode: str = "analyze"
    depth: int = 4
    k_max: int = 200
    tol: float = 1e-10
    seed: Optional[int] = None
    count: int = 1000
    length: int = 32
    measure: str = "p"
    out: Optional[str] = None
    csv_path: Optional[str] = None
    cylinders_path: Optional[str] = None
    param: Optional[str] = None
    values: Optional[list] = None

    def __post_init__(self):
        if self.depth < 1:
            raise ValidationError(f"depth must be >= 1, got {self.depth}")
        if self.tol <= 0:
            raise ValidationError(f"tolerance must be > 0, got {self.tol}")
        if self.mode == "sample" and self.seed is None:
            raise ValidationError("sample mode requires a seed")

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def model_digest(model: KernelPairModel) -> str:
    canonical = json.dumps(serialize_model(model), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_json(report: dict, path: str):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report, handle, sort_keys=True, indent=2)
        handle.write("\n")


def _csv_writer(path: str):
    return open(path, "w", encoding="utf-8", newline="")


def write_affinity_csv(tables: list, path: str):
    with _csv_writer(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(["n", "k", "prefix", "m_value"])
        for table in tables:
            for k in sorted(table.entries):
                for prefix in sorted(table.entries[k]):
                    writer.writerow([table.n, k, format_prefix(prefix), repr(table.entries[k][prefix])])
            for k in sorted(table.expected):
                writer.writerow([table.n, k, "<expected:q>", repr(table.expected[k])])


def write_cylinders_csv(weights, path: str):
    with _csv_writer(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(["prefix", "p_mass", "q_mass", "phi"])
        for prefix in sorted(weights.entries):
            p_mass, q_mass = weights.entries[prefix]
            writer.writerow([format_prefix(prefix), str(p_mass), str(q_mass), str(q_mass / p_mass)])


def write_traces_csv(traces, path: str):
    with _csv_writer(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(["path_id", "step", "symbol_or_value", "log_phi", "rho"])
        for trace in traces:
            for i, symbol in enumerate(trace.symbols):
                writer.writerow(
                    [
                        trace.path_id,
                        i + 1,
                        repr(symbol) if isinstance(symbol, float) else symbol,
                        repr(trace.log_phi_trace[i + 1]),
                        repr(trace.rho_trace[i]),
                    ]
                )


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def _affinity_summary(model: KernelPairModel, cfg: RunConfig) -> list:
    tables = []
    depth_cap = cfg.depth
    if isinstance(model, TreeModel):
        depth_cap = min(depth_cap, model.depth)
    for n in range(1, min(depth_cap, 4) + 1):
        k_hi = cfg.k_max if not isinstance(model, TreeModel) else model.depth
        ks = [k for k in range(n, min(n + 5, k_hi) + 1)]
        if k_hi not in ks and k_hi >= n:
            ks.append(k_hi)
        include_atoms = (
            model.discrete and model.alphabet.size ** (n - 1) <= 256
        )
        tables.append(
            affinity_ops.affinity_table(model, n, ks, include_atoms=include_atoms)
        )
    return tables


def _table_as_dict(table) -> dict:
    return {
        "n": table.n,
        "entries": {
            str(k): {format_prefix(p): v for p, v in sorted(atoms.items())}
            for k, atoms in sorted(table.entries.items())
        },
        "expected": {str(k): v for k, v in sorted(table.expected.items())},
    }


def run_analyze(cfg: RunConfig) -> tuple[dict, int]:
    started = time.perf_counter()
    model = load_model(cfg.model_path)
    decision_cfg = decide_ops.DecisionConfig(
        k_max=cfg.k_max, depth=cfg.depth, tol=cfg.tol
    )
    verdict = decide_ops.decide_equivalence(model, decision_cfg)
    tables = _affinity_summary(model, cfg)
    report = {
        "mode": "analyze",
        "model_digest": model_digest(model),
        "config": cfg.as_dict(),
        "verdict": verdict.as_dict(),
        "affinity": [_table_as_dict(t) for t in tables],
        "timing": {"elapsed_seconds": time.perf_counter() - started},
    }
    if cfg.out:
        write_json(report, cfg.out)
    if cfg.csv_path:
        write_affinity_csv(tables, cfg.csv_path)
    if cfg.cylinders_path and model.discrete:
        depth = cfg.depth if not isinstance(model, TreeModel) else min(cfg.depth, model.depth)
        write_cylinders_csv(tree_ops.enumerate_cylinders(model, depth), cfg.cylinders_path)
    return report, _DECISION_EXIT[verdict.decision]


# ---------------------------------------------------------------------------
# verify: the invariant suite on a concrete model
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    note: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "worst": self.worst, "note": self.note}


def _violation(delta, exact: bool, tol: float) -> tuple[bool, float]:
    """(ok, magnitude) for an equality residual."""
    if exact:
        if isinstance(delta, RadicalSum):
            return delta.is_zero(), abs(float(delta))
        return delta == 0, abs(float(delta))
    return abs(delta) <= tol, abs(delta)


def _nonneg(delta, exact: bool, tol: float) -> tuple[bool, float]:
    """(ok, magnitude of violation) for `delta >= 0` style bounds."""
    if exact:
        sign = sign_of(delta) if isinstance(delta, RadicalSum) else (0 if delta == 0 else (1 if delta > 0 else -1))
        return sign >= 0, max(0.0, -float(delta))
    return delta >= -tol, max(0.0, -float(delta))


def _verify_depth(model: KernelPairModel, cfg: RunConfig) -> int:
    depth = cfg.depth
    if isinstance(model, TreeModel):
        depth = min(depth, model.depth)
    return depth


def run_verify(cfg: RunConfig) -> tuple[dict, int]:
    started = time.perf_counter()
    model = load_model(cfg.model_path)
    if not model.discrete:
        raise ValidationError("verify mode needs a discrete model")
    depth = _verify_depth(model, cfg)
    exact = model.exact
    tol = cfg.tol
    checks: list[CheckResult] = []

    # normalization at every depth
    worst = 0.0
    ok = True
    for d in range(depth + 1):
        weights = tree_ops.enumerate_cylinders(model, d)
        for total in (weights.p_total(), weights.q_total()):
            good, mag = _violation(total - 1, exact, tol)
            ok = ok and good
            worst = max(worst, mag)
    checks.append(CheckResult("normalization", ok, worst))

    # change of measure on the deepest atom table
    weights = tree_ops.enumerate_cylinders(model, depth)
    ok, worst = True, 0.0
    for prefix, (p_mass, q_mass) in weights.entries.items():
        good, mag = _violation(q_mass - p_mass * tree_ops.phi(model, prefix), exact, tol)
        ok = ok and good
        worst = max(worst, mag)
    checks.append(CheckResult("change_of_measure", ok, worst))

    pairs = [(n, k) for n in range(1, depth + 1) for k in range(n, depth + 1)]
    tables = {pair: affinity_ops.m_table(model, *pair) for pair in pairs}

    # dual equality per atom
    ok, worst = True, 0.0
    for (n, k), table in tables.items():
        dual = affinity_ops.m_table(model, n, k, dual=True)
        for prefix, value in table.items():
            good, mag = _violation(value - dual[prefix], exact, tol)
            ok = ok and good
            worst = max(worst, mag)
    checks.append(CheckResult("dual_equality", ok, worst))

    # bounds and monotonicity in the truncation depth
    ok, worst = True, 0.0
    for (n, k), table in tables.items():
        for prefix, value in table.items():
            good, mag = _nonneg(1 - value, exact, tol)
            ok = ok and good
            worst = max(worst, mag)
            if (n, k + 1) in tables:
                good, mag = _nonneg(value - tables[(n, k + 1)][prefix], exact, tol)
                ok = ok and good
                worst = max(worst, mag)
    checks.append(CheckResult("monotonicity", ok, worst))

    # one-step submartingale property of the squared affinity
    ok, worst = True, 0.0
    for (n, k), table in tables.items():
        child = tables.get((n + 1, k))
        for prefix, value in table.items():
            step = model.kernel(prefix)
            acc = None
            for a in step.support():
                squared = (
                    (child[prefix + (a,)] * child[prefix + (a,)])
                    if child is not None
                    else (RadicalSum.from_rational(1) if exact else 1.0)
                )
                term = step.p[a] * squared
                acc = term if acc is None else acc + term
            good, mag = _nonneg(acc - value * value, exact, tol)
            ok = ok and good
            worst = max(worst, mag)
    checks.append(CheckResult("submartingale_step", ok, worst))

    # one-step martingale property of the ratio-weighted affinity
    ok, worst = True, 0.0
    for (n, k), table in tables.items():
        child = tables.get((n + 1, k))
        for prefix, value in table.items():
            step = model.kernel(prefix)
            acc = None
            for a in step.support():
                extension = prefix + (a,)
                child_value = (
                    child[extension]
                    if child is not None
                    else (RadicalSum.from_rational(1) if exact else 1.0)
                )
                if exact:
                    term = step.p[a] * sqrt_rational(tree_ops.phi(model, extension)) * child_value
                else:
                    term = step.p[a] * math.exp(0.5 * tree_ops.log_phi(model, extension)) * child_value
                acc = term if acc is None else acc + term
            if exact:
                lhs = sqrt_rational(tree_ops.phi(model, prefix)) * value
            else:
                lhs = math.exp(0.5 * tree_ops.log_phi(model, prefix)) * value
            good, mag = _violation(acc - lhs, exact, tol)
            ok = ok and good
            worst = max(worst, mag)
    checks.append(CheckResult("n_martingale_step", ok, worst))

    # squared-Hellinger truncation identity
    ok, worst = True, 0.0
    for n, k in pairs:
        lhs, rhs = affinity_ops.hellinger_identity(model, n, k)
        good, mag = _violation(lhs - rhs, exact, tol)
        ok = ok and good
        worst = max(worst, mag)
    checks.append(CheckResult("hellinger_identity", ok, worst))

    # witness mass bounds at every depth
    ok, worst = True, 0.0
    for k in range(1, depth + 1):
        witness = decide_ops.witness_set(model, k)
        for mass in (witness.p_mass, witness.q_complement_mass):
            if exact:
                delta = witness.bound_each_side - mass
            else:
                delta = float(witness.bound_each_side) - float(mass)
            good, mag = _nonneg(delta, exact, tol)
            ok = ok and good
            worst = max(worst, mag)
    checks.append(CheckResult("witness_bounds", ok, worst))

    all_passed = all(c.passed for c in checks)
    report = {
        "mode": "verify",
        "model_digest": model_digest(model),
        "config": cfg.as_dict(),
        "invariants": [c.as_dict() for c in checks],
        "all_passed": all_passed,
        "timing": {"elapsed_seconds": time.perf_counter() - started},
    }
    if cfg.out:
        write_json(report, cfg.out)
    return report, EXIT_OK if all_passed else EXIT_VERIFY_FAILED


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

_SWEEPABLE = ("alpha", "c", "base")


def run_sweep(cfg: RunConfig) -> tuple[dict, int]:
    started = time.perf_counter()
    model = load_model(cfg.model_path)
    if not isinstance(model, (ProductModel, GaussianProductModel)) or model.tail is None:
        raise NotProduct("sweep mode needs a product-family model with a tail generator")
    if cfg.param not in _SWEEPABLE:
        raise ValidationError(f"sweep parameter must be one of {_SWEEPABLE}, got {cfg.param!r}")
    if not cfg.values:
        raise ValidationError("sweep mode needs at least one parameter value")
    if cfg.param == "base" and not hasattr(model.tail, "base"):
        raise ValidationError("this tail family has no 'base' parameter")

    rows = []
    for value in cfg.values:
        try:
            tail = dataclasses.replace(model.tail, **{cfg.param: value})
        except ValidationError as exc:
            raise ValidationError(f"sweep {cfg.param}={value}: {exc}") from exc
        swept = dataclasses.replace(model, tail=tail)
        partial = 0.0
        for i in range(1, cfg.k_max + 1):
            partial += 1.0 - float(swept.coordinate_rho(i))
        bound = tail.tail_bound(cfg.k_max)
        verdict = decide_ops.decide_equivalence(
            swept, decide_ops.DecisionConfig(k_max=cfg.k_max, depth=cfg.depth, tol=cfg.tol)
        )
        estimate = affinity_ops.estimate_m_limit(swept, 1, cfg.k_max)
        rows.append(
            {
                "param": cfg.param,
                "value": value,
                "partial_sum": partial,
                "tail_bound": bound if bound is not None else "",
                "verdict": verdict.decision,
                "m1k_upper": estimate.upper,
            }
        )

    if cfg.csv_path or cfg.out:
        path = cfg.csv_path or cfg.out
        with _csv_writer(path) as handle:
            writer = csv.writer(handle)
            writer.writerow(["param", "value", "partial_sum", "tail_bound", "verdict", "m1k_upper"])
            for row in rows:
                writer.writerow(
                    [
                        row["param"],
                        repr(float(row["value"])),
                        repr(row["partial_sum"]),
                        repr(row["tail_bound"]) if row["tail_bound"] != "" else "",
                        row["verdict"],
                        repr(row["m1k_upper"]),
                    ]
                )
    report = {
        "mode": "sweep",
        "model_digest": model_digest(model),
        "config": cfg.as_dict(),
        "rows": rows,
        "timing": {"elapsed_seconds": time.perf_counter() - started},
    }
    return report, EXIT_OK


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------


def run_sample(cfg: RunConfig) -> tuple[dict, int]:
    started = time.perf_counter()
    model = load_model(cfg.model_path)
    traces = mc.sample_paths(
        model,
        measure=cfg.measure,
        length=cfg.length,
        count=cfg.count,
        seed=cfg.seed,
    )
    summary = mc.summarize_ensemble(traces)
    report = {
        "mode": "sample",
        "model_digest": model_digest(model),
        "config": cfg.as_dict(),
        "summary": {
            "count": summary.count,
            "horizon": summary.horizon,
            "quantile_levels": list(summary.quantile_levels),
            "quantiles": {str(n): q for n, q in summary.quantiles.items()},
            "frac_below": {str(n): v for n, v in summary.frac_below.items()},
            "frac_above": {str(n): v for n, v in summary.frac_above.items()},
            "mean": {str(n): v for n, v in summary.mean.items()},
            "mean_ci": {str(n): list(v) for n, v in summary.mean_ci.items()},
        },
        "timing": {"elapsed_seconds": time.perf_counter() - started},
    }
    if cfg.csv_path:
        write_traces_csv(traces, cfg.csv_path)
    if cfg.out:
        write_json(report, cfg.out)
    return report, EXIT_OK
