"""Exact cylinder-level computations on finite-depth trees.

Everything here is brute force on atoms: likelihood-ratio values along
prefixes, conditional expectations by kernel-weighted averaging over
extensions, and exhaustive atom tables.  This module is the oracle tier the
faster engines are checked against; in exact mode every number is a Fraction
and the identities hold bit for bit, in float mode the ratio products
accumulate in log space.

Atom enumeration is budgeted (default 2^20 atoms, overridable via the
MEASUREPAIR_ATOM_BUDGET environment variable or per call); exceeding the
budget raises instead of truncating.  Matched-zero branches carry no mass
under either measure and are pruned from every walk.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

from .errors import BudgetExceeded, ContinuousCoordinate, IndexOutOfRange, ValidationError
from .models import KernelPairModel, Prefix

DEFAULT_ATOM_BUDGET = 1 << 20
_BUDGET_ENV = "MEASUREPAIR_ATOM_BUDGET"


def atom_budget(budget: int | None = None) -> int:
    if budget is not None:
        return int(budget)
    env = os.environ.get(_BUDGET_ENV)
    if env:
        return int(env)
    return DEFAULT_ATOM_BUDGET


def _require_discrete(model: KernelPairModel):
    if not model.discrete:
        raise ContinuousCoordinate(
            "cylinder operations need a finite alphabet; "
            "gaussian models are served by the affinity path"
        )


@dataclass(frozen=True)
class DensityState:
    """Likelihood ratio attached to one prefix (the atom value of the density
    process at level |prefix|+1)."""

    prefix: Prefix
    phi: object
    log_phi: float


def phi(model: KernelPairModel, prefix: Prefix):
    """Likelihood ratio of the prefix atom: product of q/p along its steps.

    Exact models return a Fraction, float models accumulate in log space and
    exponentiate at the boundary.  The empty prefix has ratio 1.
    """
    _require_discrete(model)
    prefix = model.validate_prefix(prefix)
    if model.exact:
        acc = Fraction(1)
        for i, symbol in enumerate(prefix):
            step = model.kernel(prefix[:i])
            p, q = step.p[symbol], step.q[symbol]
            if p == 0:
                raise ValidationError(
                    f"prefix {prefix} has zero mass at step {i + 1}"
                )
            acc *= Fraction(q) / Fraction(p)
        return acc
    return math.exp(log_phi(model, prefix))


def log_phi(model: KernelPairModel, prefix: Prefix) -> float:
    _require_discrete(model)
    prefix = model.validate_prefix(prefix)
    total = 0.0
    for i, symbol in enumerate(prefix):
        step = model.kernel(prefix[:i])
        p, q = step.p[symbol], step.q[symbol]
        if p == 0:
            raise ValidationError(f"prefix {prefix} has zero mass at step {i + 1}")
        if isinstance(p, Fraction):
            total += math.log(q.numerator) - math.log(q.denominator)
            total -= math.log(p.numerator) - math.log(p.denominator)
        else:
            total += math.log(q) - math.log(p)
    return total


def small_phi(model: KernelPairModel, prefix: Prefix, n: int):
    """The n-th likelihood-ratio increment read off the prefix (1-based)."""
    _require_discrete(model)
    prefix = model.validate_prefix(prefix)
    if not (1 <= n <= len(prefix)):
        raise IndexOutOfRange(
            f"step {n} outside prefix of length {len(prefix)}"
        )
    step = model.kernel(prefix[: n - 1])
    symbol = prefix[n - 1]
    p, q = step.p[symbol], step.q[symbol]
    if p == 0:
        raise ValidationError(f"prefix {prefix} has zero mass at step {n}")
    if model.exact:
        return Fraction(q) / Fraction(p)
    return q / p


def density_state(model: KernelPairModel, prefix: Prefix) -> DensityState:
    prefix = tuple(prefix)
    return DensityState(prefix, phi(model, prefix), log_phi(model, prefix))


@dataclass
class CylinderWeights:
    """Exhaustive atom table at one depth: prefix -> (P mass, P' mass).

    Entries are in lexicographic prefix order; pruned branches are absent.
    """

    depth: int
    entries: dict

    def p_total(self):
        return sum(masses[0] for masses in self.entries.values())

    def q_total(self):
        return sum(masses[1] for masses in self.entries.values())

    def phi(self, prefix: Prefix):
        p_mass, q_mass = self.entries[tuple(prefix)]
        return q_mass / p_mass

    def atoms(self):
        return self.entries.keys()


def enumerate_cylinders(
    model: KernelPairModel, depth: int, budget: int | None = None
) -> CylinderWeights:
    """All reachable atoms at the given depth with their masses under both
    measures.  Raises BudgetExceeded once the atom count passes the budget."""
    _require_discrete(model)
    if depth < 0:
        raise ValidationError(f"depth must be >= 0, got {depth}")
    cap = atom_budget(budget)
    one = Fraction(1) if model.exact else 1.0
    level: dict = {(): (one, one)}
    for _ in range(depth):
        next_level: dict = {}
        for prefix, (p_mass, q_mass) in level.items():
            step = model.kernel(prefix)
            for a in step.support():
                next_level[prefix + (a,)] = (p_mass * step.p[a], q_mass * step.q[a])
            if len(next_level) > cap:
                raise BudgetExceeded(
                    f"atom count exceeded budget {cap} at depth {len(prefix) + 1}"
                )
        level = next_level
    return CylinderWeights(depth, level)


def reachable_prefixes(model: KernelPairModel, depth: int, budget: int | None = None):
    """Lists of reachable prefixes per level, 0..depth."""
    _require_discrete(model)
    cap = atom_budget(budget)
    levels = [[()]]
    for _ in range(depth):
        frontier = []
        for prefix in levels[-1]:
            step = model.kernel(prefix)
            frontier.extend(prefix + (a,) for a in step.support())
            if len(frontier) > cap:
                raise BudgetExceeded(f"prefix count exceeded budget {cap}")
        levels.append(frontier)
    return levels


def conditional_expectation(
    model: KernelPairModel,
    f: Mapping[Prefix, object],
    n: int,
    under: str = "p",
) -> dict:
    """Condition a depth-k atom function down to the level-n atoms.

    ``f`` maps all reachable depth-k prefixes to values; the result maps each
    depth-(n-1) prefix to the kernel-weighted average of ``f`` over its
    extensions, under the selected measure ("p" or "q").  Values may be
    floats, Fractions or radical sums; weighting happens left to right in
    sorted prefix order so float results are schedule-independent.
    """
    _require_discrete(model)
    if under not in ("p", "q"):
        raise ValueError(f"measure selector must be 'p' or 'q', got {under!r}")
    if not f:
        raise ValidationError("empty atom function")
    keys = sorted(f)
    k = len(keys[0])
    if any(len(key) != k for key in keys):
        raise ValidationError("atom function keys must share one depth")
    if not (1 <= n <= k + 1):
        raise IndexOutOfRange(f"conditioning level {n} outside 1..{k + 1}")

    current = {key: f[key] for key in keys}
    for level in range(k, n - 1, -1):
        parents: dict = {}
        for prefix in sorted({key[:-1] for key in current}):
            step = model.kernel(prefix)
            weights = step.p if under == "p" else step.q
            total = None
            for a in step.support():
                child = prefix + (a,)
                if child not in current:
                    raise ValidationError(
                        f"atom function is missing reachable prefix {child}"
                    )
                term = weights[a] * current[child]
                total = term if total is None else total + term
            parents[prefix] = total
        current = parents
    return current
