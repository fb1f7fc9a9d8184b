"""Kernel-pair measure models on sequence spaces.

A model fixes two probability measures on a space of symbol sequences by
giving, for every finite prefix, the conditional laws of the next coordinate
under each measure.  Four variants cover the practical cases: an explicit
finite-depth tree, a Markov pair, a coordinate-wise product family (optionally
extended by an analytic tail generator), and a Gaussian product family whose
coordinates are continuous and participate only in affinity computations.

Two numeric modes exist.  When a document writes numbers as rational strings
("3/4"), probabilities are parsed into exact ``Fraction`` values and the
downstream computations stay exact; otherwise everything is float.  Models
with a tail generator are always float: generated probabilities involve real
powers of the coordinate index.

Validation is eager.  Rows must be stochastic and the two laws of every step
must vanish on exactly the same symbols (matched supports); that keeps every
finite-horizon restriction of the two measures equivalent, so likelihood
ratios along reachable prefixes are finite and positive.  Models are immutable
after validation and safe to share between concurrent tasks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .errors import (
    ContinuousCoordinate,
    DepthExceeded,
    SchemaError,
    ValidationError,
)
from .radicals import RadicalSum, sqrt_rational

Prefix = tuple[int, ...]
Number = Union[Fraction, float]

KERNEL_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Alphabet:
    """Finite symbol set; symbols are indexed 0..size-1."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValidationError(f"alphabet size must be >= 1, got {self.size}")


def parse_prefix(text: str) -> Prefix:
    """Parse a comma-separated prefix string; the empty string is the root."""
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise SchemaError(f"bad prefix string {text!r}") from exc


def format_prefix(prefix: Prefix) -> str:
    return ",".join(str(s) for s in prefix)


@dataclass(frozen=True)
class KernelStep:
    """Conditional laws of one coordinate under the two measures."""

    p: tuple
    q: tuple

    def support(self) -> tuple[int, ...]:
        return tuple(a for a, value in enumerate(self.p) if value != 0)

    def identical(self) -> bool:
        return self.p == self.q


def _check_vector(values, exact: bool, where: str, name: str) -> tuple:
    total = 0
    out = []
    for index, value in enumerate(values):
        if value < 0:
            raise ValidationError(f"{where}: {name}[{index}] is negative")
        total += value
        out.append(value)
    if exact:
        if total != 1:
            raise ValidationError(f"{where}: {name} sums to {total}, not 1")
    elif abs(total - 1.0) > KERNEL_SUM_TOL:
        raise ValidationError(f"{where}: {name} sums to {total!r}, not 1")
    return tuple(out)


def kernel_step(p_values, q_values, exact: bool, where: str = "kernel") -> KernelStep:
    """Validate and build one kernel step (stochastic rows, matched supports)."""
    if len(p_values) != len(q_values):
        raise ValidationError(f"{where}: p and q have different lengths")
    if len(p_values) == 0:
        raise ValidationError(f"{where}: empty probability vectors")
    p = _check_vector(p_values, exact, where, "p")
    q = _check_vector(q_values, exact, where, "q")
    for a, (pa, qa) in enumerate(zip(p, q)):
        if (pa == 0) != (qa == 0):
            raise ValidationError(
                f"{where}: mismatched supports at symbol {a} (p={pa}, q={qa})"
            )
    if all(value == 0 for value in p):
        raise ValidationError(f"{where}: all-zero probability vector")
    return KernelStep(p, q)


def rho_of_step(step: KernelStep, exact: bool):
    """One-step affinity sum_a sqrt(p(a) q(a)); 1 exactly when p == q."""
    if exact:
        total = RadicalSum()
        for a in step.support():
            total = total + sqrt_rational(step.p[a] * step.q[a])
        return total
    return sum(math.sqrt(step.p[a] * step.q[a]) for a in step.support())


@dataclass(frozen=True)
class GaussianCoordinate:
    """One continuous coordinate: N(mu, sigma^2) against N(mu_q, sigma_q^2)."""

    mu: float
    mu_q: float
    sigma: float
    sigma_q: float

    def __post_init__(self):
        if not (self.sigma > 0 and self.sigma_q > 0):
            raise ValidationError(
                f"gaussian coordinate needs sigma > 0, got {self.sigma}, {self.sigma_q}"
            )

    def identical(self) -> bool:
        return self.mu == self.mu_q and self.sigma == self.sigma_q

    def rho(self) -> float:
        s2 = self.sigma * self.sigma
        t2 = self.sigma_q * self.sigma_q
        gap = self.mu_q - self.mu
        return math.sqrt(2.0 * self.sigma * self.sigma_q / (s2 + t2)) * math.exp(
            -gap * gap / (4.0 * (s2 + t2))
        )

    def log_ratio(self, x: float) -> float:
        """ln of the q-to-p density ratio at x."""
        if self.sigma == self.sigma_q:
            gap = self.mu_q - self.mu
            return (gap / (self.sigma * self.sigma)) * (x - 0.5 * (self.mu + self.mu_q))
        return (
            math.log(self.sigma / self.sigma_q)
            + (x - self.mu) ** 2 / (2.0 * self.sigma**2)
            - (x - self.mu_q) ** 2 / (2.0 * self.sigma_q**2)
        )


# ---------------------------------------------------------------------------
# Tail generators: analytic coordinate families beyond the stored horizon
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BernoulliPerturbationTail:
    """Coordinates p = (b, 1-b) against q = (b+eps_i, 1-b-eps_i), eps_i = c*i^-alpha.

    Validation proves the perturbed probabilities stay inside (0, 1) for every
    index: |eps_i| is maximal at i = 1 and decays monotonically (alpha >= 0),
    so checking both endpoints at i = 1 suffices.
    """

    base: float
    c: float
    alpha: float

    family = "bernoulli_perturbation"

    def __post_init__(self):
        if not (0.0 < self.base < 1.0):
            raise ValidationError(f"tail base must be in (0,1), got {self.base}")
        if self.alpha < 0:
            raise ValidationError(
                f"tail alpha must be >= 0, got {self.alpha} (epsilon would grow)"
            )
        first = self.base + self.c
        if self.c != 0 and not (0.0 < first < 1.0):
            raise ValidationError(
                f"tail epsilon out of range: base + c = {first} not in (0,1) "
                f"(base={self.base}, c={self.c}, alpha={self.alpha})"
            )

    def epsilon(self, i: int) -> float:
        return self.c * float(i) ** (-self.alpha) if self.alpha else self.c

    def kernel_step(self, i: int) -> KernelStep:
        eps = self.epsilon(i)
        return KernelStep(
            (self.base, 1.0 - self.base),
            (self.base + eps, 1.0 - self.base - eps),
        )

    def rho(self, i: int) -> float:
        eps = self.epsilon(i)
        return math.sqrt(self.base * (self.base + eps)) + math.sqrt(
            (1.0 - self.base) * (1.0 - self.base - eps)
        )

    def _term_constant(self) -> float:
        # 1 - rho_i <= C * eps_i^2 with C from the smallest probability seen
        low0 = min(self.base, self.base + self.c)
        low1 = min(1.0 - self.base, 1.0 - self.base - self.c)
        return (1.0 / low0 + 1.0 / low1) / 8.0

    def per_term_bound(self, i: int) -> float:
        """Upper bound on 1 - rho_j, valid for every j >= i."""
        return self._term_constant() * self.epsilon(i) ** 2

    def tail_bound(self, k: int) -> Optional[float]:
        """Upper bound on sum_{i>k} (1 - rho_i); None when the sum diverges."""
        if self.c == 0:
            return 0.0
        if 2.0 * self.alpha <= 1.0:
            return None
        # integral comparison: sum_{i>k} i^(-2a) <= k^(1-2a) / (2a-1)
        return (
            self._term_constant()
            * self.c**2
            * float(k) ** (1.0 - 2.0 * self.alpha)
            / (2.0 * self.alpha - 1.0)
        )

    def diverges(self) -> bool:
        """Certified divergence of sum (1 - rho_i): 1 - rho_i >= eps_i^2 / 4
        and sum i^(-2*alpha) is a divergent p-series for 2*alpha <= 1."""
        return self.c != 0 and 2.0 * self.alpha <= 1.0

    def params(self) -> dict:
        return {"family": self.family, "base": self.base, "c": self.c, "alpha": self.alpha}


@dataclass(frozen=True)
class MeanGapTail:
    """Gaussian coordinates N(0,1) against N(delta_i, 1), delta_i = c*i^-alpha.

    Here |ln rho_i| = delta_i^2 / 8 exactly, so the tail of the affinity
    log-sum is controlled by the same p-series as the mean gaps squared.
    """

    c: float
    alpha: float

    family = "mean_gap"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValidationError(f"tail alpha must be >= 0, got {self.alpha}")

    def delta(self, i: int) -> float:
        return self.c * float(i) ** (-self.alpha) if self.alpha else self.c

    def coordinate(self, i: int) -> GaussianCoordinate:
        return GaussianCoordinate(0.0, self.delta(i), 1.0, 1.0)

    def rho(self, i: int) -> float:
        return math.exp(-self.delta(i) ** 2 / 8.0)

    def per_term_bound(self, i: int) -> float:
        return self.delta(i) ** 2 / 8.0

    def tail_bound(self, k: int) -> Optional[float]:
        if self.c == 0:
            return 0.0
        if 2.0 * self.alpha <= 1.0:
            return None
        return (self.c**2 / 8.0) * float(k) ** (1.0 - 2.0 * self.alpha) / (
            2.0 * self.alpha - 1.0
        )

    def diverges(self) -> bool:
        return self.c != 0 and 2.0 * self.alpha <= 1.0

    def params(self) -> dict:
        return {"family": self.family, "c": self.c, "alpha": self.alpha}


TailGenerator = Union[BernoulliPerturbationTail, MeanGapTail]


# ---------------------------------------------------------------------------
# Model variants
# ---------------------------------------------------------------------------


class KernelPairModel:
    """Base interface all analysis modules consume.

    Subclasses provide ``kernel(prefix)`` (the two conditional laws of the
    next coordinate), ``coordinate_rho`` where coordinates are exchangeable,
    and metadata flags.  All operations are pure functions of
    ``(model, prefix)``.
    """

    variant: str = "abstract"

    @property
    def discrete(self) -> bool:
        return True

    def kernel(self, prefix: Prefix) -> KernelStep:
        raise NotImplementedError

    def step_affinity(self, prefix: Prefix):
        return rho_of_step(self.kernel(prefix), self.exact)

    def identical_kernels(self) -> bool:
        raise NotImplementedError

    def validate_prefix(self, prefix: Prefix) -> Prefix:
        prefix = tuple(prefix)
        size = self.alphabet.size
        for symbol in prefix:
            if not (0 <= symbol < size):
                raise ValidationError(
                    f"prefix symbol {symbol} outside alphabet of size {size}"
                )
        return prefix


@dataclass(frozen=True)
class ProductModel(KernelPairModel):
    """Coordinate-wise kernels, independent of the prefix.

    Beyond the stored coordinates the model continues with the tail generator
    when present, and otherwise with an identical uniform pair: a finite
    document describes measures that differ on finitely many coordinates and
    agree afterwards.
    """

    alphabet: Alphabet
    coordinates: tuple[KernelStep, ...]
    tail: Optional[BernoulliPerturbationTail]
    exact: bool

    variant = "product"

    def coordinate_step(self, i: int) -> KernelStep:
        """Kernel of coordinate i (1-based)."""
        if i < 1:
            raise ValidationError(f"coordinate index must be >= 1, got {i}")
        if i <= len(self.coordinates):
            return self.coordinates[i - 1]
        if self.tail is not None:
            return self.tail.kernel_step(i)
        size = self.alphabet.size
        uniform = (
            tuple(Fraction(1, size) for _ in range(size))
            if self.exact
            else tuple(1.0 / size for _ in range(size))
        )
        return KernelStep(uniform, uniform)

    def kernel(self, prefix: Prefix) -> KernelStep:
        prefix = self.validate_prefix(prefix)
        return self.coordinate_step(len(prefix) + 1)

    def coordinate_rho(self, i: int):
        if i <= len(self.coordinates):
            return rho_of_step(self.coordinates[i - 1], self.exact)
        if self.tail is not None:
            return self.tail.rho(i)
        return RadicalSum.from_rational(1) if self.exact else 1.0

    def identical_kernels(self) -> bool:
        if self.tail is not None and self.tail.c != 0:
            return False
        return all(step.identical() for step in self.coordinates)


@dataclass(frozen=True)
class MarkovModel(KernelPairModel):
    """State-homogeneous chain pair: rows of P and Q plus initial laws."""

    alphabet: Alphabet
    transition_p: tuple[tuple, ...]
    transition_q: tuple[tuple, ...]
    init_p: tuple
    init_q: tuple
    exact: bool

    variant = "markov"

    def kernel(self, prefix: Prefix) -> KernelStep:
        prefix = self.validate_prefix(prefix)
        if not prefix:
            return KernelStep(self.init_p, self.init_q)
        state = prefix[-1]
        return KernelStep(self.transition_p[state], self.transition_q[state])

    def identical_kernels(self) -> bool:
        return self.transition_p == self.transition_q and self.init_p == self.init_q


@dataclass(frozen=True)
class TreeModel(KernelPairModel):
    """Explicit kernels for every reachable prefix up to a finite depth."""

    alphabet: Alphabet
    depth: int
    kernels: dict = field(compare=True)
    exact: bool = True

    variant = "tree"

    def kernel(self, prefix: Prefix) -> KernelStep:
        prefix = self.validate_prefix(prefix)
        if len(prefix) >= self.depth:
            raise DepthExceeded(
                f"tree model stores kernels up to depth {self.depth}; "
                f"no kernel at prefix of length {len(prefix)}"
            )
        step = self.kernels.get(prefix)
        if step is None:
            raise ValidationError(f"no kernel stored for prefix {format_prefix(prefix)!r}")
        return step

    def identical_kernels(self) -> bool:
        return all(step.identical() for step in self.kernels.values())


@dataclass(frozen=True)
class GaussianProductModel(KernelPairModel):
    """Continuous product family; affinity-only (no cylinder enumeration)."""

    coordinates: tuple[GaussianCoordinate, ...]
    tail: Optional[MeanGapTail]

    variant = "gaussian_product"
    exact = False
    alphabet = Alphabet(1)

    @property
    def discrete(self) -> bool:
        return False

    def kernel(self, prefix: Prefix) -> KernelStep:
        raise ContinuousCoordinate(
            "gaussian coordinates have no finite kernel; use the affinity path"
        )

    def coordinate(self, i: int) -> GaussianCoordinate:
        if i < 1:
            raise ValidationError(f"coordinate index must be >= 1, got {i}")
        if i <= len(self.coordinates):
            return self.coordinates[i - 1]
        if self.tail is not None:
            return self.tail.coordinate(i)
        return GaussianCoordinate(0.0, 0.0, 1.0, 1.0)

    def coordinate_rho(self, i: int) -> float:
        return self.coordinate(i).rho()

    def step_affinity(self, prefix: Prefix) -> float:
        return self.coordinate_rho(len(tuple(prefix)) + 1)

    def validate_prefix(self, prefix) -> tuple:
        return tuple(prefix)

    def identical_kernels(self) -> bool:
        if self.tail is not None and self.tail.c != 0:
            return False
        return all(coord.identical() for coord in self.coordinates)


# ---------------------------------------------------------------------------
# Parsing and serialization
# ---------------------------------------------------------------------------

_VARIANTS = ("product", "markov", "tree", "gaussian_product")


def _contains_rational_string(node) -> bool:
    if isinstance(node, str):
        return "/" in node
    if isinstance(node, dict):
        return any(_contains_rational_string(v) for v in node.values())
    if isinstance(node, (list, tuple)):
        return any(_contains_rational_string(v) for v in node)
    return False


def _parse_number(value, exact: bool, where: str) -> Number:
    if isinstance(value, bool):
        raise SchemaError(f"{where}: expected a number, got a boolean")
    if isinstance(value, str):
        text = value.strip()
        try:
            if "/" in text:
                num, den = text.split("/")
                parsed = Fraction(int(num), int(den))
            else:
                parsed = Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise SchemaError(f"{where}: bad number string {value!r}") from exc
        return parsed if exact else float(parsed)
    if isinstance(value, int):
        return Fraction(value) if exact else float(value)
    if isinstance(value, float):
        # str() round-trips the shortest decimal, keeping 0.1 == 1/10 exact
        return Fraction(str(value)) if exact else value
    raise SchemaError(f"{where}: expected a number, got {type(value).__name__}")


def _parse_vector(values, exact: bool, where: str) -> list:
    if not isinstance(values, (list, tuple)):
        raise SchemaError(f"{where}: expected a list of numbers")
    return [_parse_number(v, exact, f"{where}[{i}]") for i, v in enumerate(values)]


def _float_field(mapping: dict, key: str, where: str, default=None) -> float:
    if key not in mapping:
        if default is not None:
            return default
        raise SchemaError(f"{where}: missing field {key!r}")
    return float(_parse_number(mapping[key], False, f"{where}.{key}"))


def _parse_bernoulli_tail(spec: dict, where: str) -> BernoulliPerturbationTail:
    return BernoulliPerturbationTail(
        base=_float_field(spec, "base", where),
        c=_float_field(spec, "c", where),
        alpha=_float_field(spec, "alpha", where),
    )


def _parse_mean_gap_tail(spec: dict, where: str) -> MeanGapTail:
    return MeanGapTail(
        c=_float_field(spec, "c", where),
        alpha=_float_field(spec, "alpha", where),
    )


def _parse_product(body: dict, exact: bool) -> ProductModel:
    raw_coords = body.get("coordinates", [])
    if not isinstance(raw_coords, list):
        raise SchemaError("product.coordinates must be a list")
    tail_spec = body.get("tail")
    tail = None
    if tail_spec is not None:
        if not isinstance(tail_spec, dict):
            raise SchemaError("product.tail must be an object")
        family = tail_spec.get("family")
        if family != "bernoulli_perturbation":
            raise SchemaError(f"unknown product tail family {family!r}")
        tail = _parse_bernoulli_tail(tail_spec, "product.tail")
        exact = False  # generated probabilities are floats
    if not raw_coords and tail is None:
        raise ValidationError("product model needs coordinates or a tail generator")

    steps = []
    size = None
    for index, coord in enumerate(raw_coords):
        where = f"product.coordinates[{index}]"
        if not isinstance(coord, dict) or "p" not in coord or "q" not in coord:
            raise SchemaError(f"{where}: expected an object with 'p' and 'q'")
        p = _parse_vector(coord["p"], exact, f"{where}.p")
        q = _parse_vector(coord["q"], exact, f"{where}.q")
        if size is None:
            size = len(p)
        elif len(p) != size:
            raise ValidationError(f"{where}: alphabet size {len(p)} differs from {size}")
        steps.append(kernel_step(p, q, exact, where))
    if tail is not None:
        if size is None:
            size = 2
        elif size != 2:
            raise ValidationError(
                "bernoulli_perturbation tail requires a binary alphabet, "
                f"got coordinates of size {size}"
            )
    return ProductModel(Alphabet(size), tuple(steps), tail, exact)


def _parse_markov(body: dict, exact: bool) -> MarkovModel:
    states = body.get("states")
    if not isinstance(states, int) or states < 1:
        raise SchemaError("markov.states must be a positive integer")
    rows_p = body.get("P")
    rows_q = body.get("Q")
    if not isinstance(rows_p, list) or not isinstance(rows_q, list):
        raise SchemaError("markov.P and markov.Q must be lists of rows")
    if len(rows_p) != states or len(rows_q) != states:
        raise ValidationError(
            f"markov: expected {states} rows, got P:{len(rows_p)} Q:{len(rows_q)}"
        )

    transition_p = []
    transition_q = []
    for s in range(states):
        where = f"markov row {s}"
        p = _parse_vector(rows_p[s], exact, f"markov.P[{s}]")
        q = _parse_vector(rows_q[s], exact, f"markov.Q[{s}]")
        if len(p) != states or len(q) != states:
            raise ValidationError(f"{where}: row length differs from state count")
        step = kernel_step(p, q, exact, where)
        transition_p.append(step.p)
        transition_q.append(step.q)

    if "init_p" in body or "init_q" in body:
        init_p = _parse_vector(body.get("init_p", []), exact, "markov.init_p")
        init_q = _parse_vector(body.get("init_q", []), exact, "markov.init_q")
        if len(init_p) != states or len(init_q) != states:
            raise ValidationError("markov: init vectors must have one entry per state")
        init = kernel_step(init_p, init_q, exact, "markov init")
    else:
        uniform = (
            [Fraction(1, states)] * states if exact else [1.0 / states] * states
        )
        init = KernelStep(tuple(uniform), tuple(uniform))

    return MarkovModel(
        Alphabet(states),
        tuple(transition_p),
        tuple(transition_q),
        init.p,
        init.q,
        exact,
    )


def _parse_tree(body: dict, exact: bool) -> TreeModel:
    size = body.get("alphabet")
    depth = body.get("depth")
    if not isinstance(size, int) or size < 1:
        raise SchemaError("tree.alphabet must be a positive integer")
    if not isinstance(depth, int) or depth < 1:
        raise SchemaError("tree.depth must be a positive integer")
    raw = body.get("kernels")
    if not isinstance(raw, dict):
        raise SchemaError("tree.kernels must be an object keyed by prefix strings")

    kernels: dict[Prefix, KernelStep] = {}
    for key, spec in raw.items():
        prefix = parse_prefix(key)
        where = f"tree.kernels[{key!r}]"
        if len(prefix) >= depth:
            raise ValidationError(f"{where}: prefix of length {len(prefix)} >= depth {depth}")
        if any(not (0 <= s < size) for s in prefix):
            raise ValidationError(f"{where}: symbol outside alphabet of size {size}")
        if not isinstance(spec, dict) or "p" not in spec or "q" not in spec:
            raise SchemaError(f"{where}: expected an object with 'p' and 'q'")
        p = _parse_vector(spec["p"], exact, f"{where}.p")
        q = _parse_vector(spec["q"], exact, f"{where}.q")
        if len(p) != size:
            raise ValidationError(f"{where}: vector length {len(p)} != alphabet {size}")
        kernels[prefix] = kernel_step(p, q, exact, where)

    # every reachable prefix below the horizon needs a kernel
    frontier = [()]
    for _ in range(depth):
        next_frontier = []
        for prefix in frontier:
            step = kernels.get(prefix)
            if step is None:
                raise ValidationError(
                    f"tree: missing kernel for reachable prefix {format_prefix(prefix)!r}"
                )
            if len(prefix) + 1 < depth:
                next_frontier.extend(prefix + (a,) for a in step.support())
        frontier = next_frontier

    return TreeModel(Alphabet(size), depth, kernels, exact)


def _parse_gaussian(body: dict) -> GaussianProductModel:
    raw_coords = body.get("coordinates", [])
    if not isinstance(raw_coords, list):
        raise SchemaError("gaussian_product.coordinates must be a list")
    tail_spec = body.get("tail")
    tail = None
    if tail_spec is not None:
        if not isinstance(tail_spec, dict):
            raise SchemaError("gaussian_product.tail must be an object")
        family = tail_spec.get("family")
        if family != "mean_gap":
            raise SchemaError(f"unknown gaussian tail family {family!r}")
        tail = _parse_mean_gap_tail(tail_spec, "gaussian_product.tail")
    if not raw_coords and tail is None:
        raise ValidationError("gaussian_product model needs coordinates or a tail")

    coords = []
    for index, spec in enumerate(raw_coords):
        where = f"gaussian_product.coordinates[{index}]"
        if not isinstance(spec, dict):
            raise SchemaError(f"{where}: expected an object")
        coords.append(
            GaussianCoordinate(
                mu=_float_field(spec, "mu", where),
                mu_q=_float_field(spec, "mu_q", where),
                sigma=_float_field(spec, "sigma", where),
                sigma_q=_float_field(spec, "sigma_q", where),
            )
        )
    return GaussianProductModel(tuple(coords), tail)


def parse_model(document, *, exact: Optional[bool] = None) -> KernelPairModel:
    """Parse and validate a model document (dict or JSON text).

    ``exact=None`` auto-detects: any "num/den" rational string switches the
    model into exact Fraction mode.  ``exact=False`` forces float parsing.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SchemaError("model document must be a JSON object")
    mtype = document.get("type")
    if mtype not in _VARIANTS:
        raise SchemaError(f"model type must be one of {_VARIANTS}, got {mtype!r}")
    body = document.get(mtype)
    if not isinstance(body, dict):
        raise SchemaError(f"missing or malformed {mtype!r} section")
    if exact is None:
        exact = _contains_rational_string(body)
    if mtype == "product":
        return _parse_product(body, exact)
    if mtype == "markov":
        return _parse_markov(body, exact)
    if mtype == "tree":
        return _parse_tree(body, exact)
    return _parse_gaussian(body)


def load_model(path, *, exact: Optional[bool] = None) -> KernelPairModel:
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    return parse_model(text, exact=exact)


def _emit_number(value: Number):
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return value


def _emit_vector(values) -> list:
    return [_emit_number(v) for v in values]


def serialize_model(model: KernelPairModel) -> dict:
    """Inverse of parse_model on validated models (bit-exact round trip)."""
    if isinstance(model, ProductModel):
        body: dict = {
            "coordinates": [
                {"p": _emit_vector(step.p), "q": _emit_vector(step.q)}
                for step in model.coordinates
            ]
        }
        if model.tail is not None:
            body["tail"] = model.tail.params()
        return {"type": "product", "product": body}
    if isinstance(model, MarkovModel):
        return {
            "type": "markov",
            "markov": {
                "states": model.alphabet.size,
                "P": [_emit_vector(row) for row in model.transition_p],
                "Q": [_emit_vector(row) for row in model.transition_q],
                "init_p": _emit_vector(model.init_p),
                "init_q": _emit_vector(model.init_q),
            },
        }
    if isinstance(model, TreeModel):
        keys = sorted(model.kernels, key=lambda prefix: (len(prefix), prefix))
        return {
            "type": "tree",
            "tree": {
                "alphabet": model.alphabet.size,
                "depth": model.depth,
                "kernels": {
                    format_prefix(prefix): {
                        "p": _emit_vector(model.kernels[prefix].p),
                        "q": _emit_vector(model.kernels[prefix].q),
                    }
                    for prefix in keys
                },
            },
        }
    if isinstance(model, GaussianProductModel):
        body = {
            "coordinates": [
                {
                    "mu": coord.mu,
                    "mu_q": coord.mu_q,
                    "sigma": coord.sigma,
                    "sigma_q": coord.sigma_q,
                }
                for coord in model.coordinates
            ]
        }
        if model.tail is not None:
            body["tail"] = model.tail.params()
        return {"type": "gaussian_product", "gaussian_product": body}
    raise TypeError(f"cannot serialize {type(model).__name__}")


def conditional_kernels(model: KernelPairModel, prefix: Prefix) -> KernelStep:
    """The conditional laws of coordinate |prefix|+1 under both measures."""
    return model.kernel(tuple(prefix))


def step_affinity(model: KernelPairModel, prefix: Prefix):
    """One-step affinity at the prefix; in [0, 1], and 1 iff the laws agree."""
    return model.step_affinity(tuple(prefix))
