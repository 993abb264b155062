"""Scalars, exact rationals, polynomials as monomial sums, and linear
arithmetic circuits with subgradients.

Vectors are plain 1-d numpy float arrays; exact arithmetic uses
``fractions.Fraction`` (aliased ``Rational``) where a construction demands
exactness (circuit constants, polynomial coefficients, 1-d integrals).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

Rational = Fraction

_CIRCUIT_OPS = ("input", "const", "add", "sub", "min", "max", "scale")


class DimensionMismatch(ValueError):
    pass


def as_rational(value) -> Fraction:
    """Parse a rational from int, Fraction, 'num/den' or decimal string.

    Floats are rejected: decimal strings keep cross-implementation JSON
    unambiguous, a float literal would not.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"not a rational: {value!r}")


def rational_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}" if q.denominator != 1 else str(q.numerator)


def as_vec(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite vector component")
    return v


# ---------------------------------------------------------------------------
# Linear arithmetic circuits: DAG over {+, -, min, max, x*zeta, constants}
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gate:
    op: str
    args: tuple[int, ...] = ()
    value: Fraction | None = None  # const / scale coefficient


@dataclass
class LinCircuit:
    """Topologically ordered gate list; gate 0..n_inputs-1 are the inputs."""

    n_inputs: int
    gates: list[Gate] = field(default_factory=list)
    outputs: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.n_inputs <= 0:
            raise ValueError("circuit needs at least one input")
        for idx, g in enumerate(self.gates):
            pos = self.n_inputs + idx
            if g.op not in _CIRCUIT_OPS or g.op == "input":
                raise ValueError(f"bad gate op {g.op!r}")
            if g.op in ("add", "sub", "min", "max"):
                if len(g.args) != 2:
                    raise ValueError(f"{g.op} gate takes two arguments")
            elif g.op == "scale":
                if len(g.args) != 1 or g.value is None:
                    raise ValueError("scale gate takes one argument and a constant")
            elif g.op == "const":
                if g.args or g.value is None:
                    raise ValueError("const gate takes no arguments")
            for a in g.args:
                if not 0 <= a < pos:
                    raise ValueError(f"gate {pos} references later/unknown gate {a}")
        for o in self.outputs:
            if not 0 <= o < self.n_inputs + len(self.gates):
                raise ValueError(f"unknown output gate {o}")

    @property
    def size(self) -> int:
        return self.n_inputs + len(self.gates)

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def to_json(self) -> dict:
        gates = []
        for i in range(self.n_inputs):
            gates.append({"op": "input"})
        for g in self.gates:
            rec = {"op": g.op, "args": list(g.args)}
            if g.value is not None:
                rec["value"] = rational_str(g.value)
            gates.append(rec)
        return {"inputs": self.n_inputs, "gates": gates, "outputs": list(self.outputs)}

    @classmethod
    def from_json(cls, data: dict) -> "LinCircuit":
        n_inputs = int(data["inputs"])
        gates = []
        for idx, rec in enumerate(data["gates"]):
            if rec["op"] == "input":
                if idx >= n_inputs:
                    raise ValueError("input gates must come first")
                continue
            value = as_rational(rec["value"]) if "value" in rec else None
            gates.append(Gate(rec["op"], tuple(rec.get("args", ())), value))
        return cls(n_inputs, gates, [int(o) for o in data["outputs"]])


def eval_circuit(c: LinCircuit, x) -> np.ndarray:
    """Deterministic forward evaluation of all gates; returns the outputs."""
    x = as_vec(x)
    if len(x) != c.n_inputs:
        raise DimensionMismatch(f"circuit has {c.n_inputs} inputs, got {len(x)}")
    vals = np.empty(c.size)
    vals[: c.n_inputs] = x
    for idx, g in enumerate(c.gates):
        pos = c.n_inputs + idx
        if g.op == "const":
            vals[pos] = float(g.value)
        elif g.op == "add":
            vals[pos] = vals[g.args[0]] + vals[g.args[1]]
        elif g.op == "sub":
            vals[pos] = vals[g.args[0]] - vals[g.args[1]]
        elif g.op == "min":
            vals[pos] = min(vals[g.args[0]], vals[g.args[1]])
        elif g.op == "max":
            vals[pos] = max(vals[g.args[0]], vals[g.args[1]])
        else:  # scale
            vals[pos] = float(g.value) * vals[g.args[0]]
    return vals[c.outputs].copy()


def subgradient_circuit(c: LinCircuit, x) -> np.ndarray:
    """Forward-mode subgradient, one row per output.

    Chain rule through +, -, x*zeta; at min/max the active branch is taken
    and ties go to the first argument, so the result is always one valid
    Clarke subgradient element.
    """
    x = as_vec(x)
    if len(x) != c.n_inputs:
        raise DimensionMismatch(f"circuit has {c.n_inputs} inputs, got {len(x)}")
    vals = np.empty(c.size)
    grads = np.zeros((c.size, c.n_inputs))
    vals[: c.n_inputs] = x
    grads[: c.n_inputs] = np.eye(c.n_inputs)
    for idx, g in enumerate(c.gates):
        pos = c.n_inputs + idx
        if g.op == "const":
            vals[pos] = float(g.value)
        elif g.op == "add":
            a, b = g.args
            vals[pos] = vals[a] + vals[b]
            grads[pos] = grads[a] + grads[b]
        elif g.op == "sub":
            a, b = g.args
            vals[pos] = vals[a] - vals[b]
            grads[pos] = grads[a] - grads[b]
        elif g.op in ("min", "max"):
            a, b = g.args
            take_first = vals[a] <= vals[b] if g.op == "min" else vals[a] >= vals[b]
            src = a if take_first else b
            vals[pos] = vals[src]
            grads[pos] = grads[src]
        else:  # scale
            (a,) = g.args
            vals[pos] = float(g.value) * vals[a]
            grads[pos] = float(g.value) * grads[a]
    return grads[c.outputs].copy()


def identity_circuit(d: int) -> LinCircuit:
    return LinCircuit(d, [], list(range(d)))


def affine_circuit(weights, offsets) -> LinCircuit:
    """Circuit for x -> W x + b with rational entries, one output per row."""
    weights = [[as_rational(w) for w in row] for row in weights]
    offsets = [as_rational(b) for b in offsets]
    d = len(weights[0])
    circ_gates: list[Gate] = []
    outputs = []
    pos = d
    for row, off in zip(weights, offsets):
        acc = None
        for j, w in enumerate(row):
            if w == 0:
                continue
            circ_gates.append(Gate("scale", (j,), w))
            term = pos
            pos += 1
            if acc is None:
                acc = term
            else:
                circ_gates.append(Gate("add", (acc, term)))
                acc = pos
                pos += 1
        circ_gates.append(Gate("const", (), off))
        const = pos
        pos += 1
        if acc is None:
            acc = const
        else:
            circ_gates.append(Gate("add", (acc, const)))
            acc = pos
            pos += 1
        outputs.append(acc)
    return LinCircuit(d, circ_gates, outputs)


# ---------------------------------------------------------------------------
# Polynomials as monomial sums with exact rational coefficients
# ---------------------------------------------------------------------------

class Polynomial:
    """Multivariate polynomial stored as {exponent tuple: Fraction coeff}.

    No zero coefficients are kept and exponent tuples are unique.
    """

    __slots__ = ("dim", "monomials", "_eval_cache", "_grad_cache")

    def __init__(self, dim: int, monomials=None):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.monomials: dict[tuple[int, ...], Fraction] = {}
        if monomials:
            items = monomials.items() if isinstance(monomials, dict) else monomials
            for exps, coeff in items:
                self._add_term(tuple(int(e) for e in exps), as_rational(coeff))
        self._eval_cache = None
        self._grad_cache = None

    def _add_term(self, exps: tuple[int, ...], coeff: Fraction):
        if len(exps) != self.dim:
            raise DimensionMismatch("exponent vector length != dim")
        if any(e < 0 for e in exps):
            raise ValueError("negative exponent")
        c = self.monomials.get(exps, Fraction(0)) + coeff
        if c == 0:
            self.monomials.pop(exps, None)
        else:
            self.monomials[exps] = c
        self._eval_cache = None
        self._grad_cache = None

    # -- algebra -----------------------------------------------------------

    def __add__(self, other):
        out = Polynomial(self.dim, self.monomials)
        if isinstance(other, Polynomial):
            if other.dim != self.dim:
                raise DimensionMismatch("polynomial dims differ")
            for e, c in other.monomials.items():
                out._add_term(e, c)
        else:
            out._add_term((0,) * self.dim, as_rational(other))
        return out

    def __sub__(self, other):
        return self + (other * -1 if isinstance(other, Polynomial) else -as_rational(other))

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            if other.dim != self.dim:
                raise DimensionMismatch("polynomial dims differ")
            out = Polynomial(self.dim)
            for e1, c1 in self.monomials.items():
                for e2, c2 in other.monomials.items():
                    out._add_term(tuple(a + b for a, b in zip(e1, e2)), c1 * c2)
            return out
        q = as_rational(other)
        return Polynomial(self.dim, {e: c * q for e, c in self.monomials.items()})

    __rmul__ = __mul__

    def degree(self) -> int:
        return max((sum(e) for e in self.monomials), default=0)

    # -- evaluation ---------------------------------------------------------

    def _compiled(self):
        if self._eval_cache is None:
            exps = np.array(sorted(self.monomials), dtype=np.int64).reshape(len(self.monomials), self.dim)
            coeffs = np.array([float(self.monomials[tuple(e)]) for e in exps])
            self._eval_cache = (exps, coeffs, int(exps.max()) if exps.size else 0)
        return self._eval_cache

    def eval(self, x) -> float:
        x = as_vec(x)
        if len(x) != self.dim:
            raise DimensionMismatch(f"polynomial has dim {self.dim}, got {len(x)}")
        exps, coeffs, maxdeg = self._compiled()
        if not exps.size:
            return 0.0
        powers = np.ones((maxdeg + 1, self.dim))
        for k in range(1, maxdeg + 1):
            powers[k] = powers[k - 1] * x
        terms = powers[exps, np.arange(self.dim)].prod(axis=1)
        return float(terms @ coeffs)

    def eval_exact(self, x: Sequence[Fraction]) -> Fraction:
        xs = [as_rational(v) for v in x]
        if len(xs) != self.dim:
            raise DimensionMismatch("bad point dimension")
        total = Fraction(0)
        for e, c in self.monomials.items():
            term = c
            for xi, ei in zip(xs, e):
                term *= xi**ei
            total += term
        return total

    def grad(self, x) -> np.ndarray:
        x = as_vec(x)
        if len(x) != self.dim:
            raise DimensionMismatch(f"polynomial has dim {self.dim}, got {len(x)}")
        if self._grad_cache is None:
            self._grad_cache = [self.partial(j) for j in range(self.dim)]
        return np.array([pj.eval(x) for pj in self._grad_cache])

    def partial(self, j: int) -> "Polynomial":
        out = Polynomial(self.dim)
        for e, c in self.monomials.items():
            if e[j] > 0:
                ne = list(e)
                ne[j] -= 1
                out._add_term(tuple(ne), c * e[j])
        return out

    # -- univariate helpers ---------------------------------------------------

    def coeff_list(self) -> list[Fraction]:
        """Dense coefficient list, univariate polynomials only."""
        if self.dim != 1:
            raise DimensionMismatch("coeff_list is univariate-only")
        deg = self.degree()
        out = [Fraction(0)] * (deg + 1)
        for (e,), c in self.monomials.items():
            out[e] = c
        return out

    def antiderivative(self) -> "Polynomial":
        if self.dim != 1:
            raise DimensionMismatch("antiderivative is univariate-only")
        return Polynomial(1, {(e + 1,): c / (e + 1) for (e,), c in self.monomials.items()})

    def compose_affine(self, a: Fraction, b: Fraction) -> "Polynomial":
        """p(a*z + b) exactly, by the binomial transform
        c'_j = sum_{i >= j} c_i C(i,j) a^j b^(i-j)."""
        if self.dim != 1:
            raise DimensionMismatch("compose_affine is univariate-only")
        a, b = as_rational(a), as_rational(b)
        out: dict[tuple[int], Fraction] = {}
        for (i,), c in self.monomials.items():
            if b == 0:
                term = c * a**i
                out[(i,)] = out.get((i,), Fraction(0)) + term
                continue
            bpow = Fraction(1)
            for j in range(i, -1, -1):
                term = c * comb(i, j) * a**j * bpow
                out[(j,)] = out.get((j,), Fraction(0)) + term
                bpow *= b
        return Polynomial(1, {e: c for e, c in out.items() if c != 0})

    def substitute_difference(self, dim: int, i: int, j: int) -> "Polynomial":
        """Expand p(x_i - x_j) into a dim-variate polynomial (binomials)."""
        if self.dim != 1:
            raise DimensionMismatch("substitute_difference is univariate-only")
        out = Polynomial(dim)
        for (e,), c in self.monomials.items():
            for t in range(e + 1):
                exps = [0] * dim
                exps[i] += t
                exps[j] += e - t
                out._add_term(tuple(exps), c * comb(e, t) * (-1) ** (e - t))
        return out

    # -- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        monos = [{"coeff": rational_str(c), "exps": list(e)} for e, c in sorted(self.monomials.items())]
        return {"dim": self.dim, "monomials": monos}

    @classmethod
    def from_json(cls, data: dict) -> "Polynomial":
        return cls(int(data["dim"]), [(m["exps"], as_rational(m["coeff"])) for m in data["monomials"]])

    def __repr__(self):
        return f"Polynomial(dim={self.dim}, n_terms={len(self.monomials)}, deg={self.degree()})"


def eval_poly(p: Polynomial, x) -> float:
    return p.eval(x)


def grad_poly(p: Polynomial, x) -> np.ndarray:
    return p.grad(x)


def integrate_poly_1d(p: Polynomial, a, b) -> Fraction:
    """Exact integral of a univariate rational polynomial over [a, b]."""
    anti = p.antiderivative()
    return anti.eval_exact([as_rational(b)]) - anti.eval_exact([as_rational(a)])
