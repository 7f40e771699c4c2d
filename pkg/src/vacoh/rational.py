"""Exact multivariate rational arithmetic with a prescribed pole structure.

Everything is computed over the rationals (``fractions.Fraction``).  The two
workhorse types are

  MPoly        -- sparse multivariate polynomial, exponent tuple -> Fraction
  DiagRational -- MPoly numerator over a denominator that is a product of
                  variable powers z_i^a ("origin" factors) and powers of
                  differences (z_i - z_j)^b ("diagonal" factors)

A DiagRational is always kept in canceled form, so structural equality decides
mathematical equality.  The module also provides truncated Laurent expansion
of a DiagRational in a chosen variable (``series_expand`` / ``chart_expand``)
and the inverse operation ``reconstruct_chart`` that rebuilds a DiagRational
from finitely many expansion coefficients against a declared pole budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterable, Mapping, Sequence


Q = Fraction

__all__ = [
    "Q",
    "MPoly",
    "DiagRational",
    "TruncSeries",
    "ReconstructionError",
    "poly_arith",
    "rat_normalize",
    "partial_derivative",
    "series_expand",
    "rational_reconstruct",
    "chart_expand",
    "reconstruct_chart",
]


def _q(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


class MPoly:
    """Sparse polynomial over Q in named variables.

    ``terms`` maps exponent tuples (aligned with ``vars``) to nonzero
    coefficients.  The zero polynomial has an empty term map.  Instances are
    treated as immutable; arithmetic returns fresh objects and auto-aligns
    variable lists by union.
    """

    __slots__ = ("vars", "terms")

    def __init__(self, variables: Sequence[str], terms: Mapping[tuple, Fraction] | None = None):
        self.vars = tuple(variables)
        cleaned = {}
        if terms:
            for exp, c in terms.items():
                c = _q(c)
                if c != 0:
                    cleaned[tuple(exp)] = c
        self.terms = cleaned

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero(variables: Sequence[str] = ()) -> "MPoly":
        return MPoly(variables, {})

    @staticmethod
    def const(c, variables: Sequence[str] = ()) -> "MPoly":
        c = _q(c)
        if c == 0:
            return MPoly(variables, {})
        return MPoly(variables, {(0,) * len(tuple(variables)): c})

    @staticmethod
    def var(name: str) -> "MPoly":
        return MPoly((name,), {(1,): Q(1)})

    @staticmethod
    def linear(coeffs: Mapping[str, Fraction]) -> "MPoly":
        """Linear form sum(c_v * v)."""
        names = tuple(sorted(coeffs))
        terms = {}
        for i, v in enumerate(names):
            e = [0] * len(names)
            e[i] = 1
            terms[tuple(e)] = _q(coeffs[v])
        return MPoly(names, terms)

    # -- bookkeeping ---------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return all(all(e == 0 for e in exp) for exp in self.terms)

    def const_value(self) -> Fraction:
        if not self.terms:
            return Q(0)
        if not self.is_const():
            raise ValueError("not a constant polynomial")
        return next(iter(self.terms.values()))

    def used_vars(self) -> set:
        used = set()
        for exp in self.terms:
            for v, e in zip(self.vars, exp):
                if e:
                    used.add(v)
        return used

    def on_vars(self, variables: Sequence[str]) -> "MPoly":
        """Re-express on a variable list that must contain every used var."""
        variables = tuple(variables)
        if variables == self.vars:
            return self
        pos = {v: i for i, v in enumerate(variables)}
        missing = self.used_vars() - set(variables)
        if missing:
            raise ValueError(f"variables {sorted(missing)} not in target list")
        terms = {}
        for exp, c in self.terms.items():
            new = [0] * len(variables)
            for v, e in zip(self.vars, exp):
                if e:
                    new[pos[v]] = e
            key = tuple(new)
            terms[key] = terms.get(key, Q(0)) + c
        return MPoly(variables, terms)

    def _aligned(self, other: "MPoly") -> tuple["MPoly", "MPoly"]:
        if self.vars == other.vars:
            return self, other
        union = tuple(sorted(set(self.vars) | set(other.vars)))
        return self.on_vars(union), other.on_vars(union)

    # -- ring operations -----------------------------------------------

    def __add__(self, other) -> "MPoly":
        if not isinstance(other, MPoly):
            other = MPoly.const(other, self.vars)
        a, b = self._aligned(other)
        terms = dict(a.terms)
        for exp, c in b.terms.items():
            s = terms.get(exp, Q(0)) + c
            if s == 0:
                terms.pop(exp, None)
            else:
                terms[exp] = s
        return MPoly(a.vars, terms)

    __radd__ = __add__

    def __neg__(self) -> "MPoly":
        return MPoly(self.vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "MPoly":
        return self + (-other if isinstance(other, MPoly) else MPoly.const(-_q(other), self.vars))

    def __rsub__(self, other) -> "MPoly":
        return (-self) + other

    def __mul__(self, other) -> "MPoly":
        if not isinstance(other, MPoly):
            c = _q(other)
            if c == 0:
                return MPoly(self.vars, {})
            return MPoly(self.vars, {e: c * v for e, v in self.terms.items()})
        a, b = self._aligned(other)
        out: dict = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                key = tuple(x + y for x, y in zip(e1, e2))
                s = out.get(key, Q(0)) + c1 * c2
                if s == 0:
                    out.pop(key, None)
                else:
                    out[key] = s
        return MPoly(a.vars, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "MPoly":
        if n < 0:
            raise ValueError("negative power of a polynomial")
        result = MPoly.const(1, self.vars)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, MPoly):
            return self.is_const() and self.const_value() == _q(other)
        a, b = self._aligned(other)
        return a.terms == b.terms

    def __hash__(self):
        used = tuple(sorted(self.used_vars()))
        p = self.on_vars(used) if used != self.vars else self
        return hash((p.vars, frozenset(p.terms.items())))

    # -- calculus and evaluation ----------------------------------------

    def derivative(self, var: str) -> "MPoly":
        if var not in self.vars:
            return MPoly(self.vars, {})
        i = self.vars.index(var)
        terms = {}
        for exp, c in self.terms.items():
            if exp[i] == 0:
                continue
            new = list(exp)
            new[i] -= 1
            key = tuple(new)
            terms[key] = terms.get(key, Q(0)) + c * exp[i]
        return MPoly(self.vars, terms)

    def substitute(self, assignment: Mapping[str, "MPoly"]) -> "MPoly":
        """Substitute polynomials for variables (others left alone)."""
        out = MPoly.zero()
        for exp, c in self.terms.items():
            term = MPoly.const(c)
            for v, e in zip(self.vars, exp):
                if e == 0:
                    continue
                repl = assignment.get(v)
                term = term * (repl if repl is not None else MPoly.var(v)) ** e
            out = out + term
        return out

    def eval(self, point: Mapping[str, Fraction]) -> Fraction:
        total = Q(0)
        for exp, c in self.terms.items():
            val = c
            for v, e in zip(self.vars, exp):
                if e:
                    val *= _q(point[v]) ** e
            total += val
        return total

    def degree(self) -> int:
        """Total degree; the zero polynomial reports -1."""
        if not self.terms:
            return -1
        return max(sum(exp) for exp in self.terms)

    def var_degree(self, var: str) -> int:
        if var not in self.vars or not self.terms:
            return 0
        i = self.vars.index(var)
        return max(exp[i] for exp in self.terms)

    def is_homogeneous(self) -> bool:
        degrees = {sum(exp) for exp in self.terms}
        return len(degrees) <= 1

    # -- exact division by the distinguished linear factors -------------

    def divisible_by_var(self, var: str) -> bool:
        if var not in self.vars:
            return self.is_zero()
        i = self.vars.index(var)
        return all(exp[i] >= 1 for exp in self.terms)

    def div_var(self, var: str) -> "MPoly":
        i = self.vars.index(var)
        terms = {}
        for exp, c in self.terms.items():
            new = list(exp)
            new[i] -= 1
            if new[i] < 0:
                raise ValueError("not divisible")
            terms[tuple(new)] = c
        return MPoly(self.vars, terms)

    def divisible_by_diff(self, va: str, vb: str) -> bool:
        """Divisibility by (va - vb), tested by substitution va -> vb."""
        if self.is_zero():
            return True
        if va not in self.vars:
            return False
        # cheap certain rejection: evaluate at a fixed point with va = vb
        point = {}
        seed = 3
        for v in self.vars:
            seed = (seed * 37 + 11) % 1009
            point[v] = Q(seed + 2, 7)
        point.setdefault(vb, Q(5, 3))
        point[va] = point[vb]
        if self.eval(point) != 0:
            return False
        ia = self.vars.index(va)
        ib = self.vars.index(vb) if vb in self.vars else None
        merged: dict = {}
        for exp, c in self.terms.items():
            e = list(exp)
            moved = e[ia]
            e[ia] = 0
            if ib is not None:
                e[ib] += moved
                key = tuple(e)
            else:
                key = tuple(e) + (moved,)
            merged[key] = merged.get(key, Q(0)) + c
        return all(c == 0 for c in merged.values())

    def div_diff(self, va: str, vb: str) -> "MPoly":
        """Exact quotient by (va - vb); caller must check divisibility."""
        union = tuple(sorted(set(self.vars) | {va, vb}))
        p = self.on_vars(union)
        ia = union.index(va)
        quotient: dict = {}
        work = dict(p.terms)
        while work:
            deg = max(exp[ia] for exp in work)
            if deg == 0:
                if any(c != 0 for c in work.values()):
                    raise ValueError("not divisible by difference")
                break
            layer = {exp: c for exp, c in work.items() if exp[ia] == deg}
            for exp, c in layer.items():
                qexp = list(exp)
                qexp[ia] -= 1
                quotient[tuple(qexp)] = quotient.get(tuple(qexp), Q(0)) + c
                # subtract c * z_a^(deg-1) * (z_a - z_b) from the remainder
                del work[exp]
                bexp = list(exp)
                bexp[ia] -= 1
                bexp[union.index(vb)] += 1
                key = tuple(bexp)
                s = work.get(key, Q(0)) + c
                if s == 0:
                    work.pop(key, None)
                else:
                    work[key] = s
        return MPoly(union, quotient)

    # -- printing --------------------------------------------------------

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        def mono_key(exp):
            return (-sum(exp), tuple(-e for e in exp))
        pieces = []
        for exp in sorted(self.terms, key=mono_key):
            c = self.terms[exp]
            factors = [f"{v}^{e}" if e != 1 else v for v, e in zip(self.vars, exp) if e]
            body = "*".join(factors)
            if not body:
                pieces.append(str(c))
            elif c == 1:
                pieces.append(body)
            elif c == -1:
                pieces.append(f"-{body}")
            else:
                pieces.append(f"{c}*{body}")
        out = pieces[0]
        for p in pieces[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    def __repr__(self) -> str:
        return f"MPoly({self})"


def poly_arith(a: MPoly, b: MPoly, op: str) -> MPoly:
    """Spec-surface polynomial arithmetic: op in {'add', 'mul'}."""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def _pair(a: str, b: str) -> tuple:
    """Canonical ordered pair for a diagonal factor (z_a - z_b), a < b."""
    if a == b:
        raise ValueError("diagonal factor needs two distinct variables")
    return (a, b) if a < b else (b, a)


class DiagRational:
    """num / (prod z^origin * prod (z_a - z_b)^diagonal), canceled form.

    ``origins`` maps a variable name to the positive order of its origin
    pole; ``diagonals`` maps a sorted variable pair to the positive order of
    the corresponding difference factor.  The constructor cancels common
    factors, so two instances are equal iff they represent the same rational
    function.
    """

    __slots__ = ("num", "origins", "diagonals")

    def __init__(self, num: MPoly, origins: Mapping[str, int] | None = None,
                 diagonals: Mapping[tuple, int] | None = None, _normalized: bool = False):
        origins = {v: int(o) for v, o in (origins or {}).items() if o}
        diagonals = {_pair(*p): int(o) for p, o in (diagonals or {}).items() if o}
        if any(o < 0 for o in origins.values()) or any(o < 0 for o in diagonals.values()):
            raise ValueError("pole orders must be non-negative")
        if not _normalized:
            if num.is_zero():
                origins, diagonals = {}, {}
            else:
                for v in list(origins):
                    while origins[v] and num.divisible_by_var(v):
                        num = num.div_var(v)
                        origins[v] -= 1
                    if not origins[v]:
                        del origins[v]
                for pair in list(diagonals):
                    while diagonals[pair] and num.divisible_by_diff(*pair):
                        num = num.div_diff(*pair)
                        diagonals[pair] -= 1
                    if not diagonals[pair]:
                        del diagonals[pair]
        self.num = num
        self.origins = origins
        self.diagonals = diagonals

    # -- constructors ----------------------------------------------------

    @staticmethod
    def const(c) -> "DiagRational":
        return DiagRational(MPoly.const(c), {}, {}, _normalized=True)

    @staticmethod
    def zero() -> "DiagRational":
        return DiagRational(MPoly.zero(), {}, {}, _normalized=True)

    @staticmethod
    def from_poly(p: MPoly) -> "DiagRational":
        return DiagRational(p, {}, {}, _normalized=True)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    # -- denominators ------------------------------------------------------

    def denominator_poly(self) -> MPoly:
        den = MPoly.const(1)
        for v, o in sorted(self.origins.items()):
            den = den * MPoly.var(v) ** o
        for (a, b), o in sorted(self.diagonals.items()):
            den = den * (MPoly.var(a) - MPoly.var(b)) ** o
        return den

    def denom_degree(self) -> int:
        return sum(self.origins.values()) + sum(self.diagonals.values())

    def used_vars(self) -> set:
        used = set(self.num.used_vars())
        used.update(self.origins)
        for a, b in self.diagonals:
            used.add(a)
            used.add(b)
        return used

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other) -> "DiagRational":
        if not isinstance(other, DiagRational):
            other = DiagRational.const(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        origins = dict(self.origins)
        for v, o in other.origins.items():
            origins[v] = max(origins.get(v, 0), o)
        diagonals = dict(self.diagonals)
        for p, o in other.diagonals.items():
            diagonals[p] = max(diagonals.get(p, 0), o)

        def lift(f: "DiagRational") -> MPoly:
            num = f.num
            for v, o in origins.items():
                extra = o - f.origins.get(v, 0)
                if extra:
                    num = num * MPoly.var(v) ** extra
            for (a, b), o in diagonals.items():
                extra = o - f.diagonals.get((a, b), 0)
                if extra:
                    num = num * (MPoly.var(a) - MPoly.var(b)) ** extra
            return num

        return DiagRational(lift(self) + lift(other), origins, diagonals)

    __radd__ = __add__

    def __neg__(self) -> "DiagRational":
        return DiagRational(-self.num, self.origins, self.diagonals, _normalized=True)

    def __sub__(self, other) -> "DiagRational":
        if not isinstance(other, DiagRational):
            other = DiagRational.const(other)
        return self + (-other)

    def __rsub__(self, other) -> "DiagRational":
        return (-self) + other

    def __mul__(self, other) -> "DiagRational":
        if not isinstance(other, DiagRational):
            c = _q(other)
            if c == 0:
                return DiagRational.zero()
            return DiagRational(self.num * c, self.origins, self.diagonals, _normalized=True)
        if self.is_zero() or other.is_zero():
            return DiagRational.zero()
        origins = dict(self.origins)
        for v, o in other.origins.items():
            origins[v] = origins.get(v, 0) + o
        diagonals = dict(self.diagonals)
        for p, o in other.diagonals.items():
            diagonals[p] = diagonals.get(p, 0) + o
        return DiagRational(self.num * other.num, origins, diagonals)

    __rmul__ = __mul__

    def divide_by_factors(self, origins: Mapping[str, int] | None = None,
                          diagonals: Mapping[tuple, int] | None = None) -> "DiagRational":
        o = dict(self.origins)
        for v, k in (origins or {}).items():
            if k:
                o[v] = o.get(v, 0) + k
        d = dict(self.diagonals)
        for p, k in (diagonals or {}).items():
            if k:
                d[_pair(*p)] = d.get(_pair(*p), 0) + k
        return DiagRational(self.num, o, d)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiagRational):
            other = DiagRational.const(other)
        return (self.num == other.num and self.origins == other.origins
                and self.diagonals == other.diagonals)

    def __hash__(self):
        return hash((hash(self.num), frozenset(self.origins.items()),
                     frozenset(self.diagonals.items())))

    def derivative(self, var: str) -> "DiagRational":
        # quotient rule, one denominator factor at a time
        result = DiagRational(self.num.derivative(var), self.origins, self.diagonals)
        for v, o in self.origins.items():
            if v != var:
                continue
            extra = DiagRational(self.num * (-o), {**self.origins, v: o + 1}, self.diagonals)
            result = result + extra
        for (a, b), o in self.diagonals.items():
            if var == a:
                sign = -o
            elif var == b:
                sign = o
            else:
                continue
            extra = DiagRational(self.num * sign, self.origins,
                                 {**self.diagonals, (a, b): o + 1})
            result = result + extra
        return result

    def eval(self, point: Mapping[str, Fraction]) -> Fraction:
        den = Q(1)
        for v, o in self.origins.items():
            val = _q(point[v])
            if val == 0:
                raise ZeroDivisionError(f"evaluation at origin pole {v}=0")
            den *= val ** o
        for (a, b), o in self.diagonals.items():
            val = _q(point[a]) - _q(point[b])
            if val == 0:
                raise ZeroDivisionError(f"evaluation at diagonal pole {a}={b}")
            den *= val ** o
        return self.num.eval(point) / den

    def scale_vars(self, factor: Fraction, variables: Iterable[str]) -> "DiagRational":
        """Substitute z -> factor*z for the given variables, exactly."""
        factor = _q(factor)
        scaled = set(variables)
        assignment = {v: MPoly.var(v) * factor for v in scaled}
        num = self.num.substitute(assignment)
        adjust = Q(1)
        for v, o in self.origins.items():
            if v in scaled:
                adjust /= factor ** o
        for (a, b), o in self.diagonals.items():
            if (a in scaled) != (b in scaled):
                raise ValueError("cannot scale one side of a diagonal factor")
            if a in scaled:
                adjust /= factor ** o
        return DiagRational(num * adjust, self.origins, self.diagonals)

    def rename_vars(self, mapping: Mapping[str, str]) -> "DiagRational":
        def nm(v):
            return mapping.get(v, v)
        new_names = [nm(v) for v in self.num.vars]
        if len(set(new_names)) != len(new_names):
            raise ValueError("variable renaming must stay injective")
        num = MPoly(tuple(new_names), self.num.terms)
        origins = {nm(v): o for v, o in self.origins.items()}
        diagonals = {}
        num_flip = 1
        for (a, b), o in self.diagonals.items():
            na, nb = nm(a), nm(b)
            if na < nb:
                diagonals[(na, nb)] = o
            else:
                diagonals[(nb, na)] = o
                if o % 2:
                    num_flip *= -1
        return DiagRational(num * num_flip, origins, diagonals, _normalized=True)

    def substitute_poly(self, var: str, replacement: MPoly) -> "DiagRational":
        """Substitute a polynomial for ``var`` (single variable)."""
        return self.substitute_linear({var: replacement})

    def substitute_linear(self, mapping: Mapping[str, MPoly]) -> "DiagRational":
        """Simultaneously substitute polynomials for variables.

        Every denominator factor must remain origin- or diagonal-shaped after
        substitution (variable, scaled variable, or difference of two), which
        the caller guarantees by construction.
        """
        num = self.num.substitute(dict(mapping))
        result = DiagRational.from_poly(num)
        for v, o in self.origins.items():
            form = mapping.get(v, MPoly.var(v))
            result = _divide_linear_form(result, form, o)
        for (a, b), o in self.diagonals.items():
            fa = mapping.get(a, MPoly.var(a))
            fb = mapping.get(b, MPoly.var(b))
            result = _divide_linear_form(result, fa - fb, o)
        return result

    def __str__(self) -> str:
        num = str(self.num)
        if not self.origins and not self.diagonals:
            return num
        parts = []
        for v in sorted(self.origins):
            o = self.origins[v]
            parts.append(v if o == 1 else f"{v}^{o}")
        for (a, b) in sorted(self.diagonals):
            o = self.diagonals[(a, b)]
            parts.append(f"({a}-{b})" if o == 1 else f"({a}-{b})^{o}")
        den = " ".join(parts)
        if len(self.num.terms) > 1:
            num = f"({num})"
        return f"{num} / {den}"

    def __repr__(self) -> str:
        return f"DiagRational({self})"


def _divide_linear_form(f: DiagRational, form: MPoly, order: int) -> DiagRational:
    """Divide f by form^order where form is c*z, or c*(z_a - z_b), or a constant."""
    if order == 0:
        return f
    used = sorted(form.used_vars())
    if not used:
        c = form.const_value()
        if c == 0:
            raise ZeroDivisionError("division by zero linear form")
        return f * (Q(1) / c ** order)
    if len(used) == 1:
        v = used[0]
        c = form.terms.get(tuple(1 if x == v else 0 for x in form.vars), Q(0))
        if form != MPoly.var(v) * c:
            raise ValueError(f"unsupported linear form {form}")
        return f.divide_by_factors(origins={v: order}) * (Q(1) / c ** order)
    if len(used) == 2:
        a, b = used
        ca = form.terms.get(tuple(1 if x == a else 0 for x in form.vars), Q(0))
        cb = form.terms.get(tuple(1 if x == b else 0 for x in form.vars), Q(0))
        if ca == -cb and form == MPoly.var(a) * ca + MPoly.var(b) * cb:
            return f.divide_by_factors(diagonals={(a, b): order}) * (Q(1) / ca ** order)
    raise ValueError(f"substituted denominator factor {form} is not origin/diagonal shaped")


def rat_normalize(f: DiagRational) -> DiagRational:
    """Re-cancel; the constructor already normalizes, so this is idempotent."""
    return DiagRational(f.num, f.origins, f.diagonals)


def partial_derivative(f: DiagRational, var: str) -> DiagRational:
    return f.derivative(var)


class ReconstructionError(ValueError):
    """Raised when series data does not fit the declared pole budget."""


# ---------------------------------------------------------------------------
# Chart expansion: Laurent coefficients of a DiagRational in one variable
# ---------------------------------------------------------------------------


def _binom_series(order_hi: int, b: int, ratio_sign: Fraction):
    """Coefficients c_t of (1 + s*x)^(-b) = sum_t c_t x^t up to order_hi."""
    out = []
    for t in range(order_hi + 1):
        out.append(Q(comb(b - 1 + t, t)) * (-ratio_sign) ** t)
    return out


def chart_expand(f: DiagRational, var: str, base: MPoly, order_hi: int,
                 sign: int = 1) -> dict:
    """Laurent coefficients of f under the substitution var = base + sign*xi.

    Returns {t: DiagRational in the remaining variables} for all exponents t
    with coefficient nonzero and t <= order_hi.  ``base`` must be 0, another
    variable, or a difference of two variables, so that every coefficient
    stays inside the DiagRational shape.  The expansion is the one valid for
    |xi| smaller than every |denominator base offset|.
    """
    if f.is_zero():
        return {}
    if sign not in (1, -1):
        raise ValueError("sign must be +-1")
    base = base.on_vars(tuple(sorted(base.used_vars()))) if base.used_vars() else MPoly.zero()
    if var in base.used_vars():
        raise ValueError("chart base may not involve the chart variable")

    # numerator: substitute and collect by xi power
    num_layers: dict[int, MPoly] = {}
    if var in f.num.vars:
        i = f.num.vars.index(var)
    else:
        i = None
    for exp, c in f.num.terms.items():
        rest_exp = exp if i is None else tuple(e for j, e in enumerate(exp) if j != i)
        rest_vars = f.num.vars if i is None else tuple(v for j, v in enumerate(f.num.vars) if j != i)
        mono = MPoly(rest_vars, {rest_exp: c})
        d = 0 if i is None else exp[i]
        # (base + s*xi)^d expanded by binomial
        for k in range(d + 1):
            coeff_poly = mono * Q(comb(d, k)) * (Q(sign) ** k) * (base ** (d - k) if d - k else MPoly.const(1))
            if coeff_poly.is_zero():
                continue
            num_layers[k] = num_layers.get(k, MPoly.zero()) + coeff_poly
    series: dict[int, DiagRational] = {
        t: DiagRational.from_poly(p) for t, p in num_layers.items() if not p.is_zero()
    }
    if not series:
        return {}

    def mul_series(s: dict, factor_series: dict, lo_cap: int) -> dict:
        out: dict[int, DiagRational] = {}
        for t1, c1 in s.items():
            for t2, c2 in factor_series.items():
                t = t1 + t2
                if t > order_hi + lo_cap:
                    continue
                prod = c1 * c2
                if prod.is_zero():
                    continue
                cur = out.get(t)
                out[t] = prod if cur is None else cur + prod
        return {t: c for t, c in out.items() if not c.is_zero()}

    # how much the pure-xi factors shift exponents downward; needed so that
    # intermediate truncation keeps everything that can land at <= order_hi
    shift_down = 0
    pure_factors = []
    expanded_factors = []
    passthrough_origins: dict[str, int] = {}
    passthrough_diagonals: dict[tuple, int] = {}

    for v, o in f.origins.items():
        if v != var:
            passthrough_origins[v] = o
            continue
        # 1/(base + s*xi)^o
        if base.is_zero():
            pure_factors.append(("xi", o, Q(sign) ** (-o) if sign == -1 else Q(1)))
            shift_down += o
        else:
            expanded_factors.append((base, o, Q(sign)))
    for (a, b), o in f.diagonals.items():
        if var not in (a, b):
            passthrough_diagonals[(a, b)] = o
            continue
        other, s_var = (b, 1) if a == var else (a, -1)
        # factor = s_var*(var - other) => s_var*(base - other + s*xi)
        offset = base - MPoly.var(other)
        if offset.is_zero():
            pure_factors.append(("xi", o, (Q(s_var) * Q(sign)) ** (-o)))
            shift_down += o
        else:
            expanded_factors.append((offset * s_var, o, Q(s_var) * Q(sign)))

    cap = order_hi + shift_down
    for offset, o, s in expanded_factors:
        # 1/(offset + s*xi)^o = offset^-o * sum_t C(o-1+t,t) (-s*xi/offset)^t
        fact: dict[int, DiagRational] = {}
        inv_offset = _divide_linear_form(DiagRational.const(1), offset, 1)
        pw = _divide_linear_form(DiagRational.const(1), offset, o)
        for t in range(cap + 1):
            coeff = pw * (Q(comb(o - 1 + t, t)) * (-s) ** t)
            fact[t] = coeff
            pw = pw * inv_offset
        series = mul_series(series, fact, shift_down)

    # apply pure xi factors as exponent shifts
    for _, o, scalar in pure_factors:
        series = {t - o: c * scalar for t, c in series.items()}

    passthrough = DiagRational(MPoly.const(1), passthrough_origins,
                               passthrough_diagonals, _normalized=True)
    out = {}
    for t, c in series.items():
        if t > order_hi:
            continue
        val = c * passthrough
        if not val.is_zero():
            out[t] = val
    return out


def reconstruct_chart(series: Mapping[int, DiagRational], var: str, base: MPoly,
                      origin_order: int, diag_orders: Mapping[str, int],
                      degree_hint: int, sign: int = 1,
                      margin: int = 2, verify: bool = False) -> DiagRational:
    """Rebuild f from its chart series against the declared var-pole budget.

    ``series`` holds the chart coefficients (exact DiagRationals in the other
    variables) for all exponents up to at least degree_hint + margin.
    ``origin_order`` bounds the var-origin pole, ``diag_orders`` maps other
    variable names to the allowed order of (var - other) poles.
    ``degree_hint`` bounds the var-degree of the cleared numerator.  Raises
    ReconstructionError when the data is inconsistent with the budget.

    The certificate is the cleared-layer window: clearing the declared
    denominator must leave nothing below order zero or inside the margin zone
    above the degree bound.  The rebuilt function then reproduces the input
    series identically through the computed window by construction, so the
    optional ``verify`` re-expansion is redundant and off by default.
    """
    if all(c.is_zero() for c in series.values()):
        return DiagRational.zero()
    cap = degree_hint + margin
    # Delta_var = var^origin_order * prod (var - other)^order, in the chart
    delta_chart: dict[int, MPoly] = {0: MPoly.const(1)}

    def poly_mul_chart(layers: dict[int, MPoly], lin0: MPoly, lin1: Fraction, power: int):
        # multiply layered poly by (lin0 + lin1*xi)^power
        for _ in range(power):
            out: dict[int, MPoly] = {}
            for t, p in layers.items():
                if not lin0.is_zero():
                    out[t] = out.get(t, MPoly.zero()) + p * lin0
                if lin1:
                    out[t + 1] = out.get(t + 1, MPoly.zero()) + p * lin1
            layers = {t: p for t, p in out.items() if not p.is_zero()}
        return layers

    delta_chart = poly_mul_chart(delta_chart, base, Q(sign), origin_order)
    for other, o in diag_orders.items():
        if not o:
            continue
        # the canonical factor is (min - max); express it in the chart
        if var < other:
            delta_chart = poly_mul_chart(delta_chart, base - MPoly.var(other), Q(sign), o)
        else:
            delta_chart = poly_mul_chart(delta_chart, MPoly.var(other) - base, -Q(sign), o)

    # U = series * Delta_var in the chart
    u: dict[int, DiagRational] = {}
    for t1, c1 in series.items():
        if c1.is_zero():
            continue
        for t2, p2 in delta_chart.items():
            t = t1 + t2
            if t > cap:
                continue
            term = c1 * DiagRational.from_poly(p2)
            if term.is_zero():
                continue
            cur = u.get(t)
            u[t] = term if cur is None else cur + term
    u = {t: c for t, c in u.items() if not c.is_zero()}

    for t in u:
        if t < 0:
            raise ReconstructionError(
                "pole budget violated or insufficient series depth: "
                f"negative chart exponent {t} survives after clearing")
        if t > degree_hint:
            raise ReconstructionError(
                "pole budget violated or insufficient series depth: "
                f"cleared numerator exceeds degree bound at exponent {t}")

    # reassemble as a function of the original variables; the cleared object
    # may legitimately keep denominators in the other variables
    shift = MPoly.var(var) - base  # equals sign*xi
    result = DiagRational.zero()
    for t, c in u.items():
        result = result + c * DiagRational.from_poly((Q(sign) ** t) * shift ** t)
    result = result.divide_by_factors(
        origins={var: origin_order},
        diagonals={_pair(var, other): o for other, o in diag_orders.items() if o})

    if verify:
        check = chart_expand(result, var, base, cap, sign=sign)
        keys = set(k for k in series if k <= cap) | set(check)
        for t in keys:
            a = series.get(t, DiagRational.zero())
            b = check.get(t, DiagRational.zero())
            if a != b:
                raise ReconstructionError(
                    f"pole budget violated or insufficient series depth: "
                    f"re-expansion mismatch at chart order {t}")
    return result


def reconstruct_top(series: Mapping[int, DiagRational], var: str,
                    origin_order: int, diag_orders: Mapping[str, int],
                    degree_hint: int, margin: int = 2) -> DiagRational:
    """Rebuild f from its large-|var| expansion against the var-pole budget.

    ``series`` holds coefficients of var^e for the expansion in the region
    where |var| dominates, complete for all e in
    [-(origin + sum diag) - margin, e_max].  Clearing the declared var-factors
    must leave a polynomial in var of degree <= degree_hint supported in
    non-negative powers; the margin zone below zero certifies the budget.
    """
    if all(c.is_zero() for c in series.values()):
        return DiagRational.zero()
    # polynomial expansion of var^origin * prod (var - u)^b in powers of var,
    # canonical factor orientation (min - max)
    delta_poly: dict[int, DiagRational] = {origin_order: DiagRational.const(1)}
    for other, b in diag_orders.items():
        if not b:
            continue
        sign = Q(1) if var < other else Q(-1) ** b
        new: dict[int, DiagRational] = {}
        for t in range(b + 1):
            coeff = DiagRational.from_poly(
                MPoly.var(other) ** t * (Q(comb(b, t)) * (-1) ** t * sign))
            for d, c in delta_poly.items():
                key = d + b - t
                term = c * coeff
                cur = new.get(key)
                new[key] = term if cur is None else cur + term
        delta_poly = {d: c for d, c in new.items() if not c.is_zero()}

    # contract: the caller computed the series over the whole window
    # [-(origin + sum diag) - margin, e_max]; zero coefficients are omitted
    deg_delta = origin_order + sum(diag_orders.values())

    u: dict[int, DiagRational] = {}
    for e, c in series.items():
        if c.is_zero():
            continue
        for d, dc in delta_poly.items():
            alpha = e + d
            if alpha < -margin:
                continue
            term = c * dc
            if term.is_zero():
                continue
            cur = u.get(alpha)
            u[alpha] = term if cur is None else cur + term
    u = {a: c for a, c in u.items() if not c.is_zero()}
    for alpha in u:
        if alpha < 0:
            raise ReconstructionError(
                "pole budget violated or insufficient series depth: "
                f"cleared numerator has negative exponent {alpha}")
        if alpha > degree_hint:
            raise ReconstructionError(
                "pole budget violated or insufficient series depth: "
                f"cleared numerator exceeds the degree bound at {alpha}")
    result = DiagRational.zero()
    for alpha, c in u.items():
        if alpha <= degree_hint:
            result = result + c * DiagRational.from_poly(MPoly.var(var) ** alpha)
    return result.divide_by_factors(
        origins={var: origin_order},
        diagonals={_pair(var, other): b for other, b in diag_orders.items() if b})


def scaled_shift_expand(f: DiagRational, shifts: Mapping[str, tuple], order_hi: int) -> dict:
    """Homogeneity slices of f under z -> base + tau*d for each shifted var.

    ``shifts`` maps a variable to (base, dvar) where base is a variable name
    or None (meaning 0) and dvar is a fresh displacement variable.  Returns
    {degree: DiagRational} collecting the coefficient of tau^degree, for
    degrees <= order_hi; every coefficient lives in the base and displacement
    variables (plus unshifted ones) and stays inside the DiagRational shape.
    """
    if f.is_zero():
        return {}

    def subst_of(v: str) -> tuple:
        # returns (offset var or None, displacement var or None)
        if v in shifts:
            return shifts[v]
        return (v, None)

    # numerator: substitute and collect by tau power
    tau = "@tau"
    assignment = {}
    for v, (base, dvar) in shifts.items():
        repl = MPoly.var(tau) * MPoly.var(dvar)
        if base is not None:
            repl = repl + MPoly.var(base)
        assignment[v] = repl
    num = f.num.substitute(assignment)
    layers: dict[int, MPoly] = {}
    if tau in num.vars:
        it = num.vars.index(tau)
        rest_vars = tuple(v for j, v in enumerate(num.vars) if j != it)
        for exp, c in num.terms.items():
            key = exp[it]
            rest = tuple(e for j, e in enumerate(exp) if j != it)
            layers.setdefault(key, MPoly.zero(rest_vars))
            layers[key] = layers[key] + MPoly(rest_vars, {rest: c})
    else:
        layers[0] = num
    series: dict[int, DiagRational] = {
        t: DiagRational.from_poly(p) for t, p in layers.items() if not p.is_zero()}

    # classify denominator factors: (offset, displacement, order)
    jobs = []
    for v, o in f.origins.items():
        base, dvar = subst_of(v)
        offset = MPoly.var(base) if base is not None else MPoly.zero()
        disp = MPoly.var(dvar) if dvar else MPoly.zero()
        jobs.append((offset, disp, o))
    for (a, b), o in f.diagonals.items():
        base_a, da = subst_of(a)
        base_b, db = subst_of(b)
        offset = MPoly.zero()
        if base_a is not None:
            offset = offset + MPoly.var(base_a)
        if base_b is not None:
            offset = offset - MPoly.var(base_b)
        disp = MPoly.zero()
        if da:
            disp = disp + MPoly.var(da)
        if db:
            disp = disp - MPoly.var(db)
        jobs.append((offset, disp, o))

    total_shift = sum(o for offset, disp, o in jobs
                      if offset.is_zero() and not disp.is_zero())
    cap = order_hi + total_shift
    emit_hi = cap + total_shift

    factor_series = []
    for offset, disp, o in jobs:
        if disp.is_zero():
            factor_series.append({0: _divide_linear_form(DiagRational.const(1), offset, o)})
        elif offset.is_zero():
            factor_series.append({-o: _divide_linear_form(DiagRational.const(1), disp, o)})
        else:
            fs = {}
            pw = _divide_linear_form(DiagRational.const(1), offset, o)
            inv_off = _divide_linear_form(DiagRational.const(1), offset, 1)
            disp_pow = DiagRational.const(1)
            for t in range(emit_hi + 1):
                coeff = pw * disp_pow * Q((-1) ** t * comb(o - 1 + t, t))
                if not coeff.is_zero():
                    fs[t] = coeff
                pw = pw * inv_off
                disp_pow = disp_pow * DiagRational.from_poly(disp)
            factor_series.append(fs)

    for fs in factor_series:
        out: dict[int, DiagRational] = {}
        for t1, c1 in series.items():
            for t2, c2 in fs.items():
                t = t1 + t2
                if t > cap:
                    continue
                prod = c1 * c2
                if prod.is_zero():
                    continue
                cur = out.get(t)
                out[t] = prod if cur is None else cur + prod
        series = {t: c for t, c in out.items() if not c.is_zero()}
    return {t: c for t, c in series.items() if t <= order_hi}


# ---------------------------------------------------------------------------
# The spec-level series surface
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncSeries:
    """Truncated Laurent series in one variable with DiagRational coefficients."""

    variable: str
    cutoff: int
    coefficients: tuple  # of (exponent, DiagRational), sorted by exponent

    @staticmethod
    def from_dict(variable: str, cutoff: int, coeffs: Mapping[int, DiagRational]) -> "TruncSeries":
        items = tuple(sorted((t, c) for t, c in coeffs.items()
                             if t <= cutoff and not c.is_zero()))
        return TruncSeries(variable, cutoff, items)

    def as_dict(self) -> dict:
        return dict(self.coefficients)

    def __add__(self, other: "TruncSeries") -> "TruncSeries":
        if other.variable != self.variable:
            raise ValueError("series variables differ")
        cutoff = min(self.cutoff, other.cutoff)
        out = dict(self.coefficients)
        for t, c in other.coefficients:
            out[t] = out.get(t, DiagRational.zero()) + c
        return TruncSeries.from_dict(self.variable, cutoff, out)

    def __mul__(self, other) -> "TruncSeries":
        if not isinstance(other, TruncSeries):
            out = {t: c * other for t, c in self.coefficients}
            return TruncSeries.from_dict(self.variable, self.cutoff, out)
        if other.variable != self.variable:
            raise ValueError("series variables differ")
        cutoff = min(self.cutoff, other.cutoff)
        out: dict[int, DiagRational] = {}
        for t1, c1 in self.coefficients:
            for t2, c2 in other.coefficients:
                if t1 + t2 > cutoff:
                    continue
                key = t1 + t2
                cur = out.get(key)
                prod = c1 * c2
                out[key] = prod if cur is None else cur + prod
        return TruncSeries.from_dict(self.variable, cutoff, out)

    __rmul__ = __mul__


def series_expand(f: DiagRational, region: Sequence[str], var: str, cutoff: int) -> TruncSeries:
    """Expand f in the region |region[0]| > |region[1]| > ... as a series in var.

    ``var`` must be the smallest variable of the region; coefficients are
    exact DiagRationals in the remaining variables.
    """
    region = tuple(region)
    missing = f.used_vars() - set(region)
    if missing:
        raise ValueError(f"unordered variable: {sorted(missing)}")
    if var not in region:
        raise ValueError(f"unordered variable: {var}")
    if region[-1] != var:
        raise ValueError("expansion variable must be minimal in the region")
    coeffs = chart_expand(f, var, MPoly.zero(), cutoff)
    return TruncSeries.from_dict(var, cutoff, coeffs)


def rational_reconstruct(series: TruncSeries, origin_order: int,
                         diag_orders: Mapping[str, int],
                         degree_hint: int | None = None,
                         margin: int = 2) -> DiagRational:
    """Inverse of series_expand within a declared pole budget.

    The series coefficients carry the other variables exactly, so the data is
    a full expansion family; only the series variable's pole structure needs
    to be reconstructed.
    """
    if degree_hint is None:
        degree_hint = max(series.cutoff - margin, 0)
    return reconstruct_chart(series.as_dict(), series.variable, MPoly.zero(),
                             origin_order, dict(diag_orders), degree_hint,
                             margin=min(margin, series.cutoff - degree_hint)
                             if series.cutoff > degree_hint else 0)
