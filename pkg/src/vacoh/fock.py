"""Rank-1 free-boson vertex algebra on its Fock space.

States are finite rational combinations of mode monomials
a(-n_1) a(-n_2) ... a(-n_k) |0> indexed by partitions (descending tuples of
positive integers).  The module provides the mode algebra
[a(m), a(n)] = m delta_{m+n,0}, vertex-operator modes for arbitrary states via
the standard iterate formula, the Virasoro field built from the quadratic
normal-ordered expression (central charge 1), order-two automorphisms, and
the exponentiated coordinate-change action.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Iterable, Mapping

from .rational import Q

Partition = tuple  # descending tuple of positive ints; () is the vacuum


def _check_partition(p: Partition) -> Partition:
    p = tuple(p)
    if any(n <= 0 for n in p) or any(p[i] < p[i + 1] for i in range(len(p) - 1)):
        raise ValueError(f"not a partition: {p}")
    return p


def partition_weight(p: Partition) -> int:
    return sum(p)


def partitions(n: int) -> list:
    """All partitions of n, descending tuples, deterministic order."""
    if n < 0:
        return []

    def gen(total, largest):
        if total == 0:
            yield ()
            return
        for first in range(min(total, largest), 0, -1):
            for rest in gen(total - first, first):
                yield (first,) + rest

    return list(gen(n, n))


@dataclass(frozen=True)
class FockVector:
    """Finite linear combination of mode monomials with Fraction coefficients."""

    terms: tuple  # sorted tuple of (Partition, Fraction), no zeros

    @staticmethod
    def from_dict(d: Mapping[Partition, Fraction]) -> "FockVector":
        items = tuple(sorted(((_check_partition(p), Fraction(c)) for p, c in d.items() if c),
                             key=lambda it: it[0]))
        return FockVector(items)

    @staticmethod
    def _raw(d: Mapping[Partition, Fraction]) -> "FockVector":
        """Internal constructor: partitions already canonical."""
        return FockVector(tuple(sorted((p, c) for p, c in d.items() if c)))

    @staticmethod
    def zero() -> "FockVector":
        return FockVector(())

    @staticmethod
    def monomial(p: Partition, c=1) -> "FockVector":
        return FockVector.from_dict({tuple(p): Fraction(c)})

    def as_dict(self) -> dict:
        return dict(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "FockVector") -> "FockVector":
        d = self.as_dict()
        for p, c in other.terms:
            d[p] = d.get(p, Q(0)) + c
        return FockVector.from_dict(d)

    def __sub__(self, other: "FockVector") -> "FockVector":
        return self + other.scale(-1)

    def scale(self, c) -> "FockVector":
        c = Fraction(c)
        if c == 0:
            return FockVector.zero()
        return FockVector(tuple((p, c * v) for p, v in self.terms))

    __mul__ = scale
    __rmul__ = scale

    def weights(self) -> set:
        return {partition_weight(p) for p, _ in self.terms}

    def weight(self) -> int:
        """Weight of a homogeneous vector."""
        ws = self.weights()
        if len(ws) != 1:
            raise ValueError(f"vector is not homogeneous: weights {sorted(ws)}")
        return next(iter(ws))

    def max_weight(self) -> int:
        return max((partition_weight(p) for p, _ in self.terms), default=0)

    def component(self, weight: int) -> "FockVector":
        return FockVector(tuple((p, c) for p, c in self.terms
                                if partition_weight(p) == weight))

    def homogeneous_parts(self) -> dict:
        out: dict[int, dict] = {}
        for p, c in self.terms:
            out.setdefault(partition_weight(p), {})[p] = c
        return {w: FockVector.from_dict(d) for w, d in sorted(out.items())}

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for p, c in self.terms:
            body = " ".join(f"a(-{n})" for n in p)
            body = f"{body} vac" if body else "vac"
            if c == 1:
                pieces.append(body)
            elif c == -1:
                pieces.append(f"-{body}")
            else:
                pieces.append(f"{c} {body}")
        out = pieces[0]
        for s in pieces[1:]:
            out += f" - {s[1:]}" if s.startswith("-") else f" + {s}"
        return out


VACUUM = FockVector.monomial(())
GEN_A = FockVector.monomial((1,))              # a(-1)|0>, the current generator
OMEGA = FockVector.monomial((1, 1), Fraction(1, 2))  # conformal vector


def basis(weight: int) -> list:
    """Mode-monomial basis of the weight subspace."""
    return [FockVector.monomial(p) for p in partitions(weight)]


# -- the Heisenberg mode action --------------------------------------------


def _mode_on_dict(n: int, d: dict) -> dict:
    """a(n) applied to {partition: coeff}; plain-dict hot path."""
    out: dict = {}
    if n < 0:
        for p, c in d.items():
            new = tuple(sorted(p + (-n,), reverse=True))
            out[new] = out.get(new, 0) + c
        return out
    if n == 0:
        return out
    for p, c in d.items():
        mult = p.count(n)
        if mult:
            rest = list(p)
            rest.remove(n)
            key = tuple(rest)
            out[key] = out.get(key, 0) + c * n * mult
    return {p: c for p, c in out.items() if c}


def mode_apply(n: int, v: FockVector) -> FockVector:
    """a(n) . v with [a(m), a(n)] = m delta_{m+n,0} and a(n)|0> = 0 for n >= 0."""
    return FockVector._raw({p: Fraction(c) for p, c in _mode_on_dict(n, dict(v.terms)).items()})


# -- vertex-operator modes ----------------------------------------------------


@lru_cache(maxsize=None)
def _vertex_mode_monomial(vp: Partition, m: int, wp: Partition) -> tuple:
    """Coefficient of z^(-m-1) in Y(a(-vp_1)...a(-vp_k)|0>, z) applied to wp,
    as a sorted (partition, coeff) tuple."""
    if not vp:
        return ((wp, Q(1)),) if m == -1 else ()
    n = vp[0]
    rest = vp[1:]
    out: dict = {}
    # (a(-n)u)(m) = sum_j C(n+j-1, j) [ a(-n-j) u(m+j) - (-1)^n u(m-n-j) a(j) ]
    wt_u = partition_weight(rest)
    wt_w = partition_weight(wp)
    for j in range(0, max(0, wt_u + wt_w - m)):
        inner = _vertex_mode_monomial(rest, m + j, wp)
        if not inner:
            continue
        c = comb(n + j - 1, j)
        for q, w in _mode_on_dict(-n - j, dict(inner)).items():
            out[q] = out.get(q, 0) + c * w
    sign = (-1) ** n
    for j in range(1, wt_w + 1):
        mult = wp.count(j)
        if not mult:
            continue
        rest_w = list(wp)
        rest_w.remove(j)
        inner = _vertex_mode_monomial(rest, m - n - j, tuple(rest_w))
        if not inner:
            continue
        c = sign * comb(n + j - 1, j) * j * mult
        for q, w in inner:
            out[q] = out.get(q, 0) - c * w
    return tuple(sorted((p, Q(c)) for p, c in out.items() if c))


@lru_cache(maxsize=None)
def _vertex_mode_skew(vp: Partition, m: int, wp: Partition) -> tuple:
    """(vp)(m) wp through skew-symmetry: Y(u,z)v = e^{zL(-1)} Y(v,-z) u,
    i.e. (u)(m)v = sum_k (-1)^{k+m+1} L(-1)^k [(v)(k+m) u] / k!.

    Cheap when vp is much heavier than wp: only the light monomial's modes
    act on the heavy state, followed by translation towers.
    """
    wt_sum = partition_weight(vp) + partition_weight(wp)
    k_top = max(0, wt_sum - m) - 1
    # Horner form of sum_k L(-1)^k B_k with B_k = (-1)^{k+m+1} (v)(k+m)u / k!
    acc = FockVector.zero()
    factorials = [1] * (k_top + 2)
    for i in range(1, k_top + 2):
        factorials[i] = factorials[i - 1] * i
    for k in range(k_top, -1, -1):
        if not acc.is_zero():
            acc = virasoro(-1, acc)
        moved = _vertex_mode_monomial(wp, k + m, vp)
        if moved:
            sign = Q(-1) ** (k + m + 1)
            acc = acc + FockVector(moved).scale(sign * Q(1, factorials[k]))
    return acc.terms


@lru_cache(maxsize=200000)
def _vertex_mode_vectors(v: FockVector, m: int, w: FockVector) -> FockVector:
    out: dict = {}
    for vp, vc in v.terms:
        for wp, wc in w.terms:
            c = vc * wc
            if partition_weight(vp) > partition_weight(wp) + 6:
                pieces = _vertex_mode_skew(vp, m, wp)
            else:
                pieces = _vertex_mode_monomial(vp, m, wp)
            for q, x in pieces:
                out[q] = out.get(q, 0) + c * x
    return FockVector._raw({p: Fraction(c) for p, c in out.items()})


def vertex_mode(v: FockVector, m: int, w: FockVector) -> FockVector:
    """Coefficient of z^(-m-1) in Y(v, z) w, extended bilinearly."""
    return _vertex_mode_vectors(v, m, w)


def vertex_upper_bound(v: FockVector, w: FockVector) -> int:
    """Smallest bound B with vertex_mode(v, m, w) = 0 for all m > B."""
    if v.is_zero() or w.is_zero():
        return -1
    return max(partition_weight(vp) + partition_weight(wp)
               for vp, _ in v.terms for wp, _ in w.terms) - 1


# -- Virasoro modes -----------------------------------------------------------


def virasoro(n: int, v: FockVector) -> FockVector:
    """L(n) . v from L(n) = 1/2 sum_j :a(j) a(n-j):, central charge 1.

    Normal-ordered pairs (j, k) with j + k = n and j <= k; the right factor
    a(k) annihilates unless k <= wt, which makes the sum finite.
    """
    out = FockVector.zero()
    for p, c in v.terms:
        wt = partition_weight(p)
        x = FockVector.monomial(p, c)
        for k in range(-(-n // 2), wt + 1):
            j = n - k
            inner = mode_apply(k, x)
            if inner.is_zero():
                continue
            term = mode_apply(j, inner)
            if j == k:
                term = term.scale(Q(1, 2))
            out = out + term
    return out


def weight_operator(v: FockVector) -> FockVector:
    """L(0) . v."""
    return FockVector.from_dict({p: c * partition_weight(p) for p, c in v.terms})


# -- automorphisms -------------------------------------------------------------


@dataclass(frozen=True)
class Automorphism:
    """The exactly representable order-two symmetries: identity, a -> -a,
    and the weight-parity involution (-1)^{L(0)}."""

    kind: str  # identity | sign | parity

    def __post_init__(self):
        if self.kind not in ("identity", "sign", "parity"):
            raise ValueError(f"unknown automorphism {self.kind!r}")

    def apply(self, v: FockVector) -> FockVector:
        if self.kind == "identity":
            return v
        if self.kind == "sign":
            return FockVector(tuple((p, c * Q(-1) ** len(p)) for p, c in v.terms))
        return FockVector(tuple((p, c * Q(-1) ** partition_weight(p)) for p, c in v.terms))

    def compose(self, other: "Automorphism") -> "Automorphism":
        if self.kind == "identity":
            return other
        if other.kind == "identity":
            return self
        if self.kind == other.kind:
            return Automorphism("identity")
        # sign . parity = parity . sign, which is a(-odd) flip; not in the
        # shipped subgroup alone, so keep compositions within it
        raise ValueError("composition leaves the shipped order-two subgroup")

    def __str__(self) -> str:
        return self.kind


IDENTITY = Automorphism("identity")
SIGN = Automorphism("sign")
PARITY = Automorphism("parity")


def automorphism_apply(g: Automorphism, v: FockVector) -> FockVector:
    return g.apply(v)


# -- coordinate changes ---------------------------------------------------------


@dataclass(frozen=True)
class CoordinateChange:
    """Local coordinate change encoded by exponential coefficients beta_k.

    beta[0] is the invertible leading scale; beta[k] for k >= 1 exponentiate
    the weight-lowering Virasoro modes.  The action on a state is
    exp(sum_{k>=1} beta_k L(k)) beta_0^{L(0)} v, a finite sum because each
    L(k) strictly lowers weight.
    """

    beta: tuple  # ((k, Fraction), ...) with k >= 0

    @staticmethod
    def from_dict(beta: Mapping[int, Fraction]) -> "CoordinateChange":
        items = tuple(sorted((int(k), Fraction(c)) for k, c in beta.items() if Fraction(c) or k == 0))
        return CoordinateChange(items)

    def beta0(self) -> Fraction:
        for k, c in self.beta:
            if k == 0:
                return c
        return Q(1)

    def positive_part(self) -> list:
        return [(k, c) for k, c in self.beta if k >= 1 and c]


def apply_coordinate_change(change: CoordinateChange, v: FockVector) -> FockVector:
    b0 = change.beta0()
    if b0 == 0:
        raise ValueError("non-invertible change")
    scaled = FockVector.from_dict({p: c * b0 ** partition_weight(p) for p, c in v.terms})
    positive = change.positive_part()
    if not positive:
        return scaled
    out = FockVector.zero()
    term = scaled
    factorial = 1
    step = 0
    while not term.is_zero():
        out = out + term.scale(Q(1, factorial))
        nxt = FockVector.zero()
        for k, c in positive:
            nxt = nxt + virasoro(k, term).scale(c)
        term = nxt
        step += 1
        factorial *= step
    return out
