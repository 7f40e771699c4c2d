"""Invariant bilinear pairing, module tags, dual bases, intertwiner.

The generalized modules shipped with the rank-1 boson are twist-decorated
copies of the algebra itself; the invariant pairing <.,.>_lambda comes from
the adjoint construction T_lambda generated by z -> -lambda^2/z.  For a
homogeneous state u of weight h the adjoint modes are

  u^+(n) = sum_j (-1)^(j+m+1) lambda^(2h-2j-2m-2) / j! * (L(1)^j u)(m),
  m = 2h - n - j - 2,

and the pairing is fixed by <vac, vac> = 1 together with
<u(n) a, b> = <a, u^+(n) b>.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

from .fock import (
    Automorphism,
    FockVector,
    IDENTITY,
    Q,
    VACUUM,
    basis,
    mode_apply,
    partition_weight,
    partitions,
    vertex_mode,
    virasoro,
)


@dataclass(frozen=True)
class ModuleTag:
    """Label of one twist-decorated copy of the algebra used as a module."""

    index: int
    twist: Automorphism = IDENTITY
    lam: Fraction = Q(1)

    def __post_init__(self):
        if self.lam == 0:
            raise ValueError("pairing parameter lambda must be nonzero")


@dataclass(frozen=True)
class PairedVector:
    tag: ModuleTag
    vec: FockVector

    def weight(self) -> int:
        return self.vec.weight()


DEFAULT_TAG = ModuleTag(0)


def paired(vec: FockVector, tag: ModuleTag = DEFAULT_TAG) -> PairedVector:
    return PairedVector(tag, vec)


# -- pairing ------------------------------------------------------------------


@lru_cache(maxsize=None)
def _pair_monomials(p: tuple, q: tuple, lam: Fraction) -> Fraction:
    if not p:
        return Q(1) if not q else Q(0)
    m = p[0]
    moved = mode_apply(m, FockVector.monomial(q))
    total = Q(0)
    for qq, c in moved.terms:
        total += c * _pair_monomials(p[1:], qq, lam)
    return Q(-1) ** (m + 1) * lam ** (-2 * m) * total


def pairing_vectors(x: FockVector, y: FockVector, lam: Fraction = Q(1)) -> Fraction:
    """<x, y>_lambda on the algebra realized as its own module."""
    lam = Fraction(lam)
    total = Q(0)
    for p, c in x.terms:
        for q, d in y.terms:
            if partition_weight(p) != partition_weight(q):
                continue
            total += c * d * _pair_monomials(p, q, lam)
    return total


def pairing(a: PairedVector, b: PairedVector) -> Fraction:
    if a.tag != b.tag:
        raise ValueError("pairing requires both vectors in the same module")
    return pairing_vectors(a.vec, b.vec, a.tag.lam)


# -- adjoint vertex modes -------------------------------------------------------


@lru_cache(maxsize=None)
def _raising_tower(part: FockVector) -> tuple:
    """(L(1)^j part / j!, ...) until it vanishes."""
    tower = []
    a_j = part
    factorial = 1
    j = 0
    while not a_j.is_zero():
        tower.append(a_j.scale(Q(1, factorial)))
        j += 1
        factorial *= j
        a_j = virasoro(1, a_j)
    return tuple(tower)


def adjoint_vertex_mode(u: FockVector, n: int, b: FockVector,
                        lam: Fraction = Q(1)) -> FockVector:
    """u^+(n) b for homogeneous u, satisfying <u(n)a, b> = <a, u^+(n)b>."""
    lam = Fraction(lam)
    out = FockVector.zero()
    for part in u.homogeneous_parts().values():
        h = part.weight()
        for j, a_j in enumerate(_raising_tower(part)):
            m = 2 * h - n - j - 2
            coeff = Q(-1) ** (j + m + 1) * lam ** (2 * h - 2 * j - 2 * m - 2)
            term = vertex_mode(a_j, m, b)
            if not term.is_zero():
                out = out + term.scale(coeff)
    return out


# -- dual bases -----------------------------------------------------------------


def gram_matrix(k: int, lam: Fraction = Q(1)) -> list:
    vecs = basis(k)
    return [[pairing_vectors(x, y, lam) for y in vecs] for x in vecs]


def _invert(matrix: list) -> list:
    n = len(matrix)
    aug = [[Fraction(matrix[i][j]) for j in range(n)] + [Q(1) if i == j else Q(0) for j in range(n)]
           for i in range(n)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise ValueError("degenerate pairing")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = Q(1) / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


@lru_cache(maxsize=None)
def dual_basis(k: int, lam: Fraction = Q(1)) -> tuple:
    """Pairs (u^alpha, dual u^alpha) with <u^alpha, dual u^beta> = delta."""
    vecs = basis(k)
    inverse = _invert(gram_matrix(k, lam))
    duals = []
    for beta in range(len(vecs)):
        d = FockVector.zero()
        for alpha, v in enumerate(vecs):
            d = d + v.scale(inverse[alpha][beta])
        duals.append(d)
    return tuple(zip(vecs, duals))


# -- intertwining operator --------------------------------------------------------


def intertwine(w: PairedVector, v: FockVector, cutoff: int) -> dict:
    """Truncated expansion of Y^W(w, z) v = e^{z L(-1)} Y(v, -z) w.

    Returns {exponent: FockVector} for exponents <= cutoff; only finitely
    many negative exponents occur.
    """
    gw = w.vec
    series: dict[int, FockVector] = {}
    if gw.is_zero() or v.is_zero():
        return series
    low = -(max(partition_weight(p) for p, _ in v.terms)
            + max(partition_weight(p) for p, _ in gw.terms)) - 1
    # coefficient of z^e in Y(v, -z) w is (-1)^e v(-e-1) w
    inner: dict[int, FockVector] = {}
    for e in range(low, cutoff + 1):
        term = vertex_mode(v, -e - 1, gw)
        if not term.is_zero():
            inner[e] = term.scale(Q(-1) ** e)
    # multiply by e^{z L(-1)}
    for e, vec in inner.items():
        shifted = vec
        factorial = 1
        for m in range(0, cutoff - e + 1):
            if m:
                shifted = virasoro(-1, shifted)
                factorial *= m
                if shifted.is_zero():
                    break
            key = e + m
            if key > cutoff:
                break
            add = shifted.scale(Q(1, factorial))
            series[key] = series.get(key, FockVector.zero()) + add
    return {e: vec for e, vec in series.items() if not vec.is_zero()}
