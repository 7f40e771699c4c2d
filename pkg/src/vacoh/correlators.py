"""Matrix elements of iterated vertex operators as exact rational functions.

The engine computes <probe, Y(A_1, z_1) ... Y(A_n, z_n) g.terminal> by
eliminating one variable at a time: the region-minimal insertion is expanded
into its modes (a Laurent series whose coefficients are lower matrix
elements) and the series is rebuilt into a DiagRational against the weight
pole budget.  Equality of the results across elimination orders is exactly
the duality statement, kept as a checkable property rather than assumed.

The E-operator calculus and the transversality certification built on this
engine live in the companion module ``_eops``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

from .fock import FockVector, Q, partition_weight, vertex_mode
from .pairing import PairedVector, adjoint_vertex_mode, pairing_vectors
from .rational import (
    DiagRational,
    MPoly,
    ReconstructionError,
    reconstruct_chart,
    reconstruct_top,
)


Insertion = tuple  # (FockVector, variable name)


@dataclass(frozen=True)
class PoleBudget:
    """Allowed pole orders: origins per variable, diagonals per pair."""

    origins: tuple = ()
    diagonals: tuple = ()

    @staticmethod
    def from_maps(origins: Mapping[str, int], diagonals: Mapping[tuple, int]) -> "PoleBudget":
        return PoleBudget(tuple(sorted(origins.items())),
                          tuple(sorted((tuple(sorted(p)), o) for p, o in diagonals.items())))

    def origin(self, var: str) -> int:
        return dict(self.origins).get(var, 0)

    def diagonal(self, a: str, b: str) -> int:
        return dict(self.diagonals).get(tuple(sorted((a, b))), 0)


def default_budget(insertions: Sequence[Insertion], terminal_weight: int) -> PoleBudget:
    """Weight bound: origin wt_i + wt(w), diagonal wt_i + wt_j."""
    origins = {}
    diagonals = {}
    for (vec, var) in insertions:
        w = vec.max_weight()
        origins[var] = w + terminal_weight
    for (v1, a), (v2, b) in itertools.combinations(insertions, 2):
        diagonals[tuple(sorted((a, b)))] = v1.max_weight() + v2.max_weight()
    return PoleBudget.from_maps(origins, diagonals)


@dataclass(frozen=True)
class CorrelationSpec:
    probe: PairedVector
    insertions: tuple  # of (FockVector, var)
    terminal: PairedVector
    region: tuple = ()  # variables in decreasing magnitude; default: listed order

    def __post_init__(self):
        names = [var for _, var in self.insertions]
        if len(set(names)) != len(names):
            raise ValueError("insertion variables must be pairwise distinct")
        region = self.region or tuple(names)
        if set(region) != set(names):
            raise ValueError("region must order exactly the insertion variables")
        object.__setattr__(self, "region", tuple(region))


# -- the monomial-level recursion ------------------------------------------------


@lru_cache(maxsize=None)
def _corr_monomial(probe_p: tuple, slots: tuple, terminal: FockVector,
                   lam: Fraction, margin: int) -> DiagRational:
    """<probe monomial, Y(slot_1) ... Y(slot_k) terminal>, slots in region order."""
    if not slots:
        return DiagRational.const(
            pairing_vectors(FockVector.monomial(probe_p), terminal, lam))
    # selection rule: total mode-count parity (the sign automorphism)
    leg_parity = len(probe_p) + sum(len(p) for p, _ in slots)
    terminal = FockVector(tuple(
        (p, c) for p, c in terminal.terms if (len(p) + leg_parity) % 2 == 0))
    if terminal.is_zero():
        return DiagRational.zero()
    for term_p, c in terminal.terms:
        wt_term = partition_weight(term_p)
        break
    out = DiagRational.zero()
    for term_p, c in terminal.terms:
        val = _corr_probe_side(FockVector.monomial(probe_p), slots, term_p,
                               lam, margin)
        if not val.is_zero():
            out = out + val * c
    return out


@lru_cache(maxsize=None)
def _corr_probe_side(probe: FockVector, slots: tuple, term_p: tuple,
                     lam: Fraction, margin: int) -> DiagRational:
    """Eliminate one end of the region-ordered slot list.

    The region-biggest slot can be expanded onto the probe through adjoint
    modes (expansion in its large variable), the region-smallest onto the
    terminal (expansion around its origin); both moves are region-consistent
    and the lighter end is moved onto its neighbour state to keep the mode
    algebra small.  Weight conservation pins the admissible exponents, which
    collapses the innermost loops to a handful of entries.
    """
    if not slots:
        return DiagRational.const(
            pairing_vectors(probe, FockVector.monomial(term_p), lam))
    if probe.is_zero():
        return DiagRational.zero()
    # legs of any one slot must pair outside it: over-legged monomials vanish
    outside = len(term_p) + max(len(p) for p, _ in probe.terms)
    for p, _ in slots:
        others = outside + sum(len(q) for q, _ in slots) - len(p)
        if len(p) > others:
            return DiagRational.zero()
    first_w = partition_weight(slots[0][0])
    last_w = partition_weight(slots[-1][0])
    if len(slots) == 1 or first_w <= last_w:
        return _eliminate_probe_side(probe, slots, term_p, lam, margin)
    return _eliminate_terminal_side(probe, slots, term_p, lam, margin)


def _eliminate_probe_side(probe: FockVector, slots: tuple, term_p: tuple,
                          lam: Fraction, margin: int) -> DiagRational:
    wt_term = partition_weight(term_p)
    (vec_p, var) = slots[0]
    rest = slots[1:]
    wt_a = partition_weight(vec_p)
    vec = FockVector.monomial(vec_p)

    origin = wt_a + wt_term
    diag_orders = {v: wt_a + partition_weight(p) for (p, v) in rest}
    deg_delta = origin + sum(diag_orders.values())
    e_max = probe.max_weight() - wt_a
    low = -deg_delta - margin
    # weight pin: the remaining exponents must sum to
    # wt(probe component) - sum(rest weights) - wt_term, each bounded below
    rest_weights = sum(partition_weight(p) for p, _ in rest)
    rest_low = 0
    for j, (p, v) in enumerate(rest):
        wj = partition_weight(p)
        oj = wj + wt_term
        dj = sum(wj + partition_weight(q) for q, _ in rest[j + 1:])
        rest_low += -(oj + dj) - margin
    pins = {wt_p - wt_a - rest_weights - wt_term
            for wt_p in {partition_weight(p) for p, _ in probe.terms}}
    series = {}
    for e in range(low, e_max + 1):
        if rest:
            if all(pin - e < rest_low for pin in pins):
                continue
        elif e not in pins:
            continue
        moved = adjoint_vertex_mode(vec, -e - 1, probe, lam)
        if moved.is_zero():
            continue
        coeff = _corr_probe_side(moved, rest, term_p, lam, margin)
        if not coeff.is_zero():
            series[e] = coeff
    if not series:
        return DiagRational.zero()
    return reconstruct_top(series, var, origin, diag_orders,
                           e_max + deg_delta, margin=margin)


def _eliminate_terminal_side(probe: FockVector, slots: tuple, term_p: tuple,
                             lam: Fraction, margin: int) -> DiagRational:
    """Expand the region-smallest slot around the origin onto the terminal."""
    wt_term = partition_weight(term_p)
    (vec_p, var) = slots[-1]
    rest = slots[:-1]
    wt_a = partition_weight(vec_p)
    vec = FockVector.monomial(vec_p)
    wt_probe = probe.max_weight()

    origin = wt_a + wt_term
    diag_orders = {v: wt_a + partition_weight(p) for (p, v) in rest}
    deg_delta = origin + sum(diag_orders.values())
    degree = wt_probe - wt_term - wt_a - sum(partition_weight(p) for p, _ in rest)
    deg_all = deg_delta
    for j, (p, v) in enumerate(rest):
        deg_all += partition_weight(p) + wt_term
        for q, _ in rest[j + 1:]:
            deg_all += partition_weight(p) + partition_weight(q)
    hint = max(0, min(degree + deg_all, wt_probe + deg_delta))
    series = {}
    term_mono = FockVector.monomial(term_p)
    for t in range(-origin, hint + margin + 1):
        moved = vertex_mode(vec, -t - 1, term_mono)
        if moved.is_zero():
            continue
        coeff = DiagRational.zero()
        for new_term, c in moved.terms:
            val = _corr_probe_side(probe, rest, new_term, lam, margin)
            if not val.is_zero():
                coeff = coeff + val * c
        if not coeff.is_zero():
            series[t] = coeff
    if not series:
        return DiagRational.zero()
    return reconstruct_chart(series, var, MPoly.zero(), origin, diag_orders,
                             hint, margin=margin)


def correlate_vectors(probe: FockVector, insertions: Sequence[Insertion],
                      terminal: FockVector, lam: Fraction = Q(1),
                      region: Sequence[str] | None = None,
                      margin: int = 2) -> DiagRational:
    """Multilinear matrix element; insertions listed in operator order."""
    insertions = tuple(insertions)
    if region is not None:
        order = {v: i for i, v in enumerate(region)}
        insertions = tuple(sorted(insertions, key=lambda it: order[it[1]]))
    out = DiagRational.zero()
    for probe_p, pc in probe.terms:
        for combo in itertools.product(*(
                [(p, c, var) for p, c in vec.terms] for vec, var in insertions)):
            slots = tuple((p, var) for p, _, var in combo)
            coeff = pc
            for _, c, _ in combo:
                coeff *= c
            val = _corr_monomial(probe_p, slots, terminal, Fraction(lam), margin)
            if not val.is_zero():
                out = out + val * coeff
    return out


def correlate(spec: CorrelationSpec, budget: PoleBudget | None = None,
              margin: int = 2) -> DiagRational:
    """The common rational function of the iterated-operator matrix element.

    The terminal twist acts on the terminal vector; the declared region picks
    the elimination order.  When a budget is supplied, the result is checked
    against it and a budget violation raises ReconstructionError.
    """
    gw = spec.terminal.tag.twist.apply(spec.terminal.vec)
    lam = spec.probe.tag.lam
    result = correlate_vectors(spec.probe.vec, spec.insertions, gw, lam,
                               region=spec.region, margin=margin)
    if budget is not None:
        for v, o in result.origins.items():
            if o > budget.origin(v):
                raise ReconstructionError(f"budget violated: origin pole {v}^{o}")
        for (a, b), o in result.diagonals.items():
            if o > budget.diagonal(a, b):
                raise ReconstructionError(f"budget violated: diagonal pole ({a}-{b})^{o}")
    return result


def clear_caches() -> None:
    _corr_monomial.cache_clear()
    _corr_probe_side.cache_clear()


# -- fused slots: one insertion carrying Y(u, z_r - z_s) x at parameter z_s -------


def correlate_fused(probe: FockVector, insertions: Sequence[Insertion],
                    fused_at: int, fuse_vec: FockVector, fuse_var: str,
                    terminal: FockVector, lam: Fraction = Q(1),
                    margin: int = 2) -> DiagRational:
    """Matrix element with slot ``fused_at`` holding Y(fuse_vec, xi) x.

    insertions[fused_at] = (x, z_s); the result is the rational function of
    all variables including ``fuse_var`` = z_r with xi = z_r - z_s, rebuilt
    from the xi-expansion Y(u, xi)x = sum u(n)x xi^(-n-1).
    """
    insertions = tuple(insertions)
    x_vec, z_s = insertions[fused_at]
    others = insertions[:fused_at] + insertions[fused_at + 1:]
    wt_u = fuse_vec.max_weight()
    wt_x = x_vec.max_weight()
    wt_term = terminal.max_weight()
    wt_probe = max(partition_weight(p) for p, _ in probe.terms) if probe.terms else 0

    origin_fuse = wt_u + wt_x            # pole in xi from the singular modes
    diag_orders = {z_s: origin_fuse}
    for vec, var in others:
        diag_orders[var] = wt_u + vec.max_weight()
    # z_r-origin pole of the full function
    origin_r = wt_u + wt_term
    degree = wt_probe - wt_term - wt_u - wt_x - sum(v.max_weight() for v, _ in others)
    deg_all = origin_r + (wt_x + wt_term) + sum(v.max_weight() + wt_term for v, _ in others)
    all_ins = [(fuse_vec, fuse_var)] + list(insertions)
    for (v1, _), (v2, _) in itertools.combinations(all_ins, 2):
        deg_all += v1.max_weight() + v2.max_weight()
    hint = min(max(0, degree + deg_all),
               wt_probe + origin_fuse + origin_r + sum(diag_orders.values()))
    cap = hint + margin
    series = {}
    for t in range(-origin_fuse, cap + 1):
        component = vertex_mode(fuse_vec, -t - 1, x_vec)
        if component.is_zero():
            continue
        slot_list = list(insertions)
        slot_list[fused_at] = (component, z_s)
        coeff = correlate_vectors(probe, slot_list, terminal, lam, margin=margin)
        if not coeff.is_zero():
            series[t] = coeff
    if not series:
        return DiagRational.zero()
    return reconstruct_chart(series, fuse_var, MPoly.var(z_s),
                             origin_r, diag_orders, hint, margin=margin)


# -- duality ---------------------------------------------------------------------


def duality_check(v1: FockVector, z1: str, v2: FockVector, z2: str,
                  terminal: PairedVector, probe: PairedVector,
                  margin: int = 2) -> tuple:
    """Product, reversed-product, and iterate expansions of a two-point
    matrix element must rebuild one identical DiagRational.

    Returns (ok, witness) where witness careies the three reconstructions.
    """
    gw = terminal.tag.twist.apply(terminal.vec)
    lam = probe.tag.lam
    f_product = correlate_vectors(probe.vec, [(v1, z1), (v2, z2)], gw, lam)
    f_reversed = correlate_vectors(probe.vec, [(v2, z2), (v1, z1)], gw, lam,
                                   region=(z2, z1))
    f_iterate = correlate_fused(probe.vec, ((v2, z2),), 0, v1, z1, gw, lam,
                                margin=margin)
    ok = f_product == f_reversed == f_iterate
    return ok, {"product": f_product, "reversed": f_reversed, "iterate": f_iterate}




# -- slot trees: nested and multiple fused insertions ------------------------------


def leaf(vec: FockVector) -> tuple:
    return ("leaf", vec)


def fuse(op_tree: tuple, arg_tree: tuple, op_var: str) -> tuple:
    """Slot content Y(op, xi) arg with xi = op_var - (slot variable)."""
    return ("fuse", op_tree, arg_tree, op_var)


def tree_weight(tree: tuple) -> int:
    if tree[0] == "leaf":
        return tree[1].max_weight()
    return tree_weight(tree[1]) + tree_weight(tree[2])


def _tree_charts(tree: tuple, at_var: str) -> list:
    """Charts introduced by a slot content, as (chart_var, base_var, op_weight)."""
    if tree[0] == "leaf":
        return []
    _, op_tree, arg_tree, op_var = tree
    charts = [(op_var, at_var, tree_weight(op_tree))]
    charts += _tree_charts(op_tree, op_var)
    charts += _tree_charts(arg_tree, at_var)
    return charts


def _assemble(tree: tuple, orders: Mapping[str, int]) -> FockVector:
    if tree[0] == "leaf":
        return tree[1]
    _, op_tree, arg_tree, op_var = tree
    op_vec = _assemble(op_tree, orders)
    if op_vec.is_zero():
        return op_vec
    arg_vec = _assemble(arg_tree, orders)
    if arg_vec.is_zero():
        return arg_vec
    return vertex_mode(op_vec, -orders[op_var] - 1, arg_vec)


def _arg_weight(tree: tuple) -> int:
    """Weight of the content that stays at the slot variable."""
    if tree[0] == "leaf":
        return tree[1].max_weight()
    return _arg_weight(tree[2])


def correlate_trees(probe: FockVector, slots: Sequence[tuple], terminal: FockVector,
                    lam: Fraction = Q(1), margin: int = 2) -> DiagRational:
    """Matrix element whose slots may carry fused contents.

    slots = ((tree, var), ...) in operator order.  Each fused content
    introduces a difference chart; the value is rebuilt chart by chart against
    weight budgets, inner charts first, with the re-expansion certificate of
    every reconstruction step.  Budgets for pairs that involve the base of a
    still-unreconstructed chart are padded layer by layer, which keeps the
    enumeration triangular instead of rectangular.
    """
    charts: list = []
    for tree, var in slots:
        charts += _tree_charts(tree, var)
    if not charts:
        return correlate_vectors(probe, [(t[1], var) for t, var in slots],
                                 terminal, lam, margin=margin)

    chart_vars = [c[0] for c in charts]
    if len(set(chart_vars)) != len(chart_vars):
        raise ValueError("chart variables must be distinct")
    plain_vars = [var for _, var in slots]

    # reconstruction order: a chart is ready once its base is a real variable
    ordered: list = []
    available = set(plain_vars)
    pending = list(charts)
    while pending:
        for i, (cv, base, wop) in enumerate(pending):
            if base in available:
                ordered.append(pending.pop(i))
                available.add(cv)
                break
        else:
            raise ValueError("cyclic chart bases")

    wt_term = terminal.max_weight()
    wt_probe = probe.max_weight() if probe.terms else 0
    leaves_total = sum(tree_weight(t) for t, _ in slots)
    degree = wt_probe - wt_term - leaves_total

    # content weight per variable: the leaves sitting at it
    content: dict[str, int] = {}
    for (tree, var), _ in zip(slots, plain_vars):
        pass
    for tree, var in slots:
        content[var] = content.get(var, 0) + _arg_weight(tree)
    for cv, base, wop in ordered:
        content[cv] = wop

    all_vars = plain_vars + [cv for cv, _, _ in ordered]

    def origin_of(v: str) -> int:
        return content[v] + wt_term

    def diag_of(u: str, v: str) -> int:
        return content[u] + content[v]

    deg_all = sum(origin_of(v) for v in all_vars)
    for i, u in enumerate(all_vars):
        for v in all_vars[i + 1:]:
            deg_all += diag_of(u, v)

    def layer_budget(pos: int, rest: tuple) -> tuple:
        """(origin, diag orders, degree hint) for reconstructing chart ``pos``
        while the charts after it hold the series orders ``rest``."""
        cv, base, wop = ordered[pos]
        remaining_after = ordered[pos + 1:]
        known_vars = plain_vars + [ordered[j][0] for j in range(pos)]
        pad_by_pair: dict = {}
        pad_origin = 0
        for (ov, obase, _), t in zip(remaining_after, rest):
            if obase == cv:
                # the pending chart rides on cv: all its poles smear onto cv
                pad_origin += max(0, t) + origin_of(ov)
                for u in known_vars:
                    pad_by_pair[u] = pad_by_pair.get(u, 0) + max(0, t) + diag_of(ov, u)
            elif obase in known_vars:
                pad_by_pair[obase] = (pad_by_pair.get(obase, 0)
                                      + max(0, t) + diag_of(cv, ov))
        diag = {u: diag_of(cv, u) + pad_by_pair.get(u, 0)
                for u in known_vars if u != cv}
        origin = origin_of(cv) + pad_origin
        pad = sum(max(0, t) for t in rest)
        hint = max(0, min(degree + deg_all + pad,
                          wt_probe + origin + sum(diag.values())))
        return origin, diag, hint

    lows = {cv: -(wop + leaves_total + wt_term) for cv, base, wop in ordered}

    # enumerate chart orders: the last-reconstructed chart is the outer loop,
    # so each earlier chart's window can depend on the outer orders
    series: dict = {}
    n_charts = len(ordered)

    def recurse(pos: int, rest: tuple, orders: dict):
        if pos < 0:
            vecs = []
            for tree, var in slots:
                v = _assemble(tree, orders)
                if v.is_zero():
                    return
                vecs.append((v, var))
            val = correlate_vectors(probe, vecs, terminal, lam, margin=margin)
            if val.is_zero():
                return
            key = tuple(orders[cv] for cv, _, _ in ordered)
            cur = series.get(key)
            series[key] = val if cur is None else cur + val
            return
        cv = ordered[pos][0]
        _, _, hint = layer_budget(pos, rest)
        for t in range(lows[cv], hint + margin + 1):
            orders[cv] = t
            recurse(pos - 1, (t,) + rest, orders)
        del orders[cv]

    recurse(n_charts - 1, (), {})
    if not series:
        return DiagRational.zero()

    # reconstruct chart by chart, first of ``ordered`` first
    for pos in range(n_charts):
        cv, base, wop = ordered[pos]
        grouped: dict = {}
        for key, val in series.items():
            rest, t = key[1:], key[0]
            grouped.setdefault(rest, {})[t] = val
        new_series = {}
        for rest, layer in grouped.items():
            origin, diag, hint = layer_budget(pos, rest)
            rebuilt = reconstruct_chart(layer, cv, MPoly.var(base), origin,
                                        diag, hint, margin=margin)
            if not rebuilt.is_zero():
                new_series[rest] = rebuilt
        if not new_series:
            return DiagRational.zero()
        series = new_series
    (final,) = series.values()
    return final


# -- deferred-reconstruction evaluation for multi-chart slot trees ------------------


def _adjoint_chain(probe: FockVector, vec: FockVector, e: int, lam: Fraction) -> FockVector:
    return adjoint_vertex_mode(vec, -e - 1, probe, lam)


def _correlate_box(probe: FockVector, slots: Sequence[tuple], terminal: FockVector,
                   lam: Fraction, margin: int = 2) -> DiagRational:
    """Evaluate a multi-fused slot list by full serial expansion.

    Stage 1 walks a numeric coefficient box: chart orders outermost (they fix
    the assembled slot vectors), then plain exponents probe-side, bottoming
    out in pairings; stage 2 rebuilds the variables innermost plain first,
    then the charts, padding budgets fiber by fiber.  All states stay
    probe-side light, so heavy assembled contents never get closed forms.
    """
    charts: list = []
    for tree, var in slots:
        charts += _tree_charts(tree, var)
    plain_vars = [var for _, var in slots]

    ordered: list = []
    available = set(plain_vars)
    pending = list(charts)
    while pending:
        for i, (cv, base, wop) in enumerate(pending):
            if base in available:
                ordered.append(pending.pop(i))
                available.add(cv)
                break
        else:
            raise ValueError("cyclic chart bases")

    wt_term = terminal.max_weight()
    wt_probe = probe.max_weight() if probe.terms else 0
    leaves_total = sum(tree_weight(t) for t, _ in slots)

    content: dict[str, int] = {}
    for tree, var in slots:
        content[var] = content.get(var, 0) + _arg_weight(tree)
    for cv, base, wop in ordered:
        content[cv] = wop
    all_vars = plain_vars + [cv for cv, _, _ in ordered]

    def origin_of(v):
        return content[v] + wt_term

    def diag_of(u, v):
        return content[u] + content[v]

    def chart_hint(pos: int, rest: tuple) -> tuple:
        """(origin, diag orders, hint) for chart ``pos`` given the orders of
        later charts; plain variables are all real at chart time."""
        cv, base, wop = ordered[pos]
        known = plain_vars + [ordered[j][0] for j in range(pos)]
        pad_by_pair: dict = {}
        pad_origin = 0
        for (ov, obase, _), t in zip(ordered[pos + 1:], rest):
            if obase == cv:
                pad_origin += max(0, t) + origin_of(ov)
                for u in known:
                    pad_by_pair[u] = pad_by_pair.get(u, 0) + max(0, t) + diag_of(ov, u)
            elif obase in known:
                pad_by_pair[obase] = (pad_by_pair.get(obase, 0)
                                      + max(0, t) + diag_of(cv, ov))
        diag = {u: diag_of(cv, u) + pad_by_pair.get(u, 0) for u in known if u != cv}
        origin = origin_of(cv) + pad_origin
        hint = wt_probe + origin + sum(diag.values())
        return origin, diag, hint

    def plain_budget(i: int, chart_orders: tuple, plain_orders: tuple) -> tuple:
        """(origin, diag, low, hint-pad) for plain slot i given all chart
        orders and the serial exponents of the outer plains 0..i-1."""
        v = plain_vars[i]
        known = [plain_vars[j] for j in range(len(plain_vars)) if j != i]
        pad_by_pair: dict = {}
        pad_origin = 0
        for (ov, obase, _), t in zip(ordered, chart_orders):
            if obase == v:
                pad_origin += max(0, t) + origin_of(ov)
                for u in known:
                    pad_by_pair[u] = pad_by_pair.get(u, 0) + max(0, t) + diag_of(ov, u)
            elif obase in known:
                pad_by_pair[obase] = (pad_by_pair.get(obase, 0)
                                      + max(0, t) + diag_of(v, ov))
        diag = {u: diag_of(v, u) + pad_by_pair.get(u, 0) for u in known}
        origin = origin_of(v) + pad_origin
        mirror_pad = sum(max(0, -e) for e in plain_orders)
        return origin, diag, mirror_pad

    # stage 1: numeric box
    box: dict = {}

    def walk_plain(i: int, probe_now: FockVector, vecs: list, chart_orders: tuple,
                   plain_orders: tuple):
        if probe_now.is_zero():
            return
        if i == len(slots):
            val = pairing_vectors(probe_now, terminal, lam)
            if val:
                box[chart_orders + plain_orders] = (
                    box.get(chart_orders + plain_orders, Q(0)) + val)
            return
        vec = vecs[i]
        wt_a = vec.max_weight()
        origin, diag, _ = plain_budget(i, chart_orders, plain_orders)
        low = -(origin + sum(diag.values())) - margin
        high = probe_now.max_weight() - (wt_a if not vec.is_zero() else 0)
        for e in range(low, high + 1):
            moved = _adjoint_chain(probe_now, vec, e, lam)
            walk_plain(i + 1, moved, vecs, chart_orders, plain_orders + (e,))

    def walk_charts(pos: int, rest: tuple, orders: dict):
        if pos < 0:
            vecs = []
            for tree, var in slots:
                v = _assemble(tree, orders)
                if v.is_zero():
                    return
                vecs.append(v)
            chart_orders = tuple(orders[cv] for cv, _, _ in ordered)
            walk_plain(0, probe, vecs, chart_orders, ())
            return
        cv, base, wop = ordered[pos]
        _, _, hint = chart_hint(pos, rest)
        low = -(wop + leaves_total + wt_term)
        for t in range(low, hint + margin + 1):
            orders[cv] = t
            walk_charts(pos - 1, (t,) + rest, orders)
        del orders[cv]

    walk_charts(len(ordered) - 1, (), {})
    if not box:
        return DiagRational.zero()

    # stage 2a: rebuild plain variables, innermost first
    series: dict = {k: DiagRational.const(v) for k, v in box.items()}
    n_charts = len(ordered)
    for i in range(len(slots) - 1, -1, -1):
        v = plain_vars[i]
        grouped: dict = {}
        for key, val in series.items():
            fiber, e = key[:-1], key[-1]
            grouped.setdefault(fiber, {})[e] = val
        new_series = {}
        for fiber, layer in grouped.items():
            chart_orders = fiber[:n_charts]
            plain_orders = fiber[n_charts:]
            origin, diag, mirror_pad = plain_budget(i, chart_orders, plain_orders)
            wt_a = tree_weight(slots[i][0])  # full content bounds the top
            e_max = max(layer)
            hint = e_max + origin + sum(diag.values()) + mirror_pad
            rebuilt = reconstruct_top(layer, v, origin, diag, hint, margin=margin)
            if not rebuilt.is_zero():
                new_series[fiber] = rebuilt
        if not new_series:
            return DiagRational.zero()
        series = new_series

    # stage 2b: rebuild the charts, first ordered chart first
    for pos in range(n_charts):
        cv, base, wop = ordered[pos]
        grouped = {}
        for key, val in series.items():
            rest, t = key[1:], key[0]
            grouped.setdefault(rest, {})[t] = val
        new_series = {}
        for rest, layer in grouped.items():
            origin, diag, hint = chart_hint(pos, rest)
            rebuilt = reconstruct_chart(layer, cv, MPoly.var(base), origin, diag,
                                        hint, margin=margin)
            if not rebuilt.is_zero():
                new_series[rest] = rebuilt
        if not new_series:
            return DiagRational.zero()
        series = new_series
    (final,) = series.values()
    return final
