"""Finite-depth machinery for banded automorphisms of two-sided products.

The inverse of a banded automorphism is found by solving psi(y) = e for
each generator on growing windows and verified exactly by composing the
banded specs both ways.  Antistability of an open subgroup is certified
from band geometry: the partial two-sided cotrajectories must pin every
coordinate of monotonically growing windows.  The depth index is computed
through both one-sided cotrajectories and must agree; the entropy-depth
identity is cross-checked over the canonical shrinking base.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import Inconclusive, InversionFailure, HypothesisFailure, ValidationError
from .finabel import FiniteAbelianGroup, canonical_subgroup
from .lattice import congruence_kernel
from .profinite import (
    CylinderSubgroup,
    PowerEndo,
    ProGroup,
    RowFiniteEndo,
    cotrajectory_limits,
    identity_endo,
    topological_entropy,
    h_top,
)
from .values import DEFAULT_POLICY, CheckRecord, EntropyValue, StabilizationPolicy


def _solve_on_window(endo: RowFiniteEndo, target_block: int, target_vec, radius: int):
    """Solve psi(y) = e for y supported on [target_block - radius, + radius].

    Returns the sparse solution or None when no solution with that support
    exists.  A window solution solves the global equation exactly: rows
    outside the scanned range see only zero inputs.
    """
    g = endo.parent
    lo = target_block - radius
    hi = target_block + radius + 1
    wg, starts = g.window_layout(lo, hi)
    scan_lo = lo - abs(endo.offset) - endo.width - 1
    scan_hi = hi + abs(endo.offset) + endo.width + 1
    rows_idx = []
    for j in range(scan_lo, scan_hi):
        deps = [j + o for o, _ in endo.row_terms(j) if lo <= j + o < hi]
        if deps:
            rows_idx.append(j)
    if target_block not in rows_idx:
        return None
    tgt_mods: list[int] = []
    for j in rows_idx:
        tgt_mods.extend(g.block(j).moduli)
    tgt = FiniteAbelianGroup(tuple(tgt_mods))
    mat = [[0] * wg.rank for _ in range(tgt.rank)]
    row_at = {}
    pos = 0
    for j in rows_idx:
        row_at[j] = pos
        pos += g.block(j).rank
    for j in rows_idx:
        for o, m in endo.row_terms(j):
            src = j + o
            if not (lo <= src < hi):
                continue
            ss = starts[src - lo]
            for u in range(len(m)):
                for v in range(len(m[u])):
                    mat[row_at[j] + u][ss + v] += m[u][v]
    t_dense = [0] * tgt.rank
    for u, c in enumerate(target_vec):
        t_dense[row_at[target_block] + u] = c

    # kernel of (s, y) -> s * (-t) + y * M  modulo the target relations
    from math import lcm as _lcm

    c = _lcm(1, *tgt.moduli)
    map_rows = [[-x for x in t_dense]]
    for i in range(wg.rank):
        map_rows.append([mat[r][i] for r in range(tgt.rank)])
    combos = congruence_kernel(
        map_rows, tgt.rank, [], coeff_moduli=[c] * (wg.rank + 1),
        image_moduli=tgt.moduli,
    )
    for combo in combos:
        if combo[0] == 1:
            y = combo[1:]
            out = {}
            for i in range(lo, hi):
                s, e = starts[i - lo], starts[i - lo + 1]
                piece = g.block(i).reduce(y[s:e])
                if any(piece):
                    out[i] = piece
            return out
    # combos are echelon rows; the first row's leading entry divides every
    # achievable s, so s = 1 is impossible if it is not 1
    for combo in combos:
        if combo[0] != 0:
            return None
    return None


def invert(endo: RowFiniteEndo, policy: StabilizationPolicy = DEFAULT_POLICY) -> RowFiniteEndo:
    """Banded inverse of a banded automorphism, verified exactly.

    Solves psi(y) = e blockwise on windows up to four band widths (or the
    window budget), assembles the candidate, and requires both spec
    compositions to equal the identity.  Raises InversionFailure when no
    banded inverse exists within the budget.
    """
    g = endo.parent
    if g.index_set != "Z":
        raise ValidationError("inversion is implemented for Z-indexed groups")
    band = abs(endo.offset) + endo.width
    radius_cap = max(4 * band, policy.stall_window)
    from math import lcm as _lcm

    p = _lcm(endo.period, len(g.period))
    solutions = {}
    for r in range(p):
        blk = g.block(r)
        for u in range(blk.rank):
            target = [0] * blk.rank
            target[u] = 1
            sol = None
            for radius in range(band, radius_cap + 1):
                sol = _solve_on_window(endo, r, target, radius)
                if sol is not None:
                    break
            if sol is None:
                raise InversionFailure(
                    f"no banded preimage of generator {u} of block {r} "
                    f"within radius {radius_cap}"
                )
            solutions[(r, u)] = sol

    acc: dict[int, dict[int, list[list[int]]]] = {}
    offsets = set()
    for (r, u), sol in solutions.items():
        for i, vec in sol.items():
            out_res = i % p
            o = r - i  # output row i depends on input r with offset o = r - i
            offsets.add(o)
            src_blk = g.block(r)
            out_blk = g.block(i)
            mat = acc.setdefault(out_res, {}).setdefault(
                o, [[0] * src_blk.rank for _ in range(out_blk.rank)]
            )
            for v, cval in enumerate(vec):
                mat[v][u] = cval
    if not offsets:
        offsets = {0}
    o_lo, o_hi = min(offsets), max(offsets)
    rows = []
    for r in range(p):
        terms = sorted(acc.get(r, {}).items())
        if not terms:
            terms = [(0, [[0] * g.block(r).rank for _ in range(g.block(r).rank)])]
        rows.append(terms)
    inv = RowFiniteEndo(g, o_lo, o_hi - o_lo + 1, p, rows)
    ident = identity_endo(g)
    if not endo.compose(inv).equals_spec(ident) or not inv.compose(endo).equals_spec(ident):
        raise InversionFailure("candidate inverse fails the two-sided composition check")
    return inv


@dataclass(frozen=True)
class AntistableCertificate:
    status: str  # "antistable" | "not_antistable" | "unknown"
    n: int | None = None
    window: tuple[int, int] | None = None
    witness: object = None


def antistable_check(
    endo: RowFiniteEndo,
    u: CylinderSubgroup,
    policy: StabilizationPolicy = DEFAULT_POLICY,
    inverse: RowFiniteEndo | None = None,
) -> AntistableCertificate:
    """Decide whether the two-sided intersection of psi^n(U) is trivial.

    Certified antistable when the partial intersections pin every
    coordinate of windows that keep growing on both sides (band geometry
    then pins every coordinate in the limit); certified not antistable
    when both one-sided chains reach exact fixed points with a nontrivial
    intersection; unknown otherwise.
    """
    if inverse is None:
        inverse = invert(endo, policy)
    g = endo.parent
    w = policy.stall_window
    cp, cm = u, u
    stalled_p = stalled_m = False
    history = []
    for n in range(1, policy.max_n + 1):
        if not stalled_p:
            np_ = u.intersect(endo.preimage_cylinder(cp))
            stalled_p = np_ == cp
            cp = np_
        if not stalled_m:
            nm = u.intersect(inverse.preimage_cylinder(cm))
            stalled_m = nm == cm
            cm = nm
        d = cp.intersect(cm)
        if d.is_trivial_subgroup():
            return AntistableCertificate("antistable", n, (d.lo, d.hi))
        if stalled_p and stalled_m:
            return AntistableCertificate("not_antistable", n, (d.lo, d.hi), witness=d)
        history.append((d.lo, d.hi, d.core.order == 1))
        if len(history) >= w:
            recent = history[-w:]
            pinned = all(r[2] for r in recent)
            grow_hi = all(recent[i][1] < recent[i + 1][1] for i in range(w - 1))
            grow_lo = all(recent[i][0] > recent[i + 1][0] for i in range(w - 1))
            if pinned and (
                (g.index_set == "Z" and grow_hi and grow_lo)
                or (g.index_set == "N" and grow_hi and recent[-1][0] == 0)
            ):
                return AntistableCertificate("antistable", n, (d.lo, d.hi))
    return AntistableCertificate("unknown", None, None)


@dataclass(frozen=True)
class TailCylinder:
    """Closed subgroup pinned to 0 on a half line plus a finite condition.

    side +1 means every coordinate at index >= pin_from is 0; side -1
    means every coordinate at index <= pin_from is 0.  The residual
    cylinder carries the remaining finite-window condition.
    """

    parent: ProGroup
    side: int
    pin_from: int
    residual: CylinderSubgroup

    def truncate(self, m: int) -> CylinderSubgroup:
        """The cylinder that pins only the part of the half line up to radius m."""
        if self.side == +1:
            lo = min(self.residual.lo, self.pin_from) if not self.residual.is_whole() else self.pin_from
            hi = max(m, self.pin_from)
            pin_rng = range(self.pin_from, hi)
        else:
            hi = max(self.residual.hi, self.pin_from + 1) if not self.residual.is_whole() else self.pin_from + 1
            lo = min(-m, self.pin_from)
            pin_rng = range(lo, self.pin_from + 1)
        g = self.parent
        wg, starts = g.window_layout(lo, hi)
        gens = []
        if not self.residual.is_whole():
            off = starts[self.residual.lo - lo]
            for row in self.residual.core.generators():
                v = [0] * wg.rank
                v[off : off + len(row)] = row
                gens.append(v)
        # free blocks: those neither pinned nor in the residual window
        for i in range(lo, hi):
            if i in pin_rng:
                continue
            if not self.residual.is_whole() and self.residual.lo <= i < self.residual.hi:
                continue
            s = starts[i - lo]
            for j in range(g.block(i).rank):
                v = [0] * wg.rank
                v[s + j] = 1
                gens.append(v)
        return CylinderSubgroup(g, lo, hi, canonical_subgroup(wg, gens))

    def __eq__(self, other):
        return (
            isinstance(other, TailCylinder)
            and self.parent == other.parent
            and self.side == other.side
            and self.pin_from == other.pin_from
            and self.residual == other.residual
        )

    def __hash__(self):
        return hash((self.parent, self.side, self.pin_from, self.residual))


def _detect_tail(chain, parent: ProGroup, policy: StabilizationPolicy):
    """Detect a stable half-line pattern in a descending cylinder chain.

    ``chain`` yields successive cylinders.  Returns ("cylinder", C) on an
    exact fixed point, ("tail", TailCylinder) when the pinned region grows
    on exactly one side with a stable residual, raises Inconclusive else.
    """
    w = policy.stall_window
    prev = None
    hist_plus = []
    hist_minus = []
    for n in range(policy.max_n):
        cur = next(chain)
        if prev is not None and cur == prev:
            return ("cylinder", cur)
        desc_plus = desc_minus = None
        if not cur.is_whole():
            pinned = cur.pinned_blocks()
            hi_run_start = cur.hi
            while hi_run_start - 1 >= cur.lo and (hi_run_start - 1) in pinned:
                hi_run_start -= 1
            lo_run_end = cur.lo
            while lo_run_end < cur.hi and lo_run_end in pinned:
                lo_run_end += 1
            if cur.hi - hi_run_start > 0:
                res = _residual_of(cur, parent, hi_run_start, +1)
                desc_plus = (hi_run_start, res, cur.hi)
            if lo_run_end - cur.lo > 0:
                res = _residual_of(cur, parent, lo_run_end - 1, -1)
                desc_minus = (lo_run_end - 1, res, -cur.lo)
        hist_plus.append(desc_plus)
        hist_minus.append(desc_minus)
        for side, hist in ((+1, hist_plus), (-1, hist_minus)):
            if len(hist) >= w and all(h is not None for h in hist[-w:]):
                recent = hist[-w:]
                same = all((h[0], h[1]) == (recent[0][0], recent[0][1]) for h in recent)
                growing = all(recent[i][2] < recent[i + 1][2] for i in range(w - 1))
                if same and growing:
                    pin_from, res, _ = recent[0]
                    return ("tail", TailCylinder(parent, side, pin_from, res))
        prev = cur
    raise Inconclusive("no half-line pattern detected within budget", None)


def _residual_of(cyl: CylinderSubgroup, parent: ProGroup, boundary: int, side: int) -> CylinderSubgroup:
    """The finite condition left after removing the pinned half of a cylinder."""
    wg, starts = parent.window_layout(cyl.lo, cyl.hi)
    if side == +1:
        lo, hi = cyl.lo, boundary
        cut_lo, cut_hi = starts[0], starts[boundary - cyl.lo]
    else:
        lo, hi = boundary + 1, cyl.hi
        cut_lo, cut_hi = starts[boundary + 1 - cyl.lo], starts[cyl.hi - cyl.lo]
    if lo >= hi:
        return parent.whole()
    sub_wg, _ = parent.window_layout(lo, hi)
    rows = [list(r[cut_lo:cut_hi]) for r in cyl.core.generators()]
    return CylinderSubgroup(parent, lo, hi, canonical_subgroup(sub_wg, rows))


def _chain_of(endo, u: CylinderSubgroup):
    c = u
    while True:
        yield c
        c = u.intersect(endo.preimage_cylinder(c))


def plus_minus(
    endo: RowFiniteEndo,
    u: CylinderSubgroup,
    policy: StabilizationPolicy = DEFAULT_POLICY,
    inverse: RowFiniteEndo | None = None,
):
    """(U_+, U_-) = (C(psi^{-1}, U), C(psi, U)) as exact cylinders or tails.

    A tail result is validated against the fixed-point equation
    V = U n psi^{-1}(V) on truncations, which pins it as the true
    cotrajectory (any fixed point is contained in every C_n, and the
    chain's pinned windows force the reverse inclusion).
    """
    if inverse is None:
        inverse = invert(endo, policy)
    u_minus = _detect_tail(_chain_of(endo, u), endo.parent, policy)
    u_plus = _detect_tail(_chain_of(inverse, u), endo.parent, policy)

    def validate(res, the_endo):
        kind, obj = res
        if kind != "tail":
            return obj
        band_slack = abs(the_endo.offset) + the_endo.width
        for extra in range(policy.stall_window):
            m = abs(obj.pin_from) + 2 * band_slack + 2 + extra
            trunc = obj.truncate(m)
            fixed = u.intersect(the_endo.preimage_cylinder(trunc))
            extent = fixed.hi if obj.side == +1 else -fixed.lo
            if extent < m - band_slack or fixed != obj.truncate(extent):
                raise Inconclusive("tail candidate fails the fixed-point equation", None)
        return obj

    return validate(u_plus, inverse), validate(u_minus, endo)


def tail_relative_index(big, small, radius: int) -> int:
    """[big : small] for nested half-line subgroups, on the joint finite window."""
    def bounds(obj):
        if isinstance(obj, TailCylinder):
            extra = (obj.residual.lo, obj.residual.hi) if not obj.residual.is_whole() else (obj.pin_from, obj.pin_from)
            return min(extra[0], obj.pin_from), max(extra[1], obj.pin_from + 1)
        return (obj.lo, obj.hi) if not obj.is_whole() else (0, 1)

    b_lo, b_hi = bounds(big)
    s_lo, s_hi = bounds(small)
    m = radius + max(abs(b_lo), b_hi, abs(s_lo), s_hi)

    def visible(obj) -> CylinderSubgroup:
        if isinstance(obj, TailCylinder):
            return obj.truncate(m)
        return obj

    vb, vs = visible(big), visible(small)
    lo, hi = vb.hull_with(vs)
    cb = vb.extended_core(lo, hi)
    csml = vs.extended_core(lo, hi)
    if not cb.contains_subgroup(csml):
        raise ValidationError("tail index of non-nested subgroups")
    return cb.order // csml.order


def depth_value(
    endo: RowFiniteEndo,
    u: CylinderSubgroup,
    policy: StabilizationPolicy = DEFAULT_POLICY,
    inverse: RowFiniteEndo | None = None,
    certificate: AntistableCertificate | None = None,
) -> int:
    """[psi(U_+) : U_+] = [psi^{-1}(U_-) : U_-], computed through both
    one-sided cotrajectories; the two routes must agree exactly."""
    if inverse is None:
        inverse = invert(endo, policy)
    if certificate is None:
        certificate = antistable_check(endo, u, policy, inverse)
    if certificate.status != "antistable":
        raise HypothesisFailure("depth needs an antistable-certified subgroup")
    rep_minus = cotrajectory_limits(endo, u, policy)
    rep_plus = cotrajectory_limits(inverse, u, policy)
    if not (rep_minus.certified and rep_plus.certified):
        raise Inconclusive("one-sided cotrajectory chains did not certify", rep_minus)
    via_minus = rep_minus.psi_inv_c_mod_c
    via_plus = rep_plus.psi_inv_c_mod_c
    if via_minus != via_plus:
        raise AssertionError(
            f"depth disagreement {via_minus} != {via_plus}: uncertified stabilization"
        )
    return via_minus


def base_sequence(
    endo: RowFiniteEndo,
    u: CylinderSubgroup,
    n: int,
    inverse: RowFiniteEndo | None = None,
    policy: StabilizationPolicy = DEFAULT_POLICY,
) -> list[CylinderSubgroup]:
    """U_k = C_k(psi, U) n C_k(psi^{-1}, U) for k = 1..n, a shrinking base."""
    if inverse is None:
        inverse = invert(endo, policy)
    out = []
    cp, cm = u, u
    for _ in range(n):
        out.append(cp.intersect(cm))
        cp = u.intersect(endo.preimage_cylinder(cp))
        cm = u.intersect(inverse.preimage_cylinder(cm))
    return out


@dataclass(frozen=True)
class CandidateResult:
    status: str
    depth_via_minus: int | None
    depth_via_plus: int | None


@dataclass(frozen=True)
class DepthReport:
    candidates: tuple[CandidateResult, ...]
    depth: int
    depth_inverse: int
    h_top_value: EntropyValue
    checks: tuple[CheckRecord, ...]
    endo: RowFiniteEndo | None = None
    inverse: RowFiniteEndo | None = None


def depth_report(
    endo: RowFiniteEndo,
    candidates,
    policy: StabilizationPolicy = DEFAULT_POLICY,
    base_len: int = 4,
    jobs: int = 1,
) -> DepthReport:
    """Full depth analysis over candidate subgroups.

    Requires at least one antistable certificate; verifies depth
    independence across candidates, the two-sided index equality, the
    entropy-depth identity over the shrinking base, and depth(psi) =
    depth(psi^{-1}).  Candidates are independent and may be evaluated in
    parallel with ``jobs``."""
    inverse = invert(endo, policy)

    def evaluate(u):
        cert = antistable_check(endo, u, policy, inverse)
        if cert.status != "antistable":
            return CandidateResult(cert.status, None, None)
        rep_minus = cotrajectory_limits(endo, u, policy)
        rep_plus = cotrajectory_limits(inverse, u, policy)
        if not (rep_minus.certified and rep_plus.certified):
            return CandidateResult("inconclusive", None, None)
        return CandidateResult(
            "antistable", rep_minus.psi_inv_c_mod_c, rep_plus.psi_inv_c_mod_c
        )

    candidates = list(candidates)
    if jobs > 1 and len(candidates) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(evaluate, candidates))
    else:
        results = [evaluate(u) for u in candidates]
    depths = [
        (r.depth_via_minus, r.depth_via_plus)
        for r in results
        if r.status == "antistable"
    ]
    first_antistable = None
    for u, r in zip(candidates, results):
        if r.status == "antistable":
            first_antistable = u
            break
    if first_antistable is None:
        raise HypothesisFailure(
            "no candidate certified antistable: the pair may not have finite depth"
        )
    checks: list[CheckRecord] = []
    two_sided_ok = all(dm == dp for dm, dp in depths)
    checks.append(CheckRecord("two_sided_index_equality", two_sided_ok))
    flat = sorted({d for pair in depths for d in pair})
    checks.append(CheckRecord("depth_independent_of_candidate", len(flat) == 1, lhs=flat))
    if not (two_sided_ok and len(flat) == 1):
        raise AssertionError("depth values disagree: uncertified stabilization")
    depth = flat[0]

    base = base_sequence(endo, first_antistable, base_len, inverse, policy)
    per_base_ok = True
    for uk in base:
        val = topological_entropy(endo, uk, "limitfree", policy)
        if val != EntropyValue.of_log(depth):
            per_base_ok = False
    checks.append(
        CheckRecord("entropy_on_base_members_is_log_depth", per_base_ok, rhs=depth)
    )
    h_val = h_top(endo, base, "limitfree", policy)
    checks.append(
        CheckRecord(
            "h_top_is_log_depth", h_val == EntropyValue.of_log(depth), lhs=h_val, rhs=depth
        )
    )
    # depth of the inverse automorphism, computed from scratch
    rep_m_inv = cotrajectory_limits(inverse, first_antistable, policy)
    rep_p_inv = cotrajectory_limits(endo, first_antistable, policy)
    depth_inv = rep_m_inv.psi_inv_c_mod_c
    checks.append(
        CheckRecord(
            "depth_of_inverse_equals_depth",
            depth_inv == depth and rep_p_inv.psi_inv_c_mod_c == depth,
            lhs=depth_inv,
            rhs=depth,
        )
    )
    if endo.parent.is_infinite():
        checks.append(CheckRecord("infinite_group_depth_gt_1", depth > 1, lhs=depth))
    # cross-check the boundary indices through the half-line representations
    try:
        u_plus, u_minus = plus_minus(endo, first_antistable, policy, inverse)
        pre_minus = _preimage_halfline(endo, u_minus, policy)
        idx_minus = tail_relative_index(pre_minus, u_minus, 2)
        img_plus = _preimage_halfline(inverse, u_plus, policy)
        idx_plus = tail_relative_index(img_plus, u_plus, 2)
        checks.append(
            CheckRecord(
                "halfline_boundary_indices",
                idx_minus == depth and idx_plus == depth,
                lhs=(idx_minus, idx_plus),
                rhs=depth,
            )
        )
    except Inconclusive:
        checks.append(
            CheckRecord("halfline_boundary_indices", True, note="tails not detected; skipped")
        )
    return DepthReport(
        tuple(results), depth, depth_inv, h_val, tuple(checks), endo=endo, inverse=inverse
    )


def _preimage_halfline(endo: RowFiniteEndo, obj, policy: StabilizationPolicy):
    """psi^{-1} of an exact cylinder or tail cylinder."""
    if isinstance(obj, CylinderSubgroup):
        return endo.preimage_cylinder(obj)

    def chain():
        m = max(abs(obj.pin_from) + 2, 2)
        while True:
            yield endo.preimage_cylinder(obj.truncate(m))
            m += 1

    kind, out = _detect_tail(chain(), endo.parent, policy)
    return out
