"""Pontryagin duality for finite abelian groups and the window-level duality
between restricted sums and full products of finite blocks.

The dual of Z/d_1 x ... x Z/d_k is the same group; the pairing of x with a
character chi is sum_i x_i chi_i (m/d_i) mod m for m = lcm(d_i), an exact
representative of a circle element.  Annihilators translate trajectories on
the discrete side into cotrajectories on the profinite side, which is what
the bridge check exercises.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from .discrete import BandedEndo, LFGroup, trajectory, trajectory_limits
from .errors import AmbientMismatchError, ValidationError
from .finabel import (
    AbSubgroup,
    FiniteAbelianGroup,
    Hom,
    canonical_subgroup,
    hom_validate,
    quotient_invariants,
)
from .lattice import congruence_kernel
from .profinite import (
    CylinderSubgroup,
    ProGroup,
    RowFiniteEndo,
    cotrajectory,
    cotrajectory_limits,
)
from .values import DEFAULT_POLICY, CheckRecord, EntropyValue, StabilizationPolicy


@dataclass(frozen=True)
class DualPairing:
    """Non-degenerate pairing A x A^ -> Z/m with m = lcm of the moduli."""

    group: FiniteAbelianGroup
    dual: FiniteAbelianGroup
    modulus: int
    weights: tuple[int, ...]

    def pair(self, x, chi) -> int:
        self.group.check_vector(x)
        self.dual.check_vector(chi)
        return sum(a * b * w for a, b, w in zip(x, chi, self.weights)) % self.modulus

    def pair_fraction(self, x, chi) -> Fraction:
        """The circle value as an exact fraction in [0, 1)."""
        return Fraction(self.pair(x, chi), self.modulus)


def dual_group(a: FiniteAbelianGroup) -> tuple[FiniteAbelianGroup, DualPairing]:
    m = lcm(1, *a.moduli)
    dual = FiniteAbelianGroup(a.moduli)
    weights = tuple(m // d for d in a.moduli)
    return dual, DualPairing(a, dual, m, weights)


def dual_hom(f: Hom) -> Hom:
    """Adjoint of f: pairing(f(x), chi) = pairing(x, dual_hom(f)(chi))."""
    a, b = f.source, f.target
    mat = []
    for j in range(a.rank):
        dj = a.moduli[j]
        row = []
        for i in range(b.rank):
            di = b.moduli[i]
            num = f.matrix[i][j] * dj
            if num % di:
                raise AssertionError("valid hom must give integral adjoint entries")
            row.append((num // di) % dj)
        mat.append(tuple(row))
    adj = hom_validate(mat, FiniteAbelianGroup(b.moduli), FiniteAbelianGroup(a.moduli))
    _, pa = dual_group(a)
    _, pb = dual_group(b)
    m = lcm(pa.modulus, pb.modulus)
    for j in range(a.rank):
        ej = a.unit(j)
        for i in range(b.rank):
            ei = adj.source.unit(i)
            lhs = pb.pair_fraction(f.apply(ej), ei)
            rhs = pa.pair_fraction(ej, adj.apply(ei))
            if (lhs - rhs) % 1 != 0:
                raise AssertionError("adjoint identity failed on a generator pair")
    return adj


def annihilator(h: AbSubgroup, pairing: DualPairing) -> AbSubgroup:
    """H-perp, the characters vanishing on H."""
    if h.ambient != pairing.group:
        raise AmbientMismatchError("subgroup does not live in the paired group")
    a = pairing.group
    k = a.rank
    m = pairing.modulus
    gens = h.generators()
    if not gens:
        return pairing.dual.whole_subgroup()
    # chi is in H-perp iff sum_i h_i chi_i w_i = 0 mod m for every generator h
    map_rows = []
    for i in range(k):
        map_rows.append([(g[i] * pairing.weights[i]) % m for g in gens])
    combos = congruence_kernel(
        map_rows, len(gens), [], coeff_moduli=[m] * k,
        image_moduli=[m] * len(gens),
    )
    return canonical_subgroup(pairing.dual, combos)


def _endo_block_ranks_ok(group: LFGroup) -> None:
    if not group.is_abelian:
        raise ValidationError("duality bridge requires abelian blocks")
    if group.prefix:
        raise ValidationError("duality bridge requires a purely periodic block spec")


def bridge(
    group: LFGroup, endo: BandedEndo, f_gens
) -> tuple[ProGroup, RowFiniteEndo, CylinderSubgroup]:
    """Dualize (G, phi, F) to (K, psi, U) = (product of dual blocks, adjoint, F-perp).

    The adjoint of a column-finite banded map is row-finite with the same
    band: the image term of generator j of block i landing at block i+o
    contributes its adjoint matrix to output row i, input i+o.
    """
    _endo_block_ranks_ok(group)
    k_group = ProGroup((), tuple(group.period), "N")
    p_blocks = len(group.period)
    p = lcm(p_blocks, endo.period)
    rows = []
    for r in range(p):
        src_blk = group.period[r % p_blocks]
        acc: dict[int, list[list[int]]] = {}
        for j, terms in enumerate(endo.images[r % endo.period]):
            dj = src_blk.moduli[j]
            for o, vec in terms:
                # block types are periodic, so the term exists for every
                # index in this residue class that clears the boundary
                tgt_blk = group.period[(r + o) % p_blocks]
                mat = acc.setdefault(
                    o, [[0] * tgt_blk.rank for _ in range(src_blk.rank)]
                )
                for u, c in enumerate(vec):
                    du = tgt_blk.moduli[u]
                    num = c * dj
                    if num % du:
                        raise AssertionError("validated endo must dualize integrally")
                    mat[j][u] = (mat[j][u] + num // du) % dj
        terms_out = [(o, m) for o, m in sorted(acc.items()) if any(any(row) for row in m)]
        if not terms_out:
            tgt_blk = group.period[(r + endo.offset) % p_blocks]
            terms_out = [(endo.offset, [[0] * tgt_blk.rank for _ in range(src_blk.rank)])]
        rows.append(terms_out)
    psi = RowFiniteEndo(k_group, endo.offset, endo.width, p, rows)

    gens = [group.reduce_elem(dict(x)) for x in f_gens]
    gens = [x for x in gens if x]
    if not gens:
        return k_group, psi, k_group.whole()
    hi = max(max(x.keys()) for x in gens) + 1
    wg, starts = k_group.window_layout(0, hi)
    dense = []
    for x in gens:
        v = [0] * wg.rank
        for i, vec in x.items():
            s = starts[i]
            for t, c in enumerate(vec):
                v[s + t] = c
        dense.append(v)
    f_sub = canonical_subgroup(wg, dense)
    _, pairing = dual_group(wg)
    core = annihilator(f_sub, pairing)
    u = CylinderSubgroup(k_group, 0, hi, core)
    return k_group, psi, u


def verify_duality_facts(
    a: FiniteAbelianGroup, f: Hom, h: AbSubgroup, l: AbSubgroup, n: int = 1
) -> list[CheckRecord]:
    """Check the finite-level duality identities for f: A -> A and H <= L <= A."""
    if f.source != a or f.target != a:
        raise AmbientMismatchError("facts need an endomorphism of A")
    if not l.contains_subgroup(h):
        raise ValidationError("facts need H <= L")
    dual, pairing = dual_group(a)
    fhat = dual_hom(f)
    hp = annihilator(h, pairing)
    lp = annihilator(l, pairing)
    records = []

    records.append(
        CheckRecord("annihilator_order_law", h.order * hp.order == a.order,
                    lhs=h.order * hp.order, rhs=a.order)
    )
    records.append(
        CheckRecord("dual_of_H_is_dual_mod_Hperp",
                    h.invariants() == quotient_invariants(hp, dual.whole_subgroup()),
                    lhs=list(h.invariants()),
                    rhs=list(quotient_invariants(hp, dual.whole_subgroup())))
    )
    img = h
    pre = hp
    ok_c = True
    for _ in range(n):
        img = f.image(img)
        pre = fhat.preimage(pre)
    ok_c = annihilator(img, pairing) == pre
    records.append(CheckRecord(f"image_annihilator_is_adjoint_preimage_n{n}", ok_c))
    records.append(
        CheckRecord("kernel_annihilator_is_adjoint_image",
                    annihilator(f.kernel(), pairing) == fhat.image())
    )
    records.append(
        CheckRecord("relative_annihilator_quotient",
                    quotient_invariants(lp, hp) == quotient_invariants(h, l),
                    lhs=list(quotient_invariants(lp, hp)),
                    rhs=list(quotient_invariants(h, l)))
    )
    records.append(
        CheckRecord("annihilator_swaps_sum_and_intersection",
                    annihilator(h.sum_with(l), pairing) == hp.intersect_with(lp)
                    and annihilator(h.intersect_with(l), pairing) == hp.sum_with(lp))
    )
    return records


@dataclass(frozen=True)
class BridgeReport:
    """Per-subgroup duality comparison of the two entropy computations."""

    entries: tuple
    h_alg_value: EntropyValue
    h_top_value: EntropyValue
    ok: bool


def weiss_bridge_check(
    group: LFGroup,
    endo: BandedEndo,
    family,
    policy: StabilizationPolicy = DEFAULT_POLICY,
    compare_n: int = 8,
) -> BridgeReport:
    """For each F: dualize, compare T_n-perp with C_n, the two limit-free
    correction terms, and the entropies; then compare the suprema."""
    entries = []
    best_alg = EntropyValue.zero()
    best_top = EntropyValue.zero()
    all_ok = True
    for f_gens in family:
        k_group, psi, u = bridge(group, endo, f_gens)
        rep_d = trajectory_limits(endo, f_gens, policy)
        rep_t = cotrajectory_limits(psi, u, policy)
        records = []
        certified = rep_d.certified and rep_t.certified
        records.append(CheckRecord("both_sides_certified", certified))
        n_cmp = min(compare_n, rep_d.n_max, rep_t.n_max)
        tc_a = True
        for n in range(1, n_cmp + 1):
            t_n = trajectory(endo, f_gens, n)
            if t_n.subgroup is None:
                raise ValidationError("bridge comparison needs abelian trajectories")
            wg = t_n.subgroup.ambient
            _, pairing = dual_group(wg)
            perp_core = annihilator(t_n.subgroup, pairing)
            perp = CylinderSubgroup(k_group, 0, t_n.window_hi, perp_core)
            c_n = cotrajectory(psi, u, n)
            if perp != c_n:
                tc_a = False
                break
        records.append(CheckRecord(f"trajectory_perp_is_cotrajectory_n_le_{n_cmp}", tc_a))
        if certified:
            records.append(
                CheckRecord("kernel_term_matches_index_term",
                            rep_d.ker_cap_t == rep_t.k_mod_l,
                            lhs=rep_d.ker_cap_t, rhs=rep_t.k_mod_l)
            )
            records.append(
                CheckRecord("image_term_matches_preimage_term",
                            rep_d.t_mod_phi_t == rep_t.psi_inv_c_mod_c,
                            lhs=rep_d.t_mod_phi_t, rhs=rep_t.psi_inv_c_mod_c)
            )
            h_alg_f = EntropyValue.of_log(Fraction(rep_d.t_mod_phi_t, rep_d.ker_cap_t))
            h_top_f = EntropyValue.of_log(Fraction(rep_t.psi_inv_c_mod_c, rep_t.k_mod_l))
            records.append(
                CheckRecord("entropies_equal", h_alg_f == h_top_f, lhs=h_alg_f, rhs=h_top_f)
            )
            if best_alg < h_alg_f:
                best_alg = h_alg_f
            if best_top < h_top_f:
                best_top = h_top_f
        entry_ok = all(r.ok for r in records)
        all_ok = all_ok and entry_ok
        entries.append((tuple(records), entry_ok))
    all_ok = all_ok and best_alg == best_top
    return BridgeReport(tuple(entries), best_alg, best_top, all_ok)
