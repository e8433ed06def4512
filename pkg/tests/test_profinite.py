import pytest

from entctl.errors import Inconclusive, ValidationError
from entctl.finabel import FiniteAbelianGroup, canonical_subgroup
from entctl.profinite import (
    CylinderSubgroup,
    PowerEndo,
    cokernel_order,
    cotrajectory,
    cotrajectory_exact,
    cotrajectory_limits,
    cylinder,
    h_top,
    identity_endo,
    kernel_order,
    log_law_check,
    pro_group,
    quotient_system,
    rowfinite_endo,
    surjective_on_windows,
    topological_entropy,
)
from entctl.values import EntropyValue, StabilizationPolicy

Z2 = FiniteAbelianGroup((2,))
Z3 = FiniteAbelianGroup((3,))


def k_z2():
    return pro_group([], [Z2], "N")


def left_shift(k):
    rank = k.period[0].rank
    ident = [[1 if i == j else 0 for j in range(rank)] for i in range(rank)]
    return rowfinite_endo(k, 1, 1, 1, [[(1, ident)]])


def right_shift(k):
    return rowfinite_endo(k, -1, 1, 1, [[(-1, [[1]])]])


def u0(k, depth=1):
    return cylinder(k, (0, depth), [])


def test_group_and_cylinder_basics():
    k = k_z2()
    u = u0(k)
    assert u.index == 2
    assert cylinder(k, [], []).is_whole()
    diag = cylinder(k, (0, 2), [[1, 1]])
    assert diag.index == 2
    kz = pro_group([], [Z3], "Z")
    assert kz.block(-2).moduli == (3,)
    with pytest.raises(ValidationError):
        pro_group([Z2], [Z2], "Z")


def test_cylinder_core_window_mismatch():
    from entctl.errors import AmbientMismatchError

    k = k_z2()
    wrong, _ = k.window_layout(0, 3)
    with pytest.raises(AmbientMismatchError):
        CylinderSubgroup(k, 0, 1, wrong.whole_subgroup())


def test_cylinder_normalization_shrinks_free_blocks():
    k = k_z2()
    wg, _ = k.window_layout(0, 3)
    # core constrains only coordinate 0; blocks 1, 2 are free
    core = canonical_subgroup(wg, [(0, 1, 0), (0, 0, 1)])
    c = CylinderSubgroup(k, 0, 3, core)
    assert (c.lo, c.hi) == (0, 1)
    assert c == u0(k)


def test_whole_group_subgroup_gives_zero_entropy():
    k = k_z2()
    u = cylinder(k, [], [])
    assert u.is_whole() and u.index == 1
    rep = cotrajectory_limits(left_shift(k), u)
    assert rep.certified and rep.alpha == 1
    assert topological_entropy(left_shift(k), u, "limitfree").is_zero


def test_cylinder_membership():
    k = k_z2()
    diag = cylinder(k, (0, 2), [[1, 1]])
    assert diag.contains_elem({})
    assert diag.contains_elem({0: (1,), 1: (1,)})
    assert not diag.contains_elem({0: (1,)})
    assert diag.contains_elem({0: (1,), 1: (1,), 7: (1,)})  # outside window is free
    assert k.whole().contains_elem({3: (1,)})


def test_cotrajectory_examples():
    k = k_z2()
    sig = left_shift(k)
    u = u0(k)
    c3 = cotrajectory(sig, u, 3)
    assert c3.index == 8 and (c3.lo, c3.hi) == (0, 3)
    ident = identity_endo(k)
    assert cotrajectory(ident, u, 7) == u
    rho = right_shift(k)
    assert cotrajectory(rho, u, 2) == u


def test_cotrajectory_limits_left_shift():
    k = k_z2()
    rep = cotrajectory_limits(left_shift(k), u0(k))
    assert rep.certified
    assert rep.alpha == 2
    assert rep.k_mod_l == 1
    assert rep.psi_inv_c_mod_c == 2
    assert rep.c[:4] == (2, 4, 8, 16)
    for a, b in zip(rep.c, rep.c[1:]):
        assert b % a == 0
    for a, b in zip(rep.alphas, rep.alphas[1:]):
        assert a % b == 0


def test_cotrajectory_limits_right_shift():
    k = k_z2()
    rep = cotrajectory_limits(right_shift(k), u0(k))
    assert rep.certified
    assert rep.alpha == 1
    assert rep.psi_inv_c_mod_c == 2
    assert rep.k_mod_l == 2


def test_entropy_methods():
    k = k_z2()
    sig, rho = left_shift(k), right_shift(k)
    u = u0(k)
    assert topological_entropy(sig, u, "limit") == EntropyValue.of_log(2)
    assert topological_entropy(sig, u, "limitfree") == EntropyValue.of_log(2)
    assert topological_entropy(sig, u, "surjective") == EntropyValue.of_log(2)
    assert topological_entropy(rho, u, "limit").is_zero
    assert topological_entropy(rho, u, "limitfree").is_zero
    with pytest.raises(ValidationError):
        topological_entropy(rho, u, "surjective")
    assert topological_entropy(identity_endo(k), u, "limitfree").is_zero


def test_surjectivity_detection():
    k = k_z2()
    assert surjective_on_windows(left_shift(k))
    assert not surjective_on_windows(right_shift(k))
    assert surjective_on_windows(identity_endo(k))


def test_h_top_base():
    k = k_z2()
    sig = left_shift(k)
    base = [u0(k, d) for d in (1, 2, 3)]
    assert h_top(sig, base) == EntropyValue.of_log(2)
    assert h_top(identity_endo(k), base).is_zero
    kz = pro_group([], [Z3], "Z")
    shift_z = rowfinite_endo(kz, 1, 1, 1, [[(1, [[1]])]])
    centered = [cylinder(kz, (-m, m + 1), []) for m in range(3)]
    assert h_top(shift_z, centered) == EntropyValue.of_log(3)


def test_kernel_and_cokernel_orders():
    k = k_z2()
    assert kernel_order(left_shift(k)) == 2
    assert cokernel_order(left_shift(k)) == 1
    assert kernel_order(right_shift(k)) == 1
    assert cokernel_order(right_shift(k)) == 2
    assert kernel_order(identity_endo(k)) == 1
    # kernel with infinite-support elements: psi(x)_i = x_i + x_{i+1} on (Z/2)^N
    # has kernel {0, (1,1,1,...)} of order 2
    fold = rowfinite_endo(k, 0, 2, 1, [[(0, [[1]]), (1, [[1]])]])
    assert kernel_order(fold) == 2
    assert cokernel_order(fold) == 1


def test_cotrajectory_exact_classification():
    k = k_z2()
    assert cotrajectory_exact(left_shift(k), u0(k))[0] == "trivial"
    kind, cyl_ = cotrajectory_exact(right_shift(k), u0(k))
    assert kind == "stalled" and cyl_ == u0(k)
    kind, cyl_ = cotrajectory_exact(identity_endo(k), u0(k))
    assert kind == "stalled" and cyl_ == u0(k)
    kz = pro_group([], [Z2], "Z")
    shift_z = rowfinite_endo(kz, 1, 1, 1, [[(1, [[1]])]])
    with pytest.raises(Inconclusive):
        cotrajectory_exact(shift_z, cylinder(kz, (0, 1), []))


def test_quotient_system_examples():
    k = k_z2()
    u = u0(k)
    qs = quotient_system(left_shift(k), u)
    assert qs.mode == "whole"
    assert all(c.ok for c in qs.checks)
    qr = quotient_system(right_shift(k), u)
    assert qr.mode == "finite"
    assert qr.quotient.moduli == (2,)
    assert qr.endo_q.matrix == ((0,),)  # induced map is zero on K/U
    assert qr.u_image.order == 1
    assert all(c.ok for c in qr.checks)
    qi = quotient_system(identity_endo(k), u)
    assert qi.mode == "finite"
    assert all(c.ok for c in qi.checks)


def test_log_law():
    k = k_z2()
    sig = left_shift(k)
    u = u0(k)
    for kk in (2, 3, 4):
        rec = log_law_check(sig, u, kk)
        assert rec.ok and rec.lhs == 2**kk
    kz = pro_group([], [Z2], "Z")
    shift_z = rowfinite_endo(kz, 1, 1, 1, [[(1, [[1]])]])
    rec = log_law_check(shift_z, cylinder(kz, (0, 1), []), 2)
    assert rec.ok and rec.lhs == 4
    with pytest.raises(ValidationError):
        log_law_check(right_shift(k), u, 2)
    rec = log_law_check(identity_endo(k), u, 5)
    assert rec.ok and rec.lhs == 1


def test_coker_remark_inequality():
    # trivial certified cotrajectory on an infinite group forces
    # |ker psi| > |coker psi|
    k = k_z2()
    sig = left_shift(k)
    assert cotrajectory_exact(sig, u0(k))[0] == "trivial"
    assert k.is_infinite()
    assert kernel_order(sig) > cokernel_order(sig)


def test_power_endo_consistency():
    k = k_z2()
    sig = left_shift(k)
    p2 = PowerEndo(sig, 2)
    x = {3: (1,)}
    assert p2.apply(x) == sig.apply(sig.apply(x))
    u = u0(k)
    assert p2.preimage_cylinder(u) == sig.preimage_cylinder(sig.preimage_cylinder(u))
    rep = cotrajectory_limits(p2, u)
    assert rep.certified and rep.alpha == 2  # same U sees one new pin per step


def test_automorphism_inverse_has_same_index_chain():
    # for a topological automorphism, [K : C_n(psi, U)] = [K : C_n(psi^{-1}, U)]
    z8 = FiniteAbelianGroup((8,))
    kz = pro_group([], [z8], "Z")
    cases = [
        # shift and its inverse
        (
            rowfinite_endo(kz, 1, 1, 1, [[(1, [[1]])]]),
            rowfinite_endo(kz, -1, 1, 1, [[(-1, [[1]])]]),
        ),
        # unipotent automorphism 1 + 2s with inverse 1 + 6s + 4s^2 (s = shift)
        (
            rowfinite_endo(kz, 0, 2, 1, [[(0, [[1]]), (1, [[2]])]]),
            rowfinite_endo(kz, 0, 3, 1, [[(0, [[1]]), (1, [[6]]), (2, [[4]])]]),
        ),
    ]
    from entctl.profinite import identity_endo as _ie

    for psi, psi_inv in cases:
        assert psi.compose(psi_inv).equals_spec(_ie(kz))
        assert psi_inv.compose(psi).equals_spec(_ie(kz))
        for u in [cylinder(kz, (0, 1), []), cylinder(kz, (0, 2), [[1, 2]])]:
            a = cotrajectory_limits(psi, u)
            b = cotrajectory_limits(psi_inv, u)
            n = min(len(a.c), len(b.c))
            assert a.c[:n] == b.c[:n]


def test_period_two_blocks():
    k = pro_group([], [Z2, FiniteAbelianGroup((4,))], "N")
    # shift by 2 keeps block types aligned
    shift2 = rowfinite_endo(
        k, 2, 1, 2, [[(2, [[1]])], [(2, [[1]])]]
    )
    u = cylinder(k, (0, 1), [])
    rep = cotrajectory_limits(shift2, u)
    assert rep.certified and rep.alpha == 2
    u1 = cylinder(k, (1, 2), [])
    rep4 = cotrajectory_limits(shift2, u1)
    assert rep4.certified and rep4.alpha == 4


def test_cotrajectory_membership_against_iterated_application():
    # x lies in C_n iff every iterate psi^j(x), j < n, satisfies the U
    # condition; check element by element over the cylinder's window
    import itertools
    import random

    rng = random.Random(4321)
    for _ in range(15):
        d = rng.choice([2, 3])
        k_rank = rng.randrange(1, 3)
        blk = FiniteAbelianGroup((d,) * k_rank)
        kgrp = pro_group([], [blk], "N")
        offset = rng.choice([-1, 0, 1])
        width = rng.randrange(1, 3)
        terms = []
        for o in range(offset, offset + width):
            mat = [[rng.randrange(d) for _ in range(k_rank)] for _ in range(k_rank)]
            if any(any(r) for r in mat):
                terms.append((o, mat))
        if not terms:
            continue
        endo = rowfinite_endo(kgrp, offset, width, 1, [terms])
        u = cylinder(kgrp, (0, 1), [])
        n = rng.randrange(2, 4)
        c_n = cotrajectory(endo, u, n)
        wg, starts = kgrp.window_layout(c_n.lo, c_n.hi)
        if wg.order > 4000:
            continue
        for dense in itertools.product(*(range(m) for m in wg.moduli)):
            x = {}
            for i in range(c_n.lo, c_n.hi):
                piece = tuple(dense[starts[i - c_n.lo] : starts[i - c_n.lo + 1]])
                if any(piece):
                    x[i] = piece
            expect = True
            y = dict(x)
            for _ in range(n):
                if not u.contains_elem(y):
                    expect = False
                    break
                y = endo.apply(y)
            assert c_n.core.contains(dense) == expect


def test_zero_map_finiteness_hypothesis_holds():
    # for abelian K the quotient K/(Im psi * C) is always finite; even the
    # zero map certifies, with both correction terms equal and entropy 0
    k = k_z2()
    zero = rowfinite_endo(k, 0, 1, 1, [[(0, [[0]])]])
    u = u0(k)
    rep = cotrajectory_limits(zero, u)
    assert rep.certified
    assert rep.psi_inv_c_mod_c == rep.k_mod_l == 2
    assert topological_entropy(zero, u, "limitfree").is_zero


def test_small_image_maps_still_certify():
    # Im psi can have infinite index in K while Im psi * C stays open
    z4 = FiniteAbelianGroup((4,))
    k = pro_group([], [z4], "N")
    u = cylinder(k, (0, 1), [])
    double_shift = rowfinite_endo(k, 1, 1, 1, [[(1, [[2]])]])
    rep = cotrajectory_limits(double_shift, u)
    assert rep.certified
    assert rep.alpha == 1 and rep.psi_inv_c_mod_c == 4 and rep.k_mod_l == 4
    assert topological_entropy(double_shift, u, "limitfree").is_zero


def test_inconclusive_on_tiny_budget():
    k = k_z2()
    sig = left_shift(k)
    tiny = StabilizationPolicy(max_n=2, stall_window=5, window_budget=4)
    rep = cotrajectory_limits(sig, u0(k), tiny)
    assert not rep.certified
    with pytest.raises(Inconclusive):
        topological_entropy(sig, u0(k), "limit", tiny)
