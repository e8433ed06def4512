import random
from fractions import Fraction

import pytest

from entctl.discrete import banded_endo, locally_finite_group, trajectory_limits
from entctl.duality import (
    annihilator,
    bridge,
    dual_group,
    dual_hom,
    verify_duality_facts,
    weiss_bridge_check,
)
from entctl.finabel import (
    FiniteAbelianGroup,
    canonical_subgroup,
    hom_validate,
    identity_hom,
    zero_hom,
)
from entctl.profinite import cotrajectory
from entctl.values import EntropyValue

import oracles
from test_finabel import random_moduli, random_valid_matrix, random_elems

Z2 = FiniteAbelianGroup((2,))


def test_dual_group_examples():
    for mods in [(4,), (2, 2, 2), (2, 6)]:
        a = FiniteAbelianGroup(mods)
        d, p = dual_group(a)
        assert d.moduli == a.moduli
        assert d.order == a.order
        # non-degeneracy by enumeration
        for x in a.elements():
            if any(x):
                assert any(p.pair(x, chi) for chi in d.elements())


def test_pairing_matches_fraction_oracle():
    rng = random.Random(8)
    for _ in range(20):
        a = FiniteAbelianGroup(random_moduli(rng))
        _, p = dual_group(a)
        x = tuple(rng.randrange(d) for d in a.moduli)
        chi = tuple(rng.randrange(d) for d in a.moduli)
        assert Fraction(p.pair(x, chi), p.modulus) == oracles.pairing_value(a.moduli, x, chi)


def test_dual_hom_examples():
    z8 = FiniteAbelianGroup((8,))
    f = hom_validate([[2]], z8, z8)
    assert dual_hom(f).matrix == ((2,),)
    a = FiniteAbelianGroup((2, 4))
    assert dual_hom(identity_hom(a)).matrix == identity_hom(a).matrix
    assert dual_hom(zero_hom(a, a)).matrix == zero_hom(a, a).matrix


def test_double_dual_is_identity():
    rng = random.Random(44)
    for _ in range(30):
        a = FiniteAbelianGroup(random_moduli(rng))
        if a.order > 1000:
            continue
        f = hom_validate(random_valid_matrix(rng, a, a), a, a)
        assert dual_hom(dual_hom(f)).matrix == f.matrix


def test_annihilator_examples():
    z4 = FiniteAbelianGroup((4,))
    d, p = dual_group(z4)
    h = canonical_subgroup(z4, [(2,)])
    hp = annihilator(h, p)
    assert hp == canonical_subgroup(d, [(2,)])
    assert annihilator(z4.trivial_subgroup(), p) == d.whole_subgroup()
    assert annihilator(z4.whole_subgroup(), p).order == 1


def test_annihilator_against_enumeration():
    rng = random.Random(17)
    for _ in range(30):
        a = FiniteAbelianGroup(random_moduli(rng))
        if a.order > 1500:
            continue
        _, p = dual_group(a)
        h = canonical_subgroup(a, random_elems(rng, a, 2))
        hp = annihilator(h, p)
        assert set(hp.elements()) == oracles.annihilator_set(a.moduli, set(h.elements()))
        assert h.order * hp.order == a.order


def test_annihilator_reverses_lattice_ops():
    rng = random.Random(29)
    for _ in range(25):
        a = FiniteAbelianGroup(random_moduli(rng))
        _, p = dual_group(a)
        h = canonical_subgroup(a, random_elems(rng, a, 2))
        l = canonical_subgroup(a, random_elems(rng, a, 2))
        assert annihilator(h.sum_with(l), p) == annihilator(h, p).intersect_with(
            annihilator(l, p)
        )
        assert annihilator(h.intersect_with(l), p) == annihilator(h, p).sum_with(
            annihilator(l, p)
        )


def test_verify_duality_facts_examples():
    z8 = FiniteAbelianGroup((8,))
    f = hom_validate([[2]], z8, z8)
    h = canonical_subgroup(z8, [(4,)])
    recs = verify_duality_facts(z8, f, h, z8.whole_subgroup(), 1)
    assert all(r.ok for r in recs)
    a = FiniteAbelianGroup((2, 2))
    recs = verify_duality_facts(a, identity_hom(a), a.trivial_subgroup(), a.whole_subgroup(), 2)
    assert all(r.ok for r in recs)


def test_verify_duality_facts_randomized():
    rng = random.Random(500)
    for _ in range(40):
        a = FiniteAbelianGroup(random_moduli(rng))
        f = hom_validate(random_valid_matrix(rng, a, a), a, a)
        h = canonical_subgroup(a, random_elems(rng, a, 1))
        l = canonical_subgroup(a, h.generators() + random_elems(rng, a, 1))
        for r in verify_duality_facts(a, f, h, l, rng.randrange(1, 4)):
            assert r.ok, r


def shift_group_and_endo():
    g = locally_finite_group([], [Z2])
    beta = banded_endo(g, 1, 1, 1, [[[(1, (1,))]]])
    return g, beta


def test_bridge_shift_example():
    g, beta = shift_group_and_endo()
    k, psi, u = bridge(g, beta, [{0: (1,)}])
    assert psi.offset == 1 and psi.rows == (((1, ((1,),)),),)
    assert u.index == 2 and (u.lo, u.hi) == (0, 1)


def test_bridge_identity_and_zero():
    g = locally_finite_group([], [Z2])
    ident = banded_endo(g, 0, 1, 1, [[[(0, (1,))]]])
    _, psi, _ = bridge(g, ident, [{0: (1,)}])
    assert psi.rows == (((0, ((1,),)),),)
    zero = banded_endo(g, 0, 1, 1, [[[]]])
    _, psi0, _ = bridge(g, zero, [{0: (1,)}])
    assert all(not any(any(r) for r in m) for _, m in psi0.rows[0])


def test_trajectory_annihilator_is_cotrajectory():
    from entctl.discrete import trajectory
    from entctl.profinite import CylinderSubgroup

    g, beta = shift_group_and_endo()
    f = [{0: (1,)}]
    k, psi, u = bridge(g, beta, f)
    for n in range(1, 7):
        t_n = trajectory(beta, f, n)
        wg = t_n.subgroup.ambient
        _, pairing = dual_group(wg)
        perp = CylinderSubgroup(k, 0, t_n.window_hi, annihilator(t_n.subgroup, pairing))
        assert perp == cotrajectory(psi, u, n)


def test_weiss_bridge_check_examples():
    g, beta = shift_group_and_endo()
    rep = weiss_bridge_check(g, beta, [[{0: (1,)}]])
    assert rep.ok
    assert rep.h_alg_value == rep.h_top_value == EntropyValue.of_log(2)
    zero = banded_endo(g, 0, 1, 1, [[[]]])
    rep0 = weiss_bridge_check(g, zero, [[{0: (1,)}]])
    assert rep0.ok and rep0.h_alg_value.is_zero and rep0.h_top_value.is_zero
    ident = banded_endo(g, 0, 1, 1, [[[(0, (1,))]]])
    repi = weiss_bridge_check(g, ident, [[{0: (1,)}]])
    assert repi.ok and repi.h_alg_value.is_zero


def test_weiss_bridge_sum_rule():
    g = locally_finite_group([], [Z2])
    sumrule = banded_endo(g, 0, 2, 1, [[[(0, (1,)), (1, (1,))]]])
    rep = weiss_bridge_check(g, sumrule, [[{0: (1,)}], [{0: (1,)}, {1: (1,)}]])
    assert rep.ok
    assert rep.h_alg_value == EntropyValue.of_log(2)


def test_bridge_negative_offset_left_shift():
    # e_0 -> 0, e_i -> e_{i-1} dualizes to the right shift; both correction
    # terms are nontrivial on both sides and the entropies are 0
    g = locally_finite_group([], [Z2])
    left = banded_endo(g, -1, 1, 1, [[[(-1, (1,))]]])
    rep = trajectory_limits(left, [{0: (1,)}])
    assert rep.certified and rep.t_mod_phi_t == 2 and rep.ker_cap_t == 2
    _, psi, _ = bridge(g, left, [{0: (1,)}])
    assert psi.rows == (((-1, ((1,),)),),)
    br = weiss_bridge_check(
        g, left, [[{0: (1,)}], [{1: (1,)}], [{0: (1,)}, {2: (1,)}]]
    )
    assert br.ok and br.h_alg_value.is_zero and br.h_top_value.is_zero


def test_bridge_randomized_mixed_blocks():
    # blocks of different orders exercise the adjoint scaling d_src/d_tgt
    import math

    rng = random.Random(606)
    done = 0
    while done < 12:
        period = [
            FiniteAbelianGroup(
                tuple(rng.choice([2, 3, 4, 6]) for _ in range(rng.randrange(1, 3)))
            )
            for _ in range(rng.randrange(1, 3))
        ]
        g = locally_finite_group([], period)
        p = len(period)
        offset = rng.choice([0, 1])
        width = rng.randrange(1, 3)
        images = []
        for r in range(p):
            src = period[r]
            gen_images = []
            for j in range(src.rank):
                dj = src.moduli[j]
                terms = []
                for o in range(offset, offset + width):
                    tgt = period[(r + o) % p]
                    vec = []
                    for du in tgt.moduli:
                        step = du // math.gcd(du, dj)
                        vec.append(step * rng.randrange(0, du // step))
                    if any(vec):
                        terms.append((o, tuple(vec)))
                gen_images.append(terms)
            images.append(gen_images)
        endo = banded_endo(g, offset, width, p, images)
        blk0 = period[0]
        f = [{0: tuple(rng.randrange(d) for d in blk0.moduli)}]
        rep = weiss_bridge_check(g, endo, [f])
        assert rep.ok, (period, images, f)
        done += 1


def test_bridge_rejects_nonabelian():
    s3 = oracles.perm_table(3)[0]
    from entctl.gengroup import cayley_group
    from entctl.errors import ValidationError

    g = locally_finite_group([], [cayley_group(s3)])
    endo = banded_endo(g, 1, 1, 1, [[[(1, x)] for x in range(6)]])
    with pytest.raises(ValidationError):
        bridge(g, endo, [{0: 1}])
