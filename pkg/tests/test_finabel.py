import random

import pytest

from entctl.errors import AmbientMismatchError, ContainmentError, DimensionError, ValidationError
from entctl.finabel import (
    FiniteAbelianGroup,
    canonical_subgroup,
    hom_calculus,
    hom_validate,
    identity_hom,
    quotient_invariants,
    subgroup_combine,
    subgroup_index,
    zero_hom,
)

import oracles


def sub_from_set(group, elems):
    return canonical_subgroup(group, list(elems))


def test_canonical_subgroup_examples():
    a = FiniteAbelianGroup((4, 4))
    assert canonical_subgroup(a, [(2, 0)]).order == 2
    assert canonical_subgroup(a, [(1, 2), (2, 0)]).order == 4
    assert canonical_subgroup(a, []).order == 1


def test_canonical_subgroup_dimension_error():
    a = FiniteAbelianGroup((4, 4))
    with pytest.raises(DimensionError):
        canonical_subgroup(a, [(1, 2, 3)])


def test_subgroup_combine_examples():
    a = FiniteAbelianGroup((4, 4))
    h = canonical_subgroup(a, [(1, 0)])
    l = canonical_subgroup(a, [(1, 2)])
    inter = subgroup_combine(h, l, "intersect")
    assert inter.order == 2
    assert inter == canonical_subgroup(a, [(2, 0)])
    assert subgroup_combine(h, l, "sum").order == 8
    assert subgroup_combine(h, canonical_subgroup(a, []), "sum") == h


def test_subgroup_index_examples():
    z8 = FiniteAbelianGroup((8,))
    h = canonical_subgroup(z8, [(2,)])
    assert subgroup_index(h, h) == 1
    assert subgroup_index(h, z8.whole_subgroup()) == 2
    a = FiniteAbelianGroup((4, 4))
    assert subgroup_index(a.trivial_subgroup(), a.whole_subgroup()) == 16
    with pytest.raises(ContainmentError):
        subgroup_index(canonical_subgroup(a, [(1, 0)]), canonical_subgroup(a, [(2, 0)]))


def test_hom_validate_examples():
    z8 = FiniteAbelianGroup((8,))
    f = hom_validate([[2]], z8, z8)
    assert f.apply((3,)) == (6,)
    z2, z4 = FiniteAbelianGroup((2,)), FiniteAbelianGroup((4,))
    with pytest.raises(ValidationError):
        hom_validate([[1]], z2, z4)
    zero_hom(z2, z4)  # zero map is always fine


def test_hom_calculus_examples():
    z8 = FiniteAbelianGroup((8,))
    f = hom_validate([[2]], z8, z8)
    assert hom_calculus(f, "kernel") == canonical_subgroup(z8, [(4,)])
    assert hom_calculus(f, "image") == canonical_subgroup(z8, [(2,)])
    pre = hom_calculus(f, "preimage", canonical_subgroup(z8, [(4,)]))
    assert pre == canonical_subgroup(z8, [(2,)])


def test_ambient_mismatch():
    a, b = FiniteAbelianGroup((4,)), FiniteAbelianGroup((8,))
    with pytest.raises(AmbientMismatchError):
        subgroup_combine(a.whole_subgroup(), b.whole_subgroup(), "sum")
    f = hom_validate([[2]], a, a)
    with pytest.raises(AmbientMismatchError):
        f.preimage(b.whole_subgroup())
    with pytest.raises(AmbientMismatchError):
        f.image(b.whole_subgroup())


def random_moduli(rng, max_order=10**4):
    while True:
        mods = tuple(
            rng.choice([2, 3, 4, 5, 6, 8, 9]) for _ in range(rng.randrange(1, 5))
        )
        order = 1
        for d in mods:
            order *= d
        if order <= max_order:
            return mods


def random_elems(rng, group, count):
    return [
        tuple(rng.randrange(d) for d in group.moduli) for _ in range(count)
    ]


def test_canonicality_idempotent_and_equality():
    rng = random.Random(2024)
    for _ in range(60):
        g = FiniteAbelianGroup(random_moduli(rng))
        gens = random_elems(rng, g, rng.randrange(0, 4))
        h = canonical_subgroup(g, gens)
        again = canonical_subgroup(g, h.generators())
        assert again == h
        # equality as sets iff identical canonical basis
        shuffled = list(gens)
        rng.shuffle(shuffled)
        doubled = shuffled + shuffled
        assert canonical_subgroup(g, doubled) == h


def test_lagrange_and_membership_against_enumeration():
    rng = random.Random(99)
    for _ in range(40):
        g = FiniteAbelianGroup(random_moduli(rng))
        if g.order > 4000:
            continue
        gens = random_elems(rng, g, rng.randrange(0, 4))
        h = canonical_subgroup(g, gens)
        elems = oracles.subgroup_elements(g.moduli, gens)
        assert h.order == len(elems)
        assert g.order % h.order == 0
        assert h.order * h.index == g.order
        for v in list(elems)[:50]:
            assert h.contains(v)
        assert set(h.elements()) == elems


def test_sum_intersect_against_enumeration():
    rng = random.Random(5)
    for _ in range(40):
        g = FiniteAbelianGroup(random_moduli(rng))
        if g.order > 2500:
            continue
        h = canonical_subgroup(g, random_elems(rng, g, 2))
        l = canonical_subgroup(g, random_elems(rng, g, 2))
        hs = oracles.subgroup_elements(g.moduli, h.generators())
        ls = oracles.subgroup_elements(g.moduli, l.generators())
        inter = h.intersect_with(l)
        assert set(inter.elements()) == (hs & ls)
        tot = h.sum_with(l)
        assert set(tot.elements()) == oracles.sum_sets(g.moduli, hs, ls)
        assert h.order * l.order == tot.order * inter.order


def random_valid_matrix(rng, a, b):
    """Entries satisfying d_src * e = 0 mod d_tgt, so the map is well defined."""
    import math

    mat = []
    for i in range(b.rank):
        row = []
        for j in range(a.rank):
            dt, ds = b.moduli[i], a.moduli[j]
            step = dt // math.gcd(dt, ds)
            row.append(step * rng.randrange(0, dt // step))
        mat.append(row)
    return mat


def test_first_isomorphism_theorem():
    rng = random.Random(123)
    for _ in range(40):
        a = FiniteAbelianGroup(random_moduli(rng))
        b = FiniteAbelianGroup(random_moduli(rng))
        f = hom_validate(random_valid_matrix(rng, a, b), a, b)
        assert f.kernel().order * f.image().order == a.order


def test_preimage_image_adjunction():
    rng = random.Random(321)
    for _ in range(30):
        a = FiniteAbelianGroup(random_moduli(rng))
        f = identity_hom(a)
        h = canonical_subgroup(a, random_elems(rng, a, 2))
        assert f.preimage(h) == h
        assert f.image(h) == h
    # f(f^{-1}(H)) = H n im f ; f^{-1}(f(whole)) = whole
    z8 = FiniteAbelianGroup((8,))
    f = hom_validate([[2]], z8, z8)
    whole = z8.whole_subgroup()
    assert f.preimage(f.image(whole)) == whole
    h = canonical_subgroup(z8, [(4,)])
    assert f.image(f.preimage(h)) == h.intersect_with(f.image(whole))


def test_modular_law():
    rng = random.Random(77)
    for _ in range(30):
        g = FiniteAbelianGroup(random_moduli(rng))
        if g.order > 3000:
            continue
        h = canonical_subgroup(g, random_elems(rng, g, 1))
        l_extra = random_elems(rng, g, 1)
        l = canonical_subgroup(g, h.generators() + l_extra)  # ensures H <= L
        m = canonical_subgroup(g, random_elems(rng, g, 2))
        lhs = h.sum_with(m.intersect_with(l))
        rhs = h.sum_with(m).intersect_with(l)
        assert lhs == rhs


def test_invariants_and_quotients():
    a = FiniteAbelianGroup((4, 4))
    h = canonical_subgroup(a, [(1, 2)])
    assert h.invariants() == (4,)
    assert quotient_invariants(canonical_subgroup(a, [(2, 0)]), a.whole_subgroup()) == (2, 4)
    z12 = FiniteAbelianGroup((12,))
    assert canonical_subgroup(z12, [(4,)]).invariants() == (3,)
