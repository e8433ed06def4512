"""Locally finite groups as restricted direct sums of finite blocks, banded
endomorphisms, trajectories, and algebraic entropy.

Elements are sparse: a dict mapping block index (a natural number) to a
nonzero block value, a coordinate tuple for abelian blocks or an element
index for Cayley blocks.  An endomorphism is specified on one period of
block generators by finite-support images shifted along the index line,
so every evaluation stays inside a finite window that can be inferred.

Entropy is computed two ways: from the stabilized index [T_{n+1} : T_n]
of the trajectory chain, and limit-free as
log |T/phi(T)| - log |ker phi n T|, with an independent cross-identity
required before a stall is certified.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from .errors import (
    DimensionError,
    HypothesisFailure,
    Inconclusive,
    ValidationError,
)
from .finabel import AbSubgroup, FiniteAbelianGroup, canonical_subgroup
from .gengroup import FiniteGroup
from .lattice import ZLattice, congruence_kernel
from .values import DEFAULT_POLICY, EntropyValue, StabilizationPolicy


@dataclass(frozen=True)
class LFGroup:
    """Restricted direct sum of finite blocks indexed by the naturals.

    The block sequence is ``prefix`` followed by ``period`` repeated
    forever.  Blocks are all FiniteAbelianGroup or all FiniteGroup.
    """

    prefix: tuple
    period: tuple

    def __post_init__(self):
        if not self.period:
            raise ValidationError("period must contain at least one block")
        blocks = tuple(self.prefix) + tuple(self.period)
        abelian = all(isinstance(b, FiniteAbelianGroup) for b in blocks)
        cayley = all(isinstance(b, FiniteGroup) for b in blocks)
        if not (abelian or cayley):
            raise ValidationError("blocks must be all abelian or all Cayley groups")
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "period", tuple(self.period))

    @property
    def is_abelian(self) -> bool:
        return isinstance(self.period[0], FiniteAbelianGroup)

    def block(self, i: int):
        if i < 0:
            raise DimensionError(f"negative block index {i}")
        if i < len(self.prefix):
            return self.prefix[i]
        return self.period[(i - len(self.prefix)) % len(self.period)]

    def identity(self) -> dict:
        return {}

    def reduce_elem(self, raw: dict) -> dict:
        out = {}
        for i, v in raw.items():
            b = self.block(i)
            if self.is_abelian:
                rv = b.reduce(v)
                if any(rv):
                    out[i] = rv
            else:
                iv = int(v)
                if not (0 <= iv < b.order):
                    raise DimensionError(f"element index {iv} invalid in block {i}")
                if iv != b.identity:
                    out[i] = iv
        return out

    def add(self, a: dict, b: dict) -> dict:
        """Group operation (written additively; blockwise product in general)."""
        out = dict(a)
        for i, v in b.items():
            blk = self.block(i)
            if i in out:
                w = blk.add(out[i], v) if self.is_abelian else blk.mul(out[i], v)
                if (self.is_abelian and any(w)) or (
                    not self.is_abelian and w != blk.identity
                ):
                    out[i] = w
                else:
                    del out[i]
            else:
                out[i] = v
        return out

    def neg(self, a: dict) -> dict:
        if self.is_abelian:
            return {i: self.block(i).neg(v) for i, v in a.items()}
        return {i: self.block(i).inv(v) for i, v in a.items()}

    def max_support(self, a: dict) -> int:
        return max(a.keys(), default=-1)


def locally_finite_group(prefix, period) -> LFGroup:
    return LFGroup(tuple(prefix), tuple(period))


def freeze_elem(elem: dict) -> tuple:
    return tuple(sorted(elem.items()))


class BandedEndo:
    """Endomorphism with finite-support generator images, shifted periodically.

    For abelian groups, images[r][j] lists (offset, vector) terms: the j-th
    generator of block i (i = r mod period) maps to the sum of those
    vectors placed at blocks i + offset.  Terms landing at negative indices
    are dropped, which is the restriction homomorphism at the boundary.
    For Cayley blocks, images[r][x] gives the full image of block element x
    as a list of (offset, element index) factors.
    """

    __slots__ = ("group", "offset", "width", "period", "images", "_horizon")

    def __init__(self, group: LFGroup, offset: int, width: int, period: int, images):
        if width < 1 or period < 1:
            raise ValidationError("band width and period must be positive")
        self.group = group
        self.offset = int(offset)
        self.width = int(width)
        self.period = int(period)
        self.images = tuple(
            tuple(tuple((int(o), tuple(v) if group.is_abelian else int(v)) for o, v in gen_img)
                  for gen_img in res)
            for res in images
        )
        if len(self.images) != period:
            raise ValidationError("images must cover one full period")
        p_blocks = len(group.period)
        self._horizon = (
            len(group.prefix) + lcm(period, p_blocks) + abs(self.offset) + self.width + 1
        )
        self._validate()

    def _terms_for(self, i: int):
        return self.images[i % self.period]

    def _validate(self) -> None:
        g = self.group
        lo, hi = self.offset, self.offset + self.width
        for i in range(self._horizon + 1):
            blk = g.block(i)
            res = self._terms_for(i)
            if g.is_abelian:
                if len(res) != blk.rank:
                    raise ValidationError(
                        f"block {i} has rank {blk.rank} but {len(res)} generator images given"
                    )
                for j, terms in enumerate(res):
                    d = blk.moduli[j]
                    for o, vec in terms:
                        if not (lo <= o < hi):
                            raise ValidationError(
                                f"offset {o} outside band [{lo}, {hi}) at block {i}"
                            )
                        t = i + o
                        if t < 0:
                            continue
                        tb = g.block(t)
                        if len(vec) != tb.rank:
                            raise ValidationError(
                                f"image term at block {t} has wrong rank"
                            )
                        for u, (c, du) in enumerate(zip(vec, tb.moduli)):
                            if (d * c) % du:
                                raise ValidationError(
                                    f"generator {j} of block {i} (order {d}) maps to "
                                    f"coordinate {u} of block {t}: {d}*{c} != 0 mod {du}"
                                )
            else:
                if len(res) != blk.order:
                    raise ValidationError(
                        f"block {i} has order {blk.order} but {len(res)} element images given"
                    )
                for x, terms in enumerate(res):
                    for o, idx in terms:
                        if not (lo <= o < hi):
                            raise ValidationError(
                                f"offset {o} outside band [{lo}, {hi}) at block {i}"
                            )
                        t = i + o
                        if t >= 0 and not (0 <= idx < g.block(t).order):
                            raise ValidationError(
                                f"image index {idx} invalid at block {t}"
                            )
        if not g.is_abelian:
            self._validate_cayley_homomorphism()

    def _image_of_block_elem(self, i: int, x) -> dict:
        """Image of a single-block element, as a sparse element."""
        g = self.group
        out: dict = {}
        if g.is_abelian:
            terms_per_gen = self._terms_for(i)
            for j, c in enumerate(x):
                if c == 0:
                    continue
                for o, vec in terms_per_gen[j]:
                    t = i + o
                    if t < 0:
                        continue
                    tb = g.block(t)
                    add = tb.scale(c, vec)
                    if t in out:
                        out[t] = tb.add(out[t], add)
                    else:
                        out[t] = add
            return g.reduce_elem(out)
        terms = self._terms_for(i)[x]
        for o, idx in terms:
            t = i + o
            if t < 0:
                continue
            out = g.add(out, {t: idx})
        return g.reduce_elem(out)

    def _validate_cayley_homomorphism(self) -> None:
        g = self.group
        for i in range(self._horizon + 1):
            blk = g.block(i)
            imgs = [self._image_of_block_elem(i, x) for x in range(blk.order)]
            for a in range(blk.order):
                for b in range(blk.order):
                    lhs = g.add(imgs[a], imgs[b])
                    rhs = imgs[blk.mul(a, b)]
                    if lhs != rhs:
                        raise ValidationError(
                            f"block {i}: images do not respect the Cayley table "
                            f"at ({a}, {b})"
                        )
            # images of distinct blocks must commute for the blockwise
            # extension to be a homomorphism
            for i2 in range(i + 1, min(i + abs(self.offset) + self.width + 1, self._horizon + 1)):
                blk2 = g.block(i2)
                imgs2 = [self._image_of_block_elem(i2, x) for x in range(blk2.order)]
                for a in range(1, blk.order):
                    for b in range(1, blk2.order):
                        if g.add(imgs[a], imgs2[b]) != g.add(imgs2[b], imgs[a]):
                            raise ValidationError(
                                f"images of blocks {i} and {i2} do not commute"
                            )

    def apply(self, elem: dict) -> dict:
        g = self.group
        out: dict = {}
        if g.is_abelian:
            for i, vec in sorted(elem.items()):
                piece = self._image_of_block_elem(i, vec)
                for t, v in piece.items():
                    tb = g.block(t)
                    out[t] = tb.add(out[t], v) if t in out else v
            return g.reduce_elem(out)
        for i, x in sorted(elem.items()):
            out = g.add(out, self._image_of_block_elem(i, x))
        return g.reduce_elem(out)

    def image_reach(self, hi: int) -> int:
        """Exclusive upper bound of the image support of elements in [0, hi)."""
        return max(hi + max(0, self.offset + self.width - 1), 1)


def banded_endo(group: LFGroup, offset: int, width: int, period: int, images) -> BandedEndo:
    return BandedEndo(group, offset, width, period, images)


@dataclass(frozen=True)
class LFSubgroup:
    """A finite subgroup of an LFGroup, materialized in a window [0, hi)."""

    group: LFGroup
    window_hi: int
    subgroup: AbSubgroup | None = None
    elements: frozenset | None = None

    @property
    def order(self) -> int:
        if self.subgroup is not None:
            return self.subgroup.order
        return len(self.elements)


@dataclass(frozen=True)
class TrajectoryReport:
    """Stall analysis of the trajectory chain T_n = F phi(F) ... phi^{n-1}(F)."""

    n_max: int
    orders: tuple[int, ...]
    alphas: tuple[int, ...]
    n0: int | None
    alpha: int | None
    t_mod_phi_t: int | None
    ker_cap_t: int | None
    certified: bool
    status: str
    f_order: int


class _WindowLayout:
    """Coordinate layout of blocks 0..hi-1 inside one flat vector."""

    def __init__(self, group: LFGroup):
        self.group = group
        self.starts = [0]
        self.moduli: list[int] = []
        self.hi = 0

    def grow_to(self, hi: int) -> None:
        while self.hi < hi:
            blk = self.group.block(self.hi)
            self.moduli.extend(blk.moduli)
            self.starts.append(len(self.moduli))
            self.hi += 1

    @property
    def width(self) -> int:
        return len(self.moduli)

    def dense(self, elem: dict) -> list[int]:
        v = [0] * self.width
        for i, vec in elem.items():
            s = self.starts[i]
            for j, c in enumerate(vec):
                v[s + j] = c
        return v

    def sparse(self, vec) -> dict:
        out = {}
        for i in range(self.hi):
            s, e = self.starts[i], self.starts[i + 1]
            piece = tuple(vec[s:e])
            if any(piece):
                out[i] = self.group.block(i).reduce(piece)
        return out

    def window_group(self) -> FiniteAbelianGroup:
        return FiniteAbelianGroup(tuple(self.moduli))


class _GrowingLattice:
    """Relation-seeded lattice that tracks a growing window."""

    def __init__(self, layout: _WindowLayout):
        self.layout = layout
        self.lat = ZLattice(0, moduli=[])
        self.seeded = 0  # number of coordinates whose relation row is present
        self.total = 1  # order of the window group

    def sync(self) -> None:
        w = self.layout.width
        if self.lat.width < w:
            new_mods = self.layout.moduli[self.lat.width : w]
            self.lat.extend(w, new_moduli=new_mods)
            for d in new_mods:
                self.total *= d
            self.seeded = w

    def add_elem(self, elem: dict) -> None:
        self.sync()
        self.lat.add(self.layout.dense(elem))

    def order(self) -> int:
        self.sync()
        return self.total // self.lat.pivot_product()


class _AbelianTrajectory:
    def __init__(self, endo: BandedEndo, f_gens: list[dict]):
        self.endo = endo
        self.group = endo.group
        self.layout = _WindowLayout(self.group)
        hi = max((self.group.max_support(x) for x in f_gens), default=-1) + 1
        self.layout.grow_to(max(hi, 1))
        self.f_hi = self.layout.hi
        self.lat_t = _GrowingLattice(self.layout)
        self.lat_phit = _GrowingLattice(self.layout)
        self.layers = [list(f_gens)]
        for x in f_gens:
            self.lat_t.add_elem(x)
        self.orders = [self.lat_t.order()]  # |T_1|, |T_2|, ...
        self.phit_orders: list[int] = []  # |phi(T_1)|, ...
        f_group = FiniteAbelianGroup(tuple(self.layout.moduli[: self.layout.starts[self.f_hi]]))
        f_dense = [self.layout.dense(x)[: f_group.rank] for x in f_gens]
        self.f_sub = canonical_subgroup(f_group, f_dense)
        self.f_group = f_group

    def step(self) -> None:
        nxt = [self.endo.apply(x) for x in self.layers[-1]]
        self.layers.append(nxt)
        hi = max((self.group.max_support(x) for x in nxt), default=-1) + 1
        self.layout.grow_to(max(hi, self.layout.hi))
        for x in nxt:
            self.lat_t.add_elem(x)
            self.lat_phit.add_elem(x)
        self.orders.append(self.lat_t.order())
        self.phit_orders.append(self.lat_phit.order())

    def f_cap_phit_order(self) -> int:
        """|F n phi(T_n)| for the current n."""
        self.lat_phit.sync()
        kf = self.f_group.rank
        width = self.layout.width
        map_rows = []
        for c in range(kf):
            row = [0] * width
            row[c] = 1
            map_rows.append(row)
        combos = congruence_kernel(
            map_rows,
            width,
            self.lat_phit.lat.rows,
            coeff_moduli=[self.layout.moduli[c] for c in range(kf)],
            image_moduli=self.layout.moduli,
        )
        inside = canonical_subgroup(self.f_group, combos)
        return self.f_sub.intersect_with(inside).order

    def kernel_cap_t_order(self) -> int:
        """|ker phi n T_n| computed honestly from the lattice basis."""
        self.lat_t.sync()
        basis = self.lat_t.lat.basis()
        tgt_layout = _WindowLayout(self.group)
        tgt_layout.grow_to(self.endo.image_reach(self.layout.hi))
        c = lcm(1, *tgt_layout.moduli)
        map_rows = []
        for row in basis:
            img = self.endo.apply(self.layout.sparse(row))
            map_rows.append(tgt_layout.dense(img))
        w = tgt_layout.width
        combos = congruence_kernel(
            map_rows, w, [], coeff_moduli=[c] * len(map_rows),
            image_moduli=tgt_layout.moduli,
        )
        width = self.layout.width
        rows = []
        for combo in combos:
            acc = [0] * width
            for ci, brow in zip(combo, basis):
                if ci:
                    for t in range(width):
                        acc[t] += ci * brow[t]
            rows.append(acc)
        ker_sub = canonical_subgroup(self.layout.window_group(), rows)
        return ker_sub.order

    def snapshot(self) -> LFSubgroup:
        self.lat_t.sync()
        lat = self.lat_t.lat.copy()
        lat.normalize()
        sub = AbSubgroup(self.layout.window_group(), lat.basis())
        return LFSubgroup(self.group, self.layout.hi, subgroup=sub)


class _CayleyTrajectory:
    def __init__(self, endo: BandedEndo, f_gens: list[dict]):
        self.endo = endo
        self.group = endo.group
        self.f_elems = self._close(set(map(freeze_elem, f_gens)))
        self.t_elems = set(self.f_elems)
        self.layers = [list(f_gens)]
        self.orders = [len(self.t_elems)]
        self.phit_elems: set = {freeze_elem({})}
        self.phit_orders: list[int] = []

    def _close(self, seed: set) -> frozenset:
        g = self.group
        elems = set(seed)
        elems.add(freeze_elem({}))
        frontier = list(elems)
        gens = [dict(x) for x in seed]
        while frontier:
            new = []
            for fx in frontier:
                x = dict(fx)
                for s in gens:
                    for y in (g.add(x, s), g.add(s, x)):
                        fy = freeze_elem(y)
                        if fy not in elems:
                            elems.add(fy)
                            new.append(fy)
            frontier = new
        return frozenset(elems)

    def check_f_normal(self) -> None:
        g = self.group
        for fs in self.t_elems:
            s = dict(fs)
            s_inv = g.neg(s)
            for ff in self.f_elems:
                conj = g.add(g.add(s, dict(ff)), s_inv)
                if freeze_elem(conj) not in self.f_elems:
                    raise HypothesisFailure(
                        "F is not normal in the subgroup generated by its trajectory"
                    )

    def step(self) -> None:
        g = self.group
        nxt = [self.endo.apply(x) for x in self.layers[-1]]
        self.layers.append(nxt)
        self.t_elems = set(
            self._close(self.t_elems | {freeze_elem(x) for x in nxt})
        )
        self.phit_elems = set(
            self._close(self.phit_elems | {freeze_elem(x) for x in nxt})
        )
        self.orders.append(len(self.t_elems))
        self.phit_orders.append(len(self.phit_elems))
        self.check_f_normal()

    def f_cap_phit_order(self) -> int:
        return len(self.f_elems & self.phit_elems)

    def kernel_cap_t_order(self) -> int:
        g = self.group
        count = 0
        for fx in self.t_elems:
            if not self.endo.apply(dict(fx)):
                count += 1
        return count

    def snapshot(self) -> LFSubgroup:
        hi = 0
        for fx in self.t_elems:
            for i, _ in fx:
                hi = max(hi, i + 1)
        return LFSubgroup(self.group, hi, elements=frozenset(self.t_elems))


def _make_engine(endo: BandedEndo, f_gens):
    gens = [endo.group.reduce_elem(dict(x)) for x in f_gens]
    gens = [x for x in gens if x]
    if endo.group.is_abelian:
        return _AbelianTrajectory(endo, gens), gens
    eng = _CayleyTrajectory(endo, gens)
    eng.check_f_normal()
    return eng, gens


def trajectory(endo: BandedEndo, f_gens, n: int) -> LFSubgroup:
    """T_n = F phi(F) ... phi^{n-1}(F) inside its inferred window."""
    if n < 1:
        raise ValidationError("trajectory index must be >= 1")
    engine, _ = _make_engine(endo, f_gens)
    for _ in range(n - 1):
        engine.step()
    return engine.snapshot()


def trajectory_limits(
    endo: BandedEndo, f_gens, policy: StabilizationPolicy = DEFAULT_POLICY
) -> TrajectoryReport:
    """Run the trajectory chain until the index stalls and certify the stall.

    Certification requires the stabilized index alpha together with the
    independent cross-identity [T_{n+1} : phi(T_n)] = alpha * |ker phi n T_n|
    at the stall point; without both it reports inconclusive.
    """
    engine, gens = _make_engine(endo, f_gens)
    w = policy.stall_window
    if not gens:
        return TrajectoryReport(
            n_max=1, orders=(1,), alphas=(), n0=1, alpha=1,
            t_mod_phi_t=1, ker_cap_t=1, certified=True, status="certified", f_order=1,
        )
    if isinstance(engine, _AbelianTrajectory):
        f_order = engine.f_sub.order
    else:
        f_order = len(engine.f_elems)

    alphas: list[int] = []
    phi_caps: list[int] = []
    kmon: list[int] = []

    def report(n, n0, alpha, t_mod, ker, certified):
        return TrajectoryReport(
            n_max=n,
            orders=tuple(engine.orders),
            alphas=tuple(alphas),
            n0=n0,
            alpha=alpha,
            t_mod_phi_t=t_mod,
            ker_cap_t=ker,
            certified=certified,
            status="certified" if certified else "inconclusive",
            f_order=f_order,
        )

    for n in range(1, policy.max_n + 1):
        engine.step()
        t_next, t_cur = engine.orders[n], engine.orders[n - 1]
        if t_next % t_cur:
            raise AssertionError("trajectory orders must divide")
        alphas.append(t_next // t_cur)
        if endo.group.is_abelian and n >= 2 and alphas[-2] % alphas[-1]:
            raise AssertionError("index divisibility violated in abelian trajectory")
        phi_caps.append(engine.f_cap_phit_order())
        kmon.append(t_cur // engine.phit_orders[n - 1])

        exact = t_next == t_cur
        stalled = (
            n >= w
            and len(set(alphas[-w:])) == 1
            and len(set(phi_caps[-w:])) == 1
            and len(set(kmon[-w:])) == 1
        )
        if exact or stalled:
            alpha = alphas[-1]
            ker = engine.kernel_cap_t_order()
            cross = engine.orders[n] // engine.phit_orders[n - 1]
            if ker == kmon[-1] and cross == alpha * ker:
                t_mod = f_order // phi_caps[-1]
                n0 = n - (0 if exact else w - 1)
                return report(n, n0, alpha, t_mod, ker, True)
            if exact:
                raise AssertionError("exact trajectory stall failed its cross-identity")
    return report(policy.max_n, None, None, None, None, False)


def algebraic_entropy(
    endo: BandedEndo,
    f_gens,
    method: str = "limitfree",
    policy: StabilizationPolicy = DEFAULT_POLICY,
) -> EntropyValue:
    """Entropy of the endomorphism with respect to the subgroup F.

    method "limit" returns log alpha from the stabilized index chain;
    "limitfree" returns log |T/phi(T)| - log |ker phi n T|.  Certified runs
    of the two agree; an uncertified run raises Inconclusive.
    """
    rep = trajectory_limits(endo, f_gens, policy)
    if not rep.certified:
        raise Inconclusive("trajectory did not stall within budget", rep)
    if method == "limit":
        return EntropyValue.of_log(rep.alpha)
    if method == "limitfree":
        return EntropyValue.of_log(Fraction(rep.t_mod_phi_t, rep.ker_cap_t))
    raise ValueError(f"unknown method {method!r}")


def yuzvinski_gap(
    endo: BandedEndo, f_gens, policy: StabilizationPolicy = DEFAULT_POLICY
) -> EntropyValue:
    """log |T/phi(T)| alone, the uncorrected one-term formula.

    For injective endomorphisms this equals the entropy; for
    non-injective ones it exhibits the gap.
    """
    rep = trajectory_limits(endo, f_gens, policy)
    if not rep.certified:
        raise Inconclusive("trajectory did not stall within budget", rep)
    return EntropyValue.of_log(rep.t_mod_phi_t)


def h_alg(
    endo: BandedEndo,
    family,
    method: str = "limitfree",
    policy: StabilizationPolicy = DEFAULT_POLICY,
) -> EntropyValue:
    """Max of the entropy over an explicit family of finite subgroups.

    This is a lower bound for the supremum over all finite subgroups; it
    is the supremum restricted to the given family.
    """
    best = EntropyValue.zero()
    for f_gens in family:
        val = algebraic_entropy(endo, f_gens, method, policy)
        if best < val:
            best = val
    return best
