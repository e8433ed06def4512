"""Profinite abelian groups as full products of finite blocks, open cylinder
subgroups, cotrajectories, and topological entropy.

A group is a full product of finite abelian blocks over N or Z with the
product topology; open subgroups are cylinders, i.e. conditions on a
finite window of coordinates.  Continuous endomorphisms are row-finite:
each output coordinate depends on a band of input coordinates, given on
one period and shifted.  Preimages of cylinders are cylinders, so the
whole cotrajectory calculus happens in finite windows, exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import (
    AmbientMismatchError,
    DimensionError,
    HypothesisFailure,
    Inconclusive,
    ValidationError,
)
from .finabel import (
    AbSubgroup,
    FiniteAbelianGroup,
    Hom,
    canonical_subgroup,
    hom_validate,
)
from .values import DEFAULT_POLICY, CheckRecord, EntropyValue, StabilizationPolicy


@dataclass(frozen=True)
class ProGroup:
    """Full product of finite abelian blocks over N or Z."""

    prefix: tuple
    period: tuple
    index_set: str = "N"

    def __post_init__(self):
        if self.index_set not in ("N", "Z"):
            raise ValidationError("index_set must be 'N' or 'Z'")
        if not self.period:
            raise ValidationError("period must contain at least one block")
        if self.index_set == "Z" and self.prefix:
            raise ValidationError("Z-indexed groups are purely periodic")
        if not all(isinstance(b, FiniteAbelianGroup) for b in self.prefix + self.period):
            raise ValidationError("profinite blocks must be finite abelian groups")
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "period", tuple(self.period))

    def block(self, i: int) -> FiniteAbelianGroup:
        if self.index_set == "N":
            if i < 0:
                raise DimensionError(f"negative index {i} in an N-indexed group")
            if i < len(self.prefix):
                return self.prefix[i]
            return self.period[(i - len(self.prefix)) % len(self.period)]
        return self.period[i % len(self.period)]

    def valid_index(self, i: int) -> bool:
        return self.index_set == "Z" or i >= 0

    def is_infinite(self) -> bool:
        return any(b.order > 1 for b in self.period)

    def all_trivial_outside(self, lo: int, hi: int) -> bool:
        """True when every block outside [lo, hi) has order 1."""
        if any(b.order > 1 for b in self.period):
            return False
        if self.index_set == "N":
            return all(
                self.prefix[i].order == 1
                for i in range(len(self.prefix))
                if not (lo <= i < hi)
            )
        return True

    def window_layout(self, lo: int, hi: int):
        """(window group, coordinate starts) of the blocks lo..hi-1."""
        starts = [0]
        moduli: list[int] = []
        for i in range(lo, hi):
            moduli.extend(self.block(i).moduli)
            starts.append(len(moduli))
        return FiniteAbelianGroup(tuple(moduli)), starts

    def whole(self) -> "CylinderSubgroup":
        g, _ = self.window_layout(0, 0)
        return CylinderSubgroup(self, 0, 0, g.whole_subgroup())


class CylinderSubgroup:
    """Open subgroup {x : x restricted to [lo, hi) lies in core}.

    Stored in canonical form: boundary blocks on which the core is the
    full block are shrunk away, so equality is structural.
    """

    __slots__ = ("parent", "lo", "hi", "core")

    def __init__(self, parent: ProGroup, lo: int, hi: int, core: AbSubgroup):
        wg, starts = parent.window_layout(lo, hi)
        if core.ambient != wg:
            raise AmbientMismatchError("core does not live in the window group")
        # shrink free boundary blocks
        while lo < hi:
            blk = parent.block(hi - 1)
            s = starts[-2]
            if all(core.contains(_unit(wg.rank, s + j)) for j in range(blk.rank)):
                core = _project_out(core, s, parent, lo, hi - 1)
                hi -= 1
                wg, starts = parent.window_layout(lo, hi)
            else:
                break
        while lo < hi:
            blk = parent.block(lo)
            if all(core.contains(_unit(wg.rank, j)) for j in range(blk.rank)):
                core = _project_out_front(core, blk.rank, parent, lo + 1, hi)
                lo += 1
                wg, starts = parent.window_layout(lo, hi)
            else:
                break
        if lo == hi:
            lo = hi = 0
            wg, _ = parent.window_layout(0, 0)
            core = wg.whole_subgroup()
        self.parent = parent
        self.lo = lo
        self.hi = hi
        self.core = core

    @property
    def index(self) -> int:
        """[K : U], exactly."""
        return self.core.index

    def is_whole(self) -> bool:
        return self.lo == self.hi

    def is_trivial_subgroup(self) -> bool:
        """True when the cylinder is the one-element subgroup (finite K only)."""
        return self.core.order == 1 and self.parent.all_trivial_outside(self.lo, self.hi)

    def extended_core(self, lo: int, hi: int) -> AbSubgroup:
        """The same subgroup presented on the larger window [lo, hi)."""
        if self.is_whole():
            wg, _ = self.parent.window_layout(lo, hi)
            return wg.whole_subgroup()
        if lo > self.lo or hi < self.hi:
            raise ValidationError("extension window must contain the current window")
        wg, starts = self.parent.window_layout(lo, hi)
        off = starts[self.lo - lo]
        gens = []
        for row in self.core.generators():
            v = [0] * wg.rank
            v[off : off + len(row)] = row
            gens.append(v)
        for i in range(lo, hi):
            if self.lo <= i < self.hi:
                continue
            s = starts[i - lo]
            for j in range(self.parent.block(i).rank):
                gens.append(_unit(wg.rank, s + j))
        return canonical_subgroup(wg, gens)

    def hull_with(self, other: "CylinderSubgroup") -> tuple[int, int]:
        if self.parent != other.parent:
            raise AmbientMismatchError("cylinders over different groups")
        if self.is_whole():
            return (other.lo, other.hi)
        if other.is_whole():
            return (self.lo, self.hi)
        return (min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other: "CylinderSubgroup") -> "CylinderSubgroup":
        lo, hi = self.hull_with(other)
        a = self.extended_core(lo, hi)
        b = other.extended_core(lo, hi)
        return CylinderSubgroup(self.parent, lo, hi, a.intersect_with(b))

    def sum_with(self, other: "CylinderSubgroup") -> "CylinderSubgroup":
        lo, hi = self.hull_with(other)
        a = self.extended_core(lo, hi)
        b = other.extended_core(lo, hi)
        return CylinderSubgroup(self.parent, lo, hi, a.sum_with(b))

    def contains_cylinder(self, other: "CylinderSubgroup") -> bool:
        lo, hi = self.hull_with(other)
        return self.extended_core(lo, hi).contains_subgroup(other.extended_core(lo, hi))

    def contains_elem(self, elem: dict) -> bool:
        wg, starts = self.parent.window_layout(self.lo, self.hi)
        v = [0] * wg.rank
        for i, vec in elem.items():
            if self.lo <= i < self.hi:
                s = starts[i - self.lo]
                for j, c in enumerate(vec):
                    v[s + j] = c
        return self.core.contains(wg.reduce(v))

    def pinned_blocks(self) -> set[int]:
        """Blocks i in the window forced to 0 for every element."""
        wg, starts = self.parent.window_layout(self.lo, self.hi)
        out = set()
        for i in range(self.lo, self.hi):
            s, e = starts[i - self.lo], starts[i - self.lo + 1]
            if all(all(row[t] % wg.moduli[t] == 0 for t in range(s, e)) for row in self.core.basis):
                out.add(i)
        return out

    def __eq__(self, other):
        return (
            isinstance(other, CylinderSubgroup)
            and self.parent == other.parent
            and self.lo == other.lo
            and self.hi == other.hi
            and self.core == other.core
        )

    def __hash__(self):
        return hash((self.parent, self.lo, self.hi, self.core))

    def __repr__(self):
        return f"Cylinder([{self.lo},{self.hi}) index={self.index})"


def _unit(width: int, i: int) -> list[int]:
    v = [0] * width
    v[i] = 1
    return v


def _project_out(core: AbSubgroup, cut: int, parent, lo, hi) -> AbSubgroup:
    wg, _ = parent.window_layout(lo, hi)
    gens = [list(row[:cut]) for row in core.generators()]
    return canonical_subgroup(wg, gens)


def _project_out_front(core: AbSubgroup, cut: int, parent, lo, hi) -> AbSubgroup:
    wg, _ = parent.window_layout(lo, hi)
    gens = [list(row[cut:]) for row in core.generators()]
    return canonical_subgroup(wg, gens)


def pro_group(prefix, period, index_set: str = "N") -> ProGroup:
    return ProGroup(tuple(prefix), tuple(period), index_set)


def cylinder(parent: ProGroup, window, core_gens) -> CylinderSubgroup:
    """Open subgroup from a window (range or index list) and core generators."""
    if isinstance(window, tuple) and len(window) == 2:
        lo, hi = window
        idx = list(range(lo, hi))
    else:
        idx = sorted(set(int(i) for i in window))
    if not idx:
        return parent.whole()
    lo, hi = idx[0], idx[-1] + 1
    for i in idx:
        if not parent.valid_index(i):
            raise DimensionError(f"index {i} invalid for this group")
    wg, starts = parent.window_layout(lo, hi)
    gens = [list(wg.reduce(g)) for g in core_gens]
    # blocks inside the hull but not named in the window are unconstrained
    for i in range(lo, hi):
        if i not in idx:
            s = starts[i - lo]
            for j in range(parent.block(i).rank):
                gens.append(_unit(wg.rank, s + j))
    return CylinderSubgroup(parent, lo, hi, canonical_subgroup(wg, gens))


class RowFiniteEndo:
    """Continuous endomorphism with banded coordinate dependence.

    rows[r] lists (offset, matrix) terms: output coordinate i (with
    i = r mod period) receives matrix * x_{i+offset}.  The matrix maps
    block(i+offset) into block(i).  Terms referring to indices outside an
    N-indexed group are dropped.
    """

    __slots__ = ("parent", "offset", "width", "period", "rows", "prefix_rows", "_horizon")

    def __init__(
        self, parent: ProGroup, offset: int, width: int, period: int, rows,
        prefix_rows=(),
    ):
        if width < 1 or period < 1:
            raise ValidationError("band width and period must be positive")
        if prefix_rows and parent.index_set != "N":
            raise ValidationError("prefix rows only make sense over N")

        def norm(res):
            return tuple(
                (int(o), tuple(tuple(int(x) for x in r) for r in mat)) for o, mat in res
            )

        self.parent = parent
        self.offset = int(offset)
        self.width = int(width)
        self.period = int(period)
        self.rows = tuple(norm(res) for res in rows)
        self.prefix_rows = tuple(norm(res) for res in prefix_rows)
        if len(self.rows) != period:
            raise ValidationError("rows must cover one full period")
        from math import lcm as _lcm

        span = _lcm(period, len(parent.period)) + len(parent.prefix) + len(self.prefix_rows)
        self._horizon = span + abs(self.offset) + self.width + 1
        self._validate()

    def row_terms(self, i: int):
        if 0 <= i < len(self.prefix_rows):
            return self.prefix_rows[i]
        return self.rows[i % self.period]

    def _validate(self) -> None:
        g = self.parent
        lo_o, hi_o = self.offset, self.offset + self.width
        rng = (
            range(0, self._horizon + 1)
            if g.index_set == "N"
            else range(-self._horizon, self._horizon + 1)
        )
        for i in rng:
            tgt = g.block(i)
            seen = set()
            for o, mat in self.row_terms(i):
                if not (lo_o <= o < hi_o):
                    raise ValidationError(f"offset {o} outside band [{lo_o},{hi_o})")
                if o in seen:
                    raise ValidationError(f"duplicate offset {o} in row {i}")
                seen.add(o)
                j = i + o
                if not g.valid_index(j):
                    continue
                src = g.block(j)
                if len(mat) != tgt.rank or any(len(r) != src.rank for r in mat):
                    raise ValidationError(
                        f"row {i}, offset {o}: matrix shape does not match blocks"
                    )
                for u in range(tgt.rank):
                    for v in range(src.rank):
                        if (src.moduli[v] * mat[u][v]) % tgt.moduli[u]:
                            raise ValidationError(
                                f"row {i}, offset {o}: entry ({u},{v}) is not a "
                                f"homomorphism of blocks"
                            )

    def apply(self, elem: dict) -> dict:
        """Image of a finite-support element."""
        g = self.parent
        out: dict = {}
        targets = set()
        for i in elem:
            for o in range(self.offset, self.offset + self.width):
                j = i - o
                if g.valid_index(j):
                    targets.add(j)
        for j in targets:
            tgt = g.block(j)
            acc = [0] * tgt.rank
            hit = False
            for o, mat in self.row_terms(j):
                src_i = j + o
                if src_i in elem:
                    vec = elem[src_i]
                    for u in range(tgt.rank):
                        acc[u] += sum(m * x for m, x in zip(mat[u], vec))
                    hit = True
            if hit:
                red = tgt.reduce(acc)
                if any(red):
                    out[j] = red
        return out

    def window_map(self, lo: int, hi: int) -> tuple[int, int, Hom]:
        """Induced map window(src) -> window([lo,hi)) capturing all dependencies."""
        g = self.parent
        deps = set()
        for i in range(lo, hi):
            for o, _ in self.row_terms(i):
                j = i + o
                if g.valid_index(j):
                    deps.add(j)
        if not deps:
            src_lo = src_hi = 0
        else:
            src_lo, src_hi = min(deps), max(deps) + 1
        tgt_g, tgt_starts = g.window_layout(lo, hi)
        src_g, src_starts = g.window_layout(src_lo, src_hi)
        mat = [[0] * src_g.rank for _ in range(tgt_g.rank)]
        for i in range(lo, hi):
            ts = tgt_starts[i - lo]
            for o, m in self.row_terms(i):
                j = i + o
                if not g.valid_index(j):
                    continue
                ss = src_starts[j - src_lo]
                for u in range(len(m)):
                    row = mat[ts + u]
                    for v in range(len(m[u])):
                        row[ss + v] += m[u][v]
        return src_lo, src_hi, hom_validate(mat, src_g, tgt_g)

    def preimage_cylinder(self, u: CylinderSubgroup) -> CylinderSubgroup:
        if u.parent != self.parent:
            raise AmbientMismatchError("cylinder over a different group")
        if u.is_whole():
            return self.parent.whole()
        src_lo, src_hi, h = self.window_map(u.lo, u.hi)
        core = h.preimage(u.core)
        return CylinderSubgroup(self.parent, src_lo, src_hi, core)

    def compose(self, inner: "RowFiniteEndo") -> "RowFiniteEndo":
        """self after inner, as a banded spec; Z-indexed groups only."""
        if self.parent != inner.parent:
            raise AmbientMismatchError("composition across groups")
        if self.parent.index_set != "Z":
            raise ValidationError("spec composition requires a Z-indexed group")
        from math import lcm as _lcm

        p = _lcm(self.period, inner.period)
        new_rows = []
        for r in range(p):
            acc: dict[int, list[list[int]]] = {}
            tgt = self.parent.block(r)
            for o1, m1 in self.row_terms(r):
                mid = r + o1
                for o2, m2 in inner.row_terms(mid):
                    o = o1 + o2
                    src = self.parent.block(mid + o2)
                    prod_mat = [
                        [
                            sum(m1[u][t] * m2[t][v] for t in range(len(m2)))
                            for v in range(src.rank)
                        ]
                        for u in range(tgt.rank)
                    ]
                    if o in acc:
                        for u in range(tgt.rank):
                            for v in range(src.rank):
                                acc[o][u][v] += prod_mat[u][v]
                    else:
                        acc[o] = prod_mat
            terms = []
            for o in sorted(acc):
                mat = [
                    [x % tgt.moduli[u] for x in row] for u, row in enumerate(acc[o])
                ]
                if any(any(row) for row in mat):
                    terms.append((o, mat))
            if not terms:
                terms = [(self.offset + inner.offset, [[0] * self.parent.block(r + self.offset + inner.offset).rank for _ in range(tgt.rank)])]
            new_rows.append(terms)
        offset = self.offset + inner.offset
        width = self.width + inner.width - 1
        return RowFiniteEndo(self.parent, offset, width, p, new_rows)

    def equals_spec(self, other: "RowFiniteEndo") -> bool:
        """Same map, compared as reduced banded specs on one lcm period."""
        from math import lcm as _lcm

        if self.parent != other.parent:
            return False
        p = _lcm(self.period, other.period)
        for r in range(p):
            a = {o: m for o, m in self.row_terms(r) if any(any(row) for row in m)}
            b = {o: m for o, m in other.row_terms(r) if any(any(row) for row in m)}
            tgt = self.parent.block(r)
            norm = lambda m: tuple(
                tuple(x % tgt.moduli[u] for x in row) for u, row in enumerate(m)
            )
            if {o: norm(m) for o, m in a.items()} != {o: norm(m) for o, m in b.items()}:
                return False
        return True


class PowerEndo:
    """psi^k via iteration; supports the same window calculus as the base map."""

    def __init__(self, base, k: int):
        if k < 1:
            raise ValidationError("power must be >= 1")
        self.base = base
        self.k = k
        self.parent = base.parent

    def apply(self, elem: dict) -> dict:
        for _ in range(self.k):
            elem = self.base.apply(elem)
        return elem

    def preimage_cylinder(self, u: CylinderSubgroup) -> CylinderSubgroup:
        for _ in range(self.k):
            u = self.base.preimage_cylinder(u)
        return u

    def window_map(self, lo: int, hi: int) -> tuple[int, int, Hom]:
        cur_lo, cur_hi, h = self.base.window_map(lo, hi)
        for _ in range(self.k - 1):
            cur_lo, cur_hi, h2 = self.base.window_map(cur_lo, cur_hi)
            h = h.compose(h2)
        return cur_lo, cur_hi, h


def rowfinite_endo(
    parent: ProGroup, offset: int, width: int, period: int, rows, prefix_rows=()
) -> RowFiniteEndo:
    return RowFiniteEndo(parent, offset, width, period, rows, prefix_rows)


def identity_endo(parent: ProGroup) -> RowFiniteEndo:
    def eye(blk):
        return [(0, [[1 if i == j else 0 for j in range(blk.rank)] for i in range(blk.rank)])]

    p = len(parent.period)
    shift = len(parent.prefix)
    rows = [eye(parent.period[(r - shift) % p]) for r in range(p)]
    prefix_rows = [eye(b) for b in parent.prefix]
    return RowFiniteEndo(parent, 0, 1, p, rows, prefix_rows)


def cotrajectory(endo, u: CylinderSubgroup, n: int) -> CylinderSubgroup:
    """C_n = U n psi^{-1}(U) n ... n psi^{-(n-1)}(U)."""
    if n < 1:
        raise ValidationError("cotrajectory index must be >= 1")
    c = u
    for _ in range(n - 1):
        c = u.intersect(endo.preimage_cylinder(c))
    return c


@dataclass(frozen=True)
class CotrajectoryReport:
    """Stall analysis of the cotrajectory index chain c_n = [K : C_n]."""

    n_max: int
    c: tuple[int, ...]
    alphas: tuple[int, ...]
    n0: int | None
    alpha: int | None
    n1: int | None
    psi_inv_c_mod_c: int | None
    k_mod_l: int | None
    certified: bool
    status: str


def _image_l_index(endo, c: CylinderSubgroup) -> int:
    """[K : Im(psi) * C] computed on the window of the cylinder C."""
    if c.is_whole():
        return 1
    _, _, h = endo.window_map(c.lo, c.hi)
    im = h.image()
    return im.sum_with(c.core).index


def cotrajectory_limits(
    endo, u: CylinderSubgroup, policy: StabilizationPolicy = DEFAULT_POLICY
) -> CotrajectoryReport:
    """Run the cotrajectory chain until every companion chain stalls.

    Certification requires the identity
    |psi^{-1}(C)/C| = alpha * [K : Im(psi) * C] to hold at the stall.
    """
    w = policy.stall_window
    c_cyl = u
    cs = [c_cyl.index]
    alphas: list[int] = []
    ds: list[int] = []
    ls: list[int] = []

    def report(n, n0, alpha, n1, psi_inv, kml, certified, status):
        return CotrajectoryReport(
            n_max=n,
            c=tuple(cs),
            alphas=tuple(alphas),
            n0=n0,
            alpha=alpha,
            n1=n1,
            psi_inv_c_mod_c=psi_inv,
            k_mod_l=kml,
            certified=certified,
            status=status,
        )

    for n in range(1, policy.max_n + 1):
        p_cyl = endo.preimage_cylinder(c_cyl)
        c_next = u.intersect(p_cyl)
        cs.append(c_next.index)
        if cs[n] % cs[n - 1]:
            raise AssertionError("c_n must divide c_{n+1}")
        alphas.append(cs[n] // cs[n - 1])
        if n >= 2 and alphas[-2] % alphas[-1]:
            raise AssertionError("alpha divisibility violated")
        ds.append(p_cyl.sum_with(u).index)
        ls.append(_image_l_index(endo, c_cyl))

        if c_next == c_cyl:
            # exact fixed point: C = C_n, psi^{-1}(C) = P exactly
            psi_inv = c_cyl.index // p_cyl.index
            kml = ls[-1]
            certified = psi_inv == 1 * kml
            return report(
                n, n, 1, n, psi_inv, kml, certified,
                "certified" if certified else "inconclusive",
            )
        if (
            n >= w
            and len(set(alphas[-w:])) == 1
            and len(set(ds[-w:])) == 1
            and len(set(ls[-w:])) == 1
        ):
            alpha = alphas[-1]
            psi_inv = u.index // ds[-1]
            kml = ls[-1]
            if psi_inv == alpha * kml:
                n0 = n - w + 1
                n1 = n - w + 1
                for back in range(len(ds) - 1, -1, -1):
                    if ds[back] != ds[-1]:
                        n1 = back + 2
                        break
                else:
                    n1 = 1
                for back in range(len(alphas) - 1, -1, -1):
                    if alphas[back] != alphas[-1]:
                        n0 = back + 2
                        break
                else:
                    n0 = 1
                return report(n, n0, alpha, n1, psi_inv, kml, True, "certified")
        c_cyl = c_next

    half = max(2, policy.max_n // 2)
    if len(ls) >= half and all(ls[i] < ls[i + 1] for i in range(len(ls) - half, len(ls) - 1)):
        return report(policy.max_n, None, None, None, None, None, False, "hypothesis_failure")
    return report(policy.max_n, None, None, None, None, None, False, "inconclusive")


def surjective_on_windows(endo, policy: StabilizationPolicy = DEFAULT_POLICY) -> bool:
    """Check window surjectivity up to the budget.

    A failed window disproves surjectivity; full windows up to the budget
    establish it on every tested finite quotient.
    """
    g = endo.parent
    for radius in range(1, policy.window_budget + 1):
        lo, hi = (0, radius) if g.index_set == "N" else (-radius, radius)
        _, _, h = endo.window_map(lo, hi)
        if h.image().index != 1:
            return False
    return True


def topological_entropy(
    endo,
    u: CylinderSubgroup,
    method: str = "limitfree",
    policy: StabilizationPolicy = DEFAULT_POLICY,
) -> EntropyValue:
    """Entropy of the endomorphism with respect to the open subgroup U.

    method "limit" is log alpha from the index chain, "limitfree" is
    log |psi^{-1}(C)/C| - log [K : Im(psi) C], and "surjective" is the
    one-term form log [psi^{-1}(U_-) : U_-], valid for surjective maps.
    """
    rep = cotrajectory_limits(endo, u, policy)
    if rep.status == "hypothesis_failure":
        raise HypothesisFailure("[K : Im(psi) C_n] keeps growing; quotient not finite")
    if not rep.certified:
        raise Inconclusive("cotrajectory did not stall within budget", rep)
    if method == "limit":
        return EntropyValue.of_log(rep.alpha)
    if method == "limitfree":
        return EntropyValue.of_log(Fraction(rep.psi_inv_c_mod_c, rep.k_mod_l))
    if method == "surjective":
        if not surjective_on_windows(endo, policy):
            raise ValidationError("surjective method requires a surjective endomorphism")
        if rep.k_mod_l != 1:
            raise AssertionError("surjective map with nontrivial [K:L]")
        return EntropyValue.of_log(rep.psi_inv_c_mod_c)
    raise ValueError(f"unknown method {method!r}")


def h_top(
    endo,
    base,
    method: str = "limitfree",
    policy: StabilizationPolicy = DEFAULT_POLICY,
) -> EntropyValue:
    """Max of the entropy over an explicit base of open subgroups.

    For a base that is a neighborhood base at the identity this is the
    entropy of the map; in general it is a lower bound.
    """
    best = EntropyValue.zero()
    for u in base:
        val = topological_entropy(endo, u, method, policy)
        if best < val:
            best = val
    return best


def cotrajectory_exact(endo, u: CylinderSubgroup, policy: StabilizationPolicy = DEFAULT_POLICY):
    """Determine C(psi, U) exactly when possible.

    Returns ("stalled", cylinder) when the chain reaches a fixed point,
    ("trivial", n) when the chain pins every coordinate of monotonically
    growing windows (so the intersection is the one-element subgroup), and
    raises Inconclusive otherwise.
    """
    g = endo.parent
    c_cyl = u
    windows = []
    for n in range(1, policy.max_n + 1):
        c_next = u.intersect(endo.preimage_cylinder(c_cyl))
        if c_next == c_cyl:
            return ("stalled", c_cyl)
        c_cyl = c_next
        windows.append((c_cyl.lo, c_cyl.hi, c_cyl.core.order == 1))
        w = policy.stall_window
        if len(windows) >= w:
            recent = windows[-w:]
            fully_pinned = all(r[2] for r in recent)
            growing_hi = all(recent[i][1] < recent[i + 1][1] for i in range(w - 1))
            growing_lo = all(recent[i][0] > recent[i + 1][0] for i in range(w - 1))
            if fully_pinned:
                if g.index_set == "N" and growing_hi and c_cyl.lo == 0:
                    return ("trivial", n)
                if g.index_set == "Z" and growing_hi and growing_lo:
                    return ("trivial", n)
    raise Inconclusive("cotrajectory neither stalls nor pins coordinates", None)


def kernel_order(endo, policy: StabilizationPolicy = DEFAULT_POLICY) -> int:
    """|ker psi| certified through stable images of window kernels.

    The kernel is the inverse limit of the partial-solution groups P_V
    over growing windows V; once the stable images have constant order
    across several windows the transition maps are bijective and that
    order is |ker psi|.
    """
    g = endo.parent
    w = policy.stall_window

    def window_of(n: int) -> tuple[int, int]:
        return (0, n) if g.index_set == "N" else (-n, n)

    def partial_kernel(lo: int, hi: int) -> AbSubgroup:
        """Solutions on window [lo,hi) of all rows fully visible there."""
        rows_idx = []
        scan_lo = lo - abs(endo.offset) - endo.width
        scan_hi = hi + abs(endo.offset) + endo.width
        for i in range(scan_lo, scan_hi):
            if not g.valid_index(i):
                continue
            deps = [i + o for o, _ in endo.row_terms(i) if g.valid_index(i + o)]
            if deps and all(lo <= d < hi for d in deps):
                rows_idx.append(i)
        wg, starts = g.window_layout(lo, hi)
        if not rows_idx:
            return wg.whole_subgroup()
        tgt_mods: list[int] = []
        for i in rows_idx:
            tgt_mods.extend(g.block(i).moduli)
        tgt = FiniteAbelianGroup(tuple(tgt_mods))
        mat = [[0] * wg.rank for _ in range(tgt.rank)]
        row_at = 0
        for i in rows_idx:
            blk = g.block(i)
            for o, m in endo.row_terms(i):
                j = i + o
                if not g.valid_index(j):
                    continue
                ss = starts[j - lo]
                for uu in range(blk.rank):
                    for vv in range(len(m[uu])):
                        mat[row_at + uu][ss + vv] += m[uu][vv]
            row_at += blk.rank
        h = hom_validate(mat, wg, tgt)
        return h.kernel()

    def restrict(sub: AbSubgroup, big: tuple[int, int], small: tuple[int, int]) -> AbSubgroup:
        (blo, bhi), (slo, shi) = big, small
        wg_b, starts_b = g.window_layout(blo, bhi)
        wg_s, _ = g.window_layout(slo, shi)
        off = starts_b[slo - blo]
        rows = [list(r[off : off + wg_s.rank]) for r in sub.generators()]
        return canonical_subgroup(wg_s, rows)

    stable_orders: list[int] = []
    for n in range(1, policy.window_budget + 1):
        small = window_of(n)
        prev: AbSubgroup | None = None
        agree = 0
        stable: AbSubgroup | None = None
        for m in range(n, policy.window_budget + 1):
            big = window_of(m)
            r = restrict(partial_kernel(*big), big, small)
            if prev is not None and r == prev:
                agree += 1
                if agree >= w - 1:
                    stable = r
                    break
            else:
                agree = 0
            prev = r
        if stable is None:
            raise Inconclusive("kernel window images did not stabilize", None)
        stable_orders.append(stable.order)
        if len(stable_orders) >= w and len(set(stable_orders[-w:])) == 1:
            return stable_orders[-1]
    raise Inconclusive("kernel order did not stabilize within budget", None)


def cokernel_order(endo, policy: StabilizationPolicy = DEFAULT_POLICY) -> int:
    """|K / Im psi| certified through stalled window cokernels."""
    g = endo.parent
    w = policy.stall_window
    qs: list[int] = []
    for n in range(1, policy.window_budget + 1):
        lo, hi = (0, n) if g.index_set == "N" else (-n, n)
        _, _, h = endo.window_map(lo, hi)
        qs.append(h.image().index)
        if len(qs) >= w and len(set(qs[-w:])) == 1:
            return qs[-1]
        if len(qs) >= 2 and qs[-1] < qs[-2]:
            raise AssertionError("window cokernels must be monotone")
    raise Inconclusive("cokernel order did not stabilize within budget", None)


def finite_cotrajectory(f: Hom, u: AbSubgroup):
    """(C, alpha) for an endomorphism of a finite abelian group; exact."""
    if f.source != f.target or u.ambient != f.source:
        raise AmbientMismatchError("finite cotrajectory needs an endomorphism and its subgroup")
    c = u
    while True:
        c_next = u.intersect_with(f.preimage(c))
        if c_next == c:
            return c
        c = c_next


@dataclass(frozen=True)
class QuotientSystem:
    """K/U_- with the induced endomorphism, plus its verification records."""

    mode: str  # "whole" when U_- is trivial, "finite" when it is an open cylinder
    u_minus: object
    quotient: object
    endo_q: object
    u_image: object
    checks: tuple[CheckRecord, ...]


def _quotient_data(parent: ProGroup, cyl: CylinderSubgroup):
    """Present K / cylinder as a finite abelian group with both maps."""
    from .lattice import smith_normal_form

    wg, starts = parent.window_layout(cyl.lo, cyl.hi)
    basis = [list(r) for r in cyl.core.basis]
    s, uu, vv, uinv, vinv = smith_normal_form(basis, with_inverses=True)
    diag = [s[i][i] for i in range(len(s))]
    keep = [i for i, d in enumerate(diag) if d != 1]
    q_group = FiniteAbelianGroup(tuple(diag[i] for i in keep))

    def project(vec) -> tuple[int, ...]:
        out = []
        for pos, i in enumerate(keep):
            out.append(sum(vec[t] * vv[t][i] for t in range(len(vec))) % diag[i])
        return tuple(out)

    def lift(qvec) -> list[int]:
        full = [0] * wg.rank
        for pos, i in enumerate(keep):
            full[i] = qvec[pos]
        return [sum(full[t] * vinv[t][j] for t in range(wg.rank)) for j in range(wg.rank)]

    return wg, starts, q_group, project, lift


def quotient_system(
    endo, u: CylinderSubgroup, policy: StabilizationPolicy = DEFAULT_POLICY
) -> QuotientSystem:
    """The induced system on K/U_- together with its one-term entropy check."""
    g = endo.parent
    kind = cotrajectory_exact(endo, u, policy)
    checks: list[CheckRecord] = []
    if kind[0] == "trivial":
        ker = kernel_order(endo, policy)
        try:
            cok = cokernel_order(endo, policy)
        except Inconclusive:
            checks.append(
                CheckRecord("coker_finite", False, note="cokernel not certified finite")
            )
            return QuotientSystem("whole", None, g, endo, u, tuple(checks))
        h = topological_entropy(endo, u, "limitfree", policy)
        expect = EntropyValue.of_log(Fraction(ker, cok))
        checks.append(CheckRecord("ker_order", True, lhs=ker))
        checks.append(CheckRecord("coker_order", True, lhs=cok))
        checks.append(
            CheckRecord("entropy_eq_log_ker_minus_log_coker", h == expect, lhs=h, rhs=expect)
        )
        return QuotientSystem("whole", None, g, endo, u, tuple(checks))

    u_minus = kind[1]
    wg, starts, q_group, project, lift = _quotient_data(g, u_minus)
    # induced endomorphism on the finite quotient
    cols = []
    for j in range(q_group.rank):
        e = [0] * q_group.rank
        e[j] = 1
        full = lift(e)
        sparse = {}
        for i in range(u_minus.lo, u_minus.hi):
            s, epos = starts[i - u_minus.lo], starts[i - u_minus.lo + 1]
            piece = tuple(full[s:epos])
            if any(x % g.block(i).moduli[t] for t, x in enumerate(piece)):
                sparse[i] = g.block(i).reduce(piece)
        img = endo.apply(sparse)
        dense = [0] * wg.rank
        for i, vec in img.items():
            if u_minus.lo <= i < u_minus.hi:
                s = starts[i - u_minus.lo]
                for t, x in enumerate(vec):
                    dense[s + t] = x
        cols.append(project(dense))
    mat = [[cols[j][i] for j in range(q_group.rank)] for i in range(q_group.rank)]
    endo_q = hom_validate(mat, q_group, q_group)

    # image of U in the quotient
    lo, hi = u.hull_with(u_minus)
    hull_wg, hull_starts = g.window_layout(lo, hi)
    u_ext = u.extended_core(lo, hi)
    off = hull_starts[u_minus.lo - lo]
    gens = []
    for row in u_ext.generators():
        piece = list(row[off : off + wg.rank])
        gens.append(project(piece))
    u_image = canonical_subgroup(q_group, gens)

    c_q = finite_cotrajectory(endo_q, u_image)
    checks.append(
        CheckRecord("induced_cotrajectory_trivial", c_q.order == 1, lhs=c_q.order, rhs=1)
    )
    ker_q = endo_q.kernel().order
    cok_q = endo_q.image().index
    checks.append(
        CheckRecord(
            "finite_entropy_eq_log_ker_minus_log_coker",
            ker_q == cok_q,
            lhs=ker_q,
            rhs=cok_q,
            note="entropy on a finite group is 0",
        )
    )
    return QuotientSystem("finite", u_minus, q_group, endo_q, u_image, tuple(checks))


def log_law_check(
    endo, u: CylinderSubgroup, k: int, policy: StabilizationPolicy = DEFAULT_POLICY
) -> CheckRecord:
    """Verify [psi^{-k}(U_-) : U_-] = [psi^{-1}(U_-) : U_-]^k for surjective psi."""
    if k < 1:
        raise ValidationError("power must be >= 1")
    if not surjective_on_windows(endo, policy):
        raise ValidationError("log law requires a surjective endomorphism")
    base_rep = cotrajectory_limits(endo, u, policy)
    if not base_rep.certified:
        raise Inconclusive("base cotrajectory did not certify", base_rep)
    rhs = base_rep.psi_inv_c_mod_c**k

    try:
        kind = cotrajectory_exact(endo, u, policy)
    except Inconclusive:
        kind = ("chain", None)
    if kind[0] == "stalled":
        u_minus = kind[1]
        pk = PowerEndo(endo, k).preimage_cylinder(u_minus)
        lhs = u_minus.index // pk.index
    else:
        # telescope [psi^{-k}(C) : C] through psi^{-j}(C) = C(psi, psi^{-j}(U))
        lhs = 1
        v = u
        for _ in range(k):
            rep = cotrajectory_limits(endo, v, policy)
            if not rep.certified:
                raise Inconclusive("telescoped cotrajectory did not certify", rep)
            lhs *= rep.psi_inv_c_mod_c
            v = endo.preimage_cylinder(v)
    # entropy form of the law: psi^k with respect to C_k(psi, U)
    hk = topological_entropy(PowerEndo(endo, k), cotrajectory(endo, u, k), "limit", policy)
    h1 = topological_entropy(endo, u, "limit", policy)
    ok = lhs == rhs and hk == h1.times(k)
    return CheckRecord(
        f"log_law_k{k}", ok, lhs=lhs, rhs=rhs,
        note=f"H(psi^{k}, C_{k}) = log {hk.log_of} vs k*H(psi, U) = log {h1.log_of**k}",
    )
