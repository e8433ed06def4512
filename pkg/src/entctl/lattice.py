"""Exact integer lattice arithmetic.

Row lattices over Z kept in Hermite echelon form, congruence kernels, and
Smith normal form with unimodular transforms.  All arithmetic is
arbitrary-precision integer arithmetic; nothing here ever rounds.
"""

from __future__ import annotations

from bisect import bisect_left
from math import prod


def xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, x, y) with g = gcd(a, b) >= 0 and x*a + y*b = g."""
    x0, x1 = 1, 0
    y0, y1 = 0, 1
    g0, g1 = a, b
    while g1:
        q = g0 // g1
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
        g0, g1 = g1, g0 - q * g1
    if g0 < 0:
        return -g0, -x0, -y0
    return g0, x0, y0


class ZLattice:
    """Mutable integer row lattice in echelon form.

    Rows are sorted by pivot column and pivots are positive, so membership
    tests are a single back-substitution pass.  ``normalize`` additionally
    reduces the entries above each pivot, after which ``basis`` is the
    unique Hermite normal form of the lattice and can be compared directly.

    ``moduli`` optionally declares per-column integers m_j whose multiples
    m_j * e_j belong to the lattice (0 disables a column).  Declaring them
    seeds those rows and lets every elimination step reduce entries
    coordinatewise, which keeps all intermediate integers small; the
    lattice itself is unchanged.
    """

    __slots__ = ("width", "rows", "pivots", "moduli")

    def __init__(self, width: int, moduli=None):
        self.width = width
        self.rows: list[list[int]] = []
        self.pivots: list[int] = []
        self.moduli: list[int] | None = None
        if moduli is not None:
            self.moduli = [int(m) for m in moduli]
            if len(self.moduli) != width:
                raise ValueError("moduli length must match width")
            for j, m in enumerate(self.moduli):
                if m:
                    row = [0] * width
                    row[j] = m
                    self.pivots.append(j)
                    self.rows.append(row)

    @classmethod
    def from_echelon(cls, width: int, rows, pivots, moduli=None) -> "ZLattice":
        lat = cls(width)
        lat.rows = [list(r) for r in rows]
        lat.pivots = list(pivots)
        lat.moduli = list(moduli) if moduli is not None else None
        return lat

    def copy(self) -> "ZLattice":
        return ZLattice.from_echelon(self.width, self.rows, self.pivots, self.moduli)

    def _reduce_tail(self, v, start: int) -> None:
        mods = self.moduli
        if mods is None:
            return
        for t in range(start, self.width):
            m = mods[t]
            if m and v[t]:
                v[t] %= m

    def add(self, vec) -> bool:
        """Add a row to the lattice; return True if the lattice grew."""
        v = list(vec)
        if len(v) != self.width:
            raise ValueError(f"row of width {len(v)} in lattice of width {self.width}")
        rows, pivots, width = self.rows, self.pivots, self.width
        self._reduce_tail(v, 0)
        changed = False
        j = 0
        while True:
            while j < width and v[j] == 0:
                j += 1
            if j == width:
                return changed
            pos = bisect_left(pivots, j)
            if pos < len(pivots) and pivots[pos] == j:
                row = rows[pos]
                p = row[j]
                a = v[j]
                if a % p == 0:
                    q = a // p
                    for t in range(j, width):
                        v[t] -= q * row[t]
                    self._reduce_tail(v, j + 1)
                else:
                    g, x, y = xgcd(p, a)
                    pg = p // g
                    ag = a // g
                    new_row = [0] * j + [x * row[t] + y * v[t] for t in range(j, width)]
                    new_v = [0] * (j + 1) + [pg * v[t] - ag * row[t] for t in range(j + 1, width)]
                    self._reduce_tail(new_row, j + 1)
                    self._reduce_tail(new_v, j + 1)
                    rows[pos] = new_row
                    v = new_v
                    changed = True
            else:
                if v[j] < 0:
                    v = [-t for t in v]
                    self._reduce_tail(v, j + 1)
                rows.insert(pos, v)
                pivots.insert(pos, j)
                return True

    def contains(self, vec) -> bool:
        v = list(vec)
        if len(v) != self.width:
            raise ValueError("row width mismatch")
        rows, pivots, width = self.rows, self.pivots, self.width
        self._reduce_tail(v, 0)
        for j in range(width):
            if v[j] == 0:
                continue
            pos = bisect_left(pivots, j)
            if pos == len(pivots) or pivots[pos] != j:
                return False
            row = rows[pos]
            if v[j] % row[j]:
                return False
            q = v[j] // row[j]
            for t in range(j, width):
                v[t] -= q * row[t]
            self._reduce_tail(v, j + 1)
        return True

    def extend(self, new_width: int, new_moduli=None) -> None:
        """Pad every row with zero columns on the right."""
        if new_width < self.width:
            raise ValueError("lattices only grow")
        delta = new_width - self.width
        if delta:
            for row in self.rows:
                row.extend([0] * delta)
            old_width = self.width
            self.width = new_width
            if self.moduli is not None:
                if new_moduli is None or len(new_moduli) != delta:
                    raise ValueError("extension of a reduced lattice needs new moduli")
                self.moduli.extend(int(m) for m in new_moduli)
                for j in range(old_width, new_width):
                    m = self.moduli[j]
                    if m:
                        row = [0] * new_width
                        row[j] = m
                        self.rows.append(row)
                        self.pivots.append(j)

    def normalize(self) -> None:
        """Reduce entries above each pivot into [0, pivot)."""
        rows, pivots, width = self.rows, self.pivots, self.width
        for r in range(len(rows)):
            row_r = rows[r]
            for s in range(r + 1, len(rows)):
                j = pivots[s]
                row_s = rows[s]
                q = row_r[j] // row_s[j]
                if q:
                    for t in range(j, width):
                        row_r[t] -= q * row_s[t]

    def basis(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(r) for r in self.rows)

    def is_full_rank(self) -> bool:
        return len(self.rows) == self.width

    def pivot_product(self) -> int:
        """Product of the pivots; for a full-rank lattice this is [Z^k : L]."""
        return prod(r[p] for r, p in zip(self.rows, self.pivots))


def congruence_kernel(
    map_rows, image_width: int, relation_rows, coeff_moduli=None, image_moduli=None
):
    """Basis of {c in Z^n : sum_i c_i * map_rows[i] lies in the relation lattice}.

    ``coeff_moduli`` are integers m_i (0 to skip) such that m_i * map_rows[i]
    is already known to lie in the relation lattice; ``image_moduli`` are
    per-column kill moduli of the relation lattice itself.  Both change
    nothing mathematically but keep every intermediate entry bounded.
    """
    n = len(map_rows)
    width = image_width + n
    moduli = None
    if coeff_moduli is not None or image_moduli is not None:
        img = list(image_moduli) if image_moduli is not None else [0] * image_width
        cof = list(coeff_moduli) if coeff_moduli is not None else [0] * n
        moduli = img + cof
    lat = ZLattice(width, moduli)
    for rel in relation_rows:
        lat.add(list(rel) + [0] * n)
    for i, mrow in enumerate(map_rows):
        unit = [0] * n
        unit[i] = 1
        lat.add(list(mrow) + unit)
    out = []
    for r, row in enumerate(lat.rows):
        if lat.pivots[r] >= image_width:
            out.append(row[image_width:])
    return out


def _identity(n: int) -> list[list[int]]:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def smith_normal_form(mat, with_inverses: bool = False):
    """Diagonalize an integer matrix: U * M * V = S.

    S is diagonal with nonnegative entries satisfying s1 | s2 | ...,
    and U, V are unimodular.  With ``with_inverses`` the inverse
    transforms are accumulated as well and (S, U, V, Uinv, Vinv) is
    returned.
    """
    A = [list(r) for r in mat]
    nr = len(A)
    nc = len(A[0]) if nr else 0
    U = _identity(nr)
    V = _identity(nc)
    Uinv = _identity(nr) if with_inverses else None
    Vinv = _identity(nc) if with_inverses else None

    def row_swap(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]
        if Uinv is not None:
            for r in range(nr):
                Uinv[r][i], Uinv[r][j] = Uinv[r][j], Uinv[r][i]

    def col_swap(i, j):
        for r in range(nr):
            A[r][i], A[r][j] = A[r][j], A[r][i]
        for r in range(nc):
            V[r][i], V[r][j] = V[r][j], V[r][i]
        if Vinv is not None:
            Vinv[i], Vinv[j] = Vinv[j], Vinv[i]

    def row_addmul(i, j, q):
        # row_i += q * row_j
        Ai, Aj = A[i], A[j]
        for t in range(nc):
            Ai[t] += q * Aj[t]
        Ui, Uj = U[i], U[j]
        for t in range(nr):
            Ui[t] += q * Uj[t]
        if Uinv is not None:
            for r in range(nr):
                Uinv[r][j] -= q * Uinv[r][i]

    def col_addmul(i, j, q):
        # col_i += q * col_j
        for r in range(nr):
            A[r][i] += q * A[r][j]
        for r in range(nc):
            V[r][i] += q * V[r][j]
        if Vinv is not None:
            Vi, Vj = Vinv[i], Vinv[j]
            for t in range(nc):
                Vj[t] -= q * Vi[t]

    def row_combine(i, j, x, y, ag, bg):
        # (row_i, row_j) <- (x*row_i + y*row_j, -bg*row_i + ag*row_j); det = 1
        Ai, Aj = A[i], A[j]
        for t in range(nc):
            a, b = Ai[t], Aj[t]
            Ai[t] = x * a + y * b
            Aj[t] = -bg * a + ag * b
        Ui, Uj = U[i], U[j]
        for t in range(nr):
            a, b = Ui[t], Uj[t]
            Ui[t] = x * a + y * b
            Uj[t] = -bg * a + ag * b
        if Uinv is not None:
            for r in range(nr):
                a, b = Uinv[r][i], Uinv[r][j]
                Uinv[r][i] = ag * a + bg * b
                Uinv[r][j] = -y * a + x * b

    def col_combine(i, j, x, y, ag, bg):
        for r in range(nr):
            a, b = A[r][i], A[r][j]
            A[r][i] = x * a + y * b
            A[r][j] = -bg * a + ag * b
        for r in range(nc):
            a, b = V[r][i], V[r][j]
            V[r][i] = x * a + y * b
            V[r][j] = -bg * a + ag * b
        if Vinv is not None:
            Vi, Vj = Vinv[i], Vinv[j]
            for t in range(nc):
                a, b = Vi[t], Vj[t]
                Vi[t] = ag * a + bg * b
                Vj[t] = -y * a + x * b

    def row_negate(i):
        A[i] = [-t for t in A[i]]
        U[i] = [-t for t in U[i]]
        if Uinv is not None:
            for r in range(nr):
                Uinv[r][i] = -Uinv[r][i]

    def clear_at(t):
        """Eliminate row t and column t outside the pivot (t, t)."""
        while True:
            dirty = False
            for i in range(t + 1, nr):
                a = A[t][t]
                b = A[i][t]
                if b == 0:
                    continue
                if b % a == 0:
                    row_addmul(i, t, -(b // a))
                else:
                    g, x, y = xgcd(a, b)
                    row_combine(t, i, x, y, a // g, b // g)
                    dirty = True
            for j in range(t + 1, nc):
                a = A[t][t]
                b = A[t][j]
                if b == 0:
                    continue
                if b % a == 0:
                    col_addmul(j, t, -(b // a))
                    dirty = True  # row ops after col ops can refill the column
                else:
                    g, x, y = xgcd(a, b)
                    col_combine(t, j, x, y, a // g, b // g)
                    dirty = True
            if not all(A[i][t] == 0 for i in range(t + 1, nr)):
                continue
            if not dirty or all(A[t][j] == 0 for j in range(t + 1, nc)):
                return

    rank = 0
    for t in range(min(nr, nc)):
        # move a nonzero entry of smallest magnitude into position (t, t)
        best = None
        for i in range(t, nr):
            for j in range(t, nc):
                a = A[i][j]
                if a and (best is None or abs(a) < best[0]):
                    best = (abs(a), i, j)
        if best is None:
            break
        _, bi, bj = best
        if bi != t:
            row_swap(t, bi)
        if bj != t:
            col_swap(t, bj)
        if A[t][t] < 0:
            row_negate(t)
        clear_at(t)
        if A[t][t] < 0:
            row_negate(t)
        rank = t + 1

    # enforce the divisibility chain s1 | s2 | ...
    done = False
    while not done:
        done = True
        for t in range(rank - 1):
            a, b = A[t][t], A[t + 1][t + 1]
            if b % a:
                col_addmul(t, t + 1, 1)
                clear_at(t)
                if A[t][t] < 0:
                    row_negate(t)
                if A[t + 1][t + 1] < 0:
                    row_negate(t + 1)
                done = False

    if with_inverses:
        return A, U, V, Uinv, Vinv
    return A, U, V


def mat_mul(A, B):
    """Plain integer matrix product."""
    if not A:
        return []
    inner = len(B)
    out_cols = len(B[0]) if inner else 0
    return [
        [sum(row[k] * B[k][j] for k in range(inner)) for j in range(out_cols)]
        for row in A
    ]
