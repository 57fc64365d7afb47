"""Exact sparse linear algebra over Z and Z/MZ.

Arbitrary-precision integers throughout; no floating point anywhere.
The module provides:

  * sparse integer matrices (`SparseIntMatrix`);
  * Hermite and Smith normal forms with unimodular transforms;
  * deterministic exact linear solving over Z and Z/MZ (`solve_linear`);
  * incremental integer row echelon / lattice machinery (`RowEchelon`);
  * Howell-style echelon over Z/MZ for any modulus (`ModEchelon`);
  * finitely presented abelian groups with canonical element normal
    forms (`PresentedModule`, `ModuleElement`) and kernel / image /
    cokernel of homomorphisms between them (`ModuleHom`).

Rows are sparse dicts ``{column: nonzero int}``.  Vectors are row vectors
and act on matrices from the left, so the row space of a relation matrix
is the subgroup being killed.
"""

import heapq
from math import gcd

from .errors import NotHomomorphismError


def xgcd(a, b):
    # Maintain x*a + y*b == g while running Euclid on (g, next_g).
    x, next_x = 1, 0
    y, next_y = 0, 1
    g, next_g = a, b
    while next_g:
        q = g // next_g
        x, next_x = next_x, x - q * next_x
        y, next_y = next_y, y - q * next_y
        g, next_g = next_g, g - q * next_g
    if g < 0:
        x, y, g = -x, -y, -g
    return g, x, y


def _addmul(dst, src, q):
    """dst += q*src for sparse rows, dropping zeros; returns list of new cols."""
    if not q:
        return ()
    created = []
    get = dst.get
    for c, v in src.items():
        w = get(c, 0) + q * v
        if w:
            if c not in dst:
                created.append(c)
            dst[c] = w
        else:
            del dst[c]
    return created


def _scaled(row, q):
    return {c: q * v for c, v in row.items()} if q != 1 else dict(row)


class SparseIntMatrix:
    """Immutable-by-convention sparse integer matrix.

    Stored as a list of sparse rows; no zero entries are kept and all
    indices are bounds-checked at construction.
    """

    __slots__ = ("nrows", "ncols", "rows")

    def __init__(self, nrows, ncols, rows=None):
        if nrows < 0 or ncols < 0:
            raise ValueError("negative dimension")
        self.nrows = nrows
        self.ncols = ncols
        if rows is None:
            self.rows = [{} for _ in range(nrows)]
        else:
            if len(rows) != nrows:
                raise ValueError("row count mismatch")
            self.rows = []
            for row in rows:
                clean = {}
                for c, v in row.items():
                    if not 0 <= c < ncols:
                        raise ValueError("column index out of range")
                    if v:
                        clean[c] = v
                self.rows.append(clean)

    @classmethod
    def from_entries(cls, nrows, ncols, entries):
        rows = [{} for _ in range(nrows)]
        for (i, j), v in entries.items():
            if not 0 <= i < nrows:
                raise ValueError("row index out of range")
            if v:
                rows[i][j] = v
        return cls(nrows, ncols, rows)

    @classmethod
    def from_dense(cls, dense, ncols=None):
        nrows = len(dense)
        if ncols is None:
            ncols = len(dense[0]) if dense else 0
        rows = [{j: v for j, v in enumerate(r) if v} for r in dense]
        return cls(nrows, ncols, rows)

    @classmethod
    def identity(cls, n):
        return cls(n, n, [{i: 1} for i in range(n)])

    def entry(self, i, j):
        return self.rows[i].get(j, 0)

    def items(self):
        for i, row in enumerate(self.rows):
            for j, v in row.items():
                yield (i, j), v

    def nnz(self):
        return sum(len(r) for r in self.rows)

    def is_zero(self):
        return all(not r for r in self.rows)

    def to_dense(self):
        return [[self.rows[i].get(j, 0) for j in range(self.ncols)]
                for i in range(self.nrows)]

    def transpose(self):
        rows = [{} for _ in range(self.ncols)]
        for i, row in enumerate(self.rows):
            for j, v in row.items():
                rows[j][i] = v
        return SparseIntMatrix(self.ncols, self.nrows, rows)

    def mul(self, other):
        if self.ncols != other.nrows:
            raise ValueError("shape mismatch")
        rows = []
        for row in self.rows:
            acc = {}
            for k, v in row.items():
                _addmul(acc, other.rows[k], v)
            rows.append(acc)
        return SparseIntMatrix(self.nrows, other.ncols, rows)

    def stack(self, other):
        if self.ncols != other.ncols:
            raise ValueError("shape mismatch")
        rows = [dict(r) for r in self.rows] + [dict(r) for r in other.rows]
        return SparseIntMatrix(self.nrows + other.nrows, self.ncols, rows)

    def apply_left(self, vec):
        """Row vector (sparse dict over rows) times this matrix."""
        acc = {}
        for i, x in vec.items():
            _addmul(acc, self.rows[i], x)
        return acc

    def copy_rows(self):
        return [dict(r) for r in self.rows]

    def is_diagonal(self):
        return all(all(i == j for j in r) for i, r in enumerate(self.rows))

    def diagonal(self):
        n = min(self.nrows, self.ncols)
        return [self.rows[i].get(i, 0) for i in range(n)]

    def __eq__(self, other):
        return (isinstance(other, SparseIntMatrix)
                and self.nrows == other.nrows and self.ncols == other.ncols
                and self.rows == other.rows)

    def __repr__(self):
        return "SparseIntMatrix(%d x %d, %d nonzero)" % (
            self.nrows, self.ncols, self.nnz())


class RowEchelon:
    """Incremental Hermite-style row echelon form of an integer row lattice.

    Rows are inserted one at a time; the structure maintains, for each
    pivot column, a stored row whose leading entry sits in that column.
    All updates are unimodular combinations, so with ``track=True`` every
    stored row and every zero reduction carries its expression in terms of
    the inserted rows: zero reductions yield a basis of the left kernel.

    After ``finalize()`` the rows form the canonical Hermite normal form
    (positive pivots, entries above a pivot reduced into ``[0, pivot)``).
    """

    def __init__(self, ncols, track=False, order=None):
        """``order``, when given, lists the columns in elimination priority;
        pivots are chosen against the earliest listed column.  A good order
        (for example denominator-descending for distribution relations) can
        make the elimination fill-free where the natural order explodes."""
        self.ncols = ncols
        self.track = track
        if order is None:
            self.perm = None
            self.pos = None
        else:
            if sorted(order) != list(range(ncols)):
                raise ValueError("order must be a permutation of the columns")
            self.perm = list(order)
            self.pos = [0] * ncols
            for k, c in enumerate(order):
                self.pos[c] = k
        self.piv = {}            # col -> pivot row (support >= col, internal order)
        self.trk = {}            # col -> combination over inserted row tags
        self.kernel_tracks = []  # combinations that reduced to zero
        self.ntags = 0
        self.finalized = False

    def _to_internal(self, row):
        if self.pos is None:
            return {c: v for c, v in row.items() if v}
        pos = self.pos
        return {pos[c]: v for c, v in row.items() if v}

    def _to_external(self, row):
        if self.perm is None:
            return dict(row)
        perm = self.perm
        return {perm[c]: v for c, v in row.items()}

    def rank(self):
        return len(self.piv)

    def pivot_cols(self):
        if self.perm is None:
            return sorted(self.piv)
        return sorted(self.perm[c] for c in self.piv)

    def add_row(self, row, tag=None):
        """Insert a sparse row; returns its pivot column or None if dependent."""
        row = self._to_internal(row)
        if tag is None:
            tag = self.ntags
        self.ntags += 1
        trk = {tag: 1} if self.track else None
        heap = list(row)
        heapq.heapify(heap)
        piv = self.piv
        while heap:
            c = heapq.heappop(heap)
            v = row.get(c, 0)
            if not v:
                continue
            prow = piv.get(c)
            if prow is None:
                if v < 0:
                    row = {cc: -vv for cc, vv in row.items()}
                    if self.track:
                        trk = {t: -x for t, x in trk.items()}
                piv[c] = row
                if self.track:
                    self.trk[c] = trk
                return self.perm[c] if self.perm is not None else c
            # Euclidean subtract-and-swap at the pivot column: floor
            # quotients with role swaps control coefficient growth far
            # better than a one-shot extended-gcd combination.
            while True:
                a = prow[c]
                v = row.get(c, 0)
                if not v:
                    break
                q = -(v // a)
                if q:
                    for cc in _addmul(row, prow, q):
                        heapq.heappush(heap, cc)
                    if self.track:
                        _addmul(trk, self.trk[c], q)
                if not row.get(c, 0):
                    break
                # 0 < row[c] < prow[c]: swap so the smaller value pivots.
                piv[c] = row
                for cc in prow:
                    heapq.heappush(heap, cc)
                row, prow = prow, row
                if self.track:
                    self.trk[c], trk = trk, self.trk[c]
        if self.track:
            self.kernel_tracks.append(trk)
        return None

    def add_rows(self, rows, tags=None):
        for i, row in enumerate(rows):
            self.add_row(row, None if tags is None else tags[i])

    def reduce(self, vec, with_coeffs=False):
        """Canonical representative of ``vec`` modulo the row lattice.

        Leaves each pivot-column coordinate in ``[0, pivot)``.  With
        ``with_coeffs`` also returns the multipliers ``{pivot_col: q}``
        used (keyed in internal column order; mainly for ``solve``), so
        that ``vec == sum q * pivot_row + residue``.
        """
        res = self._to_internal(vec)
        coeffs = {} if with_coeffs else None
        heap = list(res)
        heapq.heapify(heap)
        seen = set()
        piv = self.piv
        while heap:
            c = heapq.heappop(heap)
            if c in seen:
                continue
            seen.add(c)
            v = res.get(c, 0)
            if not v:
                continue
            prow = piv.get(c)
            if prow is None:
                continue
            q = v // prow[c]
            if q:
                for cc in _addmul(res, prow, -q):
                    if cc not in seen:
                        heapq.heappush(heap, cc)
                if with_coeffs:
                    coeffs[c] = coeffs.get(c, 0) + q
        res = self._to_external(res)
        if with_coeffs:
            return res, coeffs
        return res

    def contains(self, vec):
        return not self.reduce(vec)

    def solve(self, vec):
        """Express ``vec`` over the inserted rows; None if not in the lattice.

        Requires ``track=True``.  Returns a sparse dict over row tags.
        """
        if not self.track:
            raise ValueError("echelon built without tracking")
        res, coeffs = self.reduce(vec, with_coeffs=True)
        if res:
            return None
        out = {}
        for c, q in coeffs.items():
            _addmul(out, self.trk[c], q)
        return out

    def finalize(self):
        """Reduce entries above pivots; afterwards rows are canonical HNF."""
        if self.finalized:
            return self
        for c in sorted(self.piv, reverse=True):
            prow = self.piv[c]
            p = prow[c]
            for c2, row2 in self.piv.items():
                if c2 >= c:
                    continue
                v = row2.get(c, 0)
                q = v // p
                if q:
                    _addmul(row2, prow, -q)
                    if self.track:
                        _addmul(self.trk[c2], self.trk[c], -q)
        self.finalized = True
        return self

    def hnf_rows(self):
        return [self._to_external(self.piv[c]) for c in sorted(self.piv)]


def echelon_of(rows, ncols, track=False, finalize=False, order=None):
    ech = RowEchelon(ncols, track=track, order=order)
    ech.add_rows(rows)
    if finalize:
        ech.finalize()
    return ech


def lattice_equal(rows_a, rows_b, ncols, order=None):
    """Equality of the integer row lattices spanned by two row families."""
    ea = echelon_of(rows_a, ncols, order=order)
    eb = echelon_of(rows_b, ncols, order=order)
    return (all(ea.contains(r) for r in rows_b)
            and all(eb.contains(r) for r in rows_a))


def hermite_normal_form(mat, transform=False):
    """Canonical row Hermite normal form ``H`` of ``mat``.

    With ``transform`` also returns a unimodular ``T`` (as a
    SparseIntMatrix) whose rows express the rows of ``H`` followed by a
    kernel basis, so ``T * mat`` has the rows of ``H`` on top and zero
    rows below.
    """
    ech = RowEchelon(mat.ncols, track=transform)
    for i, row in enumerate(mat.rows):
        ech.add_row(row, i)
    ech.finalize()
    hrows = ech.hnf_rows()
    H = SparseIntMatrix(len(hrows), mat.ncols, hrows)
    if not transform:
        return H
    trows = [dict(ech.trk[c]) for c in sorted(ech.piv)]
    trows += [dict(t) for t in ech.kernel_tracks]
    T = SparseIntMatrix(len(trows), mat.nrows, trows)
    return H, T


# ---------------------------------------------------------------------------
# Smith normal form


def _snf_eliminate(rows, ncols, urows=None, vcols=None):
    """Diagonalize ``rows`` in place by unimodular row and column operations.

    Markowitz-style pivoting: pick the entry minimizing fill-in
    ``(row_nnz - 1) * (col_nnz - 1)`` with smallest absolute value as the
    tie-break.  Returns the list of nonzero diagonal entries (unsorted,
    no divisibility fixing).  ``urows``/``vcols`` accumulate transforms.
    """
    live = {i: row for i, row in enumerate(rows) if row}
    colidx = {}
    for i, row in live.items():
        for c in row:
            colidx.setdefault(c, set()).add(i)

    def kill(i, c):
        s = colidx.get(c)
        if s is not None:
            s.discard(i)
            if not s:
                del colidx[c]

    def row_addmul(di, si, q):
        # rows[di] += q * rows[si], maintaining the column index.
        dst, src = live[di], live[si]
        for c, v in src.items():
            w = dst.get(c, 0) + q * v
            if w:
                if c not in dst:
                    colidx.setdefault(c, set()).add(di)
                dst[c] = w
            elif c in dst:
                del dst[c]
                kill(di, c)
        if urows is not None:
            _addmul(urows[di], urows[si], q)

    def col_addmul(dc, sc, q):
        # column dc += q * column sc
        for i in list(colidx.get(sc, ())):
            row = live[i]
            v = row.get(sc, 0)
            w = row.get(dc, 0) + q * v
            if w:
                if dc not in row:
                    colidx.setdefault(dc, set()).add(i)
                row[dc] = w
            elif dc in row:
                del row[dc]
                kill(i, dc)
        if vcols is not None:
            _addmul(vcols[dc], vcols[sc], q)

    diag = []
    while live:
        for i in [i for i, row in live.items() if not row]:
            del live[i]
        if not live:
            break
        # Pivot choice: minimal Markowitz count, then minimal |value|,
        # then smallest (row, col) for determinism.
        best = None
        for i, row in live.items():
            rl = len(row) - 1
            for c, v in row.items():
                score = (rl * (len(colidx[c]) - 1), abs(v), i, c)
                if best is None or score < best[0]:
                    best = (score, i, c)
        _, pi, pc = best

        while True:
            # Clear the pivot column with row operations.
            changed = False
            others = [i for i in colidx.get(pc, ()) if i != pi]
            for i in sorted(others):
                a = live[pi][pc]
                b = live[i].get(pc, 0)
                if not b:
                    continue
                if b % a == 0:
                    row_addmul(i, pi, -(b // a))
                else:
                    g, x, y = xgcd(a, b)
                    au, bu = a // g, b // g
                    ri, rp = live[i], live[pi]
                    new_p, new_i = {}, {}
                    for c in set(rp) | set(ri):
                        pv, iv = rp.get(c, 0), ri.get(c, 0)
                        w = x * pv + y * iv
                        if w:
                            new_p[c] = w
                        w = -bu * pv + au * iv
                        if w:
                            new_i[c] = w
                    for c in set(rp) - set(new_p):
                        kill(pi, c)
                    for c in set(new_p) - set(rp):
                        colidx.setdefault(c, set()).add(pi)
                    for c in set(ri) - set(new_i):
                        kill(i, c)
                    for c in set(new_i) - set(ri):
                        colidx.setdefault(c, set()).add(i)
                    live[pi], live[i] = new_p, new_i
                    if urows is not None:
                        up, ui = urows[pi], urows[i]
                        new_up, new_ui = {}, {}
                        for t in set(up) | set(ui):
                            pv, iv = up.get(t, 0), ui.get(t, 0)
                            w = x * pv + y * iv
                            if w:
                                new_up[t] = w
                            w = -bu * pv + au * iv
                            if w:
                                new_ui[t] = w
                        urows[pi], urows[i] = new_up, new_ui
                changed = True
            # Clear the pivot row with column operations.
            prow = live[pi]
            for c in sorted(cc for cc in prow if cc != pc):
                a = prow[pc]
                b = prow[c]
                if b % a == 0:
                    col_addmul(c, pc, -(b // a))
                else:
                    g, x, y = xgcd(a, b)
                    au, bu = a // g, b // g
                    rows_touched = set(colidx.get(pc, ())) | set(colidx.get(c, ()))
                    for i in rows_touched:
                        row = live[i]
                        pv, cv = row.get(pc, 0), row.get(c, 0)
                        w1 = x * pv + y * cv
                        w2 = -bu * pv + au * cv
                        for cc, w in ((pc, w1), (c, w2)):
                            if w:
                                if cc not in row:
                                    colidx.setdefault(cc, set()).add(i)
                                row[cc] = w
                            elif cc in row:
                                del row[cc]
                                kill(i, cc)
                    if vcols is not None:
                        vp, vc = vcols[pc], vcols[c]
                        new_vp, new_vc = {}, {}
                        for t in set(vp) | set(vc):
                            pv, cv = vp.get(t, 0), vc.get(t, 0)
                            w = x * pv + y * cv
                            if w:
                                new_vp[t] = w
                            w = -bu * pv + au * cv
                            if w:
                                new_vc[t] = w
                        vcols[pc], vcols[c] = new_vp, new_vc
                changed = True
            if len(live[pi]) == 1 and len(colidx.get(pc, ())) == 1:
                break
            if not changed:
                break
        diag.append((pi, pc, live[pi][pc]))
        kill(pi, pc)
        del live[pi]
    return diag


def invariant_diagonal(rows, ncols):
    """Nonzero diagonal of the Smith form (divisibility-ordered, positive)."""
    work = [dict(r) for r in rows]
    diag = [abs(d) for _, _, d in _snf_eliminate(work, ncols)]
    # diag(a, b) and diag(gcd, lcm) present the same group.
    changed = True
    while changed:
        changed = False
        for i in range(len(diag)):
            for j in range(i + 1, len(diag)):
                if diag[j] % diag[i]:
                    g = gcd(diag[i], diag[j])
                    diag[i], diag[j] = g, diag[i] // g * diag[j]
                    changed = True
    return sorted(diag)


def smith_normal_form(mat):
    """Smith normal form with transforms: returns (U, S, V), U*mat*V == S.

    S is diagonal with nonnegative entries d1 | d2 | ...; U and V are
    unimodular.
    """
    m, n = mat.nrows, mat.ncols
    work = mat.copy_rows()
    urows = [{i: 1} for i in range(m)]
    vcols = [{j: 1} for j in range(n)]
    diag = _snf_eliminate(work, n, urows=urows, vcols=vcols)

    # Order the diagonal onto positions (0,0), (1,1), ... by permuting
    # rows and columns (permutations are unimodular up to sign; fix signs
    # by negating rows as needed).
    perm_rows = {}
    perm_cols = {}
    entries = []
    for k, (i, c, v) in enumerate(sorted(diag, key=lambda t: (t[0], t[1]))):
        perm_rows[i] = k
        perm_cols[c] = k
        entries.append(v)
    next_r = len(entries)
    for i in range(m):
        if i not in perm_rows:
            perm_rows[i] = next_r
            next_r += 1
    next_c = len(entries)
    for c in range(n):
        if c not in perm_cols:
            perm_cols[c] = next_c
            next_c += 1
    U = [None] * m
    for i in range(m):
        U[perm_rows[i]] = urows[i]
    V = [{} for _ in range(n)]
    for c in range(n):
        for t, v in vcols[c].items():
            V[t][perm_cols[c]] = v

    dvals = list(entries)
    # Sign normalization: make diagonal entries positive by row negation.
    for k, v in enumerate(dvals):
        if v < 0:
            dvals[k] = -v
            U[k] = {t: -x for t, x in U[k].items()}

    # Divisibility fixing with explicit unimodular 2x2 operations:
    # with g = x*a + y*b,
    #   [x      y  ] [a 0] [1  -y*b/g]   [g    0     ]
    #   [-b/g  a/g ] [0 b] [1   x*a/g] = [0  lcm(a,b)]
    k = len(dvals)
    changed = True
    while changed:
        changed = False
        for i in range(k):
            for j in range(i + 1, k):
                a, b = dvals[i], dvals[j]
                if b % a == 0:
                    continue
                g, x, y = xgcd(a, b)
                au, bu = a // g, b // g
                Ui, Uj = U[i], U[j]
                new_Ui = {}
                new_Uj = {}
                for t in set(Ui) | set(Uj):
                    w = x * Ui.get(t, 0) + y * Uj.get(t, 0)
                    if w:
                        new_Ui[t] = w
                    w = -bu * Ui.get(t, 0) + au * Uj.get(t, 0)
                    if w:
                        new_Uj[t] = w
                U[i], U[j] = new_Ui, new_Uj
                for row in V:
                    vi, vj = row.get(i, 0), row.get(j, 0)
                    _set(row, i, vi + vj)
                    _set(row, j, -bu * y * vi + au * x * vj)
                dvals[i], dvals[j] = g, au * b
                changed = True

    S = SparseIntMatrix(m, n, [({i: dvals[i]} if i < len(dvals) and dvals[i] else {})
                               for i in range(m)])
    Um = SparseIntMatrix(m, m, U)
    Vm = SparseIntMatrix(n, n, V)
    return Um, S, Vm


def _set(row, c, v):
    if v:
        row[c] = v
    elif c in row:
        del row[c]


# ---------------------------------------------------------------------------
# Echelon over Z/MZ (Howell-complete for composite M)


def _associate_unit(v, M):
    """A unit u mod M with u*v == gcd(v, M) mod M."""
    g = gcd(v, M)
    m = M // g
    w = (v // g) % M
    u = pow(w % m, -1, m) if m > 1 else 1
    while gcd(u, M) != 1:
        u += m
    return u % M


class ModEchelon:
    """Row echelon over Z/MZ, Howell-complete, with optional tracking.

    Pivot entries are normalized to divisors of M; whenever a pivot d > 1
    is installed, the annihilator row (M//d) * row is inserted as well, so
    that span membership can be decided by leading-entry divisibility and
    kernel tracks generate the full left kernel even for composite M.
    """

    def __init__(self, ncols, M, track=False):
        if M < 2:
            raise ValueError("modulus must be >= 2")
        self.ncols = ncols
        self.M = M
        self.track = track
        self.piv = {}   # col -> row (entries in [1, M), pivot value divides M)
        self.trk = {}
        self.kernel_tracks = []
        self.ntags = 0

    def rank(self):
        return len(self.piv)

    def _reduce_mod(self, row):
        M = self.M
        return {c: v % M for c, v in row.items() if v % M}

    def add_row(self, row, tag=None):
        M = self.M
        row = self._reduce_mod(row)
        if tag is None:
            tag = self.ntags
            self.ntags += 1
        else:
            self.ntags += 1
        trk = {tag: 1} if self.track else None
        self._insert(row, trk)

    def _insert(self, row, trk):
        # Iterative worklist (annihilator rows and displaced pivots go back
        # on the stack) to avoid recursion on long pivot chains.
        M = self.M
        piv = self.piv
        stack = [(row, trk)]
        while stack:
            row, trk = stack.pop()
            heap = list(row)
            heapq.heapify(heap)
            while heap:
                c = heapq.heappop(heap)
                v = row.get(c, 0)
                if not v:
                    continue
                prow = piv.get(c)
                if prow is None:
                    # Normalize the pivot to gcd(v, M) and install.
                    u = _associate_unit(v, M)
                    if u != 1:
                        row = {cc: uv for cc, vv in row.items()
                               if (uv := (u * vv) % M)}
                        if self.track:
                            trk = {t: ux for t, x in trk.items()
                                   if (ux := (u * x) % M)}
                    piv[c] = row
                    if self.track:
                        self.trk[c] = trk
                    d = row[c]
                    if d > 1:
                        q = M // d
                        ann = {cc: qv for cc, vv in row.items()
                               if (qv := (q * vv) % M)}
                        ann_trk = None
                        if self.track:
                            ann_trk = {t: qx for t, x in trk.items()
                                       if (qx := (q * x) % M)}
                        if ann or (self.track and ann_trk):
                            stack.append((ann, ann_trk))
                    row = None
                    break
                d = prow[c]
                if v % d == 0:
                    q = (-(v // d)) % M
                    self._row_addmul(row, prow, q, heap)
                    if self.track:
                        self._trk_addmul(trk, self.trk[c], q)
                else:
                    # Combine to reach gcd(d, v) in the pivot position.
                    g, x, y = xgcd(d, v)
                    du, vu = d // g, v // g
                    new_piv = {}
                    new_row = {}
                    for cc in set(prow) | set(row):
                        pv, rv = prow.get(cc, 0), row.get(cc, 0)
                        w = (x * pv + y * rv) % M
                        if w:
                            new_piv[cc] = w
                        w = (du * rv - vu * pv) % M
                        if w:
                            new_row[cc] = w
                            heapq.heappush(heap, cc)
                    new_trk = trk
                    if self.track:
                        ptrk, rtrk = self.trk[c], trk
                        new_ptrk, new_rtrk = {}, {}
                        for t in set(ptrk) | set(rtrk):
                            pv, rv = ptrk.get(t, 0), rtrk.get(t, 0)
                            w = (x * pv + y * rv) % M
                            if w:
                                new_ptrk[t] = w
                            w = (du * rv - vu * pv) % M
                            if w:
                                new_rtrk[t] = w
                        new_trk = new_rtrk
                        self.trk.pop(c, None)
                        stack.append((new_piv, new_ptrk))
                    else:
                        stack.append((new_piv, None))
                    # Reinstall the improved pivot via the stack, continue
                    # with the reduced remainder.
                    del piv[c]
                    row = new_row
                    trk = new_trk
            if row is None:
                continue
            if self.track and trk:
                self.kernel_tracks.append(trk)

    def _row_addmul(self, dst, src, q, heap=None):
        M = self.M
        for c, v in src.items():
            w = (dst.get(c, 0) + q * v) % M
            if w:
                if heap is not None and c not in dst:
                    heapq.heappush(heap, c)
                dst[c] = w
            elif c in dst:
                del dst[c]

    def _trk_addmul(self, dst, src, q):
        M = self.M
        for t, v in src.items():
            w = (dst.get(t, 0) + q * v) % M
            if w:
                dst[t] = w
            elif t in dst:
                del dst[t]

    def reduce(self, vec, with_coeffs=False):
        """Residue of ``vec`` modulo the row span (canonical once built)."""
        M = self.M
        res = self._reduce_mod(vec)
        coeffs = {} if with_coeffs else None
        heap = list(res)
        heapq.heapify(heap)
        seen = set()
        while heap:
            c = heapq.heappop(heap)
            if c in seen:
                continue
            seen.add(c)
            v = res.get(c, 0)
            if not v:
                continue
            prow = self.piv.get(c)
            if prow is None:
                continue
            d = prow[c]
            # Floor-reduce: leaves v mod d in [0, d); nonzero residue at a
            # pivot column therefore certifies non-membership.
            q = (v // d) % M
            if not q:
                continue
            qq = (-q) % M
            for cc, vv in prow.items():
                w = (res.get(cc, 0) + qq * vv) % M
                if w:
                    if cc not in res and cc not in seen:
                        heapq.heappush(heap, cc)
                    res[cc] = w
                elif cc in res:
                    del res[cc]
            if with_coeffs:
                coeffs[c] = (coeffs.get(c, 0) + q) % M
        if with_coeffs:
            return res, coeffs
        return res

    def contains(self, vec):
        return not self.reduce(vec)

    def solve(self, vec):
        """Combination of inserted rows equal to ``vec`` mod M, or None."""
        if not self.track:
            raise ValueError("echelon built without tracking")
        res, coeffs = self.reduce(vec, with_coeffs=True)
        if res:
            return None
        out = {}
        for c, q in coeffs.items():
            self._trk_addmul(out, self.trk[c], q)
        return out

    def basis_rows(self):
        return [dict(self.piv[c]) for c in sorted(self.piv)]

    def pivot_values(self):
        return {c: self.piv[c][c] for c in self.piv}


def kernel_mod(rows, ncols, M):
    """Generators of the left kernel {x : x*A == 0 mod M} over Z/MZ.

    ``rows`` are the rows of A, indexed by consecutive integer tags.
    Returns canonical echelon basis rows (dicts over row indices).
    """
    ech = ModEchelon(ncols, M, track=True)
    for i, row in enumerate(rows):
        ech.add_row(row, i)
    out = ModEchelon(len(rows), M)
    for t in ech.kernel_tracks:
        out.add_row(t)
    return out.basis_rows()


# ---------------------------------------------------------------------------
# Exact linear solving


def solve_linear(mat, b, modulus=0):
    """Solve mat * x == b (column convention), over Z or Z/modulus.

    Returns a dense list x of length mat.ncols, or None when the system
    is inconsistent.  The returned solution is deterministic: the unique
    representative reduced against the Hermite basis of the solution
    lattice (nonnegative reduced coordinates at its pivot columns).
    """
    if modulus < 0:
        raise ValueError("modulus must be >= 0")
    n = mat.ncols
    # Row convention: solve u * A^T == b over the rows of A^T.
    at = mat.transpose()
    ech = RowEchelon(at.ncols, track=True)
    for i, row in enumerate(at.rows):
        ech.add_row(row, ("x", i))
    if modulus:
        for j in range(at.ncols):
            ech.add_row({j: modulus}, ("m", j))
    bvec = {i: v for i, v in enumerate(b) if v}
    combo = ech.solve(bvec)
    if combo is None:
        return None
    x = {}
    for tag, q in combo.items():
        if tag[0] == "x":
            _set(x, tag[1], q)
    # Canonicalize against the solution lattice (kernel of the map).
    kern = RowEchelon(n)
    for t in ech.kernel_tracks:
        row = {tag[1]: q for tag, q in t.items() if tag[0] == "x"}
        kern.add_row(row)
    if modulus:
        for j in range(n):
            kern.add_row({j: modulus})
    x = kern.reduce(x)
    if modulus:
        x = {c: v % modulus for c, v in x.items() if v % modulus}
    out = [0] * n
    for c, v in x.items():
        out[c] = v
    return out


# ---------------------------------------------------------------------------
# Finitely presented abelian groups


class PresentedModule:
    """Finitely generated abelian group given by generators and relations.

    ``gens`` is an ordered list of hashable labels; ``relations`` is a
    SparseIntMatrix (or list of sparse rows) whose columns are indexed by
    the generators and whose row space is the subgroup being killed.
    Element equality is decided by the canonical normal form against the
    Hermite basis of the relation lattice; the Smith form of the
    relations gives the invariant factors and free rank.  All normal-form
    data is computed lazily and memoized.
    """

    def __init__(self, gens, relations=None, name=None, elim_order=None):
        self.gens = list(gens)
        self.gen_index = {g: i for i, g in enumerate(self.gens)}
        if len(self.gen_index) != len(self.gens):
            raise ValueError("duplicate generator labels")
        n = len(self.gens)
        if relations is None:
            rel_rows = []
        elif isinstance(relations, SparseIntMatrix):
            if relations.ncols != n:
                raise ValueError("relation width mismatch")
            rel_rows = relations.copy_rows()
        else:
            rel_rows = [dict(r) for r in relations]
            for r in rel_rows:
                for c in r:
                    if not 0 <= c < n:
                        raise ValueError("relation column out of range")
        self.rel_rows = rel_rows
        self.name = name
        self.elim_order = elim_order
        self._ech = None
        self._invfac = None
        self._free_cols = None

    # -- lazy normal-form data ------------------------------------------

    @property
    def ngens(self):
        return len(self.gens)

    def echelon(self):
        if self._ech is None:
            self._ech = echelon_of(self.rel_rows, self.ngens, finalize=True,
                                   order=self.elim_order)
        return self._ech

    @property
    def relation_rank(self):
        return self.echelon().rank()

    @property
    def free_rank(self):
        return self.ngens - self.relation_rank

    @property
    def invariant_factors(self):
        """Nontrivial invariant factors (each >= 2, dividing in sequence)."""
        if self._invfac is None:
            rows = self.echelon().hnf_rows()
            self._invfac = [d for d in invariant_diagonal(rows, self.ngens)
                            if d >= 2]
        return self._invfac

    def is_torsion_free(self):
        return not self.invariant_factors

    def is_trivial(self):
        return self.free_rank == 0 and not self.invariant_factors

    def pivots_all_one(self):
        ech = self.echelon()
        return all(ech.piv[c][c] == 1 for c in ech.piv)

    def free_columns(self):
        """Generator positions giving a basis when the module is free.

        Valid whenever every Hermite pivot is 1 (in particular whenever the
        module is torsion-free): the canonical normal form is then
        supported on the non-pivot columns, which therefore carry a free
        coordinate system.
        """
        if self._free_cols is None:
            if not self.pivots_all_one():
                raise ValueError("module has non-unit pivots; no free coordinates")
            pivs = set(self.echelon().pivot_cols())
            self._free_cols = [c for c in range(self.ngens) if c not in pivs]
        return self._free_cols

    # -- elements ---------------------------------------------------------

    def nf(self, vec):
        """Canonical normal form of a sparse coefficient vector."""
        return self.echelon().reduce(vec)

    def element(self, coeffs):
        vec = {}
        for label, v in coeffs.items():
            if v:
                vec[self.gen_index[label]] = vec.get(self.gen_index[label], 0) + v
        return ModuleElement(self, vec)

    def element_from_vec(self, vec):
        return ModuleElement(self, {c: v for c, v in vec.items() if v})

    def gen(self, label):
        return ModuleElement(self, {self.gen_index[label]: 1})

    def zero(self):
        return ModuleElement(self, {})

    def to_free(self, vec):
        """Coordinates of ``vec`` in the free basis (requires unit pivots)."""
        cols = self.free_columns()
        nf = self.nf(vec)
        pos = {c: k for k, c in enumerate(cols)}
        out = {}
        for c, v in nf.items():
            k = pos.get(c)
            if k is None:
                raise AssertionError("normal form not supported on free columns")
            out[k] = v
        return out

    def from_free(self, freevec):
        cols = self.free_columns()
        return {cols[k]: v for k, v in freevec.items() if v}

    def __repr__(self):
        parts = []
        if self.free_rank:
            parts.append("Z^%d" % self.free_rank)
        parts.extend("Z/%d" % d for d in self.invariant_factors)
        desc = " + ".join(parts) if parts else "0"
        label = self.name or "PresentedModule"
        return "%s(%s on %d generators)" % (label, desc, self.ngens)


def present_quotient(gens, relations):
    """Presented abelian group on ``gens`` modulo the rows of ``relations``."""
    return PresentedModule(gens, relations)


class ModuleElement:
    """Element of a PresentedModule; equality is by normal form."""

    __slots__ = ("parent", "vec")

    def __init__(self, parent, vec):
        self.parent = parent
        self.vec = {c: v for c, v in vec.items() if v}

    def nf_vec(self):
        return self.parent.nf(self.vec)

    def coeffs(self):
        return {self.parent.gens[c]: v for c, v in self.vec.items()}

    def nf_coeffs(self):
        return {self.parent.gens[c]: v for c, v in self.nf_vec().items()}

    def is_zero(self):
        return not self.nf_vec()

    def __add__(self, other):
        if other.parent is not self.parent:
            raise ValueError("elements of different modules")
        vec = dict(self.vec)
        _addmul(vec, other.vec, 1)
        return ModuleElement(self.parent, vec)

    def __sub__(self, other):
        if other.parent is not self.parent:
            raise ValueError("elements of different modules")
        vec = dict(self.vec)
        _addmul(vec, other.vec, -1)
        return ModuleElement(self.parent, vec)

    def __neg__(self):
        return ModuleElement(self.parent, {c: -v for c, v in self.vec.items()})

    def __rmul__(self, k):
        return ModuleElement(self.parent, {c: k * v for c, v in self.vec.items()})

    def __eq__(self, other):
        return (isinstance(other, ModuleElement)
                and other.parent is self.parent
                and self.nf_vec() == other.nf_vec())

    def __repr__(self):
        terms = sorted(self.nf_vec().items())
        if not terms:
            return "0"
        return " + ".join("%d*[%s]" % (v, self.parent.gens[c]) for c, v in terms)


class ModuleHom:
    """Homomorphism between presented modules, given on generators.

    ``images`` lists, for each generator of ``source``, its image as a
    ModuleElement of ``target`` (or a sparse coefficient vector over the
    target generators).  With ``modulus`` m > 0 the map is understood
    between the reductions mod m.  The constructor checks that every
    source relation maps into the target relation lattice and raises
    NotHomomorphismError otherwise.
    """

    def __init__(self, source, target, images, modulus=0, check=True):
        self.source = source
        self.target = target
        self.modulus = modulus
        rows = []
        for img in images:
            if isinstance(img, ModuleElement):
                if img.parent is not target:
                    raise ValueError("image in wrong module")
                rows.append(dict(img.vec))
            else:
                rows.append({c: v for c, v in img.items() if v})
        if len(rows) != source.ngens:
            raise ValueError("need one image per source generator")
        self.rows = rows
        if check:
            self._check()

    def _check(self):
        tech = self.target.echelon()
        for rel in self.source.rel_rows:
            img = {}
            for c, v in rel.items():
                _addmul(img, self.rows[c], v)
            res = tech.reduce(img)
            if self.modulus:
                res = {c: v % self.modulus for c, v in res.items() if v % self.modulus}
            if res:
                raise NotHomomorphismError(
                    "not a homomorphism: a source relation is not preserved")

    def apply(self, elem):
        if elem.parent is not self.source:
            raise ValueError("element of wrong module")
        out = {}
        for c, v in elem.vec.items():
            _addmul(out, self.rows[c], v)
        return ModuleElement(self.target, out)

    def apply_vec(self, vec):
        out = {}
        for c, v in vec.items():
            _addmul(out, self.rows[c], v)
        return out

    def _preimage_lattice(self):
        """Echelon basis of {v in Z^source : v*F in relations(target) (+mod)}."""
        m = self.source.ngens
        stacked = RowEchelon(self.target.ngens, track=True,
                             order=self.target.elim_order)
        for i, row in enumerate(self.rows):
            stacked.add_row(row, ("s", i))
        for k, rel in enumerate(self.target.rel_rows):
            stacked.add_row(rel, ("r", k))
        if self.modulus:
            for j in range(self.target.ngens):
                stacked.add_row({j: self.modulus}, ("m", j))
        lat = RowEchelon(m, order=self.source.elim_order)
        for t in stacked.kernel_tracks:
            row = {tag[1]: q for tag, q in t.items() if tag[0] == "s"}
            lat.add_row(row)
        if self.modulus:
            for j in range(m):
                lat.add_row({j: self.modulus})
        lat.finalize()
        return lat

    def kernel(self):
        """Kernel as (PresentedModule, inclusion ModuleHom into source)."""
        lat = self._preimage_lattice()
        basis = lat.hnf_rows()
        k = len(basis)
        ech = echelon_of(basis, self.source.ngens, track=True,
                         order=self.source.elim_order)
        rel_rows = []
        source_rels = list(self.source.rel_rows)
        if self.modulus:
            source_rels += [{j: self.modulus} for j in range(self.source.ngens)]
        for rel in source_rels:
            combo = ech.solve(rel)
            if combo is None:
                raise AssertionError("source relation escapes the kernel lattice")
            rel_rows.append(combo)
        gens = [("ker", i) for i in range(k)]
        ker = PresentedModule(gens, rel_rows)
        incl = ModuleHom(ker, self.source,
                         [dict(b) for b in basis],
                         modulus=self.modulus, check=False)
        return ker, incl

    def image(self):
        """Image as (PresentedModule, inclusion ModuleHom into target)."""
        lat = self._preimage_lattice()
        gens = [("im", i) for i in range(self.source.ngens)]
        img = PresentedModule(gens, lat.hnf_rows(),
                              elim_order=self.source.elim_order)
        incl = ModuleHom(img, self.target, [dict(r) for r in self.rows],
                         modulus=self.modulus, check=False)
        return img, incl

    def cokernel(self):
        """Cokernel as (PresentedModule, projection ModuleHom from target)."""
        rels = [dict(r) for r in self.target.rel_rows]
        rels += [dict(r) for r in self.rows]
        if self.modulus:
            rels += [{j: self.modulus} for j in range(self.target.ngens)]
        cok = PresentedModule(list(self.target.gens), rels,
                              elim_order=self.target.elim_order)
        proj = ModuleHom(self.target, cok,
                         [{i: 1} for i in range(self.target.ngens)],
                         modulus=self.modulus, check=False)
        return cok, proj

    def is_injective(self):
        ker, _ = self.kernel()
        return ker.is_trivial()
