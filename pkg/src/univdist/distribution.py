"""The universal ordinary distribution at finite squarefree level.

U_r is the quotient of the free abelian group A(r) on the fractions
(1/r)Z/Z by the distribution relations

    [a] - sum_{ell * b = a} [b]        (ell | r prime, den(a) | r/ell),

a free abelian group of rank phi(r).  The module also builds the
subgroup I_ell of symbol differences across (1/ell)Z/Z, the compatible
family x_r = [sum_{p | r} 1/p], and checks the structural facts used
downstream: freeness, embeddings between levels, the two relations of
the compatible family, regularity of ell - Frob_ell, and exactness of
the reduction sequence

    0 -> U_{r/ell} --(ell - Frob_ell)--> U_{r/ell} -> U_r / I_ell -> 0.
"""

from math import prod

from .context import Frac
from .errors import ContradictionError, LevelMismatchError
from .zlinalg import ModuleHom, PresentedModule, echelon_of, lattice_equal


def preimages(a, ell):
    """The ell fractions b with ell * b == a in Q/Z (independent of level)."""
    b0 = a.times_unit(pow(ell, -1, a.den)) if a.den > 1 else Frac(0)
    return [b0 + Frac(k, ell) for k in range(ell)]


def distribution_relation(a, ell):
    """Sparse chain for the relation [a] - sum of its ell-division preimages."""
    chain = {a: 1}
    for b in preimages(a, ell):
        chain[b] = chain.get(b, 0) - 1
    return {f: c for f, c in chain.items() if c}


def distribution_relation_rows(level):
    """All defining relations of U_r, tagged (ell, a), in canonical order.

    Order: ell ascending, then a ascending by value; this fixes the
    presentation byte-for-byte across runs.
    """
    r = level.r
    out = []
    for ell in level.primes:
        for j in range(r // ell):
            a = Frac(j, r // ell)
            out.append(((ell, a), distribution_relation(a, ell)))
    return out


def a_module(level):
    """A(r): free abelian group on the fractions of (1/r)Z/Z."""
    return PresentedModule(level.fractions(), [], name="A(%d)" % level.r)


def fraction_elim_order(level):
    """Column elimination order for fraction-indexed presentations.

    Denominator-descending: each relation then leads with its highest
    denominator symbols, whose supports are disjoint within a prime, so
    the echelon stays essentially fill-free (the natural value order
    cascades instead).
    """
    gens = level.fractions()
    return sorted(range(level.r), key=lambda t: (-gens[t].den, gens[t].num))


class UModule:
    """U_r with verified structure and a free coordinate system.

    `module` is the underlying presentation on the fraction symbols; the
    non-pivot symbols of its Hermite form give an explicit basis, so every
    element has exact free coordinates in Z^phi(r).
    """

    def __init__(self, level):
        self.level = level
        gens = level.fractions()
        rows = []
        self.relation_tags = []
        gi = {a: i for i, a in enumerate(gens)}
        for tag, chain in distribution_relation_rows(level):
            rows.append({gi[f]: c for f, c in chain.items()})
            self.relation_tags.append(tag)
        self.module = PresentedModule(gens, rows, name="U(%d)" % level.r,
                                      elim_order=fraction_elim_order(level))
        phi = prod(p - 1 for p in level.primes)
        if self.module.free_rank != phi:
            raise ContradictionError(
                "rank of U(%d) is %d, expected phi = %d"
                % (level.r, self.module.free_rank, phi))
        if not self.module.is_torsion_free():
            raise ContradictionError(
                "U(%d) has torsion %s" % (level.r, self.module.invariant_factors))
        self._sigma_free = {}

    @property
    def r(self):
        return self.level.r

    @property
    def rank(self):
        return self.module.free_rank

    def element(self, chain):
        """Element from a sparse fraction chain."""
        return self.module.element(chain)

    def symbol(self, a):
        return self.module.gen(a)

    def zero(self):
        return self.module.zero()

    def free_coords(self, elem):
        return self.module.to_free(elem.vec)

    def from_free(self, freevec):
        return self.module.element_from_vec(self.module.from_free(freevec))

    def free_basis_fractions(self):
        return [self.module.gens[c] for c in self.module.free_columns()]

    def apply_ring(self, ring, elem):
        return self.element(ring.apply(elem.coeffs()))

    def apply_group(self, g, elem):
        return self.element(g.act_chain(elem.coeffs()))

    def sigma_minus_one_free(self, p):
        """Matrix rows of (sigma_p - 1) on the free basis."""
        key = p
        rows = self._sigma_free.get(key)
        if rows is None:
            sig = self.level.sigma(p)
            rows = []
            for a in self.free_basis_fractions():
                chain = {sig.act(a): 1, a: -1} if sig.act(a) != a else {}
                elem = self.element(chain)
                rows.append(self.module.to_free(elem.vec))
            self._sigma_free[key] = rows
        return rows

    def divisible_by(self, elem, k):
        """If every free coordinate of elem is divisible by k, the exact
        quotient element; otherwise None."""
        fc = self.free_coords(elem)
        if any(v % k for v in fc.values()):
            return None
        return self.from_free({c: v // k for c, v in fc.items()})

    def __repr__(self):
        return "U(%d) free of rank %d" % (self.r, self.rank)


def build_U(level):
    return level.ctx.cached(("U", level.r), lambda: UModule(level))


def relations_g_stable_check(level):
    """Each sigma_p permutes the defining relation set symbol-for-symbol."""
    rows = {tag: chain for tag, chain in distribution_relation_rows(level)}
    for p in level.primes:
        sig = level.sigma(p)
        for (ell, a), chain in rows.items():
            image = {sig.act(f): c for f, c in chain.items()}
            target = rows.get((ell, sig.act(a)))
            if target != image:
                return False
    return True


def embed_U(source, target):
    """The inclusion-induced map U_s -> U_r for s | r.

    Returns (hom, details) after verifying injectivity and torsion-free
    cokernel.  The relation rows of level s are literally relation rows
    of level r (division preimages do not depend on the ambient level),
    so the generator-wise map is a homomorphism.
    """
    Us, Ur = build_U(source), build_U(target)
    if target.r % source.r:
        raise LevelMismatchError("%d is not a divisor of %d"
                                 % (source.r, target.r))
    images = [Ur.symbol(a) for a in source.fractions()]
    hom = ModuleHom(Us.module, Ur.module, images)
    ker, _ = hom.kernel()
    cok, _ = hom.cokernel()
    details = {
        "injective": ker.is_trivial(),
        "cokernel_free_rank": cok.free_rank,
        "cokernel_invariant_factors": list(cok.invariant_factors),
    }
    ok = details["injective"] and not details["cokernel_invariant_factors"]
    return hom, ok, details


def embedding_composition_check(level, s, t):
    """embed(s -> t) followed by embed(t -> r) equals embed(s -> r)."""
    ctx = level.ctx
    hom_st, _, _ = embed_U(ctx.level(s), ctx.level(t))
    hom_tr, _, _ = embed_U(ctx.level(t), level)
    hom_sr, _, _ = embed_U(ctx.level(s), level)
    Us = build_U(ctx.level(s))
    for a in ctx.level(s).fractions():
        one = hom_tr.apply(hom_st.apply(Us.symbol(a)))
        two = hom_sr.apply(Us.symbol(a))
        if one != two:
            return False
    return True


class IellSubmodule:
    """I_ell at level r: differences of symbols across (1/ell)Z/Z.

    Generated by [a + k/ell] - [a] for a in (1/r)Z/Z and 1 <= k < ell;
    this spans the same subgroup as all differences [a] - [b] with
    a - b in (1/ell)Z/Z (telescoping through intermediate shifts).
    `quotient` presents U_r / I_ell on the same symbol generators.
    """

    def __init__(self, level, ell):
        if level.r % ell:
            raise LevelMismatchError("%d does not divide level %d"
                                     % (ell, level.r))
        self.level = level
        self.ell = ell
        U = build_U(level)
        self.U = U
        gi = U.module.gen_index
        self.generator_chains = []
        rel_rows = [dict(row) for row in U.module.rel_rows]
        for a in level.fractions():
            for k in range(1, ell):
                chain = {a + Frac(k, ell): 1, a: -1}
                chain = {f: c for f, c in chain.items() if c}
                if chain:
                    self.generator_chains.append(chain)
                    rel_rows.append({gi[f]: c for f, c in chain.items()})
        self.quotient = PresentedModule(level.fractions(), rel_rows,
                                        name="U(%d)/I_%d" % (level.r, ell),
                                        elim_order=fraction_elim_order(level))

    def generators(self):
        return [self.U.element(chain) for chain in self.generator_chains]

    def contains(self, elem):
        """Membership of a U_r element in I_ell (zero in the quotient)."""
        return not self.quotient.nf(elem.vec)

    def project(self, elem_or_vec):
        vec = elem_or_vec.vec if hasattr(elem_or_vec, "vec") else elem_or_vec
        return self.quotient.element_from_vec(vec)

    def sigma_stability_check(self):
        """(sigma_ell - 1) U_r lies in I_ell (checked on the free basis)."""
        sig = self.level.sigma(self.ell)
        for a in self.U.free_basis_fractions():
            chain = {sig.act(a): 1}
            chain[a] = chain.get(a, 0) - 1
            if not self.contains(self.U.element(chain)):
                return False
        return True


def build_I_ell(level, ell):
    return level.ctx.cached(("I", level.r, ell),
                            lambda: IellSubmodule(level, ell))


def universal_euler_x(level):
    """x_r: the class of the single symbol [sum_{p | r} 1/p]; x_1 = [0]."""
    U = build_U(level)
    a = Frac(0)
    for p in level.primes:
        a = a + Frac(1, p)
    return U.element({a: 1})


def ell_minus_frob_hom(level, ell):
    """(ell - Frob_ell) as an endomorphism of U_r' (requires ell prime to r')."""
    U = build_U(level)
    frob = level.frobenius(ell)
    images = []
    for a in level.fractions():
        chain = {a: ell}
        b = frob.act(a)
        chain[b] = chain.get(b, 0) - 1
        images.append(U.element(chain))
    return ModuleHom(U.module, U.module, images)


def frob_regularity_check(level, ell):
    """(ell - Frob_ell) x = 0 has no nonzero solution x in U_{r'}."""
    hom = ell_minus_frob_hom(level, ell)
    ker, _ = hom.kernel()
    return ker.is_trivial()


def euler_relations_check(level, ell):
    """The two relations of the compatible family at (r, ell | r).

    (i)  N_ell x_r == (Frob_ell - 1) x_{r/ell} in U_r;
    (ii) x_r == x_{r/ell} modulo I_ell.
    """
    if level.r % ell:
        raise LevelMismatchError("%d does not divide %d" % (ell, level.r))
    U = build_U(level)
    sub = level.without(ell)
    x_r = universal_euler_x(level)
    x_sub = universal_euler_x(sub)
    lhs = U.apply_ring(level.norm_element(ell), x_r)
    frob = sub.frobenius(ell)
    chain = {}
    for a, c in x_sub.coeffs().items():
        b = frob.act(a)
        chain[b] = chain.get(b, 0) + c
        chain[a] = chain.get(a, 0) - c
    rhs = U.element(chain)
    if lhs != rhs:
        return False
    I = build_I_ell(level, ell)
    diff = U.element(x_r.coeffs()) - U.element(x_sub.coeffs())
    return I.contains(diff)


def reduction_sequence_check(level, ell):
    """Exactness of 0 -> U_{r/ell} -> U_{r/ell} -> U_r/I_ell -> 0.

    The first map is ell - Frob_ell, the second is induced by inclusion.
    Verified: injectivity, image = kernel as lattices, surjectivity; the
    details record the matching invariant factors of the two cokernels.
    """
    sub = level.without(ell)
    Usub = build_U(sub)
    hom = ell_minus_frob_hom(sub, ell)
    ker0, _ = hom.kernel()
    injective = ker0.is_trivial()

    I = build_I_ell(level, ell)
    Q = I.quotient
    # Inclusion U_{r/ell} -> U_r/I_ell on symbols.
    qi = Q.gen_index
    incl = ModuleHom(Usub.module, Q,
                     [{qi[a]: 1} for a in sub.fractions()])
    ker, ker_incl = incl.kernel()
    n = Usub.module.ngens
    kernel_rows = ker_incl.rows + list(Usub.module.rel_rows)
    image_rows = hom.rows + list(Usub.module.rel_rows)
    middle = lattice_equal(kernel_rows, image_rows, n,
                           order=fraction_elim_order(sub))

    cok, _ = incl.cokernel()
    surjective = cok.is_trivial()

    cok_frob, _ = hom.cokernel()
    details = {
        "injective": injective,
        "image_equals_kernel": middle,
        "surjective": surjective,
        "quotient_invariant_factors": list(Q.invariant_factors),
        "quotient_free_rank": Q.free_rank,
        "frobenius_cokernel_invariant_factors": list(cok_frob.invariant_factors),
        "frobenius_cokernel_free_rank": cok_frob.free_rank,
    }
    struct_match = (details["quotient_invariant_factors"]
                    == details["frobenius_cokernel_invariant_factors"]
                    and details["quotient_free_rank"]
                    == details["frobenius_cokernel_free_rank"])
    ok = injective and middle and surjective and struct_match
    return ok, details


def u_structure_check(level):
    """Rank, torsion-freeness and embeddings for a level; returns details."""
    U = build_U(level)
    phi = prod(p - 1 for p in level.primes)
    details = {
        "rank": U.rank,
        "phi": phi,
        "invariant_factors": list(U.module.invariant_factors),
        "g_stable_relations": relations_g_stable_check(level),
        "embeddings": {},
    }
    ok = (U.rank == phi and not details["invariant_factors"]
          and details["g_stable_relations"])
    for s in level.divisors():
        if s == level.r:
            continue
        _, emb_ok, emb_details = embed_U(level.ctx.level(s), level)
        details["embeddings"][s] = emb_details
        ok = ok and emb_ok
    return ok, details
