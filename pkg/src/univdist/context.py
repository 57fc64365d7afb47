"""Arithmetic context: modulus, admissible primes, groups and group rings.

A `Context` fixes an odd modulus M >= 3, an ascending pool of odd primes
ell == 1 (mod M), and for each pool prime a generator s_ell of
(Z/ell)^x.  A `Level` is a squarefree product r of pool primes; the
group G_r = prod_{ell | r} (Z/ell)^x acts on the fractions (1/r)Z/Z by
unit multiplication, with the generator of the ell-component acting as
multiplication by s_ell and the Frobenius at a prime ell not dividing r
acting as multiplication by ell.
"""

from math import gcd, prod

from .errors import AdmissibilityError, LevelMismatchError, NotGeneratorError


def is_prime(n):
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def multiplicative_order(a, p):
    """Order of a in (Z/p)^x by direct iteration (pool primes are small)."""
    a %= p
    if gcd(a, p) != 1:
        raise ValueError("not a unit")
    k, x = 1, a
    while x != 1:
        x = x * a % p
        k += 1
    return k


def smallest_primitive_root(p):
    for g in range(2, p):
        if multiplicative_order(g, p) == p - 1:
            return g
    raise AssertionError("no generator found for prime %d" % p)


def discrete_log(base, target, p):
    """Exponent e with base^e == target (mod p), by enumeration of powers."""
    target %= p
    x, e = 1, 0
    while True:
        if x == target:
            return e
        x = x * base % p
        e += 1
        if e >= p:
            raise ValueError("element not in the subgroup generated by base")


class Frac:
    """Reduced fraction in Q/Z: num/den with 0 <= num < den, gcd = 1.

    Symbols [a] are indexed by these values independently of any ambient
    level; `index(r)` / `from_index(t, r)` convert to and from the
    numerator of a/1 = t/r at a level divisible by den.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=1):
        if den <= 0:
            raise ValueError("denominator must be positive")
        num %= den
        g = gcd(num, den)
        self.num = num // g
        self.den = den // g

    @classmethod
    def from_index(cls, t, r):
        return cls(t, r)

    def index(self, r):
        if r % self.den:
            raise LevelMismatchError("fraction %s does not live at level %d"
                                     % (self, r))
        return self.num * (r // self.den)

    def is_zero(self):
        return self.num == 0

    def __add__(self, other):
        d = self.den * other.den // gcd(self.den, other.den)
        return Frac(self.num * (d // self.den) + other.num * (d // other.den), d)

    def __sub__(self, other):
        d = self.den * other.den // gcd(self.den, other.den)
        return Frac(self.num * (d // self.den) - other.num * (d // other.den), d)

    def __neg__(self):
        return Frac(-self.num, self.den)

    def times_unit(self, u):
        """Multiplication by an integer prime to den (a unit action)."""
        if gcd(u, self.den) != 1:
            raise ValueError("not a unit at this denominator")
        return Frac(u * self.num % self.den, self.den)

    def times_int(self, k):
        return Frac(k * self.num, self.den)

    def split_at(self, ell):
        """CRT decomposition a = a0 + b with den(a0) prime to ell, b in (1/ell)Z/Z."""
        e = 0
        d = self.den
        while d % ell == 0:
            d //= ell
            e += 1
        if e == 0:
            return self, Frac(0)
        le = self.den // d
        # num/(le*d) = c/d + k/le  with  c = num * le^{-1} mod d, k = num * d^{-1} mod le
        c = self.num * pow(le, -1, d) % d if d > 1 else 0
        k = self.num * pow(d, -1, le) % le
        return Frac(c, d), Frac(k, le)

    def prime_to(self, ell):
        return self.split_at(ell)[0]

    def __eq__(self, other):
        return (isinstance(other, Frac)
                and self.num == other.num and self.den == other.den)

    def __hash__(self):
        return hash((self.num, self.den))

    def __lt__(self, other):
        return self.num * other.den < other.num * self.den

    def __le__(self, other):
        return self.num * other.den <= other.num * self.den

    def __repr__(self):
        return "0" if self.num == 0 else "%d/%d" % (self.num, self.den)


class Context:
    """Validated arithmetic configuration shared by every computation.

    Also owns a cache keyed by (kind, parameters) that the higher layers
    use for per-level objects; everything stored there is immutable after
    construction.
    """

    def __init__(self, M, primes, roots=None):
        if not isinstance(M, int) or M < 3 or M % 2 == 0:
            raise AdmissibilityError("modulus must be an odd integer >= 3")
        primes = sorted(set(primes))
        if not primes:
            raise AdmissibilityError("empty prime pool")
        for ell in primes:
            if ell % 2 == 0:
                raise AdmissibilityError("pool prime %d is even" % ell)
            if not is_prime(ell):
                raise AdmissibilityError("%d is not prime" % ell)
            if ell % M != 1:
                raise AdmissibilityError(
                    "prime %d is not congruent to 1 mod %d" % (ell, M))
        self.M = M
        self.primes = tuple(primes)
        chosen = {}
        for ell in primes:
            if roots and ell in roots:
                s = roots[ell] % ell
                if multiplicative_order(s, ell) != ell - 1:
                    raise NotGeneratorError(
                        "%d is not a generator modulo %d" % (s, ell))
                chosen[ell] = s
            else:
                chosen[ell] = smallest_primitive_root(ell)
        self.roots = chosen
        self.cache = {}
        self._levels = {}

    def level(self, r):
        """The Level for a squarefree product r of pool primes."""
        if r in self._levels:
            return self._levels[r]
        lv = Level(self, r)
        self._levels[r] = lv
        return lv

    def cached(self, key, builder):
        """Write-once memo for per-level derived objects."""
        try:
            return self.cache[key]
        except KeyError:
            val = builder()
            self.cache[key] = val
            return val

    def top_level(self):
        return self.level(prod(self.primes))

    def levels(self, max_omega=None):
        """All levels r dividing the pool product, with at most max_omega
        prime factors, ascending by (number of primes, value)."""
        from itertools import combinations
        cap = len(self.primes) if max_omega is None else max_omega
        out = []
        for k in range(cap + 1):
            for sub in combinations(self.primes, k):
                out.append(prod(sub) if sub else 1)
        out.sort(key=lambda r: (len(self.level(r).primes), r))
        return [self.level(r) for r in out]

    def __repr__(self):
        return "Context(M=%d, primes=%s, roots=%s)" % (
            self.M, list(self.primes), self.roots)


def build_context(M, primes, roots=None):
    """Validated Context; smallest primitive roots are chosen by default."""
    return Context(M, primes, roots)


class Level:
    """Squarefree level r together with its group G_r and fraction set."""

    def __init__(self, ctx, r):
        if not isinstance(r, int) or r < 1:
            raise LevelMismatchError("level must be a positive integer")
        self.ctx = ctx
        self.r = r
        facs = []
        rest = r
        for p in ctx.primes:
            if rest % p == 0:
                facs.append(p)
                rest //= p
                if rest % p == 0:
                    raise LevelMismatchError("level %d is not squarefree" % r)
        if rest != 1:
            raise LevelMismatchError(
                "level %d has prime factors outside the pool" % r)
        self.primes = tuple(facs)
        self._mult_perm = {}

    @property
    def M(self):
        return self.ctx.M

    def omega(self):
        return len(self.primes)

    def divisors(self):
        """All divisors, ascending numerically."""
        divs = [1]
        for p in self.primes:
            divs += [d * p for d in divs]
        return sorted(divs)

    def sublevel(self, s):
        if self.r % s:
            raise LevelMismatchError("%d is not a divisor of %d" % (s, self.r))
        return self.ctx.level(s)

    def without(self, ell):
        if self.r % ell:
            raise LevelMismatchError("%d does not divide %d" % (ell, self.r))
        return self.ctx.level(self.r // ell)

    def fractions(self):
        """The r fractions of (1/r)Z/Z in ascending order of value."""
        return [Frac(t, self.r) for t in range(self.r)]

    def mult_perm(self, u, d=None):
        """Index permutation t -> u*t of Z/d (d | r), cached."""
        d = self.r if d is None else d
        key = (u % d, d)
        perm = self._mult_perm.get(key)
        if perm is None:
            perm = [u * t % d for t in range(d)]
            self._mult_perm[key] = perm
        return perm

    # -- group elements ---------------------------------------------------

    def identity(self):
        return GroupElement(self, (0,) * len(self.primes))

    def sigma(self, ell):
        """The chosen generator of the ell-component of G_r."""
        if ell not in self.primes:
            raise LevelMismatchError("%d does not divide level %d" % (ell, self.r))
        exps = tuple(1 if p == ell else 0 for p in self.primes)
        return GroupElement(self, exps)

    def frobenius(self, ell):
        """Frobenius at ell on level r: multiplication by ell (needs ell ∤ r)."""
        if self.r % ell == 0:
            raise LevelMismatchError(
                "Frobenius at %d undefined at level %d (the prime divides it)"
                % (ell, self.r))
        exps = tuple(discrete_log(self.ctx.roots[p], ell % p, p)
                     for p in self.primes)
        return GroupElement(self, exps)

    def group_elements(self):
        """All of G_r (only sensible at small levels)."""
        from itertools import product as iproduct
        ranges = [range(p - 1) for p in self.primes]
        return [GroupElement(self, exps) for exps in iproduct(*ranges)]

    # -- group ring -------------------------------------------------------

    def ring_one(self):
        return GroupRingElement(self, {self.identity().exps: 1})

    def ring_of(self, g):
        return GroupRingElement(self, {g.exps: 1})

    def norm_element(self, ell):
        """N_ell: the full sum over the cyclic component at ell."""
        sig = self.sigma(ell)
        terms = {}
        g = self.identity()
        for _ in range(ell - 1):
            terms[g.exps] = terms.get(g.exps, 0) + 1
            g = g * sig
        return GroupRingElement(self, terms)

    def derivative_element(self, ell):
        """The Kolyvagin derivative: sum of i * sigma_ell^i for 1 <= i <= ell-2."""
        sig = self.sigma(ell)
        terms = {}
        g = sig
        for i in range(1, ell - 1):
            terms[g.exps] = terms.get(g.exps, 0) + i
            g = g * sig
        return GroupRingElement(self, terms)

    def derivative_product(self, over=None):
        """Product of the derivative elements over the primes of the level."""
        out = self.ring_one()
        for ell in (self.primes if over is None else over):
            out = out * self.derivative_element(ell)
        return out

    def __repr__(self):
        return "Level(%d)" % self.r


class GroupElement:
    """Element of G_r as an exponent vector over the level's primes."""

    __slots__ = ("level", "exps")

    def __init__(self, level, exps):
        self.level = level
        self.exps = tuple(e % (p - 1) for e, p in zip(exps, level.primes))

    def __mul__(self, other):
        if other.level is not self.level:
            raise LevelMismatchError("group elements of different levels")
        return GroupElement(self.level,
                            tuple(a + b for a, b in zip(self.exps, other.exps)))

    def inverse(self):
        return GroupElement(self.level, tuple(-e for e in self.exps))

    def __pow__(self, k):
        return GroupElement(self.level, tuple(k * e for e in self.exps))

    def unit_mod(self, d):
        """The unit t (mod d), d | r, acting like this element on (1/d)Z/Z."""
        lv = self.level
        # CRT over the primes dividing d; components at other primes are 1.
        residues = []
        moduli = []
        for p, e, in zip(lv.primes, self.exps):
            if d % p == 0:
                residues.append(pow(lv.ctx.roots[p], e, p))
                moduli.append(p)
        t, m = 1, 1
        for a, p in zip(residues, moduli):
            # t' == t (mod m), t' == a (mod p)
            inv = pow(m % p, -1, p)
            t = t + m * ((a - t) * inv % p)
            m *= p
        return t % d if d > 1 else 0

    def act(self, a):
        """Action on a fraction with den | r."""
        if self.level.r % a.den:
            raise LevelMismatchError("fraction %s is not at level %d"
                                     % (a, self.level.r))
        if a.den == 1:
            return a
        return a.times_unit(self.unit_mod(a.den))

    def act_chain(self, chain):
        return {self.act(a): c for a, c in chain.items()}

    def __eq__(self, other):
        return (isinstance(other, GroupElement)
                and other.level is self.level and other.exps == self.exps)

    def __hash__(self):
        return hash(self.exps)

    def __repr__(self):
        parts = ["s%d^%d" % (p, e) for p, e in zip(self.level.primes, self.exps)
                 if e]
        return "*".join(parts) if parts else "1"


class GroupRingElement:
    """Z[G_r] element as a sparse map from exponent vectors to coefficients."""

    __slots__ = ("level", "terms")

    def __init__(self, level, terms):
        self.level = level
        self.terms = {e: c for e, c in terms.items() if c}

    def __add__(self, other):
        self._compat(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            w = out.get(e, 0) + c
            if w:
                out[e] = w
            elif e in out:
                del out[e]
        return GroupRingElement(self.level, out)

    def __sub__(self, other):
        return self + (-1) * other

    def __rmul__(self, k):
        return GroupRingElement(self.level,
                                {e: k * c for e, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, GroupElement):
            other = self.level.ring_of(other)
        self._compat(other)
        lv = self.level
        mods = tuple(p - 1 for p in lv.primes)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple((a + b) % m for a, b, m in zip(e1, e2, mods))
                w = out.get(e, 0) + c1 * c2
                if w:
                    out[e] = w
                elif e in out:
                    del out[e]
        return GroupRingElement(lv, out)

    def _compat(self, other):
        if not isinstance(other, GroupRingElement) or other.level is not self.level:
            raise LevelMismatchError("group ring elements of different levels")

    def apply(self, chain):
        """Linear extension of the group action to a fraction chain."""
        out = {}
        for e, c in self.terms.items():
            g = GroupElement(self.level, e)
            for a, x in chain.items():
                b = g.act(a)
                w = out.get(b, 0) + c * x
                if w:
                    out[b] = w
                elif b in out:
                    del out[b]
        return out

    def __eq__(self, other):
        return (isinstance(other, GroupRingElement)
                and other.level is self.level and other.terms == self.terms)

    def __repr__(self):
        if not self.terms:
            return "0"
        bits = []
        for e in sorted(self.terms):
            bits.append("%d*%r" % (self.terms[e], GroupElement(self.level, e)))
        return " + ".join(bits)


def frobenius(level, ell):
    return level.frobenius(ell)


def act(g, a):
    """Group action on a fraction (left action fixing 0)."""
    return g.act(a)


def group_ring_apply(x, chain):
    return x.apply(chain)


def norm_identity_check(ctx, ell, derivative=None):
    """Check N'_ell * (sigma_ell - 1) == (ell - 1) - N_ell in Z[G_ell].

    A perturbed `derivative` element may be supplied as a negative
    control; the check then fails.
    """
    lv = ctx.level(ell)
    sig = lv.ring_of(lv.sigma(ell))
    one = lv.ring_one()
    nprime = lv.derivative_element(ell) if derivative is None else derivative
    lhs = nprime * (sig - one)
    rhs = (ell - 1) * one - lv.norm_element(ell)
    return lhs == rhs
