"""Exact symbolic expressions with a trig-rational canonical form.

Every quantity in the engine is a rational expression over phase-space
symbols, sin/cos of angle symbols, square roots of registered polynomial
bases (e.g. sqrt(x**2 + y**2)), and half-integer azimuthal phase factors
exp(I*k*w/2).  Expressions are stored in a canonical fraction num/den in
which:

 - cos(w) appears to power at most one per monomial (cos**2 -> 1 - sin**2),
 - each square-root atom appears to power at most one (sqrt(P)**2 -> P),
 - each half-phase atom appears to power at most one
   (exp(I*w/2)**2 -> cos(w) + I*sin(w)),
 - the denominator is free of cos, sqrt and phase atoms (rationalized by
   conjugation),
 - numerator and denominator share no polynomial factor, and the
   denominator is monic with respect to a fixed lexicographic order.

Two expressions are equal as functions of the supported domain iff their
canonical forms are structurally identical, which is what `equal` checks
(backed by a randomized numeric probe as an independent self-check).
Coefficients are exact rationals or Gaussian rationals; floats are
rejected.
"""

from __future__ import annotations

import random
import threading
from typing import Dict, Iterable, Mapping, Tuple, Union

import sympy as sp

from .errors import (
    CanonicalProbeMismatch,
    PoleError,
    ProbeDomainError,
    UnsupportedForm,
)

__all__ = [
    "Expr",
    "KINDS",
    "SYM",
    "diff",
    "equal",
    "eval_numeric",
    "has_half_phase",
    "normalize",
    "register_symbol",
    "substitute",
    "symbol_kind",
]

_I = sp.I
_HALF = sp.Rational(1, 2)

# ---------------------------------------------------------------------------
# symbol registry
# ---------------------------------------------------------------------------

KINDS = ("coordinate", "momentum", "multiplier", "parameter", "constant")

_REGISTRY: Dict[str, Tuple[sp.Symbol, str]] = {}


def register_symbol(name: str, kind: str, **assumptions) -> sp.Symbol:
    """Register a named symbol with one of the phase-space kinds.

    Names are unique; re-registering with the same kind returns the
    existing symbol, a conflicting kind raises ValueError.
    """
    if kind not in KINDS:
        raise ValueError("unknown symbol kind %r" % (kind,))
    if name.startswith("_"):
        raise ValueError("names starting with '_' are reserved")
    if name in _REGISTRY:
        sym, old_kind = _REGISTRY[name]
        if old_kind != kind:
            raise ValueError(
                "symbol %r already registered with kind %r" % (name, old_kind)
            )
        return sym
    sym = sp.Symbol(name, **assumptions)
    _REGISTRY[name] = (sym, kind)
    return sym


def symbol_kind(sym: sp.Symbol) -> str:
    """Return the registered kind of `sym`."""
    entry = _REGISTRY.get(sym.name)
    if entry is None or entry[0] != sym:
        raise KeyError("symbol %r is not registered" % (sym,))
    return entry[1]


class _Namespace:
    """Attribute access to the registered symbol catalog."""

    def __getattr__(self, name: str) -> sp.Symbol:
        try:
            return _REGISTRY[name][0]
        except KeyError:
            raise AttributeError(name) from None


SYM = _Namespace()

# The standard catalog used by the torus systems.
for _n in ("m", "a", "b", "hbar"):
    register_symbol(_n, "constant", positive=True)
for _n in ("r", "theta", "phi", "x", "y", "z"):
    register_symbol(_n, "coordinate", real=True)
for _n in ("p_r", "p_theta", "p_phi", "p_x", "p_y", "p_z"):
    register_symbol(_n, "momentum", real=True)
for _n in ("lam", "lamdot", "p_lam"):
    register_symbol(_n, "multiplier", real=True)
for _n in ("alpha", "beta", "alpha1", "alpha2", "alpha3", "alpha4", "alpha5"):
    register_symbol(_n, "parameter", real=True)
del _n


# ---------------------------------------------------------------------------
# atom table: genuine sympy subtrees <-> internal polynomial generators
# ---------------------------------------------------------------------------
# rank orders the rationalization tower; a reduction rule may only introduce
# atoms of strictly lower rank (phase -> cos/sin, sqrt -> sin, cos -> sin).

_RANK_PHASE, _RANK_SQRT, _RANK_COS, _RANK_SIN = 3, 2, 1, 0


class _AtomTable:
    """Append-only interning of trig/sqrt/phase atoms.

    Creation is serialized by a lock so concurrent scenario runs stay safe;
    canonical output never depends on registration order (generator sort
    keys use the genuine expression, see sort_key).
    """

    def __init__(self):
        self._sin: Dict[sp.Symbol, sp.Symbol] = {}
        self._cos: Dict[sp.Symbol, sp.Symbol] = {}
        self._phase: Dict[sp.Symbol, sp.Symbol] = {}
        self._sqrt: Dict[sp.Expr, sp.Symbol] = {}
        self.rules: Dict[sp.Symbol, sp.Expr] = {}
        self.rank: Dict[sp.Symbol, int] = {}
        self.back: Dict[sp.Symbol, sp.Expr] = {}
        self._count = 0
        self._lock = threading.Lock()

    def _new(self, tag: str) -> sp.Symbol:
        self._count += 1
        return sp.Symbol("_%s%d" % (tag, self._count))

    def sin(self, w: sp.Symbol) -> sp.Symbol:
        with self._lock:
            return self._sin_locked(w)

    def _sin_locked(self, w: sp.Symbol) -> sp.Symbol:
        if w not in self._sin:
            t = self._new("s")
            self._sin[w] = t
            self.rank[t] = _RANK_SIN
            self.back[t] = sp.sin(w)
        return self._sin[w]

    def cos(self, w: sp.Symbol) -> sp.Symbol:
        with self._lock:
            return self._cos_locked(w)

    def _cos_locked(self, w: sp.Symbol) -> sp.Symbol:
        if w not in self._cos:
            t = self._new("c")
            self._cos[w] = t
            self.rank[t] = _RANK_COS
            self.rules[t] = 1 - self._sin_locked(w) ** 2
            self.back[t] = sp.cos(w)
        return self._cos[w]

    def phase(self, w: sp.Symbol) -> sp.Symbol:
        with self._lock:
            if w not in self._phase:
                t = self._new("u")
                self._phase[w] = t
                self.rank[t] = _RANK_PHASE
                self.rules[t] = self._cos_locked(w) + _I * self._sin_locked(w)
                self.back[t] = sp.exp(_I * w / 2)
            return self._phase[w]

    def sqrt(self, base_core: sp.Expr) -> sp.Symbol:
        base_core = sp.expand(base_core)
        with self._lock:
            if base_core not in self._sqrt:
                t = self._new("q")
                self._sqrt[base_core] = t
                self.rank[t] = _RANK_SQRT
                self.rules[t] = base_core
                self.back[t] = sp.sqrt(base_core.xreplace(self.back))
            return self._sqrt[base_core]

    def sort_key(self, sym: sp.Symbol):
        if sym in self.back:
            return (1, self.rank[sym], str(self.back[sym]))
        return (0, 0, sym.name)


_ATOMS = _AtomTable()


def _to_core(e: sp.Expr) -> sp.Expr:
    """Map a supported sympy expression onto internal polynomial generators."""
    if e.is_Atom:
        if isinstance(e, sp.Float):
            raise UnsupportedForm("floating constants are not allowed: %s" % e)
        if e.is_Symbol or e.is_Rational or e is sp.I:
            return e
        if e is sp.pi:
            raise UnsupportedForm("pi is not part of the expression class")
        raise UnsupportedForm("unsupported atom %r" % (e,))
    if e.is_Add or e.is_Mul:
        args = [_to_core(arg) for arg in e.args]
        return e.func(*args)
    if e.is_Pow:
        base, expo = e.args
        if expo.is_Integer:
            return _to_core(base) ** expo
        if expo.is_Rational and expo.q == 2:
            cb = sp.expand(_to_core(base))
            if not cb.is_polynomial(*cb.free_symbols):
                raise UnsupportedForm("sqrt of a non-polynomial base: %s" % base)
            return _ATOMS.sqrt(cb) ** expo.p
        raise UnsupportedForm("unsupported exponent %s" % expo)
    if isinstance(e, sp.sin) or isinstance(e, sp.cos):
        (arg,) = e.args
        if not arg.is_Symbol:
            raise UnsupportedForm("sin/cos of a non-symbol argument: %s" % e)
        return (_ATOMS.sin if isinstance(e, sp.sin) else _ATOMS.cos)(arg)
    if isinstance(e, sp.exp):
        (arg,) = e.args
        syms = arg.free_symbols
        if len(syms) == 1:
            (w,) = syms
            coeff = sp.cancel(arg / (_I * w))
            if coeff.is_Rational and (2 * coeff).is_Integer:
                return _ATOMS.phase(w) ** int(2 * coeff)
        raise UnsupportedForm("unsupported phase factor %s" % e)
    raise UnsupportedForm("unsupported node %r" % (e,))


def _from_core(e: sp.Expr) -> sp.Expr:
    return e.xreplace(_ATOMS.back)


def _reduce_core(p: sp.Expr) -> sp.Expr:
    """Apply the side-relation rewrite rules until every ruled atom has
    degree at most one per monomial."""
    p = sp.expand(p)
    while True:
        target = None
        for atom in sorted(
            (s for s in p.free_symbols if s in _ATOMS.rules),
            key=lambda s: -_ATOMS.rank[s],
        ):
            if sp.degree(p, atom) >= 2:
                target = atom
                break
        if target is None:
            return p
        repl = _ATOMS.rules[target]
        poly = sp.Poly(p, target)
        p = sp.expand(
            sp.Add(
                *(
                    coeff * target ** (mono[0] % 2) * repl ** (mono[0] // 2)
                    for mono, coeff in poly.terms()
                )
            )
        )


def _clear_denominator(num: sp.Expr, den: sp.Expr) -> Tuple[sp.Expr, sp.Expr]:
    """Multiply by conjugates until the denominator has no ruled atoms."""
    while True:
        atoms = sorted(
            (s for s in den.free_symbols if s in _ATOMS.rules),
            key=lambda s: -_ATOMS.rank[s],
        )
        if not atoms:
            return num, den
        atom = atoms[0]
        poly = sp.Poly(den, atom)
        d0, d1 = poly.nth(0), poly.nth(1)
        conj = d0 - d1 * atom
        num = _reduce_core(num * conj)
        den = _reduce_core(den * conj)


def _canonical_pair(e: sp.Expr) -> Tuple[sp.Expr, sp.Expr]:
    """Canonical (num, den) of a supported expression, in core generators."""
    core = _to_core(sp.sympify(e))
    core = sp.together(core)
    num, den = sp.fraction(core)
    num = _reduce_core(num)
    den = _reduce_core(den)
    if num == 0:
        return sp.S.Zero, sp.S.One
    num, den = _clear_denominator(num, den)
    ratio = sp.cancel(num / den)
    num, den = sp.fraction(ratio)
    num = _reduce_core(num)
    den = sp.expand(den)
    if num == 0:
        return sp.S.Zero, sp.S.One
    # monic denominator under a deterministic lexicographic order
    gens = sorted(den.free_symbols, key=_ATOMS.sort_key)
    if gens:
        lc = sp.Poly(den, *gens).LC(order="lex")
    else:
        lc = den
    num = sp.expand(num / lc)
    den = sp.expand(den / lc)
    return num, den


# ---------------------------------------------------------------------------
# Expr wrapper
# ---------------------------------------------------------------------------

ExprLike = Union["Expr", sp.Expr, str, int, sp.Rational]


def _parse_table() -> Dict[str, object]:
    table: Dict[str, object] = {name: sym for name, (sym, _) in _REGISTRY.items()}
    table.update({"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "sqrt": sp.sqrt,
                  "I": sp.I, "Rational": sp.Rational})
    return table


class Expr:
    """Immutable exact expression held in canonical form."""

    __slots__ = ("num", "den", "sym")

    def __init__(self, value: ExprLike):
        if isinstance(value, Expr):
            object.__setattr__(self, "num", value.num)
            object.__setattr__(self, "den", value.den)
            object.__setattr__(self, "sym", value.sym)
            return
        if isinstance(value, str):
            value = sp.parse_expr(value, local_dict=_parse_table())
        num, den = _canonical_pair(sp.sympify(value))
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "sym", _from_core(num) / _from_core(den))

    def __setattr__(self, *_):
        raise AttributeError("Expr is immutable")

    # -- python protocol ----------------------------------------------------
    def __repr__(self):
        return "Expr(%s)" % (self.sym,)

    def __str__(self):
        return str(self.sym)

    def __hash__(self):
        return hash((self.num, self.den))

    def __eq__(self, other):
        if not isinstance(other, (Expr, sp.Expr, int, sp.Rational)):
            return NotImplemented
        other = Expr(other)
        return self.num == other.num and self.den == other.den

    def __add__(self, other):
        return Expr(self.sym + Expr(other).sym)

    __radd__ = __add__

    def __sub__(self, other):
        return Expr(self.sym - Expr(other).sym)

    def __rsub__(self, other):
        return Expr(Expr(other).sym - self.sym)

    def __mul__(self, other):
        return Expr(self.sym * Expr(other).sym)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Expr(self.sym / Expr(other).sym)

    def __rtruediv__(self, other):
        return Expr(Expr(other).sym / self.sym)

    def __neg__(self):
        return Expr(-self.sym)

    def __pow__(self, k):
        return Expr(self.sym ** sp.Integer(k))

    # -- predicates ----------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.num == 0

    @property
    def free_symbols(self):
        return self.sym.free_symbols

    def has(self, *what) -> bool:
        return self.sym.has(*what)

    # -- serialization --------------------------------------------------------
    def to_text(self) -> str:
        """Deterministic, parse-round-trippable infix form."""
        return "(%s)/(%s)" % (sp.sstr(_from_core(self.num)), sp.sstr(_from_core(self.den)))

    @staticmethod
    def from_text(text: str) -> "Expr":
        return Expr(text)


def normalize(e: ExprLike) -> Expr:
    """Return the canonical form of `e` (idempotent)."""
    return Expr(e)


def diff(e: ExprLike, s: sp.Symbol) -> Expr:
    """Exact partial derivative, normalized."""
    return Expr(sp.diff(Expr(e).sym, s))


def substitute(e: ExprLike, bindings: Mapping[sp.Symbol, ExprLike]) -> Expr:
    """Simultaneous substitution followed by normalization."""
    repl = {sp.sympify(k): Expr(v).sym for k, v in bindings.items()}
    return Expr(Expr(e).sym.xreplace(repl))


def has_half_phase(e: ExprLike) -> bool:
    """True if the canonical numerator carries an unmatched exp(I*w/2)."""
    e = Expr(e)
    return any(s in _ATOMS.back and _ATOMS.rank[s] == _RANK_PHASE
               for s in e.num.free_symbols)


# ---------------------------------------------------------------------------
# numeric evaluation and the randomized equality probe
# ---------------------------------------------------------------------------

def eval_numeric(e: ExprLike, point: Mapping[sp.Symbol, complex]) -> complex:
    """Floating evaluation of `e` at `point` (all free symbols bound)."""
    e = Expr(e)
    subs = {sp.sympify(k): sp.nsimplify(v, rational=True) if isinstance(v, (int, float)) else v
            for k, v in point.items()}
    missing = e.free_symbols - set(subs)
    if missing:
        raise ValueError("unbound symbols in eval_numeric: %s" % sorted(map(str, missing)))
    # exact substitution first: polynomial cancellations become exact zeros
    # instead of the scale-tracked Float zeros evalf(subs=...) produces
    den_exact = _from_core(e.den).xreplace(subs)
    if den_exact.is_zero:
        raise PoleError("denominator vanished at the evaluation point")
    den_val = complex(den_exact.evalf(25))
    if abs(den_val) < 1e-300:
        raise PoleError("denominator vanished at the evaluation point")
    num = complex(_from_core(e.num).xreplace(subs).evalf(25))
    return num / den_val


def _probe_point(symbols: Iterable[sp.Symbol], rng: random.Random) -> Dict[sp.Symbol, sp.Rational]:
    point = {}
    for s in sorted(symbols, key=lambda q: q.name):
        if s.is_positive:
            point[s] = sp.Rational(rng.randint(300, 3000), 1000)
        else:
            val = 0
            while val == 0:
                val = rng.randint(-2000, 2000)
            point[s] = sp.Rational(val, 1000)
    return point


def _probe_value(e: Expr, point) -> complex:
    den = complex(_from_core(e.den).evalf(30, subs=point))
    if abs(den) < 1e-8:
        raise ProbeDomainError("probe point too close to a pole")
    return complex(_from_core(e.num).evalf(30, subs=point)) / den


def equal(e1: ExprLike, e2: ExprLike, probes: int = 16, seed: int = 0) -> bool:
    """Exact equality via canonical forms, self-checked by a numeric probe.

    Raises CanonicalProbeMismatch if the two verdicts disagree, which
    would indicate a canonicalization defect.
    """
    e1, e2 = Expr(e1), Expr(e2)
    canonical = (e1.num == e2.num and e1.den == e2.den)
    rng = random.Random(seed)
    symbols = e1.free_symbols | e2.free_symbols
    agree = True
    done = 0
    attempts = 0
    while done < probes:
        attempts += 1
        if attempts > probes * 20:
            raise ProbeDomainError("could not find %d pole-free probe points" % probes)
        point = _probe_point(symbols, rng)
        try:
            v1 = _probe_value(e1, point)
            v2 = _probe_value(e2, point)
        except ProbeDomainError:
            continue
        done += 1
        scale = max(abs(v1), abs(v2), 1.0)
        if abs(v1 - v2) > 1e-9 * scale:
            agree = False
            break
    if canonical != agree:
        raise CanonicalProbeMismatch(
            "canonical verdict %s disagrees with numeric probe at %s"
            % (canonical, point)
        )
    return canonical
