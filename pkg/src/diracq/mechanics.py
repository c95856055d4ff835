"""Classical constrained dynamics: Poisson brackets, the constraint chain
generated by the conservation condition, constraint-matrix inversion and
Dirac brackets.

Weak equalities are applied the way the source systems require: every
bracket is computed strongly first, and the on-shell map (an exact
substitution for the angular chart, a Groebner normal form modulo the
surface and tangency relations for the Cartesian chart) is applied last.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import sympy as sp

from . import symcore
from .errors import (
    NonterminatingChain,
    SingularOnShell,
    SingularVelocityMap,
    UnregisteredSymbol,
    UnsupportedForm,
)
from .symcore import Expr, ExprLike

__all__ = [
    "Constraint",
    "ConstraintSystem",
    "DiracTable",
    "IdealShell",
    "PhaseSpace",
    "SubstitutionShell",
    "build_constraint_matrix",
    "build_dirac_table",
    "dirac_bracket",
    "generate_chain",
    "invert_constraint_matrix",
    "legendre",
    "poisson_bracket",
    "reduce_hamiltonian",
]


# ---------------------------------------------------------------------------
# phase space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseSpace:
    """Ordered canonical pairs plus the multiplier sector.

    `velocities` pair off with `coordinates` for the Legendre transform;
    `multiplier_rate` is the independent symbol fixing the terminal chain
    entry (it is itself a multiplier, not a derivative).
    """

    coordinates: Tuple[sp.Symbol, ...]
    momenta: Tuple[sp.Symbol, ...]
    velocities: Tuple[sp.Symbol, ...] = ()
    multiplier: Optional[sp.Symbol] = None
    multiplier_momentum: Optional[sp.Symbol] = None
    multiplier_rate: Optional[sp.Symbol] = None
    constants: Tuple[sp.Symbol, ...] = ()
    parameters: Tuple[sp.Symbol, ...] = ()

    def __post_init__(self):
        if len(self.coordinates) != len(self.momenta):
            raise ValueError("coordinates and momenta must pair off")

    @property
    def symbols(self) -> frozenset:
        out = set(self.coordinates) | set(self.momenta) | set(self.constants)
        out |= set(self.parameters) | set(self.velocities)
        for s in (self.multiplier, self.multiplier_momentum, self.multiplier_rate):
            if s is not None:
                out.add(s)
        return frozenset(out)

    def check_registered(self, e: ExprLike) -> None:
        free = Expr(e).free_symbols
        unknown = free - self.symbols
        if unknown:
            raise UnregisteredSymbol(
                "symbols %s are not registered in this phase space"
                % sorted(map(str, unknown))
            )


def poisson_bracket(f: ExprLike, g: ExprLike, ps: PhaseSpace) -> Expr:
    """Canonical Poisson bracket including the multiplier pair."""
    f, g = Expr(f), Expr(g)
    ps.check_registered(f)
    ps.check_registered(g)
    fs, gs = f.sym, g.sym
    total = sp.S.Zero
    pairs = list(zip(ps.coordinates, ps.momenta))
    if ps.multiplier is not None and ps.multiplier_momentum is not None:
        pairs.append((ps.multiplier, ps.multiplier_momentum))
    for q, p in pairs:
        total += sp.diff(fs, q) * sp.diff(gs, p) - sp.diff(fs, p) * sp.diff(gs, q)
    return Expr(total)


# ---------------------------------------------------------------------------
# constraints and the conservation-condition chain
# ---------------------------------------------------------------------------

CLASSIFICATIONS = ("primary", "secondary", "multiplier-fixing")


@dataclass(frozen=True)
class Constraint:
    index: int
    expr: Expr
    classification: str

    def __post_init__(self):
        if self.classification not in CLASSIFICATIONS:
            raise ValueError("bad classification %r" % (self.classification,))


def _linear_in(e: Expr, s: sp.Symbol) -> bool:
    return e.has(s) and sp.degree(sp.Poly(e.num, s)) == 1


def _momentum_elimination(e: Expr, ps: PhaseSpace) -> Optional[Dict[sp.Symbol, Expr]]:
    """Solve a momentum-linear constraint for its last registered momentum.

    Returns None when the expression is not homogeneous-linear in the
    momenta (no elimination rule can be read off).
    """
    present = [p for p in ps.momenta if e.has(p)]
    if not present:
        return None
    poly_gens = [p for p in ps.momenta]
    try:
        poly = sp.Poly(e.num, *poly_gens)
    except sp.PolynomialError:
        return None
    if poly.total_degree() != 1 or poly.nth(*([0] * len(poly_gens))) != 0:
        return None
    pivot = present[-1]
    sol = sp.solve(e.sym, pivot)
    if len(sol) != 1:
        return None
    return {pivot: Expr(sol[0])}


def generate_chain(
    primary: Optional[Constraint],
    H_p: ExprLike,
    ps: PhaseSpace,
    depth: int = 10,
) -> List[Constraint]:
    """Iterate the conservation condition until the rate multiplier is fixed.

    Raw brackets are kept verbatim; only the terminal rate-fixing entry is
    weakly simplified by eliminating one momentum per earlier momentum-linear
    constraint, which is exactly the cleanup the torus systems need.
    """
    if primary is None:
        return []
    H_p = Expr(H_p)
    chain = [primary]
    eliminations: Dict[sp.Symbol, Expr] = {}
    for _ in range(depth):
        raw = poisson_bracket(chain[-1].expr, H_p, ps)
        if raw.is_zero:
            return chain
        index = len(chain) + 1
        if ps.multiplier_rate is not None and _linear_in(raw, ps.multiplier_rate):
            cleaned = symcore.substitute(raw, eliminations) if eliminations else raw
            chain.append(Constraint(index, cleaned, "multiplier-fixing"))
            return chain
        if ps.multiplier is not None and _linear_in(raw, ps.multiplier):
            chain.append(Constraint(index, raw, "multiplier-fixing"))
            continue
        rule = _momentum_elimination(raw, ps)
        if rule:
            eliminations.update(rule)
        chain.append(Constraint(index, raw, "secondary"))
    raise NonterminatingChain(
        "conservation condition did not terminate within depth %d" % depth
    )


# ---------------------------------------------------------------------------
# Legendre transform
# ---------------------------------------------------------------------------

def legendre(
    L: ExprLike, ps: PhaseSpace
) -> Tuple[Dict[sp.Symbol, Expr], Expr, Optional[Constraint]]:
    """Momenta, primary Hamiltonian and (if any) the primary constraint.

    Expects a Lagrangian diagonal-quadratic in the velocities, minus an
    optional multiplier term; the rate symbol must be absent.
    """
    L = Expr(L)
    ps.check_registered(L)
    if ps.multiplier_rate is not None and L.has(ps.multiplier_rate):
        raise UnsupportedForm("the rate multiplier may not appear in a Lagrangian")
    Ls = sp.expand(L.sym)
    momentum_defs: Dict[sp.Symbol, Expr] = {}
    kinetic = sp.S.Zero
    rest = Ls
    for q, p, v in zip(ps.coordinates, ps.momenta, ps.velocities):
        mass = sp.expand(2 * Ls.coeff(v, 2))
        if mass == 0:
            raise SingularVelocityMap("velocity %s has no quadratic term" % v)
        momentum_defs[p] = Expr(mass * v)
        kinetic += p**2 / (2 * mass)
        rest = sp.expand(rest - mass * v**2 / 2)
    if any(rest.has(v) for v in ps.velocities):
        raise UnsupportedForm("Lagrangian is not diagonal-quadratic in velocities")
    H_sym = kinetic - rest
    primary = None
    if ps.multiplier is not None and Ls.has(ps.multiplier):
        H_sym += ps.multiplier_rate * ps.multiplier_momentum
        primary = Constraint(1, Expr(ps.multiplier_momentum), "primary")
    return momentum_defs, Expr(H_sym), primary


# ---------------------------------------------------------------------------
# on-shell maps
# ---------------------------------------------------------------------------

class SubstitutionShell:
    """On-shell reduction by exact simultaneous substitution."""

    def __init__(self, substitutions: Mapping[sp.Symbol, ExprLike]):
        self.substitutions = {k: Expr(v) for k, v in substitutions.items()}

    def reduce(self, e: ExprLike) -> Expr:
        return symcore.substitute(e, self.substitutions)


class IdealShell:
    """On-shell reduction by Groebner normal form modulo constraint relations.

    `relations` vanish on the constraint surface; `substitutions` (the solved
    multiplier) are applied first.  Numerator and denominator are reduced
    separately, which preserves on-shell value as long as the denominator
    stays nonzero on the surface.
    """

    def __init__(
        self,
        substitutions: Mapping[sp.Symbol, ExprLike],
        relations: Sequence[ExprLike],
        gens_order: Sequence[sp.Symbol],
    ):
        self.substitutions = {k: Expr(v) for k, v in substitutions.items()}
        rel_cores = []
        for rel in relations:
            rel_cores.append(sp.expand(Expr(rel).num))
        # the defining relation of every ruled atom in play (e.g. rho**2 ->
        # x**2 + y**2) must itself generate, or ideal membership of mixed
        # atom/polynomial combinations is invisible to the division
        seen = set(gens_order) | set().union(*(r.free_symbols for r in rel_cores))
        for atom in sorted(seen, key=symcore._ATOMS.sort_key):
            rule = symcore._ATOMS.rules.get(atom)
            if rule is not None:
                rel_cores.append(sp.expand(atom**2 - rule))
        extra = set().union(*(r.free_symbols for r in rel_cores)) - set(gens_order)
        self._gens = list(gens_order) + sorted(extra, key=symcore._ATOMS.sort_key)
        self._basis = list(sp.groebner(rel_cores, *self._gens, order="lex").exprs)

    def _nf(self, poly: sp.Expr) -> sp.Expr:
        if poly.is_Rational:
            return poly
        poly = sp.expand(poly)
        # appending the leftover symbols as trailing (lowest) lex generators
        # keeps the basis a Groebner basis of the extended ring
        gens = list(self._gens) + sorted(
            poly.free_symbols - set(self._gens), key=symcore._ATOMS.sort_key
        )
        return sp.expand(sp.reduced(poly, self._basis, *gens, order="lex")[1])

    def reduce(self, e: ExprLike) -> Expr:
        e = symcore.substitute(e, self.substitutions) if self.substitutions else Expr(e)
        num = self._nf(e.num)
        den = self._nf(e.den)
        if den == 0:
            raise SingularOnShell("denominator vanishes on the constraint surface")
        return Expr(symcore._from_core(num) / symcore._from_core(den))


# ---------------------------------------------------------------------------
# constraint matrix and Dirac brackets
# ---------------------------------------------------------------------------

def build_constraint_matrix(
    chain: Sequence[Constraint], ps: PhaseSpace, shell
) -> sp.Matrix:
    """Antisymmetric matrix of the first four constraints, on shell."""
    if len(chain) < 4:
        raise ValueError("the torus-class chain must provide four matrix entries")
    phis = [c.expr for c in chain[:4]]
    n = len(phis)
    out = sp.zeros(n, n)
    entries: Dict[Tuple[int, int], Expr] = {}
    for u in range(n):
        for v in range(u + 1, n):
            val = shell.reduce(poisson_bracket(phis[u], phis[v], ps))
            entries[(u, v)] = val
            out[u, v] = val.sym
            out[v, u] = -val.sym
    return out


def invert_constraint_matrix(C: sp.Matrix, shell=None) -> sp.Matrix:
    """Exact inverse by adjugate over determinant, normalized on shell."""
    n = C.shape[0]
    det = Expr(sp.cancel(C.det(method="berkowitz")))
    if shell is not None:
        det = shell.reduce(det)
    if det.is_zero:
        raise SingularOnShell("constraint matrix is singular on shell")
    adj = C.adjugate()
    out = sp.zeros(n, n)
    for u in range(n):
        for v in range(n):
            entry = Expr(sp.cancel(adj[u, v])) / det
            if shell is not None:
                entry = shell.reduce(entry)
            out[u, v] = entry.sym
    return out


@dataclass
class ConstraintSystem:
    """Everything the Dirac-bracket computation needs, assembled once."""

    ps: PhaseSpace
    lagrangian: Expr
    momentum_defs: Dict[sp.Symbol, Expr]
    H_p: Expr
    chain: List[Constraint]
    shell: object
    C: sp.Matrix = field(default=None)
    C_inv: sp.Matrix = field(default=None)
    H_c: Expr = field(default=None)

    def finalize(self) -> "ConstraintSystem":
        self.C = build_constraint_matrix(self.chain, self.ps, self.shell)
        self.C_inv = invert_constraint_matrix(self.C, self.shell)
        self.H_c = reduce_hamiltonian(self.H_p, self)
        return self

    def onshell_equal(self, e1: ExprLike, e2: ExprLike) -> bool:
        return self.shell.reduce(Expr(e1) - Expr(e2)).is_zero


def reduce_hamiltonian(H_p: ExprLike, cs: ConstraintSystem) -> Expr:
    """Drop the multiplier terms and apply the on-shell map."""
    H_p = Expr(H_p)
    drop = [s for s in (cs.ps.multiplier, cs.ps.multiplier_momentum,
                        cs.ps.multiplier_rate) if s is not None]
    if drop:
        kept = sp.Add(
            *(t for t in sp.Add.make_args(sp.expand(H_p.sym)) if not t.has(*drop))
        )
    else:
        kept = H_p.sym
    return cs.shell.reduce(Expr(kept))


def dirac_bracket(A: ExprLike, B: ExprLike, cs: ConstraintSystem) -> Expr:
    """{A,B} minus the constraint correction, reduced on shell last."""
    A, B = Expr(A), Expr(B)
    phis = [c.expr for c in cs.chain[:4]]
    total = poisson_bracket(A, B, cs.ps).sym
    left = [poisson_bracket(A, phi, cs.ps).sym for phi in phis]
    right = [poisson_bracket(phi, B, cs.ps).sym for phi in phis]
    for u in range(4):
        if left[u] == 0:
            continue
        for v in range(4):
            inv = cs.C_inv[u, v]
            if inv == 0 or right[v] == 0:
                continue
            total = total - left[u] * inv * right[v]
    return cs.shell.reduce(Expr(total))


@dataclass
class DiracTable:
    """Dirac brackets between retained variables and with the Hamiltonian."""

    entries: Dict[Tuple[str, str], Expr]

    def get(self, left: str, right: str) -> Expr:
        return self.entries[(left, right)]

    def to_serializable(self) -> Dict[str, str]:
        return {
            "{%s,%s}" % key: value.to_text()
            for key, value in sorted(self.entries.items())
        }


def build_dirac_table(
    cs: ConstraintSystem,
    variables: Sequence[sp.Symbol],
    hamiltonian: Optional[ExprLike] = None,
    hamiltonian_name: str = "H",
) -> DiracTable:
    entries: Dict[Tuple[str, str], Expr] = {}
    names = [str(v) for v in variables]
    for i, vi in enumerate(variables):
        for j, vj in enumerate(variables):
            if i < j:
                entries[(names[i], names[j])] = dirac_bracket(vi, vj, cs)
    if hamiltonian is not None:
        for i, vi in enumerate(variables):
            entries[(names[i], hamiltonian_name)] = dirac_bracket(vi, hamiltonian, cs)
    return DiracTable(entries)
