"""Differential-operator algebra on the surface chart and the consistency
checker that matches quantum commutators against i*hbar times Dirac brackets
with unknown ordering parameters.

Operators are finite sums coeff(theta,phi) * d^k/dtheta^k d^l/dphi^l with
exact canonical coefficients, linear in any unknown parameters.  The
parameter solver decomposes a residual operator over the independent
function basis (powers of sin/cos over denominators of a + b*sin(theta)),
forms a linear system over the rationals in the constants, and reports a
unique solution, a solution family, or an inconsistency witness.
"""

from __future__ import annotations

import types
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import sympy as sp

from . import symcore
from .errors import (
    BasisDecompositionFailure,
    ParameterLeak,
    PhaseImbalance,
)
from .symcore import SYM, Expr, ExprLike

__all__ = [
    "CommutatorCheck",
    "DiffOp",
    "ParameterSolution",
    "apply",
    "build_ordering_family",
    "check_first_category",
    "commutator",
    "compose",
    "derive_momenta_from_xH",
    "hermitize_pair",
    "solve_parameters",
]

_THETA = SYM.theta
_PHI = SYM.phi
_CONSTANTS = (SYM.m, SYM.a, SYM.b, SYM.hbar)


class DiffOp:
    """Immutable differential operator: sum of coeff * d_theta^k d_phi^l."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Tuple[int, int], ExprLike]):
        cleaned: Dict[Tuple[int, int], Expr] = {}
        for key, coeff in terms.items():
            k, l = int(key[0]), int(key[1])
            if k < 0 or l < 0:
                raise ValueError("derivative orders must be nonnegative")
            ce = Expr(coeff)
            if not ce.is_zero:
                cleaned[(k, l)] = ce
        object.__setattr__(self, "terms", types.MappingProxyType(cleaned))

    def __setattr__(self, *_):
        raise AttributeError("DiffOp is immutable")

    # -- constructors ---------------------------------------------------------
    @staticmethod
    def zero() -> "DiffOp":
        return DiffOp({})

    @staticmethod
    def identity() -> "DiffOp":
        return DiffOp({(0, 0): 1})

    @staticmethod
    def multiplication(f: ExprLike) -> "DiffOp":
        return DiffOp({(0, 0): f})

    @staticmethod
    def derivative(k: int, l: int, coeff: ExprLike = 1) -> "DiffOp":
        return DiffOp({(k, l): coeff})

    # -- algebra ---------------------------------------------------------------
    def __add__(self, other: "DiffOp") -> "DiffOp":
        out = {k: v.sym for k, v in self.terms.items()}
        for k, v in other.terms.items():
            out[k] = out.get(k, sp.S.Zero) + v.sym
        return DiffOp(out)

    def __sub__(self, other: "DiffOp") -> "DiffOp":
        return self + other.scale(-1)

    def __neg__(self) -> "DiffOp":
        return self.scale(-1)

    def scale(self, c: ExprLike) -> "DiffOp":
        cs = Expr(c).sym
        return DiffOp({k: cs * v.sym for k, v in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, DiffOp):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        if not self.terms:
            return "DiffOp(0)"
        bits = []
        for (k, l), coeff in sorted(self.terms.items()):
            ds = "".join(["*d_theta" * k, "*d_phi" * l])
            bits.append("(%s)%s" % (coeff, ds))
        return "DiffOp[%s]" % " + ".join(bits)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def has(self, *symbols) -> bool:
        return any(c.has(*symbols) for c in self.terms.values())

    def substitute(self, bindings: Mapping[sp.Symbol, ExprLike]) -> "DiffOp":
        return DiffOp(
            {k: symcore.substitute(v, bindings) for k, v in self.terms.items()}
        )

    def to_serializable(self) -> Dict[str, str]:
        return {
            "d_theta^%d d_phi^%d" % key: coeff.to_text()
            for key, coeff in sorted(self.terms.items())
        }


def apply(D: DiffOp, f: ExprLike) -> Expr:
    """Apply the operator to a function of the chart angles."""
    fs = Expr(f).sym
    total = sp.S.Zero
    for (k, l), coeff in D.terms.items():
        total += coeff.sym * sp.diff(fs, _THETA, k, _PHI, l)
    return Expr(total)


def compose(D1: DiffOp, D2: DiffOp) -> DiffOp:
    """Operator product with full Leibniz expansion across coefficients."""
    out: Dict[Tuple[int, int], sp.Expr] = {}
    for (k1, l1), c1 in D1.terms.items():
        c1s = c1.sym
        for (k2, l2), c2 in D2.terms.items():
            c2s = c2.sym
            for i in range(k1 + 1):
                for j in range(l1 + 1):
                    coeff = (
                        sp.binomial(k1, i)
                        * sp.binomial(l1, j)
                        * c1s
                        * sp.diff(c2s, _THETA, k1 - i, _PHI, l1 - j)
                    )
                    key = (i + k2, j + l2)
                    out[key] = out.get(key, sp.S.Zero) + coeff
    return DiffOp(out)


def compose_all(*ops: DiffOp) -> DiffOp:
    result = ops[0]
    for op in ops[1:]:
        result = compose(result, op)
    return result


def commutator(D1: DiffOp, D2: DiffOp) -> DiffOp:
    return compose(D1, D2) - compose(D2, D1)


def hermitize_pair(A: DiffOp, B: DiffOp) -> DiffOp:
    """Symmetric product (AB + BA)/2."""
    return (compose(A, B) + compose(B, A)).scale(sp.Rational(1, 2))


# ---------------------------------------------------------------------------
# deriving momenta from position-Hamiltonian commutators
# ---------------------------------------------------------------------------

def derive_momenta_from_xH(
    H: DiffOp,
    positions: Sequence[DiffOp],
    scales: Optional[Sequence[ExprLike]] = None,
    unknowns: Sequence[sp.Symbol] = (SYM.alpha, SYM.beta),
) -> List[DiffOp]:
    """Momenta read off from scale_i * (m/(i*hbar)) [x_i, H].

    The ordering parameters in H multiply pure functions, so they must
    cancel; a leak signals a malformed Hamiltonian.
    """
    if scales is None:
        scales = [1] * len(positions)
    out = []
    for pos, scale in zip(positions, scales):
        factor = Expr(scale).sym * SYM.m / (sp.I * SYM.hbar)
        mom = commutator(pos, H).scale(factor)
        if mom.has(*unknowns):
            raise ParameterLeak(
                "derived momentum retains unknown parameters: %r" % (mom,)
            )
        out.append(mom)
    return out


# ---------------------------------------------------------------------------
# parameter solving
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParameterSolution:
    status: str  # UNIQUE | FAMILY | INCONSISTENT
    assignments: Dict[sp.Symbol, Expr] = field(default_factory=dict)
    free_parameters: Tuple[sp.Symbol, ...] = ()
    residual: Optional[Expr] = None  # nonzero witness iff INCONSISTENT

    def to_serializable(self) -> Dict[str, object]:
        return {
            "status": self.status,
            "assignments": {
                str(k): v.to_text() for k, v in sorted(
                    self.assignments.items(), key=lambda kv: str(kv[0])
                )
            },
            "free_params": [str(s) for s in self.free_parameters],
            "residual_witness": None if self.residual is None else self.residual.to_text(),
        }


def _coefficient_equations(coeff: Expr, unknowns: Sequence[sp.Symbol]) -> List[sp.Expr]:
    """Equations over the constants equivalent to coeff == 0 identically."""
    num = coeff.num
    if any(coeff.den.has(u) for u in unknowns):
        raise BasisDecompositionFailure(
            "denominator depends on unknown parameters: %s" % coeff
        )
    try:
        if unknowns and sp.Poly(num, *unknowns).total_degree() > 1:
            raise BasisDecompositionFailure(
                "coefficient is not linear in the unknowns: %s" % coeff
            )
    except sp.PolynomialError as exc:
        raise BasisDecompositionFailure(str(exc)) from None
    basis_gens = sorted(
        (s for s in num.free_symbols if s not in _CONSTANTS and s not in unknowns),
        key=symcore._ATOMS.sort_key,
    )
    if not basis_gens:
        return [sp.expand(num)]
    poly = sp.Poly(num, *basis_gens)
    return [sp.expand(c) for c in poly.coeffs()]


def solve_parameters(
    residual,
    unknowns: Sequence[sp.Symbol],
    constraints: Sequence[ExprLike] = (),
) -> ParameterSolution:
    """Decompose the residual in the function basis and solve for unknowns.

    `residual` is one DiffOp or a sequence of them (one per momentum
    component); equations are pooled, which matters: single components can
    leave spurious freedom that the full set removes.
    """
    residuals = [residual] if isinstance(residual, DiffOp) else list(residual)
    unknowns = list(unknowns)
    eqs: List[sp.Expr] = []
    for constraint in constraints:
        eqs.append(Expr(constraint).num)
    for res in residuals:
        for _, coeff in sorted(res.terms.items()):
            eqs.extend(_coefficient_equations(coeff, unknowns))
    eqs = [e for e in eqs if e != 0]
    if not eqs:
        return ParameterSolution("UNIQUE", {}, (), Expr(0)) if not unknowns else \
            ParameterSolution("FAMILY", {}, tuple(unknowns), Expr(0))
    solutions = sp.solve(eqs, unknowns, dict=True)
    if not solutions:
        witness = _inconsistency_witness(eqs, unknowns)
        return ParameterSolution("INCONSISTENT", {}, (), witness)
    if len(solutions) > 1:
        raise BasisDecompositionFailure("linear system produced branches")
    sol = solutions[0]
    assignments = {k: Expr(v) for k, v in sol.items()}
    free = tuple(u for u in unknowns if u not in sol)
    # verify: substituting the assignments must annihilate every residual
    for res in residuals:
        check = res.substitute(assignments)
        if not check.is_zero:
            raise BasisDecompositionFailure(
                "solution failed back-substitution: %r" % (check,)
            )
    status = "UNIQUE" if not free else "FAMILY"
    return ParameterSolution(status, assignments, free, Expr(0))


def _inconsistency_witness(eqs: List[sp.Expr], unknowns: List[sp.Symbol]) -> Expr:
    """A nonzero combination that no parameter choice can cancel."""
    A, rhs = sp.linear_eq_to_matrix(eqs, unknowns)
    aug = A.row_join(rhs)
    reduced, _ = aug.rref(simplify=sp.cancel)
    ncols = A.shape[1]
    for i in range(reduced.rows):
        if all(reduced[i, j] == 0 for j in range(ncols)) and reduced[i, ncols] != 0:
            return Expr(reduced[i, ncols])
    # fall back to the first equation (cannot happen for a truly linear system)
    return Expr(eqs[0])


# ---------------------------------------------------------------------------
# first-category commutator checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CommutatorCheck:
    left: str
    right: str
    ok: bool
    witness: Optional[DiffOp] = None

    def to_serializable(self) -> Dict[str, object]:
        out = {"pair": "[%s,%s]" % (self.left, self.right), "ok": self.ok}
        if self.witness is not None:
            out["witness"] = self.witness.to_serializable()
        return out


def check_first_category(
    ops: Mapping[str, DiffOp],
    expected: Mapping[Tuple[str, str], DiffOp],
) -> List[CommutatorCheck]:
    """Compare [ops[l], ops[r]] against each expected operator, exactly."""
    report = []
    for (left, right), want in sorted(expected.items()):
        got = commutator(ops[left], ops[right])
        diffop = got - want
        report.append(
            CommutatorCheck(left, right, diffop.is_zero, None if diffop.is_zero else diffop)
        )
    return report


# ---------------------------------------------------------------------------
# the operator-ordering family
# ---------------------------------------------------------------------------

def build_ordering_family(
    f_i: ExprLike,
    L_z: DiffOp,
    w_plus: ExprLike,
    w_minus: ExprLike,
    H: DiffOp,
    weights: Optional[Sequence] = None,
) -> DiffOp:
    """Right-hand side of the [p_i, H] operator-ordering ansatz.

    With `weights` (five entries) this is the five-parameter family built
    from symmetrized products of L_z with 1/w_plus and 1/w_minus; with
    weights=None it is the parameter-free two-term variant with fixed
    coefficients 1/9 and 10/9.  Raises PhaseImbalance unless the half
    phases cancel termwise.
    """
    fi = DiffOp.multiplication(f_i)
    wp = DiffOp.multiplication(Expr(1) / Expr(w_plus))
    wm = DiffOp.multiplication(Expr(1) / Expr(w_minus))
    ww = DiffOp.multiplication(Expr(1) / (Expr(w_plus) * Expr(w_minus)))
    a = SYM.a

    total = (compose(H, fi) + compose(fi, H)).scale(SYM.m)
    if weights is not None:
        if len(weights) != 5:
            raise ValueError("five ordering weights are required")
        a1, a2, a3, a4, a5 = [Expr(w).sym for w in weights]
        blocks = [
            compose_all(L_z, wp, L_z, wm) + compose_all(wm, L_z, wp, L_z),
            compose_all(L_z, wp, wm, L_z) + compose_all(wm, L_z, L_z, wp),
            compose_all(wp, L_z, L_z, wm) + compose_all(L_z, wm, wp, L_z),
            compose_all(wp, L_z, wm, L_z) + compose_all(L_z, wm, L_z, wp),
        ]
        for ak, block in zip((a1, a2, a3, a4), blocks):
            sym = compose(fi, block) + compose(block, fi)
            total = total + sym.scale(-a * ak / 4)
        lz2 = compose(L_z, L_z)
        tail = compose(ww, compose(fi, lz2) + compose(lz2, fi))
        total = total + tail.scale(-a * a5 / 2)
    else:
        lz2 = compose(L_z, L_z)
        t_left = compose_all(wp, fi, lz2, wm) + compose_all(wm, fi, lz2, wp)
        t_right = compose_all(wp, lz2, wm, fi) + compose_all(wm, lz2, wp, fi)
        total = total + (t_left + t_right).scale(sp.Rational(1, 9) * a / 4)
        tail = compose(ww, compose(fi, lz2) + compose(lz2, fi))
        total = total + tail.scale(-sp.Rational(10, 9) * a / 2)

    out = total.scale(-sp.I * SYM.hbar / (SYM.m * SYM.b**2))
    for key, coeff in out.terms.items():
        if symcore.has_half_phase(coeff):
            raise PhaseImbalance(
                "half phases failed to cancel in term %s: %s" % (key, coeff)
            )
    return out
