"""The two built-in torus systems and the geometry they share.

The intrinsic system works in the angular chart (theta, phi) with the
radial coordinate frozen by the constraint chain; the embedded system works
in Cartesian coordinates with the surface equation as the constraint.  Both
feed the same quantum Hamiltonian family
H = -(hbar^2/2m)[Laplacian + alpha*M^2 - beta*K], and each scenario ends in
a machine-readable verdict: the intrinsic quantization pins curvature
parameters that depend on the embedding (self-inconsistent), the embedded
quantization fixes alpha = beta = 1 with the geometric momentum.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import sympy as sp

from . import mechanics as mech
from . import quantize as qz
from . import symcore
from .errors import DiracQError
from .mechanics import Constraint, ConstraintSystem, DiracTable, PhaseSpace
from .quantize import DiffOp, ParameterSolution
from .symcore import SYM, Expr

__all__ = [
    "ScenarioReport",
    "TorusGeometry",
    "VERDICT_EXTRINSIC",
    "VERDICT_INTRINSIC",
    "cartesian_system",
    "chart_substitution",
    "curvatures",
    "extrinsic_scenario",
    "geometric_momentum_operators",
    "hamiltonian_family",
    "intrinsic_scenario",
    "intrinsic_system",
    "torus_geometry",
]

VERDICT_INTRINSIC = "SELF-INCONSISTENT-INTRINSIC"
VERDICT_EXTRINSIC = "CONSISTENT-EXTRINSIC"

SCENARIO_INTRINSIC = "torus-intrinsic"
SCENARIO_EXTRINSIC = "torus-extrinsic"

_m, _a, _b, _hb = SYM.m, SYM.a, SYM.b, SYM.hbar
_th, _ph = SYM.theta, SYM.phi
_I = sp.I


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusGeometry:
    """Embedded torus of outer radius a and tube radius b (a > b > 0)."""

    embedding: Tuple[Expr, Expr, Expr]
    tangent_theta: Tuple[Expr, Expr, Expr]
    tangent_phi: Tuple[Expr, Expr, Expr]
    normal: Tuple[Expr, Expr, Expr]
    mean_curvature: Expr
    gauss_curvature: Expr
    area_density: Expr
    surface_offsets: Tuple[Expr, Expr, Expr]  # f_i = b * n_i on shell


def _closed_form_curvatures() -> Tuple[Expr, Expr]:
    M = Expr(-(_a + 2 * _b * sp.sin(_th)) / (2 * (_a * _b + _b**2 * sp.sin(_th))))
    K = Expr(sp.sin(_th) / (_a * _b + _b**2 * sp.sin(_th)))
    return M, K


@functools.lru_cache(maxsize=None)
def torus_geometry() -> TorusGeometry:
    """Build the geometry from first and second fundamental forms."""
    rho = _a + _b * sp.sin(_th)
    emb = (rho * sp.cos(_ph), rho * sp.sin(_ph), _b * sp.cos(_th))
    r_th = tuple(sp.diff(e, _th) for e in emb)
    r_ph = tuple(sp.diff(e, _ph) for e in emb)
    cross = (
        r_th[1] * r_ph[2] - r_th[2] * r_ph[1],
        r_th[2] * r_ph[0] - r_th[0] * r_ph[2],
        r_th[0] * r_ph[1] - r_th[1] * r_ph[0],
    )
    area = Expr(_b * rho)  # |r_theta x r_phi| for a > b > 0
    normal = tuple(Expr(c) / area for c in cross)
    E = Expr(sum(t**2 for t in r_th))
    F = Expr(sum(t1 * t2 for t1, t2 in zip(r_th, r_ph)))
    G = Expr(sum(t**2 for t in r_ph))
    if not F.is_zero:
        raise DiracQError("torus chart must be orthogonal")
    r_thth = tuple(sp.diff(e, _th, 2) for e in emb)
    r_thph = tuple(sp.diff(e, _th, 1, _ph, 1) for e in emb)
    r_phph = tuple(sp.diff(e, _ph, 2) for e in emb)
    L = Expr(sum(Expr(c) * n for c, n in zip(r_thth, normal)))
    Mf = Expr(sum(Expr(c) * n for c, n in zip(r_thph, normal)))
    N = Expr(sum(Expr(c) * n for c, n in zip(r_phph, normal)))
    mean = (L / E + N / G) * Expr(sp.Rational(1, 2))
    gauss = (L * N - Mf * Mf) / (E * G)
    closed_M, closed_K = _closed_form_curvatures()
    if mean != closed_M or gauss != closed_K:
        raise DiracQError("fundamental-form curvatures disagree with closed forms")
    offsets = tuple(Expr(_b) * n for n in normal)
    return TorusGeometry(
        embedding=tuple(Expr(e) for e in emb),
        tangent_theta=tuple(Expr(e) for e in r_th),
        tangent_phi=tuple(Expr(e) for e in r_ph),
        normal=normal,
        mean_curvature=mean,
        gauss_curvature=gauss,
        area_density=area,
        surface_offsets=offsets,
    )


def curvatures(geom: TorusGeometry) -> Tuple[Expr, Expr]:
    return geom.mean_curvature, geom.gauss_curvature


def assert_positive_profile(a_value: float, b_value: float, n_grid: int = 720) -> None:
    """Numeric witness that a + b*sin(theta) stays positive on a theta grid."""
    import math

    if not (a_value > b_value > 0):
        raise ValueError("require a > b > 0, got a=%r b=%r" % (a_value, b_value))
    for j in range(n_grid):
        if a_value + b_value * math.sin(2 * math.pi * j / n_grid) <= 0:
            raise ValueError("a + b*sin(theta) fails to stay positive")


# ---------------------------------------------------------------------------
# phase spaces and constraint systems
# ---------------------------------------------------------------------------

_VEL_INTRINSIC = sp.symbols("rdot thetadot phidot", real=True)
_VEL_CARTESIAN = sp.symbols("xdot ydot zdot", real=True)

_PARAMS = (SYM.alpha, SYM.beta, SYM.alpha1, SYM.alpha2, SYM.alpha3, SYM.alpha4,
           SYM.alpha5)


def intrinsic_phase_space() -> PhaseSpace:
    return PhaseSpace(
        coordinates=(SYM.r, _th, _ph),
        momenta=(SYM.p_r, SYM.p_theta, SYM.p_phi),
        velocities=_VEL_INTRINSIC,
        multiplier=SYM.lam,
        multiplier_momentum=SYM.p_lam,
        multiplier_rate=SYM.lamdot,
        constants=(_m, _a, _b, _hb),
        parameters=_PARAMS,
    )


def cartesian_phase_space() -> PhaseSpace:
    return PhaseSpace(
        coordinates=(SYM.x, SYM.y, SYM.z),
        momenta=(SYM.p_x, SYM.p_y, SYM.p_z),
        velocities=_VEL_CARTESIAN,
        multiplier=SYM.lam,
        multiplier_momentum=SYM.p_lam,
        multiplier_rate=SYM.lamdot,
        constants=(_m, _a, _b, _hb),
        parameters=_PARAMS,
    )


@functools.lru_cache(maxsize=None)
def intrinsic_system() -> ConstraintSystem:
    ps = intrinsic_phase_space()
    r, th = SYM.r, _th
    rdot, thdot, phdot = _VEL_INTRINSIC
    L = (
        _m / 2 * (rdot**2 + r**2 * thdot**2 + (_a + r * sp.sin(th)) ** 2 * phdot**2)
        - SYM.lam * (r - _b)
    )
    defs, H_p, primary = mech.legendre(L, ps)
    chain = mech.generate_chain(primary, H_p, ps)
    lam_value = Expr(
        (SYM.p_theta**2 / _b**3
         + SYM.p_phi**2 * sp.sin(th) / (_a + _b * sp.sin(th)) ** 3) / _m
    )
    shell = mech.SubstitutionShell({r: _b, SYM.p_r: 0, SYM.lam: lam_value})
    return ConstraintSystem(
        ps=ps, lagrangian=Expr(L), momentum_defs=defs, H_p=H_p,
        chain=chain, shell=shell,
    ).finalize()


def cartesian_surface_function() -> Expr:
    rho = sp.sqrt(SYM.x**2 + SYM.y**2)
    return Expr(_a**2 - _b**2 + (SYM.x**2 + SYM.y**2 + SYM.z**2) - 2 * _a * rho)


@functools.lru_cache(maxsize=None)
def cartesian_system() -> ConstraintSystem:
    ps = cartesian_phase_space()
    x, y, z = SYM.x, SYM.y, SYM.z
    px, py, pz = SYM.p_x, SYM.p_y, SYM.p_z
    xdot, ydot, zdot = _VEL_CARTESIAN
    f = cartesian_surface_function()
    L = _m / 2 * (xdot**2 + ydot**2 + zdot**2) - SYM.lam * f.sym
    defs, H_p, primary = mech.legendre(L, ps)
    chain = mech.generate_chain(primary, H_p, ps)
    rho = sp.sqrt(x**2 + y**2)
    angular_sq = (py * x - px * y) ** 2
    lam_value = Expr(
        ((px**2 + py**2 + pz**2) - _a * angular_sq / rho**3) / (2 * _m * _b**2)
    )
    tangency = rho * (px * x + py * y + pz * z) - _a * (px * x + py * y)
    rho_atom = Expr(rho).num
    shell = mech.IdealShell(
        substitutions={SYM.lam: lam_value},
        relations=[f, tangency],
        gens_order=[z, pz, rho_atom, x, y, px, py],
    )
    return ConstraintSystem(
        ps=ps, lagrangian=Expr(L), momentum_defs=defs, H_p=H_p,
        chain=chain, shell=shell,
    ).finalize()


def chart_substitution(e: symcore.ExprLike) -> Expr:
    """Map a Cartesian position function onto the surface chart.

    The auxiliary radius sqrt(x**2+y**2) is replaced first (before x and y
    lose their identity), then the embedding is inserted.
    """
    rho_chart = _a + _b * sp.sin(_th)
    e = symcore.substitute(e, {sp.sqrt(SYM.x**2 + SYM.y**2): rho_chart})
    return symcore.substitute(
        e,
        {
            SYM.x: rho_chart * sp.cos(_ph),
            SYM.y: rho_chart * sp.sin(_ph),
            SYM.z: _b * sp.cos(_th),
        },
    )


# ---------------------------------------------------------------------------
# quantum operators
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def hamiltonian_family() -> DiffOp:
    """H(alpha, beta) = -(hbar^2/2m)[Laplacian + alpha*M^2 - beta*K]."""
    rho = _a + _b * sp.sin(_th)
    M, K = _closed_form_curvatures()
    pref = -(_hb**2) / (2 * _m)
    return DiffOp({
        (2, 0): pref / _b**2,
        (1, 0): pref * sp.cos(_th) / (_b * rho),
        (0, 2): pref / rho**2,
        (0, 0): Expr(pref) * (Expr(SYM.alpha) * M * M - Expr(SYM.beta) * K),
    })


def intrinsic_momentum_operators(H: Optional[DiffOp] = None) -> Tuple[DiffOp, DiffOp]:
    """p_theta, p_phi read off the position-Hamiltonian commutators."""
    H = H or hamiltonian_family()
    rho = _a + _b * sp.sin(_th)
    positions = [DiffOp.multiplication(_th), DiffOp.multiplication(_ph)]
    scales = [_b**2, rho**2]
    p_th, p_ph = qz.derive_momenta_from_xH(H, positions, scales)
    return p_th, p_ph


def geometric_momentum_operators(H: Optional[DiffOp] = None) -> Tuple[DiffOp, DiffOp, DiffOp]:
    """The three Cartesian momentum components from [x_i, H]."""
    H = H or hamiltonian_family()
    geom = torus_geometry()
    positions = [DiffOp.multiplication(e) for e in geom.embedding]
    return tuple(qz.derive_momenta_from_xH(H, positions))


def angular_momentum_z() -> DiffOp:
    return DiffOp.derivative(0, 1, -_I * _hb)


def ordering_atoms() -> Tuple[Expr, Expr]:
    """w_plus, w_minus = (x +- i y)^(3/2) expressed on the chart."""
    rho = _a + _b * sp.sin(_th)
    w_plus = Expr(rho ** sp.Rational(3, 2) * sp.exp(3 * _I * _ph / 2))
    w_minus = Expr(rho ** sp.Rational(3, 2) * sp.exp(-3 * _I * _ph / 2))
    return w_plus, w_minus


# ---------------------------------------------------------------------------
# scenario reports
# ---------------------------------------------------------------------------

@dataclass
class ScenarioReport:
    """Machine-readable verdict with full classical and quantum artifacts."""

    scenario: str
    config: Dict[str, object]
    classical: Dict[str, object]
    quantum: Dict[str, object]
    solution: ParameterSolution
    verdict: str
    oracle: Dict[str, object] = field(default_factory=dict)
    diagnostics: Dict[str, object] = field(default_factory=dict)
    # live objects for downstream consumers (not serialized)
    system: ConstraintSystem = None
    table: DiracTable = None
    hamiltonian: DiffOp = None
    momenta: Dict[str, DiffOp] = None
    extras: Dict[str, object] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "schema_version": "1",
            "scenario": self.scenario,
            "config": self.config,
            "classical": self.classical,
            "quantum": self.quantum,
            "solution": self.solution.to_serializable(),
            "verdict": self.verdict,
            "oracle": self.oracle,
            "diagnostics": self.diagnostics,
        }


def _chain_serial(chain: Sequence[Constraint]) -> List[Dict[str, str]]:
    return [
        {"index": c.index, "classification": c.classification,
         "expr": c.expr.to_text()}
        for c in chain
    ]


def _matrix_serial(M: sp.Matrix) -> List[List[str]]:
    return [[Expr(M[u, v]).to_text() for v in range(M.cols)] for u in range(M.rows)]


def _substituted_assignments(
    solution: ParameterSolution, a_value, b_value
) -> Dict[str, str]:
    if a_value is None or b_value is None:
        return {str(k): v.to_text() for k, v in solution.assignments.items()}
    subs = {_a: sp.Rational(a_value), _b: sp.Rational(b_value)}
    out = {}
    for k, v in sorted(solution.assignments.items(), key=lambda kv: str(kv[0])):
        out[str(k)] = sp.sstr(sp.cancel(v.sym.subs(subs)))
    return out


def _config_dict(a_value, b_value, grids) -> Dict[str, object]:
    return {
        "a": None if a_value is None else str(sp.Rational(a_value)),
        "b": None if b_value is None else str(sp.Rational(b_value)),
        "grids": list(grids) if grids else [],
        "m": "1",
        "hbar": "1",
    }


@functools.lru_cache(maxsize=None)
def intrinsic_dirac_table() -> DiracTable:
    cs = intrinsic_system()
    return mech.build_dirac_table(
        cs, [_th, _ph, SYM.p_theta, SYM.p_phi], hamiltonian=cs.H_c
    )


@functools.lru_cache(maxsize=None)
def cartesian_dirac_table() -> DiracTable:
    cs = cartesian_system()
    return mech.build_dirac_table(
        cs,
        [SYM.x, SYM.y, SYM.z, SYM.p_x, SYM.p_y, SYM.p_z],
        hamiltonian=cs.H_c,
    )


@functools.lru_cache(maxsize=None)
def _intrinsic_quantum():
    """Momenta, commutators, the parameter solve and its byproducts."""
    H = hamiltonian_family()
    p_th, p_ph = intrinsic_momentum_operators(H)
    rho = _a + _b * sp.sin(_th)
    comm_pth = qz.commutator(p_th, H)
    comm_pph = qz.commutator(p_ph, H)
    # i*hbar {p_theta, H}_D with the commuting theta-function on the left
    dirac_rhs = qz.compose(p_ph, p_ph).scale(
        _I * _hb * _b * sp.cos(_th) / (_m * rho**3)
    )
    residual = comm_pth - dirac_rhs
    solution = qz.solve_parameters(residual, [SYM.alpha, SYM.beta])
    anomaly = residual.substitute({SYM.alpha: 1, SYM.beta: 1})
    return (p_th, p_ph, comm_pth, comm_pph, dirac_rhs, residual, solution,
            anomaly)


@functools.lru_cache(maxsize=None)
def _extrinsic_quantum():
    """Geometric momenta, the three family residuals and the pooled solve."""
    H = hamiltonian_family()
    geom = torus_geometry()
    momenta_ops = geometric_momentum_operators(H)
    L_z = angular_momentum_z()
    w_plus, w_minus = ordering_atoms()
    weights = (SYM.alpha1, SYM.alpha2, SYM.alpha3, SYM.alpha4, SYM.alpha5)
    residuals = []
    commutators = {}
    for name, f_i, p_i in zip("xyz", geom.surface_offsets, momenta_ops):
        lhs = qz.commutator(p_i, H)
        rhs = qz.build_ordering_family(f_i, L_z, w_plus, w_minus, H, weights)
        residuals.append(lhs - rhs)
        commutators["[p_%s,H]" % name] = lhs
    solution = qz.solve_parameters(
        residuals,
        [SYM.alpha, SYM.beta, *weights],
        constraints=[sum(weights) - 1],
    )
    return momenta_ops, commutators, tuple(residuals), solution


@functools.lru_cache(maxsize=None)
def two_term_residuals() -> Tuple[DiffOp, DiffOp, DiffOp]:
    """[p_i, H] minus the parameter-free two-term ordering, at alpha=beta=1."""
    H = hamiltonian_family()
    geom = torus_geometry()
    L_z = angular_momentum_z()
    w_plus, w_minus = ordering_atoms()
    at_one = {SYM.alpha: 1, SYM.beta: 1}
    out = []
    for f_i, p_i in zip(geom.surface_offsets, geometric_momentum_operators(H)):
        rhs = qz.build_ordering_family(f_i, L_z, w_plus, w_minus, H, None)
        out.append((qz.commutator(p_i, H) - rhs).substitute(at_one))
    return tuple(out)


def intrinsic_scenario(
    a_value=None, b_value=None, grids: Sequence[int] = ()
) -> ScenarioReport:
    """Full angular-chart pipeline ending in the self-inconsistency verdict."""
    if a_value is not None and b_value is not None:
        assert_positive_profile(float(a_value), float(b_value))
    cs = intrinsic_system()
    table = intrinsic_dirac_table()
    H = hamiltonian_family()
    (p_th, p_ph, comm_pth, comm_pph, _dirac_rhs, residual, solution,
     anomaly) = _intrinsic_quantum()

    alpha_sol = solution.assignments.get(SYM.alpha, Expr(0))
    M, K = _closed_form_curvatures()
    implied_potential = Expr(-(_hb**2) / (2 * _m)) * alpha_sol * (M * M - K)
    inconsistent = solution.status == "UNIQUE" and not alpha_sol.is_zero
    verdict = VERDICT_INTRINSIC if inconsistent else VERDICT_EXTRINSIC

    momenta = {"p_theta": p_th, "p_phi": p_ph}
    classical = {
        "lagrangian": cs.lagrangian.to_text(),
        "primary_hamiltonian": cs.H_p.to_text(),
        "reduced_hamiltonian": cs.H_c.to_text(),
        "constraint_chain": _chain_serial(cs.chain),
        "constraint_matrix_inverse": _matrix_serial(cs.C_inv),
        "dirac_table": table.to_serializable(),
    }
    quantum = {
        "momenta": {k: v.to_serializable() for k, v in momenta.items()},
        "commutators": {
            "[p_theta,H]": comm_pth.to_serializable(),
            "[p_phi,H]": comm_pph.to_serializable(),
        },
        "anomaly_at_alpha_beta_1": anomaly.to_serializable(),
        "implied_potential": implied_potential.to_text(),
    }
    config = _config_dict(a_value, b_value, grids)
    report = ScenarioReport(
        scenario=SCENARIO_INTRINSIC,
        config=config,
        classical=classical,
        quantum=quantum,
        solution=solution,
        verdict=verdict,
        system=cs,
        table=table,
        hamiltonian=H,
        momenta=momenta,
        extras={
            "residual_family": residual,
            "anomaly_at_alpha_beta_1": anomaly,
            "implied_potential": implied_potential,
        },
    )
    report.quantum["assignments_numeric"] = _substituted_assignments(
        solution, a_value, b_value
    )
    return report


def extrinsic_scenario(
    a_value=None, b_value=None, grids: Sequence[int] = ()
) -> ScenarioReport:
    """Full embedded pipeline ending in the consistency verdict."""
    if a_value is not None and b_value is not None:
        assert_positive_profile(float(a_value), float(b_value))
    cs = cartesian_system()
    table = cartesian_dirac_table()
    H = hamiltonian_family()
    momenta_ops, comm_ops, residuals, solution = _extrinsic_quantum()
    commutators = {name: op.to_serializable() for name, op in comm_ops.items()}

    consistent = (
        solution.status in ("UNIQUE", "FAMILY")
        and solution.assignments.get(SYM.alpha) == Expr(1)
        and solution.assignments.get(SYM.beta) == Expr(1)
    )
    verdict = VERDICT_EXTRINSIC if consistent else VERDICT_INTRINSIC

    momenta = dict(zip(("p_x", "p_y", "p_z"), momenta_ops))
    classical = {
        "lagrangian": cs.lagrangian.to_text(),
        "primary_hamiltonian": cs.H_p.to_text(),
        "reduced_hamiltonian": cs.H_c.to_text(),
        "constraint_chain": _chain_serial(cs.chain),
        "constraint_matrix_inverse": _matrix_serial(cs.C_inv),
        "dirac_table": table.to_serializable(),
    }
    quantum = {
        "momenta": {k: v.to_serializable() for k, v in momenta.items()},
        "commutators": commutators,
    }
    config = _config_dict(a_value, b_value, grids)
    report = ScenarioReport(
        scenario=SCENARIO_EXTRINSIC,
        config=config,
        classical=classical,
        quantum=quantum,
        solution=solution,
        verdict=verdict,
        system=cs,
        table=table,
        hamiltonian=H,
        momenta=momenta,
        extras={"residual_family": residuals},
    )
    report.quantum["assignments_numeric"] = _substituted_assignments(
        solution, a_value, b_value
    )
    return report
