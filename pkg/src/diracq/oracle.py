"""Independent numeric verification by Fourier pseudospectral collocation.

Every differential operator becomes a dense matrix on a uniform
(theta, phi) grid via exact spectral differentiation of trigonometric
interpolants composed with pointwise coefficient multiplication.  Residual
norms are operator 2-norms restricted to the band-limited subspace
|mode| <= N/4 per axis (the standard aliasing guard), normalized by
the norm of the expected operator plus one.  Hermiticity is measured in
the similarity frame of the area measure b(a + b*sin(theta)).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from . import symcore
from .errors import HalfPhaseResidue, PoleOnGrid
from .quantize import DiffOp
from .symcore import SYM, Expr

__all__ = [
    "Grid",
    "IdentityCheck",
    "OpMatrix",
    "commutator_residual",
    "convergence_sweep",
    "discretize",
    "hermiticity_defect",
    "run_identity",
]

_CONVERGENCE_FLOOR = 1e-12  # machine-zero identities cannot shrink tenfold


def _spectral_diffmat(N: int, order: int) -> np.ndarray:
    """Dense differentiation matrix of given order on 2*pi-periodic nodes."""
    if order == 0:
        return np.eye(N)
    k = np.fft.fftfreq(N, d=1.0 / N)
    if order % 2 == 1:
        k = k.copy()
        k[N // 2] = 0.0  # Nyquist mode has no odd-derivative representation
    mult = (1j * k) ** order
    mat = np.fft.ifft(mult[:, None] * np.fft.fft(np.eye(N), axis=0), axis=0)
    return np.ascontiguousarray(mat.real)


class Grid:
    """Even collocation grid with numeric radii and quadrature weights."""

    def __init__(self, N: int, a: float, b: float, m: float = 1.0,
                 hbar: float = 1.0):
        if N < 8 or N % 2:
            raise ValueError("N must be even and at least 8")
        if not (a > b > 0):
            raise ValueError("require a > b > 0")
        self.N = int(N)
        self.a, self.b, self.m, self.hbar = float(a), float(b), float(m), float(hbar)
        self.theta = 2.0 * np.pi * np.arange(N) / N
        self.phi = 2.0 * np.pi * np.arange(N) / N
        self.theta_mesh, self.phi_mesh = np.meshgrid(self.theta, self.phi,
                                                     indexing="ij")
        # area density b(a + b sin theta); the constant d(theta) d(phi) factor
        # drops out of every similarity transform
        self.weights = self.b * (self.a + self.b * np.sin(self.theta_mesh))
        if np.min(self.a + self.b * np.sin(self.theta)) <= 0:
            raise ValueError("a + b*sin(theta) must stay positive on the grid")
        self._kron_cache: Dict[Tuple[int, int], np.ndarray] = {}
        self._restrict: Optional[np.ndarray] = None

    def substitutions(self) -> Dict[sp.Symbol, sp.Rational]:
        return {
            SYM.a: sp.nsimplify(self.a, rational=True),
            SYM.b: sp.nsimplify(self.b, rational=True),
            SYM.m: sp.nsimplify(self.m, rational=True),
            SYM.hbar: sp.nsimplify(self.hbar, rational=True),
        }

    def derivative_matrix(self, k: int, l: int) -> np.ndarray:
        if (k, l) not in self._kron_cache:
            self._kron_cache[(k, l)] = np.kron(
                _spectral_diffmat(self.N, k), _spectral_diffmat(self.N, l)
            )
        return self._kron_cache[(k, l)]

    @property
    def cutoff(self) -> int:
        return self.N // 4

    def restriction(self) -> np.ndarray:
        """Isometry onto the band-limited subspace |mode| <= N/4 per axis."""
        if self._restrict is None:
            modes = np.arange(-self.cutoff, self.cutoff + 1)
            basis = np.exp(1j * np.outer(self.theta, modes)) / np.sqrt(self.N)
            self._restrict = np.kron(basis, basis)
        return self._restrict


class OpMatrix:
    """A DiffOp discretized on a grid."""

    def __init__(self, grid: Grid, mat: np.ndarray):
        self.grid = grid
        self.mat = mat

    def __matmul__(self, other):
        if isinstance(other, OpMatrix):
            return OpMatrix(self.grid, self.mat @ other.mat)
        return self.mat @ other


def _coefficient_field(coeff: Expr, grid: Grid) -> np.ndarray:
    subs = grid.substitutions()
    bound = symcore.substitute(coeff, subs)
    if symcore.has_half_phase(bound):
        raise HalfPhaseResidue("coefficient carries exp(I*phi/2): %s" % coeff)
    free = bound.free_symbols - {SYM.theta, SYM.phi}
    if free:
        raise ValueError(
            "coefficient has unbound symbols %s; substitute parameters first"
            % sorted(map(str, free))
        )
    num_f = sp.lambdify((SYM.theta, SYM.phi), symcore._from_core(bound.num), "numpy")
    den_f = sp.lambdify((SYM.theta, SYM.phi), symcore._from_core(bound.den), "numpy")
    num = np.asarray(num_f(grid.theta_mesh, grid.phi_mesh), dtype=complex)
    den = np.asarray(den_f(grid.theta_mesh, grid.phi_mesh), dtype=complex)
    num = np.broadcast_to(num, grid.theta_mesh.shape).copy()
    den = np.broadcast_to(den, grid.theta_mesh.shape).copy()
    scale = np.max(np.abs(den))
    if scale == 0 or np.min(np.abs(den)) < 1e-9 * scale:
        raise PoleOnGrid("coefficient denominator vanishes on the grid: %s" % coeff)
    return num / den


def discretize(D: DiffOp, grid: Grid) -> OpMatrix:
    """Spectral matrices composed with diagonal coefficients, term-summed."""
    n2 = grid.N * grid.N
    total = np.zeros((n2, n2), dtype=complex)
    for (k, l), coeff in sorted(D.terms.items()):
        field_vals = _coefficient_field(coeff, grid).reshape(-1)
        total += field_vals[:, None] * grid.derivative_matrix(k, l)
    return OpMatrix(grid, total)


def _restricted_norm(mat: np.ndarray, grid: Grid) -> float:
    R = grid.restriction()
    return float(np.linalg.norm(R.conj().T @ (mat @ R), 2))


def commutator_residual(A: OpMatrix, B: OpMatrix, expected: Optional[OpMatrix],
                        grid: Grid) -> float:
    """Band-limited operator-norm of (AB - BA) - expected, normalized."""
    R = grid.restriction()
    AB_R = A.mat @ (B.mat @ R)
    BA_R = B.mat @ (A.mat @ R)
    if expected is None:
        resid = AB_R - BA_R
        norm_expected = 0.0
    else:
        resid = AB_R - BA_R - expected.mat @ R
        norm_expected = _restricted_norm(expected.mat, grid)
    value = float(np.linalg.norm(R.conj().T @ resid, 2))
    return value / (norm_expected + 1.0)


def hermiticity_defect(D: DiffOp, grid: Grid) -> float:
    """Deviation from self-adjointness under the area-measure weight.

    The similarity W^(1/2) D W^(-1/2) is carried out exactly in the
    operator algebra (the measure compensators cancel symbolically there);
    discretizing the conjugated operator and measuring its plain
    Hermiticity defect on the band-limited subspace then avoids the
    aliasing floor a pointwise-diagonal conjugation would introduce.
    """
    from . import quantize as qz

    w_half = Expr(sp.sqrt(SYM.b * (SYM.a + SYM.b * sp.sin(SYM.theta))))
    conjugated = qz.compose(
        DiffOp.multiplication(w_half),
        qz.compose(D, DiffOp.multiplication(Expr(1) / w_half)),
    )
    T = discretize(conjugated, grid).mat
    return _restricted_norm(T - T.conj().T, grid)


# ---------------------------------------------------------------------------
# named identities and sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IdentityCheck:
    """One verifiable statement: a commutator against its expected operator,
    or the Hermiticity of a single operator."""

    name: str
    kind: str  # "commutator" | "hermiticity"
    left: DiffOp = None
    right: DiffOp = None
    expected: DiffOp = None  # None means the commutator itself must vanish
    operator: DiffOp = None  # hermiticity target
    symbolically_zero: bool = True  # False marks a deliberate witness


def run_identity(check: IdentityCheck, grid: Grid) -> float:
    if check.kind == "hermiticity":
        return hermiticity_defect(check.operator, grid)
    A = discretize(check.left, grid)
    B = discretize(check.right, grid)
    expected = None if check.expected is None else discretize(check.expected, grid)
    return commutator_residual(A, B, expected, grid)


def convergence_sweep(
    check: IdentityCheck,
    Ns: Sequence[int],
    a: float,
    b: float,
    m: float = 1.0,
    hbar: float = 1.0,
) -> Tuple[List[Dict[str, object]], bool]:
    """Residuals across grids plus a non-convergence flag.

    The flag fires when a symbolically-zero identity neither decreased
    tenfold from the coarsest to the finest grid nor reached the machine
    floor; deliberate witnesses are never flagged.
    """
    Ns = list(Ns)
    if any(n % 2 or n < 8 for n in Ns) or sorted(Ns) != Ns:
        raise ValueError("grid sizes must be even, >= 8 and increasing")
    rows = []
    for n in Ns:
        grid = Grid(n, a, b, m, hbar)
        rows.append({"identity": check.name, "N": n,
                     "residual": run_identity(check, grid)})
    flagged = False
    if check.symbolically_zero and len(rows) >= 2:
        first, last = rows[0]["residual"], rows[-1]["residual"]
        if last > _CONVERGENCE_FLOOR and last > first / 10.0:
            flagged = True
    return rows, flagged


# ---------------------------------------------------------------------------
# scenario suites
# ---------------------------------------------------------------------------

def _exp_i(angle: sp.Symbol) -> Expr:
    return Expr(sp.cos(angle) + sp.I * sp.sin(angle))


@functools.lru_cache(maxsize=None)
def intrinsic_identity_suite() -> Tuple[IdentityCheck, ...]:
    """Identities characterizing the angular-chart quantization."""
    from . import models, quantize as qz

    th = SYM.theta
    a, b, m, hb = SYM.a, SYM.b, SYM.m, SYM.hbar
    rho = a + b * sp.sin(th)
    H = models.hamiltonian_family()
    H11 = H.substitute({SYM.alpha: 1, SYM.beta: 1})
    sol = Expr((a**2 - b**2) / a**2)
    Hsol = H.substitute({SYM.alpha: sol, SYM.beta: sol})
    p_th, p_ph = models.intrinsic_momentum_operators(H)
    dirac_rhs = qz.compose(p_ph, p_ph).scale(sp.I * hb * b * sp.cos(th) / (m * rho**3))
    anomaly11 = (qz.commutator(p_th, H) - dirac_rhs).substitute(
        {SYM.alpha: 1, SYM.beta: 1}
    )
    checks = [
        IdentityCheck("[p_phi,H(1,1)] = 0", "commutator", left=p_ph, right=H11),
        IdentityCheck(
            "[p_theta,H(1,1)] = ihbar*{p_theta,H}_D + anomaly",
            "commutator", left=p_th, right=H11, expected=dirac_rhs + anomaly11,
        ),
        IdentityCheck(
            "[p_theta,H(solved)] = ihbar*{p_theta,H}_D",
            "commutator", left=p_th, right=Hsol, expected=dirac_rhs,
        ),
        IdentityCheck(
            "[exp(i*theta),H(1,1)] periodic surrogate",
            "commutator",
            left=DiffOp.multiplication(_exp_i(th)), right=H11,
            expected=qz.commutator(DiffOp.multiplication(_exp_i(th)), H11),
        ),
        IdentityCheck(
            "[exp(i*phi),H(1,1)] periodic surrogate",
            "commutator",
            left=DiffOp.multiplication(_exp_i(SYM.phi)), right=H11,
            expected=qz.commutator(DiffOp.multiplication(_exp_i(SYM.phi)), H11),
        ),
        IdentityCheck(
            "multiplication operators commute",
            "commutator",
            left=DiffOp.multiplication(Expr(sp.sin(th))),
            right=DiffOp.multiplication(Expr(sp.cos(SYM.phi) * rho)),
        ),
        IdentityCheck("p_theta is Hermitian under the area measure",
                      "hermiticity", operator=p_th),
        IdentityCheck(
            "compensator-deleted p_theta is not Hermitian (control)",
            "hermiticity", operator=DiffOp.derivative(1, 0, -sp.I * hb),
            symbolically_zero=False,
        ),
        IdentityCheck(
            "[p_theta,H(1,1)] vs ihbar*{p_theta,H}_D (inconsistency witness)",
            "commutator", left=p_th, right=H11, expected=dirac_rhs,
            symbolically_zero=False,
        ),
    ]
    return tuple(checks)


@functools.lru_cache(maxsize=None)
def extrinsic_identity_suite() -> Tuple[IdentityCheck, ...]:
    """Identities characterizing the embedded quantization."""
    from . import models, quantize as qz

    a, b, hb = SYM.a, SYM.b, SYM.hbar
    geom = models.torus_geometry()
    H = models.hamiltonian_family()
    H11 = H.substitute({SYM.alpha: 1, SYM.beta: 1})
    momenta = models.geometric_momentum_operators(H)
    p_x, p_y, p_z = momenta
    f = geom.surface_offsets
    positions = [DiffOp.multiplication(e) for e in geom.embedding]
    L_z = models.angular_momentum_z()
    w_plus, w_minus = models.ordering_atoms()
    rho3 = Expr((a + b * sp.sin(SYM.theta)) ** 3)

    def pp_expected(i: int, j: int) -> DiffOp:
        g = [geom.embedding[1], -geom.embedding[0], Expr(0)]
        blocks = []
        for k in (j, i):
            sym = qz.hermitize_pair(DiffOp.multiplication(g[k]), L_z)
            blocks.append(momenta[k] + sym.scale((Expr(a) / rho3).sym))
        lhs = qz.compose(DiffOp.multiplication(f[i]), blocks[0])
        rhs = qz.compose(DiffOp.multiplication(f[j]), blocks[1])
        return (lhs - rhs).scale(-sp.I * hb / b**2)

    solved = {SYM.alpha1: sp.Rational(11, 9), SYM.alpha2: sp.Rational(-1, 9),
              SYM.alpha3: sp.Rational(-1, 9), SYM.alpha4: 0, SYM.alpha5: 0}
    family_z = qz.build_ordering_family(
        f[2], L_z, w_plus, w_minus, H,
        [solved[s] for s in (SYM.alpha1, SYM.alpha2, SYM.alpha3, SYM.alpha4,
                             SYM.alpha5)],
    ).substitute({SYM.alpha: 1, SYM.beta: 1})
    simple_x = qz.build_ordering_family(
        f[0], L_z, w_plus, w_minus, H, None
    ).substitute({SYM.alpha: 1, SYM.beta: 1})
    uniform_z = qz.build_ordering_family(
        f[2], L_z, w_plus, w_minus, H, [sp.Rational(1, 5)] * 5
    ).substitute({SYM.alpha: 1, SYM.beta: 1})

    checks = [
        IdentityCheck(
            "[x,p_x] = ihbar(1 - f_x^2/b^2)",
            "commutator", left=positions[0], right=p_x,
            expected=DiffOp.multiplication(
                Expr(sp.I * hb) * (Expr(1) - f[0] * f[0] / Expr(b**2))
            ),
        ),
        IdentityCheck(
            "[z,p_x] = -ihbar f_z f_x / b^2",
            "commutator", left=positions[2], right=p_x,
            expected=DiffOp.multiplication(
                Expr(-sp.I * hb) * f[2] * f[0] / Expr(b**2)
            ),
        ),
        IdentityCheck(
            "[p_x,p_y] matches the symmetric-ordered bracket",
            "commutator", left=p_x, right=p_y, expected=pp_expected(0, 1),
        ),
        IdentityCheck(
            "[p_y,p_z] matches the symmetric-ordered bracket",
            "commutator", left=p_y, right=p_z, expected=pp_expected(1, 2),
        ),
        IdentityCheck(
            "[p_z,H(1,1)] matches the five-term ordering at the solution",
            "commutator", left=p_z, right=H11, expected=family_z,
        ),
        IdentityCheck(
            "[p_x,H(1,1)] matches the two-term ordering",
            "commutator", left=p_x, right=H11, expected=simple_x,
        ),
        IdentityCheck("p_x is Hermitian under the area measure",
                      "hermiticity", operator=p_x),
        IdentityCheck("p_y is Hermitian under the area measure",
                      "hermiticity", operator=p_y),
        IdentityCheck("p_z is Hermitian under the area measure",
                      "hermiticity", operator=p_z),
        IdentityCheck(
            "[p_z,H(1,1)] vs uniform ordering weights (control)",
            "commutator", left=p_z, right=H11, expected=uniform_z,
            symbolically_zero=False,
        ),
    ]
    return tuple(checks)


def suite_for(scenario: str) -> Tuple[IdentityCheck, ...]:
    if scenario == "torus-intrinsic":
        return intrinsic_identity_suite()
    if scenario == "torus-extrinsic":
        return extrinsic_identity_suite()
    raise ValueError("unknown scenario %r" % (scenario,))


def run_suite(
    scenario: str,
    grids: Sequence[int],
    a: float,
    b: float,
    m: float = 1.0,
    hbar: float = 1.0,
) -> Dict[str, object]:
    """Run the scenario's identity suite; shape matches the report schema.

    Symbolically-zero identities run on the finest grid; witnesses and
    controls sweep every grid to exhibit their plateau.  Hermiticity
    defects are reported on every grid.
    """
    grids = sorted(set(int(n) for n in grids))
    if not grids:
        return {"identities": [], "hermiticity": [], "convergence_flags": {}}
    suite = suite_for(scenario)
    n_max = grids[-1]
    identities: List[Dict[str, object]] = []
    hermiticity: List[Dict[str, object]] = []
    flags: Dict[str, bool] = {}
    n_herm = 32 if 32 in grids else n_max
    for check in suite:
        if check.kind == "hermiticity":
            hermiticity.append({
                "identity": check.name, "N": n_herm,
                "defect": run_identity(check, Grid(n_herm, a, b, m, hbar)),
                "symbolically_zero": check.symbolically_zero,
            })
        elif check.symbolically_zero:
            grid = Grid(n_max, a, b, m, hbar)
            identities.append({
                "identity": check.name, "N": n_max,
                "residual": run_identity(check, grid),
                "symbolically_zero": True,
            })
        else:
            rows, flagged = convergence_sweep(check, grids, a, b, m, hbar)
            for row in rows:
                row["symbolically_zero"] = False
                identities.append(row)
            flags[check.name] = flagged
    return {"identities": identities, "hermiticity": hermiticity,
            "convergence_flags": flags}
