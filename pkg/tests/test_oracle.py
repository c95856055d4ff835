"""Pseudospectral collocation: discretization, residual norms, sweeps."""

import numpy as np
import pytest
import sympy as sp

from diracq import models, oracle
from diracq.errors import HalfPhaseResidue, PoleOnGrid
from diracq.quantize import DiffOp
from diracq.symcore import SYM, Expr, eval_numeric

a, b, m, hb = SYM.a, SYM.b, SYM.m, SYM.hbar
th, ph = SYM.theta, SYM.phi
I = sp.I


# ---------------------------------------------------------------------------
# grids and discretization basics
# ---------------------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(ValueError):
        oracle.Grid(7, 2.0, 1.0)
    with pytest.raises(ValueError):
        oracle.Grid(6, 2.0, 1.0)
    with pytest.raises(ValueError):
        oracle.Grid(16, 1.0, 2.0)
    g = oracle.Grid(16, 2.0, 1.0)
    assert np.min(2.0 + np.sin(g.theta)) >= 1.0


def test_spectral_derivative_resolves_modes():
    g = oracle.Grid(16, 2.0, 1.0)
    mat = oracle.discretize(DiffOp.derivative(0, 1), g)
    samples = np.exp(1j * g.phi_mesh).reshape(-1)
    err = np.max(np.abs(mat.mat @ samples - 1j * samples))
    assert err <= 1e-12


def test_momentum_eigenvalues_are_integers():
    g = oracle.Grid(16, 2.0, 1.0)
    mat = oracle.discretize(DiffOp.derivative(0, 1, -I * hb), g)
    eigs = np.linalg.eigvals(mat.mat)
    assert np.max(np.abs(eigs.imag)) < 1e-9
    rounded = np.round(eigs.real)
    assert np.max(np.abs(eigs.real - rounded)) < 1e-9
    assert set(np.unique(rounded.astype(int))) <= set(range(-8, 9))


def test_multiplication_operator_is_diagonal():
    g = oracle.Grid(12, 2.0, 1.0)
    mat = oracle.discretize(DiffOp.multiplication(sp.sin(th)), g).mat
    off = mat - np.diag(np.diag(mat))
    assert np.max(np.abs(off)) == 0.0
    assert np.max(np.abs(np.diag(mat).real - np.sin(g.theta_mesh).reshape(-1))) < 1e-14


def test_derivative_of_constant_vanishes():
    g = oracle.Grid(16, 2.0, 1.0)
    mat = oracle.discretize(DiffOp.derivative(1, 0), g)
    vals = mat.mat @ np.ones(16 * 16)
    assert np.max(np.abs(vals)) < 1e-12


def test_hamiltonian_on_constant_matches_potential():
    H = models.hamiltonian_family().substitute({SYM.alpha: 1, SYM.beta: 1})
    g = oracle.Grid(32, 2.0, 1.0)
    vals = oracle.discretize(H, g).mat @ np.ones(32 * 32, dtype=complex)
    M, K = models.curvatures(models.torus_geometry())
    pot = Expr(-(hb**2) / (2 * m)) * (M * M - K)
    want = np.array([
        eval_numeric(pot, {a: 2, b: 1, m: 1, hb: 1,
                           th: sp.nsimplify(t, rational=True)})
        for t in g.theta
    ])
    want = np.repeat(want, 32)
    rel = np.max(np.abs(vals - want)) / np.max(np.abs(want))
    assert rel <= 1e-10


def test_discretize_rejects_half_phase():
    g = oracle.Grid(12, 2.0, 1.0)
    with pytest.raises(HalfPhaseResidue):
        oracle.discretize(DiffOp.multiplication(sp.exp(I * ph / 2)), g)


def test_discretize_rejects_on_grid_pole():
    g = oracle.Grid(12, 2.0, 1.0)
    with pytest.raises(PoleOnGrid):
        oracle.discretize(DiffOp.multiplication(1 / sp.sin(th)), g)


def test_discretize_rejects_unbound_parameters():
    g = oracle.Grid(12, 2.0, 1.0)
    with pytest.raises(ValueError):
        oracle.discretize(models.hamiltonian_family(), g)


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

def test_pphi_commutes_with_any_parameter_hamiltonian():
    g = oracle.Grid(32, 2.0, 1.0)
    p_ph = DiffOp.derivative(0, 1, -I * hb)
    for av, bv in ((1, 1), (sp.Rational(3, 4), sp.Rational(3, 4)), (2, 0)):
        H = models.hamiltonian_family().substitute({SYM.alpha: av, SYM.beta: bv})
        res = oracle.commutator_residual(
            oracle.discretize(p_ph, g), oracle.discretize(H, g), None, g
        )
        assert res <= 1e-10, (av, bv)


def test_ptheta_identity_with_anomaly_at_48():
    suite = oracle.intrinsic_identity_suite()
    chk = next(c for c in suite if "anomaly" in c.name)
    g = oracle.Grid(48, 2.0, 1.0)
    assert oracle.run_identity(chk, g) <= 1e-9


def test_ptheta_identity_at_solution_at_48():
    suite = oracle.intrinsic_identity_suite()
    chk = next(c for c in suite if "solved" in c.name)
    g = oracle.Grid(48, 2.0, 1.0)
    assert oracle.run_identity(chk, g) <= 1e-9


def test_hermiticity_defects():
    g = oracle.Grid(32, 2.0, 1.0)
    p_th, _ = models.intrinsic_momentum_operators()
    assert oracle.hermiticity_defect(p_th, g) <= 1e-10
    for p_i in models.geometric_momentum_operators():
        assert oracle.hermiticity_defect(p_i, g) <= 1e-10
    stripped = DiffOp.derivative(1, 0, -I * hb)
    assert oracle.hermiticity_defect(stripped, g) > 1e-2


def test_multiplication_commutativity_bound():
    g = oracle.Grid(24, 2.0, 1.0)
    A = oracle.discretize(DiffOp.multiplication(models.torus_geometry().embedding[0]), g)
    B = oracle.discretize(DiffOp.multiplication(models.torus_geometry().embedding[1]), g)
    assert oracle.commutator_residual(A, B, None, g) <= 1e-13


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def test_convergence_sweep_decreasing_identity():
    suite = oracle.intrinsic_identity_suite()
    chk = next(c for c in suite if "anomaly" in c.name)
    rows, flagged = oracle.convergence_sweep(chk, [16, 24, 32], 2.0, 1.0)
    residuals = [row["residual"] for row in rows]
    assert residuals[0] > residuals[1] > residuals[2]
    assert not flagged


def test_convergence_sweep_machine_zero_not_flagged():
    # [p_phi, H] discretizes exactly; the residual sits at machine level
    # for every N and must not be flagged as non-convergent
    suite = oracle.intrinsic_identity_suite()
    chk = next(c for c in suite if "p_phi" in c.name)
    rows, flagged = oracle.convergence_sweep(chk, [16, 24, 32], 2.0, 1.0)
    assert all(row["residual"] <= 1e-12 for row in rows)
    assert not flagged


def test_trivially_zero_position_commutator():
    chk = oracle.IdentityCheck(
        "[x,y] = 0", "commutator",
        left=DiffOp.multiplication(models.torus_geometry().embedding[0]),
        right=DiffOp.multiplication(models.torus_geometry().embedding[1]),
    )
    rows, flagged = oracle.convergence_sweep(chk, [16, 24], 2.0, 1.0)
    assert all(row["residual"] <= 1e-14 for row in rows)
    assert not flagged


def test_witness_plateaus():
    suite = oracle.intrinsic_identity_suite()
    witness = next(c for c in suite if "witness" in c.name)
    rows, flagged = oracle.convergence_sweep(witness, [16, 24, 32, 48], 2.0, 1.0)
    assert all(row["residual"] > 1e-3 for row in rows)
    assert not flagged  # witnesses are exempt from the convergence flag


def test_sweep_validates_grids():
    suite = oracle.intrinsic_identity_suite()
    with pytest.raises(ValueError):
        oracle.convergence_sweep(suite[0], [24, 16], 2.0, 1.0)
    with pytest.raises(ValueError):
        oracle.convergence_sweep(suite[0], [15, 16], 2.0, 1.0)


# ---------------------------------------------------------------------------
# oracle-symbolic agreement across parameter sets
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("a_val,b_val", [(2.0, 1.0), (3.0, 1.0)])
def test_oracle_symbolic_agreement(a_val, b_val):
    """Symbolically-zero identities stay below 1e-9 at N=48; symbolically
    nonzero witnesses stay above 1e-3 (no false inconsistencies)."""
    g = oracle.Grid(48, a_val, b_val)
    for suite in (oracle.intrinsic_identity_suite(),
                  oracle.extrinsic_identity_suite()):
        for chk in suite:
            value = oracle.run_identity(chk, g)
            if chk.kind == "hermiticity":
                if chk.symbolically_zero:
                    assert value <= 1e-9, chk.name
                else:
                    assert value > 1e-2, chk.name
            elif chk.symbolically_zero:
                assert value <= 1e-9, chk.name
            else:
                assert value > 1e-3, chk.name


def test_run_suite_shape(intrinsic_report):
    payload = oracle.run_suite("torus-intrinsic", [16, 24], 2.0, 1.0)
    assert set(payload) == {"identities", "hermiticity", "convergence_flags"}
    assert all(not v for v in payload["convergence_flags"].values())
    zero_rows = [r for r in payload["identities"] if r["symbolically_zero"]]
    assert all(r["N"] == 24 for r in zero_rows)
