import csv
from dataclasses import replace

import numpy as np
import pytest

from rdut import (
    Constant,
    DomainError,
    Infeasible,
    Lognormal,
    RDUTProblem,
    UtilityFunction,
    WeightingFunction,
    build_phi,
    concave_envelope,
    diagnose,
    solve,
    solve_eut,
    transformed_kernel,
)
from rdut.eut_link import eut_from_rdut, rdut_from_eut, write_atoms_csv, write_rho_tilde_csv
from rdut.solver import optimal_wealth

from conftest import CRRA2, FIXTURES, LN, TK


def _kernel_of(p):
    return transformed_kernel(concave_envelope(build_phi(p.kernel, p.weighting, p.n, p.refine_ends)))


class TestTransformedKernel:
    def test_constant_kernel_is_one_atom(self):
        t = _kernel_of(FIXTURES["constant"])
        assert len(t.atoms) == 1
        value, mass = t.atoms[0]
        assert value == pytest.approx(2.0, rel=1e-14)
        assert mass == 1.0

    def test_identity_weighting_reproduces_the_kernel(self):
        t = _kernel_of(FIXTURES["merton"])
        assert t.is_atomless
        p = np.linspace(0.02, 0.98, 49)
        np.testing.assert_allclose(t.quantile(p), LN.quantile(p), rtol=1e-3)

    def test_tk_has_a_single_top_atom(self):
        t = _kernel_of(FIXTURES["tk"])
        assert len(t.atoms) == 1
        value, mass = t.atoms[0]
        # the atom is the flat part of delta' on [0, x_hat): the largest values of rho_tilde
        assert value == t.values.max()
        assert 0.76 < mass < 0.77
        assert t.quantile(0.5) == value

    def test_values_ascend(self, fixture_problem):
        t = _kernel_of(fixture_problem)
        assert np.all(np.diff(t.values) >= 0)
        assert t.masses.sum() == pytest.approx(1.0, abs=1e-15)

    def test_mean_is_conserved(self, fixture_problem):
        t = _kernel_of(fixture_problem)
        assert abs(t.mean() - fixture_problem.kernel.mean()) <= 1e-10

    def test_quantile_domain(self):
        with pytest.raises(DomainError):
            _kernel_of(FIXTURES["tk"]).quantile(1.0)

    def test_realize_is_comonotone(self):
        t = _kernel_of(FIXTURES["tk"])
        rho = np.sort(LN.sample(2000, seed=3))
        r = t.realize(rho, LN)
        assert np.all(np.diff(r) >= 0)

    @pytest.mark.parametrize("name", sorted(FIXTURES))
    def test_independent_of_utility(self, name):
        p = FIXTURES[name]
        ref = _kernel_of(replace(p, utility=UtilityFunction.log()))
        for u in (UtilityFunction.crra(0.5), UtilityFunction.crra(2.0)):
            t = _kernel_of(replace(p, utility=u))
            assert np.array_equal(t.values, ref.values)
            assert np.array_equal(t.masses, ref.masses)


class TestEquivalence:
    def test_sup_distance(self, fixture_problem):
        s = solve(fixture_problem)
        e = solve_eut(fixture_problem.utility, transformed_kernel(s.envelope), fixture_problem.x0)
        assert np.max(np.abs(s.q_cells - e.wealth_cells)) <= 1e-9
        assert abs(e.budget_residual) <= 1e-8 * fixture_problem.x0
        assert e.objective_value == pytest.approx(s.objective_value, rel=1e-9)

    @pytest.mark.parametrize("name", ["prelec", "tk_log"])
    def test_relative_distance_with_full_end_refinement(self, name):
        # infinite w'(0+) makes Q* in the top cells huge (1e9 and beyond); compare relatively
        p = replace(FIXTURES[name], refine_ends=32)
        s = solve(p)
        e = solve_eut(p.utility, transformed_kernel(s.envelope), p.x0)
        rel = np.abs(s.q_cells - e.wealth_cells) / s.q_cells
        assert rel.max() <= 1e-9

    def test_eut_from_rdut(self, fixture_problem):
        s = solve(fixture_problem)
        e = eut_from_rdut(s)
        assert abs(e.budget_residual) <= 1e-8 * fixture_problem.x0
        assert e.objective_value == pytest.approx(s.objective_value, rel=1e-12)
        assert np.array_equal(e.wealth_cells, s.q_cells)

    def test_rdut_from_eut_matches_optimal_wealth(self):
        p = FIXTURES["tk"]
        s = solve(p)
        e = solve_eut(p.utility, transformed_kernel(s.envelope), p.x0)
        rho = LN.sample(5000, seed=9)
        np.testing.assert_allclose(rdut_from_eut(e, p.weighting, p.kernel, rho), optimal_wealth(s, rho),
                                   rtol=1e-9)

    def test_wealth_accessors(self):
        p = FIXTURES["merton"]
        e = solve_eut(p.utility, _kernel_of(p), p.x0)
        assert e.wealth_nodes.size == e.nodes.size
        assert e.wealth_quantile(0.0) == e.wealth_cells[0]

    def test_infeasible_budget(self):
        with pytest.raises(Infeasible):
            solve_eut(CRRA2, _kernel_of(FIXTURES["tk"]), 0.0)


class TestDiagnose:
    def test_negative_budget(self):
        d = diagnose(replace(FIXTURES["tk"], x0=-1.0))
        assert not d.feasible and not d.well_posed

    def test_zero_budget_is_degenerate(self):
        d = diagnose(replace(FIXTURES["tk"], x0=0.0))
        assert d.feasible and d.degenerate and d.unique

    def test_tk_reports_atom(self):
        d = diagnose(FIXTURES["tk"])
        assert d.feasible and d.well_posed and d.attainable and d.unique
        assert any("atom" in n for n in d.notes)
        assert d.lambda_star == pytest.approx(solve(FIXTURES["tk"]).lambda_star, rel=1e-9)

    def test_merton_is_clean(self):
        d = diagnose(FIXTURES["merton"])
        assert d.to_dict()["notes"] == []
        assert d.to_dict()["well_posed"] is True


def test_csv_writers(tmp_path):
    t = _kernel_of(FIXTURES["tk"])
    write_rho_tilde_csv(tmp_path / "r.csv", t)
    write_atoms_csv(tmp_path / "a.csv", t)
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["p", "quantile"]
    assert len(rows) - 1 == t.values.size
    assert float(rows[1][0]) == 0.0
    atoms = list(csv.reader(open(tmp_path / "a.csv")))
    assert atoms[0] == ["value", "mass"] and len(atoms) == 2


def test_constant_kernel_with_tk_still_matches():
    p = RDUTProblem(1.0, CRRA2, TK, Constant(1.3), n=512)
    s = solve(p)
    e = solve_eut(p.utility, transformed_kernel(s.envelope), p.x0)
    assert np.max(np.abs(s.q_cells - e.wealth_cells)) <= 1e-9


@pytest.mark.parametrize("k, atomless", [(0.7, True), (2.0, False)])
def test_power_weighting(k, atomless):
    # for w(p) = p^k, phi' = F^{-1}(p) p^{1-k} / k with p = w^{-1}(1 - x): decreasing
    # in x when k < 1, blowing up near x = 1 when k > 1
    p = RDUTProblem(1.0, CRRA2, WeightingFunction.power(k), Lognormal(0.0, 0.4), n=512)
    assert _kernel_of(p).is_atomless is atomless
