import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from resched.audit import audit_instance, certificate
from resched.experiments import fuzz_instance
from resched.lp import (TIGHT_FAMILIES, UnboundedError, build_dual, build_primal, build_primal_lp,
                        check_against_primal, check_identities, check_primal_point, dual_objective, export_lp,
                        lp_text, read_lp, simplex_max, solve_primal_exact, verify_dual)
from resched.lp.lpformat import LPParseError
from resched.mimic import extract_partition, run_disc


def normalized_lp(gamma, M, K):
    Q = K * M + M - 1
    d = (2 + gamma) ** (1 / M)
    return build_primal_lp(Q, M, [d ** q for q in range(-1, Q + 1)])


def partition_for(problem, seed, index, M, beta=None):
    inst = fuzz_instance(problem, seed, index, max_jobs=5)
    res = run_disc(inst, M, beta or 1 / M)
    return inst, res, extract_partition(inst, res.grid, traces=res.traces)


# -- primal ----------------------------------------------------------------

def test_family_counts_m1_k1():
    lp = normalized_lp(1.0, 1, 1)
    assert lp.Q == 1
    assert lp.counts() == {"opt_rel": 1, "weight_rel_1": 1, "weight_rel_2": 1, "mix": 1,
                           "weight_rel_last": 3, "weight_rel_easy_1": 3, "weight_rel_easy_2": 3}


@pytest.mark.parametrize("M,K", [(1, 3), (2, 2), (3, 1), (4, 2)])
def test_family_counts_general(M, K):
    lp = normalized_lp(0.5, M, K)
    Q = K * M + M - 1
    tri = (Q + 1) * (Q + 2) // 2
    assert lp.counts() == {"opt_rel": M, "weight_rel_1": Q - M + 1, "weight_rel_2": M,
                           "mix": Q * (Q + 1) // 2, "weight_rel_last": tri,
                           "weight_rel_easy_1": tri, "weight_rel_easy_2": tri}
    assert lp.shape[1] == 4 * tri


def test_zero_completion_phase_rejected():
    with pytest.raises(ValueError, match="K must be >= 1"):
        build_primal_lp(0, 1, [1.0, 1.0])


def test_objective_coefficients():
    lp = normalized_lp(1.0, 1, 2)
    assert lp.c[lp.index["gF", 2, 1]] == 1
    assert lp.c[lp.index["wS", 2, 1]] == 0
    assert lp.c[lp.index["gS", 1, 0]] == 0
    assert lp.c[lp.index["wF", 2, 0]] == lp.eta(2)


def test_row_names():
    lp = normalized_lp(1.0, 1, 1)
    assert "opt_rel_q1" in lp.row_names and "mix_q0_l1" in lp.row_names


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["trp", "darp", "machines"]), st.integers(0, 100_000), st.sampled_from([1, 2, 3]))
def test_extracted_point_is_feasible(problem, index, M):
    inst, res, part = partition_for(problem, 43, index, M)
    lp = build_primal(part, res.grid)
    rep = check_primal_point(part, lp, expected_ratio=res.expected_cost / part.opt_cost)
    assert rep.ok, rep.max_violation
    assert rep.identities_ok


def test_opt_rel_tight_in_last_block():
    _, res, part = partition_for("trp", 47, 2, 1)
    lp = build_primal(part, res.grid)
    x = part.g / part.opt_cost
    assert any(math.isclose(x[q, : q + 1].sum(), 1.0, rel_tol=1e-9) for q in range(lp.Q - lp.M + 1, lp.Q + 1))


def test_corrupted_fresh_weight_flagged():
    _, res, part = partition_for("trp", 53, 1, 2)
    lp = build_primal(part, res.grid)
    wF = part.wF.copy()
    # inflate a fresh weight feeding the last block's stale weight
    wF[lp.Q - lp.M, 0] += part.opt_cost
    rep = check_primal_point(dataclasses.replace(part, wF=wF), lp)
    assert {"weight_rel_1", "weight_rel_2"} & set(rep.violated())


# -- dual ------------------------------------------------------------------

def test_dual_examples_m1_gamma1():
    dual = build_dual(1.0, 1, 3)
    Q = dual.Q
    assert dual.xi[Q] == 4
    for q in range(Q):
        assert dual.B[q, q] == 3
        assert math.isclose(dual.R(q), 3.0, rel_tol=1e-12)
    assert dual.R(Q) == 0


@pytest.mark.parametrize("gamma,M,expected", [(1.0, 1, 4.0), (0.0, 1, 3.0), (1.0, 2, 2 + math.sqrt(3) + 3)])
def test_dual_objective_examples(gamma, M, expected):
    assert math.isclose(dual_objective(build_dual(gamma, M, 2)), expected, rel_tol=1e-12)


@pytest.mark.parametrize("gamma,M,K", [(1.0, 1, 1), (0.0, 3, 2), (0.5, 2, 4), (1.0, 5, 3), (2.5, 4, 2)])
def test_dual_identities(gamma, M, K):
    ids = check_identities(build_dual(gamma, M, K))
    g_min = ids.pop("G_relation_min")
    assert g_min >= -1e-12
    assert max(ids.values()) <= 1e-9, ids


def test_dual_with_instance_scale_etas():
    # any common scale of eta leaves feasibility intact
    gamma, M, K = 0.5, 3, 2
    Q = K * M + M - 1
    d = 2.5 ** (1 / M)
    etas = 7.3 * np.array([d ** q for q in range(-1, Q + 1)])
    rep = verify_dual(build_dual(gamma, M, K, etas))
    assert rep.ok and set(TIGHT_FAMILIES) <= set(rep.tight_families())


def test_perturbed_dual_is_caught_by_both_routes():
    dual = build_dual(1.0, 2, 2)
    B = dual.B.copy()
    B[3, 1] += 1e-3
    bad = dataclasses.replace(dual, B=B)
    assert verify_dual(bad).violations()
    assert not check_against_primal(bad, normalized_lp(1.0, 2, 2))["ok"]


def test_negative_dual_entry_reported():
    dual = build_dual(1.0, 1, 2)
    G = dual.G.copy()
    G[1, 0] = -1.0
    assert verify_dual(dataclasses.replace(dual, G=G)).negative


# -- simplex ---------------------------------------------------------------

def test_simplex_small_example():
    res = simplex_max([3, 2], [[1, 1], [1, 3]], [4, 6])
    assert math.isclose(res.value, 12.0)
    ex = simplex_max([3, 2], [[1, 1], [1, 3]], [4, 6], exact=True)
    assert ex.exact_value == 12


def test_simplex_unbounded():
    with pytest.raises(UnboundedError):
        simplex_max([1, 1], [[1, -1]], [1])


def test_simplex_zero_point_allowed():
    assert simplex_max([-1, -1], [[1, 1]], [1]).value == 0


@pytest.mark.parametrize("gamma,M,K,bound", [(1.0, 1, 1, 4.0), (0.0, 1, 2, 3.0), (0.5, 2, 1, None),
                                             (1.0, 3, 1, None), (0.0, 2, 2, None)])
def test_lp_optimum_matches_scipy_and_dual(gamma, M, K, bound):
    lp = normalized_lp(gamma, M, K)
    ours = solve_primal_exact(lp).value
    ref = linprog(-lp.c, A_ub=lp.A, b_ub=lp.b, bounds=(0, None), method="highs")
    assert ref.status == 0
    assert math.isclose(ours, -ref.fun, rel_tol=1e-7)
    dual = dual_objective(build_dual(gamma, M, K))
    assert ours <= dual + 1e-7
    if bound is not None:
        assert ours <= bound + 1e-7


def test_exact_and_float_simplex_agree():
    lp = normalized_lp(1.0, 2, 1)
    assert math.isclose(solve_primal_exact(lp, exact=True).value, solve_primal_exact(lp, exact=False).value,
                        rel_tol=1e-10)


def test_simplex_size_limit():
    with pytest.raises(ValueError):
        solve_primal_exact(normalized_lp(1.0, 2, 3))


# -- LP files --------------------------------------------------------------

@pytest.mark.parametrize("gamma,M,K", [(1.0, 1, 1), (0.5, 2, 2), (0.0, 3, 1)])
def test_lp_file_round_trip(tmp_path, gamma, M, K):
    lp = normalized_lp(gamma, M, K)
    export_lp(lp, tmp_path / "p.lp")
    parsed = read_lp(tmp_path / "p.lp")
    assert parsed.sense == "max"
    assert parsed.row_names == lp.row_names and parsed.var_names == lp.var_names
    assert np.array_equal(parsed.A, lp.A) and np.array_equal(parsed.b, lp.b) and np.array_equal(parsed.c, lp.c)


def test_lp_text_is_byte_stable():
    assert lp_text(normalized_lp(0.5, 2, 2)) == lp_text(normalized_lp(0.5, 2, 2))


def test_exported_instance_lp_solves_with_scipy(tmp_path):
    for index in range(100):
        inst, res, part = partition_for("machines", 59, index, 2)
        if part.Q <= 6 and part.w.sum() > 0:
            break
    lp = build_primal(part, res.grid)
    export_lp(lp, tmp_path / "i.lp")
    parsed = read_lp(tmp_path / "i.lp")
    ref = linprog(-parsed.c, A_ub=parsed.A, b_ub=parsed.b, bounds=(0, None), method="highs")
    assert math.isclose(-ref.fun, solve_primal_exact(lp).value, rel_tol=1e-6)


def test_lp_reader_errors(tmp_path):
    p = tmp_path / "bad.lp"
    p.write_text("Maximize\n obj: x\nSubject To\n c1: x >= 1\nEnd\n")
    with pytest.raises(LPParseError, match="line 4"):
        read_lp(p)
    p.write_text("Subject To\n c1: x <= 1\nEnd\n")
    with pytest.raises(LPParseError):
        read_lp(p)


# -- audit -----------------------------------------------------------------

def test_certificate_is_cached():
    a = certificate(1.0, 2, 2)
    assert certificate(1.0, 2, 2) is a
    assert certificate(1.0, 2, 3).p_star is None
    assert a.dual_ok and a.reduced_cost_ok and a.p_star is not None


def test_audit_chain_on_random_instance(tmp_path):
    inst = fuzz_instance("trp", 61, 5)
    rep = audit_instance(inst, 1, 1.0, export_path=tmp_path / "a.lp")
    assert rep.ok, rep.violations
    lhs, p_star, dual = rep.chain
    assert dual == pytest.approx(4.0, rel=1e-12)
    assert lhs <= p_star + 1e-7 <= dual + 2e-7
    read_lp(tmp_path / "a.lp")


def test_audit_m3_k2_objective():
    for index in range(200):
        inst = fuzz_instance("trp", 67, index)
        rep = audit_instance(inst, 3, 1 / 3)
        if rep.K == 2:
            break
    else:
        pytest.skip("no instance with K = 2 found")
    assert rep.ok
    assert math.isclose(rep.cert.dual_objective, 3 + sum(3 ** (j / 3) for j in (1, 2, 3)), rel_tol=1e-12)
