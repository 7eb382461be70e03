"""Acceptance criteria, one test each; the summary hook prints a PASS/FAIL line per criterion."""

import math
import time

import pytest

from resched.experiments import DISC_CONFIGS, flaw_value, tightness
from resched.lp import TIGHT_FAMILIES, build_dual, build_primal_lp, check_against_primal, verify_dual
from resched.mimic import disc_bound

pytestmark = pytest.mark.acceptance

BOUND_TOL = 1e-9          # ratio <= bound + 1e-9
CHAIN_TOL = 1e-7          # weak-duality chain slack
DUAL_TOL = 1e-9           # dual feasibility, times the eta scale
OBJECTIVE_RTOL = 1e-12    # dual objective vs closed form
IDENTITY_RTOL = 1e-9      # cost identity and last-block OPT identity
RANDOMIZED_TOL = 1e-5     # one-job expected ratio vs 1 + (alpha-1)/ln(alpha)
FLAW_TOL = 1e-3           # L_{m,v} vs 2 at m = 10^6
FUZZ_RUNTIME = 300.0
DUAL_RUNTIME = 30.0


def _tag(record_property, number, title):
    record_property("criterion", str(number))
    record_property("title", title)


def test_criterion_1_deterministic_bound(fuzz_audits, record_property):
    _tag(record_property, 1, "MIMIC(gamma, 0) ratio <= 3 + gamma on 500 fuzzed instances per family")
    audits, seconds = fuzz_audits
    worst = {}
    for problem, rows in audits.items():
        assert len(rows) >= 500
        for inst, reports in rows:
            ratio = reports[0].mimic_ratio
            assert ratio <= 3 + inst.gamma + BOUND_TOL, (problem, inst, ratio)
            worst[problem] = max(worst.get(problem, 0.0), ratio)
    print(f"max MIMIC ratios {worst}; fuzz + audits took {seconds:.1f} s")
    assert seconds < FUZZ_RUNTIME


def test_criterion_2_disc_bound(fuzz_audits, record_property):
    _tag(record_property, 2, "DISC ratio <= 1 + (1/M) sum_j (2+gamma)^(j/M) for M in 1..3, two betas")
    audits, _ = fuzz_audits
    for problem, rows in audits.items():
        for inst, reports in rows:
            for (M, beta), rep in zip(DISC_CONFIGS, reports):
                assert (rep.M, rep.beta) == (M, beta)
                assert rep.ratio <= disc_bound(inst.gamma, M) + BOUND_TOL, (problem, M, beta, inst)


def test_criterion_3_tightness(record_property):
    _tag(record_property, 3, "lower-bound constructions reach 3 + gamma and 1 + (1+gamma)/ln(2+gamma)")
    one = tightness(1.0, 1e-5)
    zero = tightness(0.0, 1e-5)
    assert one["deterministic_ratio"] >= 3.999
    assert zero["deterministic_ratio"] >= 2.999
    for rep, alpha, printed in ((one, 3.0, 2.8204), (zero, 2.0, 2.4427)):
        closed = 1 + (alpha - 1) / math.log(alpha)
        assert abs(rep["randomized_ratio"] - closed) <= RANDOMIZED_TOL
        assert abs(rep["randomized_ratio"] - printed) <= 1e-4
        assert rep["gap_shrinks"]
    assert one["randomized_ratio"] < 2.821 and zero["randomized_ratio"] < 2.443


def test_criterion_4_dual_feasibility(record_property):
    _tag(record_property, 4, "closed-form dual feasible with the stated tight families over the (gamma, M, K) grid")
    start = time.perf_counter()
    for gamma in (0.0, 0.5, 1.0):
        for M in range(1, 6):
            expected = M + math.fsum((2 + gamma) ** (j / M) for j in range(1, M + 1))
            for K in range(1, 7):
                dual = build_dual(gamma, M, K)
                rep = verify_dual(dual, DUAL_TOL)
                assert not rep.violations() and not rep.negative, (gamma, M, K, rep.violations()[:3])
                assert math.isclose(rep.objective, expected, rel_tol=OBJECTIVE_RTOL), (gamma, M, K)
                assert set(TIGHT_FAMILIES) <= set(rep.tight_families()), (gamma, M, K, rep.tight_families())
                # second route: y^T A >= c against the primal matrix itself
                Q = K * M + M - 1
                delta = (2 + gamma) ** (1 / M)
                lp = build_primal_lp(Q, M, [delta ** q for q in range(-1, Q + 1)])
                cross = check_against_primal(dual, lp, DUAL_TOL)
                assert cross["ok"], (gamma, M, K, cross)
                assert math.isclose(cross["objective"], expected, rel_tol=OBJECTIVE_RTOL)
    assert time.perf_counter() - start < DUAL_RUNTIME


def test_criterion_5_primal_point(fuzz_audits, record_property):
    _tag(record_property, 5, "extracted partitions satisfy every primal family and both cost identities")
    audits, _ = fuzz_audits
    for problem, rows in audits.items():
        for inst, reports in rows:
            for rep in reports:
                where = (problem, rep.M, rep.beta, inst)
                assert rep.primal.ok, (where, rep.primal.max_violation)
                assert rep.identity_gap <= IDENTITY_RTOL, where
                assert rep.primal.opt_identity_error <= IDENTITY_RTOL, where
                assert math.isclose(rep.primal.ratio_from_lp, rep.ratio, rel_tol=IDENTITY_RTOL), where


def test_criterion_6_weak_duality_chain(fuzz_audits, record_property):
    _tag(record_property, 6, "M * E[cost]/OPT <= P* <= dual objective whenever Q <= 6")
    audits, _ = fuzz_audits
    checked = 0
    for problem, rows in audits.items():
        for inst, reports in rows:
            for rep in reports:
                if rep.Q > 6:
                    continue
                lhs, p_star, dual = rep.chain
                assert p_star is not None
                assert lhs <= p_star + CHAIN_TOL, (problem, rep.M, inst)
                assert p_star <= dual + CHAIN_TOL, (problem, rep.M, inst)
                checked += 1
    print(f"chain checked on {checked} (instance, configuration) pairs")
    assert checked > 0


def test_criterion_7_flaw(record_property):
    _tag(record_property, 7, "dial-a-ride lower-bound expression within 1e-3 of 2 at m = 10^6")
    values = {(k, v): flaw_value(10 ** 6, v, k) for k in (1, 2) for v in (0.3, 0.5, 0.9)}
    print("L at m = 10^6:", {key: round(val, 6) for key, val in values.items()})
    far = {key: val for key, val in values.items() if abs(val - 2) > FLAW_TOL}
    assert not far, f"values not within {FLAW_TOL} of 2: {far}"
