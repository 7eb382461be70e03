import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from resched.core import Instance, Job
from resched.experiments import fuzz_instance, one_job_instance, two_job_instance
from resched.mimic import (ConvergenceError, PhaseGrid, TraceError, disc_bound, dump_trace, extract_partition,
                           integrate_piecewise, randomized_expected_cost, run_disc, run_mimic)
from resched.oracle import CompletionSearchError, best_tau_schedule, detect_completion_phase, get_oracle, optimal_offline
from resched.problems import MachinePayload, MachinesEnvironment, MetricSpace, TrpEnvironment, TrpPayload


def single_trp():
    return Instance((Job(0, 1.0, 1.0, TrpPayload(1)),), TrpEnvironment(MetricSpace.line([0, 1])))


# -- oracle ----------------------------------------------------------------

def test_optimal_offline_examples():
    assert optimal_offline(single_trp())[0].total == 1
    eps = 1e-3
    inst = two_job_instance(1.0, eps)
    assert math.isclose(optimal_offline(inst)[0].total, 3 + 2 * eps, rel_tol=1e-12)
    two = Instance((Job(0, 0, 1, MachinePayload((1.0,))), Job(1, 0, 1, MachinePayload((1.0,)))),
                   MachinesEnvironment(1))
    assert optimal_offline(two)[0].total == 3


def test_best_tau_schedule_examples():
    inst = single_trp()
    empty = best_tau_schedule(5.0, [], inst)
    assert empty.completed == frozenset() and empty.value == 0
    # arrived but unreachable within tau
    far = Instance((Job(0, 0.0, 1.0, TrpPayload(1)),), TrpEnvironment(MetricSpace.line([0, 1])))
    res = best_tau_schedule(0.5, None, far)
    assert res.completed == frozenset() and res.value == 0.5
    res = best_tau_schedule(2.0, None, inst)
    assert res.schedule.completions == {0: 1.0} and res.value == 1


def _trp_prize_brute(inst, tau):
    D = inst.environment.metric.matrix
    arrived = [j.id for j in inst.jobs if j.arrival <= tau]
    total = sum(inst.jobs[r].weight for r in arrived)
    best = tau * total
    for k in range(1, len(arrived) + 1):
        for order in itertools.permutations(arrived, k):
            t, pos, cost, w = 0.0, inst.environment.metric.origin, 0.0, 0.0
            for r in order:
                job = inst.jobs[r]
                t = max(t + D[pos, job.payload.location], job.arrival)
                pos = job.payload.location
                cost += job.weight * t
                w += job.weight
            if t < tau:
                best = min(best, cost + tau * (total - w))
    return best


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000), st.floats(0.3, 40.0))
def test_best_tau_schedule_matches_brute_force(index, tau):
    inst = fuzz_instance("trp", 23, index, max_jobs=5)
    if inst.environment.servers != 1:
        return
    res = get_oracle(inst).best_tau_schedule(tau)
    assert math.isclose(res.value, _trp_prize_brute(inst, tau), rel_tol=1e-12, abs_tol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(["trp", "darp", "machines"]), st.integers(0, 100_000), st.floats(0.1, 60.0))
def test_best_tau_schedule_is_argmin_over_table(problem, index, tau):
    inst = fuzz_instance(problem, 29, index, max_jobs=5)
    oracle = get_oracle(inst)
    res = oracle.best_tau_schedule(tau)
    t = oracle.table
    amask = oracle.arrived_mask(tau)
    ok = np.flatnonzero(t.feasible(tau, amask))
    total = sum(j.weight for j in inst.jobs if j.arrival <= tau)
    values = t.cost[ok] + tau * (total - t.mask_weight[ok])
    assert res.value <= values.min() * (1 + 1e-12) + 1e-12
    assert all(c < tau for c in res.schedule.completions.values())
    assert all(inst.jobs[r].arrival <= tau for r in res.completed)


def test_detect_completion_phase_examples():
    inst = single_trp()
    assert detect_completion_phase(inst, PhaseGrid(1.0, 1, 1.0, 1.0)) == 1
    two = two_job_instance(1.0, 1e-3)
    grid = PhaseGrid(1.0, 1, 1.0, two.min_completion())
    K = detect_completion_phase(two, grid)
    assert K == 2
    res = best_tau_schedule(grid.eta(K), None, two)
    assert math.isclose(sum(two.jobs[r].weight * c for r, c in res.schedule.completions.items()),
                        get_oracle(two).opt_cost(), rel_tol=1e-12)
    with pytest.raises(CompletionSearchError):
        detect_completion_phase(two, grid, max_k=1)


# -- MIMIC and DISC --------------------------------------------------------

def test_mimic_single_job_ratio_four():
    tr = run_mimic(single_trp(), 0.0)
    assert tr.phases[1].tau == 3.0
    assert tr.completions == {0: 4.0} and tr.cost.total == 4.0


def test_mimic_two_job_instance():
    eps = 1e-6
    inst = two_job_instance(1.0, eps)
    cost = run_mimic(inst, 0.0).cost.total
    assert cost >= 12 + eps
    assert cost / get_oracle(inst).opt_cost() > 3.9999


def test_mimic_empty_phase():
    # the only job arrives long after tau_1: phase 1's schedule serves nothing
    env = TrpEnvironment(MetricSpace.line([0, 1]))
    inst = Instance((Job(0, 1.0, 1.0, TrpPayload(1)), Job(1, 20.0, 1.0, TrpPayload(1))), env)
    tr = run_mimic(inst, 0.0)
    assert tr.phases[1].fresh == {0: 4.0}
    assert any(not p.fresh for p in tr.phases[2:-1])


def test_mimic_rejects_bad_omega():
    with pytest.raises(ValueError):
        run_mimic(single_trp(), -1.0)
    with pytest.raises(ValueError):
        run_mimic(single_trp(), 0.5)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["trp", "darp", "machines"]), st.integers(0, 100_000))
def test_disc_m1_beta1_is_mimic(problem, index):
    inst = fuzz_instance(problem, 31, index, max_jobs=5)
    assert run_disc(inst, 1, 1.0).expected_cost == run_mimic(inst, 0.0).cost.total


@pytest.mark.parametrize("M,beta", [(1, 0.5), (2, 0.25), (3, 1 / 3), (4, 0.1)])
def test_disc_single_job_closed_form(M, beta):
    inst = single_trp()
    expected = sum(3 ** (m / M + beta) + 1 for m in range(M)) / M
    assert math.isclose(run_disc(inst, M, beta).expected_cost, expected, rel_tol=1e-12)


def test_phase_grid_matches_run_taus():
    inst = fuzz_instance("trp", 3, 4)
    res = run_disc(inst, 3, 1 / 6)
    for m, tr in enumerate(res.traces):
        for ph in tr.phases:
            assert res.grid.eta(m + ph.k * 3) == ph.tau


def test_disc_bound_values():
    assert disc_bound(1.0, 1) == 4
    assert disc_bound(0.0, 1) == 3
    assert math.isclose(disc_bound(1.0, 2), 1 + (math.sqrt(3) + 3) / 2)


# -- randomized expectation -----------------------------------------------

@pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0, 2.0])
def test_randomized_single_job_closed_form(gamma):
    alpha = 2 + gamma
    value = randomized_expected_cost(one_job_instance(gamma))
    assert math.isclose(value, 1 + (alpha - 1) / math.log(alpha), rel_tol=1e-9)


@settings(max_examples=8, deadline=None)
@given(st.sampled_from(["trp", "darp", "machines"]), st.integers(0, 100_000))
def test_randomized_matches_adaptive_quadrature(problem, index):
    inst = fuzz_instance(problem, 37, index, max_jobs=4)
    ours = randomized_expected_cost(inst)
    # independent route: adaptive quadrature on the same simulator, with the
    # breakpoints located by dense sampling and bisection
    sig = lambda x: run_mimic(inst, float(x)).signature()
    grid = np.linspace(-1 + 1e-12, 0, 801)
    sigs = [sig(x) for x in grid]
    points = []
    for i in range(1, len(grid)):
        if sigs[i] != sigs[i - 1]:
            lo, hi = float(grid[i - 1]), float(grid[i])
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                lo, hi = (mid, hi) if sig(mid) == sigs[i - 1] else (lo, mid)
            points.append(hi)
    ref, _ = integrate.quad(lambda x: run_mimic(inst, min(x, 0.0)).cost.total, -1 + 1e-12, 0,
                            points=points or None, limit=500, epsabs=1e-10, epsrel=1e-10)
    assert math.isclose(ours, ref, rel_tol=1e-6)


def test_randomized_constant_integrand():
    value, _ = integrate_piecewise(lambda x: 2.5, lambda x: 0, -1.0, 0.0, 16)
    assert math.isclose(value, 2.5, rel_tol=1e-14)


def test_integrate_piecewise_step():
    f = lambda x: 1.0 if x < -0.3 else 3.0
    value, pieces = integrate_piecewise(f, lambda x: x < -0.3, -1.0, 0.0, 16)
    assert math.isclose(value, 0.7 + 0.9, rel_tol=1e-11)


def test_integrate_piecewise_gives_up():
    f = lambda x: math.floor(x * 1e6)
    with pytest.raises(ConvergenceError):
        integrate_piecewise(f, f, -1.0, 0.0, 16, max_pieces=50)


def test_randomized_requires_enough_points():
    with pytest.raises(ValueError):
        randomized_expected_cost(single_trp(), 4)


# -- fresh / stale partition ----------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["trp", "darp", "machines"]), st.integers(0, 100_000), st.sampled_from([1, 2, 3]))
def test_partition_weight_relations(problem, index, M):
    inst = fuzz_instance(problem, 41, index, max_jobs=5)
    res = run_disc(inst, M, 1 / M)
    part = extract_partition(inst, res.grid, traces=res.traces)
    Q, K = part.Q, part.K
    assert not part.w[:M].any() and not part.g[:M].any()
    for q in range(Q + 1):
        prev = math.fsum(part.wF[l].sum() for l in part.previous(q))
        assert part.wS[q].sum() <= prev * (1 + 1e-9) + 1e-12
        if q >= K * M:
            assert math.isclose(part.wS[q].sum(), prev, rel_tol=1e-9, abs_tol=1e-12)
    assert math.isclose(part.disc_cost(), res.expected_cost, rel_tol=1e-9)


def test_partition_rejects_mismatched_trace():
    inst = fuzz_instance("trp", 3, 4)
    a = run_disc(inst, 1, 1.0)
    b = run_disc(inst, 1, 0.5)
    with pytest.raises(TraceError):
        extract_partition(inst, a.grid, traces=b.traces)


def test_dump_trace(tmp_path):
    inst = single_trp()
    res = run_disc(inst, 2, 0.5)
    part = extract_partition(inst, res.grid, traces=res.traces)
    dump_trace(tmp_path / "t.json", res, part)
    data = json.loads((tmp_path / "t.json").read_text())
    assert data["partition"]["Q"] == part.Q and len(data["traces"]) == 2
