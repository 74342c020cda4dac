import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance
from lipband.core import ArmEmbedding, BanditInstance, bernoulli_kl, tightest_lipschitz
from lipband.oracle_lp import (
    ExplorationAllocation,
    LPStatus,
    confusing_parameter,
    constraint_matrix,
    continuity_delta,
    feasibility_margins,
    in_feasible_set,
    scale_free_bound,
    solve_lower_bound,
)
from oracles import kl_matrix_naive, lp_scipy, lp_vertex_enumeration

# C(mu, L) of the risk instance, frozen from HiGHS and vertex enumeration on an mpmath-built LP.
RISK_C = {0.1: 1.9367646429226046, 200.0: 6.349716683717839, math.inf: 6.349716683717839}


def test_confusing_parameter_unstructured(risk):
    inst, emb = risk
    nu = confusing_parameter(inst, emb, math.inf, 1)
    expect = inst.means.copy()
    expect[1] = inst.best_value
    assert np.array_equal(nu, expect)


def test_confusing_parameter_risk_instance(risk):
    inst, emb = risk
    x = emb.points[:, 0]
    nu = confusing_parameter(inst, emb, 200.0, 1)
    for i in range(6):
        ref = inst.best_value if i == 1 else max(inst.means[i], 0.2005 - 200 * abs(x[i] - 0.995))
        assert nu[i] == pytest.approx(ref, abs=1e-12)


def test_confusing_parameter_two_arms():
    # nu^j(j) = mu_* by definition, and the best coordinate is max{0.9, 0.9 - 0.1 * 1}
    inst = BanditInstance([0.9, 0.5])
    emb = ArmEmbedding.line([0.0, 1.0])
    assert np.allclose(confusing_parameter(inst, emb, 0.1, 1), [0.9, 0.9])


def test_confusing_parameter_lifts_far_suboptimal_arm():
    inst = BanditInstance([0.9, 0.5, 0.2])
    emb = ArmEmbedding.line([0.0, 1.0, 0.5])
    nu = confusing_parameter(inst, emb, 0.1, 1)
    assert nu[2] == pytest.approx(0.9 - 0.1 * 0.5)


def test_confusing_parameter_rejects_optimal(risk):
    inst, emb = risk
    with pytest.raises(ValueError):
        confusing_parameter(inst, emb, 1.0, 3)


@given(st.integers(0, 100_000), st.floats(0, 50))
@settings(max_examples=100)
def test_confusing_parameter_dominates(seed, L):
    inst, emb = random_instance(np.random.default_rng(seed))
    for j in inst.suboptimal:
        nu = confusing_parameter(inst, emb, L, j)
        assert np.all(nu >= inst.means)
        assert nu[j] == inst.best_value


def test_constraint_matrix_matches_naive():
    rng = np.random.default_rng(3)
    for _ in range(30):
        inst, emb = random_instance(rng)
        for L in (0.3, 2.0, math.inf):
            sub = list(inst.suboptimal)
            A = constraint_matrix(inst, emb, L)
            ref = kl_matrix_naive(list(inst.means), inst.best_value, emb.dist.tolist(), L, sub)
            assert np.allclose(A, ref, rtol=1e-9, atol=1e-14)


def test_risk_instance_values(risk):
    inst, emb = risk
    for L, ref in RISK_C.items():
        sol = solve_lower_bound(inst, emb, L)
        assert sol.ok
        assert sol.value == pytest.approx(ref, rel=1e-8)


def test_unstructured_closed_form():
    rng = np.random.default_rng(4)
    for _ in range(50):
        inst, emb = random_instance(rng)
        sol = solve_lower_bound(inst, emb, math.inf)
        closed = sum(inst.gaps[j] / bernoulli_kl(inst.means[j], inst.best_value) for j in inst.suboptimal)
        assert sol.value == pytest.approx(closed, rel=1e-9)
        for j in inst.suboptimal:
            assert sol.allocation.rates[j] == pytest.approx(1 / bernoulli_kl(inst.means[j], inst.best_value), rel=1e-9)
        assert all(math.isinf(sol.allocation.rates[i]) for i in inst.best_set)


@given(st.integers(0, 100_000), st.floats(0, 20))
@settings(max_examples=50)
def test_single_suboptimal_arm(seed, L):
    rng = np.random.default_rng(seed)
    inst, emb = random_instance(rng, K=4, n_sub=1)
    (j,) = inst.suboptimal
    sol = solve_lower_bound(inst, emb, L)
    kl = bernoulli_kl(inst.means[j], inst.best_value)
    assert sol.value == pytest.approx(inst.gaps[j] / kl, rel=1e-9)


def test_matches_vertex_enumeration_and_scipy():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 60:
        inst, emb = random_instance(rng, K=int(rng.integers(3, 7)), n_sub=int(rng.integers(1, 4)))
        L = float(rng.choice([0.2, 1.0, 5.0, 50.0]))
        sol = solve_lower_bound(inst, emb, L)
        if not sol.ok:
            continue
        A = constraint_matrix(inst, emb, L)
        gaps = inst.gaps[list(inst.suboptimal)]
        brute, _ = lp_vertex_enumeration(gaps, A)
        ref, _ = lp_scipy(gaps, A)
        assert sol.value == pytest.approx(brute, rel=1e-6)
        assert sol.value == pytest.approx(ref, rel=1e-6)
        checked += 1


def test_solution_invariants():
    rng = np.random.default_rng(6)
    for _ in range(100):
        inst, emb = random_instance(rng)
        sol = solve_lower_bound(inst, emb, float(rng.uniform(0, 10)))
        if sol.status is not LPStatus.OPTIMAL:
            continue
        rates = sol.allocation.rates
        sub = list(inst.suboptimal)
        assert np.all(np.isfinite(rates[sub])) and np.all(rates[sub] >= 0)
        assert sol.value == pytest.approx(float(inst.gaps[sub] @ rates[sub]), rel=1e-8, abs=1e-8)


def test_no_suboptimal_arm():
    inst = BanditInstance([0.4, 0.4])
    sol = solve_lower_bound(inst, ArmEmbedding.line([0, 1]), 1.0)
    assert sol.value == 0.0 and sol.allocation.optimal == (0, 1)


def test_zero_row_is_infeasible():
    # arm 1 coincides with the best mean after clamping: nothing separates it from arm 0
    inst = BanditInstance([1.0, 1.0 - 5e-10], tie_tol=1e-10)
    sol = solve_lower_bound(inst, ArmEmbedding.line([0, 1]), math.inf)
    assert sol.status is LPStatus.INFEASIBLE
    assert sol.allocation is None and "arms [1]" in sol.message


def test_in_feasible_set(risk):
    inst, emb = risk
    sol = solve_lower_bound(inst, emb, 200.0)
    assert in_feasible_set(sol.allocation, inst, emb, 200.0)
    assert not in_feasible_set(np.zeros(6), inst, emb, 200.0)


def test_scaled_binding_solution_is_infeasible():
    # unstructured LP: every constraint binds at the optimum
    rng = np.random.default_rng(7)
    inst, emb = random_instance(rng, K=5)
    sol = solve_lower_bound(inst, emb, math.inf)
    margins = feasibility_margins(sol.allocation, inst, emb, math.inf)
    assert np.allclose(margins, 1.0)
    rates = sol.allocation.rates.copy()
    rates[list(inst.suboptimal)] *= 0.999
    assert not in_feasible_set(rates, inst, emb, math.inf)


def test_allocation_serialization():
    alloc = ExplorationAllocation([math.inf, 1.5, 0.0])
    assert alloc.serialize() == ["inf", "1.5", "0.0"]
    assert alloc.optimal == (0,)
    z = ExplorationAllocation.from_counts([10, 20, 30], t=100, optimal=[0])
    assert math.isinf(z.rates[0]) and z.rates[1] == pytest.approx(20 / math.log(100))
    with pytest.raises(ValueError):
        ExplorationAllocation([-1.0])


def test_scale_free_bound_examples():
    # min gap 0.5, K = 6
    inst = BanditInstance([0.9, 0.4, 0.3, 0.2, 0.1, 0.0])
    assert scale_free_bound(inst, 0.5, 1) == pytest.approx(192.0)
    assert scale_free_bound(inst, 0.0, 1) == pytest.approx(8 / 0.25)
    with pytest.raises(ValueError):
        scale_free_bound(BanditInstance([0.3, 0.3]), 1.0, 1)


def test_lp_below_scale_free_bound():
    rng = np.random.default_rng(8)
    for _ in range(300):
        inst, emb = random_instance(rng, D=int(rng.integers(1, 3)))
        L = tightest_lipschitz(inst, emb) * float(rng.uniform(1, 3))
        sol = solve_lower_bound(inst, emb, L)
        assert sol.value <= scale_free_bound(inst, L, emb.D)


@given(st.integers(0, 100_000), st.floats(0, 5), st.floats(0, 5))
@settings(max_examples=150, deadline=None)
def test_monotone_in_L(seed, L, dL):
    inst, emb = random_instance(np.random.default_rng(seed))
    a, b = solve_lower_bound(inst, emb, L), solve_lower_bound(inst, emb, L + dL)
    if a.ok and b.ok:
        assert a.value <= b.value + 1e-8


def test_continuity_delta_examples(risk):
    emb = ArmEmbedding.line([0.0, 1.0])
    assert continuity_delta(BanditInstance([0.9, 0.5]), emb, 0.1) == pytest.approx(0.3)
    # binding pair: gap equals L d
    assert continuity_delta(BanditInstance([0.9, 0.5]), emb, 0.4) == 0.0
    inst, remb = risk
    ref = min(
        inst.gaps[i] / remb.dist[i, j] - 200.0 for i in inst.suboptimal for j in range(6) if j != i
    )
    assert continuity_delta(inst, remb, 200.0) == max(0.0, ref)
    assert math.isinf(continuity_delta(BanditInstance([0.4, 0.4]), emb, 1.0))


def _perturbation_bound(inst, emb, L, delta):
    # C(mu, L) (max KL / (KL - 2 sqrt(DK) delta) - 1) over the positive coefficients
    A = constraint_matrix(inst, emb, L)
    kl = A[A > 0]
    shrink = kl - 2 * math.sqrt(emb.D * inst.K) * delta
    if np.any(shrink <= 0):
        return math.inf
    return solve_lower_bound(inst, emb, L).value * (float(np.max(kl / shrink)) - 1.0)


def test_continuity_window():
    rng = np.random.default_rng(9)
    done = 0
    while done < 20:
        inst, emb = random_instance(rng)
        L = float(rng.uniform(0, 1))
        delta = continuity_delta(inst, emb, L)
        if not 0 < delta < math.inf:
            continue
        c0 = solve_lower_bound(inst, emb, L).value
        steps = []
        for k in range(2, 8):
            d = delta * 10.0 ** -k
            c1 = solve_lower_bound(inst, emb, L + d).value
            assert c1 - c0 >= -1e-8
            assert c1 - c0 <= _perturbation_bound(inst, emb, L, d) + 1e-6
            steps.append(c1 - c0)
        # the increment vanishes with the step
        assert steps[-1] < 1e-6
        assert steps[-1] <= steps[0]
        done += 1
