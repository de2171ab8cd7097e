import math

import numpy as np
import pytest

from penalty_ipg import (
    BallSet,
    ContractError,
    DivergenceError,
    InsufficientDataError,
    ObjectiveTerm,
    PenaltyFunction,
    ProblemInstance,
    SolverState,
    StepSchedule,
    StoppingRule,
    build_heron,
    ipg_step,
    make_rng,
    prox_dist_ball,
    quasi_fejer_check,
    soft_threshold,
    solve,
    stopping_check,
    validate_hypotheses,
)
from penalty_ipg.solver import incremental_pass


def quad_penalty(A, b):
    A, b = np.asarray(A, float), np.asarray(b, float)
    return PenaltyFunction(
        value=lambda x: 0.5 * float((A @ x - b) @ (A @ x - b)),
        grad=lambda x: A.T @ (A @ x - b),
        L=max(float(np.linalg.norm(A, 2) ** 2), 1e-12),
    )


# --- single steps -----------------------------------------------------------


def test_step_penalty_only():
    g = PenaltyFunction(value=lambda x: 0.5 * float(x @ x), grad=lambda x: x.copy(), L=1.0)
    s0 = SolverState.initial([1.0], [ObjectiveTerm()], g)
    s1 = ipg_step(s0, [ObjectiveTerm()], g, StepSchedule(1.0, 0.5))
    np.testing.assert_allclose(s1.x, [0.5])
    assert s1.k == 2 and len(s1.trace) == 1


def test_step_prox_only():
    term = ObjectiveTerm(prox_f=soft_threshold)
    g = PenaltyFunction.zero()
    s1 = ipg_step(SolverState.initial([3.0], [term], g), [term], g, StepSchedule(1.0, 1.0))
    np.testing.assert_allclose(s1.x, [2.0])


def _interval_dist_prox(v, r, c):
    # prox of r * dist(., [c - 0.2, c + 0.2]) on the real line
    lo, hi = c - 0.2, c + 0.2
    if v > hi:
        return max(v - r, hi)
    if v < lo:
        return min(v + r, lo)
    return v


def test_step_two_intervals_scratch_oracle():
    centers = [0.5, 2.0]
    terms = [
        ObjectiveTerm(prox_f=lambda v, r, C=BallSet([c], 0.2): prox_dist_ball(v, r, C),
                      grad_h=lambda x: x / 2, L=0.5)
        for c in centers
    ]
    g = PenaltyFunction(value=lambda x: 0.5 * float((x - 1) @ (x - 1)), grad=lambda x: x - 1, L=1.0)
    s1 = ipg_step(SolverState.initial([0.0], terms, g), terms, g, StepSchedule(1.0, 1.0))
    # scratch: phi1 = 0 - 1*1*(0 - 1) = 1
    phi = 0.0 - 1.0 * (0.0 - 1.0)
    for c in centers:
        phi = _interval_dist_prox(phi - 1.0 * phi / 2, 1.0, c)
    assert s1.x[0] == pytest.approx(phi, abs=1e-15)
    # 1 -> 0.5 (inside [0.3, 0.7]) -> 0.25 pushed a unit toward [1.8, 2.2]
    assert phi == pytest.approx(1.25)


def _oracle_step(x, k, a, b, A, bvec, terms):
    """Literal transcription: phi_1, the forward-backward sweep, x_{k+1}."""
    alpha, beta = a / k, b * k
    phi = x - alpha * beta * (A.T @ (A @ x - bvec))
    for kind, data, Q, c in terms:
        v = phi - alpha * (Q @ phi + c)
        if kind == "l1":
            lam = data
            phi = np.sign(v) * np.maximum(np.abs(v) - alpha * lam, 0.0)
        elif kind == "ball":
            center, radius = data
            d = max(np.linalg.norm(v - center) - radius, 0.0)
            if d <= 1e-14:
                phi = v
            else:
                proj = center + radius * (v - center) / np.linalg.norm(v - center)
                phi = proj if d <= alpha else v + (alpha / d) * (proj - v)
        else:
            phi = v
    return phi


def _random_instance(rng):
    n, m = int(rng.integers(1, 6)), int(rng.integers(1, 5))
    r = int(rng.integers(1, 7))
    A, bvec = rng.normal(size=(r, n)), rng.normal(size=r)
    raw, terms = [], []
    for _ in range(m):
        M = rng.normal(size=(n, n))
        Q, c = M @ M.T / n, rng.normal(size=n)
        kind = ["l1", "ball", "none"][rng.integers(3)]
        if kind == "l1":
            data = float(rng.uniform(0.1, 2))
            prox = lambda v, rr, lam=data: soft_threshold(v, rr * lam)  # noqa: E731
        elif kind == "ball":
            data = (rng.normal(size=n), float(rng.uniform(0.1, 1)))
            C = BallSet(*data)
            prox = lambda v, rr, C=C: prox_dist_ball(v, rr, C)  # noqa: E731
        else:
            data, prox = None, None
        raw.append((kind, data, Q, c))
        terms.append(ObjectiveTerm(prox_f=prox, grad_h=lambda x, Q=Q, c=c: Q @ x + c,
                                   L=float(np.linalg.eigvalsh(Q)[-1])))
    return A, bvec, raw, terms, n


def test_transcription_oracle_100_instances():
    rng = make_rng(2024)
    worst = 0.0
    for _ in range(100):
        A, bvec, raw, terms, n = _random_instance(rng)
        g = quad_penalty(A, bvec)
        a, b = rng.uniform(0.05, 1.5), rng.uniform(0.05, 1.5)
        k = int(rng.integers(1, 50))
        x = rng.normal(size=n)
        state = SolverState.initial(x, terms, g, k=k)
        got = ipg_step(state, terms, g, StepSchedule(a, b)).x
        want = _oracle_step(x, k, a, b, A, bvec, raw)
        worst = max(worst, float(np.max(np.abs(got - want))))
    assert worst <= 1e-12


def test_g_free_path_equivalence():
    rng = make_rng(5)
    A, bvec, raw, terms, n = _random_instance(rng)
    x = rng.normal(size=n)
    g0 = PenaltyFunction.zero()
    state = SolverState.initial(x, terms, g0)
    phi = x.copy()
    for k in range(1, 30):
        sched = StepSchedule(0.7, float(rng.uniform(0.1, 100)))  # beta is irrelevant when g = 0
        state = ipg_step(state, terms, g0, sched)
        phi, _ = incremental_pass(phi, terms, 0.7 / k, k)
        np.testing.assert_array_equal(state.x, phi)


def test_divergence_reports_component():
    bad_g = PenaltyFunction(value=lambda x: 0.0, grad=lambda x: np.full_like(x, np.inf), L=1.0)
    with pytest.raises(DivergenceError) as info:
        ipg_step(SolverState.initial([1.0], [ObjectiveTerm()], bad_g),
                 [ObjectiveTerm()], bad_g, StepSchedule(1, 1))
    assert info.value.component == 0
    terms = [ObjectiveTerm(), ObjectiveTerm(grad_h=lambda x: np.full_like(x, np.nan))]
    g = PenaltyFunction.zero()
    with pytest.raises(DivergenceError) as info:
        ipg_step(SolverState.initial([1.0], terms, g, k=3), terms, g, StepSchedule(1, 1))
    assert (info.value.k, info.value.component) == (3, 2)


def test_trace_records_diagnostics():
    inst = build_heron(3, 2, True, seed=0)
    rep = solve(inst, inst.schedule(), StoppingRule.fixed(5))
    assert [r.k for r in rep.trace] == [1, 2, 3, 4, 5]
    last = rep.trace[-1]
    assert last.g == pytest.approx(inst.penalty.value(rep.x))
    assert last.dist_to_oracle == pytest.approx(np.linalg.norm(rep.x - inst.oracle))
    assert last.inner_disp_sq > 0
    assert rep.converged and rep.iterations == 5


# --- schedules and hypotheses ----------------------------------------------


def test_schedule_product_constant():
    s = StepSchedule(0.6, 1.9, beta_scale=0.01)
    for k in (1, 2, 10, 1000):
        assert s.alpha(k) > 0 and s.beta(k) > 0
        assert s.alpha(k) * s.beta(k) == pytest.approx(s.product, rel=1e-14)
    assert StepSchedule(1.1, 1.8).alpha(1) == 1.1
    with pytest.raises(ContractError):
        StepSchedule(0.0, 1.0)


def test_validate_examples():
    g = PenaltyFunction(value=lambda x: 0.0, grad=np.zeros_like, L=1.0, growth_constant=1.0)
    rep = validate_hypotheses(StepSchedule(1.1, 1.8), g)
    assert rep.ok and rep["H3"].status == "pass"
    assert rep["H3"].margin == pytest.approx(0.02)
    assert rep["H2"].status == "pass" and rep["H4"].status == "pass"
    assert validate_hypotheses(StepSchedule(2.0, 1.0), g)["H3"].status == "fail"
    assert not validate_hypotheses(StepSchedule(2.0, 1.0), g).ok
    with pytest.raises(ContractError):
        PenaltyFunction(value=lambda x: 0.0, grad=np.zeros_like, L=0.0)


def test_validate_h4_unverified_without_growth():
    rep = validate_hypotheses(StepSchedule(1.0, 1.0), PenaltyFunction.zero())
    assert rep["H4"].status == "unverified"
    assert rep.ok
    assert "H4" in rep.summary()


def test_solve_refuses_invalid_schedule_without_override():
    inst = build_heron(3, 2, True, seed=1)
    bad = StepSchedule(2.0, 1.0, beta_scale=1.0 / inst.norm_A**2)
    with pytest.raises(ContractError):
        solve(inst, bad, StoppingRule.fixed(3))
    rep = solve(inst, bad, StoppingRule.fixed(3), override=True)
    assert rep.iterations == 3 and not rep.validation.ok


# --- stopping -----------------------------------------------------------------


def _state(x, obj, g):
    x = np.asarray(x, float)
    return SolverState(k=1, x=x, g_value=g, grad_g=np.zeros_like(x), objective=obj)


def test_stopping_check_examples():
    s = _state([1.0, 2.0], 3.0, 4.0)
    assert stopping_check(s, _state([1.0, 2.0], 3.0, 4.0), StoppingRule(1e-12))
    assert not stopping_check(_state([0.0], 1.0, 1.0), _state([1.0], 1.0, 1.0), StoppingRule(0.5))
    # changes 1e-7 (iterate), 1e-8 (objective), 1e-9 (penalty) against unit-free bases
    prev = _state([0.0], 0.0, 0.0)
    nxt = _state([1e-7], 1e-8, 1e-9)
    assert stopping_check(prev, nxt, StoppingRule(1e-6))
    assert not stopping_check(prev, nxt, StoppingRule(5e-8))


def test_stopping_rule_contract():
    with pytest.raises(ContractError):
        StoppingRule(0.0)
    with pytest.raises(ContractError):
        StoppingRule(1e-6, mode="other")


def test_solve_cap_reports_not_converged():
    inst = build_heron(5, 2, True, seed=0)
    rep = solve(inst, inst.schedule(), StoppingRule(1e-12, 7))
    assert rep.iterations == 7 and not rep.converged


def test_solve_deterministic():
    inst = build_heron(4, 3, False, seed=9)
    r1 = solve(inst, inst.schedule(), StoppingRule(1e-5, 2000))
    r2 = solve(build_heron(4, 3, False, seed=9), inst.schedule(), StoppingRule(1e-5, 2000))
    np.testing.assert_array_equal(r1.x, r2.x)
    assert r1.to_csv(timing=False) == r2.to_csv(timing=False)


def test_report_csv_columns():
    inst = build_heron(2, 2, True, seed=0)
    text = solve(inst, inst.schedule(), StoppingRule.fixed(3)).to_csv(timing=False)
    lines = text.splitlines()
    assert lines[0] == "k,g,grad_g_norm,inner_disp_sq,obj_F,dist_to_oracle,elapsed_s"
    assert len(lines) == 4 and all(line.endswith(",") for line in lines[1:])


@pytest.mark.parametrize("seed", range(5))
def test_heron_consistent_approaches_zero(seed):
    inst = build_heron(5, 2, True, seed)
    rep = solve(inst, inst.schedule(0.6, 1.9), StoppingRule(1e-6))
    assert rep.converged
    assert np.linalg.norm(rep.x) < 1e-2 * np.linalg.norm(inst.x0)


# --- quasi-Fejer diagnostics ---------------------------------------------------


def test_quasi_fejer_constant_sequence():
    u = np.array([1.0, -2.0])
    rep = quasi_fejer_check([u.copy() for _ in range(20)], u)
    assert rep.slack_sum == 0.0 and rep.fejer_ok and rep.passed


def test_quasi_fejer_diverging_sequence():
    xs = [np.array([float(k), 0.0]) for k in range(1, 31)]
    rep = quasi_fejer_check(xs, np.zeros(2))
    assert not rep.fejer_ok and not rep.passed
    assert np.all(np.diff(rep.slack) > 0)


def test_quasi_fejer_needs_ten_iterates():
    with pytest.raises(InsufficientDataError):
        quasi_fejer_check([np.zeros(2)] * 9, np.zeros(2))


def test_quasi_fejer_on_inconsistent_run_uses_g_min():
    inst = build_heron(3, 2, False, seed=4)
    rep = solve(inst, inst.schedule(), StoppingRule(1e-6), keep_iterates=True)
    chk = quasi_fejer_check(rep, inst.oracle, tol=1.0, g_tol=1.0, g_min=inst.penalty.min_value)
    assert chk.final_g >= 0.0
    assert chk.final_g < inst.penalty.value(inst.x0) - inst.penalty.min_value
    assert chk.final_inner_disp is not None and chk.disp_ok is None


# --- term contracts --------------------------------------------------------------


@pytest.mark.parametrize("consistent", [True, False])
def test_term_and_penalty_lipschitz_probes(consistent):
    inst = build_heron(4, 3, consistent, seed=2)
    rng = make_rng(0)
    for _ in range(50):
        x, y = rng.normal(scale=5, size=3), rng.normal(scale=5, size=3)
        for t in inst.terms:
            assert np.linalg.norm(t.grad_h(x) - t.grad_h(y)) <= t.L * np.linalg.norm(x - y) * (1 + 1e-8)
        gx, gy = inst.penalty.grad(x), inst.penalty.grad(y)
        assert np.linalg.norm(gx - gy) <= inst.penalty.L * np.linalg.norm(x - y) * (1 + 1e-8)
        assert inst.penalty.value(x) >= inst.penalty.min_value - 1e-9
    with pytest.raises(ContractError):
        ObjectiveTerm(L=-1.0)
    assert math.isfinite(inst.objective(inst.x0))
