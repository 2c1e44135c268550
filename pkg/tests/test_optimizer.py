import itertools

import numpy as np
import pytest

from src.analysis.bound import BoundConstants, theta_for_decision
from src.decision.optimizer import (Budget, OptimizerOptions, initialize, lp_pruning, sca_linearize,
                                    sca_resources, select_clients, solve)
from src.errors import (DomainError, InfeasibleProblemError, InfeasibleSubproblemError,
                        InvalidArgumentError)
from src.experiment.presets import MNIST_LENET, NOISE_PSD, SERVER_POWER
from src.system.cost import (RoundDecision, affine_costs, broadcast_energy, comp_energy, downlink_delay,
                             round_costs, upload_energy)
from src.system.wireless import ChannelState, build_profiles, sample_channels, stack_profiles, uplink_rate


def _constants(beta=4.0, gamma1=0.25, gamma2=1.0, alpha=0.0, last_round=0):
    return BoundConstants(alpha=alpha, beta=beta, gamma1=gamma1, gamma2=gamma2, last_round=last_round)


def _random_instance(rng, n=None):
    """Profiles, a Rayleigh channel and a reference decision costing (energy, delay) per round."""
    n = n or int(rng.integers(2, 7))
    profiles = build_profiles(MNIST_LENET, n)
    channel = sample_channels(n, 1e-5, int(rng.integers(0, 10_000)), NOISE_PSD, 1e5, SERVER_POWER)
    P = stack_profiles(profiles)
    reference = RoundDecision(a=np.ones(n), lam=np.full(n, 0.25), p=0.8 * P.p_max, f=0.6 * P.f_max)
    report = round_costs(reference, profiles, channel)
    return profiles, channel, reference, report


def _weighted_slack(decision, profiles, channel, energy_b, delay_b):
    report = round_costs(decision, profiles, channel)
    return 0.5 * (energy_b - report.round_energy) / energy_b + 0.5 * (delay_b - report.round_delay) / delay_b


# --- budget / options ---

def test_budget_uniform_split():
    assert Budget(100.0, 50.0).per_round(10) == pytest.approx((10.0, 5.0))


def test_budget_explicit_split_uses_tightest_round():
    budget = Budget(10.0, 10.0, energy_per_round=(2.0, 3.0, 5.0))
    energy, delay = budget.per_round(3)
    assert energy == pytest.approx(2.0)
    assert delay == pytest.approx(10.0 / 3)


@pytest.mark.parametrize("kwargs", [
    {"total_energy": -1.0, "total_delay": 1.0},
    {"total_energy": 1.0, "total_delay": 1.0, "delay_per_round": ()},
])
def test_budget_rejects_bad_values(kwargs):
    with pytest.raises(InvalidArgumentError):
        Budget(**kwargs)


def test_budget_rejects_explicit_shares_above_total():
    with pytest.raises(InvalidArgumentError):
        Budget(5.0, 10.0, energy_per_round=(3.0, 3.0)).per_round(2)


@pytest.mark.parametrize("kwargs", [{"lambda_max": 1.0}, {"selection_mode": "random"},
                                    {"pin_lambda": 0.9}, {"pin_power": 0.0},
                                    {"energy_weight": 0.0, "delay_weight": 0.0}])
def test_options_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        OptimizerOptions(**kwargs)


# --- initialize ---

def test_initialize_with_generous_budget_selects_everyone(mnist_profiles, flat_channel):
    decisions = initialize(mnist_profiles, flat_channel, Budget(1e3, 1e3), num_rounds=1)
    decision = decisions[0]
    assert decision.a.tolist() == [1] * 10
    np.testing.assert_allclose(decision.lam, 0.5)
    np.testing.assert_allclose(decision.p, MNIST_LENET.p_max)
    assert np.all(decision.f <= MNIST_LENET.f_max)
    assert round_costs(decision, mnist_profiles, flat_channel).round_delay <= 1e3


def test_initialize_returns_one_decision_per_round(mnist_profiles, flat_channel):
    decisions = initialize(mnist_profiles, flat_channel, Budget(1e4, 1e4), num_rounds=7)
    assert len(decisions) == 7


def test_initialize_meets_delay_share_exactly_when_f_is_free(mnist_profiles, flat_channel):
    decision = initialize(mnist_profiles, flat_channel, Budget(1e3, 2.0), num_rounds=1)[0]
    report = round_costs(decision, mnist_profiles, flat_channel)
    np.testing.assert_allclose(report.client_delay, 2.0, rtol=1e-9)


def test_initialize_zero_delay_budget(mnist_profiles, flat_channel):
    with pytest.raises(InfeasibleProblemError) as exc_info:
        initialize(mnist_profiles, flat_channel, Budget(1e3, 0.0), num_rounds=1)
    assert exc_info.value.binding_constraint == "delay"


def test_initialize_unreachable_delay(mnist_profiles, flat_channel):
    with pytest.raises(InfeasibleProblemError) as exc_info:
        initialize(mnist_profiles, flat_channel, Budget(1e3, 0.1), num_rounds=1)
    assert exc_info.value.binding_constraint == "delay"


def test_initialize_drops_most_expensive_clients_until_energy_fits(channel_factory):
    profiles = build_profiles(MNIST_LENET, 5)
    channel = channel_factory(5)
    generous = initialize(profiles, channel, Budget(1e3, 2.0), num_rounds=1)[0]
    report = round_costs(generous, profiles, channel)
    energy = report.comp_energy + report.upload_energy
    order = np.argsort(energy)
    budget = report.broadcast_energy + energy[order[:3]].sum() + 0.5 * energy[order[3]]

    decision = initialize(profiles, channel, Budget(budget, 2.0), num_rounds=1)[0]
    expected = np.zeros(5, dtype=int)
    expected[order[:3]] = 1
    assert decision.a.tolist() == expected.tolist()


def test_initialize_energy_infeasible(mnist_profiles, flat_channel):
    with pytest.raises(InfeasibleProblemError) as exc_info:
        initialize(mnist_profiles, flat_channel, Budget(0.2, 2.0), num_rounds=1)
    assert exc_info.value.binding_constraint == "energy"


def test_initialize_with_pinned_selection_refuses_to_drop(mnist_profiles, flat_channel):
    with pytest.raises(InfeasibleProblemError):
        initialize(mnist_profiles, flat_channel, Budget(1.0, 2.0), num_rounds=1,
                   options=OptimizerOptions(pin_selection=True))


# --- SCA linearization ---

def test_linearization_is_tangent(mnist_profiles, flat_channel):
    profile = mnist_profiles[0]
    for p0 in (0.01, 0.1, 0.5):
        value, _ = sca_linearize(p0, profile, flat_channel)
        assert value == pytest.approx(p0 * profile.gradient_bits / uplink_rate(p0, profile, flat_channel), rel=1e-12)


def test_linearization_slope_matches_finite_difference():
    rng = np.random.default_rng(3)
    profiles, channel, _, _ = _random_instance(rng, n=5)
    for _ in range(100):
        profile = profiles[int(rng.integers(0, 5))]
        p0 = float(rng.uniform(0.01, 0.5))
        h = 1e-6 * p0
        plus, _ = sca_linearize(p0 + h, profile, channel)
        minus, _ = sca_linearize(p0 - h, profile, channel)
        _, slope = sca_linearize(p0, profile, channel)
        assert slope == pytest.approx((plus - minus) / (2 * h), rel=1e-6)


def test_linearization_error_is_second_order(mnist_profiles, flat_channel):
    profile = mnist_profiles[2]
    for p0 in np.linspace(0.05, 0.5, 10):
        value, slope = sca_linearize(p0, profile, flat_channel)
        for step in (-0.01 * p0, 0.01 * p0):
            exact, _ = sca_linearize(p0 + step, profile, flat_channel)
            assert abs(exact - (value + slope * step)) / exact <= 1e-4


def test_linearization_needs_positive_power(mnist_profiles, flat_channel):
    with pytest.raises(DomainError):
        sca_linearize(0.0, mnist_profiles[0], flat_channel)


# --- SCA resources ---

def test_sca_resources_with_both_blocks_pinned_returns_inputs(mnist_profiles, flat_channel):
    options = OptimizerOptions(pin_power=0.5, pin_frequency_max=True)
    decision = initialize(mnist_profiles, flat_channel, Budget(1e3, 2.0), 1, options)[0]
    p, f = sca_resources(decision, mnist_profiles, flat_channel, Budget(1e3, 2.0), 1, options)
    np.testing.assert_array_equal(p, decision.p)
    np.testing.assert_array_equal(f, decision.f)


def test_sca_resources_stays_feasible_and_improves_slack():
    rng = np.random.default_rng(11)
    for _ in range(20):
        profiles, channel, reference, report = _random_instance(rng)
        energy_b, delay_b = 1.3 * report.round_energy, 1.3 * report.round_delay
        budget = Budget(energy_b, delay_b)
        p, f = sca_resources(reference, profiles, channel, budget, 1)
        improved = RoundDecision(a=reference.a, lam=reference.lam, p=p, f=f)
        after = round_costs(improved, profiles, channel)
        assert after.round_energy <= energy_b * (1 + 1e-9)
        assert after.round_delay <= delay_b * (1 + 1e-9)
        assert np.all(p <= MNIST_LENET.p_max * (1 + 1e-12))
        assert np.all(f <= MNIST_LENET.f_max * (1 + 1e-12))
        before = _weighted_slack(reference, profiles, channel, energy_b, delay_b)
        assert _weighted_slack(improved, profiles, channel, energy_b, delay_b) >= before - 1e-12


def test_sca_resources_rejects_infeasible_start():
    profiles, channel, reference, report = _random_instance(np.random.default_rng(5))
    with pytest.raises(InvalidArgumentError):
        sca_resources(reference, profiles, channel, Budget(0.5 * report.round_energy, report.round_delay), 1)


# --- pruning LP ---

def test_lp_pruning_with_loose_budget_prunes_nothing(mnist_profiles, flat_channel):
    a = np.ones(10)
    a[4] = 0
    P = stack_profiles(mnist_profiles)
    decision = RoundDecision(a=a, lam=np.full(10, 0.5), p=P.p_max, f=P.f_max)
    lam = lp_pruning(decision, mnist_profiles, flat_channel, Budget(1e3, 1e3), _constants())
    np.testing.assert_allclose(lam, 0.0, atol=1e-12)


def test_lp_pruning_deselected_clients_get_zero(mnist_profiles, flat_channel):
    a = np.zeros(10)
    a[:3] = 1
    P = stack_profiles(mnist_profiles)
    decision = RoundDecision(a=a, lam=np.full(10, 0.5), p=P.p_max, f=P.f_max)
    budget = Budget(broadcast_energy(P, flat_channel) + 0.4, 1e3)
    lam = lp_pruning(decision, mnist_profiles, flat_channel, budget, _constants())
    assert np.all(lam[3:] == 0.0)
    assert lam[:3].sum() > 0


def _two_client_energy_instance(fraction):
    profiles = build_profiles(MNIST_LENET, 2)
    channel = sample_channels(2, 1e-5, 4, NOISE_PSD, 1e5, SERVER_POWER)
    P = stack_profiles(profiles)
    decision = RoundDecision(a=[1, 1], lam=[0.0, 0.0], p=P.p_max, f=0.5 * P.f_max)
    coef = affine_costs(decision.p, decision.f, P, channel)
    energy_b = broadcast_energy(P, channel) + fraction * coef.energy_coef.sum()
    return profiles, channel, decision, coef, Budget(energy_b, 1e3)


def test_lp_pruning_matches_grid_search_on_binding_energy():
    profiles, channel, decision, coef, budget = _two_client_energy_instance(0.7)
    lam = lp_pruning(decision, profiles, channel, budget, _constants())

    broadcast = broadcast_energy(profiles, channel)
    grid = np.arange(0.0, 0.5 + 1e-12, 1e-3)
    l1, l2 = np.meshgrid(grid, grid, indexing="ij")
    energy = (1 - l1) * coef.energy_coef[0] + (1 - l2) * coef.energy_coef[1] + broadcast
    oracle = (l1 + l2)[energy <= budget.total_energy].min()

    assert lam.sum() == pytest.approx(oracle, abs=2e-3)
    assert (1 - lam) @ coef.energy_coef + broadcast <= budget.total_energy * (1 + 1e-9)
    assert np.all((lam >= -1e-12) & (lam <= 0.5 + 1e-12))


def test_lp_pruning_infeasible_budget():
    profiles, channel, decision, _, budget = _two_client_energy_instance(0.4)
    with pytest.raises(InfeasibleSubproblemError):
        lp_pruning(decision, profiles, channel, budget, _constants())


def test_lp_pruning_honours_pinned_lambda(mnist_profiles, flat_channel):
    P = stack_profiles(mnist_profiles)
    decision = RoundDecision(a=np.ones(10), lam=np.full(10, 0.5), p=P.p_max, f=P.f_max)
    lam = lp_pruning(decision, mnist_profiles, flat_channel, Budget(1e3, 1e3), _constants(),
                     OptimizerOptions(pin_lambda=0.2))
    np.testing.assert_allclose(lam, 0.2)


# --- client selection ---

def test_selection_matches_brute_force():
    rng = np.random.default_rng(21)
    options = OptimizerOptions(selection_mode="exhaustive")
    for _ in range(50):
        n = int(rng.integers(2, 9))
        profiles = build_profiles(MNIST_LENET, n)
        channel = sample_channels(n, 1e-5, int(rng.integers(0, 10_000)), NOISE_PSD, 1e5, SERVER_POWER)
        P = stack_profiles(profiles)
        decision = RoundDecision(a=np.ones(n), lam=rng.uniform(0, 0.5, n), p=P.p_max, f=P.f_max)
        phi = rng.uniform(0, 3, n)
        constants = _constants(beta=rng.uniform(0.1, 5), gamma1=rng.uniform(0.01, 1), gamma2=rng.uniform(0, 2))
        full = round_costs(decision, P, channel)
        per_client = full.comp_energy + full.upload_energy
        energy_b = full.broadcast_energy + max(rng.uniform(0.2, 1.0) * per_client.sum(), 1.01 * per_client.min())
        budget = Budget(energy_b, 1e3)

        best = np.inf
        for mask in itertools.product((0, 1), repeat=n):
            if not any(mask):
                continue
            candidate = RoundDecision(a=mask, lam=decision.lam, p=decision.p, f=decision.f)
            if round_costs(candidate, P, channel).round_energy > energy_b * (1 + 1e-9):
                continue
            best = min(best, theta_for_decision(candidate, phi, constants))

        a = select_clients(decision, phi, P, channel, constants, budget, options)
        chosen = RoundDecision(a=a, lam=decision.lam, p=decision.p, f=decision.f)
        assert round_costs(chosen, P, channel).round_energy <= energy_b * (1 + 1e-9)
        assert theta_for_decision(chosen, phi, constants) == pytest.approx(best, rel=1e-9)


def test_selection_excludes_large_phi_outlier(channel_factory):
    profiles = build_profiles(MNIST_LENET, 4)
    channel = channel_factory(4)
    P = stack_profiles(profiles)
    decision = RoundDecision(a=np.ones(4), lam=np.zeros(4), p=P.p_max, f=P.f_max)
    a = select_clients(decision, [0.1, 0.1, 0.1, 5.0], P, channel,
                       _constants(beta=1e-3, gamma1=1.0, gamma2=0.0), Budget(1e3, 1e3))
    assert a[3] == 0
    assert a.sum() >= 1


def test_selection_with_zero_phi_takes_everyone(mnist_profiles, flat_channel):
    P = stack_profiles(mnist_profiles)
    decision = RoundDecision(a=np.ones(10), lam=np.full(10, 0.3), p=P.p_max, f=P.f_max)
    a = select_clients(decision, np.zeros(10), P, flat_channel, _constants(gamma2=0.0), Budget(1e3, 1e3))
    assert a.tolist() == [1] * 10


def test_greedy_selection_uses_phi_order(mnist_profiles, flat_channel):
    P = stack_profiles(mnist_profiles)
    decision = RoundDecision(a=np.ones(10), lam=np.zeros(10), p=P.p_max, f=P.f_max)
    phi = np.arange(10, 0, -1, dtype=float)
    a = select_clients(decision, phi, P, flat_channel, _constants(beta=1e-3, gamma1=1.0, gamma2=0.0),
                       Budget(1e3, 1e3), OptimizerOptions(selection_mode="greedy"))
    assert a.tolist() == [0] * 9 + [1]


def test_selection_without_affordable_subset(mnist_profiles, flat_channel):
    P = stack_profiles(mnist_profiles)
    decision = RoundDecision(a=np.ones(10), lam=np.zeros(10), p=P.p_max, f=P.f_max)
    with pytest.raises(InfeasibleSubproblemError):
        select_clients(decision, np.ones(10), P, flat_channel, _constants(),
                       Budget(broadcast_energy(P, flat_channel) + 1e-6, 1e3))


# --- alternating optimization ---

def test_solve_trace_is_monotone_and_feasible():
    rng = np.random.default_rng(8)
    options = OptimizerOptions(outer_max_iter=5, sca_max_iter=10)
    for _ in range(20):
        profiles, channel, _, report = _random_instance(rng)
        n = len(profiles)
        budget = Budget(1.2 * report.round_energy, 1.2 * report.round_delay)
        phi = rng.uniform(0, 2, n)
        result = solve(profiles, channel, phi, _constants(beta=1.0, gamma1=0.1, gamma2=0.5), budget, options)

        thetas = [row.theta for row in result.trace]
        assert all(b <= a + 1e-12 for a, b in zip(thetas, thetas[1:]))
        assert result.feasible
        assert result.theta == pytest.approx(thetas[-1])
        assert result.cost.round_energy <= budget.total_energy * (1 + 1e-9)
        assert result.cost.round_delay <= budget.total_delay * (1 + 1e-9)
        result.decision.validate(profiles, options.lambda_max)


def test_solve_equal_phi_picks_four_clients_without_pruning(channel_factory):
    profiles = build_profiles(MNIST_LENET, 6)
    channel = channel_factory(6)
    result = solve(profiles, channel, np.ones(6), _constants(beta=4.0, gamma1=0.25, gamma2=1.0),
                   Budget(1e3, 10.0))
    assert result.decision.num_selected == 4
    np.testing.assert_allclose(result.decision.lam[result.decision.selected], 0.0, atol=1e-9)
    assert result.theta == pytest.approx(2.0)
    assert len(result.decisions) == 1


def test_solve_rejects_phi_of_wrong_length(mnist_profiles, flat_channel):
    with pytest.raises(InvalidArgumentError):
        solve(mnist_profiles, flat_channel, np.ones(3), _constants(), Budget(1e3, 10.0))


# --- alternation and traces ---

def test_selection_alternation_starts_from_the_incumbent(channel_factory):
    profiles = build_profiles(MNIST_LENET, 4)
    P = stack_profiles(profiles)
    decision = RoundDecision(a=[0, 0, 0, 1], lam=np.zeros(4), p=P.p_max, f=P.f_max)
    states = []
    a = select_clients(decision, [0.1, 0.1, 0.1, 5.0], P, channel_factory(4),
                       _constants(beta=1.0, gamma1=1.0, gamma2=0.0), Budget(1e3, 1e3), trace=states)

    assert a.tolist() == [1, 1, 1, 0]
    assert [s.selected for s in states] == ["0001", "1110"]
    assert [s.source for s in states] == ["alternation", "alternation"]
    assert states[0].mu == pytest.approx(25.0)
    assert states[0].objective == pytest.approx(26.0)
    assert states[1].mu == pytest.approx(0.09)
    assert states[1].objective == pytest.approx(1.09 / 3)


def test_selection_falls_back_to_the_best_candidate(channel_factory):
    profiles = build_profiles(MNIST_LENET, 4)
    P = stack_profiles(profiles)
    decision = RoundDecision(a=np.ones(4), lam=np.zeros(4), p=P.p_max, f=P.f_max)
    states = []
    a = select_clients(decision, [0.1, 0.1, 0.1, 5.0], P, channel_factory(4),
                       _constants(beta=1e-3, gamma1=1.0, gamma2=0.0), Budget(1e3, 1e3), trace=states)

    # everyone is already the largest subset within mu = 5.3 ** 2, so the alternation stops at once
    assert [s.selected for s in states] == ["1111", "1000"]
    assert [s.source for s in states] == ["alternation", "argmin"]
    assert a.tolist() == [1, 0, 0, 0]


def test_selection_alternation_objective_never_rises():
    rng = np.random.default_rng(31)
    for _ in range(30):
        n = int(rng.integers(3, 8))
        profiles = build_profiles(MNIST_LENET, n)
        channel = sample_channels(n, 1e-5, int(rng.integers(0, 10_000)), NOISE_PSD, 1e5, SERVER_POWER)
        P = stack_profiles(profiles)
        a0 = (rng.random(n) < 0.5).astype(int)
        a0[int(rng.integers(0, n))] = 1
        decision = RoundDecision(a=a0, lam=rng.uniform(0, 0.5, n), p=P.p_max, f=P.f_max)
        states = []
        select_clients(decision, rng.uniform(0, 3, n), P, channel,
                       _constants(beta=rng.uniform(0.1, 5), gamma1=rng.uniform(0.01, 1), gamma2=rng.uniform(0, 2)),
                       Budget(1e3, 1e3), trace=states)
        assert states[0].selected == "".join(str(v) for v in a0)
        objectives = [s.objective for s in states]
        assert all(b < a for a, b in zip(objectives, objectives[1:]))
        for s in states:
            assert s.num_selected == s.selected.count("1")


def test_selection_is_invariant_to_phi_scale():
    rng = np.random.default_rng(17)
    options = OptimizerOptions(selection_mode="exhaustive")
    for _ in range(20):
        n = int(rng.integers(3, 8))
        profiles = build_profiles(MNIST_LENET, n)
        channel = sample_channels(n, 1e-5, int(rng.integers(0, 10_000)), NOISE_PSD, 1e5, SERVER_POWER)
        P = stack_profiles(profiles)
        decision = RoundDecision(a=np.ones(n), lam=np.zeros(n), p=P.p_max, f=P.f_max)
        phi = rng.uniform(0, 3, n)
        beta, gamma1 = rng.uniform(0.1, 5), rng.uniform(0.01, 1)
        reference = select_clients(decision, phi, P, channel, _constants(beta=beta, gamma1=gamma1, gamma2=1.0),
                                   Budget(1e3, 1e3), options)
        for scale in (0.5, 3.0, 10.0):
            scaled = select_clients(decision, scale * phi, P, channel,
                                    _constants(beta=beta * scale ** 2, gamma1=gamma1, gamma2=1.0),
                                    Budget(1e3, 1e3), options)
            assert scaled.tolist() == reference.tolist()


def test_solve_records_sca_and_selection_steps():
    rng = np.random.default_rng(8)
    profiles, channel, _, report = _random_instance(rng, n=5)
    budget = Budget(1.2 * report.round_energy, 1.2 * report.round_delay)
    result = solve(profiles, channel, rng.uniform(0, 2, 5), _constants(beta=1.0, gamma1=0.1, gamma2=0.5), budget,
                   OptimizerOptions(outer_max_iter=3, sca_max_iter=10))

    assert result.sca_trace and result.selection_trace
    outers = {row.iteration for row in result.trace if row.stage != "init"}
    assert {s.outer for s in result.sca_trace} == outers
    assert {s.outer for s in result.selection_trace} == outers
    for s in result.sca_trace:
        assert s.energy_slack >= -1e-9 and s.delay_slack >= -1e-9
    for outer in outers:
        steps = [s for s in result.sca_trace if s.outer == outer]
        assert [s.iteration for s in steps] == list(range(1, len(steps) + 1))
        assert all(s.accepted for s in steps[:-1])
        first = [s for s in result.selection_trace if s.outer == outer][0]
        assert first.source == "alternation"


# --- worked examples ---

def test_sca_resources_keeps_the_start_when_no_iterate_clears_the_tolerance():
    profiles, channel, reference, report = _random_instance(np.random.default_rng(11))
    budget = Budget(1.3 * report.round_energy, 1.3 * report.round_delay)
    steps = []
    p, f = sca_resources(reference, profiles, channel, budget, 1, OptimizerOptions(sca_tol=10.0), trace=steps)
    np.testing.assert_array_equal(p, reference.p)
    np.testing.assert_array_equal(f, reference.f)
    assert len(steps) == 1
    assert not steps[0].accepted


def test_sca_single_client_reaches_the_bisection_optimum(channel_factory):
    profiles = build_profiles(MNIST_LENET, 1)
    channel = channel_factory(1)
    P = stack_profiles(profiles)
    options = OptimizerOptions(energy_weight=1.0, delay_weight=0.0, sca_tol=1e-12, sca_max_iter=200)
    delay_b = 1.0
    start = initialize(profiles, channel, Budget(1e3, delay_b), 1, options)[0]
    budget = Budget(2 * round_costs(start, profiles, channel).round_energy, delay_b)
    p, f = sca_resources(start, profiles, channel, budget, 1, options)
    result = round_costs(RoundDecision(a=[1], lam=start.lam, p=p, f=f), profiles, channel)

    lam = start.lam
    bandwidth = P.uplink_bandwidth[0]
    tau = delay_b - float(np.asarray(downlink_delay(P, channel)).ravel()[0])
    cycles = (1 - lam[0]) * P.batch_size[0] * P.flops_per_sample[0] / P.flops_per_cycle[0]
    bits = (1 - lam[0]) * P.gradient_bits[0]

    def energy_at(dc):
        du = tau - dc
        power = np.expm1(bits / (bandwidth * du) * np.log(2)) * bandwidth * channel.noise_psd / channel.uplink_gain[0]
        freq = cycles / dc
        energy = np.sum(comp_energy(lam, [freq], P)) + np.sum(upload_energy(lam, [power], P, channel))
        return float(energy), power, freq

    def slope(dc):
        h = 1e-7 * dc
        return (energy_at(dc + h)[0] - energy_at(dc - h)[0]) / (2 * h)

    lo = cycles / P.f_max[0]
    hi = tau - bits / float(np.asarray(uplink_rate(P.p_max, P, channel)).ravel()[0])
    assert slope(lo) < 0 < slope(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            hi = mid
        else:
            lo = mid
    best_energy, best_power, best_freq = energy_at(0.5 * (lo + hi))

    assert result.round_delay == pytest.approx(delay_b, rel=1e-6)
    assert result.round_energy - result.broadcast_energy == pytest.approx(best_energy, rel=1e-4)
    assert f[0] == pytest.approx(best_freq, rel=1e-2)
    assert p[0] == pytest.approx(best_power, rel=5e-2)


def test_solve_with_room_for_one_client_picks_the_cheapest():
    gains = np.array([1e-5, 2e-5, 1e-4, 5e-6])
    channel = ChannelState(uplink_gain=gains, downlink_gain=gains, noise_psd=NOISE_PSD,
                           client_noise_psd=np.full(4, NOISE_PSD), downlink_bandwidth=1e5,
                           server_power=SERVER_POWER)
    profiles = build_profiles(MNIST_LENET, 4)
    generous = initialize(profiles, channel, Budget(1e3, 2.0), num_rounds=1)[0]
    report = round_costs(generous, profiles, channel)
    per_client = report.comp_energy + report.upload_energy
    cheapest = int(np.argmin(per_client))
    assert np.sort(per_client)[1] > per_client[cheapest] * 1.01

    budget = Budget(report.broadcast_energy + per_client[cheapest] * (1 + 1e-6), 2.0)
    result = solve(profiles, channel, np.ones(4), _constants(), budget, OptimizerOptions(outer_max_iter=5))
    expected = [0, 0, 0, 0]
    expected[cheapest] = 1
    assert result.decision.a.tolist() == expected
    assert result.feasible
