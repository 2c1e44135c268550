"""Alternating optimization of (p, f), lambda and a under energy / delay budgets.

One representative ``RoundDecision`` is shared by every round: channels and
phi are static, so budgets are split per round and the same decision is
certified against the per-round share.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from ..analysis.bound import BoundConstants, theta_for_decision
from ..analysis.generalization import check_finite_phi
from ..errors import (DomainError, InfeasibleProblemError, InfeasibleSubproblemError,
                      InvalidArgumentError)
from ..system.cost import (CostReport, RoundDecision, affine_costs, broadcast_energy, comm_delay,
                           comp_delay, comp_energy, downlink_delay, round_costs, upload_energy)
from ..system.wireless import (LN2, ChannelState, ClientProfile, ProfileArrays, ProfileLike,
                               stack_profiles, uplink_rate)
from .lp_solver import LPProblem, LPStatus, solve_lp

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
TIE_TOL = 1e-12


@dataclass(frozen=True)
class Budget:
    """Total energy (J) and delay (s) over all rounds, optionally with explicit per-round shares."""

    total_energy: float
    total_delay: float
    energy_per_round: tuple[float, ...] | None = None
    delay_per_round: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.total_energy < 0 or self.total_delay < 0:
            raise InvalidArgumentError(
                f"budgets must be nonnegative, got E0={self.total_energy}, T0={self.total_delay}"
            )
        for name in ("energy_per_round", "delay_per_round"):
            values = getattr(self, name)
            if values is not None and (len(values) == 0 or min(values) < 0):
                raise InvalidArgumentError(f"{name} must be a nonempty list of nonnegative values")

    def per_round(self, num_rounds: int) -> tuple[float, float]:
        """Budget the shared decision must meet in every round."""
        if num_rounds < 1:
            raise InvalidArgumentError(f"num_rounds must be >= 1, got {num_rounds}")
        shares = []
        for total, explicit, name in ((self.total_energy, self.energy_per_round, "energy"),
                                      (self.total_delay, self.delay_per_round, "delay")):
            if explicit is None:
                shares.append(total / num_rounds)
                continue
            if len(explicit) != num_rounds:
                raise InvalidArgumentError(f"{name}_per_round has {len(explicit)} entries for {num_rounds} rounds")
            if sum(explicit) > total * (1 + FEASIBILITY_TOL):
                raise InvalidArgumentError(f"{name}_per_round sums to {sum(explicit)}, above the total {total}")
            shares.append(min(explicit))
        return shares[0], shares[1]


@dataclass(frozen=True)
class OptimizerOptions:
    lambda_max: float = 0.5
    selection_mode: str = "auto"  # auto | exhaustive | greedy
    exhaustive_limit: int = 16
    outer_max_iter: int = 30
    outer_tol: float = 1e-9
    sca_max_iter: int = 50
    sca_tol: float = 1e-6
    selection_max_iter: int = 20
    energy_weight: float = 0.5
    delay_weight: float = 0.5
    pin_lambda: float | None = None
    pin_selection: bool = False
    pin_power: float | None = None
    pin_frequency_max: bool = False

    def __post_init__(self):
        if not 0 <= self.lambda_max < 1:
            raise InvalidArgumentError(f"lambda_max must lie in [0, 1), got {self.lambda_max}")
        if self.selection_mode not in ("auto", "exhaustive", "greedy"):
            raise InvalidArgumentError(f"unknown selection_mode {self.selection_mode!r}")
        if self.pin_lambda is not None and not 0 <= self.pin_lambda <= self.lambda_max:
            raise InvalidArgumentError(f"pin_lambda {self.pin_lambda} outside [0, {self.lambda_max}]")
        if self.pin_power is not None and not self.pin_power > 0:
            raise InvalidArgumentError(f"pin_power must be > 0, got {self.pin_power}")
        if self.energy_weight < 0 or self.delay_weight < 0 or self.energy_weight + self.delay_weight == 0:
            raise InvalidArgumentError("slack weights must be nonnegative and not both zero")


@dataclass
class SCAState:
    """One SCA iterate after backtracking, scored with the true costs."""

    iteration: int
    energy_slack: float
    delay_slack: float
    weighted_slack: float
    surrogate_energy: float
    mean_power: float
    mean_frequency: float
    mean_slope: float
    accepted: bool
    outer: int = 0


@dataclass
class SelectionState:
    """Auxiliary bound ``mu`` and the selection it was made tight for."""

    iteration: int
    mu: float
    selected: str  # one 0/1 character per client
    num_selected: int
    objective: float
    source: str  # alternation | argmin
    outer: int = 0


@dataclass
class TraceRow:
    iteration: int
    stage: str
    theta: float
    energy_slack: float
    delay_slack: float
    delta_theta: float
    accepted: bool
    selected: int
    mean_lambda: float


@dataclass
class OptimizationResult:
    decision: RoundDecision
    decisions: list[RoundDecision]
    theta: float
    cost: CostReport
    trace: list[TraceRow] = field(default_factory=list)
    sca_trace: list[SCAState] = field(default_factory=list)
    selection_trace: list[SelectionState] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.trace[-1].energy_slack >= -FEASIBILITY_TOL and self.trace[-1].delay_slack >= -FEASIBILITY_TOL


@dataclass(frozen=True)
class _Instance:
    profiles: ProfileArrays
    channel: ChannelState
    energy_budget: float
    delay_budget: float
    broadcast: float
    downlink: np.ndarray
    options: OptimizerOptions


def _instance(profiles, channel: ChannelState, budget: Budget, num_rounds: int,
              options: OptimizerOptions | None) -> _Instance:
    arrays = profiles if isinstance(profiles, ProfileArrays) else stack_profiles(profiles)
    options = options or OptimizerOptions()
    if options.pin_power is not None and np.any(options.pin_power > arrays.p_max):
        raise InvalidArgumentError(f"pin_power {options.pin_power} W exceeds a client's p_max")
    energy_b, delay_b = budget.per_round(num_rounds)
    return _Instance(
        profiles=arrays,
        channel=channel,
        energy_budget=energy_b,
        delay_budget=delay_b,
        broadcast=broadcast_energy(arrays, channel),
        downlink=np.asarray(downlink_delay(arrays, channel), dtype=np.float64),
        options=options,
    )


def _slacks(inst: _Instance, decision: RoundDecision) -> tuple[float, float, CostReport]:
    report = round_costs(decision, inst.profiles, inst.channel)
    energy_slack = (inst.energy_budget - report.round_energy) / inst.energy_budget
    delay_slack = (inst.delay_budget - report.round_delay) / inst.delay_budget
    return energy_slack, delay_slack, report


def _feasible(energy_slack: float, delay_slack: float) -> bool:
    return energy_slack >= -FEASIBILITY_TOL and delay_slack >= -FEASIBILITY_TOL


def _weighted(inst: _Instance, energy_slack: float, delay_slack: float) -> float:
    opts = inst.options
    return opts.energy_weight * energy_slack + opts.delay_weight * delay_slack


def initialize(profiles: Sequence[ClientProfile] | ProfileArrays, channel: ChannelState, budget: Budget,
               num_rounds: int, options: OptimizerOptions | None = None) -> list[RoundDecision]:
    """Feasible starting decision: lambda at its cap, full power, slowest CPU meeting the delay share.

    Clients that cannot meet the delay share alone are dropped first, then the
    most expensive ones by normalized cost until the energy share fits.
    """
    inst = _instance(profiles, channel, budget, num_rounds, options)
    opts, P = inst.options, inst.profiles
    n = len(P)
    if inst.delay_budget <= 0:
        raise InfeasibleProblemError("delay budget is zero", binding_constraint="delay")
    if inst.energy_budget <= 0:
        raise InfeasibleProblemError("energy budget is zero", binding_constraint="energy")

    lam = np.full(n, opts.lambda_max if opts.pin_lambda is None else opts.pin_lambda)
    p = P.p_max.copy() if opts.pin_power is None else np.full(n, opts.pin_power)
    comm = np.asarray(comm_delay(lam, p, P, channel))
    work = (1.0 - lam) * P.batch_size * P.flops_per_sample
    if opts.pin_frequency_max:
        f = P.f_max.copy()
    else:
        remaining = inst.delay_budget - comm
        with np.errstate(divide="ignore", invalid="ignore"):
            f_needed = np.where(remaining > 0, work / (P.flops_per_cycle * remaining), np.inf)
        f = np.where(f_needed <= P.f_max, f_needed, P.f_max)
    delay = comm + np.asarray(comp_delay(lam, f, P))
    delay_ok = delay <= inst.delay_budget * (1 + FEASIBILITY_TOL)
    energy = np.asarray(comp_energy(lam, f, P)) + np.asarray(upload_energy(lam, p, P, channel))

    if opts.pin_selection:
        if not delay_ok.all():
            raise InfeasibleProblemError(
                f"clients {np.flatnonzero(~delay_ok).tolist()} cannot meet the per-round delay "
                f"{inst.delay_budget:.6g} s", binding_constraint="delay")
        if energy.sum() + inst.broadcast > inst.energy_budget * (1 + FEASIBILITY_TOL):
            raise InfeasibleProblemError(
                f"all clients need {energy.sum() + inst.broadcast:.6g} J per round, budget "
                f"{inst.energy_budget:.6g} J", binding_constraint="energy")
        a = np.ones(n, dtype=np.int64)
    else:
        a = delay_ok.astype(np.int64)
        if a.sum() == 0:
            raise InfeasibleProblemError(
                f"no client meets the per-round delay {inst.delay_budget:.6g} s even at f_max",
                binding_constraint="delay")
        score = energy / inst.energy_budget + delay / inst.delay_budget
        while energy[a == 1].sum() + inst.broadcast > inst.energy_budget * (1 + FEASIBILITY_TOL):
            if a.sum() == 1:
                raise InfeasibleProblemError(
                    f"even the cheapest client needs {energy[a == 1].sum() + inst.broadcast:.6g} J "
                    f"per round, budget {inst.energy_budget:.6g} J", binding_constraint="energy")
            worst = int(np.argmax(np.where(a == 1, score, -np.inf)))
            a[worst] = 0
            logger.debug(f"Initializer dropped client {worst} (normalized cost {score[worst]:.4g})")

    decision = RoundDecision(a=a, lam=lam, p=p, f=f)
    logger.info(f"Initial decision selects {int(a.sum())}/{n} clients at lambda={lam[0]:.3g}")
    return [decision] * num_rounds


def sca_linearize(p0, profile: ProfileLike, channel: ChannelState):
    """Tangent of the energy-per-payload p H / r(p) at p0: returns (value, slope)."""
    p0 = np.asarray(p0, dtype=np.float64)
    if np.any(p0 <= 0):
        raise DomainError("linearization point p0 must be > 0")
    c, bits = profile.uplink_bandwidth, profile.gradient_bits
    h = channel.uplink_gain[profile.client_id]
    log_term = np.log1p(p0 * h / (c * channel.noise_psd)) / LN2
    value = p0 * bits / (c * log_term)
    slope = bits / (c * log_term) - p0 * bits * h / (c * log_term ** 2 * (c * channel.noise_psd + p0 * h) * LN2)
    if value.ndim == 0:
        return float(value), float(slope)
    return value, slope


def _sca_step(inst: _Instance, sel: np.ndarray, lam: np.ndarray, p0: np.ndarray, f0: np.ndarray):
    """Solve the linearized resource problem for the selected clients; returns (p, f, surrogate)."""
    opts, P, ch = inst.options, inst.profiles, inst.channel
    idx = np.flatnonzero(sel)
    sub = ProfileArrays(**{name: getattr(P, name)[idx] for name in P.__dataclass_fields__})
    lam_s, p0_s = lam[idx], p0[idx]
    h = ch.uplink_gain[sub.client_id]
    value, slope = sca_linearize(p0_s, sub, ch)

    work = (1.0 - lam_s) * sub.batch_size * sub.flops_per_sample
    K = sub.pue * sub.switch_cap * work ** 3 / sub.flops_per_cycle ** 3
    A = (1.0 - lam_s) * sub.gradient_bits / sub.uplink_bandwidth
    noise = sub.uplink_bandwidth * ch.noise_psd / h
    dc_min = work / (sub.flops_per_cycle * sub.f_max)
    if opts.pin_power is not None:
        du_lo = (1.0 - lam_s) * sub.gradient_bits / np.asarray(uplink_rate(np.full(idx.size, opts.pin_power), sub, ch))
    else:
        du_lo = (1.0 - lam_s) * sub.gradient_bits / np.asarray(uplink_rate(sub.p_max, sub, ch))
    D = inst.downlink[idx]

    def power_for(du):
        return np.expm1(A / du * LN2) * noise

    def split(t):
        tau = t - D
        if opts.pin_frequency_max:
            return np.broadcast_to(dc_min, tau.shape).copy(), tau
        if opts.pin_power is not None:
            return tau - du_lo, tau
        lo, hi = dc_min.copy(), tau - du_lo
        deriv = lambda dc: (-2.0 * K / dc ** 3
                            + (1.0 - lam_s) * slope * noise * LN2 * np.exp2(A / (tau - dc)) * A / (tau - dc) ** 2)
        left, right = deriv(lo) >= 0, deriv(hi) <= 0
        a_, b_ = lo.copy(), hi.copy()
        for _ in range(100):
            mid = 0.5 * (a_ + b_)
            up = deriv(mid) > 0
            b_ = np.where(up, mid, b_)
            a_ = np.where(up, a_, mid)
        dc = 0.5 * (a_ + b_)
        dc = np.where(left, lo, np.where(right, hi, dc))
        return dc, tau

    def surrogate_energy(t):
        dc, tau = split(t)
        du = tau - dc
        p = p0_s if opts.pin_power is not None else power_for(du)
        upload = (1.0 - lam_s) * (value + slope * (p - p0_s))
        return float(np.sum(K / dc ** 2 + upload) + inst.broadcast)

    t_lo = float(np.max(D + dc_min + du_lo))
    t_hi = inst.delay_budget
    if t_lo > t_hi:
        return None

    def neg_weighted(t):
        e_slack = (inst.energy_budget - surrogate_energy(t)) / inst.energy_budget
        d_slack = (inst.delay_budget - t) / inst.delay_budget
        return -(opts.energy_weight * e_slack + opts.delay_weight * d_slack)

    if t_hi - t_lo <= 1e-12 * t_hi:
        t_best = t_hi
    else:
        res = minimize_scalar(neg_weighted, bounds=(t_lo, t_hi), method="bounded",
                              options={"xatol": 1e-10 * t_hi})
        t_best = float(res.x)
        # bounded Brent never evaluates the endpoints
        for edge in (t_lo, t_hi):
            if neg_weighted(edge) < neg_weighted(t_best):
                t_best = edge
    dc, tau = split(t_best)
    du = tau - dc
    p = p0.copy()
    f = f0.copy()
    if opts.pin_power is None:
        p[idx] = np.minimum(power_for(du), sub.p_max)
    if not opts.pin_frequency_max:
        f[idx] = np.minimum(work / (sub.flops_per_cycle * dc), sub.f_max)
    return p, f, value, slope, surrogate_energy(t_best)


def sca_resources(decision: RoundDecision, profiles: Sequence[ClientProfile] | ProfileArrays,
                  channel: ChannelState, budget: Budget, num_rounds: int,
                  options: OptimizerOptions | None = None,
                  trace: list[SCAState] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Successive convex approximation of (p, f) at fixed (a, lambda).

    Maximizes the weighted energy / delay slack. Each candidate is checked
    against the true costs, pulled halfway back toward the previous iterate
    while infeasible, and accepted only if the true slack improves by more
    than ``sca_tol``. Slack budgets do not stop the search on their own; a
    start that no iterate improves on comes back unchanged.
    """
    inst = _instance(profiles, channel, budget, num_rounds, options)
    opts = inst.options
    p, f = decision.p.copy(), decision.f.copy()
    e_slack, d_slack, _ = _slacks(inst, decision)
    if not _feasible(e_slack, d_slack):
        raise InvalidArgumentError("sca_resources needs a feasible starting point")
    if opts.pin_power is not None and opts.pin_frequency_max:
        return p, f

    current = _weighted(inst, e_slack, d_slack)
    sel = decision.selected
    for k in range(1, opts.sca_max_iter + 1):
        step = _sca_step(inst, sel, decision.lam, p, f)
        if step is None:
            break
        p_new, f_new, value, slope, surrogate = step
        for _ in range(60):
            cand = replace(decision, p=p_new, f=f_new)
            ce, cd, _ = _slacks(inst, cand)
            if _feasible(ce, cd):
                break
            p_new, f_new = 0.5 * (p + p_new), 0.5 * (f + f_new)
        else:
            logger.debug("SCA backtracking did not recover feasibility; keeping previous iterate")
            break
        weighted = _weighted(inst, ce, cd)
        accepted = weighted - current > opts.sca_tol
        if trace is not None:
            trace.append(SCAState(iteration=k, energy_slack=ce, delay_slack=cd, weighted_slack=weighted,
                                  surrogate_energy=surrogate, mean_power=float(p_new[sel].mean()),
                                  mean_frequency=float(f_new[sel].mean()),
                                  mean_slope=float(np.mean(slope)), accepted=accepted))
        logger.debug(f"SCA iterate {k}: energy slack {ce:.4g}, delay slack {cd:.4g}, surrogate {surrogate:.4g} J")
        if not accepted:
            break
        p, f, current = p_new, f_new, weighted
    return p, f


def lp_pruning(decision: RoundDecision, profiles: Sequence[ClientProfile] | ProfileArrays,
               channel: ChannelState, budget: Budget, constants: BoundConstants,
               options: OptimizerOptions | None = None) -> np.ndarray:
    """Smallest total pruning meeting the budgets at fixed (a, p, f); deselected clients get 0."""
    inst = _instance(profiles, channel, budget, constants.num_rounds, options)
    opts = inst.options
    sel = decision.selected
    idx = np.flatnonzero(sel)
    if idx.size == 0:
        raise InfeasibleSubproblemError("no client selected")
    coef = affine_costs(decision.p, decision.f, inst.profiles, channel)
    X, Y, D = coef.energy_coef[idx], coef.delay_coef[idx], coef.delay_const[idx]

    weight = constants.gamma2 / idx.size if constants.gamma2 > 0 else 1.0
    A_ub = np.vstack([-X[None, :], -np.diag(Y)])
    b_ub = np.concatenate([[inst.energy_budget - inst.broadcast - X.sum()], inst.delay_budget - D - Y])
    if opts.pin_lambda is not None:
        lo = hi = np.full(idx.size, opts.pin_lambda)
    else:
        lo, hi = np.zeros(idx.size), np.full(idx.size, opts.lambda_max)
    solution = solve_lp(LPProblem(c=np.full(idx.size, weight), A_ub=A_ub, b_ub=b_ub, lo=lo, hi=hi))
    logger.debug(f"Pruning LP status {solution.status.value} after {solution.iterations} pivots")
    if solution.status is not LPStatus.OPTIMAL:
        raise InfeasibleSubproblemError(f"pruning LP is {solution.status.value}")
    lam = np.zeros(decision.num_clients)
    lam[idx] = solution.x
    return lam


def _subset_masks(num_clients: int) -> np.ndarray:
    codes = np.arange(1, 1 << num_clients, dtype=np.int64)
    return ((codes[:, None] >> np.arange(num_clients)) & 1).astype(np.int64)


def _prefix_masks(order: np.ndarray, num_clients: int) -> np.ndarray:
    masks = np.zeros((order.size, num_clients), dtype=np.int64)
    for k in range(order.size):
        masks[k, order[:k + 1]] = 1
    return masks


def _pick(candidates: np.ndarray, masks: np.ndarray, objective: np.ndarray, cardinality: np.ndarray,
          max_cardinality_first: bool) -> int:
    """Deterministic choice among candidate rows.

    Objective ties (within TIE_TOL) go to the larger subset, then to the
    lexicographically smallest index set. With ``max_cardinality_first`` the
    cardinality is compared before the objective.
    """
    if max_cardinality_first:
        candidates = candidates[cardinality[candidates] == cardinality[candidates].max()]
    best = objective[candidates].min()
    tied = candidates[objective[candidates] <= best + TIE_TOL * max(1.0, abs(best))]
    tied = tied[cardinality[tied] == cardinality[tied].max()]
    return int(min(tied, key=lambda r: tuple(np.flatnonzero(masks[r]))))


def _bits(mask: np.ndarray) -> str:
    return "".join(str(int(v)) for v in mask)


def select_clients(decision: RoundDecision, phi: Sequence[float] | np.ndarray,
                   profiles: Sequence[ClientProfile] | ProfileArrays, channel: ChannelState,
                   constants: BoundConstants, budget: Budget, options: OptimizerOptions | None = None,
                   trace: list[SelectionState] | None = None) -> np.ndarray:
    """Selection at fixed (lambda, p, f) via the auxiliary-variable alternation.

    Starting from the incumbent ``decision.a``, ``mu`` is set tight for the
    current selection and the largest affordable subset whose coupling term
    stays within ``mu`` becomes the next selection. The loop stops once the
    objective no longer drops. Candidates are all nonempty subsets
    (exhaustive) or the ascending-phi prefixes (greedy); the best candidate
    replaces the alternation result when it is strictly better.
    """
    inst = _instance(profiles, channel, budget, constants.num_rounds, options)
    opts = inst.options
    phi = check_finite_phi(phi)
    n = decision.num_clients
    coef = affine_costs(decision.p, decision.f, inst.profiles, channel)
    keep = 1.0 - decision.lam
    delay_ok = keep * coef.delay_coef + coef.delay_const <= inst.delay_budget * (1 + FEASIBILITY_TOL)
    # clients failing the delay share never enter a mask; zero them so inf * 0 cannot poison sums
    energy = np.where(delay_ok, keep * coef.energy_coef, 0.0)
    energy_cap = inst.energy_budget * (1 + FEASIBILITY_TOL)

    mode = opts.selection_mode
    if mode == "auto":
        mode = "exhaustive" if n <= opts.exhaustive_limit else "greedy"
    if mode == "exhaustive":
        if n > 20:
            raise InvalidArgumentError(f"exhaustive selection over {n} clients is too large")
        masks = _subset_masks(n)
        masks = masks[~np.any((masks == 1) & ~delay_ok, axis=1)]
    else:
        order = np.flatnonzero(delay_ok)
        order = order[np.argsort(phi[order], kind="stable")]
        masks = _prefix_masks(order, n)
    masks = masks[masks @ energy + inst.broadcast <= energy_cap]

    incumbent = np.asarray(decision.a, dtype=np.int64)
    incumbent_ok = (incumbent.any() and not np.any((incumbent == 1) & ~delay_ok)
                    and incumbent @ energy + inst.broadcast <= energy_cap)
    if incumbent_ok and not np.all(masks == incumbent, axis=1).any():
        masks = np.vstack([masks, incumbent[None, :]])
    if masks.shape[0] == 0:
        raise InfeasibleSubproblemError("no client subset meets the per-round budgets")

    k = masks.sum(axis=1).astype(np.float64)
    coupling = constants.gamma1 * (masks @ phi) ** 2 + constants.gamma2 * (masks @ decision.lam)
    objective = (constants.beta + coupling) / k
    rows = np.arange(masks.shape[0])
    states: list[SelectionState] = []

    def record(row: int, source: str) -> None:
        states.append(SelectionState(iteration=len(states) + 1, mu=float(coupling[row]),
                                     selected=_bits(masks[row]), num_selected=int(k[row]),
                                     objective=float(objective[row]), source=source))

    best = _pick(rows, masks, objective, k, max_cardinality_first=False)
    if incumbent_ok:
        current = int(np.flatnonzero(np.all(masks == incumbent, axis=1))[0])
    else:
        logger.debug("Incumbent selection is no longer affordable; starting from the best candidate")
        current = best
    for _ in range(opts.selection_max_iter):
        mu = coupling[current]
        record(current, "alternation")
        admissible = rows[coupling <= mu + TIE_TOL * max(1.0, abs(mu))]
        nxt = _pick(admissible, masks, objective, k, max_cardinality_first=True)
        if objective[nxt] >= objective[current] - TIE_TOL * max(1.0, abs(objective[current])):
            break
        current = nxt
    if objective[best] < objective[current] - TIE_TOL * max(1.0, abs(objective[current])):
        logger.debug(f"Alternation stopped at {objective[current]:.6g}; best candidate reaches {objective[best]:.6g}")
        current = best
        record(current, "argmin")
    if trace is not None:
        trace.extend(states)
    return masks[current].copy()


def solve(profiles: Sequence[ClientProfile] | ProfileArrays, channel: ChannelState,
          phi: Sequence[float] | np.ndarray, constants: BoundConstants, budget: Budget,
          options: OptimizerOptions | None = None) -> OptimizationResult:
    """Alternate SCA (p, f), the pruning LP and client selection until theta stops improving.

    A subproblem result replaces the incumbent only if it stays feasible and
    does not increase theta.
    """
    options = options or OptimizerOptions()
    inst = _instance(profiles, channel, budget, constants.num_rounds, options)
    phi = check_finite_phi(phi)
    if phi.size != len(inst.profiles):
        raise InvalidArgumentError(f"phi has {phi.size} entries for {len(inst.profiles)} clients")

    decision = initialize(inst.profiles, channel, budget, constants.num_rounds, options)[0]
    e_slack, d_slack, report = _slacks(inst, decision)
    current = theta_for_decision(decision, phi, constants)
    trace = [TraceRow(0, "init", current, e_slack, d_slack, 0.0, True,
                      decision.num_selected, float(decision.lam[decision.selected].mean()))]
    sca_trace: list[SCAState] = []
    selection_trace: list[SelectionState] = []

    def consider(stage: str, candidate: RoundDecision, iteration: int) -> None:
        nonlocal decision, current, report
        ce, cd, rep = _slacks(inst, candidate)
        value = theta_for_decision(candidate, phi, constants)
        accepted = _feasible(ce, cd) and value <= current + TIE_TOL * max(1.0, abs(current))
        delta = 0.0
        if accepted:
            delta = min(value - current, 0.0)
            decision, current, report = candidate, min(value, current), rep
        else:
            logger.warning(f"Rejected {stage} result at iteration {iteration} "
                           f"(theta {value:.6g} vs {current:.6g}, slack E {ce:.3g} T {cd:.3g})")
            ce, cd, _ = _slacks(inst, decision)
        trace.append(TraceRow(iteration, stage, current, ce, cd, delta, accepted,
                              decision.num_selected, float(decision.lam[decision.selected].mean())))

    for o in range(1, options.outer_max_iter + 1):
        before = current
        if not (options.pin_power is not None and options.pin_frequency_max):
            steps: list[SCAState] = []
            p, f = sca_resources(decision, inst.profiles, channel, budget, constants.num_rounds, options, trace=steps)
            sca_trace.extend(replace(s, outer=o) for s in steps)
            consider("sca", replace(decision, p=p, f=f), o)
        try:
            lam = lp_pruning(decision, inst.profiles, channel, budget, constants, options)
            consider("lp", replace(decision, lam=lam), o)
        except InfeasibleSubproblemError as exc:
            logger.warning(f"Pruning LP failed at iteration {o}: {exc}; keeping previous lambda")
        if not options.pin_selection:
            try:
                states: list[SelectionState] = []
                a = select_clients(decision, phi, inst.profiles, channel, constants, budget, options, trace=states)
                selection_trace.extend(replace(s, outer=o) for s in states)
                consider("selection", replace(decision, a=a), o)
            except InfeasibleSubproblemError as exc:
                logger.warning(f"Client selection failed at iteration {o}: {exc}; keeping previous selection")
        logger.info(f"Outer iteration {o}: theta={current:.6g} selected={decision.num_selected}")
        if before - current < options.outer_tol:
            break

    return OptimizationResult(decision=decision, decisions=[decision] * constants.num_rounds,
                              theta=current, cost=report, trace=trace,
                              sca_trace=sca_trace, selection_trace=selection_trace)
