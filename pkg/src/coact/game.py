"""Hedonic coalition formation over shared density estimates.

Payoffs are deterministic functions of coalition membership: every stochastic
ingredient (validation draws) is tied to a sub-seed derived from the state
seed and the pair of nodes involved, never from the coalition being scored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .bayes import PriorBundle, dp_posterior, fusion_weights, validate_priors
from .density import kde_estimate, kl_divergence
from .seeds import spawn_rng

JOIN_CEILING_PER_NODE = 50


class InvariantViolation(RuntimeError):
    """A runtime guarantee (welfare monotonicity, termination, coverage) broke."""


@dataclass(frozen=True)
class GameParams:
    """Pricing and validation knobs shared by every payoff evaluation."""

    kappa: float
    eta: float = 0.05
    n_check: int = 100
    grid_size: int = 512

    def __post_init__(self):
        if not (0.0 < self.kappa <= 1.0):
            raise ValueError(f"kappa must be in (0, 1], got {self.kappa}")
        if not (0.0 < self.eta < 1.0):
            raise ValueError(f"eta must be in (0, 1), got {self.eta}")
        if self.n_check < 5:
            raise ValueError("n_check must be >= 5")
        if self.grid_size < 64:
            raise ValueError("grid_size must be >= 64")


@dataclass(frozen=True)
class Coalition:
    members: frozenset[int]

    def __post_init__(self):
        members = frozenset(int(m) for m in self.members)
        if not members:
            raise ValueError("coalition must be nonempty")
        object.__setattr__(self, "members", members)

    @property
    def size(self):
        return len(self.members)


@dataclass(frozen=True)
class Partition:
    coalitions: tuple[Coalition, ...]

    def __post_init__(self):
        object.__setattr__(self, "coalitions", tuple(self.coalitions))
        total = sum(c.size for c in self.coalitions)
        union = frozenset().union(*(c.members for c in self.coalitions)) if self.coalitions else frozenset()
        if len(union) != total:
            raise ValueError("coalitions must be pairwise disjoint")

    @property
    def nodes(self):
        return frozenset().union(*(c.members for c in self.coalitions)) if self.coalitions else frozenset()

    def coalition_of(self, node):
        for coalition in self.coalitions:
            if node in coalition.members:
                return coalition
        raise ValueError(f"node {node} not in partition")

    def sizes(self):
        return [c.size for c in self.coalitions]


def singleton_partition(nodes):
    return Partition(tuple(Coalition(frozenset({n})) for n in sorted(nodes)))


@dataclass(frozen=True)
class PayoffRecord:
    per_source: dict[int, float]
    cost: float
    total: float

    def __post_init__(self):
        expected = math.fsum(self.per_source.values()) - self.cost
        if abs(expected - self.total) > 1e-9:
            raise ValueError("payoff total inconsistent with per-source utilities")


@dataclass(frozen=True)
class JoinEvent:
    """One executed join: node left `source_members`, entered `target_members`.

    `target_members` is the coalition as it stood before the node entered;
    empty means the node split off into a fresh singleton.
    """

    node: int
    source_members: frozenset[int]
    target_members: frozenset[int]


@dataclass(frozen=True)
class FormationResult:
    partition: Partition
    events: tuple[JoinEvent, ...]
    scans: int
    welfare_trajectory: tuple[float, ...]

    @property
    def joins(self):
        return len(self.events)


@dataclass
class NetworkState:
    """Agent-side view: observations, kernel estimates, counts, and caches.

    Contains no ground-truth objects; formation reads nothing but this.
    """

    nodes: tuple[int, ...]
    sources: tuple[int, ...]
    params: GameParams
    seed: int
    observations: dict
    counts: dict
    estimates: dict
    extended_estimates: dict
    cache_enabled: bool = True
    _accept: dict = field(default_factory=dict, repr=False)
    _utility: dict = field(default_factory=dict, repr=False)
    _payoff: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, observations, params, seed, cache_enabled=True):
        keys = set(observations)
        nodes = tuple(sorted({i for i, _ in keys}))
        sources = tuple(sorted({k for _, k in keys}))
        if keys != {(i, k) for i in nodes for k in sources}:
            raise ValueError("observations must cover every node-source pair")
        counts, estimates, extended = {}, {}, {}
        for key, obs in observations.items():
            counts[key] = int(obs.count)
            estimates[key] = kde_estimate(obs.working, params.grid_size)
            extended[key] = kde_estimate(obs.combined(), params.grid_size)
        return cls(
            nodes=nodes,
            sources=sources,
            params=params,
            seed=int(seed),
            observations=dict(observations),
            counts=counts,
            estimates=estimates,
            extended_estimates=extended,
            cache_enabled=cache_enabled,
        )

    def clear_caches(self):
        self._accept.clear()
        self._utility.clear()
        self._payoff.clear()

    def accept(self, node, partner, source):
        """Does `node` validate the prior offered by `partner` for `source`?"""
        if node == partner:
            raise ValueError("a node does not validate its own estimate")
        key = (node, partner, source)
        if self.cache_enabled and key in self._accept:
            return self._accept[key]
        rng = spawn_rng(self.seed, "ksval", node, partner, source)
        bundle = PriorBundle(
            source_node=partner,
            source_count=self.counts[(partner, source)],
            density=self.estimates[(partner, source)],
        )
        ok = bool(
            validate_priors(
                self.estimates[(node, source)], [bundle],
                self.params.eta, self.params.n_check, rng,
            )
        )
        if self.cache_enabled:
            self._accept[key] = ok
        return ok

    def validated_partners(self, node, source, members):
        return tuple(
            l for l in sorted(members)
            if l != node and self.accept(node, l, source)
        )


def source_utility(node, source, coalition, state):
    """Expected posterior shift from the holdout batch, negated (Kullback-Leibler)."""
    if node not in coalition.members:
        raise ValueError("node must belong to the coalition")
    if (node, source) not in state.counts:
        raise ValueError(f"missing observations for node {node}, source {source}")
    partners = state.validated_partners(node, source, coalition.members)
    key = (node, source, partners)
    if state.cache_enabled and key in state._utility:
        return state._utility[key]
    weights = fusion_weights(
        state.counts[(node, source)],
        [(l, state.counts[(l, source)]) for l in partners],
    )
    bundles = [
        PriorBundle(l, state.counts[(l, source)], state.estimates[(l, source)])
        for l in partners
    ]
    post_now = dp_posterior(state.estimates[(node, source)], bundles, weights)
    post_ahead = dp_posterior(state.extended_estimates[(node, source)], bundles, weights)
    value = -kl_divergence(post_now, post_ahead)
    if state.cache_enabled:
        state._utility[key] = value
    return value


def coalition_cost(size, kappa):
    """Linear membership price kappa * (|S| - 1); singletons are free."""
    if size < 1:
        raise ValueError("coalition size must be >= 1")
    return kappa * (size - 1)


def node_payoff(node, coalition, state):
    key = (node, coalition.members)
    if state.cache_enabled and key in state._payoff:
        return state._payoff[key]
    per_source = {k: source_utility(node, k, coalition, state) for k in state.sources}
    cost = coalition_cost(coalition.size, state.params.kappa)
    record = PayoffRecord(
        per_source=per_source,
        cost=cost,
        total=math.fsum(per_source.values()) - cost,
    )
    if state.cache_enabled:
        state._payoff[key] = record
    return record


def _value(members, state):
    # coalition value v(S); v of the empty set is zero
    if not members:
        return 0.0
    coalition = Coalition(members)
    return math.fsum(node_payoff(j, coalition, state).total for j in sorted(members))


def social_welfare(partition, state):
    return math.fsum(_value(c.members, state) for c in partition.coalitions)


def preference_value(node, coalition, state):
    """Payoff of `node` in `coalition`, or -inf when any other member is hurt
    relative to the same coalition without `node`."""
    if node not in coalition.members:
        raise ValueError("node must belong to the coalition")
    for j in sorted(coalition.members - {node}):
        reduced = Coalition(coalition.members - {node})
        if node_payoff(j, coalition, state).total < node_payoff(j, reduced, state).total:
            return -math.inf
    return node_payoff(node, coalition, state).total


def prefers_join(node, target, current, state):
    """Would `node` strictly prefer leaving `current` for `target`?

    `target` is a Coalition or None for the empty set. True requires both the
    preference comparison (on the sentinel-guarded value) and a strict gain in
    the summed value of the two affected coalitions.
    """
    target_members = target.members if target is not None else frozenset()
    if node in target_members:
        raise ValueError("node already belongs to the target coalition")
    if node not in current.members:
        raise ValueError("node must belong to its current coalition")
    new_members = target_members | {node}
    if new_members == current.members:
        return False
    q_new = preference_value(node, Coalition(new_members), state)
    q_cur = preference_value(node, current, state)
    if not q_new > q_cur:
        return False
    gain = math.fsum([
        _value(new_members, state),
        _value(current.members - {node}, state),
        -_value(target_members, state),
        -_value(current.members, state),
    ])
    return gain > 0.0


def _check_cover(coalition_sets, nodes):
    total = sum(len(m) for m in coalition_sets)
    union = set().union(*coalition_sets) if coalition_sets else set()
    if total != len(union) or union != set(nodes):
        raise InvariantViolation("partition no longer disjoint and covering")


def run_formation(initial, state, order="round_robin", best_improvement=False):
    """Iterate the join rule until no node moves; returns the stable outcome.

    Each scan visits every node in the policy's order; the node weighs every
    coalition of the current partition plus the empty set and executes the
    first (or best, under best_improvement) strictly preferred join. Social
    welfare must strictly increase on every join and the total join count is
    capped at 50 per node, both enforced as runtime invariants.
    """
    if order not in ("round_robin", "random"):
        raise ValueError(f"unknown join order {order!r}")
    coalition_sets = [c.members for c in initial.coalitions]
    union = set().union(*coalition_sets) if coalition_sets else set()
    if sum(len(m) for m in coalition_sets) != len(union) or union != set(state.nodes):
        raise ValueError("initial partition must exactly cover the state's nodes")
    order_rng = spawn_rng(state.seed, "join-order") if order == "random" else None
    welfare = social_welfare(initial, state)
    trajectory = [welfare]
    events = []
    max_joins = JOIN_CEILING_PER_NODE * len(state.nodes)
    scans = 0
    while True:
        scans += 1
        if order_rng is None:
            node_order = list(state.nodes)
        else:
            node_order = [state.nodes[i] for i in order_rng.permutation(len(state.nodes))]
        moved = False
        for node in node_order:
            current_members = next(m for m in coalition_sets if node in m)
            current = Coalition(current_members)
            candidates = [m for m in coalition_sets if node not in m]
            if len(current_members) > 1:
                candidates.append(frozenset())
            selected = None
            best_q = -math.inf
            for target_members in candidates:
                target = Coalition(target_members) if target_members else None
                if not prefers_join(node, target, current, state):
                    continue
                if not best_improvement:
                    selected = target_members
                    break
                q = preference_value(node, Coalition(target_members | {node}), state)
                if selected is None or q > best_q:
                    selected, best_q = target_members, q
            if selected is None:
                continue
            delta = math.fsum([
                _value(selected | {node}, state),
                _value(current_members - {node}, state),
                -_value(selected, state),
                -_value(current_members, state),
            ])
            next_sets = []
            for m in coalition_sets:
                if m == current_members:
                    rest = m - {node}
                    if rest:
                        next_sets.append(rest)
                elif m == selected:
                    next_sets.append(m | {node})
                else:
                    next_sets.append(m)
            if not selected:
                next_sets.append(frozenset({node}))
            coalition_sets = next_sets
            _check_cover(coalition_sets, state.nodes)
            next_welfare = welfare + delta
            if not next_welfare > welfare:
                raise InvariantViolation("social welfare did not strictly increase on a join")
            welfare = next_welfare
            trajectory.append(welfare)
            events.append(JoinEvent(node=node, source_members=current_members,
                                    target_members=selected))
            if len(events) > max_joins:
                raise InvariantViolation(
                    f"join count exceeded {JOIN_CEILING_PER_NODE} per node; formation is cycling"
                )
            moved = True
        if not moved:
            break
    partition = Partition(tuple(Coalition(m) for m in coalition_sets))
    return FormationResult(
        partition=partition,
        events=tuple(events),
        scans=scans,
        welfare_trajectory=tuple(trajectory),
    )


def is_nash_stable(partition, state):
    """No node strictly prefers any other coalition of the partition, nor the
    empty set."""
    for node in state.nodes:
        current = partition.coalition_of(node)
        for target in partition.coalitions:
            if node in target.members:
                continue
            if prefers_join(node, target, current, state):
                return False
        if current.size > 1 and prefers_join(node, None, current, state):
            return False
    return True
