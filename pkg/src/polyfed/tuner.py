"""Workload-driven tuning: tabular Q-learning over a deterministic cost model.

State is a discretized key (index bitmap, view bitmap, per-candidate
frequency bucket); actions create/drop indexes, materialize views,
enable rewrite rules, or do nothing.  Reward is the relative workload
cost change minus a storage penalty, so learning needs no wall clock.
"""

import math
import random
from dataclasses import dataclass, field

from . import costmodel
from .costmodel import PhysicalConfig, QueryDescriptor, TableStats
from .errors import InvalidAction

ALPHA = 0.1
GAMMA = 0.9
LAMBDA = 0.01
WINDOW = 100
EPSILON_START = 0.3
EPSILON_DECAY = 0.99
EPSILON_MIN = 0.01

BUCKET_LOW_EDGE = 0.1
BUCKET_HIGH_EDGE = 0.3


@dataclass(frozen=True)
class QueryLogEntry:
    digest: str
    dialect: str
    tables: tuple = ()
    equality_columns: tuple = ()       # of (table, column)
    range_columns: tuple = ()          # of (table, column)
    join_pairs: tuple = ()             # of (table, column, table, column)
    latency_ms: float = 0.0
    cost_units: int = 0
    timestamp: float = 0.0
    text: str = ""
    descriptor: QueryDescriptor | None = None

    def to_dict(self) -> dict:
        return {"digest": self.digest, "dialect": self.dialect,
                "tables": list(self.tables),
                "equality_columns": [list(p) for p in self.equality_columns],
                "range_columns": [list(p) for p in self.range_columns],
                "join_pairs": [list(p) for p in self.join_pairs],
                "latency_ms": self.latency_ms, "cost_units": self.cost_units,
                "timestamp": self.timestamp, "text": self.text}

    @classmethod
    def from_dict(cls, data: dict) -> "QueryLogEntry":
        return cls(digest=data["digest"], dialect=data["dialect"],
                   tables=tuple(data.get("tables", ())),
                   equality_columns=tuple(tuple(p) for p in data.get("equality_columns", ())),
                   range_columns=tuple(tuple(p) for p in data.get("range_columns", ())),
                   join_pairs=tuple(tuple(p) for p in data.get("join_pairs", ())),
                   latency_ms=float(data.get("latency_ms", 0.0)),
                   cost_units=int(data.get("cost_units", 0)),
                   timestamp=float(data.get("timestamp", 0.0)),
                   text=data.get("text", ""))


@dataclass
class WorkloadFeatures:
    table_frequency: dict = field(default_factory=dict)
    equality_frequency: dict = field(default_factory=dict)   # (table, column) -> fraction
    latency_p50: float = 0.0
    latency_p95: float = 0.0
    index_bitmap: tuple = ()
    view_bitmap: tuple = ()


@dataclass(frozen=True)
class TuningAction:
    kind: str                 # create_index | drop_index | materialize_view | enable_rewrite | no_op
    table: str | None = None
    column: str | None = None
    digest: str | None = None
    rule_id: str | None = None

    def describe(self) -> str:
        if self.kind in ("create_index", "drop_index"):
            return f"{self.kind}({self.table}.{self.column})"
        if self.kind == "materialize_view":
            return f"materialize_view({self.digest})"
        if self.kind == "enable_rewrite":
            return f"enable_rewrite({self.rule_id})"
        return "no_op"


def nearest_rank(values, percentile: float) -> float:
    """Nearest-rank percentile: the ceil(p*n)-th smallest value."""
    if not values:
        return 0.0
    ordered = sorted(values)
    rank = max(1, math.ceil(percentile / 100.0 * len(ordered)))
    return ordered[rank - 1]


def bucket_of(frequency: float) -> str:
    if frequency < BUCKET_LOW_EDGE:
        return "low"
    if frequency >= BUCKET_HIGH_EDGE:
        return "high"
    return "mid"


def extract_workload_features(log, window: int, index_candidates,
                              view_candidates=(), current_indexes=frozenset(),
                              current_views=frozenset()):
    """Features over the last `window` log entries plus the discretized state."""
    entries = list(log)[-window:]
    total = len(entries)
    table_counts: dict[str, int] = {}
    eq_counts: dict[tuple, int] = {}
    latencies = []
    for entry in entries:
        for table in set(entry.tables):
            table_counts[table] = table_counts.get(table, 0) + 1
        for pair in set(entry.equality_columns):
            eq_counts[pair] = eq_counts.get(pair, 0) + 1
        latencies.append(entry.latency_ms)

    features = WorkloadFeatures(
        table_frequency={t: c / total for t, c in table_counts.items()} if total else {},
        equality_frequency={p: c / total for p, c in eq_counts.items()} if total else {},
        latency_p50=nearest_rank(latencies, 50),
        latency_p95=nearest_rank(latencies, 95),
        index_bitmap=tuple(pair in current_indexes for pair in index_candidates),
        view_bitmap=tuple(digest in current_views for digest in view_candidates),
    )
    buckets = tuple(bucket_of(features.equality_frequency.get(pair, 0.0))
                    for pair in index_candidates)
    state = (features.index_bitmap, features.view_bitmap, buckets)
    return features, state


@dataclass
class QTable:
    alpha: float = ALPHA
    gamma: float = GAMMA
    epsilon: float = EPSILON_START
    storage_penalty: float = LAMBDA
    values: dict = field(default_factory=dict)    # (state, action index) -> float

    def get(self, state, action: int) -> float:
        return self.values.get((state, action), 0.0)

    def best_value(self, state, n_actions: int) -> float:
        return max(self.get(state, a) for a in range(n_actions))

    def argmax(self, state, n_actions: int) -> int:
        best, best_value = 0, self.get(state, 0)
        for action in range(1, n_actions):
            value = self.get(state, action)
            if value > best_value:
                best, best_value = action, value
        return best


def choose_action(q: QTable, state, epsilon: float, rng: random.Random,
                  n_actions: int) -> int:
    """Explore uniformly with probability epsilon, else argmax (lowest
    index wins ties)."""
    if n_actions < 1:
        raise InvalidAction("empty action set")
    if rng.random() < epsilon:
        return rng.randrange(n_actions)
    return q.argmax(state, n_actions)


def compute_reward(cost_before: float, cost_after: float, storage_delta: float,
                   storage_penalty: float = LAMBDA) -> float:
    if cost_before <= 0:
        raise InvalidAction("cost_before must be positive")
    return (cost_before - cost_after) / cost_before - storage_penalty * storage_delta


def q_update(q: QTable, state, action: int, reward: float, next_state,
             n_actions: int) -> None:
    current = q.get(state, action)
    target = reward + q.gamma * q.best_value(next_state, n_actions)
    q.values[(state, action)] = current + q.alpha * (target - current)


estimate_cost = costmodel.estimate_cost
workload_cost = costmodel.workload_cost


@dataclass
class MaterializedView:
    digest: str
    text: str
    result: object = None


@dataclass
class EpisodeSummary:
    total_reward: float
    final_state: tuple
    final_cost: int
    steps: int
    epsilon: float


class Tuner:
    """Owns the Q-table, the candidate action set, and the apply loop.

    `engine` is the relational engine whose indexes the actions manage;
    `log_source` is a callable returning the current query log.
    """

    def __init__(self, engine, log_source, index_candidates,
                 view_candidates=(), rewrite_rules=("push_limit_through_projection",),
                 alpha: float = ALPHA, gamma: float = GAMMA,
                 storage_penalty: float = LAMBDA, window: int = WINDOW,
                 epsilon: float = EPSILON_START, epsilon_decay: float = EPSILON_DECAY,
                 epsilon_min: float = EPSILON_MIN, rng: random.Random | None = None):
        self.engine = engine
        self.log_source = log_source
        self.index_candidates = tuple(index_candidates)
        self.view_candidates = tuple(view_candidates)
        self.rewrite_rules = tuple(rewrite_rules)
        self.window = window
        self.q = QTable(alpha=alpha, gamma=gamma, epsilon=epsilon,
                        storage_penalty=storage_penalty)
        self.epsilon_decay = epsilon_decay
        self.epsilon_min = epsilon_min
        self.rng = rng or random.Random(0)
        self.views: dict[str, MaterializedView] = {}
        self.actions = self._build_actions()
        self.last_reward = 0.0
        self.actions_applied = 0

    def _build_actions(self) -> list:
        actions = []
        for table, column in self.index_candidates:
            actions.append(TuningAction("create_index", table=table, column=column))
        for table, column in self.index_candidates:
            actions.append(TuningAction("drop_index", table=table, column=column))
        for digest in self.view_candidates:
            actions.append(TuningAction("materialize_view", digest=digest))
        for rule_id in self.rewrite_rules:
            actions.append(TuningAction("enable_rewrite", rule_id=rule_id))
        actions.append(TuningAction("no_op"))
        return actions

    # -- environment plumbing ------------------------------------------------

    def physical_config(self) -> PhysicalConfig:
        return PhysicalConfig(indexes=frozenset(self.engine.index_pairs()),
                              views=frozenset(self.views))

    def table_stats(self) -> TableStats:
        return TableStats(row_counts=self.engine.row_counts())

    def current_state(self):
        config = self.physical_config()
        _, state = extract_workload_features(
            self.log_source(), self.window, self.index_candidates,
            self.view_candidates, config.indexes, config.views)
        return state

    def workload_descriptors(self) -> list:
        entries = list(self.log_source())[-self.window:]
        return [e.descriptor for e in entries if e.descriptor is not None]

    def measure_cost(self) -> int:
        return workload_cost(self.workload_descriptors(), self.physical_config(),
                             self.table_stats())

    def apply_action(self, action: TuningAction):
        """Apply to the live engine; redundant create/drop is a no-change.

        Returns (acknowledgement dict, storage delta in units).
        """
        if action.kind == "no_op":
            return {"applied": "no_op"}, 0
        if action.kind == "create_index":
            if (action.table, action.column) in self.engine.index_pairs():
                return {"applied": "none", "reason": "index exists"}, 0
            ack = self.engine.manage_index("create", action.table, action.column)
            return ack, 1
        if action.kind == "drop_index":
            if (action.table, action.column) not in self.engine.index_pairs():
                return {"applied": "none", "reason": "no such index"}, 0
            ack = self.engine.manage_index("drop", action.table, action.column)
            return ack, -1
        if action.kind == "materialize_view":
            entry = next((e for e in reversed(list(self.log_source()))
                          if e.digest == action.digest and e.text), None)
            if entry is None:
                raise InvalidAction(f"no logged query with digest {action.digest}")
            if action.digest in self.views:
                return {"applied": "none", "reason": "view exists"}, 0
            result = self.engine.execute(entry.text)
            self.views[action.digest] = MaterializedView(action.digest, entry.text, result)
            return {"applied": "materialize_view", "digest": action.digest}, 1
        if action.kind == "enable_rewrite":
            if action.rule_id not in self.rewrite_rules:
                raise InvalidAction(f"unknown rewrite rule {action.rule_id}")
            enabled = getattr(self.engine, "enabled_rewrites", None)
            if enabled is not None:
                if action.rule_id in enabled:
                    return {"applied": "none", "reason": "rewrite enabled"}, 0
                enabled.add(action.rule_id)
            return {"applied": "enable_rewrite", "rule_id": action.rule_id}, 0
        raise InvalidAction(f"unsupported action kind {action.kind}")

    def refresh_views(self) -> None:
        for view in self.views.values():
            view.result = self.engine.execute(view.text)

    # -- learning loop ---------------------------------------------------------

    def train_episode(self, steps: int) -> EpisodeSummary:
        total_reward = 0.0
        state = self.current_state()
        for _ in range(steps):
            action_index = choose_action(self.q, state, self.q.epsilon, self.rng,
                                         len(self.actions))
            cost_before = max(self.measure_cost(), 1)
            _, storage_delta = self.apply_action(self.actions[action_index])
            cost_after = self.measure_cost()
            reward = compute_reward(cost_before, cost_after, storage_delta,
                                    self.q.storage_penalty)
            next_state = self.current_state()
            q_update(self.q, state, action_index, reward, next_state, len(self.actions))
            state = next_state
            total_reward += reward
            self.last_reward = reward
            self.actions_applied += 1
        self.q.epsilon = max(self.epsilon_min, self.q.epsilon * self.epsilon_decay)
        return EpisodeSummary(total_reward, state, self.measure_cost(),
                              steps, self.q.epsilon)

    def train(self, episodes: int, steps: int) -> list:
        return [self.train_episode(steps) for _ in range(episodes)]

    def greedy_rollout(self, max_steps: int | None = None) -> EpisodeSummary:
        """Follow the argmax policy (no exploration, no learning)."""
        if max_steps is None:
            max_steps = 2 * len(self.actions)
        state = self.current_state()
        total_reward = 0.0
        for step in range(max_steps):
            action = self.actions[self.q.argmax(state, len(self.actions))]
            cost_before = max(self.measure_cost(), 1)
            _, storage_delta = self.apply_action(action)
            cost_after = self.measure_cost()
            total_reward += compute_reward(cost_before, cost_after, storage_delta,
                                           self.q.storage_penalty)
            next_state = self.current_state()
            if next_state == state and action.kind == "no_op":
                state = next_state
                break
            if next_state == state:
                state = next_state
                break
            state = next_state
        return EpisodeSummary(total_reward, state, self.measure_cost(),
                              max_steps, self.q.epsilon)

    def reset_physical(self) -> None:
        """Drop every candidate index and view (testing/benchmark hook)."""
        for table, column in self.index_candidates:
            if (table, column) in self.engine.index_pairs():
                self.engine.manage_index("drop", table, column)
        self.views.clear()

    def status(self) -> dict:
        state = self.current_state()
        return {"state": {"index_bitmap": list(state[0]),
                          "view_bitmap": list(state[1]),
                          "frequency_buckets": list(state[2])},
                "epsilon": self.q.epsilon,
                "q_size": len(self.q.values),
                "last_reward": self.last_reward,
                "actions_applied": self.actions_applied}


def enumerate_index_candidates(catalog, log, window: int = WINDOW,
                               limit: int = 6) -> tuple:
    """Candidate (table, column) pairs: hot equality columns first, then
    hint-style defaults (pk columns), capped to keep the state space small."""
    entries = list(log)[-window:]
    counts: dict[tuple, int] = {}
    for entry in entries:
        for pair in set(entry.equality_columns):
            counts[pair] = counts.get(pair, 0) + 1
    hot = [pair for pair, _ in
           sorted(counts.items(), key=lambda item: (-item[1], item[0]))]
    candidates = [pair for pair in hot if catalog.schema(pair[0]) is not None]
    for name in catalog.table_names():
        schema = catalog.schema(name)
        if schema.primary_key and (name, schema.primary_key) not in candidates:
            candidates.append((name, schema.primary_key))
    return tuple(candidates[:limit])


def brute_force_optimal(descriptors, index_candidates, stats: TableStats):
    """Exhaustive search over all index subsets; (best cost, best subset).

    The oracle the learned policy is judged against; ties prefer the
    smaller subset, then lexicographic order, so the answer is unique.
    """
    candidates = list(index_candidates)
    best_cost, best_subset = None, None
    for mask in range(2 ** len(candidates)):
        subset = frozenset(c for i, c in enumerate(candidates) if mask >> i & 1)
        config = PhysicalConfig(indexes=subset)
        cost = workload_cost(descriptors, config, stats)
        key = (cost, len(subset), tuple(sorted(subset)))
        if best_cost is None or key < best_cost:
            best_cost, best_subset = key, subset
    return best_cost[0], best_subset
