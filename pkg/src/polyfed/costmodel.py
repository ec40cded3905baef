"""Deterministic cost accounting shared by the engines and the tuner.

Costs are abstract units, not wall-clock: a full scan charges the row
count, an indexed equality probe charges ceil(log2(rows)) + matches, a
materialized-view hit charges only the matched rows, and a join charges
the outer access plus one inner probe per outer row.
"""

import math
from dataclasses import dataclass, field

from .errors import UnknownTable


def scan_cost(row_count: int) -> int:
    return row_count


def probe_cost(row_count: int, matches: int) -> int:
    if row_count <= 1:
        return matches
    return math.ceil(math.log2(row_count)) + matches


def access_cost(row_count: int, matches: int, indexed: bool) -> int:
    return probe_cost(row_count, matches) if indexed else scan_cost(row_count)


@dataclass(frozen=True)
class TableAccess:
    """One table touch: an optional equality predicate and its match count."""

    table: str
    equality_column: str | None = None
    matches: int = 0


@dataclass(frozen=True)
class JoinStep:
    """Probe `inner_table.inner_column` once per surviving outer row."""

    inner_table: str
    inner_column: str
    outer_rows: int
    matches_per_probe: int = 1


@dataclass(frozen=True)
class QueryDescriptor:
    digest: str
    accesses: tuple = ()
    joins: tuple = ()
    result_rows: int = 0


@dataclass(frozen=True)
class PhysicalConfig:
    """Which indexes and materialized views exist right now."""

    indexes: frozenset = frozenset()          # of (table, column)
    views: frozenset = frozenset()            # of query digests

    def with_index(self, table: str, column: str) -> "PhysicalConfig":
        return PhysicalConfig(self.indexes | {(table, column)}, self.views)

    def without_index(self, table: str, column: str) -> "PhysicalConfig":
        return PhysicalConfig(self.indexes - {(table, column)}, self.views)

    def with_view(self, digest: str) -> "PhysicalConfig":
        return PhysicalConfig(self.indexes, self.views | {digest})


@dataclass
class TableStats:
    """Row counts the cost model needs; kept current by the catalog."""

    row_counts: dict = field(default_factory=dict)

    def rows(self, table: str) -> int:
        if table not in self.row_counts:
            raise UnknownTable(f"no statistics for table {table!r}")
        return self.row_counts[table]


def estimate_cost(descriptor: QueryDescriptor, config: PhysicalConfig,
                  stats: TableStats) -> int:
    """Cost of one query under a physical configuration."""
    if descriptor.digest in config.views:
        return descriptor.result_rows
    total = 0
    for access in descriptor.accesses:
        rows = stats.rows(access.table)
        indexed = (access.equality_column is not None
                   and (access.table, access.equality_column) in config.indexes)
        if access.equality_column is None:
            total += scan_cost(rows)
        else:
            total += access_cost(rows, access.matches, indexed)
    for join in descriptor.joins:
        inner_rows = stats.rows(join.inner_table)
        if (join.inner_table, join.inner_column) in config.indexes:
            per_probe = probe_cost(inner_rows, join.matches_per_probe)
        else:
            per_probe = scan_cost(inner_rows)
        total += join.outer_rows * per_probe
    return total


def workload_cost(descriptors, config: PhysicalConfig, stats: TableStats) -> int:
    return sum(estimate_cost(d, config, stats) for d in descriptors)
