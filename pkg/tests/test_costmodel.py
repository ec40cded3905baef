import random

from polyfed.costmodel import (JoinStep, PhysicalConfig, QueryDescriptor, TableAccess,
                               TableStats, estimate_cost, workload_cost)

from .oracles import cost_reference


def _stats(**counts):
    return TableStats(row_counts=dict(counts))


def test_full_scan_charges_row_count():
    descriptor = QueryDescriptor("d1", accesses=(TableAccess("t", None, 0),))
    assert estimate_cost(descriptor, PhysicalConfig(), _stats(t=1000)) == 1000


def test_indexed_equality_is_log_plus_matches():
    descriptor = QueryDescriptor("d2", accesses=(TableAccess("t", "c", 3),))
    config = PhysicalConfig(indexes=frozenset({("t", "c")}))
    assert estimate_cost(descriptor, config, _stats(t=1024)) == 13


def test_unindexed_equality_still_scans():
    descriptor = QueryDescriptor("d3", accesses=(TableAccess("t", "c", 3),))
    assert estimate_cost(descriptor, PhysicalConfig(), _stats(t=1024)) == 1024


def test_view_hit_charges_matches_only():
    descriptor = QueryDescriptor("d4", accesses=(TableAccess("t", None, 0),),
                                 result_rows=7)
    config = PhysicalConfig(views=frozenset({"d4"}))
    assert estimate_cost(descriptor, config, _stats(t=1000)) == 7


def test_join_charges_outer_plus_probes():
    descriptor = QueryDescriptor(
        "d5", accesses=(TableAccess("a", None, 0),),
        joins=(JoinStep("b", "id", outer_rows=10),))
    # unindexed inner: 100 (outer scan) + 10 * 50
    assert estimate_cost(descriptor, PhysicalConfig(), _stats(a=100, b=50)) == 600
    config = PhysicalConfig(indexes=frozenset({("b", "id")}))
    # indexed inner probe on 50 rows: ceil(log2(50)) = 6, +1 match
    assert estimate_cost(descriptor, config, _stats(a=100, b=50)) == 100 + 10 * 7


def test_random_configs_match_reference_evaluator():
    rng = random.Random(1234)
    tables = {f"t{i}": rng.randint(1, 5000) for i in range(4)}
    names = list(tables)
    for _ in range(300):
        accesses = []
        for _ in range(rng.randint(1, 3)):
            table = rng.choice(names)
            if rng.random() < 0.5:
                accesses.append(TableAccess(table, None, 0))
            else:
                accesses.append(TableAccess(table, f"c{rng.randint(0, 2)}",
                                            rng.randint(0, 20)))
        joins = []
        if rng.random() < 0.4:
            joins.append(JoinStep(rng.choice(names), "c0", rng.randint(0, 30),
                                  rng.randint(1, 3)))
        descriptor = QueryDescriptor(f"d{rng.random()}", tuple(accesses),
                                     tuple(joins), result_rows=rng.randint(0, 50))
        index_pool = [(t, f"c{i}") for t in names for i in range(3)]
        indexes = frozenset(rng.sample(index_pool, rng.randint(0, 6)))
        views = frozenset([descriptor.digest] if rng.random() < 0.2 else [])
        config = PhysicalConfig(indexes=indexes, views=views)
        expected = cost_reference(descriptor, indexes, views, tables)
        assert estimate_cost(descriptor, config, TableStats(tables)) == expected


def test_workload_cost_sums_queries():
    descriptors = [QueryDescriptor(f"d{i}", accesses=(TableAccess("t", None, 0),))
                   for i in range(3)]
    assert workload_cost(descriptors, PhysicalConfig(), _stats(t=10)) == 30
