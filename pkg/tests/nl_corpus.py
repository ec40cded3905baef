"""Question corpus with expected results computed by direct evaluation.

Every expected value below is produced by plain loops over the demo
fixture rows (never by the engines), so the corpus is an independent
oracle for the whole question pipeline.
"""

from decimal import Decimal

from polyfed.demo import GRAPH, KV_ENTRIES, PURCHASES, USERS, VECTORS

from .oracles import vector_topk_reference

JAN = ("2024-01-01", "2024-01-31")
FEB = ("2024-02-01", "2024-02-29")


def in_range(row, bounds):
    return bounds[0] <= row["purchase_date"] <= bounds[1]


def topk(rows, entity_col, metric_col, n, alias):
    sums = {}
    for row in rows:
        key = row[entity_col]
        sums[key] = sums.get(key, Decimal(0)) + row[metric_col]
    ranked = sorted(sums.items(), key=lambda item: -item[1])
    return [{entity_col: key, alias: total} for key, total in ranked[:n]]


def count(rows):
    return [{"n": len(rows)}]


def friends_of(name, edge_type="FRIEND"):
    nodes = {n["id"]: n for n in GRAPH["nodes"]}
    anchor_ids = {n["id"] for n in GRAPH["nodes"] if n["name"] == name}
    out = []
    for src, dst in sorted((e["src"], e["dst"]) for e in GRAPH["edges"]
                           if e["type"] == edge_type):
        if src in anchor_ids:
            out.append({"name": nodes[dst]["name"]})
    return out


def kv_row(key):
    return [{"key": key, "value": KV_ENTRIES[key]}]


def vector_case(anchor, k):
    return vector_topk_reference(VECTORS, VECTORS[anchor], k)


P = PURCHASES
CORPUS = [
    # --- topk -------------------------------------------------------------
    ("What were the top 5 products by sales last month?",
     topk([r for r in P if in_range(r, JAN)], "product", "price", 5, "sales")),
    ("top 3 products by price",
     topk(P, "product", "price", 3, "price")),
    ("top 2 categories by price",
     topk(P, "category", "price", 2, "price")),
    ("top 4 products by sales this month",
     topk([r for r in P if in_range(r, FEB)], "product", "price", 4, "sales")),
    ("top 1 products by price",
     topk(P, "product", "price", 1, "price")),
    ("top 3 products by sales last month",
     topk([r for r in P if in_range(r, JAN)], "product", "price", 3, "sales")),
    ("top 2 products by price where category = 'furniture'",
     topk([r for r in P if r["category"] == "furniture"],
          "product", "price", 2, "price")),
    ("top 5 categories by sales last month",
     topk([r for r in P if in_range(r, JAN)], "category", "price", 5, "sales")),
    # --- aggregate_count -----------------------------------------------------
    ("how many purchases", count(P)),
    ("how many users", count(USERS)),
    ("how many purchases where product = 'Headphones'",
     count([r for r in P if r["product"] == "Headphones"])),
    ("how many purchases where category is electronics",
     count([r for r in P if r["category"] == "electronics"])),
    ("how many purchases where price > 100",
     count([r for r in P if r["price"] > 100])),
    ("how many purchases last month",
     count([r for r in P if in_range(r, JAN)])),
    ("how many purchases where price <= 50",
     count([r for r in P if r["price"] <= 50])),
    # --- select ----------------------------------------------------------------
    ("show purchases where price > 500",
     [r for r in P if r["price"] > 500]),
    ("list users", list(USERS)),
    ("show purchases where product = 'Desk'",
     [r for r in P if r["product"] == "Desk"]),
    ("show users where city = 'Austin'",
     [r for r in USERS if r["city"] == "Austin"]),
    ("list purchases where category = 'stationery'",
     [r for r in P if r["category"] == "stationery"]),
    ("show purchases where price < 10",
     [r for r in P if r["price"] < 10]),
    ("show purchases where category = 'furniture' last month",
     [r for r in P if r["category"] == "furniture" and in_range(r, JAN)]),
    ("list users where id > 3",
     [r for r in USERS if r["id"] > 3]),
    ("show purchases where user_id = 1",
     [r for r in P if r["user_id"] == 1]),
    # --- graph -------------------------------------------------------------------
    ("friends of Alice", friends_of("Alice")),
    ("friends of Bob", friends_of("Bob")),
    ("connections of Carol", friends_of("Carol", edge_type="CONNECTION")),
    # --- kv -------------------------------------------------------------------------
    ("value of config:theme", kv_row("config:theme")),
    ("get cache:host", kv_row("cache:host")),
    ("value of config:lang", kv_row("config:lang")),
    # --- vector (expected as [(id, score)], compared approximately) ----------------
    ("similar to p1 top 3", vector_case("p1", 3)),
    ("similar to p3 top 2", vector_case("p3", 2)),
    ("similar to p5", vector_case("p5", 5)),
]

FOLLOW_UP = (
    "What were the top 5 products by sales last month?",
    "and for electronics only?",
    topk([r for r in P if in_range(r, JAN) and r["category"] == "electronics"],
         "product", "price", 5, "sales"),
)

VECTOR_QUESTIONS = {q for q, _ in CORPUS if q.startswith("similar to")}


def run_corpus(service) -> list:
    """[(question, ok, detail)] for every corpus case plus the follow-up."""
    from polyfed.data import dump_json

    outcomes = []
    for i, (question, expected) in enumerate(CORPUS):
        response = service.answer_question(f"corpus-{i}", question)
        if question in VECTOR_QUESTIONS:
            ids = [row["id"] for row in response["rows"]]
            scores = [row["score"] for row in response["rows"]]
            ok = ids == [i for i, _ in expected] and all(
                abs(a - b) < 1e-9 for a, (_, b) in zip(scores, expected))
            detail = f"{ids} vs {[i for i, _ in expected]}"
        else:
            actual = dump_json(response["rows"])
            wanted = dump_json(expected)
            ok = actual == wanted
            detail = f"{actual[:120]} vs {wanted[:120]}"
        outcomes.append((question, ok, detail))

    first, second, expected = FOLLOW_UP
    service.answer_question("corpus-follow", first)
    response = service.answer_question("corpus-follow", second)
    ok = dump_json(response["rows"]) == dump_json(expected)
    outcomes.append((second, ok, response["query"]))
    return outcomes
