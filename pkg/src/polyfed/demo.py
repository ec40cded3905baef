"""Seed dataset used by the REPL --demo flag, the dev server, and tests.

The clock is pinned to 2024-02-15 so "last month" questions resolve to
January 2024 deterministically.
"""

import datetime
from decimal import Decimal

from .data import dump_json
from .ingest import StorageParadigm

DEMO_TODAY = datetime.date(2024, 2, 15)

USERS = [
    {"id": 1, "name": "Alice", "city": "Austin"},
    {"id": 2, "name": "Bob", "city": "Boston"},
    {"id": 3, "name": "Carol", "city": "Chicago"},
    {"id": 4, "name": "Dave", "city": "Denver"},
    {"id": 5, "name": "Erin", "city": "Edison"},
    {"id": 6, "name": "Frank", "city": "Fresno"},
]

PURCHASES = [
    {"id": 1, "user_id": 1, "product": "Headphones", "category": "electronics",
     "price": Decimal("149.99"), "purchase_date": "2024-01-11"},
    {"id": 2, "user_id": 2, "product": "Laptop", "category": "electronics",
     "price": Decimal("999.00"), "purchase_date": "2024-01-05"},
    {"id": 3, "user_id": 3, "product": "Mouse", "category": "electronics",
     "price": Decimal("25.50"), "purchase_date": "2024-01-07"},
    {"id": 4, "user_id": 1, "product": "Keyboard", "category": "electronics",
     "price": Decimal("75.25"), "purchase_date": "2024-01-09"},
    {"id": 5, "user_id": 2, "product": "Headphones", "category": "electronics",
     "price": Decimal("149.99"), "purchase_date": "2024-01-15"},
    {"id": 6, "user_id": 4, "product": "Desk", "category": "furniture",
     "price": Decimal("320.00"), "purchase_date": "2024-01-18"},
    {"id": 7, "user_id": 5, "product": "Chair", "category": "furniture",
     "price": Decimal("150.00"), "purchase_date": "2024-01-21"},
    {"id": 8, "user_id": 6, "product": "Monitor", "category": "electronics",
     "price": Decimal("280.40"), "purchase_date": "2024-01-22"},
    {"id": 9, "user_id": 3, "product": "Laptop", "category": "electronics",
     "price": Decimal("999.00"), "purchase_date": "2024-01-25"},
    {"id": 10, "user_id": 4, "product": "Mouse", "category": "electronics",
     "price": Decimal("25.50"), "purchase_date": "2024-01-26"},
    {"id": 11, "user_id": 5, "product": "Headphones", "category": "electronics",
     "price": Decimal("149.99"), "purchase_date": "2024-01-27"},
    {"id": 12, "user_id": 6, "product": "Lamp", "category": "furniture",
     "price": Decimal("45.10"), "purchase_date": "2024-01-28"},
    {"id": 13, "user_id": 1, "product": "Monitor", "category": "electronics",
     "price": Decimal("280.40"), "purchase_date": "2024-01-29"},
    {"id": 14, "user_id": 2, "product": "Desk", "category": "furniture",
     "price": Decimal("320.00"), "purchase_date": "2024-01-30"},
    {"id": 15, "user_id": 3, "product": "Chair", "category": "furniture",
     "price": Decimal("150.00"), "purchase_date": "2024-01-31"},
    {"id": 16, "user_id": 4, "product": "Laptop", "category": "electronics",
     "price": Decimal("999.00"), "purchase_date": "2024-02-02"},
    {"id": 17, "user_id": 5, "product": "Notebook", "category": "stationery",
     "price": Decimal("8.75"), "purchase_date": "2024-02-03"},
    {"id": 18, "user_id": 6, "product": "Pen", "category": "stationery",
     "price": Decimal("2.10"), "purchase_date": "2024-02-05"},
    {"id": 19, "user_id": 1, "product": "Notebook", "category": "stationery",
     "price": Decimal("8.75"), "purchase_date": "2024-02-08"},
    {"id": 20, "user_id": 2, "product": "Coffee", "category": "pantry",
     "price": Decimal("12.30"), "purchase_date": "2023-12-20"},
]

GRAPH = {
    "nodes": [
        {"id": "alice", "labels": ["User"], "name": "Alice", "user_id": 1},
        {"id": "bob", "labels": ["User"], "name": "Bob", "user_id": 2},
        {"id": "carol", "labels": ["User"], "name": "Carol", "user_id": 3},
        {"id": "dave", "labels": ["User"], "name": "Dave", "user_id": 4},
        {"id": "erin", "labels": ["User"], "name": "Erin", "user_id": 5},
        {"id": "frank", "labels": ["User"], "name": "Frank", "user_id": 6},
    ],
    "edges": [
        {"src": "alice", "type": "FRIEND", "dst": "bob"},
        {"src": "alice", "type": "FRIEND", "dst": "carol"},
        {"src": "bob", "type": "FRIEND", "dst": "dave"},
        {"src": "carol", "type": "CONNECTION", "dst": "erin"},
        {"src": "dave", "type": "CONNECTION", "dst": "frank"},
    ],
}

# Hand-enumerated from the edges above, ordered by (src id, dst id).
FRIEND_NAMES_ALL = ["Bob", "Carol", "Dave"]
FRIEND_NAMES_OF_ALICE = ["Bob", "Carol"]

KV_ENTRIES = {
    "config:theme": "dark",
    "config:lang": "en",
    "cache:host": "localhost",
}

VECTORS = {
    "p1": [0.9, 0.1, 0.0, 0.0, 0.2, 0.0, 0.0, 0.1],
    "p2": [0.8, 0.2, 0.1, 0.0, 0.1, 0.0, 0.0, 0.0],
    "p3": [0.0, 0.9, 0.8, 0.1, 0.0, 0.0, 0.1, 0.0],
    "p4": [0.0, 0.0, 0.1, 0.9, 0.7, 0.1, 0.0, 0.0],
    "p5": [0.1, 0.0, 0.0, 0.1, 0.0, 0.9, 0.8, 0.2],
}

REVIEWS = [
    {"product": "Headphones", "rating": 5, "meta": {"verified": True, "votes": 12}},
    {"product": "Laptop", "rating": 4, "meta": {"verified": True, "votes": 30}},
    {"product": "Mouse", "rating": 3, "meta": {"verified": False, "votes": 2}},
    {"product": "Desk", "rating": 5, "meta": {"verified": True, "votes": 7}},
]


def seed_demo(service) -> None:
    """Load the demo dataset through the normal ingest surfaces."""
    service.ingest_source(dump_json(USERS).encode(), "json",
                          segment="users", as_table=True)
    service.ingest_source(dump_json(PURCHASES).encode(), "json",
                          segment="purchases", as_table=True)
    service.ingest_source(dump_json(GRAPH).encode(), "json", segment="social")
    service.ingest_source(dump_json(KV_ENTRIES).encode(), "json", segment="settings")
    service.ingest_source(dump_json(REVIEWS).encode(), "json", segment="reviews")
    with service.vector.lock.write():
        service.vector.ingest(VECTORS, "products")
        service.version += 1
    service.catalog.register_collection("products", StorageParadigm.VECTOR)
