#!/usr/bin/env python3
# Copyright 2026 The plantune Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the bundled simulated scenarios under data/.

The output is fully determined by the seeds below, so rerunning the script
reproduces the committed fixtures byte for byte.
"""

import argparse
import json
import pathlib
import random

NODE_TYPES = ["TableScan", "Filter", "HashJoin", "Aggregate", "Sort", "Exchange"]

TABLES = {
    "store_sales": ["ss_item_sk", "ss_customer_sk", "ss_sold_date_sk", "ss_net_paid"],
    "item": ["i_item_sk", "i_category", "i_brand", "i_current_price"],
    "customer": ["c_customer_sk", "c_birth_year", "c_current_addr_sk"],
    "date_dim": ["d_date_sk", "d_year", "d_moy"],
    "customer_address": ["ca_address_sk", "ca_state", "ca_gmt_offset"],
    "web_sales": ["ws_item_sk", "ws_bill_customer_sk", "ws_sold_date_sk", "ws_net_paid"],
    "store": ["s_store_sk", "s_state", "s_floor_space"],
}

JOIN_KEYS = {
    ("store_sales", "item"): ("ss_item_sk", "i_item_sk"),
    ("store_sales", "customer"): ("ss_customer_sk", "c_customer_sk"),
    ("store_sales", "date_dim"): ("ss_sold_date_sk", "d_date_sk"),
    ("customer", "customer_address"): ("c_current_addr_sk", "ca_address_sk"),
    ("web_sales", "item"): ("ws_item_sk", "i_item_sk"),
    ("web_sales", "customer"): ("ws_bill_customer_sk", "c_customer_sk"),
    ("web_sales", "date_dim"): ("ws_sold_date_sk", "d_date_sk"),
    ("store_sales", "store"): ("ss_item_sk", "s_store_sk"),
}

ROWS = {"store_sales": 2.9e6, "web_sales": 7.2e5, "item": 1.8e4, "customer": 1.0e5,
        "date_dim": 7.3e4, "customer_address": 5.0e4, "store": 12.0}

BASE_KNOBS = [
    {"name": "max_memory_mb", "kind": "discrete", "min": 256, "max": 16384},
    {"name": "max_parallelism", "kind": "discrete", "min": 1, "max": 64},
    {"name": "join_strategy", "kind": "categorical", "categories": ["broadcast", "partitioned", "auto"]},
    {"name": "exchange_buffer_kb", "kind": "discrete", "min": 32, "max": 4096},
    {"name": "agg_spill_threshold", "kind": "continuous", "min": 0.1, "max": 0.9},
    {"name": "enable_runtime_filter", "kind": "categorical", "categories": ["off", "on"]},
    {"name": "scan_batch_rows", "kind": "discrete", "min": 1024, "max": 65536},
    {"name": "sort_buffer_mb", "kind": "discrete", "min": 16, "max": 2048},
    {"name": "hash_table_load_factor", "kind": "continuous", "min": 0.5, "max": 0.95},
    {"name": "filter_pushdown_level", "kind": "discrete", "min": 0, "max": 4},
]

EXTRA_KNOBS = [
    {"name": "spill_compression", "kind": "categorical", "categories": ["none", "lz4", "zstd"]},
    {"name": "bloom_filter_fpp", "kind": "continuous", "min": 0.001, "max": 0.2},
    {"name": "max_partitions", "kind": "discrete", "min": 8, "max": 1024},
    {"name": "exchange_compression", "kind": "categorical", "categories": ["off", "on"]},
    {"name": "adaptive_join_threshold_mb", "kind": "discrete", "min": 1, "max": 512},
    {"name": "prefetch_depth", "kind": "discrete", "min": 0, "max": 16},
    {"name": "io_threads", "kind": "discrete", "min": 1, "max": 32},
    {"name": "cte_materialization", "kind": "categorical", "categories": ["inline", "materialize", "auto"]},
    {"name": "min_split_size_mb", "kind": "discrete", "min": 8, "max": 256},
    {"name": "dynamic_filter_wait_ms", "kind": "discrete", "min": 0, "max": 1000},
    {"name": "result_cache", "kind": "categorical", "categories": ["off", "on"]},
    {"name": "vectorized_agg_width", "kind": "discrete", "min": 256, "max": 8192},
    {"name": "broadcast_limit_mb", "kind": "discrete", "min": 4, "max": 1024},
    {"name": "topn_pushdown", "kind": "categorical", "categories": ["off", "on"]},
    {"name": "sort_merge_fanin", "kind": "discrete", "min": 2, "max": 128},
]

# Ground-truth knob sets per node type.
SMALL_TRUTH = {
    "TableScan": ["scan_batch_rows", "filter_pushdown_level", "max_parallelism"],
    "Filter": ["filter_pushdown_level", "enable_runtime_filter"],
    "HashJoin": ["max_memory_mb", "join_strategy", "hash_table_load_factor", "enable_runtime_filter"],
    "Aggregate": ["agg_spill_threshold", "max_memory_mb", "max_parallelism"],
    "Sort": ["sort_buffer_mb", "max_memory_mb"],
    "Exchange": ["exchange_buffer_kb", "max_parallelism"],
}

WIDE_EXTRA_TRUTH = {
    "TableScan": ["prefetch_depth", "io_threads", "min_split_size_mb"],
    "Filter": ["bloom_filter_fpp"],
    "HashJoin": ["broadcast_limit_mb", "dynamic_filter_wait_ms"],
    "Aggregate": ["vectorized_agg_width", "spill_compression"],
    "Sort": ["sort_merge_fanin"],
    "Exchange": ["exchange_compression", "max_partitions"],
}

FIXED_OPTIMA = {"max_memory_mb": 0.7, "max_parallelism": 0.6}

BASE_COST = {"TableScan": (0.4, 2.0), "Filter": (0.1, 0.5), "HashJoin": (0.6, 2.5),
             "Aggregate": (0.3, 1.5), "Sort": (0.3, 1.2), "Exchange": (0.1, 0.6)}


class PlanBuilder:
    def __init__(self, rng):
        self.rng = rng
        self.nodes = []

    def add(self, op, children, tables=(), columns=(), predicates=(), join=None, aggs=(), card=1.0):
        node_id = len(self.nodes)
        cost = card * (1.0 + 0.1 * len(children)) + sum(self.nodes[c]["cost_est"] for c in children)
        self.nodes.append({
            "id": node_id, "op": op, "tables": list(tables), "columns": list(columns),
            "predicates": list(predicates), "join": list(join) if join else None,
            "aggs": list(aggs), "card_est": round(card, 3), "cost_est": round(cost, 3),
            "children": list(children),
        })
        return node_id

    def scan(self, table):
        rng = self.rng
        cols = rng.sample(TABLES[table], k=min(2, len(TABLES[table])))
        node = self.add("TableScan", [], tables=[table], columns=cols, card=ROWS[table])
        if rng.random() < 0.6:
            col = rng.choice(TABLES[table])
            pred = {"column": col, "op": rng.choice(["=", "<", ">=", "<=", "!="]), "value": round(rng.random(), 3)}
            sel = rng.uniform(0.05, 0.6)
            node = self.add("Filter", [node], tables=[table], columns=[col], predicates=[pred],
                            card=ROWS[table] * sel)
        return node


def make_plan(query_id, rng):
    b = PlanBuilder(rng)
    fact = rng.choice(["store_sales", "web_sales"])
    dims = [t for (f, t) in JOIN_KEYS if f == fact]
    joined = rng.sample(dims, k=rng.randint(1, min(3, len(dims))))
    current = b.scan(fact)
    tables = [fact]
    for dim in joined:
        right = b.scan(dim)
        keys = JOIN_KEYS[(fact, dim)]
        card = max(b.nodes[current]["card_est"], b.nodes[right]["card_est"]) * rng.uniform(0.2, 0.9)
        current = b.add("HashJoin", [current, right], tables=tables + [dim], columns=list(keys), join=keys, card=card)
        tables.append(dim)
        if rng.random() < 0.35:
            current = b.add("Exchange", [current], card=b.nodes[current]["card_est"])
    if dims and "customer" in joined and rng.random() < 0.5:
        right = b.scan("customer_address")
        keys = JOIN_KEYS[("customer", "customer_address")]
        current = b.add("HashJoin", [current, right], tables=tables + ["customer_address"], columns=list(keys),
                        join=keys, card=b.nodes[current]["card_est"] * 0.8)
    group_col = rng.choice(TABLES[joined[0]])
    agg = rng.choice(["sum", "count", "avg", "max"])
    current = b.add("Aggregate", [current], columns=[group_col], aggs=[agg],
                    card=b.nodes[current]["card_est"] * rng.uniform(0.001, 0.05))
    if rng.random() < 0.6:
        current = b.add("Sort", [current], columns=[group_col], card=b.nodes[current]["card_est"])
    current = b.add("Exchange", [current], card=b.nodes[current]["card_est"])
    # The root is the last node added; renumber so the root comes first.
    n = len(b.nodes)
    remap = {old: n - 1 - old for old in range(n)}
    nodes = []
    for node in reversed(b.nodes):
        node = dict(node)
        node["id"] = remap[node["id"]]
        node["children"] = [remap[c] for c in node["children"]]
        nodes.append(node)
    return {"query_id": query_id, "nodes": nodes, "root": 0}


def make_effects(knobs, rng):
    effects = []
    for k in knobs:
        b = FIXED_OPTIMA.get(k["name"], round(rng.uniform(0.2, 0.8), 3))
        effects.append({"knob": k["name"], "a": round(rng.uniform(1.5, 3.0), 3), "b": b})
    return effects


def truth_matrix(knobs, truth):
    names = [k["name"] for k in knobs]
    return [[1 if n in truth.get(t, []) else 0 for n in names] for t in NODE_TYPES]


def make_queries(plans, rng):
    queries = []
    for plan in plans:
        costs = [round(rng.uniform(*BASE_COST[n["op"]]), 4) for n in plan["nodes"]]
        queries.append({"query_id": plan["query_id"], "memory_demand": round(rng.uniform(0.05, 0.6), 3),
                        "base_costs": costs})
    return queries


def scenario(name, seed, knobs, truth, plans_file, plans, rules, rng):
    return {
        "name": name,
        "seed": seed,
        "noise_sigma": 0.05,
        "plans": plans_file,
        "knobs": knobs,
        "node_types": NODE_TYPES,
        "ground_truth": truth_matrix(knobs, truth),
        "effects": make_effects(knobs, rng),
        "failure_rules": rules,
        "queries": make_queries(plans, rng),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data"))
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rng = random.Random(20240611)
    plans = [make_plan(f"q{i + 1:02d}", rng) for i in range(20)]
    with open(out / "synth-plans.jsonl", "w") as f:
        for p in plans:
            f.write(json.dumps(p, sort_keys=True) + "\n")

    default_rules = {
        "memory": {"knob": "max_memory_mb"},
        "parallelism": {"knob": "max_parallelism", "memory_knob": "max_memory_mb", "intercept": 0.5, "slope": 0.6},
    }
    wide_truth = {t: SMALL_TRUTH[t] + WIDE_EXTRA_TRUTH[t] for t in NODE_TYPES}
    halfspace_weights = [0.0] * len(BASE_KNOBS)
    for name, w in {"max_memory_mb": -1.0, "max_parallelism": 1.5, "exchange_buffer_kb": 0.8,
                    "scan_batch_rows": 0.5}.items():
        halfspace_weights[[k["name"] for k in BASE_KNOBS].index(name)] = w

    scenarios = {
        "synth-small": scenario("synth-small", 7001, BASE_KNOBS, SMALL_TRUTH, "synth-plans.jsonl", plans,
                                default_rules, random.Random(7001)),
        "synth-wide": scenario("synth-wide", 7002, BASE_KNOBS + EXTRA_KNOBS, wide_truth, "synth-plans.jsonl",
                               plans, default_rules, random.Random(7002)),
        "synth-halfspace": scenario("synth-halfspace", 7003, BASE_KNOBS, SMALL_TRUTH, "synth-plans.jsonl", plans,
                                    {"halfspace": {"weights": halfspace_weights, "threshold": 1.2}},
                                    random.Random(7003)),
    }
    for name, doc in scenarios.items():
        with open(out / f"{name}.json", "w") as f:
            json.dump(doc, f, indent=1, sort_keys=True)
            f.write("\n")


if __name__ == "__main__":
    main()
