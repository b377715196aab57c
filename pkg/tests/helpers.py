"""Shared builders for randomized test instances."""

from __future__ import annotations

import random
from itertools import combinations

from llmchem import ModelProfile, ModelSet
from llmchem.mig import MIG, MIGNode, TableBackend


def random_model_set(
    rng: random.Random,
    size: int,
    *,
    min_accuracy: float = 0.0,
    max_accuracy: float = 1.0,
    empty_cost: float = 1.0,
    used_threshold: float = 0.5,
) -> ModelSet:
    profiles = tuple(
        ModelProfile(
            f"m{i:02d}",
            quality=rng.uniform(0.0, 10.0),
            accuracy=rng.uniform(min_accuracy, max_accuracy),
        )
        for i in range(size)
    )
    return ModelSet(profiles=profiles, empty_cost=empty_cost, used_threshold=used_threshold)


def homogeneous_model_set(
    size: int, quality: float, accuracy: float, *, used_threshold: float = 0.5
) -> ModelSet:
    profiles = tuple(
        ModelProfile(f"m{i:02d}", quality=quality, accuracy=accuracy) for i in range(size)
    )
    return ModelSet(profiles=profiles, used_threshold=used_threshold)


# Node costs from a worked three-model example: the full set plus every
# reachable removal, with hypothetical costs for the {c} and empty subsets.
EXAMPLE_COSTS: dict[tuple[str, ...], float] = {
    (): 0.20,
    ("a",): 0.010,
    ("b",): 0.012,
    ("c",): 0.15,
    ("a", "b"): 0.08,
    ("a", "c"): 0.07,
    ("b", "c"): 0.006,
    ("a", "b", "c"): 0.05,
}

# Usable members as drawn in the worked example's graph.
EXAMPLE_USED: dict[tuple[str, ...], tuple[str, ...]] = {
    ("a", "b", "c"): ("a", "c"),
    ("a", "b"): ("a",),
    ("a", "c"): ("c",),
    ("b", "c"): ("b",),
    ("a",): (),
    ("b",): (),
}


def example_backend(members: tuple[str, ...] | None = None) -> TableBackend:
    return TableBackend(costs=EXAMPLE_COSTS, used=EXAMPLE_USED, members=members)


def drawn_example_graph(members: tuple[str, ...] | None = None) -> MIG:
    """The example graph exactly as drawn: no {c} node, no empty node."""
    backend = example_backend(members)
    subsets = [
        frozenset("abc"),
        frozenset("ab"),
        frozenset("ac"),
        frozenset("bc"),
        frozenset("a"),
        frozenset("b"),
    ]
    nodes = {
        s: MIGNode(subset=s, used=backend.used(s), cost=backend.cost(s)) for s in subsets
    }
    edges = {
        frozenset("abc"): (frozenset("ab"), frozenset("ac"), frozenset("bc")),
        frozenset("ab"): (frozenset("a"), frozenset("b")),
        frozenset("ac"): (frozenset("a"),),
        frozenset("bc"): (frozenset("b"),),
    }
    return MIG(backend, nodes, edges, root=frozenset("abc"))


def zero_table_scores(names: list[str]) -> dict[frozenset, float]:
    return {frozenset((a, b)): 0.0 for a, b in combinations(sorted(names), 2)}


def reference_consensus_iteration(rows, n_iters, floor=1e-10):
    """Plainly written re-derivation of the two-step consensus scheme.

    Kept independent of the package implementation so it can serve as an
    oracle: inverse-variance means, then leave-one-out variance estimates.
    """
    graders = sorted({g for g, _, _ in rows})
    outputs = sorted({o for _, o, _ in rows})
    var = {g: 1.0 for g in graders}
    cons = {}
    for _ in range(n_iters):
        cons = {}
        for o in outputs:
            here = sorted((g, grade) for g, oo, grade in rows if oo == o)
            den = sum(1.0 / var[g] for g, _ in here)
            num = sum(grade / var[g] for g, grade in here)
            cons[o] = num / den
        new_var = {}
        for g in graders:
            devs = []
            for gg, o, grade in sorted(rows):
                if gg != g:
                    continue
                others = sorted(
                    (g2, grade2) for g2, o2, grade2 in rows if o2 == o and g2 != g
                )
                if not others:
                    continue
                den = sum(1.0 / var[g2] for g2, _ in others)
                num = sum(grade2 / var[g2] for g2, grade2 in others)
                devs.append((grade - num / den) ** 2)
            new_var[g] = max(floor, sum(devs) / len(devs)) if devs else var[g]
        var = new_var
    return cons, var
