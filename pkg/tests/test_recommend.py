from __future__ import annotations

import json
import random
from itertools import combinations

import pytest

from llmchem import (
    CandidatePool,
    ChemistryTable,
    LossParams,
    chem_totals,
    exhaustive_best,
    neighbors,
    recommend,
    subset_loss,
)
from llmchem.errors import (
    DomainError,
    InvalidConfigurationError,
    NoCandidatesError,
)

from helpers import zero_table_scores

ABS = 1e-12


def table_from(entries: dict, names: list[str]) -> ChemistryTable:
    scores = zero_table_scores(names)
    scores.update({frozenset(pair): value for pair, value in entries.items()})
    return ChemistryTable(scores=scores, members=frozenset(names), method="loaded")


def random_table(rng: random.Random, n: int) -> ChemistryTable:
    names = [f"m{i}" for i in range(n)]
    entries = {
        (a, b): (rng.uniform(0.0, 2.0) if rng.random() < 0.8 else 0.0)
        for a, b in combinations(names, 2)
    }
    return table_from(entries, names)


class TestChemTotals:
    def test_all_zero(self):
        table = table_from({}, ["a", "b", "c"])
        assert chem_totals(table) == (0.0, 0.0)

    def test_single_pair_doubles(self):
        table = table_from({("a", "b"): 0.5}, ["a", "b"])
        assert chem_totals(table) == (0.5, 1.0)

    def test_ordered_total_is_exactly_twice_unordered(self):
        rng = random.Random(97)
        for _ in range(20):
            table = random_table(rng, rng.randint(2, 7))
            max_t, max_i = chem_totals(table)
            # independent pair-sum oracle, same sorted order
            oracle = sum(v for _, _, v in table.pairs())
            assert max_t == oracle
            assert max_i == 2.0 * max_t


class TestSubsetLoss:
    def test_full_set_leaves_only_inter_term_and_size(self):
        rng = random.Random(101)
        table = random_table(rng, 5)
        params = LossParams()
        max_t, max_i = chem_totals(table)
        loss = subset_loss(table.members, table, (max_t, max_i), params)
        expected = params.alpha * max_i + params.beta * len(table.members)
        assert loss == pytest.approx(expected, abs=ABS)

    def test_zero_table_size_penalty_only(self):
        table = table_from({}, ["a", "b", "c"])
        loss = subset_loss({"a", "b", "c"}, table, chem_totals(table), LossParams())
        assert loss == pytest.approx(1.5, abs=ABS)

    def test_matches_summation_oracle(self):
        rng = random.Random(103)
        for _ in range(30):
            table = random_table(rng, 5)
            names = sorted(table.members)
            subset = frozenset(rng.sample(names, rng.randint(1, 5)))
            params = LossParams(alpha=rng.random(), beta=rng.uniform(0.1, 2.0))
            totals = chem_totals(table)
            intra = sum(
                table.score(a, b) for a, b in combinations(sorted(subset), 2)
            )
            inter = sum(
                table.score(a, b)
                for a in sorted(subset)
                for b in names
                if b not in subset
            )
            expected = (
                params.alpha * (totals[1] - inter)
                + (1.0 - params.alpha) * (totals[0] - intra)
                + params.beta * len(subset)
            )
            actual = subset_loss(subset, table, totals, params)
            assert actual == pytest.approx(expected, abs=1e-9)

    def test_empty_subset_rejected(self):
        table = table_from({}, ["a", "b"])
        with pytest.raises(DomainError):
            subset_loss(set(), table, chem_totals(table), LossParams())

    def test_unknown_model_rejected(self):
        table = table_from({}, ["a", "b"])
        with pytest.raises(InvalidConfigurationError):
            subset_loss({"zz"}, table, chem_totals(table), LossParams())


class TestNeighbors:
    def test_singleton_in_three_model_universe(self):
        result = neighbors({"a"}, {"a", "b", "c"})
        assert result == [
            frozenset({"a", "b"}),
            frozenset({"a", "c"}),
            frozenset({"b"}),
            frozenset({"c"}),
        ]

    def test_full_set_offers_only_removals(self):
        universe = {"a", "b", "c", "d"}
        result = neighbors(universe, universe)
        assert len(result) == 4
        assert all(len(n) == 3 for n in result)

    def test_size_cap_suppresses_additions(self):
        result = neighbors({"a", "b"}, {"a", "b", "c"}, size_cap=2)
        assert frozenset({"a", "b", "c"}) not in result
        assert frozenset({"a"}) in result  # removals allowed
        assert frozenset({"a", "c"}) in result  # swaps keep the size

    def test_count_bound(self):
        rng = random.Random(107)
        for _ in range(30):
            n = rng.randint(1, 8)
            universe = {f"m{i}" for i in range(n)}
            subset = set(rng.sample(sorted(universe), rng.randint(1, n)))
            assert len(neighbors(subset, universe)) <= n * n + n

    def test_deduplicated(self):
        result = neighbors({"a"}, {"a", "b"})
        assert len(result) == len(set(result))


class TestRecommend:
    def test_zero_table_descends_to_singleton(self):
        table = table_from({}, ["a", "b", "c"])
        pool = CandidatePool(subsets=(frozenset({"a", "b", "c"}),))
        result = recommend(pool, table)
        assert len(result.subset) == 1
        assert result.loss == pytest.approx(0.5, abs=ABS)  # just the size penalty
        assert result.zero_chemistry
        losses = [loss for _, _, loss in result.trace]
        assert losses == sorted(losses, reverse=True)
        assert all(x > y for x, y in zip(losses, losses[1:]))
        assert result.trace[-1][1] == result.subset
        assert result.trace[-1][2] == result.loss

    def test_local_minimum_seed_stays_put(self):
        table = table_from({}, ["a", "b", "c"])
        pool = CandidatePool(subsets=(frozenset({"a"}),))
        result = recommend(pool, table)
        assert result.subset == frozenset({"a"})
        assert len(result.trace) == 1

    def test_final_loss_never_exceeds_any_seed_loss(self):
        rng = random.Random(109)
        for _ in range(10):
            table = random_table(rng, 6)
            names = sorted(table.members)
            seeds = tuple(
                frozenset(rng.sample(names, rng.randint(1, 6))) for _ in range(5)
            )
            pool = CandidatePool(subsets=seeds)
            params = LossParams()
            totals = chem_totals(table)
            result = recommend(pool, table, params)
            for seed in pool.subsets:
                assert result.loss <= subset_loss(seed, table, totals, params) + ABS

    def test_attains_exhaustive_minimum_with_full_pool(self):
        rng = random.Random(113)
        for _ in range(10):
            n = rng.randint(3, 7)
            table = random_table(rng, n)
            names = sorted(table.members)
            pool = CandidatePool(
                subsets=tuple(
                    frozenset(c)
                    for size in range(1, n + 1)
                    for c in combinations(names, size)
                )
            )
            result = recommend(pool, table)
            _, best_loss = exhaustive_best(table)
            assert result.loss == best_loss

    def test_deterministic(self):
        rng = random.Random(127)
        table = random_table(rng, 5)
        pool = CandidatePool(
            subsets=(frozenset({"m0", "m1"}), frozenset({"m2"}), frozenset({"m3", "m4"}))
        )
        first = recommend(pool, table)
        second = recommend(pool, table)
        assert first == second

    def test_empty_pool_rejected(self):
        table = table_from({}, ["a", "b"])
        with pytest.raises(NoCandidatesError):
            recommend(CandidatePool(subsets=()), table)

    def test_empty_seed_rejected(self):
        with pytest.raises(InvalidConfigurationError):
            CandidatePool(subsets=(frozenset(),))

    def test_iteration_budget_respected(self):
        rng = random.Random(131)
        table = random_table(rng, 7)
        pool = CandidatePool(subsets=(table.members,))
        result = recommend(pool, table, LossParams(max_iters=1))
        assert len(result.trace) <= 2  # seed plus at most one accepted move


class TestPoolAndJson:
    def test_pool_deduplicates_preserving_order(self):
        pool = CandidatePool(
            subsets=(frozenset({"a"}), frozenset({"b"}), frozenset({"a"}))
        )
        assert pool.subsets == (frozenset({"a"}), frozenset({"b"}))

    def test_pool_json_round_trip(self, tmp_path):
        path = tmp_path / "pool.json"
        path.write_text(
            json.dumps({"query_context": "ctx", "subsets": [["a", "b"], ["b"]]})
        )
        pool = CandidatePool.from_json(path)
        assert pool.query_context == "ctx"
        assert pool.subsets == (frozenset({"a", "b"}), frozenset({"b"}))

    def test_recommendation_json_obj(self):
        table = table_from({}, ["a", "b", "c"])
        pool = CandidatePool(subsets=(frozenset({"a", "b", "c"}),))
        obj = recommend(pool, table).to_json_obj()
        assert set(obj) == {"subset", "loss", "zero_chemistry", "seed_subset", "trace"}
        assert obj["trace"][0]["iteration"] == 0
        assert obj["seed_subset"] == ["a", "b", "c"]
