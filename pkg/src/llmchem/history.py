"""Ingestion and persistence of benchmark-run performance histories.

A history CSV carries one row per (trial, model, task) execution with the
recorded quality, accuracy and metadata columns.  Parsing is strict: a file
either yields fully validated records or a located error, never a partial
result.  Validated records collapse into per-context profile stores (one
(quality, accuracy) profile per model) that feed the rest of the pipeline.
"""

from __future__ import annotations

import json
import logging
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal

from .core import ModelProfile, ModelSet
from .errors import DomainError, ParseError, StoreVersionError

logger = logging.getLogger(__name__)

#: Exact history CSV columns, in canonical order.
HISTORY_COLUMNS = (
    "trial",
    "model",
    "task",
    "latency",
    "temperature",
    "id",
    "result",
    "quality",
    "gen_accuracy",
    "variance",
    "review_accuracy",
    "accuracy",
    "elapsed",
    "created",
)

STORE_VERSION = 1

Grouping = Literal["trial", "task", "all"]
Aggregate = Literal["mean", "median"]


@dataclass(frozen=True)
class HistoryRecord:
    """One benchmark-run row; elapsed/created stay opaque strings."""

    trial: str
    model: str
    task: str
    latency: float
    temperature: float
    id: str
    result: str
    quality: float
    gen_accuracy: float
    variance: float
    review_accuracy: float
    accuracy: float
    elapsed: str
    created: str


_NUMERIC_RANGES: dict[str, tuple[float, float]] = {
    "latency": (0.0, math.inf),
    "temperature": (-math.inf, math.inf),
    "quality": (0.0, 10.0),
    "gen_accuracy": (0.0, 1.0),
    "variance": (0.0, math.inf),
    "review_accuracy": (0.0, 1.0),
    "accuracy": (0.0, 1.0),
}


def _parse_numeric(raw: str, column: str, row_number: int) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ParseError(
            f"{column} is not a number: {raw!r}", row=row_number, field=column
        ) from None
    lo, hi = _NUMERIC_RANGES[column]
    if not math.isfinite(value) or not lo <= value <= hi:
        raise ParseError(
            f"{column} out of range: {value!r}", row=row_number, field=column
        )
    return value


def parse_history_csv(path: str | Path) -> list[HistoryRecord]:
    """Parse and validate one history CSV; reject the whole file on any error."""
    import csv

    records: list[HistoryRecord] = []
    seen_keys: set[tuple[str, str, str]] = set()
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ParseError(f"{path} is empty (no header)")
        if set(reader.fieldnames) != set(HISTORY_COLUMNS):
            missing = sorted(set(HISTORY_COLUMNS) - set(reader.fieldnames))
            stray = sorted(set(reader.fieldnames) - set(HISTORY_COLUMNS))
            raise ParseError(
                f"unexpected header in {path}: missing columns {missing}, stray columns {stray}"
            )
        for number, row in enumerate(reader, start=2):
            if any(value is None for value in row.values()) or None in row:
                raise ParseError("row has the wrong number of fields", row=number)
            numeric = {
                column: _parse_numeric(row[column], column, number)
                for column in _NUMERIC_RANGES
            }
            key = (row["trial"], row["model"], row["id"])
            if key in seen_keys:
                raise ParseError(
                    f"duplicate (trial, model, id) key {key!r}", row=number, field="id"
                )
            seen_keys.add(key)
            records.append(
                HistoryRecord(
                    trial=row["trial"],
                    model=row["model"],
                    task=row["task"],
                    id=row["id"],
                    result=row["result"],
                    elapsed=row["elapsed"],
                    created=row["created"],
                    **numeric,
                )
            )
    return records


def write_history_csv(records: Iterable[HistoryRecord], path: str | Path) -> None:
    """Write records in canonical form: fixed column order, shortest float reprs."""
    import csv

    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for record in records:
            writer.writerow(
                [
                    record.trial,
                    record.model,
                    record.task,
                    repr(record.latency),
                    repr(record.temperature),
                    record.id,
                    record.result,
                    repr(record.quality),
                    repr(record.gen_accuracy),
                    repr(record.variance),
                    repr(record.review_accuracy),
                    repr(record.accuracy),
                    record.elapsed,
                    record.created,
                ]
            )


@dataclass(frozen=True)
class ProfileStore:
    """Aggregated per-model profiles for one query context."""

    context_key: str
    profiles: dict[str, ModelProfile]  # model name -> profile
    provenance: dict  # sources, per-model record counts, aggregation

    def to_model_set(self, empty_cost: float = 1.0, used_threshold: float = 0.5) -> ModelSet:
        ordered = tuple(self.profiles[name] for name in sorted(self.profiles))
        return ModelSet(
            profiles=ordered, empty_cost=empty_cost, used_threshold=used_threshold
        )


def build_profiles(
    records: Iterable[HistoryRecord],
    grouping: Grouping = "all",
    *,
    aggregate: Aggregate = "mean",
    sources: Iterable[str] = (),
) -> list[ProfileStore]:
    """Collapse records into one profile store per group.

    Groups are keyed by trial name, task text, or a single shared key.  Per
    model and group, quality and accuracy aggregate by arithmetic mean (or
    median behind the flag); record counts land in the provenance so the raw
    rows stay re-aggregatable.  Output order is deterministic (sorted keys).
    """
    if grouping not in ("trial", "task", "all"):
        raise DomainError(f"unknown grouping {grouping!r}")
    if aggregate not in ("mean", "median"):
        raise DomainError(f"unknown aggregate {aggregate!r}")
    key_of = {
        "trial": lambda r: r.trial,
        "task": lambda r: r.task,
        "all": lambda r: "all",
    }[grouping]
    reduce = statistics.fmean if aggregate == "mean" else statistics.median

    grouped: dict[str, dict[str, list[HistoryRecord]]] = {}
    for record in records:
        grouped.setdefault(key_of(record), {}).setdefault(record.model, []).append(record)

    stores: list[ProfileStore] = []
    for context in sorted(grouped):
        models = grouped[context]
        profiles: dict[str, ModelProfile] = {}
        counts: dict[str, int] = {}
        for model in sorted(models):
            rows = models[model]
            profiles[model] = ModelProfile(
                model=model,
                quality=reduce([r.quality for r in rows]),
                accuracy=reduce([r.accuracy for r in rows]),
            )
            counts[model] = len(rows)
        stores.append(
            ProfileStore(
                context_key=context,
                profiles=profiles,
                provenance={
                    "sources": sorted(str(s) for s in sources),
                    "record_counts": counts,
                    "aggregate": aggregate,
                    "grouping": grouping,
                },
            )
        )
    return stores


def _store_to_obj(store: ProfileStore) -> dict:
    return {
        "context_key": store.context_key,
        "profiles": [
            {
                "model": name,
                "quality": store.profiles[name].quality,
                "accuracy": store.profiles[name].accuracy,
            }
            for name in sorted(store.profiles)
        ],
        "provenance": store.provenance,
    }


def _store_from_obj(obj: dict) -> ProfileStore:
    known = {"context_key", "profiles", "provenance"}
    stray = sorted(set(obj) - known)
    if stray:
        logger.warning("ignoring unknown profile-store keys: %s", stray)
    try:
        profiles = {
            entry["model"]: ModelProfile(
                model=entry["model"],
                quality=float(entry["quality"]),
                accuracy=float(entry["accuracy"]),
            )
            for entry in obj["profiles"]
        }
        return ProfileStore(
            context_key=str(obj["context_key"]),
            profiles=profiles,
            provenance=dict(obj.get("provenance", {})),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"invalid profile-store payload: {exc}") from exc


def write_profiles(stores: Iterable[ProfileStore], path: str | Path) -> None:
    """Persist stores as versioned JSON (full double precision round-trip)."""
    payload = {
        "version": STORE_VERSION,
        "stores": [_store_to_obj(store) for store in stores],
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_profiles(path: str | Path) -> list[ProfileStore]:
    """Load stores from JSON; unknown keys warn, truncated files fail whole."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(payload, dict) or "version" not in payload:
        raise ParseError(f"{path} is not a profile-store file")
    if payload["version"] != STORE_VERSION:
        raise StoreVersionError(
            f"unsupported store version {payload['version']!r} (expected {STORE_VERSION})"
        )
    stray = sorted(set(payload) - {"version", "stores"})
    if stray:
        logger.warning("ignoring unknown top-level keys: %s", stray)
    try:
        stores_obj = payload["stores"]
    except KeyError:
        raise ParseError(f"{path} lacks a 'stores' list") from None
    return [_store_from_obj(obj) for obj in stores_obj]
