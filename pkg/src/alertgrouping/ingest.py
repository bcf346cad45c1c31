"""Parse alert streams from JSON-lines files into AlertSequences.

One line is one alert object.  Exactly two feature values and the timestamp
are extracted via dotted key paths; everything else in the record is ignored.
Serialization writes the canonical form this package uses for libraries and
augmented corpora: numeric epoch ``time``, ``feature_0``/``feature_1`` and an
optional ``label`` object.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .core import (
    FEATURE_KEYS,
    MISSING,
    NOISE_EVENT,
    Alert,
    AlertSequence,
    HierLabel,
)
from .errors import (
    ConfigError,
    MalformedLine,
    MissingScenario,
    MissingTimestamp,
    UnparseableTimestamp,
)


@dataclass(frozen=True)
class FeatureExtractionConfig:
    """Key paths for pulling features, timestamp and labels out of records.

    ``feature_paths`` must name exactly two dotted paths.  String timestamps
    are parsed with ``timestamp_format`` (strftime tokens, naive values are
    treated as UTC); numeric timestamps are taken as epoch seconds directly.
    """

    feature_paths: tuple[str, str] = ("type", "device")
    timestamp_path: str = "time"
    timestamp_format: str = "%Y-%m-%dT%H:%M:%S.%f"
    label_paths: tuple[str, str, str] = ("label.event", "label.stage", "label.instance")

    def __post_init__(self):
        if len(self.feature_paths) != 2:
            raise ConfigError("exactly two feature paths are required")
        for p in (*self.feature_paths, self.timestamp_path, *self.label_paths):
            if not p:
                raise ConfigError("key paths must be non-empty")


#: Config reading back files produced by :func:`write_stream`.
CANONICAL_CONFIG = FeatureExtractionConfig(feature_paths=FEATURE_KEYS)


def _lookup(obj, dotted: str):
    cur = obj
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return None
        cur = cur[part]
    return cur


def _parse_timestamp(value, fmt: str, line_no: int) -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        try:
            dt = datetime.strptime(value, fmt)
        except ValueError as exc:
            raise UnparseableTimestamp(line_no, str(exc)) from exc
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return dt.timestamp()
    raise UnparseableTimestamp(line_no, f"unsupported timestamp type {type(value).__name__}")


def _parse_label(record, cfg: FeatureExtractionConfig, line_no: int) -> Optional[HierLabel]:
    event = _lookup(record, cfg.label_paths[0])
    if event is None:
        return None
    if event == NOISE_EVENT:
        return HierLabel.noise()
    stage = _lookup(record, cfg.label_paths[1])
    instance = _lookup(record, cfg.label_paths[2])
    if not stage or not instance:
        raise MalformedLine(line_no, "attack label lacks stage or instance")
    return HierLabel(str(event), str(stage), str(instance))


def parse_stream(
    path,
    cfg: FeatureExtractionConfig = CANONICAL_CONFIG,
    skip_before: Optional[float] = None,
) -> AlertSequence:
    """Parse one JSON-lines file into a timestamp-sorted AlertSequence.

    Missing feature values map to the :data:`~alertgrouping.core.MISSING`
    sentinel.  ``skip_before`` drops alerts whose timestamp is below the
    cutoff (used to discard detector warm-up phases).  source_index is the
    position in the sorted sequence, so shuffled input lines yield the same
    sequence up to tie order.
    """
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_no, exc.msg) from exc
            raw_ts = _lookup(record, cfg.timestamp_path)
            if raw_ts is None:
                raise MissingTimestamp(line_no, f"no value at {cfg.timestamp_path!r}")
            ts = _parse_timestamp(raw_ts, cfg.timestamp_format, line_no)
            if skip_before is not None and ts < skip_before:
                continue
            features = {}
            for key, fpath in zip(FEATURE_KEYS, cfg.feature_paths):
                value = _lookup(record, fpath)
                features[key] = MISSING if value is None else str(value)
            label = _parse_label(record, cfg, line_no)
            entries.append((ts, line_no, features, label))

    entries.sort(key=lambda e: (e[0], e[1]))
    alerts = [
        Alert(timestamp=ts, attributes=features, label=label, source_index=i)
        for i, (ts, _, features, label) in enumerate(entries)
    ]
    return AlertSequence(alerts)


def alert_to_record(alert: Alert) -> dict:
    record = {"time": alert.timestamp}
    for key in FEATURE_KEYS:
        record[key] = alert.attributes[key]
    if alert.label is not None:
        record["label"] = {
            "event": alert.label.event,
            "stage": alert.label.stage,
            "instance": alert.label.instance,
        }
    return record


def write_stream(seq: AlertSequence, path) -> None:
    """Write a sequence in canonical JSON-lines form (re-parseable exactly)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for alert in seq:
            fh.write(json.dumps(alert_to_record(alert)))
            fh.write("\n")


def split_scenarios(
    directory,
    split_spec: dict[str, str],
    cfg: FeatureExtractionConfig = CANONICAL_CONFIG,
    skip_before: Optional[float] = None,
):
    """Partition per-scenario alert files into train/val/test sequence lists.

    ``split_spec`` maps scenario id to one of ``train``/``val``/``test``;
    scenario ``<id>`` is read from ``<directory>/<id>.jsonl``.
    """
    directory = Path(directory)
    splits: dict[str, list[AlertSequence]] = {"train": [], "val": [], "test": []}
    for scenario_id in sorted(split_spec):
        target = split_spec[scenario_id]
        if target not in splits:
            raise ConfigError(f"unknown split {target!r} for scenario {scenario_id!r}")
        path = directory / f"{scenario_id}.jsonl"
        if not path.exists():
            raise MissingScenario(scenario_id)
        splits[target].append(parse_stream(path, cfg, skip_before))
    return splits["train"], splits["val"], splits["test"]
