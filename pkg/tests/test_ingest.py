import json
from datetime import datetime, timezone

import pytest

from alertgrouping.core import MISSING, HierLabel
from alertgrouping.errors import (
    ConfigError,
    MalformedLine,
    MissingScenario,
    MissingTimestamp,
    UnparseableTimestamp,
)
from alertgrouping.ingest import (
    CANONICAL_CONFIG,
    FeatureExtractionConfig,
    parse_stream,
    split_scenarios,
    write_stream,
)

from conftest import make_seq

RAW_CFG = FeatureExtractionConfig(feature_paths=("type", "device"))


def write_lines(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")


class TestParseStream:
    def test_datetime_record(self, tmp_path):
        path = tmp_path / "alerts.jsonl"
        write_lines(path, [{
            "time": "2025-08-10T13:42:07.391",
            "ip": "10.35.35.204",
            "type": "Statistical data report",
            "device": "web",
        }])
        seq = parse_stream(path, RAW_CFG)
        assert len(seq) == 1
        expected = datetime(2025, 8, 10, 13, 42, 7, 391000, tzinfo=timezone.utc).timestamp()
        assert seq[0].timestamp == expected
        assert seq[0].attributes["feature_0"] == "Statistical data report"
        assert seq[0].attributes["feature_1"] == "web"

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert len(parse_stream(path, RAW_CFG)) == 0

    def test_missing_feature_becomes_sentinel(self, tmp_path):
        path = tmp_path / "alerts.jsonl"
        write_lines(path, [{"time": 10.0, "type": "t"}])
        seq = parse_stream(path, RAW_CFG)
        assert seq[0].attributes["feature_1"] == MISSING

    def test_sorts_by_timestamp(self, tmp_path):
        path = tmp_path / "alerts.jsonl"
        write_lines(path, [
            {"time": 5.0, "type": "b", "device": "d"},
            {"time": 1.0, "type": "a", "device": "d"},
        ])
        seq = parse_stream(path, RAW_CFG)
        assert [a.timestamp for a in seq] == [1.0, 5.0]
        assert [a.source_index for a in seq] == [0, 1]

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "alerts.jsonl"
        path.write_text("{not json\n")
        with pytest.raises(MalformedLine) as err:
            parse_stream(path, RAW_CFG)
        assert err.value.line_no == 0

    def test_missing_timestamp(self, tmp_path):
        path = tmp_path / "alerts.jsonl"
        write_lines(path, [{"type": "a", "device": "d"}])
        with pytest.raises(MissingTimestamp):
            parse_stream(path, RAW_CFG)

    def test_unparseable_timestamp(self, tmp_path):
        path = tmp_path / "alerts.jsonl"
        write_lines(path, [{"time": "yesterday", "type": "a", "device": "d"}])
        with pytest.raises(UnparseableTimestamp):
            parse_stream(path, RAW_CFG)

    def test_skip_before(self, tmp_path):
        path = tmp_path / "alerts.jsonl"
        write_lines(path, [
            {"time": 1.0, "type": "a", "device": "d"},
            {"time": 100.0, "type": "a", "device": "d"},
        ])
        seq = parse_stream(path, RAW_CFG, skip_before=50.0)
        assert len(seq) == 1 and seq[0].timestamp == 100.0

    def test_labels_parsed(self, tmp_path):
        path = tmp_path / "alerts.jsonl"
        write_lines(path, [
            {"time": 1.0, "feature_0": "a", "feature_1": "d",
             "label": {"event": "scan", "stage": "s1", "instance": "i1"}},
            {"time": 2.0, "feature_0": "a", "feature_1": "d",
             "label": {"event": "noise", "stage": "", "instance": ""}},
        ])
        seq = parse_stream(path)
        assert seq[0].label == HierLabel("scan", "s1", "i1")
        assert seq[1].label.is_noise

    def test_config_requires_two_feature_paths(self):
        with pytest.raises(ConfigError):
            FeatureExtractionConfig(feature_paths=("only",))


class TestRoundTrip:
    def test_write_then_parse_identical(self, tmp_path, rng):
        timestamps = sorted(rng.uniform(1.7e9, 1.7e9 + 1e5, 200))
        labels = [
            HierLabel.noise() if i % 3 else HierLabel("scan", "s", f"i{i % 5}")
            for i in range(200)
        ]
        seq = make_seq(timestamps, labels=labels)
        path = tmp_path / "out.jsonl"
        write_stream(seq, path)
        back = parse_stream(path)
        assert len(back) == len(seq)
        for a, b in zip(seq, back):
            assert a.timestamp == b.timestamp
            assert a.attributes == b.attributes
            assert a.label == b.label
            assert a.source_index == b.source_index

    def test_shuffled_input_same_sequence(self, tmp_path, rng):
        records = [
            {"time": float(t), "type": f"t{i}", "device": "d"}
            for i, t in enumerate(rng.uniform(0, 1000, 100))
        ]
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_lines(p1, records)
        shuffled = list(records)
        rng.shuffle(shuffled)
        write_lines(p2, shuffled)
        s1 = parse_stream(p1, RAW_CFG)
        s2 = parse_stream(p2, RAW_CFG)
        assert [a.timestamp for a in s1] == [a.timestamp for a in s2]
        assert [a.attributes for a in s1] == [a.attributes for a in s2]


class TestSplitScenarios:
    def _make_dir(self, tmp_path, ids):
        for sid in ids:
            write_lines(tmp_path / f"{sid}.jsonl", [
                {"time": 1.0, "feature_0": "a", "feature_1": "d"}
            ])

    def test_partition(self, tmp_path):
        self._make_dir(tmp_path, ["1", "2", "3", "4", "5", "6", "7", "8"])
        spec = {"5": "train", "6": "train", "7": "train", "8": "train",
                "2": "val", "4": "val", "1": "test", "3": "test"}
        train, val, test = split_scenarios(tmp_path, spec)
        assert (len(train), len(val), len(test)) == (4, 2, 2)

    def test_single_scenario(self, tmp_path):
        self._make_dir(tmp_path, ["1"])
        train, val, test = split_scenarios(tmp_path, {"1": "val"})
        assert (len(train), len(val), len(test)) == (0, 1, 0)

    def test_missing_scenario(self, tmp_path):
        self._make_dir(tmp_path, ["1"])
        with pytest.raises(MissingScenario):
            split_scenarios(tmp_path, {"9": "train"})
