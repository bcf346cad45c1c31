"""Corpus augmentation: split labelled corpora into reusable pieces and
recombine them under declarative configs, plus a synthetic corpus generator.

A labelled corpus is split into per-day noise sequences (timestamps reduced
to time-of-day offsets) and per-attack sequences (timestamps reduced to
offsets from the attack's first alert).  Day configs overlay any number of
noise days, never shifting their time-of-day, and place attacks at chosen
start times; the noise level of a day is simply the number of noise
sequences overlaid.  Composition is a pure function of (config, library).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from .core import (
    FEATURE_KEYS,
    SECONDS_PER_DAY,
    Alert,
    AlertSequence,
    HierLabel,
    reindex,
)
from .errors import (
    AttackOverflowsDayWarning,
    ConfigError,
    UnlabelledAlert,
    UnresolvedRef,
)
from .ingest import parse_stream, write_stream


@dataclass
class NoiseDaySequence:
    """One calendar day of false-positive alerts, times as day offsets."""

    scenario: str
    day: int
    alerts: AlertSequence

    def __post_init__(self):
        for a in self.alerts:
            if a.label is None or not a.label.is_noise:
                raise ValueError("noise day may only contain noise alerts")
            if not 0.0 <= a.timestamp < SECONDS_PER_DAY:
                raise ValueError("noise offsets must lie in [0, 86400)")


@dataclass
class AttackSequence:
    """Alerts of one attack step, times as offsets from its first alert."""

    event: str
    stage: str
    source_instance: str
    alerts: AlertSequence
    origin_day: int = 0
    origin_start: float = 0.0
    key: str = ""

    def __post_init__(self):
        if not self.alerts:
            raise ValueError("attack sequence may not be empty")
        if self.alerts[0].timestamp != 0.0:
            raise ValueError("first attack offset must be 0")
        for a in self.alerts:
            if a.label is None or a.label.is_noise:
                raise ValueError("attack sequence may only contain attack alerts")

    @property
    def duration(self) -> float:
        return self.alerts[-1].timestamp


@dataclass(frozen=True)
class AttackPlacement:
    attack_key: str
    start: float  # seconds of day
    instance: str

    def __post_init__(self):
        if not 0.0 <= self.start < SECONDS_PER_DAY:
            raise ConfigError("attack start must lie in [0, 86400)")
        if not self.instance:
            raise ConfigError("attack placement needs an instance id")


@dataclass(frozen=True)
class DayConfig:
    """One augmented day: noise refs (the noise level) plus attack placements.

    Composed days normally carry at least one noise ref; empty refs are
    accepted so identity configs can reproduce corpora whose trailing days
    hold only attack alerts.
    """

    noise_refs: tuple[tuple[str, int], ...] = ()
    attacks: tuple[AttackPlacement, ...] = ()

    @property
    def noise_level(self) -> int:
        return len(self.noise_refs)


@dataclass(frozen=True)
class ScenarioConfig:
    """Consecutive augmented days anchored at a base date (epoch midnight)."""

    days: tuple[DayConfig, ...]
    base_date: float

    def __post_init__(self):
        if len(self.days) < 1:
            raise ConfigError("a scenario needs at least one day")


@dataclass
class CorpusSplit:
    """The reusable pieces of one labelled scenario."""

    scenario: str
    day0: int  # absolute epoch day of the corpus start
    noise_days: list[NoiseDaySequence]
    attacks: list[AttackSequence]


@dataclass
class Library:
    """Addressable pool of noise days and attack sequences."""

    noise: dict[tuple[str, int], NoiseDaySequence] = field(default_factory=dict)
    attacks: dict[str, AttackSequence] = field(default_factory=dict)

    def add_split(self, split: CorpusSplit) -> None:
        for nd in split.noise_days:
            self.noise[(nd.scenario, nd.day)] = nd
        for atk in split.attacks:
            base = f"{atk.event}__{atk.stage}"
            key = base
            ordinal = 2
            while key in self.attacks:
                key = f"{base}__{ordinal}"
                ordinal += 1
            atk.key = key
            self.attacks[key] = atk


def _day_start(t: float) -> float:
    return math.floor(t / SECONDS_PER_DAY) * SECONDS_PER_DAY


def split_corpus(seq: AlertSequence, scenario: str = "0") -> CorpusSplit:
    """Split a fully labelled corpus into noise days and attack sequences.

    Noise alerts are partitioned by calendar day with time-of-day offsets;
    attack alerts are partitioned by their full three-level label with
    offsets from the attack's first alert.
    """
    if len(seq) == 0:
        raise ValueError("cannot split an empty corpus")
    for i, alert in enumerate(seq):
        if alert.label is None:
            raise UnlabelledAlert(i)

    day0 = int(math.floor(seq[0].timestamp / SECONDS_PER_DAY))
    noise_by_day: dict[int, list[Alert]] = {}
    attack_by_leaf: dict[tuple[str, str, str], list[Alert]] = {}
    leaf_order: list[tuple[str, str, str]] = []
    for alert in seq:
        if alert.label.is_noise:
            day_abs = int(math.floor(alert.timestamp / SECONDS_PER_DAY))
            offset = alert.timestamp - day_abs * SECONDS_PER_DAY
            noise_by_day.setdefault(day_abs - day0, []).append(
                alert.with_(timestamp=offset)
            )
        else:
            leaf = alert.label.leaf
            if leaf not in attack_by_leaf:
                attack_by_leaf[leaf] = []
                leaf_order.append(leaf)
            attack_by_leaf[leaf].append(alert)

    noise_days = [
        NoiseDaySequence(scenario=scenario, day=day, alerts=reindex(alerts))
        for day, alerts in sorted(noise_by_day.items())
    ]
    attacks = []
    for leaf in leaf_order:
        alerts = attack_by_leaf[leaf]
        t0 = alerts[0].timestamp
        start_day = _day_start(t0)
        offsets = [a.with_(timestamp=a.timestamp - t0) for a in alerts]
        attacks.append(
            AttackSequence(
                event=leaf[0],
                stage=leaf[1],
                source_instance=leaf[2],
                alerts=reindex(offsets),
                origin_day=int(start_day / SECONDS_PER_DAY) - day0,
                origin_start=t0 - start_day,
            )
        )
    return CorpusSplit(scenario=scenario, day0=day0, noise_days=noise_days, attacks=attacks)


def compose_day(cfg: DayConfig, library: Library, date: float) -> list[Alert]:
    """Materialize one augmented day starting at epoch second ``date``.

    Noise alerts keep their time-of-day exactly; each attack placement's
    alerts are shifted to start at its start time and relabelled with the
    placement's instance id.  Attacks running past the day end are allowed
    (with a warning) and simply extend into the following days.
    """
    entries: list[tuple[float, int, int, Alert]] = []
    stream = 0
    for ref in cfg.noise_refs:
        ref = (ref[0], int(ref[1]))
        if ref not in library.noise:
            raise UnresolvedRef(f"unknown noise day {ref!r}")
        for pos, alert in enumerate(library.noise[ref].alerts):
            entries.append((date + alert.timestamp, stream, pos, alert))
        stream += 1
    for placement in cfg.attacks:
        attack = library.attacks.get(placement.attack_key)
        if attack is None:
            raise UnresolvedRef(f"unknown attack {placement.attack_key!r}")
        if placement.start + attack.duration >= SECONDS_PER_DAY:
            warnings.warn(
                f"attack {placement.attack_key!r} extends past its day",
                AttackOverflowsDayWarning,
            )
        label = HierLabel(attack.event, attack.stage, placement.instance)
        begin = date + placement.start
        for pos, alert in enumerate(attack.alerts):
            entries.append((begin + alert.timestamp, stream, pos, alert.with_(label=label)))
        stream += 1
    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    return [alert.with_(timestamp=t) for t, _, _, alert in entries]


def compose_scenario(cfg: ScenarioConfig, library: Library) -> AlertSequence:
    """Concatenate composed days into one sorted, validated scenario.

    Alerts beyond the scenario end (attacks overflowing the last day) are
    clipped with a warning.
    """
    seen: dict[tuple[str, str], set[str]] = {}
    for day in cfg.days:
        for p in day.attacks:
            attack = library.attacks.get(p.attack_key)
            if attack is None:
                raise UnresolvedRef(f"unknown attack {p.attack_key!r}")
            ids = seen.setdefault((attack.event, attack.stage), set())
            if p.instance in ids:
                raise ConfigError(
                    f"instance {p.instance!r} reused for attack {p.attack_key!r}"
                )
            ids.add(p.instance)

    entries: list[tuple[float, int, Alert]] = []
    for k, day in enumerate(cfg.days):
        date = cfg.base_date + k * SECONDS_PER_DAY
        for alert in compose_day(day, library, date):
            entries.append((alert.timestamp, k, alert))
    end = cfg.base_date + len(cfg.days) * SECONDS_PER_DAY
    clipped = sum(1 for t, _, _ in entries if t >= end)
    if clipped:
        warnings.warn(
            f"clipped {clipped} alerts beyond the scenario end", AttackOverflowsDayWarning
        )
        entries = [e for e in entries if e[0] < end]
    entries.sort(key=lambda e: (e[0], e[1]))
    seq = reindex([alert for _, _, alert in entries])
    return seq


def identity_config(split: CorpusSplit) -> ScenarioConfig:
    """Config that recombines a split into the original corpus exactly.

    Attack keys must already be assigned, i.e. the split has been added to a
    :class:`Library`.
    """
    last_day = max([nd.day for nd in split.noise_days] or [0])
    for atk in split.attacks:
        if not atk.key:
            raise UnresolvedRef("identity config needs library-assigned attack keys")
        end_abs = atk.origin_day * SECONDS_PER_DAY + atk.origin_start + atk.duration
        last_day = max(last_day, int(math.floor(end_abs / SECONDS_PER_DAY)))
    noise_by_day = {nd.day: nd for nd in split.noise_days}
    placements_by_day: dict[int, list[AttackPlacement]] = {}
    for atk in split.attacks:
        placements_by_day.setdefault(atk.origin_day, []).append(
            AttackPlacement(atk.key, atk.origin_start, atk.source_instance)
        )
    days = []
    for day in range(last_day + 1):
        refs = ((split.scenario, day),) if day in noise_by_day else ()
        days.append(
            DayConfig(noise_refs=refs, attacks=tuple(placements_by_day.get(day, ())))
        )
    return ScenarioConfig(days=tuple(days), base_date=split.day0 * SECONDS_PER_DAY)


# --- library and config files -------------------------------------------------

def write_library(library: Library, directory) -> None:
    """Lay the library out as ``noise/<scenario>/<day>.jsonl`` and
    ``attacks/<key>.jsonl`` files in canonical JSON-lines form."""
    directory = Path(directory)
    for (scenario, day), nd in sorted(library.noise.items()):
        write_stream(nd.alerts, directory / "noise" / scenario / f"{day}.jsonl")
    meta = {}
    for key, atk in sorted(library.attacks.items()):
        write_stream(atk.alerts, directory / "attacks" / f"{key}.jsonl")
        meta[key] = {
            "event": atk.event,
            "stage": atk.stage,
            "source_instance": atk.source_instance,
            "origin_day": atk.origin_day,
            "origin_start": atk.origin_start,
        }
    with open(directory / "attacks" / "index.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(meta, fh, sort_keys=True)


def load_library(directory) -> Library:
    directory = Path(directory)
    lib = Library()
    noise_root = directory / "noise"
    if noise_root.is_dir():
        for scen_dir in sorted(noise_root.iterdir()):
            if not scen_dir.is_dir():
                continue
            for day_file in sorted(scen_dir.glob("*.jsonl")):
                day = int(day_file.stem)
                seq = parse_stream(day_file)
                lib.noise[(scen_dir.name, day)] = NoiseDaySequence(
                    scenario=scen_dir.name, day=day, alerts=seq
                )
    attacks_root = directory / "attacks"
    if attacks_root.is_dir():
        index_path = attacks_root / "index.yaml"
        meta = {}
        if index_path.exists():
            with open(index_path, "r", encoding="utf-8") as fh:
                meta = yaml.safe_load(fh) or {}
        for atk_file in sorted(attacks_root.glob("*.jsonl")):
            key = atk_file.stem
            seq = parse_stream(atk_file)
            info = meta.get(key, {})
            first = seq[0].label
            atk = AttackSequence(
                event=info.get("event", first.event),
                stage=info.get("stage", first.stage),
                source_instance=info.get("source_instance", first.instance),
                alerts=seq,
                origin_day=int(info.get("origin_day", 0)),
                origin_start=float(info.get("origin_start", 0.0)),
                key=key,
            )
            lib.attacks[key] = atk
    return lib


def _parse_base_date(value) -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        dt = datetime.strptime(value, "%Y-%m-%d").replace(tzinfo=timezone.utc)
        return dt.timestamp()
    raise ConfigError(f"unsupported base_date {value!r}")


def load_augment_config(path) -> list[tuple[str, ScenarioConfig]]:
    """Parse a declarative augmentation config file (YAML).

    Schema::

        base_date: 1754265600.0          # or "2025-08-04"
        scenarios:
          - id: more-noise-a
            days:
              - noise: [{scenario: "0", day: 0}, {scenario: "1", day: 0}]
                attacks:
                  - {attack: scan__recon, start: 46800.0, instance: scan_1}
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or "scenarios" not in doc:
        raise ConfigError("config must be a mapping with a 'scenarios' list")
    base_date = _parse_base_date(doc.get("base_date", 0.0))
    out = []
    for scen in doc["scenarios"]:
        days = []
        for day in scen.get("days", []):
            refs = tuple(
                (str(r["scenario"]), int(r["day"])) for r in (day.get("noise") or [])
            )
            attacks = tuple(
                AttackPlacement(
                    attack_key=str(p["attack"]),
                    start=float(p["start"]),
                    instance=str(p["instance"]),
                )
                for p in (day.get("attacks") or [])
            )
            days.append(DayConfig(noise_refs=refs, attacks=attacks))
        out.append((str(scen["id"]), ScenarioConfig(days=tuple(days), base_date=base_date)))
    return out


# --- synthetic corpus ----------------------------------------------------------

@dataclass(frozen=True)
class AttackBurst:
    """Template for one attack step: a burst with a fixed feature signature."""

    event: str
    stage: str
    instance: str
    start: float  # epoch seconds
    n_alerts: int
    spacing: float  # mean gap between alerts, seconds
    alert_types: tuple[str, ...]
    devices: tuple[str, ...]
    jitter: float = 0.0  # relative spacing jitter in [0, 1)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a fully labelled synthetic corpus."""

    seed: int = 0
    start: float = 1754265600.0  # 2025-08-04T00:00:00Z
    duration: float = SECONDS_PER_DAY
    noise_rate: float = 0.1  # alerts per second
    num_types: int = 8
    num_devices: int = 8
    attacks: tuple[AttackBurst, ...] = ()


def generate_synthetic(spec: SyntheticSpec) -> tuple[AlertSequence, Library]:
    """Poisson-process noise plus attack bursts, deterministic under the seed.

    Returns the labelled sequence and the library of its split pieces.
    """
    rng = np.random.default_rng(spec.seed)
    entries: list[tuple[float, int, int, Alert]] = []

    if spec.noise_rate > 0:
        times = []
        t = spec.start
        end = spec.start + spec.duration
        while True:
            gaps = rng.exponential(1.0 / spec.noise_rate, size=4096)
            arrivals = t + np.cumsum(gaps)
            inside = arrivals[arrivals < end]
            times.append(inside)
            if inside.size < arrivals.size:
                break
            t = arrivals[-1]
        noise_times = np.concatenate(times)
        type_idx = rng.integers(0, spec.num_types, size=noise_times.size)
        dev_idx = rng.integers(0, spec.num_devices, size=noise_times.size)
        noise_label = HierLabel.noise()
        for pos, (ts, ti, di) in enumerate(zip(noise_times, type_idx, dev_idx)):
            attrs = {
                FEATURE_KEYS[0]: f"type_{ti:02d}",
                FEATURE_KEYS[1]: f"dev_{di:02d}",
            }
            entries.append((float(ts), 0, pos, Alert(float(ts), attrs, noise_label)))

    for si, burst in enumerate(spec.attacks, start=1):
        if burst.n_alerts < 1:
            continue
        if burst.n_alerts > 1:
            lo, hi = 1.0 - burst.jitter, 1.0 + burst.jitter
            gaps = burst.spacing * rng.uniform(lo, hi, size=burst.n_alerts - 1)
            times = burst.start + np.concatenate([[0.0], np.cumsum(gaps)])
        else:
            times = np.array([burst.start])
        label = HierLabel(burst.event, burst.stage, burst.instance)
        t_choice = rng.integers(0, len(burst.alert_types), size=burst.n_alerts)
        d_choice = rng.integers(0, len(burst.devices), size=burst.n_alerts)
        for pos, (ts, ti, di) in enumerate(zip(times, t_choice, d_choice)):
            attrs = {
                FEATURE_KEYS[0]: burst.alert_types[int(ti)],
                FEATURE_KEYS[1]: burst.devices[int(di)],
            }
            entries.append((float(ts), si, pos, Alert(float(ts), attrs, label)))

    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    seq = reindex([alert for _, _, _, alert in entries])
    library = Library()
    library.add_split(split_corpus(seq))
    return seq, library
