"""POI data cleaning and fine-tuning dataset emission."""

from __future__ import annotations

import csv
import json
import logging
import math
import random
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError
from .geo import GeoPoint, ViewpointRecord
from .llm import EXTRACT_INSTRUCTION, GENERATE_INSTRUCTION
from .text import name_key

log = logging.getLogger(__name__)

SOURCES = ("encyclopedia", "travel_site", "map_api", "official")
SCHEMAS = {
    "viewpoint": ("name", "lat", "lon", "intro"),
    "hotel": ("name", "lat", "lon"),
    "coords": ("name", "lat", "lon"),
}
DEFAULT_SEED = 42


@dataclass
class RawRecord:
    source: str
    name: str
    lat: float | None = None
    lon: float | None = None
    intro: str | None = None
    row: int | None = None
    provenance: dict[str, str] = field(default_factory=dict)
    incomplete: bool = False

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if not self.name or not self.name.strip():
            raise ValueError("record name must be non-empty")
        if not self.provenance:
            self.provenance = {
                k: self.source for k in ("intro", "lat", "lon") if _present(getattr(self, k))
            }

    @property
    def ref(self) -> str:
        return f"{self.source}:{self.row}" if self.row is not None else f"{self.source}:{self.name}"

    @property
    def has_coords(self) -> bool:
        return self.lat is not None and self.lon is not None


def _present(value) -> bool:
    return value is not None and not (isinstance(value, str) and not value.strip())


@dataclass(frozen=True)
class RegionBounds:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError("bounds need lat_min < lat_max and lon_min < lon_max")

    def contains(self, lat: float, lon: float) -> bool:
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max


@dataclass(frozen=True)
class HotelRecord:
    name: str
    location: GeoPoint

    def __post_init__(self):
        if not self.name.strip():
            raise ValueError("hotel name must be non-empty")


@dataclass(frozen=True)
class FineTuneExample:
    instruction: str
    input: str
    output: str | tuple[str, str]

    def __post_init__(self):
        if isinstance(self.output, (list, tuple)):
            if len(self.output) != 2:
                raise ValueError("preference output must be a [chosen, rejected] pair")
            if self.output[0] == self.output[1]:
                raise ValueError("chosen and rejected answers must differ")
            object.__setattr__(self, "output", tuple(self.output))
        elif not self.output:
            raise ValueError("output must be non-empty")

    def to_dict(self) -> dict:
        out = list(self.output) if isinstance(self.output, tuple) else self.output
        return {"instruction": self.instruction, "input": self.input, "output": out}

    @classmethod
    def from_dict(cls, d: dict) -> "FineTuneExample":
        return cls(d["instruction"], d["input"], d["output"])


@dataclass
class RowError:
    row: str
    reason: str


@dataclass
class LoadResult:
    records: list[RawRecord]
    errors: list[RowError]


@dataclass
class DatasetStats:
    loaded: int = 0
    deduped: int = 0
    filled: int = 0
    coord_valid: int = 0
    coord_rejected: int = 0

    def check(self) -> None:
        if not (self.loaded >= self.deduped >= self.coord_valid):
            raise AssertionError(f"stage counts not monotone: {self}")
        if self.coord_valid + self.coord_rejected != self.deduped:
            raise AssertionError(f"coordinate partition does not cover deduped records: {self}")


# -- ingestion ---------------------------------------------------------------


def _parse_coord(text: str | None) -> float | None:
    if text is None or not text.strip():
        return None
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite coordinate {text!r}")
    return value


def load_csv(path, schema: str, source: str | None = None) -> LoadResult:
    """Read a UTF-8 CSV; bad rows go to ``errors`` keyed by file line number.

    Empty ``lat``/``lon`` cells load as missing values, not errors.
    """
    if schema not in SCHEMAS:
        raise ValueError(f"schema must be one of {tuple(SCHEMAS)}")
    source = source or ("map_api" if schema == "coords" else "travel_site")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    records, errors = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = SCHEMAS[schema]
        if not reader.fieldnames or not set(expected) <= set(reader.fieldnames):
            raise DataError(f"{path}: header {reader.fieldnames} lacks {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            ref = f"{source}:{lineno}"
            try:
                name = (row.get("name") or "").strip()
                if not name:
                    raise ValueError("empty name")
                rec = RawRecord(
                    source=source,
                    name=name,
                    lat=_parse_coord(row.get("lat")),
                    lon=_parse_coord(row.get("lon")),
                    intro=(row.get("intro") or "").strip() or None,
                    row=lineno,
                )
            except (TypeError, ValueError) as exc:
                errors.append(RowError(ref, str(exc)))
                continue
            records.append(rec)
    return LoadResult(records, errors)


def dedupe(records: Iterable[RawRecord]) -> list[RawRecord]:
    """Keep the first record for each normalized name, in first-seen order."""
    seen: set[str] = set()
    out = []
    for rec in records:
        key = name_key(rec.name)
        if key not in seen:
            seen.add(key)
            out.append(rec)
    return out


def merge_fill(
    primary: Sequence[RawRecord], secondary: Sequence[RawRecord], append_unmatched: bool = True
) -> list[RawRecord]:
    """Fill empty intro/coordinate fields of ``primary`` from name-matched ``secondary`` records.

    Existing primary values are never overwritten. Records still missing a
    field afterwards are flagged ``incomplete``. Secondary-only records are
    appended unless ``append_unmatched`` is false.
    """
    by_key = {name_key(r.name): r for r in secondary}
    used: set[str] = set()
    out = []
    for rec in primary:
        key = name_key(rec.name)
        rec = replace(rec, provenance=dict(rec.provenance))
        other = by_key.get(key)
        if other is not None:
            used.add(key)
            if not _present(rec.intro) and _present(other.intro):
                rec.intro = other.intro
                rec.provenance["intro"] = other.source
            for attr in ("lat", "lon"):
                if getattr(rec, attr) is None and getattr(other, attr) is not None:
                    setattr(rec, attr, getattr(other, attr))
                    rec.provenance[attr] = other.source
        rec.incomplete = not (_present(rec.intro) and rec.has_coords)
        out.append(rec)
    if append_unmatched:
        for other in secondary:
            if name_key(other.name) not in used:
                rec = replace(other, provenance=dict(other.provenance))
                rec.incomplete = not (_present(rec.intro) and rec.has_coords)
                out.append(rec)
    return out


def count_filled(before: Sequence[RawRecord], after: Sequence[RawRecord]) -> int:
    """Number of records that gained at least one field from another source."""
    orig = {name_key(r.name): r.provenance for r in before}
    return sum(
        1
        for r in after
        if name_key(r.name) in orig and set(r.provenance) - set(orig[name_key(r.name)])
    )


def validate_coords(
    records: Iterable[RawRecord], bounds: RegionBounds
) -> tuple[list[RawRecord], list[tuple[RawRecord, str]]]:
    """Split records into in-bounds and rejected (with reason ``missing`` or ``out_of_range``)."""
    valid, rejected = [], []
    for rec in records:
        if not rec.has_coords:
            rejected.append((rec, "missing"))
        elif not (-90 <= rec.lat <= 90) or not bounds.contains(rec.lat, rec.lon):
            rejected.append((rec, "out_of_range"))
        else:
            valid.append(rec)
    return valid, rejected


def to_viewpoints(records: Iterable[RawRecord]) -> tuple[list[ViewpointRecord], list[RowError]]:
    out, report = [], []
    for rec in records:
        if not _present(rec.intro):
            report.append(RowError(rec.ref, "missing_intro"))
            continue
        out.append(ViewpointRecord(rec.name, GeoPoint(rec.lat, rec.lon), rec.intro))
    return out, report


def to_hotels(records: Iterable[RawRecord]) -> list[HotelRecord]:
    return [HotelRecord(r.name, GeoPoint(r.lat, r.lon)) for r in records]


def load_viewpoints(path) -> list[ViewpointRecord]:
    """Load a cleaned ``name,lat,lon,intro`` catalog; any bad row is fatal."""
    result = load_csv(path, "viewpoint")
    if result.errors:
        first = result.errors[0]
        raise DataError(f"{path}: {len(result.errors)} bad rows, first {first.row}: {first.reason}")
    viewpoints, missing = to_viewpoints(r for r in result.records if r.has_coords)
    if missing or len(viewpoints) != len(result.records):
        raise DataError(f"{path}: rows without coordinates or introduction")
    return viewpoints


def load_hotels(path) -> list[HotelRecord]:
    result = load_csv(path, "hotel")
    if result.errors:
        raise DataError(f"{path}: {len(result.errors)} bad rows")
    return to_hotels(r for r in result.records if r.has_coords)


# -- fine-tuning data --------------------------------------------------------

STANDARD_TEMPLATE = "Please recommend me viewpoints near {name}"


def train_size(n: int, split: float) -> int:
    return math.floor(n * split + 1e-9)


def emit_sft_keyword_dataset(
    hotels: Sequence[HotelRecord],
    prompt_styles: Sequence[str] = (STANDARD_TEMPLATE,),
    split: float = 0.8,
    seed: int = DEFAULT_SEED,
    instruction: str = EXTRACT_INSTRUCTION,
) -> tuple[list[FineTuneExample], list[HotelRecord]]:
    """Seeded shuffle, then the first ``floor(n * split)`` hotels become training examples.

    Training example ``i`` uses prompt style ``i % len(prompt_styles)``.
    """
    if not hotels:
        raise DataError("no hotels to emit")
    if not 0 < split < 1:
        raise ValueError("split must lie strictly between 0 and 1")
    if not prompt_styles:
        raise ValueError("at least one prompt style is required")
    order = list(hotels)
    random.Random(seed).shuffle(order)
    cut = train_size(len(order), split)
    train = [
        FineTuneExample(instruction, prompt_styles[i % len(prompt_styles)].format(name=h.name), h.name)
        for i, h in enumerate(order[:cut])
    ]
    return train, order[cut:]


def emit_sft_generation_dataset(
    viewpoints: Iterable[ViewpointRecord | RawRecord],
    instruction: str = GENERATE_INSTRUCTION,
) -> tuple[list[FineTuneExample], list[RowError]]:
    examples, report = [], []
    for vp in viewpoints:
        if not _present(vp.intro):
            report.append(RowError(vp.name, "missing_intro"))
            continue
        examples.append(FineTuneExample(instruction, vp.name, vp.intro))
    return examples, report


def emit_orpo_dataset(
    viewpoints: Iterable[ViewpointRecord],
    baseline_outputs: dict[str, str],
    instruction: str = GENERATE_INSTRUCTION,
) -> tuple[list[FineTuneExample], list[RowError]]:
    """Preference pairs ``[intro, baseline]``; pairs where both are equal are dropped with a warning."""
    viewpoints = list(viewpoints)
    missing = [vp.name for vp in viewpoints if vp.name not in baseline_outputs]
    if missing:
        raise DataError(f"no baseline output for: {', '.join(missing)}")
    examples, report = [], []
    for vp in viewpoints:
        rejected = baseline_outputs[vp.name]
        if rejected == vp.intro:
            log.warning("baseline equals reference intro for %r; pair dropped", vp.name)
            report.append(RowError(vp.name, "degenerate_pair"))
            continue
        examples.append(FineTuneExample(instruction, vp.name, (vp.intro, rejected)))
    return examples, report


def dumps_examples(examples: Iterable[FineTuneExample]) -> str:
    return json.dumps([ex.to_dict() for ex in examples], ensure_ascii=False, indent=2) + "\n"


def write_examples(path, examples: Iterable[FineTuneExample], metadata: dict | None = None) -> None:
    """Write the examples array; ``metadata`` goes to a ``<stem>.meta.json`` sidecar."""
    path = Path(path)
    path.write_text(dumps_examples(examples), encoding="utf-8")
    if metadata is not None:
        meta_path = path.with_name(path.stem + ".meta.json")
        meta_path.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_examples(path) -> list[FineTuneExample]:
    return [FineTuneExample.from_dict(d) for d in json.loads(Path(path).read_text(encoding="utf-8"))]


def write_rejections(path, rows: Iterable[RowError]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "reason"])
        for r in rows:
            w.writerow([r.row, r.reason])


def write_viewpoints_csv(path, viewpoints: Iterable[ViewpointRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "lat", "lon", "intro"])
        for vp in viewpoints:
            w.writerow([vp.name, repr(vp.location.lat), repr(vp.location.lon), vp.intro])


def write_hotels_csv(path, hotels: Iterable[HotelRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "lat", "lon"])
        for h in hotels:
            w.writerow([h.name, repr(h.location.lat), repr(h.location.lon)])


# -- full ingestion run ------------------------------------------------------


@dataclass
class IngestResult:
    viewpoints: list[ViewpointRecord]
    hotels: list[HotelRecord]
    stats: dict[str, DatasetStats]
    rejections: list[RowError]

    def stats_dict(self) -> dict:
        return {k: asdict(v) for k, v in self.stats.items()}


def ingest(
    bounds: RegionBounds,
    encyclopedia: str | Path | None = None,
    travel_site: str | Path | None = None,
    coords: str | Path | None = None,
    hotels: str | Path | None = None,
) -> IngestResult:
    """Merge the viewpoint sources, attach coordinates, validate against ``bounds``.

    Encyclopedia entries take priority; travel-site entries fill their gaps
    and contribute unmatched viewpoints. The coordinate file only fills
    coordinates of known viewpoints.
    """
    rejections: list[RowError] = []
    stats: dict[str, DatasetStats] = {}

    def load(path, schema, source):
        if path is None:
            return []
        res = load_csv(path, schema, source)
        rejections.extend(res.errors)
        return res.records

    enc = load(encyclopedia, "viewpoint", "encyclopedia")
    travel = load(travel_site, "viewpoint", "travel_site")
    coord_recs = dedupe(load(coords, "coords", "map_api"))

    vp_stats = DatasetStats(loaded=len(enc) + len(travel))
    enc_d, travel_d = dedupe(enc), dedupe(travel)
    base = enc_d if enc_d else travel_d
    merged = merge_fill(enc_d, travel_d) if enc_d else list(travel_d)
    merged = dedupe(merged)
    vp_stats.deduped = len(merged)
    with_coords = merge_fill(merged, coord_recs, append_unmatched=False)
    vp_stats.filled = count_filled(base, with_coords)
    valid, rejected = validate_coords(with_coords, bounds)
    vp_stats.coord_valid, vp_stats.coord_rejected = len(valid), len(rejected)
    rejections.extend(RowError(r.ref, reason) for r, reason in rejected)
    viewpoints, no_intro = to_viewpoints(valid)
    rejections.extend(no_intro)
    vp_stats.check()
    stats["viewpoints"] = vp_stats

    hotel_list: list[HotelRecord] = []
    if hotels is not None:
        raw = load(hotels, "hotel", "travel_site")
        h_stats = DatasetStats(loaded=len(raw))
        deduped = dedupe(raw)
        h_stats.deduped = len(deduped)
        h_valid, h_rej = validate_coords(deduped, bounds)
        h_stats.coord_valid, h_stats.coord_rejected = len(h_valid), len(h_rej)
        rejections.extend(RowError(r.ref, reason) for r, reason in h_rej)
        h_stats.check()
        stats["hotels"] = h_stats
        hotel_list = to_hotels(h_valid)

    return IngestResult(viewpoints, hotel_list, stats, rejections)
