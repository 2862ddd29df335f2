"""Three-stage query flow (extract, bridge, generate) and batch experiments."""

from __future__ import annotations

import copy
import time
import uuid
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Sequence

from . import dataset, llm, scoring
from .config import PipelineConfig
from .errors import ConfigError, DataError, DualGenError, StageError
from .geo import Catalog, GeoPoint, NearestResult, nearest_viewpoints
from .geocoder import Gazetteer, HttpGeocoder, amap_adapter, build_geocoder, latlon_adapter
from .jsonfmt import Fixed, dumps
from .metrics import exact_match_accuracy

ADAPTERS = {"amap": amap_adapter, "latlon": latlon_adapter}


@dataclass
class PipelineResponse:
    user_prompt: str
    extracted_keyword: str
    resolved_point: GeoPoint
    results: list[dict]
    timing_ms: dict[str, float] = field(default_factory=dict)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "user_prompt": self.user_prompt,
            "extracted_keyword": self.extracted_keyword,
            "resolved_point": {
                "lat": Fixed(self.resolved_point.lat, 6),
                "lon": Fixed(self.resolved_point.lon, 6),
            },
            "results": [
                {
                    "name": r["name"],
                    "distance_km": Fixed(r["distance_km"], 3),
                    "lat": Fixed(r["lat"], 6),
                    "lon": Fixed(r["lon"], 6),
                    "intro": r["intro"],
                }
                for r in self.results
            ],
        }
        if include_timing:
            out["timing_ms"] = {k: Fixed(v, 3) for k, v in self.timing_ms.items()}
        return out

    def to_json(self, include_timing: bool = False) -> str:
        """Timing is off by default so identical inputs give byte-identical output."""
        return dumps(self.to_dict(include_timing))


class Pipeline:
    """Loaded catalogs, geocoder and model backends for one configuration."""

    def __init__(self, config: PipelineConfig, load: bool = True):
        self.config = config
        self.catalog: Catalog | None = None
        self.hotels: list[dataset.HotelRecord] = []
        self.geocoder = None
        self.backends: dict[str, llm.Backend] = {}
        if load:
            self.load()

    @property
    def loaded(self) -> bool:
        return self.catalog is not None and self.geocoder is not None

    def load(self) -> None:
        cfg = self.config
        cfg.validate(need=("viewpoints",))
        self.catalog = Catalog(dataset.load_viewpoints(cfg.viewpoints_path))
        if cfg.hotels_path is not None:
            self.hotels = dataset.load_hotels(cfg.hotels_path)
        self.geocoder = self.build_geocoder()
        for role in ("extractor", "generator", "judge"):
            bc = cfg.backend(role)
            if bc is not None:
                self.backends[role] = llm.make_backend(bc)

    def build_geocoder(self):
        g = self.config.raw.get("geocoder", {})
        gaz = Gazetteer.from_csv(self.config.gazetteer_path) if self.config.gazetteer_path else None
        remote = None
        if g.get("url"):
            remote = HttpGeocoder(
                g["url"],
                keyword_param=g.get("keyword_param", "address"),
                adapter=ADAPTERS[g.get("adapter", "amap")],
                timeout_s=float(g.get("timeout_s", 10.0)),
                max_in_flight=int(g.get("max_in_flight", 4)),
            )
        return build_geocoder(gaz, remote, cache=bool(g.get("cache", True)))

    def backend(self, role: str) -> llm.Backend:
        try:
            return self.backends[role]
        except KeyError:
            raise ConfigError(f"backends.{role} is not configured") from None

    # -- stages ------------------------------------------------------------

    def extract(self, prompt: str) -> str:
        return llm.extract_location_keyword(
            prompt, self.backend("extractor"), self.config.prompts["extract_instruction"]
        )

    def generate(self, name: str) -> str:
        return llm.generate_viewpoint_intro(
            name,
            self.backend("generator"),
            self.config.prompts["generate_instruction"],
            self.config.generation_params,
        )

    def nearest(self, point: GeoPoint, k: int | None = None) -> list[NearestResult]:
        return nearest_viewpoints(point, self.catalog, k or self.config.k, self.config.earth)

    def run_query(self, user_prompt: str, k: int | None = None) -> PipelineResponse:
        """Prompt -> keyword -> coordinates -> k nearest viewpoints -> introductions.

        Any failure is raised as ``StageError`` tagged with the failing stage.
        """
        k = k or self.config.k
        if k < 1:
            raise ValueError("k must be >= 1")

        t0 = time.perf_counter()
        try:
            keyword = self.extract(user_prompt)
        except (DualGenError, ValueError) as exc:
            raise StageError("extract", exc) from exc
        t1 = time.perf_counter()
        try:
            point = self.geocoder.geocode(keyword)
            nearest = self.nearest(point, k)
        except (DualGenError, ValueError) as exc:
            raise StageError("bridge", exc) from exc
        t2 = time.perf_counter()
        results = []
        for r in nearest:
            try:
                intro = self.generate(r.name)
            except (DualGenError, ValueError) as exc:
                raise StageError("generate", exc) from exc
            results.append(
                {
                    "name": r.name,
                    "distance_km": r.distance_km,
                    "lat": r.location.lat,
                    "lon": r.location.lon,
                    "intro": intro,
                }
            )
        t3 = time.perf_counter()
        timing = {"extract": (t1 - t0) * 1e3, "bridge": (t2 - t1) * 1e3, "generate": (t3 - t2) * 1e3}
        return PipelineResponse(user_prompt, keyword, point, results, timing)

    # -- scoring helpers -------------------------------------------------------

    def scorers(self) -> scoring.Scorers:
        judge = self.backend("judge")
        templates = self.config.judge_templates
        return scoring.Scorers(
            fluency=lambda cand: llm.judge_score(cand, None, "fluency", judge, templates),
            relevance=lambda cand, ref: llm.judge_score(cand, ref, "relevance", judge, templates),
        )

    def run_experiment(self, test_set: Sequence[tuple[str, str]], mode: str) -> "ExperimentRun":
        return run_experiment(self, test_set, mode)


# -- experiments -------------------------------------------------------------

EXPERIMENT_MODES = ("extraction", "generation")


@dataclass
class ExperimentRun:
    run_id: str
    mode: str
    config_snapshot: MappingProxyType
    config_hash: str
    outputs: list[dict]
    report: scoring.ScoreReport
    summary: dict

    @property
    def failures(self) -> list[dict]:
        return [o for o in self.outputs if o.get("error")]

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "mode": self.mode,
            "config_hash": self.config_hash,
            "summary": self.summary,
            "outputs": self.outputs,
            "report": self.report.to_dict(),
        }


def run_experiment(
    pipe: Pipeline,
    test_set: Sequence[tuple[str, str]],
    mode: str,
    run_id: str | None = None,
) -> ExperimentRun:
    """Run one model role over a test set and score it.

    ``extraction`` items are (prompt, expected keyword) and are scored on the
    structured branch; ``generation`` items are (viewpoint name, reference
    intro) scored on the unstructured branch. Per-item failures are recorded
    and count as misses; the run always completes.
    """
    if not test_set:
        raise DataError("test set is empty")
    if mode not in EXPERIMENT_MODES:
        raise ValueError(f"mode must be one of {EXPERIMENT_MODES}")
    snapshot = MappingProxyType(copy.deepcopy(pipe.config.raw))
    outputs = []
    for source, expected in test_set:
        try:
            pred = pipe.extract(source) if mode == "extraction" else pipe.generate(source)
            outputs.append({"input": source, "expected": expected, "output": pred, "error": None})
        except (DualGenError, ValueError) as exc:
            outputs.append(
                {"input": source, "expected": expected, "output": "", "error": f"{type(exc).__name__}: {exc}"}
            )

    ok = [o for o in outputs if not o["error"]]
    workers = int(pipe.config.raw["eval"].get("workers", 1))
    bins = int(pipe.config.raw["eval"].get("bins", 10))
    weights = pipe.config.weights
    if mode == "extraction":
        report = scoring.evaluate_batch(
            [(o["output"], o["expected"]) for o in outputs], "structured", weights, workers=workers, bins=bins
        )
        summary = {
            "accuracy": exact_match_accuracy([o["output"] for o in outputs], [o["expected"] for o in outputs]),
            "raw": report.means.get("raw"),
            "percent": report.means.get("percent"),
        }
    else:
        items = [(o["output"], o["expected"]) for o in ok]
        if items:
            report = scoring.evaluate_batch(items, "unstructured", weights, pipe.scorers(), workers, bins)
        else:
            report = scoring.ScoreReport("unstructured", weights.with_branch("unstructured"), [])
        summary = {k: report.means.get(k) for k in ("fluency", "accuracy", "relevance", "raw", "percent")}
    summary.update({"n_items": len(outputs), "n_failed": len(outputs) - len(ok)})
    return ExperimentRun(
        run_id or uuid.uuid4().hex[:12],
        mode,
        snapshot,
        pipe.config.snapshot_hash,
        outputs,
        report,
        summary,
    )


TABLE_COLUMNS = ("model", "method", "compute_type", "fluency", "accuracy", "relevance", "raw", "percent")


def table_row(run: ExperimentRun, model: str = "", method: str = "", compute_type: str = "") -> dict:
    """One summary row in the per-model comparison layout."""
    s = run.summary
    return {
        "model": model,
        "method": method,
        "compute_type": compute_type,
        "fluency": s.get("fluency"),
        "accuracy": s.get("accuracy"),
        "relevance": s.get("relevance"),
        "raw": s.get("raw"),
        "percent": s.get("percent"),
    }
