"""
Scene-by-scene orchestration of the full dataflow.

For every scene: load rainy frames, obtain restored frames, reduce them to a
temporal median and a temporal mean, blend the two, correct brightness, save
the intermediates and score each stage against ground truth when present.
Scenes are independent; a failure in one is recorded and the rest carry on.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

from .brightness import DEFAULT_K, DEFAULT_N, apply_affine, fit_affine_plus, format_coefficients
from .ensemble import DEFAULT_WEIGHT, check_weight, weighted_average
from .errors import RainstackError
from .metrics import MetricReport, evaluate_scene
from .patchmatch import PatchMatchConfig
from .provider import ProviderKind, provide_restored
from .scene_io import (
    SceneRecord,
    discover_scenes,
    load_image,
    load_reference_library,
    load_scene,
    save_image,
)
from .temporal import temporal_mean, temporal_median

logger = logging.getLogger(__name__)

STAGES = ("median", "mean", "ensemble", "postprocess", "postprocess_plus", "evaluate")
STAGE_LABELS = {
    "median": "Median",
    "mean": "Restored mean",
    "ensemble": "+Weighted averaging",
    "postprocess": "+Post-Processing",
    "postprocess_plus": "+Post-Processing+",
}
STAGE_FILES = {
    "median": "median.png",
    "mean": "mean.png",
    "ensemble": "ensemble.png",
    "postprocess": "postprocess.png",
    "postprocess_plus": "postprocess_plus.png",
}
FINAL_FILE = "final.png"
METRICS_CSV = "metrics.csv"
METRICS_TXT = "metrics.txt"
CSV_HEADER = ("scene", "stage", "psnr", "ssim", "mse")
INTERMEDIATE_DEPTH = 16

_REQUIRES = {
    "ensemble": {"median", "mean"},
    "postprocess": {"ensemble"},
    "postprocess_plus": {"ensemble"},
}


class ConfigError(RainstackError, ValueError):
    pass


@dataclass
class PipelineConfig:
    dataset_root: Path
    out_dir: Path
    library_dir: Path | None = None
    provider: ProviderKind = ProviderKind.IDENTITY
    scene_providers: dict = field(default_factory=dict)
    restored_root: Path | None = None
    w: float = DEFAULT_WEIGHT
    K: int = DEFAULT_K
    N: int = DEFAULT_N
    patch: PatchMatchConfig = field(default_factory=PatchMatchConfig)
    seed: int = 0
    stages: frozenset = frozenset(STAGES)
    match_on: str = "median"
    quantized_metrics: bool = False
    jobs: int = 1

    def __post_init__(self):
        self.dataset_root = Path(self.dataset_root)
        self.out_dir = Path(self.out_dir)
        self.library_dir = Path(self.library_dir) if self.library_dir is not None else None
        self.restored_root = Path(self.restored_root) if self.restored_root is not None else None
        self.provider = ProviderKind.parse(self.provider)
        self.scene_providers = {k: ProviderKind.parse(v) for k, v in self.scene_providers.items()}
        self.stages = frozenset(self.stages)
        self.w = check_weight(self.w)
        self.validate()

    def validate(self):
        unknown = self.stages - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stages: {sorted(unknown)}")
        for stage, needs in _REQUIRES.items():
            if stage in self.stages and not needs <= self.stages:
                raise ConfigError(f"stage {stage!r} requires {sorted(needs - self.stages)}")
        if self.corrects and self.library_dir is None:
            raise ConfigError("brightness correction needs a reference library directory")
        if self.match_on not in ("median", "ensemble"):
            raise ConfigError(f"match_on must be 'median' or 'ensemble', got {self.match_on!r}")
        if self.K < 2 or self.N < 1:
            raise ConfigError("need K >= 2 and N >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    @property
    def corrects(self) -> bool:
        return bool({"postprocess", "postprocess_plus"} & self.stages)

    def provider_for(self, scene_id) -> ProviderKind:
        return self.scene_providers.get(scene_id, self.provider)


@dataclass
class MetricRow:
    scene: str
    stage: str
    report: MetricReport


@dataclass
class SceneResult:
    scene_id: str
    rows: list = field(default_factory=list)
    coefficients: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class PipelineResult:
    scenes: list

    @property
    def rows(self) -> list:
        return [row for s in self.scenes for row in s.rows]

    @property
    def failures(self) -> list:
        return [s for s in self.scenes if not s.ok]


def _restored_dir(record: SceneRecord, cfg: PipelineConfig):
    if cfg.restored_root is not None:
        return cfg.restored_root / record.scene_id
    return record.restored_dir


def process_scene(record: SceneRecord, cfg: PipelineConfig, library) -> SceneResult:
    """Run the configured stage chain on one scene and write its outputs."""
    result = SceneResult(record.scene_id)
    try:
        _process_scene(record, cfg, library, result)
    except (RainstackError, OSError, ValueError) as exc:
        logger.error("scene %s failed: %s", record.scene_id, exc)
        result.error = f"{type(exc).__name__}: {exc}"
        result.rows.clear()
    return result


def _process_scene(record, cfg, library, result):
    stages = cfg.stages
    out = cfg.out_dir / record.scene_id
    out.mkdir(parents=True, exist_ok=True)

    rainy = load_scene(record.rainy_dir, scene_id=record.scene_id)
    images = {}
    if "median" in stages:
        images["median"] = temporal_median(rainy)
    if "mean" in stages:
        kind = cfg.provider_for(record.scene_id)
        restored = provide_restored(rainy, kind, _restored_dir(record, cfg))
        images["mean"] = temporal_mean(restored)
    if "ensemble" in stages:
        images["ensemble"] = weighted_average(images["mean"], images["median"], cfg.w)

    if cfg.corrects:
        x_pe = images["ensemble"]
        query = images["median"] if cfg.match_on == "median" else x_pe
        if "postprocess" in stages:
            coeffs = fit_affine_plus(x_pe, 1, cfg.K, cfg.seed, library, cfg.patch, query_img=query)
            images["postprocess"] = apply_affine(x_pe, coeffs)
            result.coefficients["postprocess"] = coeffs
        if "postprocess_plus" in stages:
            coeffs = fit_affine_plus(x_pe, cfg.N, cfg.K, cfg.seed, library, cfg.patch, query_img=query)
            images["postprocess_plus"] = apply_affine(x_pe, coeffs)
            result.coefficients["postprocess_plus"] = coeffs

    for stage, name in STAGE_FILES.items():
        if stage in images:
            save_image(images[stage], out / name, INTERMEDIATE_DEPTH)
    final = _final_stage(images)
    if final is not None:
        save_image(images[final], out / FINAL_FILE, INTERMEDIATE_DEPTH)
    _write_coefficients(out, record.scene_id, result.coefficients)

    if "evaluate" in stages and record.clean_path is not None:
        clean = load_image(record.clean_path)
        for stage in STAGE_LABELS:
            if stage in images:
                report = evaluate_scene(images[stage], clean, quantized=cfg.quantized_metrics)
                result.rows.append(MetricRow(record.scene_id, STAGE_LABELS[stage], report))


def _final_stage(images):
    for stage in ("postprocess_plus", "postprocess", "ensemble", "median", "mean"):
        if stage in images:
            return stage
    return None


def _write_coefficients(out: Path, scene_id: str, coefficients: dict):
    main = "postprocess_plus" if "postprocess_plus" in coefficients else "postprocess"
    for stage, coeffs in coefficients.items():
        name = "coefficients.txt" if stage == main else f"coefficients_{stage}.txt"
        (out / name).write_text(format_coefficients(scene_id, coeffs))


def run_pipeline(cfg: PipelineConfig, records=None) -> PipelineResult:
    records = discover_scenes(cfg.dataset_root) if records is None else list(records)
    if not records:
        raise ConfigError(f"{cfg.dataset_root}: no scenes found")
    library = load_reference_library(cfg.library_dir) if cfg.corrects else []
    if cfg.corrects and not library:
        raise ConfigError(f"{cfg.library_dir}: reference library is empty")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)

    work = partial(process_scene, cfg=cfg, library=library)
    if cfg.jobs == 1 or len(records) == 1:
        scenes = [work(r) for r in records]
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            scenes = list(pool.map(work, records))

    result = PipelineResult(scenes)
    if "evaluate" in cfg.stages:
        write_tables(result.rows, cfg.out_dir)
    return result


# ---------------------------------------------------------------------------
# metric tables
# ---------------------------------------------------------------------------

def summary_rows(rows) -> list:
    """Per-stage mean over scenes, in first-appearance stage order."""
    by_stage = {}
    for row in rows:
        by_stage.setdefault(row.stage, []).append(row.report)
    out = []
    for stage, reports in by_stage.items():
        n = len(reports)
        out.append(MetricRow("mean", stage, MetricReport(
            psnr=sum(r.psnr for r in reports) / n,
            ssim=sum(r.ssim for r in reports) / n,
            mse=sum(r.mse for r in reports) / n,
        )))
    return out


def _fmt(v: float) -> str:
    return "inf" if math.isinf(v) else repr(float(v))


def format_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in list(rows) + summary_rows(rows):
        r = row.report
        writer.writerow([row.scene, row.stage, _fmt(r.psnr), _fmt(r.ssim), _fmt(r.mse)])
    return buf.getvalue()


def format_table(rows) -> str:
    rows = list(rows)
    all_rows = rows + summary_rows(rows)
    width = max([len("scene")] + [len(r.scene) for r in all_rows])
    swidth = max([len("stage")] + [len(r.stage) for r in all_rows])
    lines = [f"{'scene':<{width}}  {'stage':<{swidth}}  {'PSNR':>8}  {'SSIM':>6}  {'MSE':>10}"]
    for i, row in enumerate(all_rows):
        if i == len(rows):
            lines.append("-" * len(lines[0]))
        r = row.report
        lines.append(f"{row.scene:<{width}}  {row.stage:<{swidth}}  {r.psnr:8.3f}  {r.ssim:6.3f}  {r.mse:10.3e}")
    return "\n".join(lines) + "\n"


def write_tables(rows, out_dir) -> None:
    out_dir = Path(out_dir)
    (out_dir / METRICS_CSV).write_text(format_csv(rows))
    (out_dir / METRICS_TXT).write_text(format_table(rows))


def parse_csv(text: str) -> list:
    reader = csv.DictReader(io.StringIO(text))
    return [MetricRow(r["scene"], r["stage"], MetricReport(float(r["psnr"]), float(r["ssim"]), float(r["mse"])))
            for r in reader]


def evaluate_outputs(dataset_root, out_dir, quantized: bool = False) -> list:
    """Score previously written stage images under ``out_dir`` against each scene's ``clean.png``."""
    rows = []
    for record in discover_scenes(dataset_root):
        if record.clean_path is None:
            continue
        scene_out = Path(out_dir) / record.scene_id
        clean = None
        for stage, label in STAGE_LABELS.items():
            path = scene_out / STAGE_FILES[stage]
            if not path.is_file():
                continue
            clean = load_image(record.clean_path) if clean is None else clean
            rows.append(MetricRow(record.scene_id, label, evaluate_scene(load_image(path), clean, quantized)))
    return rows
