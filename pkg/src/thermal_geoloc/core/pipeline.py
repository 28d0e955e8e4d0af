"""
Geo-localization pipeline: stage sequencing, artifacts and resumability
"""

import csv
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.table import Table

from ..enhance import apply_ce, enhance_pairs
from ..evalkit import (
    EvalReport,
    check_fingerprint,
    error_histogram,
    evaluate,
    plot_histogram,
    render_report,
    write_histogram_csv,
    write_report,
)
from ..evalkit.metrics import Histogram
from ..exceptions import ConfigError, GeoLocError, InputError, StageError
from ..geodata import (
    TiledDataset,
    build_dataset,
    filter_invalid,
    load_dataset,
    load_raster,
    read_image,
    save_raster,
    write_dataset_manifest,
)
from ..models.config import ExperimentConfig
from ..models.descriptor import DescriptorIndex, RetrievalResult
from ..models.tile import DatasetSplit, PairedCrop
from ..retrieval import build_index, knn, knn_within, load_index, save_index
from ..sgm import BEST_CHECKPOINT, embed, load_sgm, model_fingerprint
from ..sgm.trainer import train_sgm
from ..synthmap import generate_world
from ..tgm import (
    CHECKPOINT_NAME,
    generate_dataset,
    generated_fingerprint,
    load_generated_dataset,
    load_generator,
    save_generated_dataset,
    save_image_grid,
    train_tgm,
)
from ..tgm.trainer import CHECKPOINT_KIND as TGM_KIND
from ..utils.checkpoint import load_checkpoint

STAGE_EXIT_CODES: Dict[str, int] = {
    "synthmap": 10,
    "tile": 11,
    "train-tgm": 12,
    "generate": 13,
    "train-sgm": 14,
    "build-index": 15,
    "query": 16,
    "evaluate": 17,
    "histogram": 18,
}

GRID_SAMPLES = 4


class GeoLocalizationPipeline:
    """Runs the stages of one ablation cell inside a work directory"""

    def __init__(self, config: ExperimentConfig, force: bool = False):
        """
        Initialize the pipeline

        Args:
            config: Validated experiment configuration
            force: Re-run stages even when their artifact already exists
        """
        config.validate()
        self.config = config
        self.force = force
        self.paths = config.paths
        self.cell = config.cell_name
        self.console = Console()
        self._dataset: Optional[TiledDataset] = None
        self._resolve_maps()

    # Artifact locations

    @property
    def tgm_checkpoint(self) -> Path:
        return self.paths.tgm_dir(self.config.tgm_variant) / CHECKPOINT_NAME

    @property
    def generated_file(self) -> Path:
        return self.paths.generated_dataset(self.config.tgm_variant)

    @property
    def sgm_checkpoint(self) -> Path:
        return self.paths.sgm_dir(self.cell) / BEST_CHECKPOINT

    @property
    def index_file(self) -> Path:
        return self.paths.index_file(self.cell)

    def report_file(self, suffix: str) -> Path:
        return self.paths.report_dir / f"{self.cell}_{self.config.eval_split}{suffix}"

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """Turn any failure inside a stage into a StageError with its exit code"""
        logging.info(f"[{self.cell}] Stage {name} started")
        try:
            yield
        except (ConfigError, StageError):
            raise
        except GeoLocError as e:
            raise StageError(name, STAGE_EXIT_CODES[name], str(e)) from e
        except Exception as e:
            raise StageError(
                name, STAGE_EXIT_CODES[name], f"{type(e).__name__}: {e}"
            ) from e
        logging.info(f"[{self.cell}] Stage {name} finished")

    def _metadata(self, key: str = "training_fingerprint") -> Dict[str, str]:
        """Checkpoint metadata; key names an ExperimentConfig fingerprint property"""
        return {key: getattr(self.config, key), "cell": self.cell}

    # Stages

    def _world_files(self) -> Tuple[Path, Path]:
        world_dir = self.paths.root / "world"
        return (
            Path(self.paths.satellite_map or world_dir / "satellite.png"),
            Path(self.paths.thermal_map or world_dir / "thermal.png"),
        )

    def _resolve_maps(self) -> bool:
        """Fill unset map paths from a previous synthmap run; False if none exist"""
        if self.paths.satellite_map and self.paths.thermal_map:
            return True
        sat_path, thermal_path = self._world_files()
        if not (sat_path.exists() and thermal_path.exists()):
            return False
        self.paths.satellite_map = str(sat_path)
        self.paths.thermal_map = str(thermal_path)
        return True

    def synthmap(self) -> Tuple[Path, Path]:
        """Write a synthetic map pair and point the config at it"""
        with self.stage("synthmap"):
            satellite, thermal = generate_world(self.config.world)
            sat_path, thermal_path = self._world_files()
            save_raster(satellite, sat_path)
            save_raster(thermal, thermal_path)
            self.paths.satellite_map = str(sat_path)
            self.paths.thermal_map = str(thermal_path)
            logging.info(f"Synthetic maps written to {sat_path} and {thermal_path}")
            return sat_path, thermal_path

    def tile(self) -> TiledDataset:
        with self.stage("tile"):
            if not self._resolve_maps():
                raise ConfigError(
                    "SATELLITE_MAP and THERMAL_MAP must be set (or run synthmap first)"
                )
            unpaired = self.paths.unpaired_satellite_map
            dataset = build_dataset(
                satellite=load_raster(self.paths.satellite_map),
                thermal=load_raster(self.paths.thermal_map),
                crop_size=self.config.crop_size,
                stride=self.config.stride,
                split_spec=self.config.split_regions,
                split_fractions=self.config.split_fractions,
                generated_regions=self.config.generated_regions,
                unpaired_satellite=load_raster(unpaired) if unpaired else None,
            )
            write_dataset_manifest(
                dataset,
                self.paths.dataset_manifest,
                self.paths.satellite_map,
                self.paths.thermal_map,
                unpaired,
                fingerprint=self.config.tiling_fingerprint,
            )
            dataset.fingerprint = self.config.tiling_fingerprint
            self.console.print(f"📦 {dataset.split}")
            self._dataset = dataset
            # Evaluation needs a non-empty split
            self._eval_pairs()
            return dataset

    def dataset(self) -> TiledDataset:
        if self._dataset is None:
            self._dataset = load_dataset(self.paths.dataset_manifest)
        return self._dataset

    def train_tgm(self) -> Path:
        with self.stage("train-tgm"):
            pairs = filter_invalid(
                self.dataset().split.train, self.config.max_invalid_fraction
            )
            result = train_tgm(
                self.config.tgm,
                pairs,
                self.tgm_checkpoint.parent,
                ce_factor=self.config.ce.factor,
                metadata=self._metadata("tgm_fingerprint"),
            )
            sample = pairs[:GRID_SAMPLES]
            generated = generate_dataset(
                result.generator,
                [p.satellite for p in sample],
                self.config.tgm.output_resolution,
                self.config.tgm.train_resolution,
            )
            save_image_grid(
                [p.satellite.image for p in sample],
                [p.thermal.image for p in sample],
                [g.thermal.image for g in generated],
                self.tgm_checkpoint.parent / "samples.png",
            )
            return self.tgm_checkpoint

    def generate(self) -> List[PairedCrop]:
        with self.stage("generate"):
            generator, tgm_config = load_generator(self.tgm_checkpoint)
            # A generator trained on enhanced targets already emits enhanced crops
            use_ce = self.config.use_ce and not tgm_config.use_ce_inputs
            pairs = generate_dataset(
                generator,
                self.dataset().unpaired_satellite,
                tgm_config.output_resolution,
                tgm_config.train_resolution,
                use_ce=use_ce,
                ce_factor=self.config.ce.factor,
            )
            save_generated_dataset(
                pairs, self.generated_file, self.config.tgm_fingerprint
            )
            return pairs

    def generated_pairs(self) -> List[PairedCrop]:
        return load_generated_dataset(
            self.generated_file, self.dataset().unpaired_satellite
        )

    def train_sgm(self) -> Path:
        with self.stage("train-sgm"):
            raw = self.dataset().split
            ce = self.config.ce
            split = DatasetSplit(
                train=enhance_pairs(raw.train, ce),
                val=enhance_pairs(raw.val, ce),
                test=enhance_pairs(raw.test, ce),
                split_spec=raw.split_spec,
            )
            generated = self.generated_pairs() if self.config.use_generated else []
            result = train_sgm(
                self.config.sgm,
                split,
                generated,
                self.sgm_checkpoint.parent,
                success_radius_m=self.config.success_radius_m,
                metadata=self._metadata(),
            )
            logging.info(
                f"Best validation R@1 {result.best_score:.1f}%"
                f" at epoch {result.best_epoch}"
            )
            return self.sgm_checkpoint

    def _eval_pairs(self) -> List[PairedCrop]:
        pairs = self.dataset().split.get(self.config.eval_split)
        if not pairs:
            raise InputError(f"The {self.config.eval_split} split is empty")
        return pairs

    def build_index(self) -> DescriptorIndex:
        with self.stage("build-index"):
            model, sgm_config = load_sgm(self.sgm_checkpoint)
            tiles = [p.satellite for p in self._eval_pairs()]
            index = build_index(model, tiles, sgm_config.infer_batch_size)
            save_index(index, self.index_file)
            return index

    def query(
        self,
        tile_id: Optional[int] = None,
        image_path: Optional[str] = None,
        k: int = 5,
        center: Optional[Tuple[float, float]] = None,
        radius_m: Optional[float] = None,
    ) -> RetrievalResult:
        """Retrieve the top-k database tiles for one thermal image"""
        with self.stage("query"):
            model, _ = load_sgm(self.sgm_checkpoint)
            index = load_index(self.index_file)
            check_fingerprint(model, index)
            if image_path:
                image = read_image(image_path)
                if image.ndim == 3:
                    image = image.mean(axis=2)
                truth = None
            elif tile_id is not None:
                by_id = {p.tile_id: p for p in self._eval_pairs()}
                if tile_id not in by_id:
                    raise InputError(
                        f"Tile {tile_id} is not in the {self.config.eval_split} split"
                    )
                image = by_id[tile_id].thermal.image
                truth = by_id[tile_id].position
            else:
                raise InputError("Give a tile id or an image path to query")

            image = apply_ce(image, self.config.ce)
            descriptor = embed(model, image)
            if radius_m is not None:
                prior_center = center or truth
                if prior_center is None:
                    raise InputError("A prior radius needs a center for image queries")
                result = knn_within(index, descriptor, k, prior_center, radius_m)
            else:
                result = knn(index, descriptor, k)
            self._print_result(result, truth)
            return result

    def _print_result(
        self, result: RetrievalResult, truth: Optional[Tuple[float, float]]
    ) -> None:
        if result.failed:
            self.console.print("❌ No database tile inside the prior region")
            return
        table = Table(title="Query result")
        table.add_column("Rank", justify="right")
        table.add_column("Tile", justify="right")
        table.add_column("Position (m)")
        table.add_column("Distance", justify="right")
        if truth is not None:
            table.add_column("Error (m)", justify="right")
        for rank, (tile_id, (x, y), distance) in enumerate(result.as_rows(), 1):
            row = [str(rank), str(tile_id), f"({x:.1f}, {y:.1f})", f"{distance:.4f}"]
            if truth is not None:
                row.append(f"{np.hypot(x - truth[0], y - truth[1]):.1f}")
            table.add_row(*row)
        self.console.print(table)

    def evaluate(self) -> EvalReport:
        with self.stage("evaluate"):
            model, sgm_config = load_sgm(self.sgm_checkpoint)
            index = load_index(self.index_file)
            queries = enhance_pairs(self._eval_pairs(), self.config.ce)
            report = evaluate(
                model,
                index,
                queries,
                recall_ns=self.config.recall_ns,
                prior_radius_m=self.config.prior_radius_m,
                success_radius_m=self.config.success_radius_m,
                batch_size=sgm_config.infer_batch_size,
                config=self.config.to_dict(),
            )
            report.cell_name = self.cell
            report.split = self.config.eval_split
            report.config_fingerprint = self.config.fingerprint
            write_report(report, self.report_file(".txt"))
            self._write_errors(report.per_query_errors, self.report_file("_errors.csv"))
            render_report(report, self.console)
            return report

    @staticmethod
    def _write_errors(errors: Sequence[float], path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["error_m"])
            writer.writerows([[f"{e:.6f}"] for e in errors])

    def histogram(
        self, edges: Optional[Sequence[float]] = None, plot: bool = True
    ) -> Histogram:
        with self.stage("histogram"):
            path = self.report_file("_errors.csv")
            if not path.exists():
                raise InputError(f"No per-query errors at {path}; run evaluate first")
            with open(path, newline="", encoding="utf-8") as f:
                errors = [float(row["error_m"]) for row in csv.DictReader(f)]
            histogram = error_histogram(errors, edges or self.config.histogram_edges)
            write_histogram_csv(histogram, self.report_file("_histogram.csv"))
            if plot:
                radius = self.config.prior_radius_m
                title = f"Top-1 error within {radius:g} m ({self.cell})"
                plot_histogram(histogram, self.report_file("_histogram.png"), title)
            for start, end, count in histogram.rows():
                self.console.print(f"  [{start:g}, {end:g}): {count}")
            return histogram

    # Full run

    def _index_is_current(self) -> bool:
        if not self.index_file.exists():
            return False
        model, _ = load_sgm(self.sgm_checkpoint)
        return load_index(self.index_file).model_fingerprint == model_fingerprint(model)

    def _dataset_is_current(self) -> bool:
        if not self.paths.dataset_manifest.exists():
            return False
        try:
            dataset = self.dataset()
        except ConfigError as e:
            logging.info(f"Dataset manifest is stale ({e}); re-tiling")
            return False
        if dataset.fingerprint == self.config.tiling_fingerprint:
            return True
        logging.info("Tiling settings changed; re-tiling")
        self._dataset = None
        return False

    def _checkpoint_is_current(
        self, path: Path, kind: str, key: str = "training_fingerprint"
    ) -> bool:
        if not path.exists():
            return False
        payload = load_checkpoint(path, kind)
        current = payload.get(key) == getattr(self.config, key)
        if not current:
            logging.info(f"{path} was written under another config; it will be rebuilt")
        return current

    def run(self) -> EvalReport:
        """tile -> [train-tgm -> generate] -> train-sgm -> build-index -> evaluate

        A stage is skipped when its artifact exists and matches, unless force is set.
        """
        logging.info(f"Running cell '{self.cell}' in {self.paths.root}")
        if not self._resolve_maps():
            self.synthmap()

        if self.force or not self._dataset_is_current():
            self.tile()
        else:
            logging.info(f"Reusing {self.paths.dataset_manifest}")
            with self.stage("tile"):
                self._eval_pairs()

        if self.config.use_generated:
            retrained = self.force or not self._checkpoint_is_current(
                self.tgm_checkpoint, TGM_KIND, "tgm_fingerprint"
            )
            if retrained:
                self.train_tgm()
            else:
                logging.info(f"Reusing generator {self.tgm_checkpoint}")
            stored = generated_fingerprint(self.generated_file)
            if retrained or stored != self.config.tgm_fingerprint:
                self.generate()
            else:
                logging.info(f"Reusing generated dataset {self.generated_file}")

        if self.force or not self._checkpoint_is_current(self.sgm_checkpoint, "sgm"):
            self.train_sgm()
        else:
            logging.info(f"Reusing SGM checkpoint {self.sgm_checkpoint}")

        with self.stage("build-index"):
            current = not self.force and self._index_is_current()
        if current:
            logging.info(f"Reusing index {self.index_file}")
        else:
            self.build_index()

        report = self.evaluate()
        self.histogram()
        return report
