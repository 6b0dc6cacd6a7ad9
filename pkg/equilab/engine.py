from __future__ import annotations

import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
from loguru import logger
from tqdm import tqdm

from . import __version__
from .baseline import BaselineReport, check_baselines
from .cache import cache_dir
from .config import ExperimentConfig
from .discrepancy import DiscrepancyGuards, discrepancy_of_system
from .dyadic import boundary_denominators, build_cover, choose_depth, cover_diagnostics, draw_anchor
from .errors import EquilabError, check_guard
from .expsum import fk_sweep, max_exp_sum
from .recorder import DataRecorder, RecorderConfig
from .region import Region, region_from_spec
from .stats import SweepAnalyzer
from .variety import (
	SolutionCache,
	count_in_region,
	fouvry_grid_residuals,
	lang_weil_residual,
	solve_system,
	suspected_bad_reduction,
	theorem3_residual,
	well_shaped_residual,
)


@dataclass(frozen=True)
class Cell:
	key: str
	p: int
	system_index: int
	region_index: Optional[int]


def cell_seed(seed: int, key: str) -> int:
	"""Seed derived from the experiment seed and the cell key only."""
	digest = hashlib.sha256(key.encode("utf-8")).digest()
	words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
	return int(np.random.SeedSequence([seed, *words]).generate_state(1, dtype=np.uint64)[0] >> 1)


def plan_cells(config: ExperimentConfig) -> List[Cell]:
	systems = config.parsed_systems()
	system_ids = range(len(systems)) if systems else [0]
	cells = []
	for s in system_ids:
		tag = systems[s].system_hash if systems else "none"
		for p in config.primes:
			if config.kind == "expsum":
				cells.append(Cell(key=f"expsum|sys={tag}|p={p}", p=p, system_index=s, region_index=None))
				continue
			for r, spec in enumerate(config.regions):
				label = _region(config, r, systems[s].m if systems else config.m).label
				cells.append(Cell(key=f"{config.kind}|sys={tag}|p={p}|region={r}:{label}", p=p, system_index=s, region_index=r))
	return cells


def _region(config: ExperimentConfig, index: int, m: Optional[int]) -> Region:
	return region_from_spec(config.regions[index], m=m)


def _guards(config: ExperimentConfig) -> DiscrepancyGuards:
	g = config.guards
	return DiscrepancyGuards(n1_points=g.discrepancy_n1, n2_points=g.discrepancy_n2, n3_points=g.discrepancy_n3, work=g.discrepancy_work)


def _discrepancy_cell(config: ExperimentConfig, cell: Cell, seed: int) -> Dict[str, Any]:
	system = config.parsed_systems()[cell.system_index]
	region = _region(config, cell.region_index, system.m)
	check_guard("lattice", cell.p**system.m, config.guards.lattice)
	report = discrepancy_of_system(
		system,
		cell.p,
		region,
		L=config.L,
		exact=config.exact,
		sampled_trials=config.sampled_trials,
		seed=seed,
		guards=_guards(config),
	)
	return report.as_dict()


def _expsum_cell(config: ExperimentConfig, cell: Cell, seed: int) -> Dict[str, Any]:
	system = config.parsed_systems()[cell.system_index]
	sweep = fk_sweep(system, [cell.p], subcubes=config.subcubes, seed=seed, L=config.scan_L)
	full = max_exp_sum(system, cell.p, config.scan_L)
	return {
		"p": cell.p,
		"system_hash": system.system_hash,
		"max_ratio": sweep.max_by_prime[cell.p],
		"full_ratio": sweep.rows[0]["ratio"],
		"S_star_full": full.S_star,
		"argmax_full": list(full.argmax) if full.argmax else None,
		"rows": sweep.rows,
	}


def _cover_cell(config: ExperimentConfig, cell: Cell, seed: int, recorder: Optional[DataRecorder]) -> Dict[str, Any]:
	systems = config.parsed_systems()
	n = systems[cell.system_index].n if systems else 1
	m = systems[cell.system_index].m if systems else config.m
	region = _region(config, cell.region_index, m)
	M = choose_depth(config.depth_policy, cell.p, n, config.depth_M)
	anchor = draw_anchor(region.m, seed, boundary_denominators(cell.p, M))
	cover = build_cover(region, M, anchor)
	diag = cover_diagnostics(cover)
	if recorder is not None and config.export_cover:
		recorder.write_jsonl(f"cover_p{cell.p}_r{cell.region_index}.jsonl", cover.records())
	return {"p": cell.p, "region": region.label, "anchor": [str(v) for v in anchor.numerators], **diag.as_dict()}


def _variety_cell(config: ExperimentConfig, cell: Cell, seed: int) -> Dict[str, Any]:
	system = config.parsed_systems()[cell.system_index]
	region = _region(config, cell.region_index, system.m)
	sol = solve_system(system, cell.p, nu=config.nu, justification=config.justification, cache=SolutionCache(cache_dir()), guard=config.guards.solve)
	inside = count_in_region(sol, region)
	outside = count_in_region(sol, region.complement())
	residual = lang_weil_residual(sol)
	record: Dict[str, Any] = {
		"p": cell.p,
		"system_hash": system.system_hash,
		"region": region.label,
		"mu": region.measure(),
		"count": sol.count,
		"T_region": inside,
		"T_complement": outside,
		"partition_ok": inside + outside == sol.count,
		"lang_weil_residual": residual,
		"bad_reduction": suspected_bad_reduction(residual),
		"justification": config.justification,
	}
	if sol.count:
		record["well_shaped_residual"] = well_shaped_residual(sol, region)
		if region.very_well_shaped:
			record["theorem3_residual"] = theorem3_residual(sol, region)
		anchor = draw_anchor(system.m, seed, [cell.p * config.grid_k])
		grid = fouvry_grid_residuals(sol, config.grid_k, anchor)
		record["fouvry_max_abs"] = grid.max_abs
		record["fouvry_counts"] = grid.counts.reshape(-1).tolist()
		record["fouvry_partition_defect"] = grid.partition_defect
	if record["bad_reduction"]:
		logger.warning(f"p={cell.p}: Lang-Weil residual {residual:.3f}; suspected bad reduction")
	return record


def run_cell(config: ExperimentConfig, cell: Cell, recorder: Optional[DataRecorder] = None) -> Dict[str, Any]:
	seed = cell_seed(config.seed, cell.key)
	base = {"key": cell.key, "cell_seed": seed, "status": "ok"}
	try:
		if config.kind in ("discrepancy", "sweep"):
			body = _discrepancy_cell(config, cell, seed)
		elif config.kind == "expsum":
			body = _expsum_cell(config, cell, seed)
		elif config.kind == "cover":
			body = _cover_cell(config, cell, seed, recorder)
		else:
			body = _variety_cell(config, cell, seed)
	except EquilabError as exc:
		logger.error(f"cell {cell.key} failed: {exc}")
		return {**base, "p": cell.p, "status": "error", "error": f"{type(exc).__name__}: {exc}"}
	logger.info(f"cell {cell.key} done")
	return {**base, **body}


def _run_cell_star(args: Tuple[ExperimentConfig, Cell]) -> Dict[str, Any]:
	return run_cell(*args)


def summarize(config: ExperimentConfig, records: List[Dict[str, Any]]) -> Dict[str, Any]:
	if config.kind in ("discrepancy", "sweep"):
		return SweepAnalyzer(records).summary(["thm1_ratio", "thm2_ratio", "exact_D"])
	if config.kind == "expsum":
		return SweepAnalyzer(records, group="system_hash").summary(["max_ratio"])
	if config.kind == "variety":
		return SweepAnalyzer(records).summary(["theorem3_residual", "lang_weil_residual", "fouvry_max_abs"])
	ok = [r for r in records if r["status"] == "ok"]
	return {
		"max_ratio_vws": max((max(r["ratio_vws"]) for r in ok if r["ratio_vws"]), default=None),
		"max_deficiency_vws": max((r["deficiency_vws"] for r in ok), default=None),
		"max_abs_grid_law": max((max(abs(x) for x in r["grid_law"]) for r in ok if r["grid_law"]), default=None),
	}


def _plot_rows(config: ExperimentConfig, records: List[Dict[str, Any]]) -> Dict[str, List[Dict[str, Any]]]:
	ok = [r for r in records if r["status"] == "ok"]
	if config.kind in ("discrepancy", "sweep"):
		cols = ("p", "region", "mu", "N", "exact_D", "sampled_D", "S_star", "L", "ks_bound", "thm1_ratio", "thm2_ratio")
		return {"theorem_ratios.csv": [{c: r.get(c) for c in cols} for r in ok]}
	if config.kind == "expsum":
		return {"fk_ratios.csv": [row for r in ok for row in r["rows"]]}
	if config.kind == "cover":
		rows = []
		for r in ok:
			for i, (count, ws, vws, law) in enumerate(zip(r["layer_counts"], r["ratio_ws"], r["ratio_vws"], r["grid_law"]), start=1):
				rows.append({"p": r["p"], "region": r["region"], "i": i, "count": count, "ratio_ws": ws, "ratio_vws": vws, "grid_law": law})
		return {"cover_layers.csv": rows}
	cols = ("p", "region", "count", "T_region", "T_complement", "lang_weil_residual", "theorem3_residual", "well_shaped_residual", "fouvry_max_abs")
	return {"residuals.csv": [{c: r.get(c) for c in cols} for r in ok]}


@dataclass
class RunOutcome:
	result: Dict[str, Any]
	baseline: Optional[BaselineReport]
	output: Path


class ExperimentRunner:
	def __init__(self, config: ExperimentConfig, root: Path) -> None:
		self.config = config
		self.root = root
		out = Path(config.output)
		self.output = out if out.is_absolute() else root / out
		self.recorder = DataRecorder(config=RecorderConfig(root=self.output))

	def _execute(self, cells: List[Cell]) -> List[Dict[str, Any]]:
		progress = self.config.progress and len(cells) > 1
		if self.config.workers > 1 and len(cells) > 1 and not self.config.export_cover:
			with ProcessPoolExecutor(max_workers=self.config.workers) as pool:
				results: Iterable[Dict[str, Any]] = pool.map(_run_cell_star, [(self.config, c) for c in cells])
				if progress:
					results = tqdm(results, total=len(cells), desc=self.config.name)
				return list(results)
		iterator: Iterable[Cell] = tqdm(cells, desc=self.config.name) if progress else cells
		return [run_cell(self.config, cell, self.recorder) for cell in iterator]

	def run(self, baseline_file: Optional[Path] = None, check: bool = True) -> RunOutcome:
		cells = plan_cells(self.config)
		logger.info(f"{self.config.name}: {len(cells)} cells, kind={self.config.kind}, seed={self.config.seed}")
		ts0 = time.time()
		records = self._execute(cells)
		result = {
			"library_version": __version__,
			"config_hash": self.config.config_hash,
			"name": self.config.name,
			"kind": self.config.kind,
			"seed": self.config.seed,
			"cells": records,
			"summary": summarize(self.config, records),
		}
		self.recorder.write_json("result.json", result)
		self.recorder.write_json("result.meta.json", {"wall_clock_seconds": time.time() - ts0, "cells": len(cells)})
		self.recorder.write_csv("cells.csv", [{k: v for k, v in r.items() if k != "rows"} for r in records])
		for name, rows in _plot_rows(self.config, records).items():
			self.recorder.write_plot_data(name, rows)
		report = None
		if check:
			report = check_baselines(result, baseline_file or self.output / "baseline.json")
		return RunOutcome(result=result, baseline=report, output=self.output)
