from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional

import matplotlib

matplotlib.use("Agg")  # Non-interactive backend
import matplotlib.pyplot as plt
import seaborn as sns
from loguru import logger

from .recorder import read_csv

sns.set_style("whitegrid")
plt.rcParams["figure.figsize"] = (10, 6)
plt.rcParams["font.size"] = 10


def _float(value: str) -> Optional[float]:
	return float(value) if value not in ("", None) else None


def _series(rows: List[Dict[str, str]], group: str, x: str, y: str) -> Dict[str, List[tuple]]:
	out: Dict[str, List[tuple]] = defaultdict(list)
	for row in rows:
		xv, yv = _float(row.get(x, "")), _float(row.get(y, ""))
		if xv is not None and yv is not None:
			out[row.get(group, "")].append((xv, yv))
	return {k: sorted(v) for k, v in out.items()}


class LabVisualizer:
	"""Static renderings of the plot-data CSVs a run leaves under `<output>/plots`."""

	def __init__(self, output_dir: Path) -> None:
		self.output_dir = output_dir
		self.output_dir.mkdir(parents=True, exist_ok=True)

	def _save(self, fig: plt.Figure, name: str) -> Path:
		fpath = self.output_dir / name
		fig.tight_layout()
		fig.savefig(fpath, dpi=150, bbox_inches="tight")
		plt.close(fig)
		return fpath

	def plot_theorem_ratios(self, csv_path: Path) -> Path:
		rows = read_csv(csv_path)
		fig, axes = plt.subplots(1, 2, figsize=(12, 5), sharex=True)
		for ax, field in zip(axes, ("thm1_ratio", "thm2_ratio")):
			for region, pts in sorted(_series(rows, "region", "p", field).items()):
				xs, ys = zip(*pts)
				ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.5, label=region)
			ax.set_xscale("log")
			ax.set_yscale("log")
			ax.set_xlabel("p")
			ax.set_ylabel(field)
			ax.grid(True, alpha=0.3)
		axes[0].legend(loc="best", fontsize=8)
		fig.suptitle("Normalised discrepancy against p")
		return self._save(fig, "theorem_ratios.png")

	def plot_fk_ratios(self, csv_path: Path) -> Path:
		rows = read_csv(csv_path)
		fig, ax = plt.subplots()
		sns.stripplot(x=[int(r["p"]) for r in rows], y=[float(r["ratio"]) for r in rows], ax=ax, size=4, jitter=0.2)
		ax.set_xlabel("p")
		ax.set_ylabel("|S| / (p^(1/2) w^(m-1) log p)")
		ax.set_title("Cube sum ratios per prime")
		return self._save(fig, "fk_ratios.png")

	def plot_cover_layers(self, csv_path: Path) -> Path:
		rows = read_csv(csv_path)
		for row in rows:
			row["series"] = f"{row['region']} p={row['p']}"
		fig, axes = plt.subplots(1, 2, figsize=(12, 5), sharex=True)
		for ax, field in zip(axes, ("ratio_vws", "grid_law")):
			for name, pts in sorted(_series(rows, "series", "i", field).items()):
				xs, ys = zip(*pts)
				ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2, label=name)
			ax.set_xlabel("layer i")
			ax.set_ylabel(field)
			ax.grid(True, alpha=0.3)
		axes[0].legend(loc="best", fontsize=7)
		fig.suptitle("Dyadic layer sizes")
		return self._save(fig, "cover_layers.png")

	def plot_residuals(self, csv_path: Path) -> Path:
		rows = read_csv(csv_path)
		fig, ax = plt.subplots()
		for field, style in (("theorem3_residual", "-"), ("lang_weil_residual", "--")):
			for region, pts in sorted(_series(rows, "region", "p", field).items()):
				xs, ys = zip(*pts)
				ax.plot(xs, ys, linestyle=style, marker="o", markersize=3, label=f"{field} {region}")
		ax.axhline(0.0, color="black", linewidth=0.8)
		ax.set_xlabel("p")
		ax.set_ylabel("residual")
		ax.legend(loc="best", fontsize=7)
		ax.set_title("Solution-count residuals")
		return self._save(fig, "residuals.png")

	def generate_all(self, result_dir: Path) -> Dict[str, Path]:
		plots = result_dir / "plots"
		renderers = {
			"theorem_ratios.csv": self.plot_theorem_ratios,
			"fk_ratios.csv": self.plot_fk_ratios,
			"cover_layers.csv": self.plot_cover_layers,
			"residuals.csv": self.plot_residuals,
		}
		outputs: Dict[str, Path] = {}
		for name, render in renderers.items():
			source = plots / name
			if not source.exists():
				continue
			if not read_csv(source):
				logger.warning(f"{source} has no rows; skipped")
				continue
			outputs[name.removesuffix(".csv")] = render(source)
		return outputs
