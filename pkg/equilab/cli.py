from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import orjson
from loguru import logger

from .baseline import Tolerance, check_baselines
from .cache import cache_dir
from .config import load_config
from .discrepancy import DiscrepancyGuards, FractionalPointSet, discrepancy_of_system
from .dyadic import DEPTH_POLICIES, boundary_denominators, build_cover, choose_depth, cover_diagnostics, draw_anchor
from .engine import ExperimentRunner
from .errors import ConfigError, EquilabError
from .expsum import L_SCAN, ValueTable, exp_sum_cube, max_exp_sum, scan_exp_sums
from .field_poly import PolySystem
from .recorder import DataRecorder, RecorderConfig, read_json
from .region import Region, region_from_spec
from .variety import SolutionCache, count_in_region, solve_system, variety_report

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_BASELINE = 2


def _configure_logging(level: str, log_file: Optional[str]) -> None:
	logger.remove()
	logger.add(sys.stderr, level=level.upper())
	if log_file:
		logger.add(log_file, rotation="10 MB", level=level.upper())


def _json_arg(text: str) -> Any:
	"""Inline JSON, or @path to a JSON file."""
	try:
		raw = Path(text[1:]).read_bytes() if text.startswith("@") else text.encode("utf-8")
		return orjson.loads(raw)
	except (OSError, orjson.JSONDecodeError) as exc:
		raise ConfigError(f"cannot read JSON argument {text!r}: {exc}") from exc


def _region(args: argparse.Namespace, m: Optional[int]) -> Region:
	spec = _json_arg(args.region) if args.region else {"kind": "full-torus"}
	return region_from_spec(spec, m=m)


def _system(args: argparse.Namespace, kind: str = "value") -> PolySystem:
	return PolySystem.parse(args.system, kind=kind, m=args.m)


def _emit(payload: Any, out: Optional[str]) -> None:
	data = orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY)
	if out:
		Path(out).parent.mkdir(parents=True, exist_ok=True)
		Path(out).write_bytes(data + b"\n")
		print(f"Written to {out}")
	else:
		print(data.decode("utf-8"))


def cmd_run(args: argparse.Namespace) -> int:
	root = Path(args.root).resolve()
	config = load_config(Path(args.config))
	if args.workers:
		config = replace(config, workers=args.workers)
	outcome = ExperimentRunner(config, root).run(baseline_file=Path(args.baseline) if args.baseline else None, check=not args.no_check)
	print(f"{len(outcome.result['cells'])} cells written to {outcome.output}")
	if outcome.baseline is None:
		return EXIT_OK
	if not outcome.baseline.passed:
		for line in outcome.baseline.failures:
			print(f"  FAIL {line}")
		return EXIT_BASELINE
	for line in outcome.baseline.seed_sensitive:
		print(f"  seed-sensitive {line}")
	return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
	baseline = Path(args.baseline)
	if not baseline.exists():
		raise ConfigError(f"baseline file not found: {baseline}")
	result = read_json(Path(args.result))
	report = check_baselines(result, baseline, Tolerance(sums=args.tol_sums, discrepancies=args.tol_disc))
	counts: Dict[str, int] = {}
	for status in report.statuses.values():
		counts[status] = counts.get(status, 0) + 1
	print(", ".join(f"{k}: {v}" for k, v in sorted(counts.items())) or "no cells")
	for line in report.failures:
		print(f"  FAIL {line}")
	return EXIT_OK if report.passed else EXIT_BASELINE


def cmd_solve(args: argparse.Namespace) -> int:
	system = _system(args, kind="zero")
	sol = solve_system(system, args.p, nu=args.nu, justification=args.justification, cache=SolutionCache(cache_dir()))
	payload: Dict[str, Any] = variety_report(sol)
	if args.region:
		region = _region(args, system.m)
		payload["region"] = region.label
		payload["T_region"] = count_in_region(sol, region)
	if args.list:
		payload["solutions"] = sol.solutions.tolist()
	_emit(payload, args.out)
	return EXIT_OK


def cmd_points(args: argparse.Namespace) -> int:
	system = _system(args)
	region = _region(args, system.m)
	pts = FractionalPointSet.from_system(system, args.p, region)
	if args.out:
		recorder = DataRecorder(RecorderConfig(root=Path(args.out).parent))
		recorder.write_csv(Path(args.out).name, [{f"y{j + 1}": f"{int(v)}/{pts.q}" for j, v in enumerate(row)} for row in pts.residues])
	else:
		for row in pts.residues:
			print(" ".join(f"{int(v)}/{pts.q}" for v in row))
	logger.info(f"{pts.N} points for p={args.p} in {region.label}")
	return EXIT_OK


def cmd_cover(args: argparse.Namespace) -> int:
	region = _region(args, args.m)
	M = choose_depth(args.depth_policy, args.p, args.n, args.M)
	anchor = draw_anchor(region.m, args.seed, boundary_denominators(args.p, M))
	cover = build_cover(region, M, anchor)
	diag = cover_diagnostics(cover)
	if args.export:
		recorder = DataRecorder(RecorderConfig(root=Path(args.export).parent))
		recorder.write_jsonl(Path(args.export).name, cover.records())
	_emit({"region": region.label, "anchor": [str(v) for v in anchor.numerators], **diag.as_dict(), "rows": diag.rows()}, args.out)
	return EXIT_OK


def cmd_expsum(args: argparse.Namespace) -> int:
	system = _system(args)
	u = args.u if args.u is not None else [0] * system.m
	w = args.w if args.w is not None else args.p - 1
	if args.a:
		res = exp_sum_cube(system, args.a, args.p, u, w, method=args.method)
		_emit(res.as_row(), args.out)
		return EXIT_OK
	table = ValueTable.for_cube(system, args.p, u, w)
	best = max_exp_sum(system, args.p, args.L, table)
	if args.csv:
		recorder = DataRecorder(RecorderConfig(root=Path(args.csv).parent))
		recorder.write_csv(Path(args.csv).name, [res.as_row() for res in scan_exp_sums(table, args.L)])
	_emit({"p": args.p, "L": best.L, "S_star": best.S_star, "argmax": best.argmax, "scanned": best.scanned, "method": best.method, "N": best.point_count}, args.out)
	return EXIT_OK


def cmd_disc(args: argparse.Namespace) -> int:
	system = _system(args)
	region = _region(args, system.m)
	report = discrepancy_of_system(
		system,
		args.p,
		region,
		L=args.L,
		exact=not args.sampled_only,
		sampled_trials=args.sampled_trials,
		seed=args.seed,
		guards=DiscrepancyGuards(),
	)
	_emit(report.as_dict(), args.out)
	return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
	from .visualize import LabVisualizer

	result_dir = Path(args.result_dir)
	viz = LabVisualizer(output_dir=Path(args.out) if args.out else result_dir / "figures")
	outputs = viz.generate_all(result_dir)
	print("Figures generated:")
	for name, path in outputs.items():
		print(f"  - {name}: {path}")
	return EXIT_OK


def _system_flags(p: argparse.ArgumentParser) -> None:
	p.add_argument("--system", nargs="+", required=True, help="Polynomials, e.g. 'x1*x2' 'x1^2+3*x2'")
	p.add_argument("--p", type=int, required=True, help="Prime modulus")
	p.add_argument("--m", type=int, default=None, help="Number of variables (default: highest xN used)")
	p.add_argument("--out", default=None, help="Write JSON here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
	parser = argparse.ArgumentParser(prog="equilab", description="Equidistribution laboratory for polynomial congruences")
	parser.add_argument("--log-level", default="INFO", help="loguru level for stderr (default: INFO)")
	parser.add_argument("--log-file", default=None, help="Also log to this file (rotated at 10 MB)")
	sub = parser.add_subparsers(dest="command", required=True)

	run = sub.add_parser("run", help="Run an experiment config")
	run.add_argument("config")
	run.add_argument("--root", default=".", help="Project root path")
	run.add_argument("--baseline", default=None, help="Baseline file (default: <output>/baseline.json)")
	run.add_argument("--no-check", action="store_true", help="Skip the baseline comparison")
	run.add_argument("--workers", type=int, default=None, help="Override the config worker count")

	check = sub.add_parser("check", help="Compare a result file with a baseline")
	check.add_argument("result")
	check.add_argument("baseline")
	check.add_argument("--tol-sums", type=float, default=1e-9)
	check.add_argument("--tol-disc", type=float, default=1e-6)

	solve = sub.add_parser("solve", help="Solve a zero-system over F_p")
	_system_flags(solve)
	solve.add_argument("--nu", type=int, default=None, help="Number of top-dimensional components")
	solve.add_argument("--justification", default=None)
	solve.add_argument("--region", default=None, help="Region JSON or @file; adds T_p(region)")
	solve.add_argument("--list", action="store_true", help="Include the solution vectors")

	points = sub.add_parser("points", help="Fractional point set of a value-system over a region")
	_system_flags(points)
	points.add_argument("--region", default=None, help="Region JSON or @file (default: full torus)")

	cover = sub.add_parser("cover", help="Dyadic cover diagnostics for a region")
	cover.add_argument("--region", required=True, help="Region JSON or @file")
	cover.add_argument("--p", type=int, required=True)
	cover.add_argument("--m", type=int, default=None)
	cover.add_argument("--n", type=int, default=1, help="System size used by the depth policy")
	cover.add_argument("--depth-policy", choices=DEPTH_POLICIES, default="thm2")
	cover.add_argument("--M", type=int, default=None, help="Depth for the explicit policy")
	cover.add_argument("--seed", type=int, required=True)
	cover.add_argument("--export", default=None, help="Write the cover cubes as JSONL")
	cover.add_argument("--out", default=None)

	expsum = sub.add_parser("expsum", help="Exponential sums over a cube")
	_system_flags(expsum)
	expsum.add_argument("--a", type=int, nargs="+", default=None, help="Coefficient vector; omit to scan |a| <= L")
	expsum.add_argument("--u", type=int, nargs="+", default=None, help="Cube corner (default: origin)")
	expsum.add_argument("--w", type=int, default=None, help="Cube width (default: p-1)")
	expsum.add_argument("--L", type=int, default=L_SCAN)
	expsum.add_argument("--method", choices=("histogram", "naive"), default="histogram")
	expsum.add_argument("--csv", default=None, help="Write every scanned sum as a CSV row (scan mode)")

	disc = sub.add_parser("disc", help="Discrepancy report for a value-system over a region")
	_system_flags(disc)
	disc.add_argument("--region", default=None, help="Region JSON or @file (default: full torus)")
	disc.add_argument("--L", type=int, default=None)
	disc.add_argument("--sampled-trials", type=int, default=0)
	disc.add_argument("--sampled-only", action="store_true")
	disc.add_argument("--seed", type=int, default=0)

	plot = sub.add_parser("plot", help="Render the plot-data CSVs of a result directory")
	plot.add_argument("result_dir")
	plot.add_argument("--out", default=None, help="Figure directory (default: <result_dir>/figures)")
	return parser


COMMANDS = {
	"run": cmd_run,
	"check": cmd_check,
	"solve": cmd_solve,
	"points": cmd_points,
	"cover": cmd_cover,
	"expsum": cmd_expsum,
	"disc": cmd_disc,
	"plot": cmd_plot,
}


def main(argv: Optional[List[str]] = None) -> int:
	args = build_parser().parse_args(argv)
	_configure_logging(args.log_level, args.log_file)
	try:
		return COMMANDS[args.command](args)
	except EquilabError as exc:
		logger.error(str(exc))
		return EXIT_INVALID


if __name__ == "__main__":
	raise SystemExit(main())
