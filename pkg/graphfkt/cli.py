"""
Command-line entry point

Subcommands: build-graph, filter, fit, evaluate, compare, report, synth.
Exit codes: 0 on success, 1 on usage errors, 2 on data or numerical errors.
"""

import argparse
import logging
import re
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from . import __version__
from .atlas_graph import (
    GftBasis,
    GraphKind,
    RoiAtlas,
    basis_for_descriptor,
    build_graph,
    gft_basis,
    load_atlas,
    parse_graph_descriptor,
)
from .config import DEFAULT_ATLAS_PATH, FLAG_MULTIPLIER, read_config_file
from .data_manager import DataManager
from .errors import DataError, GraphFKTError, UsageError
from .fkt import FktModel
from .harness import (
    ExperimentConfig,
    Method,
    EvalReport,
    compare_methods,
    experiment_basis,
    fit_pipeline,
    prepare_dataset,
    run_experiment,
)
from .logging_setup import setup_logging
from .mode_report import export_mode_report, export_node_file
from .phenotypes import FilterCriteria, cohort_summary, filter_subjects, load_phenotypes
from .spectra import SubjectRecord
from .synthetic import PLANTED_STRENGTHS, generate_synthetic, preset_spec, synthetic_atlas
from .utils import format_duration

logger = logging.getLogger(__name__)

console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class ArgumentParser(argparse.ArgumentParser):
    """argparse parser that reports usage problems as UsageError"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_experiment_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, help="key = value experiment config file")
    parser.add_argument("--method", help="ours, gft or sfm")
    parser.add_argument("--graph", help="knn, WFC, UC or randWFC")
    parser.add_argument("--k", help="neighbours per node for knn graphs")
    parser.add_argument("--graph-seed", help="weight seed for randWFC graphs")
    parser.add_argument("--banding", help="perMode or threeBands (gft method)")
    parser.add_argument("--m", help="dominant dimensions per class, or 'all'")
    parser.add_argument("--seed", help="master seed")
    parser.add_argument("--tuning-grid", help="comma-separated min_leaf candidates")
    parser.add_argument("--inner-folds", help="inner CV folds")
    parser.add_argument("--workers", help="parallel worker threads")


def _add_dataset_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--dataset", type=Path, help="dataset directory (atlas.txt, cohort.csv, timeseries/)")
    parser.add_argument("--atlas", type=Path, help="atlas file")
    parser.add_argument("--cohort", type=Path, help="cohort CSV (subject_id, diagnosis)")
    parser.add_argument("--timeseries-dir", type=Path, help="directory of <subject_id>.txt files")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="graphfkt", description="Graph-spectral two-population classifier")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--data-dir", type=Path, default=None,
                        help="root for outputs written without --out (default: GRAPHFKT_DATA_DIR)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("build-graph", help="build an atlas graph and dump its GFT basis")
    p.add_argument("--atlas", type=Path, default=None)
    p.add_argument("--graph", default="knn")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--graph-seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=None, help="graph/basis JSON output (default: <data-dir>/graphs/)")
    p.add_argument("--node-modes", default="", help="comma-separated 1-based modes to export as node files")

    p = sub.add_parser("filter", help="select a cohort from a phenotype table")
    p.add_argument("--phenotypes", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="cohort CSV output (default: <data-dir>/cohorts/)")
    p.add_argument("--adult", action="store_true", help="age above 18 instead of below")
    p.add_argument("--max-age", type=float, default=None)
    p.add_argument("--min-age", type=float, default=None)
    p.add_argument("--max-fd", type=float, default=None)
    p.add_argument("--eyes", choices=("open", "closed", "any"), default="open")

    p = sub.add_parser("fit", help="fit the model and tree on a whole cohort")
    _add_experiment_flags(p)
    _add_dataset_flags(p)
    p.add_argument("--out", type=Path, default=None,
                   help="model JSON output, the tree goes next to it (default: <data-dir>/models/)")
    p.add_argument("--dump-tree", action="store_true", help="print the fitted tree")

    p = sub.add_parser("evaluate", help="evaluate one method over repeated splits or LOOCV")
    _add_experiment_flags(p)
    _add_dataset_flags(p)
    p.add_argument("--test-fraction", help="held-out fraction, or 'loocv'")
    p.add_argument("--trials", help="number of random splits")
    p.add_argument("--out", type=Path, default=None, help="report JSON output (default: <data-dir>/reports/)")
    p.add_argument("--tsv", type=Path, default=None, help="tab-separated summary output")

    p = sub.add_parser("compare", help="compare methods on shared splits")
    _add_experiment_flags(p)
    _add_dataset_flags(p)
    p.add_argument("--test-fraction", help="held-out fraction, or 'loocv'")
    p.add_argument("--trials", help="number of random splits")
    p.add_argument("--methods", default="ours,sfm",
                   help="comma list of ours, sfm, gft, ours:WFC, ours:UC, ours:randWFC")
    p.add_argument("--m-list", default="2,3,4,5", help="comma list of m values")
    p.add_argument("--out", type=Path, default=None, help="TSV table output (default: <data-dir>/reports/compare.tsv)")
    p.add_argument("--json", type=Path, default=None, help="JSON reports output")

    p = sub.add_parser("report", help="discriminative mode report and node files")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--atlas", type=Path, default=None)
    p.add_argument("--graph", default=None, help="only for models without a stored graph (default knn)")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--graph-seed", type=int, default=None)
    p.add_argument("--multiplier", type=float, default=FLAG_MULTIPLIER)
    p.add_argument("--top", type=int, default=0, help="also print the N largest weights per row")
    p.add_argument("--out-dir", type=Path, default=None, help="default: <data-dir>/reports/<model>_modes/")

    p = sub.add_parser("synth", help="write a synthetic planted dataset")
    p.add_argument("--out", type=Path, default=None, help="dataset directory (default: <data-dir>/synthetic/)")
    p.add_argument("--planted", choices=tuple(PLANTED_STRENGTHS), default="strong")
    p.add_argument("--r", type=int, default=20)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--atlas", type=Path, default=None, help="use this atlas instead of random centroids")
    p.add_argument("--graph", default="knn")
    p.add_argument("--k", type=int, default=2)

    return parser


def _experiment_config(args) -> Tuple[ExperimentConfig, Dict[str, str]]:
    overrides = {
        "method": args.method,
        "graph": args.graph,
        "k": args.k,
        "graph_seed": args.graph_seed,
        "banding": args.banding,
        "m": args.m,
        "seed": args.seed,
        "tuning_grid": args.tuning_grid,
        "inner_folds": args.inner_folds,
        "workers": args.workers,
        "test_fraction": getattr(args, "test_fraction", None),
        "trials": getattr(args, "trials", None),
        "dataset": str(args.dataset) if args.dataset else None,
        "atlas": str(args.atlas) if args.atlas else None,
        "cohort": str(args.cohort) if args.cohort else None,
        "timeseries_dir": str(args.timeseries_dir) if args.timeseries_dir else None,
    }
    if args.config is not None:
        values = read_config_file(args.config, overrides)
    else:
        values = {k: v for k, v in overrides.items() if v is not None}
    return ExperimentConfig.from_mapping(values), values


def _load_inputs(values: Dict[str, str], workers: int,
                 manager: DataManager) -> Tuple[RoiAtlas, List[SubjectRecord]]:
    if values.get("dataset"):
        return manager.load_synthetic_dataset(Path(values["dataset"]), workers)
    if not values.get("cohort") or not values.get("timeseries_dir"):
        raise UsageError("give --dataset, or --cohort with --timeseries-dir")
    atlas = load_atlas(Path(values.get("atlas") or DEFAULT_ATLAS_PATH))
    cohort = manager.load_cohort(Path(values["cohort"]))
    return atlas, manager.load_dataset(cohort, Path(values["timeseries_dir"]), atlas.r, workers)


def _slug(text: str) -> str:
    """File-name form of a descriptor: ``ours(knn,K=2)`` -> ``ours_knn_k_2``"""
    return re.sub(r"[^0-9a-z]+", "_", text.lower()).strip("_")


def _print_reports(reports: Sequence[EvalReport], title: str):
    table = Table(title=title)
    table.add_column("Method", style="cyan")
    table.add_column("m", justify="right")
    table.add_column("Trials", justify="right")
    table.add_column("Accuracy (%)", justify="right", style="green")
    table.add_column("p-values")
    for report in reports:
        p_values = ", ".join(f"{k}: {v:.3g}" for k, v in report.comparisons.items())
        table.add_row(report.method, "" if report.m is None else str(report.m),
                      str(len(report.per_trial_accuracy)),
                      f"{100 * report.mean:.1f} ± {100 * report.std:.1f}", p_values)
    console.print(table)


def cmd_build_graph(args, manager: DataManager) -> int:
    atlas = load_atlas(args.atlas or DEFAULT_ATLAS_PATH)
    kind = GraphKind.parse(args.graph)
    graph = build_graph(atlas, kind, K=args.k if kind is GraphKind.KNN else None, seed=args.graph_seed)
    basis = gft_basis(graph)
    out = args.out or manager.graphs_dir / f"{_slug(graph.describe())}.json"
    manager.save_graph(graph, basis, atlas, out)

    components = graph.connected_components()
    console.print(Panel.fit(
        f"[bold cyan]{graph.describe()}[/bold cyan] over {atlas.r} ROIs\n"
        f"Edges: {graph.edge_count()}   Connected components: {len(components)}\n"
        f"Largest graph frequency: {basis.eigenvalues[-1]:.4f}",
        border_style="cyan",
    ))
    if len(components) > 1:
        console.print(f"[yellow]⚠ Graph has {len(components)} components; "
                      f"the Laplacian has {len(components)} zero eigenvalues[/yellow]")

    for text in filter(None, (s.strip() for s in args.node_modes.split(","))):
        mode = int(text)
        path = export_node_file(atlas, basis, mode, out.parent / f"mode_{mode:03d}.node")
        console.print(f"  ✓ Node file for mode {mode}: {path}")

    console.print(f"[green]✓[/green] Saved graph and basis to {out}")
    return EXIT_OK


def cmd_filter(args, manager: DataManager) -> int:
    criteria = FilterCriteria.adult() if args.adult else FilterCriteria.adolescent()
    eyes = {"open": True, "closed": False, "any": None}[args.eyes]
    criteria = replace(criteria, eyes_open=eyes)
    if args.max_age is not None:
        criteria = replace(criteria, max_age=args.max_age)
    if args.min_age is not None:
        criteria = replace(criteria, min_age=args.min_age)
    if args.max_fd is not None:
        criteria = replace(criteria, max_fd=args.max_fd)

    records = load_phenotypes(args.phenotypes)
    ids = filter_subjects(records, criteria)
    out = args.out or manager.cohorts_dir / ("adult.csv" if args.adult else "adolescent.csv")
    manager.save_cohort(records, ids, out)

    counts = cohort_summary(records, ids)
    console.print(f"[green]✓[/green] {len(ids)} subjects selected "
                  f"({counts['ASD']} ASD, {counts['NT']} NT) → {out}")
    return EXIT_OK


def cmd_fit(args, manager: DataManager) -> int:
    config, values = _experiment_config(args)
    atlas, subjects = _load_inputs(values, config.workers, manager)
    prepared = prepare_dataset(config, subjects, atlas=atlas)
    config.validate(prepared.basis.r)

    pipeline = fit_pipeline(prepared, list(range(len(subjects))), config, config.seed)
    out = args.out or manager.models_dir / f"{_slug(config.descriptor())}_m{config.m}.json"
    tree_path = out.with_name(out.stem + ".tree.json")
    if pipeline.model is not None:
        model = pipeline.model.with_provenance(atlas.checksum(), prepared.basis.kind)
        manager.save_model(model, out)
        console.print(f"[green]✓[/green] Model ({config.descriptor()}, m={len(model.dom_asd)}) → {out}")
    else:
        console.print(f"[dim]{config.descriptor()} has no projection model; only the tree is saved[/dim]")
    manager.save_tree(pipeline.tree, tree_path)
    console.print(f"[green]✓[/green] Tree (min_leaf={pipeline.tree.min_leaf}, "
                  f"{pipeline.tree.n_leaves} leaves) → {tree_path}")

    if args.dump_tree:
        console.print(Panel(pipeline.tree.render(), title="Decision tree", border_style="cyan"))
    return EXIT_OK


def cmd_evaluate(args, manager: DataManager) -> int:
    config, values = _experiment_config(args)
    atlas, subjects = _load_inputs(values, config.workers, manager)

    started = time.monotonic()
    report = run_experiment(config, subjects, atlas)
    out = args.out or manager.reports_dir / f"{_slug(config.descriptor())}.json"
    manager.save_reports([report], out, args.tsv)

    _print_reports([report], title=f"{len(subjects)} subjects")
    console.print(f"[dim]Elapsed {format_duration(time.monotonic() - started)}[/dim]")
    return EXIT_OK


def _method_config(base: ExperimentConfig, item: str, m: int) -> ExperimentConfig:
    """One compare entry, e.g. ``ours``, ``sfm``, ``gft`` or ``ours:WFC``"""
    name, _, graph = item.partition(":")
    changes = {"method": Method.parse(name), "m": m}
    if graph:
        changes["graph"] = GraphKind.parse(graph)
    return replace(base, **changes)


def cmd_compare(args, manager: DataManager) -> int:
    base, values = _experiment_config(args)
    atlas, subjects = _load_inputs(values, base.workers, manager)

    try:
        m_values = [int(v) for v in args.m_list.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--m-list must be comma-separated integers, got {args.m_list!r}") from None

    started = time.monotonic()
    reports: List[EvalReport] = []
    for m in m_values:
        group = [_method_config(base, item, m) for item in args.methods.split(",") if item.strip()]
        reports.extend(compare_methods(group, subjects, atlas))

    out = args.out or manager.reports_dir / "compare.tsv"
    manager.save_reports(reports, args.json or out.with_suffix(".json"), out)
    _print_reports(reports, title="Method comparison (shared splits)")
    console.print(f"[dim]Elapsed {format_duration(time.monotonic() - started)}[/dim]")
    return EXIT_OK


def _report_basis(args, model: FktModel, atlas: RoiAtlas) -> GftBasis:
    """Basis the model was fitted on; --graph/--k/--graph-seed only fill in for models without one"""
    if not model.graph_kind:
        kind = GraphKind.parse(args.graph or GraphKind.KNN.value)
        config = ExperimentConfig(graph=kind, k=args.k if args.k is not None else 2, graph_seed=args.graph_seed)
        logger.warning("Model %s records no graph, node files use %s", args.model, config.descriptor())
        return experiment_basis(config, atlas)

    kind, k, seed = parse_graph_descriptor(model.graph_kind)
    contradictions = [
        args.graph is not None and GraphKind.parse(args.graph) is not kind,
        args.k is not None and args.k != k,
        args.graph_seed is not None and args.graph_seed != seed,
    ]
    if any(contradictions):
        raise UsageError(f"--graph/--k/--graph-seed contradict the model, which was fitted on {model.graph_kind}")
    return basis_for_descriptor(atlas, model.graph_kind)


def cmd_report(args, manager: DataManager) -> int:
    model = manager.load_model(args.model)
    atlas = load_atlas(args.atlas or DEFAULT_ATLAS_PATH)
    if model.atlas_checksum and model.atlas_checksum != atlas.checksum():
        logger.warning("Atlas %s differs from the one the model was fitted on", args.atlas or DEFAULT_ATLAS_PATH)
    basis = _report_basis(args, model, atlas)
    in_roi_space = basis.kind == GraphKind.IDENTITY.value

    out_dir = args.out_dir or manager.reports_dir / f"{args.model.stem}_modes"
    report = export_mode_report(model, multiplier=args.multiplier)
    out_dir.mkdir(parents=True, exist_ok=True)
    manager.save_mode_report(report, out_dir / "mode_report.json", out_dir / "mode_report.tsv")

    table = Table(title="Significant ROIs" if in_roi_space else "Significant GFT modes")
    table.add_column("Row", style="cyan")
    table.add_column("Flagged ROIs" if in_roi_space else "Flagged modes")
    if args.top:
        table.add_column(f"Top {args.top}")

    flagged = set()
    for row in report.rows:
        cells = [row.name, ", ".join(str(k) for k in row.flagged_modes) or "-"]
        if args.top:
            cells.append(", ".join(f"{k} ({w:.3f})" for k, w in row.top_modes(args.top)))
        table.add_row(*cells)
        flagged.update(row.flagged_modes)
    console.print(table)

    # On the identity basis mode k is the one-hot vector of ROI k
    for mode in sorted(flagged):
        export_node_file(atlas, basis, mode, out_dir / f"mode_{mode:03d}.node")
    console.print(f"[green]✓[/green] Mode report and {len(flagged)} node file(s) → {out_dir}")
    return EXIT_OK


def cmd_synth(args, manager: DataManager) -> int:
    if args.atlas is not None:
        atlas = load_atlas(args.atlas)
        if atlas.r != args.r:
            raise UsageError(f"--r {args.r} does not match the {atlas.r} ROIs of {args.atlas}")
    else:
        atlas = synthetic_atlas(args.r, seed=args.seed)

    kind = GraphKind.parse(args.graph)
    graph = build_graph(atlas, kind, K=args.k if kind is GraphKind.KNN else None, seed=args.seed)
    spec = preset_spec(args.planted, r=args.r, n_subjects=args.n, T=args.T, alpha_asd=args.alpha,
                       noise=args.noise, seed=args.seed)
    subjects = generate_synthetic(spec, gft_basis(graph))
    out = args.out or manager.synth_dir / f"{args.planted}_r{args.r}_n{args.n}_seed{args.seed}"
    manager.save_synthetic_dataset(subjects, atlas, out)

    console.print(f"[green]✓[/green] {len(subjects)} subjects ({spec.n_asd} ASD, planted={args.planted}) → {out}")
    return EXIT_OK


COMMANDS = {
    "build-graph": cmd_build_graph,
    "filter": cmd_filter,
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "report": cmd_report,
    "synth": cmd_synth,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        Exit code
    """
    try:
        args = build_parser().parse_args(argv)
        setup_logging(args.log_level)
        return COMMANDS[args.command](args, DataManager(args.data_dir))
    except SystemExit as e:
        return int(e.code or 0)
    except UsageError as e:
        err_console.print(f"[red]✗ Usage error:[/red] {e}")
        return EXIT_USAGE
    except DataError as e:
        err_console.print(f"[red]✗ Data error:[/red] {e}")
        return EXIT_DATA
    except GraphFKTError as e:
        err_console.print(f"[red]✗ {e}[/red]")
        return EXIT_DATA
    except np.linalg.LinAlgError as e:
        err_console.print(f"[red]✗ Numerical error:[/red] {e}")
        return EXIT_DATA
