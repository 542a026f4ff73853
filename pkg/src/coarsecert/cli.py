"""Command line entry points: gen, analyze, embed, report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .generators import generate
from .graphs import GraphError, save_graph
from .pipeline import (
    ConfigError,
    PipelineConfig,
    emit,
    load_report,
    parse_config_text,
    parse_sequence_spec,
    report_bytes,
    run,
)

EXIT_OK = 0
EXIT_BAD_CONFIG = 1
EXIT_ANALYSIS_FAILED = 2


def _cmd_gen(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        seq, _ = parse_sequence_spec(args.sequence, seed=args.seed)
    except (ConfigError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    names = []
    for i, g in enumerate(seq, start=1):
        name = f"level{i:03d}.txt"
        save_graph(g, out / name)
        names.append(name)
    (out / "sequence.txt").write_text("\n".join(names) + "\n")
    print(f"wrote {len(names)} graphs and sequence.txt to {out}")
    return EXIT_OK


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    if args.config:
        cfg_path = Path(args.config)
        config = parse_config_text(cfg_path.read_text(), base_dir=cfg_path.parent)
        if args.out:
            config.output = args.out
        return config
    if not args.sequence:
        raise ConfigError("either --config or --sequence is required")
    analyses = []
    for spec in args.analysis or []:
        tokens = spec.split()
        params = {}
        for tok in tokens[1:]:
            if "=" not in tok:
                raise ConfigError(f"bad analysis parameter {tok!r}")
            key, value = tok.split("=", 1)
            params[key] = value
        analyses.append((tokens[0], params))
    lines = [f"sequence = {args.sequence}"]
    lines.extend(f"analysis = {spec}" for spec in (args.analysis or []))
    if args.seed is not None:
        lines.append(f"seed = {args.seed}")
    config = PipelineConfig(
        sequence=args.sequence,
        analyses=analyses,
        seed=args.seed,
        output=args.out,
        formats=tuple(args.format.split(",")) if args.format else ("json",),
        raw_lines=lines,
    )
    for name, _ in config.analyses:
        if name not in dict.fromkeys(
            ("propa", "hyperfinite", "kernel", "embed", "sofic", "bs-profile")
        ):
            raise ConfigError(f"unknown analysis {name!r}")
    return config


def _cmd_analyze(args: argparse.Namespace) -> int:
    try:
        config = _config_from_args(args)
        report, code = run(config)
    except (ConfigError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    if config.output:
        written = emit(report, config.output, formats=config.formats)
        for target in written:
            print(f"wrote {target}")
    else:
        sys.stdout.write(report_bytes(report).decode())
    for analysis in report["analyses"]:
        if analysis["error"]:
            print(
                f"analysis {analysis['name']} failed: {analysis['error']}",
                file=sys.stderr,
            )
    return code


def _cmd_embed(args: argparse.Namespace) -> int:
    if args.mode == "weak":
        analysis = f"embed mode=weak R={args.R} eps={args.eps}"
        if args.induced_metric:
            analysis += " induced_metric=1"
    else:
        analysis = "embed"
        if args.R_cap is not None:
            analysis += f" R_cap={args.R_cap}"
    ns = argparse.Namespace(
        config=None,
        sequence=args.sequence,
        analysis=[analysis],
        seed=args.seed,
        out=args.out,
        format=args.format,
    )
    return _cmd_analyze(ns)


def _cmd_report(args: argparse.Namespace) -> int:
    try:
        report = load_report(args.report)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    if args.csv_dir:
        written = emit(report, args.csv_dir, formats=("csv",))
        for target in written:
            print(f"wrote {target}")
    print(f"toolkit version: {report.get('toolkit_version')}")
    print(f"sequence sizes: {report.get('sequence_sizes')}")
    failed = 0
    for analysis in report.get("analyses", []):
        status = "failed" if analysis.get("error") else "ok"
        if analysis.get("error"):
            failed += 1
        line = f"  {analysis['name']}: {status}"
        result = analysis.get("result") or {}
        if isinstance(result, dict) and "passed" in result:
            line += f" (passed={result['passed']})"
        print(line)
    return EXIT_ANALYSIS_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coarse-cert",
        description="Certify coarse-geometric properties of graph sequences",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a graph sequence to files")
    p_gen.add_argument("sequence", help='sequence spec, e.g. "cycle 100..300 step 100"')
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.set_defaults(func=_cmd_gen)

    p_an = sub.add_parser("analyze", help="run a configured pipeline")
    p_an.add_argument("--config", help="config file path")
    p_an.add_argument("--sequence", help="inline sequence spec")
    p_an.add_argument(
        "--analysis",
        action="append",
        help='inline analysis spec, e.g. "hyperfinite eps=0.1 K=30" (repeatable)',
    )
    p_an.add_argument("--seed", type=int, default=None)
    p_an.add_argument("--out", help="output directory (stdout when omitted)")
    p_an.add_argument("--format", help="comma list: json,csv", default=None)
    p_an.set_defaults(func=_cmd_analyze)

    p_em = sub.add_parser("embed", help="embeddability certificate shortcut")
    p_em.add_argument("--sequence", required=True)
    p_em.add_argument("--mode", choices=("topo", "weak"), default="topo")
    p_em.add_argument("--R-cap", dest="R_cap", type=int, default=None)
    p_em.add_argument("--R", type=int, default=2, help="weak-mode ball radius")
    p_em.add_argument("--eps", default="0.5", help="weak-mode shell budget")
    p_em.add_argument(
        "--induced-metric",
        action="store_true",
        help="also tabulate control functions under the induced subgraph metric",
    )
    p_em.add_argument("--seed", type=int, default=None)
    p_em.add_argument("--out", help="output directory")
    p_em.add_argument("--format", default=None)
    p_em.set_defaults(func=_cmd_embed)

    p_rep = sub.add_parser("report", help="summarize or re-emit a report")
    p_rep.add_argument("report", help="path to report.json")
    p_rep.add_argument("--csv-dir", help="re-emit CSV views into this directory")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
