"""Pipeline configuration, analysis runners, and report assembly.

A config is a small key-value text file (see README): one ``sequence`` line
naming the input graphs, any number of ``analysis`` lines, optional ``seed``
and ``output``.  Reports are plain dicts serialized with sorted keys so a
rerun of the same config reproduces the same bytes; exact statistics ride
along as reduced fraction strings.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .generators import (
    PermAction,
    RootedBall,
    ball_profile,
    cycle,
    girth,
    injectivity_report,
    load_perm_action,
    load_words,
    path,
    random_regular,
    schreier_graph,
    torus,
)
from .graphs import FiniteGraph, GraphError, GraphSeq, load_graph, load_sequence
from .hyperfinite import (
    carve_greedy,
    partition_to_removal,
    refine_local_search,
    verify_partition,
    verify_removal,
)
from .kernels import (
    ControlTable,
    Kernel,
    SPECTRAL_TOL,
    correct_kernel,
    embed_certificate,
    exact_fraction,
    is_locally_cnd,
    local_spectra,
    metric_kernel,
    save_embed_cert,
    weak_embed_certificate,
)
from .propa import heat_kernel_witness, uniform_ball_witness, verify_witness

__all__ = [
    "ConfigError",
    "PipelineConfig",
    "parse_config_text",
    "parse_sequence_spec",
    "run",
    "emit",
    "load_report",
]

ANALYSES = ("propa", "hyperfinite", "kernel", "embed", "sofic", "bs-profile")


class ConfigError(ValueError):
    """Invalid pipeline configuration."""


@dataclass
class PipelineConfig:
    sequence: str
    analyses: list[tuple[str, dict[str, str]]]
    seed: int | None = None
    output: str | None = None
    formats: tuple[str, ...] = ("json",)
    raw_lines: list[str] = field(default_factory=list)
    base_dir: Path = Path(".")


def parse_config_text(text: str, base_dir: str | Path = ".") -> PipelineConfig:
    """Parse the key-value config format; unknown keys are errors."""
    sequence = None
    analyses: list[tuple[str, dict[str, str]]] = []
    seed = None
    output = None
    formats: tuple[str, ...] = ("json",)
    raw_lines = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        raw_lines.append(line)
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key == "sequence":
            sequence = value
        elif key == "analysis":
            tokens = value.split()
            if not tokens:
                raise ConfigError(f"line {lineno}: empty analysis")
            name = tokens[0]
            if name not in ANALYSES:
                raise ConfigError(
                    f"line {lineno}: unknown analysis {name!r} "
                    f"(expected one of {', '.join(ANALYSES)})"
                )
            params: dict[str, str] = {}
            for tok in tokens[1:]:
                if "=" not in tok:
                    raise ConfigError(f"line {lineno}: bad parameter {tok!r}")
                pkey, pval = tok.split("=", 1)
                params[pkey] = pval
            analyses.append((name, params))
        elif key == "seed":
            seed = int(value)
        elif key == "output":
            output = value
        elif key == "format":
            formats = tuple(f.strip() for f in value.split(",") if f.strip())
            for f in formats:
                if f not in ("json", "csv"):
                    raise ConfigError(f"line {lineno}: unknown format {f!r}")
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    if sequence is None:
        raise ConfigError("config must declare a sequence")
    return PipelineConfig(
        sequence=sequence,
        analyses=analyses,
        seed=seed,
        output=output,
        formats=formats,
        raw_lines=raw_lines,
        base_dir=Path(base_dir),
    )


def _parse_sizes(tokens: list[str]) -> list[int]:
    """Sizes as explicit ints or one 'a..b step c' range."""
    if not tokens:
        raise ConfigError("sequence spec needs sizes")
    if ".." in tokens[0]:
        lo, hi = (int(t) for t in tokens[0].split(".."))
        step = 1
        rest = tokens[1:]
        if rest[:1] == ["step"]:
            if len(rest) < 2:
                raise ConfigError("range 'step' needs a value")
            step = int(rest[1])
            rest = rest[2:]
        if rest:
            raise ConfigError(f"unexpected tokens after range: {' '.join(rest)}")
        if step <= 0 or hi < lo:
            raise ConfigError("bad size range")
        return list(range(lo, hi + 1, step))
    return [int(t) for t in tokens]


def parse_sequence_spec(
    spec: str, seed: int | None = None, base_dir: str | Path = "."
) -> tuple[GraphSeq, list[PermAction] | None]:
    """Build the level graphs named by a sequence spec.

    Families: ``cycle``/``path`` with sizes or a range, ``torus WxH ...``,
    ``random_regular <sizes> d=<d>`` (level L draws from seed+L-1),
    ``files <paths>``, ``seqfile <path>``, and ``actions <paths>`` whose
    levels are Schreier graphs (the actions are returned for the sofic
    analysis).
    """
    base_dir = Path(base_dir)
    tokens = spec.split()
    if not tokens:
        raise ConfigError("empty sequence spec")
    family, rest = tokens[0], tokens[1:]
    actions = None
    if family in ("cycle", "path"):
        sizes = _parse_sizes(rest)
        builder = cycle if family == "cycle" else path
        graphs = [builder(n) for n in sizes]
    elif family == "torus":
        graphs = []
        for tok in rest:
            if "x" not in tok:
                raise ConfigError(f"torus sizes look like WxH, got {tok!r}")
            w, h = (int(t) for t in tok.split("x"))
            graphs.append(torus(w, h))
    elif family == "random_regular":
        d = None
        size_tokens = []
        for tok in rest:
            if tok.startswith("d="):
                d = int(tok[2:])
            else:
                size_tokens.append(tok)
        if d is None:
            raise ConfigError("random_regular needs d=<degree>")
        if seed is None:
            raise ConfigError("random_regular requires an explicit seed")
        sizes = _parse_sizes(size_tokens)
        graphs = [random_regular(n, d, seed + i) for i, n in enumerate(sizes)]
    elif family == "files":
        if not rest:
            raise ConfigError("files spec needs at least one path")
        graphs = [load_graph(base_dir / p) for p in rest]
    elif family == "seqfile":
        if len(rest) != 1:
            raise ConfigError("seqfile spec takes exactly one path")
        return load_sequence(base_dir / rest[0]), None
    elif family == "actions":
        if not rest:
            raise ConfigError("actions spec needs at least one path")
        actions = [load_perm_action(base_dir / p) for p in rest]
        graphs = [schreier_graph(a)[0] for a in actions]
    else:
        raise ConfigError(f"unknown sequence family {family!r}")
    shared = max(g.degree_bound for g in graphs)
    return GraphSeq(graphs, degree_bound=shared), actions


# ----------------------------------------------------------------------------
# JSON-friendly encoding
# ----------------------------------------------------------------------------


def _jsonable(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _frac_params(params: dict[str, str], key: str, default=None) -> Fraction | None:
    if key not in params:
        return None if default is None else exact_fraction(default)
    return exact_fraction(params[key])


def _int_param(params: dict[str, str], key: str, default: int | None = None) -> int | None:
    if key not in params:
        return default
    return int(params[key])


def _table_rows(table: ControlTable) -> list[dict[str, Any]]:
    return [
        {
            "distance": d,
            "raw_min": lo,
            "raw_max": hi,
            "rho1": r1,
            "rho2": r2,
        }
        for d, lo, hi, r1, r2 in zip(
            table.distances, table.raw_min, table.raw_max, table.rho1, table.rho2
        )
    ]


# ----------------------------------------------------------------------------
# Analysis runners
# ----------------------------------------------------------------------------


def _run_hyperfinite(seq: GraphSeq, params: dict[str, str], _ctx: dict) -> dict:
    eps = _frac_params(params, "eps")
    if eps is None:
        raise ConfigError("hyperfinite needs eps=<value>")
    K = _int_param(params, "K")
    if K is None:
        raise ConfigError("hyperfinite needs K=<int>")
    tail = _int_param(params, "L0", 1)
    refine = _int_param(params, "refine", 1)
    iters = _int_param(params, "iters", 100)
    certs = []
    for i, g in enumerate(seq, start=1):
        cert = carve_greedy(g, K, level=i)
        if refine:
            cert = refine_local_search(g, cert, max_iters=iters)
        certs.append(cert)
    report = verify_partition(seq, certs, epsilon=eps, tail_start=tail)
    levels = []
    for g, cert, ratio in zip(seq, certs, report.ratios):
        removal = partition_to_removal(g, cert)
        ok, largest = verify_removal(g, removal)
        levels.append(
            {
                "level": cert.level,
                "n": g.n,
                "blocks": len(set(cert.assignment)),
                "cut": len(cert.cut_edges),
                "cut_ratio": ratio,
                "cut_ratio_float": float(ratio),
                "removal_size": len(removal.removed),
                "removal_density": removal.density,
                "removal_bound_2dE": 2 * g.degree_bound * len(cert.cut_edges),
                "removal_ok": ok,
                "removal_max_component": largest,
            }
        )
    return {
        "K": K,
        "epsilon": eps,
        "L0": tail,
        "refined": bool(refine),
        "levels": levels,
        "tail_sup": report.tail_sup,
        "passed": report.passed,
    }


def _run_propa(seq: GraphSeq, params: dict[str, str], _ctx: dict) -> dict:
    S = _int_param(params, "S")
    if S is None:
        raise ConfigError("propa needs S=<radius>")
    eps = _frac_params(params, "eps")
    mode = params.get("mode", "exact")
    family = params.get("family", "uniform")
    tail = _int_param(params, "L0", 1)
    if family == "uniform":
        witnesses = [uniform_ball_witness(g, S) for g in seq]
    elif family == "heat":
        t = _int_param(params, "t", S)
        witnesses = [heat_kernel_witness(g, S, t=t) for g in seq]
    else:
        raise ConfigError(f"unknown witness family {family!r}")
    report = verify_witness(seq, witnesses, mode=mode, epsilon=eps, tail_start=tail)
    levels = [
        {
            "level": i,
            "n": g.n,
            "max_variation": report.max_variation[i - 1],
            "max_variation_float": float(report.max_variation[i - 1]),
            "avg_variation": report.avg_variation[i - 1],
            "avg_variation_float": float(report.avg_variation[i - 1]),
        }
        for i, g in enumerate(seq, start=1)
    ]
    return {
        "S": S,
        "mode": mode,
        "family": family,
        "L0": tail,
        "epsilon": report.epsilon,
        "levels": levels,
        "achieved_epsilon": report.achieved_epsilon,
        "normalization_violations": report.normalization_violations,
        "support_violations": report.support_violations,
        "passed": report.passed,
    }


def _run_kernel(seq: GraphSeq, params: dict[str, str], _ctx: dict) -> dict:
    R = _int_param(params, "R", 2)
    kernels = [metric_kernel(g, level=i) for i, g in enumerate(seq, start=1)]
    levels = []
    for g, k in zip(seq, kernels):
        verdict = is_locally_cnd(g, k, R)
        entry = {
            "level": k.level,
            "n": g.n,
            "R": R,
            "b": verdict.aggregate,
            "locally_cnd": verdict.ok,
            "witness": verdict.witness,
            "max_diag": k.max_diag,
        }
        if not verdict.ok:
            corr = correct_kernel(g, k, R)
            entry["corrected_b"] = local_spectra(g, corr.kernel, R).aggregate
            entry["deviation_bound"] = corr.deviation_bound
        levels.append(entry)
    return {"R": R, "tol": SPECTRAL_TOL, "levels": levels}


def _run_embed(seq: GraphSeq, params: dict[str, str], ctx: dict) -> dict:
    mode = params.get("mode", "topo")
    if mode == "topo":
        cert = embed_certificate(
            seq,
            R_cap=_int_param(params, "R_cap"),
            basepoint=_int_param(params, "basepoint", 0),
        )
        out_dir = ctx.get("out_dir")
        if out_dir is not None:
            save_embed_cert(cert, Path(out_dir) / "embed_cert.json")
        return {
            "mode": "topo",
            "claims_embeddable": cert.claims_embeddable,
            "levels": [
                {
                    "level": lv.level,
                    "R": lv.radius,
                    "b": lv.b,
                    "C": lv.deviation_bound,
                    "max_deviation": lv.max_deviation,
                    "post_aggregate": lv.post_aggregate,
                    "gns_defect": lv.gns_defect,
                    "gns_note": lv.gns_note,
                }
                for lv in cert.levels
            ],
            "pooled_control": _table_rows(cert.pooled_table),
            "control_tables": [_table_rows(t) for t in cert.control_tables],
        }
    if mode == "weak":
        R = _int_param(params, "R", 2)
        eps = _frac_params(params, "eps", Fraction(1, 2))
        levels, tables, pooled = weak_embed_certificate(seq, R=R, eps=eps)
        result = {
            "mode": "weak",
            "R": R,
            "epsilon": eps,
            "levels": [
                {
                    "level": lv.level,
                    "a": lv.spectral.a,
                    "spectral_removed": list(lv.spectral.removed),
                    "shell_removed": list(lv.shell.removed),
                    "offending_mass": lv.shell.mass,
                    "survivor_b": lv.survivor_b,
                    "removed_density": lv.removed_density,
                }
                for lv in levels
            ],
            "pooled_control": _table_rows(pooled),
            "control_tables": [_table_rows(t) for t in tables],
        }
        if _int_param(params, "induced_metric", 0):
            result["induced_control_tables"] = [
                _table_rows(t)
                for t in _induced_tables(seq, levels)
            ]
            result["induced_note"] = (
                "distances recomputed inside the surviving subgraphs; pairs in "
                "different components are skipped; no claim is attached"
            )
        return result
    raise ConfigError(f"unknown embed mode {mode!r}")


def _induced_tables(seq: GraphSeq, weak_levels) -> list[ControlTable]:
    """Control tables under the subgraph metric (exploratory, no claims)."""
    from .kernels import _table_from_raw

    tables = []
    for g, lv in zip(seq, weak_levels):
        survivors = [v for v in range(g.n) if v not in set(lv.removed_total)]
        keep = set(survivors)
        kernel = metric_kernel(g).matrix
        raw: dict[int, tuple[float, float]] = {}
        for src in survivors:
            dist = {src: 0}
            queue = [src]
            head = 0
            while head < len(queue):
                u = queue[head]
                head += 1
                for w in g.adjacency[u]:
                    if w in keep and w not in dist:
                        dist[w] = dist[u] + 1
                        queue.append(w)
            for tgt, dval in dist.items():
                val = float(kernel[src, tgt])
                if dval in raw:
                    lo, hi = raw[dval]
                    raw[dval] = (min(lo, val), max(hi, val))
                else:
                    raw[dval] = (val, val)
        tables.append(_table_from_raw(raw))
    return tables


def _reference_ball(seq: GraphSeq, spec: str, R: int) -> RootedBall:
    if spec == "last":
        g = seq.levels[-1]
        return RootedBall.from_graph(g, 0, R)
    if spec == "first":
        return RootedBall.from_graph(seq.levels[0], 0, R)
    if ":" in spec:
        level_s, vertex_s = spec.split(":", 1)
        g = seq.level(int(level_s))
        return RootedBall.from_graph(g, int(vertex_s), R)
    raise ConfigError(f"unknown reference spec {spec!r}")


def _run_bs_profile(seq: GraphSeq, params: dict[str, str], _ctx: dict) -> dict:
    R = _int_param(params, "R", 2)
    reference = params.get("reference")
    ref_ball = None if reference is None else _reference_ball(seq, reference, R)
    profiles, flags = ball_profile(seq, R, reference=ref_ball)
    levels = []
    for i, (g, prof) in enumerate(zip(seq, profiles), start=1):
        entry = {
            "level": i,
            "n": g.n,
            "classes": len(prof.classes),
            "frequencies": [f for _, f in prof.classes],
            "girth": str(girth(g)),
        }
        if flags is not None:
            entry["reference_frequency"] = flags[i - 1]
        levels.append(entry)
    return {"R": R, "reference": reference, "levels": levels}


def _run_sofic(seq: GraphSeq, params: dict[str, str], ctx: dict) -> dict:
    actions = ctx.get("actions")
    if not actions:
        raise ConfigError("sofic analysis needs an 'actions ...' sequence source")
    words_path = params.get("words")
    if words_path is None:
        raise ConfigError("sofic needs words=<file>")
    words = load_words(ctx["base_dir"] / words_path)
    injectivity = [injectivity_report(a, words) for a in actions]
    chain: dict[str, Any] = {
        "injectivity": [
            {
                "level": i,
                "n": a.n,
                "good_fraction": rep.good_fraction,
                "epsilon": rep.epsilon,
            }
            for i, (a, rep) in enumerate(zip(actions, injectivity), start=1)
        ]
    }
    chain["hyperfinite"] = _run_hyperfinite(
        seq,
        {
            "eps": params.get("eps", "0.1"),
            "K": params.get("K", "30"),
            "L0": params.get("L0", "1"),
        },
        ctx,
    )
    chain["propa_average"] = _run_propa(
        seq,
        {
            "S": params.get("S", "2"),
            "eps": params.get("eps", "0.1"),
            "mode": "average",
            "L0": params.get("L0", "1"),
        },
        ctx,
    )
    chain["kernel"] = _run_kernel(seq, {"R": params.get("R", "2")}, ctx)
    return chain


_RUNNERS = {
    "hyperfinite": _run_hyperfinite,
    "propa": _run_propa,
    "kernel": _run_kernel,
    "embed": _run_embed,
    "bs-profile": _run_bs_profile,
    "sofic": _run_sofic,
}


def run(config: PipelineConfig) -> tuple[dict, int]:
    """Execute the configured analyses; failures are recorded, not fatal.

    Returns (report, exit_code) with exit code 0 when everything ran, 2 when
    an analysis-level failure is present.  Invalid configs raise
    :class:`ConfigError` before anything runs (exit code 1 at the CLI).
    """
    seq, actions = parse_sequence_spec(
        config.sequence, seed=config.seed, base_dir=config.base_dir
    )
    ctx = {
        "actions": actions,
        "base_dir": config.base_dir,
        "out_dir": config.output,
    }
    if config.output is not None:
        Path(config.output).mkdir(parents=True, exist_ok=True)
    analyses_out = []
    failures = 0
    for name, params in config.analyses:
        entry: dict[str, Any] = {"name": name, "params": dict(sorted(params.items()))}
        try:
            entry["result"] = _jsonable(_RUNNERS[name](seq, params, ctx))
            entry["error"] = None
        except (ConfigError, GraphError, ValueError) as exc:
            entry["result"] = None
            entry["error"] = str(exc)
            failures += 1
        analyses_out.append(entry)
    report = {
        "toolkit_version": __version__,
        "config": {
            "raw": config.raw_lines,
            "seed": config.seed,
            "sequence": config.sequence,
            "output": config.output,
            "formats": list(config.formats),
        },
        "sequence_sizes": [g.n for g in seq],
        "degree_bound": seq.degree_bound,
        "analyses": analyses_out,
    }
    return report, (2 if failures else 0)


# ----------------------------------------------------------------------------
# Emission
# ----------------------------------------------------------------------------


def report_bytes(report: dict) -> bytes:
    return (json.dumps(report, indent=2, sort_keys=True) + "\n").encode()


def emit(report: dict, out_dir: str | Path, formats=("json",)) -> list[Path]:
    """Write report.json and, when asked, per-level CSV views."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        target = out_dir / "report.json"
        target.write_bytes(report_bytes(report))
        written.append(target)
    if "csv" in formats:
        written.extend(_emit_csv(report, out_dir))
    return written


def _emit_csv(report: dict, out_dir: Path) -> list[Path]:
    written = []
    for idx, analysis in enumerate(report["analyses"]):
        result = analysis.get("result")
        if not result:
            continue
        stem = f"{idx:02d}_{analysis['name'].replace('-', '_')}"
        sections = (
            result.items() if analysis["name"] == "sofic" else [(None, result)]
        )
        for section_name, section in sections:
            if not isinstance(section, dict):
                continue
            rows = section.get("levels")
            if rows:
                suffix = f"_{section_name}" if section_name else ""
                target = out_dir / f"{stem}{suffix}_levels.csv"
                _write_csv(target, rows)
                written.append(target)
            for key in ("pooled_control", "control_tables", "induced_control_tables"):
                tables = section.get(key)
                if not tables:
                    continue
                if key == "pooled_control":
                    target = out_dir / f"{stem}_pooled_control.csv"
                    _write_csv(target, tables)
                    written.append(target)
                else:
                    for li, table in enumerate(tables, start=1):
                        target = out_dir / f"{stem}_{key}_level{li}.csv"
                        _write_csv(target, table)
                        written.append(target)
    return written


def _write_csv(target: Path, rows: list[dict]) -> None:
    keys = sorted({k for row in rows for k in row})
    with target.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(row.get(k)) for k in keys})


def _csv_cell(value: Any) -> Any:
    if isinstance(value, (list, dict)):
        return json.dumps(value, sort_keys=True)
    return value


def load_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
