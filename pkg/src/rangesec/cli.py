"""``rangesec`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Sequence

from .experiments import COMMANDS, ConfigError, dump_config, parse_config_text, provenance, resolve_config
from .ncoa import InfeasibleError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("rangesec")


def _format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def render_csv(columns: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_value(row[c]) for c in columns])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def render_json(doc: dict) -> str:
    return json.dumps(_json_safe(doc), indent=2, sort_keys=False) + "\n"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat YAML file of ExperimentConfig keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path, help="output path (stdout when omitted)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--field-model", choices=("exact", "far"))
    common.add_argument("--n-rf", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--strict", action="store_true", help="exit 3 when any solve fails to converge")
    common.add_argument("--clip", action="store_true", help="clip infeasible hybrid magnitudes instead of failing")
    common.add_argument("--print-config", action="store_true", help="echo the resolved configuration and exit")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")

    parser = argparse.ArgumentParser(prog="rangesec", description="Near-field range-security experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ncoa", parents=[common], help="single beamformer solve")
    mc = sub.add_parser("montecarlo", parents=[common], help="random-initialization convergence study")
    mc.add_argument("--n-trials", type=int)
    st = sub.add_parser("step-study", parents=[common], help="mean rate and iterations per step size")
    st.add_argument("--epsilon-grid", help="comma-separated step sizes")
    st.add_argument("--restarts", type=int)
    sw = sub.add_parser("sweep", parents=[common], help="closed-form solve over a parameter grid")
    sw.add_argument("--parameter", dest="sweep_parameter", choices=("p_tx", "spacing", "r_e", "r_b", "n_t"))
    sw.add_argument("--grid", dest="sweep_grid", help="comma-separated values")
    rb = sub.add_parser("robustness", parents=[common], help="rate under Eve location estimation error")
    rb.add_argument("--error-kind", choices=("angle", "range"))
    rb.add_argument("--error-grid", help="comma-separated errors (degrees or meters)")
    rb.add_argument("--r-e-grid", dest="robustness_r_e_grid", help="comma-separated true Eve ranges")
    cp = sub.add_parser("compare", parents=[common], help="rate of each method over r_b or r_e")
    cp.add_argument("--parameter", dest="compare_parameter", choices=("r_b", "r_e"))
    cp.add_argument("--grid", dest="compare_grid", help="comma-separated values")
    fd = sub.add_parser("fda-af", parents=[common], help="frequency diverse array pattern and checks")
    fd.add_argument("--delta-f", dest="fda_delta_f_hz", type=float)
    fd.add_argument("--t-grid", dest="fda_t_grid")
    fd.add_argument("--r-grid", dest="fda_r_grid")
    return parser


_PASSTHROUGH = (
    "seed", "format", "field_model", "n_rf", "workers", "n_trials", "epsilon_grid", "restarts", "sweep_parameter",
    "sweep_grid", "error_kind", "error_grid", "robustness_r_e_grid", "compare_parameter", "compare_grid",
    "fda_delta_f_hz", "fda_t_grid", "fda_r_grid",
)


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        values.update(parse_config_text(f"{key.strip()}: {raw.strip()}", source="--set"))
    for key in _PASSTHROUGH:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if args.out is not None:
        values["out"] = str(args.out)
    if args.clip:
        values["on_infeasible"] = "clip"
    return values


def _non_converged(command: str, rows: Sequence[dict], summary: dict) -> int:
    if command == "fda-af":
        return 0
    if command == "step-study":
        return sum(1 for r in rows if r["converged_fraction"] < 1.0)
    if command == "montecarlo":
        return 0 if summary["converged_fraction"] == 1.0 else 1
    return sum(1 for r in rows if not r.get("converged", True))


FDA_TOLERANCES = {"bob_eve_residual": 1e-12, "equivalence_residual": 1e-12, "optimum_excess": 1e-9}


def _fda_failures(summary: dict) -> list[str]:
    bad = [k for k, tol in FDA_TOLERANCES.items() if summary[k] > tol]
    if summary["bound_ratio"] > 1.0 + 1e-12:
        bad.append("bound_ratio")
    return bad


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        file_values = {}
        if args.config is not None:
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ConfigError(f"{args.config}: {exc.strerror}") from None
            file_values = parse_config_text(text, source=str(args.config))
        cfg = resolve_config(file_values, _overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.print_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK

    try:
        columns, rows, summary = COMMANDS[args.command](cfg)
    except InfeasibleError as exc:
        print(f"numerical failure: {exc} (rerun with --clip to clip magnitudes)", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    doc = provenance(args.command, cfg, summary)
    if cfg.format == "csv":
        body = render_csv(columns, rows)
    else:
        body = render_json({**doc, "columns": list(columns), "rows": rows})

    if cfg.out is None:
        sys.stdout.write(body)
        if cfg.format == "csv":
            sys.stderr.write(render_json(summary))
    else:
        out = Path(cfg.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(body)
        if cfg.format == "csv":
            out.with_name(out.name + ".json").write_text(render_json(doc))

    if args.command == "fda-af":
        failed = _fda_failures(summary)
        if failed:
            print(f"fda check failed: {', '.join(failed)}", file=sys.stderr)
            if args.strict:
                return EXIT_NUMERICAL
    n_bad = _non_converged(args.command, rows, summary)
    if n_bad:
        log.warning("%d result(s) did not converge within max_iterations", n_bad)
        if args.strict:
            return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
