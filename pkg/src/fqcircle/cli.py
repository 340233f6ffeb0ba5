"""Command-line entry point: ``fqcircle <subcommand> --config <path>``.

Exit codes: 0 when every check passes, 1 when some check fails, 2 for usage,
configuration and budget errors.  Reports go to ``--out`` (or stdout) and
timing goes to stderr, so report bytes depend only on config and seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

from .arcs import ArcError
from .budget import BudgetExceeded
from .certificates import CertificateError
from .curves import CurveError
from .experiments import RUNNERS, ConfigError, ExperimentConfig, Report
from .forms import FormError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fqcircle", description="Exact circle-method experiments over finite fields.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--max-enum", type=int, dest="max_enum")
        p.add_argument("--out", type=Path)
        p.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def render_json(report: Report) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def render_csv(report: Report) -> str:
    data = report.to_dict()
    rows = data["records"] or [{"check": k, "passed": v} for k, v in sorted(data["checks"].items())]
    columns = sorted({k for r in rows for k in r})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v for k, v in r.items()})
    return buf.getvalue()


def run(command: str, cfg: ExperimentConfig) -> Report:
    return RUNNERS[command](cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"fqcircle: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    start = time.perf_counter()
    try:
        cfg = ExperimentConfig.from_text(
            text, {"seed": args.seed, "workers": args.workers, "max_enum": args.max_enum}
        )
        report = run(args.command, cfg)
    except BudgetExceeded as exc:
        print(f"fqcircle: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, CurveError, FormError, ArcError, CertificateError) as exc:
        print(f"fqcircle: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render_csv(report) if args.format == "csv" else render_json(report)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    failed = sorted(k for k, v in report.checks.items() if not v)
    print(f"fqcircle {args.command}: {time.perf_counter() - start:.2f}s, "
          f"{len(report.checks) - len(failed)}/{len(report.checks)} checks passed"
          + (f", failed: {', '.join(failed)}" if failed else ""), file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
