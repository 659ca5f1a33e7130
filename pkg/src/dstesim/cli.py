"""Command-line entry point.

Batch mode runs a scenario script and writes exports; serve mode starts the
HTTP control plane (which the dashboard and other clients drive).

Exit codes: 0 success, 2 script parse error, 3 semantic/validation error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .domain import SimError
from .script import ScriptParseError, ScriptSemanticError, execute_script, summarize


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dstesim",
        description="Per-class bandwidth-allocation simulator (MAM / RDM / AllocTC-Sharing)")
    parser.add_argument("--script", metavar="FILE", help="run a scenario script")
    parser.add_argument("--export-dir", metavar="DIR", default=None,
                        help="write metrics CSV and JSON summaries here")
    parser.add_argument("--trace", action="store_true",
                        help="also export event traces (JSON Lines)")
    parser.add_argument("--serve", metavar="ADDR", default=None,
                        help="start the HTTP service on host:port")
    parser.add_argument("--ui-dir", metavar="DIR", default=None,
                        help="serve a built dashboard from this directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.serve and args.script:
        print("--serve and --script are mutually exclusive", file=sys.stderr)
        return 3
    if args.serve:
        return _serve(args.serve, args.ui_dir)
    if not args.script:
        build_parser().print_help()
        return 0

    path = Path(args.script)
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        return 3
    try:
        reports = execute_script(text, args.export_dir, args.trace, base_dir=path.parent)
    except ScriptParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (ScriptSemanticError, SimError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(summarize(reports))
    if args.export_dir:
        print(f"exports written to {args.export_dir}")
    return 0


def _serve(addr: str, ui_dir: str | None) -> int:
    import uvicorn

    from .service.app import create_app, load_default_case_base

    host, _, port = addr.rpartition(":")
    host = host or "127.0.0.1"
    app = create_app(case_base=load_default_case_base(), ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=int(port), log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
