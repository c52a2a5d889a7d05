"""plotkit --spec <json>: render nlh CSV series into PNG/SVG figures."""

from __future__ import annotations

import argparse
import sys


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotkit",
                                     description="Render nlh CSV series into figures.")
    parser.add_argument("--spec", required=True,
                        help="plot spec JSON (a single spec or a list)")
    parser.add_argument("--base", help="base directory for relative paths "
                                       "(defaults to the spec's directory)")
    args = parser.parse_args(argv)

    from pathlib import Path

    from .render import RenderError, render_file

    try:
        results = render_file(args.spec, base=Path(args.base) if args.base else None)
    except (RenderError, FileNotFoundError) as exc:
        print(f"plotkit error: {exc}", file=sys.stderr)
        return 2
    for r in results:
        flag = f" violations={r.violation_points}" if r.sidecar else ""
        print(f"wrote {r.png} {r.svg}{flag}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
