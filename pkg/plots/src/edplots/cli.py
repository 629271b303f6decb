"""Command line: render figures from a run manifest."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FIGURE_KINDS, render
from .snapshots import ManifestError, SnapshotFormatError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="entrodyn-plots", description="Render figures from run manifests"
    )
    subs = parser.add_subparsers(dest="command", required=True)
    rp = subs.add_parser("render", help="render one figure kind")
    rp.add_argument("--manifest", required=True, type=Path)
    rp.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    rp.add_argument("--out", required=True, type=Path)
    args = parser.parse_args(argv)

    try:
        written = render(args.manifest, args.kind, args.out)
    except (ManifestError, SnapshotFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
