"""Command line: convert a checkpoint and optionally emit a parity fixture.

    stsim-export export --checkpoint alexnet.pth --preset alex-baseline-full \
        --out weights.stpw --fixture-seed 7
"""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, PRESET_WIDTHS, export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="stsim-export")
    sub = parser.add_subparsers(dest="command")
    sp = sub.add_parser("export", help="convert a checkpoint to an STPW weight file")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--preset", required=True, choices=sorted(PRESET_WIDTHS))
    sp.add_argument("--out", required=True)
    sp.add_argument("--fixture-seed", type=int, default=None,
                    help="also write a parity fixture generated with this seed")
    args = parser.parse_args(argv)
    if args.command != "export":
        parser.print_usage(sys.stderr)
        return 1
    try:
        fixture = export(args.checkpoint, args.preset, args.out, args.fixture_seed)
    except (ExportError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    if fixture is not None:
        print(f"fixture: {fixture.meta}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
