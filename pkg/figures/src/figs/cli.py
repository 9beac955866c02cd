"""Command line entry: render one figure from labeled input files.

Usage:
    dcrs-fig scatter     --in cubesplit=codebook.json --out fig.png
    dcrs-fig nmse-bars   --in expmap=a.csv --in training=t.csv --snr 0 --out fig.png
    dcrs-fig iprod-hist  --in manopt=a.csv --in manopt-nmse=b.csv --out fig.png
    dcrs-fig nmse-curves --in cubesplit=a.csv --in training=t.csv --out fig.png
    dcrs-fig rate-curves --in cubesplit=a.csv --in training=t.csv --out fig.png
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from figs.io import FigureInputError
from figs.render import KINDS, FigureSpec, render


def _parse_inputs(pairs: list[str]) -> tuple[tuple[str, Path], ...]:
    out = []
    for pair in pairs:
        label, sep, path = pair.partition("=")
        if not sep or not label or not path:
            raise FigureInputError(
                f"--in expects label=path, got {pair!r}"
            )
        out.append((label, Path(path)))
    return tuple(out)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="dcrs-fig", description=__doc__)
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--in", dest="inputs", action="append", required=True,
                   metavar="LABEL=PATH")
    p.add_argument("--out", required=True)
    p.add_argument("--snr", type=float, default=None,
                   help="SNR row to select (nmse-bars)")
    p.add_argument("--bins", type=int, default=50,
                   help="histogram bin count (iprod-hist)")
    p.add_argument("--xlim", type=float, nargs=2, default=None)
    p.add_argument("--ylim", type=float, nargs=2, default=None)
    args = p.parse_args(argv)
    try:
        extra = {}
        if args.snr is not None:
            extra["snr_db"] = args.snr
        extra["bins"] = args.bins
        spec = FigureSpec(
            kind=args.kind,
            inputs=_parse_inputs(args.inputs),
            out=Path(args.out),
            xlim=tuple(args.xlim) if args.xlim else None,
            ylim=tuple(args.ylim) if args.ylim else None,
            extra=extra,
        )
        result = render(spec)
    except FigureInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if isinstance(result, dict):
        for label, cross in sorted(result.items()):
            shown = f"{cross:.2f} dB" if cross is not None else "none"
            print(f"crossing {label}: {shown}")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
