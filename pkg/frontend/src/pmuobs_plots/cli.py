"""Entry points: render figures from a scenario run directory."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from pmuobs_plots.figures import FigureSpec, plot_parameters, plot_states
from pmuobs_plots.io import EmptyDataError, MissingColumnError


def _parser(description: str) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--in", dest="run_dir", required=True,
                        help="directory holding the scenario CSVs")
    parser.add_argument("--machine", required=True, help="machine id to plot")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--window", nargs=2, type=float, default=None,
                        metavar=("T0", "T1"), help="time window to show [s]")
    return parser


def _run(render, args) -> int:
    spec = FigureSpec(run_dir=Path(args.run_dir), machine=args.machine,
                      out_path=Path(args.out),
                      window=tuple(args.window) if args.window else None)
    try:
        out = render(spec)
    except (MissingColumnError, EmptyDataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


def states_main(argv=None) -> int:
    args = _parser("Overlay true and estimated state traces.").parse_args(argv)
    return _run(plot_states, args)


def params_main(argv=None) -> int:
    args = _parser("Parameter-convergence panels.").parse_args(argv)
    return _run(plot_parameters, args)


if __name__ == "__main__":
    sys.exit(states_main())
