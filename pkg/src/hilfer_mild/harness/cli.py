"""Command line: ``run``, ``verify`` and ``converge``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 solver non-convergence or divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from .. import __version__
from ..errors import ConfigError, DivergenceError, DomainError
from .scenario import load_scenario

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("hilfer_mild")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hilfer-mild",
        description="Mild solutions of Hilfer fractional evolution equations with nonlocal data.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver warnings")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve a scenario and write CSV plus report")
    r.add_argument("--config", required=True, help="scenario file or builtin name (example-sec5, linear-demo)")
    r.add_argument("--out", default=".", help="output directory (default: current)")
    r.add_argument("--plot", action="store_true", help="also render trajectory.png")

    v = sub.add_parser("verify", help="run a property suite")
    v.add_argument("--suite", required=True, choices=["specfun", "fracops", "operators", "solver", "all"])

    c = sub.add_parser("converge", help="mesh-doubling study")
    c.add_argument("--config", required=True)
    c.add_argument("--levels", type=int, required=True)
    c.add_argument("--out", default=None, help="directory for convergence.csv (and the plot)")
    c.add_argument("--plot", action="store_true", help="also render convergence.png")
    return ap


def _run(args) -> int:
    from .runner import run, write_artifact

    sc = load_scenario(args.config)
    art = run(sc)
    paths = write_artifact(art, args.out)
    sys.stdout.write(art.report_text)
    if args.plot:
        from .plotting import plot_run

        paths["plot"] = plot_run(art, args.out)
    for kind, p in paths.items():
        log.info("wrote %s %s", kind, p)
    return EXIT_OK if art.report.converged else EXIT_SOLVER


def _verify(args) -> int:
    from .checks import render, run_suite

    results = run_suite(args.suite)
    sys.stdout.write(render(results))
    ok = all(c.passed for _, checks, _ in results for c in checks)
    return EXIT_OK if ok else EXIT_VERIFY


def _converge(args) -> int:
    from .runner import converge

    if args.levels < 2:
        sys.stderr.write("error: --levels must be >= 2\n")
        return EXIT_CONFIG
    sc = load_scenario(args.config)
    table = converge(sc, args.levels)
    text = table.render()
    sys.stdout.write(text)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "convergence.csv").write_text(text, encoding="utf-8")
        if args.plot:
            from .plotting import plot_convergence

            plot_convergence(table, out)
    if not all(table.converged):
        return EXIT_SOLVER
    return EXIT_OK if table.monotone else EXIT_VERIFY


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.ERROR,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {"run": _run, "verify": _verify, "converge": _converge}
    try:
        return handlers[args.command](args)
    except (ConfigError, DomainError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except DivergenceError as exc:
        sys.stderr.write(f"solver diverged: {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
