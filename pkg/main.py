"""ClusterTest - selective inference after hierarchical clustering, unknown variance.

Usage:
    python main.py test --data penguins.csv --k 5 --pair 4,5 --method is --standardize
    python main.py simulate --scenario type1_k2 --trials 200 --out output/type1_k2
    python main.py scan --data points.csv --k 2 --pair 1,2 --space phi
"""

import argparse
import logging
import os
import sys

# Load CLUSTERINF_* defaults from a .env file before config reads them
try:
    from dotenv import load_dotenv
    _env_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), ".env")
    load_dotenv(_env_path, override=False)
except ImportError:
    pass


def _add_data_args(p: argparse.ArgumentParser):
    p.add_argument("--data", required=True, help="CSV file, rows = observations.")
    p.add_argument("--k", type=int, required=True, help="Number of clusters K.")
    p.add_argument("--linkage", default="average", choices=["avg", "average", "complete", "single"])
    p.add_argument("--pair", default="1,2", help="Clusters to compare, e.g. 4,5.")
    p.add_argument("--has-header", action="store_true", help="First CSV row holds column names.")
    p.add_argument("--columns", default=None, help="Comma-separated column names or 0-based indices.")
    p.add_argument("--standardize", action="store_true", help="Center and scale columns first.")


def build_parser() -> argparse.ArgumentParser:
    from config import DEFAULT_GRID_POINTS, DEFAULT_IS_DRAWS, DEFAULT_REFINE_TOL, VERSION

    parser = argparse.ArgumentParser(
        description="ClusterTest - p-values for differences between estimated cluster means"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("--verbose", action="store_true", help="Debug logging.")
    parser.add_argument("--quiet", action="store_true", help="Warnings and errors only.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="Test one pair of estimated clusters.")
    _add_data_args(p)
    p.add_argument("--method", default="exact",
                   choices=["exact", "is", "gao-all", "gao-clustered", "gao-true"])
    p.add_argument("--sigma", type=float, default=None, help="Known noise level (gao-true).")
    p.add_argument("--tail", default="exact", choices=["exact", "li", "auto"],
                   help="Tail route of the exact method (li: chi^2 approximation, large (m-2)q only).")
    p.add_argument("--n-draws", type=int, default=DEFAULT_IS_DRAWS, help="Importance-sampling draws.")
    p.add_argument("--seed", type=int, default=None, help="Overrides CLUSTERINF_SEED.")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID_POINTS, help="Scan grid points.")
    p.add_argument("--tol", type=float, default=DEFAULT_REFINE_TOL, help="Boundary tolerance.")

    p = sub.add_parser("simulate", help="Run a named simulation scenario.")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--delta-grid", type=float, nargs="+", default=None)
    p.add_argument("--methods", nargs="+", default=None,
                   help="Any of: proposed gao_true gao_all gao_clustered.")
    p.add_argument("--k", type=int, default=None, help="Override the scenario's K.")
    p.add_argument("--n-draws", type=int, default=None)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-jobs", type=int, default=None, help="Parallel trials (joblib).")
    p.add_argument("--out", default=None, help="Output directory (default: output/<scenario>).")

    p = sub.add_parser("scan", help="Print the truncation set for one pair.")
    _add_data_args(p)
    p.add_argument("--space", default="r", choices=["r", "phi"])
    p.add_argument("--grid", type=int, default=DEFAULT_GRID_POINTS)
    p.add_argument("--tol", type=float, default=DEFAULT_REFINE_TOL)
    p.add_argument("--li", action="store_true", help="Also print the Li-transformed set.")
    p.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
    )

    from cli.app import run

    return run(args)


if __name__ == "__main__":
    sys.exit(main())
