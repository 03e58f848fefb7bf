"""Run a manifest of benchmark cells (task x dataset x setting x seeds) and
write results.csv plus a markdown report. Missing dataset files are skipped
with a notice rather than failing the whole run.

Usage:
    python scripts/run_benchmark.py [--manifest scripts/manifest.json]
                                    [--out out/bench]
"""
import argparse

from adawavenet.bench import format_report, load_manifest, run_benchmark


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--manifest", default="scripts/manifest.json")
    parser.add_argument("--out", default="out/bench")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args()

    manifest = load_manifest(args.manifest)
    results, skipped = run_benchmark(manifest, args.out, verbose=not args.quiet)
    print(format_report(results, skipped))
    print(f"wrote results.csv and report.md to {args.out}")


if __name__ == "__main__":
    main()
