"""Accuracy table for the meat, oil and honey spectra.

The datasets are not distributed with the package. Supply CSVs in the
package layout (one row per sample, ``label`` column plus one column per
wavelength) and run

    python3 scripts/reproduce_table2.py --data-dir /path/to/csvs --out table2_out

Each dataset gets its own table, JSON report and PLS confusion matrix.
"""

import argparse
import time
from pathlib import Path

from nirbench.dataset import load_csv
from nirbench.harness import confusion_csv, emit_table, preset, reports_json, run_benchmark

PLS_COMPONENTS = {"meat": 15, "oil": 10, "honey": 15}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data-dir", type=Path, required=True)
    ap.add_argument("--datasets", nargs="+", default=list(PLS_COMPONENTS), choices=list(PLS_COMPONENTS))
    ap.add_argument("--splits", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", type=Path, default=Path("table2_out"))
    args = ap.parse_args(argv)

    for name in args.datasets:
        path = args.data_dir / f"{name}.csv"
        if not path.exists():
            print(f"{name}: {path} not found, skipped")
            continue
        data = load_csv(path)
        specs = preset("table2", pls_components=PLS_COMPONENTS[name])
        t0 = time.perf_counter()
        reports = run_benchmark(data, specs, args.splits, seed=args.seed, threads=args.threads)
        table_csv, table_txt = emit_table(reports)
        print(f"== {name} (n={data.n}, p={data.p}, k={data.k}, {time.perf_counter() - t0:.0f}s)")
        print(table_txt, end="")
        out = args.out / name
        out.mkdir(parents=True, exist_ok=True)
        (out / "table.csv").write_text(table_csv)
        (out / "report.json").write_text(reports_json(reports, specs, {"dataset": name, "splits": args.splits}))
        pls = next(r for r in reports if r.label == "PLS")
        if pls.last_split_confusion is not None:
            (out / "confusion_PLS.csv").write_text(confusion_csv(pls.last_split_confusion, data.class_names))


if __name__ == "__main__":
    main()
