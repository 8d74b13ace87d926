"""Regenerate the benchmark tables as CSV files.

    python docs/repro/tables.py --out results/            # everything
    python docs/repro/tables.py --only capacity cauchy    # a subset

Each table is written to ``<out>/<name>.csv`` with one row per model and
seed. The scaling study, pseudo-sampling run and timing benchmark have their
own CLI commands (see ``run_all.sh``).
"""

import argparse
import csv
from pathlib import Path

from fourmix.experiments import ExperimentConfig, run_fit

SEEDS = (1, 2, 3, 4, 5)
CF_COLUMNS = ("l2_re", "l2_im", "mpe_re", "mpe_im")


def capacity_rows(seeds):
    """Density L2 and test NLL for Fourier fits at several K_G, with the EM baseline at K = 3."""
    rows = []
    for target in ("gmm3-separated", "gmm3-overlap"):
        for k_g in (1, 2, 3, 5, 8):
            for seed in seeds:
                art = run_fit(ExperimentConfig(target=target, k_g=k_g, em_baseline=k_g == 3), seed, write=False)
                rows.append({"target": target, "method": "fourier", "K_G": k_g, "K_L": 0, "seed": seed,
                             "density_l2": art.errors.density_l2_norm, "nll": art.errors.nll})
                if art.em:
                    rows.append({"target": target, "method": "em", "K_G": k_g, "K_L": 0, "seed": seed,
                                 "density_l2": art.em["errors"]["density_l2_norm"], "nll": art.em["errors"]["nll"]})
    return rows


def cf_rows(target, shapes, seeds, **kw):
    rows = []
    for k_g, k_l in shapes:
        for seed in seeds:
            err = run_fit(ExperimentConfig(target=target, k_g=k_g, k_l=k_l, **kw), seed, write=False).errors
            rows.append({"target": target, "K_G": k_g, "K_L": k_l, "seed": seed,
                         **{c: getattr(err, c) for c in CF_COLUMNS}})
    return rows


TABLES = {
    "capacity": capacity_rows,
    "cauchy": lambda seeds: cf_rows("cauchy", [(5, 5), (10, 0)], seeds),
    "kou": lambda seeds: cf_rows("kou", [(45, 0)], seeds),
    "cauchy2d": lambda seeds: cf_rows("cauchy2d", [(30, 0), (40, 0), (30, 20)], seeds[:1], m=100_000,
                                      grid="tensor:50:64:2", q_fourier=800),
}


def write_rows(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results")
    ap.add_argument("--only", nargs="*", choices=sorted(TABLES), default=sorted(TABLES))
    ap.add_argument("--seeds", type=int, nargs="*", default=list(SEEDS))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.only:
        rows = TABLES[name](tuple(args.seeds))
        write_rows(out / f"{name}.csv", rows)
        print(f"wrote {out / name}.csv ({len(rows)} rows)")


if __name__ == "__main__":
    main()
