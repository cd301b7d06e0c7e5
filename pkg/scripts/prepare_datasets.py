"""Convert raw public copies of Compas and Law into the CSV layout used here.

    python scripts/prepare_datasets.py --compas compas-scores-two-years.csv \
        --law law.csv --out data/

Compas follows the usual ProPublica filtering (screening within 30 days of
arrest, known recidivism, no ordinary traffic offences, a valid score).
Law collapses the one-hot race, sex and pass/fail indicators back into
single columns. See DATASETS.md for where the raw files come from.
"""

import argparse
import csv
import os
import sys

COMPAS_COLUMNS = ["gender", "age", "age_cat", "race", "juv_fel_count", "juv_misd_count",
                  "juv_other_count", "priors_count", "c_charge_degree", "two_year_recid"]
LAW_COLUMNS = ["race", "sex", "LSAT", "UGPA", "ZFYA", "PF"]


def prepare_compas(src, dst):
    kept = dropped = 0
    with open(src, newline="", encoding="utf-8") as fin, \
            open(dst, "w", newline="", encoding="utf-8") as fout:
        reader = csv.DictReader(fin)
        writer = csv.writer(fout, lineterminator="\n")
        writer.writerow(COMPAS_COLUMNS)
        for row in reader:
            try:
                days = int(row["days_b_screening_arrest"])
            except ValueError:
                dropped += 1
                continue
            if (abs(days) > 30 or row["is_recid"] == "-1" or row["c_charge_degree"] == "O"
                    or row["score_text"] == "N/A"):
                dropped += 1
                continue
            out = dict(row, gender=row["sex"])
            writer.writerow([out[c] for c in COMPAS_COLUMNS])
            kept += 1
    return kept, dropped


def _hot(row, prefix):
    hits = [k[len(prefix):] for k, v in row.items() if k.startswith(prefix) and float(v) == 1.0]
    if len(hits) != 1:
        raise ValueError(f"expected one active {prefix}* column, found {hits}")
    return hits[0]


def prepare_law(src, dst):
    kept = 0
    with open(src, newline="", encoding="utf-8") as fin, \
            open(dst, "w", newline="", encoding="utf-8") as fout:
        reader = csv.DictReader(fin)
        writer = csv.writer(fout, lineterminator="\n")
        writer.writerow(LAW_COLUMNS)
        for row in reader:
            writer.writerow([_hot(row, "Race_"), _hot(row, "Sex_"), row["LSAT"], row["UGPA"],
                             row["ZFYA"], _hot(row, "PF_")])
            kept += 1
    return kept, 0


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--compas", help="compas-scores-two-years.csv")
    p.add_argument("--law", help="law.csv with one-hot Race_/Sex_/PF_ columns")
    p.add_argument("--out", default="data")
    a = p.parse_args(argv)
    if not (a.compas or a.law):
        p.error("give --compas and/or --law")
    os.makedirs(a.out, exist_ok=True)
    for name, src, fn in (("compas", a.compas, prepare_compas), ("law", a.law, prepare_law)):
        if src:
            kept, dropped = fn(src, os.path.join(a.out, f"{name}.csv"))
            print(f"{name}: {kept} rows written, {dropped} filtered")
    return 0


if __name__ == "__main__":
    sys.exit(main())
