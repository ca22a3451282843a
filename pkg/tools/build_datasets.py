"""Rebuild the bundled UCI CSV files under ``src/opml/datasets``.

The raw tables come from the ``keel_ds`` wheel on PyPI (KEEL mirror of the UCI
repository). Glass comes from the ``fgl`` table of R's MASS package, shipped
in the ``rdatasets`` wheel; it is the original 214-row UCI table with the
refractive index shifted and scaled, which z-scoring undoes. Balance-scale
is generated from its defining rule.

KEEL also ships glass, but only as one-vs-rest splits whose feature values
are perturbed; :func:`build_glass_keel` reassembles those as a fallback when
the second wheel is not given. Unpickling ``fgl`` needs pandas.

    pip download --no-deps keel_ds==0.2.5 rdatasets==0.2.9 -d /tmp/dl
    python tools/build_datasets.py /tmp/dl/keel_ds-0.2.5-py3-none-any.whl \
        /tmp/dl/rdatasets-0.2.9-py3-none-any.whl
"""
import csv
import lzma
import pickle
import itertools
import sys
import zipfile
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "opml" / "datasets"

# output name -> KEEL raw table
KEEL_TABLES = {
    "iris": "balanced/raw/iris.dat",
    "wine": "balanced/raw/wine.dat",
    "breast": "balanced/raw/wisconsin.dat",
    "pima": "balanced/raw/pima.dat",
    "segment": "balanced/raw/segment.dat",
    "optdigits": "balanced/raw/optdigits.dat",
}

# one-vs-rest splits: positive rows of each file belong to this glass type
GLASS_SPLITS = {
    "glass0": "building_float",
    "glass1": "building_non_float",
    "glass4": "containers",
    "glass5": "tableware",
    "glass6": "headlamps",
}
GLASS_REST = "vehicle_float"


def read_rows(zf, member):
    text = zf.read("keel_ds/data/" + member).decode("utf-8")
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([cell.strip() for cell in line.split(",")])
    return rows


def write_csv(name, rows, n_features):
    header = [f"f{i}" for i in range(n_features)] + ["label"]
    path = OUT / f"{name}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    print(f"{path.name}: {len(rows)} rows, {n_features} features")


def build_glass_keel(zf):
    tables = {k: read_rows(zf, f"imbalanced/raw/{k}.dat") for k in GLASS_SPLITS}
    features = [r[:-1] for r in tables["glass0"]]
    for rows in tables.values():
        if [r[:-1] for r in rows] != features:
            raise SystemExit("glass splits are not row-aligned")
    labels = []
    for i in range(len(features)):
        hits = [GLASS_SPLITS[k] for k, rows in tables.items() if rows[i][-1] == "positive"]
        if len(hits) > 1:
            raise SystemExit(f"glass row {i} claimed by several splits")
        labels.append(hits[0] if hits else GLASS_REST)
    return [f + [lab] for f, lab in zip(features, labels)]


def build_glass_mass(wheel):
    with zipfile.ZipFile(wheel) as zf:
        blob = zf.read("rdatasets/_data/MASS/fgl.pkl.compress")
    df = pickle.loads(lzma.decompress(blob))
    cols = ["RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe"]
    return [[f"{float(v):.10g}" for v in row[cols]] + [row["type"]] for _, row in df.iterrows()]


def build_balance():
    # left weight, left distance, right weight, right distance in 1..5
    rows = []
    for lw, ld, rw, rd in itertools.product(range(1, 6), repeat=4):
        left, right = lw * ld, rw * rd
        label = "B" if left == right else ("L" if left > right else "R")
        rows.append([lw, ld, rw, rd, label])
    return rows


def main(wheel, rdatasets_wheel=None):
    OUT.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(wheel) as zf:
        for name, member in KEEL_TABLES.items():
            rows = read_rows(zf, member)
            write_csv(name, rows, len(rows[0]) - 1)
        if rdatasets_wheel is None:
            write_csv("glass", build_glass_keel(zf), 9)
    if rdatasets_wheel is not None:
        write_csv("glass", build_glass_mass(rdatasets_wheel), 9)
    write_csv("balance", build_balance(), 4)


if __name__ == "__main__":
    main(*sys.argv[1:3])
