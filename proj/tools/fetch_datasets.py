#!/usr/bin/env python3
"""Assemble the four benchmark datasets as plain CSV files under data/.

Sources (no direct UCI access needed):
  wine     - the copy bundled with scikit-learn
  glass    - MASS::fgl from the pydataset sdist (same 214 samples; RI is shifted
             and scaled, which standardization removes)
  vehicle  - KEEL's vehicle.dat from the keel-ds wheel
  waveform - regenerated with Breiman's waveform-21 generator (5000 rows)

Every output has a header row and a trailing `class` column. After writing,
SHA-256 digests are checked against data/SHA256SUMS (use --update to rewrite).
"""
import argparse
import csv
import hashlib
import io
import os
import subprocess
import sys
import tarfile
import tempfile
import zipfile

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(os.path.dirname(HERE), "data")


def write_csv(name, header, rows):
    path = os.path.join(DATA, name)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def pip_download(spec, dest, no_binary=False):
    cmd = [sys.executable, "-m", "pip", "download", "--no-deps", "-d", dest, spec]
    if no_binary:
        cmd[4:4] = ["--no-binary", ":all:"]
    subprocess.run(cmd, check=True, stdout=subprocess.DEVNULL)
    return [os.path.join(dest, f) for f in os.listdir(dest)]


def wine():
    import sklearn
    src = os.path.join(os.path.dirname(sklearn.__file__), "datasets", "data", "wine_data.csv")
    with open(src) as fh:
        lines = list(csv.reader(fh))[1:]
    header = [f"x{k + 1}" for k in range(13)] + ["class"]
    rows = [r[:13] + [str(int(r[13]) + 1)] for r in lines]
    return write_csv("wine.csv", header, rows)


def glass(tmp):
    sdist = pip_download("pydataset==0.2.0", tmp, no_binary=True)[0]
    with tarfile.open(sdist) as outer:
        res = outer.extractfile("pydataset-0.2.0/pydataset/resources.tar.gz").read()
    with tarfile.open(fileobj=io.BytesIO(res)) as inner:
        text = inner.extractfile("resources/rdata/csv/MASS/fgl.csv").read().decode()
    lines = list(csv.reader(io.StringIO(text)))
    header = lines[0][1:-1] + ["class"]
    rows = [r[1:] for r in lines[1:]]
    return write_csv("glass.csv", header, rows)


def vehicle(tmp):
    wheel = pip_download("keel-ds==0.2.5", tmp)[0]
    with zipfile.ZipFile(wheel) as z:
        text = z.read("keel_ds/data/balanced/raw/vehicle.dat").decode()
    rows = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("@"):
            continue
        rows.append([t.strip() for t in line.split(",")])
    header = [f"x{k + 1}" for k in range(18)] + ["class"]
    return write_csv("vehicle.csv", header, rows)


def waveform(n=5000, seed=19840101):
    rng = np.random.default_rng(seed)
    idx = np.arange(1, 22)
    h1 = np.maximum(6 - np.abs(idx - 11), 0)
    h2 = np.maximum(6 - np.abs(idx - 15), 0)
    h3 = np.maximum(6 - np.abs(idx - 7), 0)
    pairs = [(h1, h2), (h1, h3), (h2, h3)]
    labels = rng.integers(0, 3, size=n)
    u = rng.uniform(size=n)
    noise = rng.standard_normal((n, 21))
    rows = []
    for k in range(n):
        a, b = pairs[labels[k]]
        x = u[k] * a + (1 - u[k]) * b + noise[k]
        rows.append([f"{v:.2f}" for v in x] + [str(labels[k] + 1)])
    header = [f"x{k + 1}" for k in range(21)] + ["class"]
    return write_csv("waveform.csv", header, rows)


def sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--update", action="store_true", help="rewrite SHA256SUMS")
    args = ap.parse_args()
    os.makedirs(DATA, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        paths = [wine(), glass(os.path.join(tmp, "g")), vehicle(os.path.join(tmp, "v")), waveform()]
    sums_path = os.path.join(DATA, "SHA256SUMS")
    digests = {os.path.basename(p): sha256(p) for p in paths}
    if args.update or not os.path.exists(sums_path):
        with open(sums_path, "w") as fh:
            for name in sorted(digests):
                fh.write(f"{digests[name]}  {name}\n")
        print(f"wrote {sums_path}")
        return 0
    expected = dict(reversed(line.split()) for line in open(sums_path) if line.strip())
    bad = [n for n, d in digests.items() if expected.get(n) != d]
    for n in sorted(digests):
        print(f"{'MISMATCH' if n in bad else 'ok'}  {n}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
