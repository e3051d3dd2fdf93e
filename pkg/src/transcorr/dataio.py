"""Text-file interfaces: summary statistics, run manifests, content hashes."""

from __future__ import annotations

import csv
import hashlib

import numpy as np

from .errors import DataError

SUMMARY_STATS_HEADER = ["variant_id", "beta_hat"]


def write_summary_stats(values, variant_ids, n: int, path) -> None:
    """Summary-statistic CSV: `# n=<int>` metadata line, then variant_id,beta_hat."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (len(variant_ids),):
        raise DataError("one estimate per variant required")
    with open(path, "wt", encoding="utf-8", newline="") as fh:
        fh.write(f"# n={int(n)}\n")
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_STATS_HEADER)
        for vid, v in zip(variant_ids, values):
            writer.writerow([vid, format(v, ".17g")])


def read_summary_stats(path):
    """Returns (values, variant_ids, n).  A missing n header is a hard error:
    the aspect ratio cannot be guessed from the file contents."""
    n = None
    rows = []
    with open(path, "rt", encoding="utf-8") as fh:
        header_seen = False
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.startswith("n="):
                    try:
                        n = int(body[2:])
                    except ValueError as exc:
                        raise DataError(f"{path}: unparseable n in {line!r}") from exc
                continue
            parts = line.split(",")
            if not header_seen:
                if parts != SUMMARY_STATS_HEADER:
                    raise DataError(f"{path}: expected header variant_id,beta_hat")
                header_seen = True
                continue
            if len(parts) != 2:
                raise DataError(f"{path}: malformed row {line!r}")
            rows.append((parts[0], float(parts[1])))
    if n is None:
        raise DataError(
            f"{path}: missing `# n=<int>` header; the GWAS sample size is required "
            "to form the aspect ratio and cannot be guessed"
        )
    if not rows:
        raise DataError(f"{path}: no summary-statistic rows")
    ids = [r[0] for r in rows]
    values = np.array([r[1] for r in rows], dtype=np.float64)
    return values, ids, n


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_manifest(entries: dict, path) -> None:
    """Flat key=value manifest, keys sorted for reproducible output."""
    with open(path, "wt", encoding="utf-8") as fh:
        for key in sorted(entries):
            fh.write(f"{key}={entries[key]}\n")


def read_manifest(path) -> dict:
    out = {}
    with open(path, "rt", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{path}: malformed manifest line {line!r}")
            key, value = line.split("=", 1)
            out[key] = value
    return out
