"""Data ingestion and serialization: CSV count tables, theta files, payloads.

Wide count tables have one row per design point: covariate columns first,
then one nonnegative integer count column per response category.  String
covariates are dummy-expanded at ingestion with the first observed level as
the reference; rows whose counts sum to zero are dropped with a warning.
"""

from __future__ import annotations

import csv
import io as _io
import json
import logging
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .model import Dataset, ModelSpec, Theta

log = logging.getLogger("catorder")

#: Response-category labels of the bundled US police fatalities table.
POLICE_RESPONSES = ("o", "s", "st", "t")


def _open_text(source):
    if hasattr(source, "read"):
        return source, False
    return open(source, "r", newline=""), True


def ingest_csv(
    source,
    response_columns: Sequence[str] | None = None,
    delimiter: str | None = None,
) -> Dataset:
    """Read a wide count table into a Dataset.

    ``response_columns`` names the count columns; when omitted, columns
    named ``y1..yJ`` are used.  Comma and tab delimiters are accepted
    (sniffed from the header when not given).  Errors carry the 1-based
    line number of the offending row.
    """
    fh, owned = _open_text(source)
    try:
        header_line = fh.readline()
        if not header_line.strip():
            raise DataError("empty input: no header row")
        if delimiter is None:
            delimiter = "\t" if "\t" in header_line else ","
        header = [h.strip() for h in next(csv.reader([header_line], delimiter=delimiter))]
        if response_columns is None:
            response_columns = [h for h in header if h.startswith("y") and h[1:].isdigit()]
            if not response_columns:
                raise DataError("no response columns: name them y1..yJ or pass response_columns")
        missing = [c for c in response_columns if c not in header]
        if missing:
            raise DataError(f"response columns not in header: {missing}")
        resp_idx = [header.index(c) for c in response_columns]
        cov_idx = [i for i in range(len(header)) if i not in resp_idx]

        raw_cov: list[list[str]] = []
        counts: list[list[int]] = []
        for lineno, row in enumerate(csv.reader(fh, delimiter=delimiter), start=2):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(header):
                raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                y = [int(float(row[i])) for i in resp_idx]
                if any(float(row[i]) != int(float(row[i])) for i in resp_idx):
                    raise ValueError
            except ValueError:
                raise DataError(f"line {lineno}: counts must be integers") from None
            if any(v < 0 for v in y):
                raise DataError(f"line {lineno}: negative count")
            raw_cov.append([row[i].strip() for i in cov_idx])
            counts.append(y)
    finally:
        if owned:
            fh.close()

    if not counts:
        raise DataError("no data rows")
    x, names = _expand_covariates(raw_cov, [header[i] for i in cov_idx])
    y = np.array(counts, dtype=np.int64)
    dropped = int(np.sum(y.sum(axis=1) == 0))
    if dropped:
        log.warning("dropping %d row(s) with zero total count", dropped)
    return Dataset.from_arrays(x, y, tuple(names), tuple(response_columns))


def _expand_covariates(rows: list[list[str]], names: list[str]):
    """Dummy-expand string columns (reference = first observed level)."""
    if not names:
        return np.zeros((len(rows), 0)), []
    cols = list(zip(*rows))
    out_cols, out_names = [], []
    for name, values in zip(names, cols):
        try:
            out_cols.append(np.array([float(v) for v in values]))
            out_names.append(name)
        except ValueError:
            levels: list[str] = []
            for v in values:
                if v not in levels:
                    levels.append(v)
            for lev in levels[1:]:
                out_cols.append(np.array([1.0 if v == lev else 0.0 for v in values]))
                out_names.append(f"{name}={lev}")
    x = np.column_stack(out_cols) if out_cols else np.zeros((len(rows), 0))
    return x, out_names


def write_dataset_csv(dataset: Dataset, target) -> None:
    """Emit a dataset as a wide count table (expanded numeric covariates)."""
    fh, owned = (target, False) if hasattr(target, "write") else (open(target, "w", newline=""), True)
    try:
        w = csv.writer(fh)
        w.writerow(list(dataset.covariates) + list(dataset.responses))
        for xi, yi in zip(dataset.x, dataset.y):
            w.writerow([format(v, "g") for v in xi] + [int(v) for v in yi])
    finally:
        if owned:
            fh.close()


def dataset_to_csv_text(dataset: Dataset) -> str:
    buf = _io.StringIO()
    write_dataset_csv(dataset, buf)
    return buf.getvalue()


def police_dataset() -> Dataset:
    """The bundled US police involved fatalities table (23 rows, J=4).

    Response labels: s = shot, t = tasered, st = shot and tasered,
    o = other.  One empty covariate combination is absent from the file.
    """
    path = resources.files("catorder").joinpath("data/police.csv")
    with path.open("r") as fh:
        return ingest_csv(fh, response_columns=POLICE_RESPONSES)


def dataset_to_payload(dataset: Dataset) -> dict:
    return {
        "x": dataset.x.tolist(),
        "y": dataset.y.tolist(),
        "covariates": list(dataset.covariates),
        "responses": list(dataset.responses),
    }


def dataset_from_payload(payload: dict) -> Dataset:
    return Dataset.from_arrays(
        np.asarray(payload["x"], dtype=float),
        np.asarray(payload["y"]),
        tuple(payload.get("covariates") or ()),
        tuple(payload.get("responses") or ()),
    )


def theta_to_payload(theta: Theta) -> dict:
    return {"beta": [b.tolist() for b in theta.beta], "zeta": theta.zeta.tolist()}


def theta_from_payload(payload: dict) -> Theta:
    return Theta(tuple(np.asarray(b, dtype=float) for b in payload["beta"]),
                 np.asarray(payload.get("zeta") or [], dtype=float))


def write_theta_file(path, spec: ModelSpec, theta: Theta) -> None:
    """Theta as JSON: flat values plus the block layout that disambiguates them."""
    doc = {
        "family": spec.family,
        "odds": spec.odds,
        "n_categories": spec.n_categories,
        "n_covariates": spec.n_covariates,
        "shared": list(spec.shared),
        "theta": theta_to_payload(theta),
        "flat": theta.to_flat().tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_theta_file(path) -> tuple[ModelSpec, Theta]:
    doc = json.loads(Path(path).read_text())
    spec = ModelSpec.build(
        doc["family"], doc["odds"], doc["n_categories"], doc["n_covariates"],
        doc.get("shared"),
    )
    theta = theta_from_payload(doc["theta"])
    theta.validate_for(spec)
    return spec, theta


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON in {path}: {exc}") from exc


def render_manifest(entries: dict) -> str:
    """Key-value text block recording how a stochastic run can be reproduced."""
    width = max((len(k) for k in entries), default=0)
    return "\n".join(f"{k.ljust(width)} : {entries[k]}" for k in entries)
