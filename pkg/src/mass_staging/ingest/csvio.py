"""Plain CSV container for recordings.

Signal file::

    rate_hz,n_channels
    100,2
    # names: EEG Fpz-Cz,EEG Pz-Oz        (optional)
    <one row per sample, one column per channel>

Label sidecar::

    epoch_index,label
    0,W
    1,N1
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .epochs import EPOCH_S
from .types import Annotation, Channel, RawRecording, StageLabel


class CSVFormatError(ValueError):
    pass


def read_csv_recording(signal_path, labels_path=None) -> RawRecording:
    lines = Path(signal_path).read_text().splitlines()
    if len(lines) < 3 or lines[0].replace(" ", "") != "rate_hz,n_channels":
        raise CSVFormatError("first line must be 'rate_hz,n_channels'")
    try:
        rate_text, n_text = lines[1].split(",")
        rate, n_channels = float(rate_text), int(n_text)
    except ValueError as exc:
        raise CSVFormatError(f"bad header values: {lines[1]!r}") from exc
    body = lines[2:]
    names = [f"ch{i}" for i in range(n_channels)]
    if body and body[0].startswith("#"):
        text = body[0].lstrip("#").strip()
        if text.startswith("names:"):
            names = [n.strip() for n in text[len("names:") :].split(",")]
        body = body[1:]
    if len(names) != n_channels:
        raise CSVFormatError(f"{len(names)} names for {n_channels} channels")
    data = np.loadtxt(body, delimiter=",", ndmin=2, dtype=np.float64)
    if data.shape[1] != n_channels:
        raise CSVFormatError(f"expected {n_channels} columns, got {data.shape[1]}")
    channels = [Channel(name, data[:, i], rate) for i, name in enumerate(names)]
    annotations = read_label_sidecar(labels_path) if labels_path else []
    return RawRecording(channels, annotations)


def read_label_sidecar(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["epoch_index", "label"]:
            raise CSVFormatError("label sidecar header must be 'epoch_index,label'")
        return [Annotation(int(row["epoch_index"]) * EPOCH_S, EPOCH_S, row["label"].strip()) for row in reader]


def write_csv_recording(rec: RawRecording, signal_path, labels_path=None, labels=None):
    """Write ``rec``; ``labels`` (per-epoch StageLabel values) go to the sidecar."""
    rates = {c.rate_hz for c in rec.channels}
    if len(rates) != 1:
        raise CSVFormatError("CSV container needs a single common sample rate")
    n = min(len(c.samples) for c in rec.channels)
    data = np.stack([c.samples[:n] for c in rec.channels], axis=1)
    with open(signal_path, "w") as fh:
        fh.write("rate_hz,n_channels\n")
        fh.write(f"{rates.pop():g},{len(rec.channels)}\n")
        fh.write("# names: " + ",".join(c.name for c in rec.channels) + "\n")
        np.savetxt(fh, data, delimiter=",", fmt="%.17g")
    if labels_path is not None and labels is not None:
        with open(labels_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch_index", "label"])
            for i, lab in enumerate(labels):
                w.writerow([i, StageLabel(int(lab)).name])
