"""Reader/writer for the continuous 16-bit EDF / EDF+C subset.

Only what the public sleep corpora need: fixed-width ASCII header, 16-bit
little-endian samples, an optional ``EDF Annotations`` channel carrying
time-stamped annotation lists (TALs).  Discontinuous EDF+D is rejected.
"""

from __future__ import annotations

import re
from collections import defaultdict
from pathlib import Path

import numpy as np

from .types import Annotation, Channel, RawRecording

ANNOTATION_LABEL = "EDF Annotations"

_HEADER_FIELDS = [
    ("version", 8),
    ("patient", 80),
    ("recording", 80),
    ("start_date", 8),
    ("start_time", 8),
    ("header_bytes", 8),
    ("reserved", 44),
    ("n_records", 8),
    ("record_duration", 8),
    ("n_signals", 4),
]
_SIGNAL_FIELDS = [
    ("label", 16),
    ("transducer", 80),
    ("dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefilter", 80),
    ("n_samples", 8),
    ("reserved", 32),
]


class EDFError(ValueError):
    pass


class MalformedHeader(EDFError):
    pass


class TruncatedData(EDFError):
    pass


class UnsupportedFeature(EDFError):
    pass


def _ascii(raw, what):
    try:
        return raw.decode("ascii")
    except UnicodeDecodeError as exc:
        raise MalformedHeader(f"non-ASCII bytes in {what}") from exc


def _number(text, what, kind=float):
    try:
        return kind(text.strip())
    except ValueError as exc:
        raise MalformedHeader(f"field {what} is not numeric: {text.strip()!r}") from exc


def _read_header(buf):
    if len(buf) < 256:
        raise MalformedHeader("file shorter than the 256-byte fixed header")
    pos = 0
    head = {}
    for key, width in _HEADER_FIELDS:
        head[key] = _ascii(buf[pos : pos + width], key)
        pos += width
    if head["version"].strip() != "0":
        raise MalformedHeader(f"version field must be '0', got {head['version']!r}")
    ns = _number(head["n_signals"], "n_signals", int)
    header_bytes = _number(head["header_bytes"], "header_bytes", int)
    if ns < 1 or header_bytes != 256 * (ns + 1):
        raise MalformedHeader(f"header size {header_bytes} inconsistent with {ns} signals")
    if len(buf) < header_bytes:
        raise MalformedHeader("signal header block truncated")
    signals = [dict() for _ in range(ns)]
    for key, width in _SIGNAL_FIELDS:
        for sig in signals:
            sig[key] = _ascii(buf[pos : pos + width], key)
            pos += width
    for i, sig in enumerate(signals):
        for key in ("physical_min", "physical_max"):
            sig[key] = _number(sig[key], f"{key}[{i}]")
        for key in ("digital_min", "digital_max", "n_samples"):
            sig[key] = _number(sig[key], f"{key}[{i}]", int)
        if sig["digital_max"] <= sig["digital_min"]:
            raise MalformedHeader(f"signal {i}: digital_max must exceed digital_min")
        if sig["physical_max"] == sig["physical_min"]:
            raise MalformedHeader(f"signal {i}: physical range is empty")
    return head, signals


_TAL = re.compile(rb"([+-]\d+(?:\.\d*)?)(?:\x15(\d+(?:\.\d*)?))?\x14(.*?)\x14\x00", re.S)


def _parse_tals(raw):
    """Return ``[(onset, duration, [texts])]`` from one record's annotation bytes."""
    out = []
    for onset, duration, body in _TAL.findall(raw):
        texts = [t.decode("utf-8", "replace") for t in body.split(b"\x14") if t]
        out.append((float(onset), float(duration) if duration else 0.0, texts))
    return out


def parse_edf(data: bytes) -> RawRecording:
    """Parse EDF bytes into a :class:`RawRecording` in physical units."""
    buf = bytes(data)
    head, signals = _read_header(buf)
    if head["reserved"].startswith("EDF+D"):
        raise UnsupportedFeature("discontinuous EDF+D recordings are not supported")
    duration = _number(head["record_duration"], "record_duration")
    n_records = _number(head["n_records"], "n_records", int)
    header_bytes = 256 * (len(signals) + 1)
    record_samples = sum(s["n_samples"] for s in signals)
    record_bytes = 2 * record_samples
    available = (len(buf) - header_bytes) // record_bytes if record_bytes else 0
    if n_records == -1:
        n_records = available
    if n_records < 0:
        raise MalformedHeader(f"invalid record count {n_records}")
    if available < n_records or len(buf) - header_bytes < n_records * record_bytes:
        raise TruncatedData(f"header promises {n_records} records, file holds {available}")

    body = np.frombuffer(buf, dtype="<i2", count=n_records * record_samples, offset=header_bytes)
    body = body.reshape(n_records, record_samples)

    channels = []
    annotations = []
    offset = 0
    for sig in signals:
        n = sig["n_samples"]
        block = body[:, offset : offset + n]
        offset += n
        label = sig["label"].strip()
        if label == ANNOTATION_LABEL:
            for rec in block:
                for onset, dur, texts in _parse_tals(rec.tobytes()):
                    for text in texts:
                        annotations.append(Annotation(onset, dur, text))
            continue
        if duration <= 0:
            raise MalformedHeader("data signals need a positive record duration")
        gain = (sig["physical_max"] - sig["physical_min"]) / (sig["digital_max"] - sig["digital_min"])
        digital = block.reshape(-1).astype(np.float64)
        physical = (digital - sig["digital_min"]) * gain + sig["physical_min"]
        channels.append(
            Channel(
                name=label,
                samples=physical,
                rate_hz=n / duration,
                physical_min=sig["physical_min"],
                physical_max=sig["physical_max"],
                digital_min=sig["digital_min"],
                digital_max=sig["digital_max"],
                dimension=sig["dimension"].strip(),
                transducer=sig["transducer"].strip(),
                prefilter=sig["prefilter"].strip(),
            )
        )
    return RawRecording(
        channels=channels,
        annotations=annotations,
        patient=head["patient"].strip(),
        recording=head["recording"].strip(),
        start_date=head["start_date"].strip(),
        start_time=head["start_time"].strip(),
        record_duration_s=duration,
    )


def read_edf(path) -> RawRecording:
    return parse_edf(Path(path).read_bytes())


# ---------------------------------------------------------------- writing


def _field(value, width):
    text = value if isinstance(value, str) else _fmt_number(value)
    if len(text) > width:
        raise ValueError(f"value {text!r} does not fit in {width} characters")
    return text.ljust(width).encode("ascii")


def _fmt_number(x):
    if float(x).is_integer():
        return str(int(x))
    text = repr(float(x))
    return text if len(text) <= 8 else f"{x:.8g}"[:8]


def _calibration(ch):
    if ch.physical_min is not None:
        return ch.physical_min, ch.physical_max, ch.digital_min, ch.digital_max
    # symmetric range, rounded up so it fits the 8-character field
    m = float(np.max(np.abs(ch.samples))) or 1.0
    nice = float(f"{m:.3g}")
    while nice < m or len(_fmt_number(-nice)) > 8:
        nice = float(f"{nice * 1.01:.3g}")
    return -nice, nice, -32768, 32767


def _digitize(ch, pmin, pmax, dmin, dmax):
    gain = (pmax - pmin) / (dmax - dmin)
    digital = np.round((ch.samples - pmin) / gain + dmin)
    return np.clip(digital, dmin, dmax).astype("<i2")


def _tal_bytes(onset, duration, texts):
    head = f"{onset:+g}".encode()
    if duration:
        head += b"\x15" + _fmt_number(duration).encode()
    return head + b"\x14" + b"".join(t.encode("utf-8") + b"\x14" for t in texts) + b"\x00"


def write_edf(rec: RawRecording, record_duration_s=None) -> bytes:
    """Serialise ``rec`` as EDF (EDF+C when it carries annotations).

    Samples are quantised with each channel's stored calibration, so a file
    produced by :func:`parse_edf` is written back with identical digital
    values.
    """
    dur = float(record_duration_s or rec.record_duration_s)
    data_channels = list(rec.channels)
    per_record = []
    for ch in data_channels:
        n = ch.rate_hz * dur
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"channel {ch.name!r}: rate {ch.rate_hz} gives fractional samples per record")
        per_record.append(int(round(n)))
    n_records = min(len(ch.samples) // n for ch, n in zip(data_channels, per_record))

    with_annotations = bool(rec.annotations)
    tal_records = []
    if with_annotations:
        by_record = defaultdict(list)
        for ann in rec.annotations:
            idx = min(int(ann.onset_s // dur), n_records - 1)
            by_record[idx].append(ann)
        for r in range(n_records):
            raw = f"{r * dur:+g}".encode() + b"\x14\x14\x00"
            for ann in by_record.get(r, []):
                raw += _tal_bytes(ann.onset_s, ann.duration_s, [ann.label])
            tal_records.append(raw)
        ann_samples = max(len(t) for t in tal_records) // 2 + 1

    ns = len(data_channels) + (1 if with_annotations else 0)
    reserved = "EDF+C" if with_annotations else ""
    header = b"".join(
        [
            _field("0", 8),
            _field(rec.patient or "X X X X", 80),
            _field(rec.recording or "Startdate X X X X", 80),
            _field(rec.start_date, 8),
            _field(rec.start_time, 8),
            _field(str(256 * (ns + 1)), 8),
            _field(reserved, 44),
            _field(str(n_records), 8),
            _field(_fmt_number(dur), 8),
            _field(str(ns), 4),
        ]
    )
    cal = [_calibration(ch) for ch in data_channels]
    rows = {
        "label": [ch.name for ch in data_channels],
        "transducer": [ch.transducer for ch in data_channels],
        "dimension": [ch.dimension for ch in data_channels],
        "physical_min": [_fmt_number(c[0]) for c in cal],
        "physical_max": [_fmt_number(c[1]) for c in cal],
        "digital_min": [str(c[2]) for c in cal],
        "digital_max": [str(c[3]) for c in cal],
        "prefilter": [ch.prefilter for ch in data_channels],
        "n_samples": [str(n) for n in per_record],
        "reserved": ["" for _ in data_channels],
    }
    if with_annotations:
        extra = {
            "label": ANNOTATION_LABEL,
            "transducer": "",
            "dimension": "",
            "physical_min": "-1",
            "physical_max": "1",
            "digital_min": "-32768",
            "digital_max": "32767",
            "prefilter": "",
            "n_samples": str(ann_samples),
            "reserved": "",
        }
        for key in rows:
            rows[key].append(extra[key])
    for key, width in _SIGNAL_FIELDS:
        header += b"".join(_field(v, width) for v in rows[key])

    digital = [
        _digitize(ch, *c)[: n_records * n].reshape(n_records, n)
        for ch, c, n in zip(data_channels, cal, per_record)
    ]
    blocks = []
    for r in range(n_records):
        for d in digital:
            blocks.append(d[r].tobytes())
        if with_annotations:
            blocks.append(tal_records[r].ljust(2 * ann_samples, b"\x00"))
    return header + b"".join(blocks)


def save_edf(path, rec: RawRecording, record_duration_s=None):
    Path(path).write_bytes(write_edf(rec, record_duration_s))


def merge_hypnogram(psg: RawRecording, hypnogram: RawRecording) -> RawRecording:
    """Attach the annotations of a separate hypnogram file to a PSG recording.

    Hypnogram entries starting after the end of the signal are dropped.
    """
    end = psg.duration_s
    return RawRecording(
        channels=psg.channels,
        annotations=list(psg.annotations) + [a for a in hypnogram.annotations if a.onset_s <= end],
        patient=psg.patient,
        recording=psg.recording,
        start_date=psg.start_date,
        start_time=psg.start_time,
        record_duration_s=psg.record_duration_s,
    )
