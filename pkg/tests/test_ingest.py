import numpy as np
import pytest

from mass_staging.ingest import (
    Annotation,
    Channel,
    ChannelNotFound,
    MalformedHeader,
    NoScoredEpochs,
    NonPositiveRate,
    RawRecording,
    StageLabel,
    TruncatedData,
    UnsupportedFeature,
    merge_hypnogram,
    normalize_label,
    parse_edf,
    read_csv_recording,
    resample_100hz,
    segment_epochs,
    synth_dataset,
    to_recording,
    write_csv_recording,
    write_edf,
)
from mass_staging.ingest.synth import SIGNATURE_BANDS
from mass_staging.spectral import batch_psd


def hand_built_edf(n_signals_declared, samples_per_record, records, reserved=""):
    """EDF bytes assembled field by field, independent of the writer."""

    def f(text, width):
        return text.ljust(width).encode("ascii")

    ns = n_signals_declared
    head = (
        f("0", 8)
        + f("X X X X", 80)
        + f("Startdate X", 80)
        + f("01.01.00", 8)
        + f("00.00.00", 8)
        + f(str(256 * (ns + 1)), 8)
        + f(reserved, 44)
        + f(str(len(records)), 8)
        + f("1", 8)
        + f(str(ns), 4)
    )
    for key, width, value in [
        ("label", 16, "EEG"),
        ("transducer", 80, ""),
        ("dim", 8, "V"),
        ("pmin", 8, "-1"),
        ("pmax", 8, "1"),
        ("dmin", 8, "-32768"),
        ("dmax", 8, "32767"),
        ("prefilter", 80, ""),
        ("n", 8, str(samples_per_record)),
        ("reserved", 32, ""),
    ]:
        head += f(value, width) * ns
    body = b"".join(np.asarray(r, dtype="<i2").tobytes() for r in records)
    return head + body


# ---------------------------------------------------------------- EDF


def test_edf_midpoint_maps_to_zero():
    rec = parse_edf(hand_built_edf(1, 4, [[0, 0, 32767, -32768]]))
    ch = rec.channels[0]
    step = 2.0 / 65535
    assert ch.rate_hz == 4
    assert abs(ch.samples[0]) <= step
    assert ch.samples[2] == pytest.approx(1.0)
    assert ch.samples[3] == pytest.approx(-1.0)


def test_edf_declared_channels_without_data():
    # header declares two channels, data holds only one channel's record
    with pytest.raises(TruncatedData):
        parse_edf(hand_built_edf(2, 4, [[1, 2, 3, 4]]))


def test_edf_rejects_discontinuous():
    with pytest.raises(UnsupportedFeature):
        parse_edf(hand_built_edf(1, 4, [[0, 0, 0, 0]], reserved="EDF+D"))


@pytest.mark.parametrize(
    "mutate",
    [
        lambda b: b[:100],
        lambda b: b"1" + b[1:],  # version
        lambda b: b[:236] + b"abcd    " + b[244:],  # record count
        lambda b: b[:184] + b"999     " + b[192:],  # header bytes
    ],
)
def test_edf_malformed_header(mutate):
    with pytest.raises(MalformedHeader):
        parse_edf(mutate(hand_built_edf(1, 4, [[0, 0, 0, 0]])))


def _generated_recording(seed=0):
    rng = np.random.default_rng(seed)
    chans = [
        Channel("EEG Fpz-Cz", rng.normal(scale=30, size=3000 * 3), 100.0, dimension="uV"),
        Channel("EEG Pz-Oz", rng.normal(scale=10, size=3000 * 3), 100.0, dimension="uV"),
    ]
    ann = [
        Annotation(0.0, 30.0, "Sleep stage W"),
        Annotation(30.0, 60.0, "Sleep stage 2"),
    ]
    return RawRecording(chans, ann, record_duration_s=30.0)


def test_edf_roundtrip_bit_exact():
    first = parse_edf(write_edf(_generated_recording()))
    blob = write_edf(first)
    second = parse_edf(blob)
    for a, b in zip(first.channels, second.channels):
        assert a.name == b.name
        np.testing.assert_array_equal(a.samples, b.samples)
    assert write_edf(second) == blob
    assert [(a.onset_s, a.duration_s, a.label) for a in second.annotations] == [
        (0.0, 30.0, "Sleep stage W"),
        (30.0, 60.0, "Sleep stage 2"),
    ]


def test_edf_quantisation_error_within_one_step():
    src = _generated_recording(1)
    back = parse_edf(write_edf(src))
    for a, b in zip(src.channels, back.channels):
        step = (b.physical_max - b.physical_min) / (b.digital_max - b.digital_min)
        assert np.max(np.abs(a.samples - b.samples)) <= step / 2 + 1e-12


def test_hypnogram_merge():
    psg = _generated_recording()
    hyp = RawRecording([], [Annotation(0.0, 90.0, "Sleep stage 3"), Annotation(500.0, 30.0, "Sleep stage ?")])
    merged = merge_hypnogram(RawRecording(psg.channels, []), hyp)
    assert [a.label for a in merged.annotations] == ["Sleep stage 3"]


# ---------------------------------------------------------------- CSV


def test_csv_roundtrip(tmp_path):
    rec = _generated_recording()
    write_csv_recording(rec, tmp_path / "sig.csv", tmp_path / "lab.csv", labels=[0, 2, 2])
    back = read_csv_recording(tmp_path / "sig.csv", tmp_path / "lab.csv")
    assert [c.name for c in back.channels] == ["EEG Fpz-Cz", "EEG Pz-Oz"]
    np.testing.assert_array_equal(back.channels[0].samples, rec.channels[0].samples)
    assert [a.label for a in back.annotations] == ["W", "N2", "N2"]
    assert (tmp_path / "sig.csv").read_text().splitlines()[0] == "rate_hz,n_channels"


# ---------------------------------------------------------------- resampling


def test_resample_dc_200hz():
    y = resample_100hz(np.ones(6000), 200)
    assert len(y) == 3000
    np.testing.assert_allclose(y[50:-50], 1.0, atol=1e-6)


@pytest.mark.parametrize("rate", [125, 200, 250, 128, 256])
def test_resample_dc_preserved_any_rate(rate):
    n = int(rate * 40)
    y = resample_100hz(np.full(n, -3.5), rate)
    assert len(y) == round(n * 100 / rate)
    np.testing.assert_allclose(y[100:-100], -3.5, atol=1e-6)


def test_resample_identity():
    x = np.random.default_rng(0).normal(size=777)
    np.testing.assert_array_equal(resample_100hz(x, 100), x)


def test_resample_tone_peak_bin():
    t = np.arange(125 * 60) / 125
    y = resample_100hz(np.sin(2 * np.pi * 12.5 * t), 125)
    assert len(y) == 6000
    seg = y[3000:3256]
    spectrum = np.abs(np.fft.rfft(seg * np.hanning(256)))
    assert int(np.argmax(spectrum)) == 32


@pytest.mark.parametrize("rate,freq", [(200, 7.3), (125, 21.0), (250, 40.0), (200, 2.0)])
def test_resample_tone_within_one_bin(rate, freq):
    t = np.arange(rate * 60) / rate
    y = resample_100hz(np.sin(2 * np.pi * freq * t), rate)
    spectrum = np.abs(np.fft.rfft(y[2000:2256] * np.hanning(256)))
    assert abs(int(np.argmax(spectrum)) - freq * 256 / 100) <= 1


def test_resample_bad_rate():
    with pytest.raises(NonPositiveRate):
        resample_100hz(np.ones(10), 0)


# ---------------------------------------------------------------- labels and epoching


@pytest.mark.parametrize(
    "text,expected",
    [
        ("Sleep stage W", StageLabel.W),
        ("Sleep stage 1", StageLabel.N1),
        ("Sleep stage 4", StageLabel.N3),
        ("N4", StageLabel.N3),
        ("Sleep stage R", StageLabel.REM),
        ("REM", StageLabel.REM),
    ],
)
def test_normalize_label(text, expected):
    assert normalize_label(text) == expected


def test_normalize_excluded_and_other():
    assert normalize_label("Sleep stage ?") == "EXCLUDED"
    assert normalize_label("Movement time") == "EXCLUDED"
    assert normalize_label("Lights off") is None


def _scored(labels, rate=100.0, extra_s=0.0):
    n = len(labels)
    x = np.arange(int((n * 30 + extra_s) * rate), dtype=np.float64)
    ann = [Annotation(30.0 * i, 30.0, lab) for i, lab in enumerate(labels)]
    return RawRecording([Channel("EEG", x, rate)], ann)


def test_segment_drops_unknown():
    rec = _scored(["W"] * 10 + ["N1", "?", "N2"])
    sig = segment_epochs(rec, "EEG")
    assert len(sig) == 12
    assert list(sig.labels) == [0] * 10 + [1, 2]
    assert sig.epochs.shape == (12, 3000)
    # the kept N2 epoch is the 13th on the grid
    assert sig.epochs[-1, 0] == 12 * 3000


def test_segment_merges_n4():
    sig = segment_epochs(_scored(["W", "Sleep stage 4", "N3"]), "EEG")
    assert list(sig.labels) == [StageLabel.W, StageLabel.N3, StageLabel.N3]


def test_segment_trims_wake_to_thirty_minutes():
    labels = ["W"] * 180 + ["N2"] * 5 + ["W"] * 100
    sig = segment_epochs(_scored(labels), "EEG")
    first_sleep = int(np.argmax(sig.labels != StageLabel.W))
    assert first_sleep == 60
    assert len(sig) == 60 + 5 + 60


def test_segment_short_context_kept():
    sig = segment_epochs(_scored(["W"] * 7 + ["N1"] * 3 + ["W"] * 2), "EEG")
    assert len(sig) == 12


def test_segment_discards_partial_epoch():
    sig = segment_epochs(_scored(["W", "N1", "N2"], extra_s=17.0), "EEG")
    assert len(sig) == 3


def test_segment_resamples_and_snaps():
    x = np.zeros(200 * 90)
    rec = RawRecording([Channel("EEG", x, 200.0)], [Annotation(0.0, 30.0, "W"), Annotation(31.0, 60.0, "N2")])
    sig = segment_epochs(rec, "EEG")
    assert len(sig) == 3
    assert sig.snapped_annotations == 1


def test_segment_errors():
    rec = _scored(["W", "N1"])
    with pytest.raises(ChannelNotFound):
        segment_epochs(rec, "EOG")
    with pytest.raises(NoScoredEpochs):
        segment_epochs(RawRecording(rec.channels, [Annotation(0, 30, "Lights off")]), "EEG")


def test_recording_invariants():
    with pytest.raises(ValueError):
        Channel("x", np.array([]), 100.0)
    with pytest.raises(ValueError):
        Channel("x", np.ones(3), 0.0)
    with pytest.raises(ValueError):
        RawRecording([Channel("x", np.ones(100), 100.0)], [Annotation(5.0, 30.0, "W")])


# ---------------------------------------------------------------- synthetic data


def test_synth_deterministic():
    a = synth_dataset(7, 2, 10)
    b = synth_dataset(7, 2, 10)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.epochs, y.epochs)
        np.testing.assert_array_equal(x.labels, y.labels)
    assert not np.array_equal(a[0].epochs, synth_dataset(8, 2, 10)[0].epochs)


def test_synth_shapes():
    data = synth_dataset(0, 3, 5)
    assert len(data) == 3
    assert all(d.epochs.shape == (5, 3000) for d in data)
    with pytest.raises(ValueError):
        synth_dataset(0, 1, 2)


@pytest.mark.parametrize("seed", range(20))
def test_synth_covers_all_classes(seed):
    for rec in synth_dataset(seed, 2, 100):
        assert set(rec.labels.tolist()) == {0, 1, 2, 3, 4}


def test_synth_has_transitions():
    labels = np.concatenate([r.labels for r in synth_dataset(3, 4, 128)])
    changes = np.mean(labels[1:] != labels[:-1])
    assert 0.03 < changes < 0.25


def test_synth_signature_bands_separated():
    recs = synth_dataset(7, 4, 128)
    psd = np.concatenate([batch_psd(r.epochs) for r in recs])
    labels = np.concatenate([r.labels for r in recs])
    freqs = np.arange(128) * 100 / 256
    for a, (lo, hi) in SIGNATURE_BANDS.items():
        band = (freqs >= lo) & (freqs <= hi)
        own = psd[labels == a][..., band].mean()
        for b in SIGNATURE_BANDS:
            if b != a:
                other = psd[labels == b][..., band].mean()
                assert own - other >= 6.0, (a, b, own - other)


def test_to_recording_roundtrip_through_edf():
    sig = synth_dataset(1, 1, 6)[0]
    rec = parse_edf(write_edf(to_recording(sig)))
    back = segment_epochs(rec, "EEG Fpz-Cz")
    np.testing.assert_array_equal(back.labels, sig.labels)
    step = 2 * np.abs(sig.epochs).max() / 65535
    assert np.max(np.abs(back.epochs - sig.epochs)) < step
