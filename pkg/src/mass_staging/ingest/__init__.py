from .csvio import CSVFormatError, read_csv_recording, read_label_sidecar, write_csv_recording
from .edf import (
    MalformedHeader,
    TruncatedData,
    UnsupportedFeature,
    merge_hypnogram,
    parse_edf,
    read_edf,
    save_edf,
    write_edf,
)
from .epochs import EPOCH_SAMPLES, segment_epochs, to_recording
from .resample import NonPositiveRate, resample_100hz
from .synth import synth_dataset
from .types import (
    NUM_CLASSES,
    Annotation,
    Channel,
    ChannelNotFound,
    EpochedSignal,
    NoScoredEpochs,
    RawRecording,
    StageLabel,
    normalize_label,
)
