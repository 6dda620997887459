"""Keypoint-sequence isolated sign language recognition toolkit."""

from .gridsearch import GridEntry, GridResult, GridSpec, run_grid, select_winner
from .heatmap import ActivityGrid, accumulate, concept_similarity, normalize
from .kpseq import (
    FRAME_WIDTH,
    KeypointSequence,
    KpseqError,
    filter_frames,
    parse_kpseq,
    write_kpseq,
)
from .manifest import Manifest, SampleRecord, load_sequences, read_manifest, split_manifest, write_manifest
from .metrics import ConfusionMatrix, Metrics, accuracy, macro_f1
from .nn import (
    AdamState,
    Dims,
    ModelParams,
    adam_step,
    backward,
    cross_entropy,
    forward,
    forward_batch,
    init_params,
    relu,
    softmax,
)
from .synth import DEFAULT_ANCHORS, SynthSpec, default_spec, synth_generate, write_dataset
from .training import (
    EarlyStopper,
    LabeledDataset,
    TrainConfig,
    TrainResult,
    evaluate,
    train,
)
from .transfer import (
    Checkpoint,
    CheckpointMeta,
    TransferScope,
    init_from_source,
    load_checkpoint,
    relative_improvement,
    save_checkpoint,
)

__version__ = "0.1.0"
