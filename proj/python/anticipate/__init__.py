# SPDX-License-Identifier: Apache-2.0
"""Action anticipation: RNN and CNN models, baselines and metrics."""

from ._core import (
    ConsistencyError,
    Corpus,
    CnnPredictor,
    GrammarBaseline,
    InputError,
    NearestNeighborBaseline,
    NumericalError,
    Predictor,
    RecursionLimitError,
    RnnPredictor,
    action_level_accuracy,
    encode_matrix,
    evaluate,
    fraction_of,
    frames_from_segments,
    generate_synthetic,
    interval_iou,
    load_corpus,
    load_model,
    load_split,
    moc,
    segments_from_frames,
    split_observation,
    toy_gradcheck,
    train_cnn,
    train_rnn,
)

__version__ = "0.1.0"
