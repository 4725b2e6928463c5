"""Toolkit linking natural scene statistics, sampled algorithmic
complexity, and human randomness judgments.

Pipeline: scan a grayscale corpus into binary patch frequencies, score
each patch's natural randomness against chance, estimate algorithmic
complexity of small patches by sampling two-dimensional Turing machines
(composed via block decomposition for larger patches), collect
random/not-random judgments through an HTTP experiment, and relate the
three measures with a standardized mediation analysis.
"""

from scenestat.complexity import (
    BdmParams,
    CtmTable,
    TuringMachine2D,
    bdm,
    load_ctm_table,
    run_machine,
    sample_ctm,
    save_ctm_table,
)
from scenestat.experiment import ExperimentStore, StimulusSet, sample_stimuli
from scenestat.grid import (
    BitGrid,
    FrequencyTable,
    GrayImage,
    Pattern,
    binarize_median,
    chance_probability,
    extract_patches,
    load_pgm,
    natural_randomness,
    save_pgm,
    scan_corpus,
)
from scenestat.stats import (
    JudgmentAggregate,
    MediationReport,
    RegressionFit,
    mediation,
    ols,
    pearson,
    sobel,
    standardize,
    subjective_randomness,
)

__all__ = [
    "BdmParams",
    "BitGrid",
    "CtmTable",
    "ExperimentStore",
    "FrequencyTable",
    "GrayImage",
    "JudgmentAggregate",
    "MediationReport",
    "Pattern",
    "RegressionFit",
    "StimulusSet",
    "TuringMachine2D",
    "bdm",
    "binarize_median",
    "chance_probability",
    "extract_patches",
    "load_ctm_table",
    "load_pgm",
    "mediation",
    "natural_randomness",
    "ols",
    "pearson",
    "run_machine",
    "sample_ctm",
    "sample_stimuli",
    "save_ctm_table",
    "save_pgm",
    "scan_corpus",
    "sobel",
    "standardize",
    "subjective_randomness",
]

__version__ = "0.1.0"
