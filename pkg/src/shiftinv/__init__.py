"""Shift-invariant dictionary learning with circulant structure.

Learners for a single circulant (:func:`cdla_fit`), unions of circulants
(:func:`ucirc_fit`, :func:`ucdla_block_fit`), unions of short convolutions
(:func:`uconv_fit`) and wavelet-like cascades (:func:`wdla_fit`), together
with the FFT, Toeplitz and sparse-coding building blocks they share.
"""

from .circulant import (
    CdlaState,
    cdla_fit,
    cdla_min_error,
    cdla_spectrum_update,
    nearest_circulant,
    union_apply,
    union_matrix,
)
from .data import (
    GroundTruth,
    SyntheticSpec,
    ecg_segments,
    gen_synthetic,
    image_patches,
    patches_to_image,
    procedural_images,
    remove_dc,
    synthetic_ecg,
)
from .metrics import (
    matched_scores,
    metric_epsilon,
    metric_recovery,
    metric_utilization,
    peak_mass,
    shift_correlations,
)
from .report import FitReport
from .solvers import (
    BlockToeplitzGram,
    CGResult,
    DivergenceError,
    NotPositiveDefiniteError,
    SymToeplitz,
    block_gram_solve,
    cg_solve,
    levinson_solve,
    toeplitz_col_from_weights,
)
from .sparse import DictionaryNormError, ShiftMask, SparseCode, omp, omp_batch, project_topk
from .spectral import (
    CirculantOperator,
    Spectrum,
    circulant_apply,
    circulant_matrix,
    embed_conv,
    fft_columns,
    hermitian_mirror,
    ifft_columns,
    shift_vector,
)
from .uconv import ConvGramSystem, UnionConvDict, assemble_gram, assemble_rhs, single_conv_update, uconv_fit
from .ucirc import (
    UnionCirculantDict,
    per_bin_ls_update,
    rescue_unused_block,
    ucdla_block_fit,
    ucirc_fit,
    union_spectra_update,
)
from .wavelet import (
    WaveletConfigError,
    WaveletDict,
    WaveletStage,
    check_wavelet_config,
    d4_filters,
    haar_filters,
    stage_ls_update,
    wavelet_apply,
    wdla_fit,
)

__version__ = "0.1.0"
