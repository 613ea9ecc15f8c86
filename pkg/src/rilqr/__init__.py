"""Receding-horizon LQR learned from similar-system data with streaming QR updates."""
from rilqr.errors import (DimensionError, DivergenceError, ExcitationError, ModelMismatchWarning,
                          NonFiniteError, NumericalError, RilqrError)
from rilqr.hankel import HankelStack, SignalRecord, UpdateColumnBuilder, assemble_stack, build_hankel
from rilqr.linalg import (GivensPlan, QrFactorization, pinv_apply, qr_decompose, rank1_qr_update,
                          truncated_svd)
from rilqr.sketch import CompressedStack, SketchConfig, compress_initial, draw_sketch, streaming_update
from rilqr.subspace import (GainMatrix, LqrWeights, RBlocks, SubspaceEstimate, batch_predictors,
                            extract_predictors, extract_rblocks, lqr_gain, oblique_projection)

__version__ = "0.1.0"
