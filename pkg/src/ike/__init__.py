"""Isolation-kernel binary embeddings for compact, fast vector retrieval."""

from .codec import (
    PackedCodes,
    compression_ratio,
    kernel_estimate,
    load_codes,
    match_count,
    pack,
    save_codes,
    scan,
    truncate,
    unpack,
)
from .core import (
    EncodingError,
    EvaluationError,
    FormatError,
    IkeError,
    IkeParams,
    ParameterError,
    derive_nb,
    stream,
    subsample,
)
from .iforest import IForest, build_forest, build_itree, map_point
from .models import build_model, load_model, save_model
from .rplsh import RplshModel, build_rplsh, rplsh_encode
from .voronoi import VdModel, build_vd, map_point_vd

__version__ = "0.1.0"
