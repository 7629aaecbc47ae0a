"""Reference layer implementations for weight-space architectures."""

from .dws import *  # noqa: F401,F403
from .dws import __all__ as _dws_all
from .mlp import MLPSpec, linear_mlp, mlp_from_layers, projection_mlp, random_mlp, zero_mlp
from .mpnn import gmn_layer, ng_layer
from .nfn import nfn_positional_encoding, pe_types, strip_positional_encoding
from .nft import (
    AttentionSummand,
    NFTParams,
    PoolParams,
    attend,
    layer_encoding,
    layernorm,
    nft_attention,
    nft_block,
    nft_pool,
    nft_self_attention,
    random_nft_params,
    threshold_mlp,
    uniform_pool,
)

__all__ = list(_dws_all) + [
    "MLPSpec",
    "linear_mlp",
    "mlp_from_layers",
    "projection_mlp",
    "random_mlp",
    "zero_mlp",
    "gmn_layer",
    "ng_layer",
    "nfn_positional_encoding",
    "pe_types",
    "strip_positional_encoding",
    "AttentionSummand",
    "NFTParams",
    "PoolParams",
    "attend",
    "layer_encoding",
    "layernorm",
    "nft_attention",
    "nft_block",
    "nft_pool",
    "nft_self_attention",
    "random_nft_params",
    "threshold_mlp",
    "uniform_pool",
]
