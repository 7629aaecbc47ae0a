"""wskit: weight-space symmetry toolkit for MLPs."""

from .canonize import BiasRanks, CanonResult, bias_ranks, canon, canon_features, neuron_id_map
from .core import (
    ACTIVATIONS,
    Architecture,
    FlatVector,
    GroupElement,
    WeightElement,
    act,
    compose,
    entry_index,
    enumerate_group,
    flatten,
    from_json_dict,
    from_matrices,
    identity,
    inverse,
    is_general_position,
    load_weights,
    random_group_element,
    random_weights,
    realize,
    save_weights,
    unflatten,
    validate,
    zeros,
)
from .errors import *  # noqa: F401,F403
from .graphs import GMN, NG, NeuralGraph, WLColoring, build_graph, relabel, wl_distinguishable, wl_refine

__version__ = "0.1.0"
