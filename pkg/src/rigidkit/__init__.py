"""Rigidity of pinned subspace-incidence systems and sparse dictionary learning.

The main entry points:

- :func:`combinatorial_check` / :func:`analyze` decide generic minimal rigidity
  from the weighted hypergraph alone, cross-checked by :func:`generic_rank`;
- :func:`solve` and :func:`realize_by_plan` find real frameworks for given pins;
- :func:`learn_random` and :func:`learn_fitted` build sparse dictionaries.
"""
from ._kernels import BACKEND
from .dictlearn import (
    Dataset,
    Dictionary,
    learn_fitted,
    learn_random,
    size_bound,
    verify,
)
from .hypergraph import (
    MultiHypergraph,
    PinnedInstance,
    WeightedHypergraph,
    example_minimal_d3,
    expand,
    parse_instance,
    serialize_instance,
)
from .realize import (
    SolveConfig,
    build_construction,
    drplan,
    incremental_solve,
    max_rigid_subsystem,
    realize_by_plan,
    solve,
)
from .rigidity import (
    Framework,
    analyze,
    assemble,
    combinatorial_check,
    flex_basis,
    generic_rank,
    pure_condition_value,
)
from .sparsity import brute_force_sparse, map_decompose, pebble_game

__version__ = "0.1.0"
