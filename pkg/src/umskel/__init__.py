"""Ultrametric skeletons and regular subsets of finite metric-measure spaces."""
from __future__ import annotations

from .generators import GeneratorSpec, gen_cantor, gen_grid, gen_random_doubling, gen_sierpinski
from .metric import (MetricMeasureSpace, RegularityProfile, ValidationReport, ball, doubling_upper,
                     mu_delta, set_diameter, set_distance, validate_metric)
from .nettree import (NetTree, assign_partial_boundaries, build_net_tree, delta_descendants,
                      verify_net_tree, verify_partial_boundaries)
from .oracles import oracle_check_ramsey
from .pipeline import (ExtractionReport, dvoretzky_extract, estimate_regularity, extract_beta_regular_um,
                       extract_near_alpha, um_skeleton, verify_growth, verify_shrink)
from .ramsey import RamseyResult, check_corollary, ramsey_decompose
from .skeleton import SkeletonNode, SkeletonTree, build_skeleton, verify_skeleton
from .trim import (SkeletonMeasure, TrimmedTree, WeightedTree, effective_delta, induce_measure,
                   trim_balanced, ultrametric_of)

__all__ = [
    "GeneratorSpec", "gen_cantor", "gen_grid", "gen_random_doubling", "gen_sierpinski",
    "MetricMeasureSpace", "RegularityProfile", "ValidationReport", "ball", "doubling_upper",
    "mu_delta", "set_diameter", "set_distance", "validate_metric",
    "NetTree", "assign_partial_boundaries", "build_net_tree", "delta_descendants",
    "verify_net_tree", "verify_partial_boundaries", "oracle_check_ramsey",
    "ExtractionReport", "dvoretzky_extract", "estimate_regularity", "extract_beta_regular_um",
    "extract_near_alpha", "um_skeleton", "verify_growth", "verify_shrink",
    "RamseyResult", "check_corollary", "ramsey_decompose",
    "SkeletonNode", "SkeletonTree", "build_skeleton", "verify_skeleton",
    "SkeletonMeasure", "TrimmedTree", "WeightedTree", "effective_delta", "induce_measure",
    "trim_balanced", "ultrametric_of",
]
