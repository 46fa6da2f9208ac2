"""Adversarial instance generation and evaluation for square orders."""

from .adversary import (
    AttackReport,
    Backtrack,
    BacktrackAtlas,
    BacktrackingSet,
    LineSample,
    Params,
    SpiralChain,
    ZigzagResult,
    backtracking_set,
    build_atlas,
    default_params,
    estimate_sigma_expectation,
    find_backtrack,
    passes_through,
    radial_ray,
    run_case_dichotomy,
    sample_line,
    sample_lines,
    secant_observation_check,
    spiral_chain,
    verify_backtrack,
    zigzag_set,
)
from .cyclewalk import (
    Confined,
    CycleWalk,
    OscillationTag,
    ZigZag,
    classify_times,
    dichotomy,
    make_walk,
    read_walk,
    validate_outcome,
    write_walk,
)
from .geometry import (
    AngleIndex,
    DiscreteLine,
    DyadicSquare,
    OrientedRect,
    Point,
    Ray,
    Segment,
    Strip,
    clip_line_to_square,
    dist,
    dyadic_squares,
    point_line_distance,
    rect_contains,
    segment_hausdorff_within,
)
from .orders import GridSpec, OrderOracle, load_order_file, make_oracle, oracle_from_ranks
from .tsp import (
    RatioReport,
    cost_under_order,
    measure_order_ratio,
    tsp_exact_path,
    tsp_lower_mst,
    tsp_upper_heuristic,
    tsp_upper_tour,
)

__version__ = "0.1.0"
