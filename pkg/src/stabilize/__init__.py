"""Constructive invertible corona solutions for real-symmetric Blaschke data.

Given two real-symmetric finite Blaschke products f1, f2 on the upper
half-plane satisfying the corona condition (inf |f1|+|f2| > 0) and the
single-sign condition on the axis sublevel set of f2, the pipeline
constructs bounded analytic g1, g2 with g1 invertible and
f1 g1 + f2 g2 = 1, and verifies the quantitative ingredients of the
construction along the way.
"""

from .blaschke import (
    AxisIntervalSet,
    BlaschkeProduct,
    CoronaPair,
    axis_sign_condition,
    axis_sublevel_intervals,
    corona_delta,
    corona_delta_details,
    load_zero_file,
    log_modulus_bounds,
    make_corona_pair,
    symmetrize_samples,
    transfer,
)
from .carleson import (
    CarlesonDecomposition,
    CarlesonSquare,
    PointMassMeasure,
    build_generations,
    carleson_intensity,
    region_boundary_length,
    stopping_intervals,
)
from .slits import (
    Pairing,
    Slit,
    SlitSystem,
    build_slits,
    classify_and_pair,
    neighborhood_census,
)
from .fields import (
    GridField,
    assemble_v,
    field_calculus,
    make_grid,
    mollify,
    summand_phi,
)
from .dbar import make_kappa, solve_dbar, verify_dbar
from .pipeline import (
    StabilizationReport,
    assemble_solution,
    bezout_oracle,
    check_necessity,
    interpolate_symmetric,
    run_pipeline,
    verify_solution,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
