"""Closed geodesics, geodesic nets and isoperimetric inequalities on Riemannian 2-spheres."""

from .eigen import (
    SLProblem,
    TransformedSLP,
    eigenvalue_bounds,
    rayleigh_quotient,
    slp_first_eigenvalue,
    taylor_at_pi,
)
from .errors import (
    ChartDomainError,
    ConePointError,
    ConvergenceError,
    DegenerateFunctionError,
    GeoflowError,
    MetricConfigError,
    NonGeodesicError,
    NonStationaryError,
    RefinementError,
    StepTooLargeError,
    UnsupportedVariantError,
)
from .geodesics import (
    DiscreteCurve,
    DistanceField,
    connect,
    diameter_radius,
    distance_field,
    shoot,
)
from .inequalities import GeometryReport, geometry_report, verify_inequalities
from .metric import (
    Chart,
    ConformalRound,
    DoubledTriangle,
    Ellipsoid,
    Round,
    SurfacePoint,
    TangentVector,
    area,
    curvature_extrema,
    gauss_curvature,
    load_metric,
    metric_from_dict,
    metric_tensor,
)
from .shortening import (
    FlowKind,
    FlowOutcome,
    ThetaGraph,
    birkhoff_flow,
    meridian_theta,
    net_flow,
    shortest_closed_geodesic,
    triangle_theta,
)
from .variation import (
    VariationField,
    first_variation,
    second_variation,
    theta_destabilizing_field,
)

__version__ = "0.1.0"
