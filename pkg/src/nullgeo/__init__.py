"""Numerical toolkit for the space of null geodesics of chart-based
spacetimes: cogeodesic flow, causal oracles, limit-class detection, and
conjugate-point analysis."""

from .errors import (ClassificationUncertainError, ConfigError,
                     DegenerateInputError, DistanceUncertainError,
                     DomainError, FrameError, NullGeoError, ProtocolError,
                     ResolutionError, TruncationError)
from .geometry import (EUCLID, WICK, AuxMetric, ChartDomain, MetricField,
                       PhaseState, PointExclusion, RegionExclusion,
                       TangentVector, energy, future_null_covector,
                       is_future_null, legendre, legendre_inverse,
                       null_normalize, project_null)
from .flow import (FlowParams, GeodesicSegment, Termination,
                   contact_residuals, exp_map, flow, trace)
from .metrics import (by_name, cylinder_quotient, load_spacetime, minkowski2,
                      minkowski3, minkowski4, parse_config,
                      random_null_states, sphere_product)
from .revolution import (ProfileFunction, band_distance, circle_length,
                         clairaut_constant, classify_geodesic, distance,
                         distance_result, polynomial_profile, sine_profile,
                         surface_metric, surface_unit_state)
from .causality import (CausalRelation, CausalVerdict, ConvergentSequence,
                        LeafFunctions, ProductSpacetime, build_leaf_functions,
                        causal_relation, closedness_probe,
                        horismos_related_2d, leaf_causal, minkowski_leaves)
from .reachability import GridReachability, grid_reachability
from .nullspace import (BallRegion, ConvexPolygonRegion, LimitReport,
                        NullGeodesicClass, ProbeWindow, class_of,
                        hausdorff_witness, intersection_components,
                        limit_classes, same_class, same_class_result)
from .jacobi import (Definiteness, QuotientFrame, QuotientSection,
                     build_quotient_frame, christoffel, conjugate_points,
                     curvature_action, index_form, index_matrix, jacobi_solve,
                     riemann)
from .scenarios import SCENARIOS, Report, run

__version__ = "0.1.0"
