"""Certified collision-risk bounds between robot links and uncertain obstacles."""
from .certify import (CertificationError, CertifiedBound, LinkSet, Method, RiskReport, aggregate,
                      certify, certify_one_shot, certify_scene, certify_two_shot)
from .chi2 import chi2_cdf, chi2_inv, chi2_isf, chi2_sf
from .geometry import (Box, ConvexBody, Cylinder, GeometryError, MinkowskiSum, Polytope, Pose, Posed,
                       Sphere, covariance_ellipsoid, half_ellipsoid, minkowski_sum, point, posed, support)
from .gjk import GJKError, ProximityResult, contact_normal_into, distance, intersects
from .oracle import McEstimate, OracleError, mc_collision_probability, mc_shadow_mass
from .scene import (Link, Scene, SceneError, SceneObstacle, dump_scene, gen_ring_scene, load_scene,
                    parse_scene, scale_covariances)
from .shadow import ShadowKind, ShadowSpec, UncertainObstacle, full_shadow, half_shadow, shadow

__version__ = "0.1.0"
