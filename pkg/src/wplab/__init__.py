"""Numerical laboratory for energies of equivariant harmonic maps between hyperbolic surfaces."""

from .errors import (ConfigError, CurveError, DegenerateDifferential, IllResolvedDegree, InvalidArgument,
                     MapOutOfRange, MeshError, NonConvergence, OutOfRange, SolverError, WplabError)
from .disk import MoebiusTransform, conformal_factor, distance
from .surface import FuchsianSurface, Homomorphism, build_cyclic_cover, build_surface, twisted_surface
from .mesh import TriangulatedDomain, hyperbolic_area, read_mesh, triangulate, write_mesh
from .qdiff import (HarmonicBeltrami, QuadraticDifferential, beltrami_from_q, poincare_series, qb_pairing,
                    wp_norm_sq, zero_differential)
from .wolf import WolfMetricFamily, assemble_laplacian, metric_at, solve_alpha, volume_element
from .harmonic import (EnergyReport, EquivariantMap, SolverConfig, degree, energy, energy_density,
                       hopf_differential, identity_map, minimize, read_map, tension_gradient, write_map)
from .jacobi import BundleOneForm, BundleSection, JacobiSystem
from .variation import (CertificationReport, EnergyCurve, Scenario, certify_critical, covering_certificate,
                        covering_scenario, energy_curve, first_variation_formula, identity_scenario, mu_list,
                        second_variation_formula, twisted_scenario)

__version__ = "0.1.0"
