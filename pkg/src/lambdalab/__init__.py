"""Numerical laboratory for Laurent families of flat SL(2,C) connections.

Families ``d + sum_k lambda^k xi_k`` live on periodic torus grids or
rectangular patches; the package builds them from harmonic-map frame data,
computes their energy, twists them, forms dual surfaces and reconstructs
the associated surfaces in the lightcone model of R^{4,1}.
"""
from .builders import (SolutionData, constant_solution, family_from_uq, random_lift_perturbation,
                       random_sl2_field, solve_constant, solve_gordon_strip, strip_minimum)
from .energy import (EnergyReport, TangentPair, contract_Y, energy, energy_density, energy_sigma,
                     moment_map, omega_c, residue_rhs)
from .families import (GaugeFamily, LambdaFamily, det_winding, evaluate, flatness_residual,
                       gauge_apply, parity, sigma_pullback)
from .grid import Domain, GridField, derive, integrate, wedge
from .lightcone import (FrameField, VVector, dual_so5_equivalence, embed_hatf, fingerprint,
                        holonomy, integrate_frame, isometry_psi, mean_curvature_sphere,
                        minkowski_q, psi_frame, so5_connection_check, willmore_compare)
from .transforms import (LineSplitting, dual_surface, kernel_splitting, line_degree, twist,
                         twist_block_identity)

__version__ = "0.1.0"

__all__ = [
    "Domain", "GridField", "derive", "wedge", "integrate",
    "LambdaFamily", "GaugeFamily", "evaluate", "flatness_residual", "gauge_apply",
    "sigma_pullback", "det_winding", "parity",
    "SolutionData", "family_from_uq", "solve_constant", "constant_solution",
    "solve_gordon_strip", "strip_minimum", "random_lift_perturbation", "random_sl2_field",
    "LineSplitting", "kernel_splitting", "twist", "dual_surface", "line_degree",
    "twist_block_identity",
    "EnergyReport", "TangentPair", "energy", "energy_density", "energy_sigma", "moment_map",
    "omega_c", "contract_Y", "residue_rhs",
    "FrameField", "VVector", "integrate_frame", "holonomy", "fingerprint", "embed_hatf",
    "isometry_psi", "minkowski_q", "psi_frame", "so5_connection_check",
    "dual_so5_equivalence", "willmore_compare", "mean_curvature_sphere",
]
