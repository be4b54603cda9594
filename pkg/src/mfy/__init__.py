"""Pathwise regularisation-by-noise toolkit.

Builds averaged interaction fields along rough paths, solves the associated
McKean-Vlasov problems by Picard iteration over empirical laws, simulates the
matching N-particle systems and measures mean-field convergence in Wasserstein
distances.
"""

from mfy.paths import TimeGrid, SamplePath, HolderEstimate, gen_noise, holder_seminorm
from mfy.kernels import SpatialGrid, Kernel, GriddedField, hurst_threshold
from mfy.localtime import OccupationDensity, occupation_measure
from mfy.averaging import AveragedField, GammaNorm, averaged_field_direct, averaged_field_convolution
from mfy.nlyi import EmpiricalMeasureFlow, conv_eval, nly_integral
from mfy.solver import SolveConfig, solve_frozen, solve_mkv, bar_h, BlowUpError
from mfy.particles import simulate_particles, shifted_system
from mfy.metrics import w1_1d, w1_exact_small, sliced_w1, path_w1, flow_holder_seminorm

__version__ = "0.1.0"

__all__ = [
    "TimeGrid", "SamplePath", "HolderEstimate", "gen_noise", "holder_seminorm",
    "SpatialGrid", "Kernel", "GriddedField", "hurst_threshold",
    "OccupationDensity", "occupation_measure",
    "AveragedField", "GammaNorm", "averaged_field_direct", "averaged_field_convolution",
    "EmpiricalMeasureFlow", "conv_eval", "nly_integral",
    "SolveConfig", "solve_frozen", "solve_mkv", "bar_h", "BlowUpError",
    "simulate_particles", "shifted_system",
    "w1_1d", "w1_exact_small", "sliced_w1", "path_w1", "flow_holder_seminorm",
]
