"""Hyperfine coupling tensors from volumetric spin densities."""
from .constants import CONSTANTS, Isotope, lookup_isotope, thomson_radius
from .hfi import (HyperfineTensor, assemble_tensor, compute_tensor, dipolar_tensor, fermi_contact,
                  isotropic_from_tensor, principal_values)
from .kernels import BACKEND
from .radial import LogRadialGrid, RadialProfile, extrapolate_to_nucleus, spherical_average, thomson_average
from .volumetric import (AtomSite, Cell, SpinDensityGrid, integrate, parse_cube, synth_gaussian,
                         trilinear_sample, write_cube)

__version__ = "0.1.0"
