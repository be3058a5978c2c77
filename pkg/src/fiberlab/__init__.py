"""Direct-image curvature and Bergman geodesics for O(k) over the Riemann sphere.

Submodules
----------
geometry      fiber metrics, scalar curvature, presets
spectra       sections, Hilbert norms, Bergman kernels, generalized eigenproblems
paths         one-parameter families of fiber metrics
direct_image  curvature of the direct-image bundles and large-p asymptotics
functionals   I, L_p, tilde L_p, Bergman density deviation and the Mabuchi functional
geodesics     toric geodesic oracle and Bergman geodesic convergence
cli           batch front end
"""

from .direct_image import (A_form, c_geodesic, c_geodesic_x, complex_gradient, curvature_E, curvature_F,
                           dbarV_integral, trace_A_limit, trace_asymptotics)
from .functionals import (I_energy, L_p_functional, mabuchi_derivative, mabuchi_hessian_geodesic, sigma_p,
                          tilde_L_p)
from .geodesics import (bergman_geodesic, domination_check, flat_curve, rate_fit, sup_distance,
                        toric_geodesic)
from .geometry import FiberMetric, MetricError, ToricPotential, preset, scalar_curvature, volume
from .paths import FiberPath, ToricPath
from .spectra import HermitianForm, SectionSpace, gen_eigen, gram_E, gram_F, log_det

__version__ = "0.1.0"

__all__ = [
    "A_form", "FiberMetric", "FiberPath", "HermitianForm", "I_energy", "L_p_functional", "MetricError",
    "SectionSpace", "ToricPath", "ToricPotential", "bergman_geodesic", "c_geodesic", "c_geodesic_x",
    "complex_gradient", "curvature_E", "curvature_F", "dbarV_integral", "domination_check", "flat_curve",
    "gen_eigen", "gram_E", "gram_F", "log_det", "mabuchi_derivative", "mabuchi_hessian_geodesic", "preset",
    "rate_fit", "scalar_curvature", "sigma_p", "sup_distance", "tilde_L_p", "toric_geodesic",
    "trace_A_limit", "trace_asymptotics", "volume",
]
