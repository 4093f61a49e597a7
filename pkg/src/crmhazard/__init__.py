"""Kernel-mixture hazard rates driven by completely random measures.

Simulation of prior and posterior hazard paths, exact path functionals,
closed-form limit-law predictions, and Monte Carlo / quadrature verification
of the limit theorems and their hypotheses.
"""

from .crm import (BaseMeasure, CrmRealization, GeneralizedGammaIntensity,
                  GridMeasure, InverseWeibullDensity, LebesgueHalfLine,
                  choose_jump_floor, laplace_exponent, sample_crm)
from .kernels import (AtomList, DykstraLaudKernel, ExponentialKernel, Kernel,
                      OrnsteinUhlenbeckKernel, RectangularKernel,
                      contraction_norms, cross_time_integral, eval_kernel,
                      make_kernel, time_integral)
from .hazard import (FunctionalSample, HazardRealization, prior_moments,
                     regularity_report)
from .posterior import (Observation, PosteriorState, gibbs_update_latents,
                        initialize_posterior, posterior_mean_cumulative_hazard,
                        run_gibbs, sample_fixed_jumps, sample_posterior_crm,
                        sample_posterior_hazard)
from .asymptotics import (CltPrediction, check_linear_clt_conditions,
                          check_path_variance_clt_conditions,
                          check_second_moment_clt_conditions, clt_prediction)
from .experiments import (ExperimentConfig, ExperimentResult, run_consistency_demo,
                          run_posterior_clt, run_prior_clt, summarize)

__version__ = "0.1.0"
