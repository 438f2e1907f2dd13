"""Smeared U(1) holonomy measures: covariance kernels, cylindrical marginals,
representations and singularity experiments."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .formfactor import Mollifier, divergence_residual, mollifier, mollifier_hat, smeared_form_factor
from .kernels import (CovarianceModel, TestField, covariance_matrix, eta_shift, kappa_cov,
                      line_pairing, momentum_oracle_covariance, momentum_oracle_shift,
                      pair_covariance, shift_coefficient, shift_vector, translated_covariance)
from .lab import (ExperimentConfig, classification_experiment, classify_samples, ergodic_average,
                  euclidean_invariance_report, hellinger_decay, make_translated_family,
                  translated_measure)
from .loops import (EuclideanTransform, Hoop, Loop, apply_euclidean, fourier_form_factor,
                    hoop_compose, hoop_inverse, make_loop, random_hoop, random_polygon,
                    unit_square)
from .measures import (CylindricalMeasure, CylSample, char_functional, hellinger_affinity,
                       pushforward_translate, rn_density, sample, wrapped_logpdf)
from .representations import (CylinderFunction, FockRepresentation, HaarRepresentation,
                              Holonomy, Translation, generator_commutator_check, weyl_check)
