"""Minimum probability flow learning for energy-based models.

The flow objective fits ``E(x; theta)`` without evaluating the partition
function. Alongside it the package ships baseline estimators, samplers, an
L-BFGS optimizer, brute-force oracles for small state spaces and a CLI.
"""

from .estimators import (HopfieldMPF, HopfieldOPR, HopfieldPerceptron, ICAMaxLikelihood,
                         ICAPersistentMPF, IsingContrastiveDivergence, IsingMaxLikelihood,
                         IsingMPF, IsingPseudolikelihood, RBMMPF)
from .flow import (SINGLE_BIT_FLIP, SINGLE_FLIP_PLUS_COMPLEMENT, ClampWarning, MpfOptions,
                   ising_mpf, mpf_objective, pmpf_fit, rbm_mpf, sampled_mpf)
from .hopfield import HopfieldNet
from .models import GaussianModel, IcaModel, IsingModel, RbmModel, TabularModel
from .statespace import Dataset, TabularDistribution, read_dataset, write_dataset

__version__ = "0.1.0"

__all__ = [
    "ClampWarning", "Dataset", "GaussianModel", "HopfieldMPF", "HopfieldNet", "HopfieldOPR",
    "HopfieldPerceptron", "ICAMaxLikelihood", "ICAPersistentMPF", "IcaModel",
    "IsingContrastiveDivergence", "IsingMPF", "IsingMaxLikelihood", "IsingModel",
    "IsingPseudolikelihood", "MpfOptions", "RBMMPF", "RbmModel", "SINGLE_BIT_FLIP",
    "SINGLE_FLIP_PLUS_COMPLEMENT", "TabularDistribution", "TabularModel", "ising_mpf",
    "mpf_objective", "pmpf_fit", "rbm_mpf", "read_dataset", "sampled_mpf", "write_dataset",
]
