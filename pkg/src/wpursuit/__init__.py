"""Non-Gaussian subspace recovery by Wasserstein projection pursuit."""
from .datagen import (PlantedModel, SignalLaw, example1_mixture, ground_truth_metrics,
                      make_planted_model, sample, whiten)
from .metrics import (RecoveryError, concentration_probe, evaluate_recovery, principal_angles,
                      projection_norm, rate_probe, sample_cov_spectral_norm)
from .pursuit import (DataMatrix, Frame, OptimizerConfig, maximize_on_sphere,
                      net_maximizer_oracle, objective, objective_gradient)
from .recovery import (RecoveryReport, SearchConfig, StoppingConfig, sequential_recovery,
                       threshold)
from .transport import (SortedProjection, W2Result, w2_coupling_oracle,
                        w2_empirical_to_empirical, w2_empirical_to_std_normal)

__version__ = "0.1.0"

__all__ = [
    "DataMatrix", "Frame", "OptimizerConfig", "objective", "objective_gradient",
    "maximize_on_sphere", "net_maximizer_oracle",
    "SortedProjection", "W2Result", "w2_empirical_to_std_normal", "w2_empirical_to_empirical",
    "w2_coupling_oracle",
    "SignalLaw", "PlantedModel", "make_planted_model", "example1_mixture", "sample", "whiten",
    "ground_truth_metrics",
    "StoppingConfig", "SearchConfig", "RecoveryReport", "sequential_recovery", "threshold",
    "RecoveryError", "evaluate_recovery", "projection_norm", "principal_angles",
    "concentration_probe", "rate_probe", "sample_cov_spectral_norm",
]
