"""imalab: a desk-scale laboratory for imitation attacks on black-box
classification APIs under domain shift."""

from .analysis import (CostReport, DefenseBoundReport, RiskReport, cost_report,
                       da_bound_report, defense_bound_report,
                       disagreement_risk, ensemble_diversity, tv_discriminator,
                       tv_exact)
from .attacker import (HarvestResult, ImitationDataset, assemble,
                       export_imitation_csv, harvest, imitate)
from .data import (GaussianDomainSpec, LabeledDataset, TabularDomainSpec,
                   featurize, generate_gaussian_pair, generate_tabular_pair,
                   split, support_dataset)
from .models import (MLPSoftmaxClassifier, SoftmaxLinearClassifier,
                     TrainConfig, accuracy, cross_entropy, softmax,
                     train_model)
from .serialize import (DimensionMismatchError, ModelFormatError,
                        TruncatedModelError, VersionMismatchError,
                        deserialize_model, load_model, save_model,
                        serialize_model)
from .victim import APIResponse, DefensePolicy, Meter, VictimEndpoint, apply_defense

__version__ = "0.1.0"

__all__ = [
    "APIResponse", "CostReport", "DefenseBoundReport", "DefensePolicy",
    "DimensionMismatchError", "GaussianDomainSpec", "HarvestResult",
    "ImitationDataset", "LabeledDataset", "MLPSoftmaxClassifier", "Meter",
    "ModelFormatError", "RiskReport", "SoftmaxLinearClassifier",
    "TabularDomainSpec", "TrainConfig", "TruncatedModelError",
    "VersionMismatchError", "VictimEndpoint", "accuracy", "apply_defense",
    "assemble", "cost_report", "cross_entropy", "da_bound_report",
    "defense_bound_report", "deserialize_model", "disagreement_risk",
    "ensemble_diversity", "export_imitation_csv", "featurize",
    "generate_gaussian_pair", "generate_tabular_pair", "harvest", "imitate",
    "load_model", "save_model", "serialize_model", "softmax", "split",
    "support_dataset", "train_model", "tv_discriminator", "tv_exact",
]
