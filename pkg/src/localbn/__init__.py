"""Local Bayesian-network explanations of black-box classifier predictions."""

from .bn import BayesianNetwork, Cpt, Dag, SearchConfig, family_bic, fit_parameters, hill_climb, network_bic
from .discretizer import BinningScheme, DiscreteDataset, apply_bins, fit_bins
from .inference import all_marginals, brute_force_joint, eliminate, markov_blanket
from .pipeline import ExplainConfig, ExplanationReport, batch_explain, epsilon_sweep, explain, render_report
from .predictor import ClassDistribution, FeatureVector, MlpModel, load_model, mlp_load, predict, predict_label
from .sampler import LabeledSample, PermutationConfig, generate_permutations, label_histogram
from .verdicts import ClassTopology, RuleVerdict, classify_rule, classify_topology

__version__ = "0.1.0"
