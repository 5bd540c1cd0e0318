"""Network formation models for alliance panels.

Exponential random graph models, stochastic actor-oriented models with
composition change, simulation-based goodness of fit, and a synthetic
laboratory for link-addition interventions.
"""
from .approx import EstimationResult, RMSettings, convergence_check
from .ergm import ErgmEffect, ErgmSpec, exact_mle, exact_moments, fit_ergm, mcmc_sample
from .gof import GofReport, gof_ergm, gof_saom
from .graph import Graph, NodeAttributes, aux_statistics
from .lab import (ExperimentConfig, ExperimentReport, InterventionPlan, apply_intervention, generate_ba,
                  generate_gnm, growth_panel, mark_newcomers, preferential_attachment_spec, run_experiment)
from .saom import Panel, SaomEffect, SaomSpec, fit_saom, simulate_panel, simulate_period

__version__ = "0.1.0"
