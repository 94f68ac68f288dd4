"""Branching random walks in random space-time environments.

Simulation and numerical verification lab: exact quenched partition
functions for the associated directed polymer, free-energy estimation,
critical-thinning prediction, coupled particle dynamics with truncation,
correlation-inequality test harnesses, and block-scale occupation
experiments.
"""

from .envmodel import (EnvironmentLaw, LawValidationError, OffspringLaw,
                       QuenchedEnvironment, ValidationReport, perturb,
                       sample_offspring, validate)
from .particles import (Configuration, CouplingError, EngineError, FaceCounts,
                        Trajectory, TruncationBox, face_counts, run,
                        run_coupled, run_truncation_chain, step)
from .polymer import (FreeEnergyEstimate, PolymerError, PolymerLayer,
                      free_energy, partition_function,
                      partition_function_bruteforce, partition_function_curve,
                      perturbation_identity_check)
from .renorm import (BlockEventResult, BlockEventSpec, Diamond, OrthantTable,
                     block_event, block_event_probability, contains_translate,
                     diamond, face_trick_checks, orthant_statistics,
                     square_root_trick_checks)
from .experiments import (CatalogError, DiagnosticsBundle, DiagnosticsOptions,
                          FKGReport, SweepResult, default_catalog, diagnostics,
                          fkg_suite, fkg_test, rho_sweep, survival_probability,
                          survival_runs)
from .stats import MCEstimate, bernoulli_estimate, wilson_interval

__version__ = "0.1.0"
