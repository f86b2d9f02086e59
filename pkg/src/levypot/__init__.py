"""Potential theory toolkit for subordinate Brownian motions.

Layers, bottom to top:

    bernstein   complete Bernstein function catalog, scaling, transience
    kernels     jump and Green densities by quadrature, two Green routes
    geometry    domain specs and fatness-at-infinity certificates
    montecarlo  subordinator sampling, exit simulation, MC estimators
    potential   stable closed-form oracles, generator, Martin limits
    harness     named experiments with verdicts and report files
    cli         the levypot command

The names re-exported here are the supported surface; module-private
helpers can change without notice.
"""

from .errors import (CertificateError, DomainSpecError, LevypotError,
                     TabulationRangeError, TransienceError,
                     UnstableRatioError, UnsupportedKindError)
from .bernstein import (CompleteBernsteinFunction, DEFAULT_CATALOG_IDS,
                        ScalingProfile, check_bernstein_bounds,
                        check_global_scaling, estimate_scaling_profile,
                        eval_phi, parse_phi, relativistic_stable, stable,
                        stable_mixture, transience_check, user_tabulated)
from .kernels import (KernelTable, build_kernel_table, green_density,
                      green_density_fourier, green_kernel_table,
                      jump_density, jump_kernel_table, jump_mass_beyond,
                      verify_doubling, verify_integral_estimates,
                      verify_jg_estimates)
from .geometry import (Ball, BallChain, Cone, ExteriorBall,
                       FatnessCertificate, FatnessReport, HalfSpace,
                       Intersection, OpenSetSpec, SlabComplement, Union,
                       contains, dist_to_complement, parse_domain,
                       propose_witness, recenter_certificate,
                       verify_fatness)
from .montecarlo import (ExitBatch, ExitSample, HarmonicEstimate,
                         PathConfig, SubordinatorSampler, estimate_green,
                         estimate_harmonic, estimate_poisson_kernel,
                         sample_increment, sample_sbm_increment,
                         simulate_exit, simulate_exits, write_exits_csv)
from .potential import (MartinEstimate, StableOracle, TestFunction,
                        apply_generator, cosine_wave,
                        estimate_martin_limit, gaussian_bump,
                        martin_kernel, oracle_eval)
from .harness import (EXPERIMENT_IDS, ExperimentConfig, ExperimentReport,
                      run_experiment)
from .cli import cli_main

__version__ = "0.1.0"

__all__ = [
    "LevypotError", "UnsupportedKindError", "DomainSpecError",
    "TransienceError", "UnstableRatioError", "CertificateError",
    "TabulationRangeError",
    "CompleteBernsteinFunction", "stable", "stable_mixture",
    "relativistic_stable", "user_tabulated", "parse_phi", "eval_phi",
    "check_bernstein_bounds", "estimate_scaling_profile",
    "check_global_scaling", "transience_check", "ScalingProfile",
    "DEFAULT_CATALOG_IDS",
    "jump_density", "green_density", "green_density_fourier",
    "KernelTable", "build_kernel_table", "verify_jg_estimates",
    "verify_doubling", "verify_integral_estimates", "jump_kernel_table",
    "green_kernel_table", "jump_mass_beyond",
    "OpenSetSpec", "HalfSpace", "Ball", "ExteriorBall", "Cone",
    "SlabComplement", "BallChain", "Intersection", "Union",
    "parse_domain", "contains", "dist_to_complement",
    "FatnessCertificate", "propose_witness", "verify_fatness",
    "FatnessReport", "recenter_certificate",
    "SubordinatorSampler", "PathConfig", "ExitSample", "ExitBatch",
    "sample_increment", "sample_sbm_increment", "simulate_exit",
    "simulate_exits", "estimate_harmonic", "estimate_green",
    "estimate_poisson_kernel", "HarmonicEstimate", "write_exits_csv",
    "StableOracle", "oracle_eval", "TestFunction", "cosine_wave",
    "gaussian_bump", "apply_generator", "MartinEstimate",
    "martin_kernel", "estimate_martin_limit",
    "ExperimentConfig", "ExperimentReport", "run_experiment",
    "EXPERIMENT_IDS", "cli_main",
]
