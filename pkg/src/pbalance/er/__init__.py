"""Entity resolution with ESC and Gibbs-type partition priors."""

from .data import (
    SCENARIO_COUNTS,
    SCENARIO_MU,
    ERDataset,
    counts_from_mu,
    empirical_theta,
    generate_synthetic,
    read_dataset_csv,
    write_dataset_csv,
)
from .likelihood import exact_partition_posterior, log_record_likelihood, new_cluster_log_likelihood
from .metrics import PairMetrics, coclustering_matrix, dahl_point_estimate, fnr_fdr
from .priors import ESCPrior, GibbsPrior, SamplerError, reallocation_tables, update_theta_mu
from .sampler import (
    ConfigError,
    ERResult,
    MCMCConfig,
    MCMCState,
    gibbs_update_z,
    run_chains,
    run_mcmc,
)
