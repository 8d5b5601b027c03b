"""Minimax-regret statistical treatment rules under partial identification of the ATE."""

__version__ = "0.1.0"

from .adjust import (
    AdjustProblem,
    AdjustResult,
    lam_str,
    mc_objective,
    plug_in_str,
    solve_adjustment,
    truncate,
    sup_over_support,
)
from .errors import (
    BoundaryPointError,
    BootstrapDegenerateError,
    ConfigError,
    DegenerateRegionError,
    DomainError,
    EmptyCellError,
    HarnessError,
    LamstrError,
    ModelMismatchError,
    NotPSDError,
    PathOutOfRangeError,
)
from .estimate import (
    EstimateOut,
    Ex2Sample,
    boot_G,
    ex1_theta_hat,
    ex2_sample,
    ex2_theta_hat,
    read_sample_csv,
    theta_path,
    write_sample_csv,
)
from .gauss import (
    F_obj,
    G_obj,
    G_sup_s,
    GaussianLaw,
    SeededStream,
    expected_min_zero,
    mvn_sample,
    std_normal_cdf,
    std_normal_pdf,
)
from .models import (
    BoundsPair,
    IdModel,
    ModelKind,
    Theta,
    dtau,
    ex1_bounds,
    ex2_bounds,
    ex3_bounds,
    ex3_psi,
    get_model,
)
from .rules import (
    KappaSpec,
    kappa,
    kappa_prime,
    kappa_prime_from_derivatives,
    linear_spec,
    m_hat,
    m_prime,
    minimax_value,
    neg_part,
    pos_part,
    spec_from_model,
    translation_direction,
)
from .sim import HPoint, RimrCurve, SimConfig, read_csv, rimr, run_experiment, write_csv
