"""Power-grid sensitivity analysis and boundary interface design.

Core pieces: an immutable network graph (:mod:`~gridfence.netmodel`), a DC
sensitivity engine for transfer and outage distribution factors
(:mod:`~gridfence.dcsens`), the three boundary interface constructions
with their guarantees (:mod:`~gridfence.interfaces`), a full AC power-flow
solver with empirical AC outage factors (:mod:`~gridfence.acflow`),
MATPOWER-subset/JSON/CSV I/O (:mod:`~gridfence.caseio`), and the sweep and
verification harness (:mod:`~gridfence.harness`).
"""

from .netmodel import Line, NetworkModel, build_network
from .dcsens import (
    DcSensitivity,
    RationalCoefficients,
    dc_flow,
    decompose_ptdf,
    effective_susceptance,
    gen_lodf,
    laplacian_pinv_apply,
    lodf,
    ptdf,
    ptdf_rational_fit,
)
from .interfaces import (
    InterfaceKind,
    InterfaceSpec,
    TieLineEdit,
    TwoBusJoint,
    apply_interface,
    apply_tie_edits,
    bipartite_bound,
    check_series_equality_condition,
    design_bipartite,
)
from .acflow import ACCase, ACState, ac_branch_flow, ac_lodf, solve_ac
from .caseio import (
    ExperimentConfig,
    LodfRecord,
    RawCase,
    load_case,
    load_config,
    parse_matpower,
    to_ac_case,
    to_dc_network,
)
from .harness import (
    CcdfCurve,
    Scenario,
    build_scenarios,
    ccdf,
    run_experiment,
    sweep_lodf,
    verify_theorems,
)

__version__ = "0.1.0"
