"""Solvability certificates for lossless real power flow on meshed networks.

The package certifies that the equations P = A D sin(A^T theta) admit a
solution with every branch angle difference inside [-pi/2, pi/2], by
reducing them to a cycle-consistency residual over a consistently
oriented cycle basis and verifying sign conditions on the faces of an
edge-feasible box.  A reference damped-Newton solver and a stress-sweep
harness measure how tight the certificate is.
"""

from .certify import (
    Box,
    BoxPolicy,
    Certificate,
    CertifyOptions,
    build_box,
    certify,
    check_faces,
    find_center,
)
from .estimators import (
    CycleBasisBuilder,
    NewtonRaphsonSolver,
    SolvabilityCertifier,
    StressSweeper,
)
from .flowcore import (
    AngleConsistencyError,
    AngleSolution,
    FlowDomainError,
    FlowParam,
    eval_g,
    laplacian_pinv_apply,
    nodal_residual,
    particular_flow,
    recover_theta,
    safe_arcsin,
)
from .netparse import (
    CaseError,
    LosslessOptions,
    MergeReport,
    Network,
    load_case,
    losslessify,
    network_from_json,
    network_to_json,
    parse_case,
    scale_injections,
    validate_network,
)
from .refsolvers import NRResult, diagnostics, nr_solve
from .sweep import SweepResult, TracePoint, stress_sweep
from .topology import (
    BridgeDecomposition,
    CycleBasis,
    Incidence,
    build_incidence,
    cycle_overlap,
    dfs_cycle_basis,
    find_bridges,
    short_cycle_basis,
    to_dot,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # netparse
    "CaseError",
    "LosslessOptions",
    "MergeReport",
    "Network",
    "parse_case",
    "load_case",
    "losslessify",
    "validate_network",
    "network_to_json",
    "network_from_json",
    "scale_injections",
    # topology
    "Incidence",
    "BridgeDecomposition",
    "CycleBasis",
    "build_incidence",
    "find_bridges",
    "dfs_cycle_basis",
    "short_cycle_basis",
    "cycle_overlap",
    "to_dot",
    # flowcore
    "FlowParam",
    "AngleSolution",
    "FlowDomainError",
    "AngleConsistencyError",
    "laplacian_pinv_apply",
    "particular_flow",
    "safe_arcsin",
    "eval_g",
    "recover_theta",
    "nodal_residual",
    # certify
    "Box",
    "BoxPolicy",
    "CertifyOptions",
    "Certificate",
    "find_center",
    "build_box",
    "check_faces",
    "certify",
    # refsolvers
    "NRResult",
    "nr_solve",
    "diagnostics",
    # sweep
    "TracePoint",
    "SweepResult",
    "stress_sweep",
    # estimators
    "CycleBasisBuilder",
    "SolvabilityCertifier",
    "NewtonRaphsonSolver",
    "StressSweeper",
]
