"""oralab: a laboratory for auditing differential privacy in one run.

Game engines for classic, one-run, and adaptive one-run auditing; exact
distributional-privacy-loss and efficacy oracles; and a Dirac-canary DP-SGD
simulator with a calibrated noise accountant.
"""

from .audit import (
    AllAbstainError,
    ProtocolViolationError,
    audit_report,
    run_adaptive,
    run_classic,
    run_full_knowledge,
    run_one_run,
)
from .mechanisms import (
    NULL,
    ConfigError,
    MechanismModel,
    MechanismSpec,
    PairVector,
    UnsupportedModelError,
)
from .stats import AuditCounts, cpl, eps_lower_bound, logistic, logistic_inv

__all__ = [
    "AllAbstainError",
    "AuditCounts",
    "ConfigError",
    "MechanismModel",
    "MechanismSpec",
    "NULL",
    "PairVector",
    "ProtocolViolationError",
    "UnsupportedModelError",
    "audit_report",
    "cpl",
    "eps_lower_bound",
    "logistic",
    "logistic_inv",
    "run_adaptive",
    "run_classic",
    "run_full_knowledge",
    "run_one_run",
]

__version__ = "0.1.0"
