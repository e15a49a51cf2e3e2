"""Classical images of the replica calculations: exact enumeration and Monte Carlo."""

from .analysis import binder, crossing, jackknife
from .montecarlo import (
    BondDisorder,
    MCRun,
    ScanResult,
    nishimori_beta,
    rbim_nishimori_scan,
    renyi2_ising_scan,
    villain_kt_scan,
)
from .replica import (
    ReplicaSpinModel,
    fdw_beta,
    fdw_weight,
    ising_enumerate,
    purity_ising_pc,
    replica_enumerate,
)
from .villain import truncated_coefficients, villain_fn_coefficients

__all__ = [
    "BondDisorder", "MCRun", "ScanResult", "ReplicaSpinModel", "binder", "crossing", "jackknife",
    "fdw_beta", "fdw_weight", "ising_enumerate", "nishimori_beta", "purity_ising_pc",
    "rbim_nishimori_scan", "renyi2_ising_scan", "replica_enumerate", "truncated_coefficients",
    "villain_fn_coefficients", "villain_kt_scan",
]
