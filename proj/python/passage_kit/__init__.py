# SPDX-License-Identifier: Apache-2.0
"""First-passage scale functions of spectrally positive Markov processes.

Thin python surface over the C++ core: evaluate Laplace exponents and
first-passage transforms, run Monte Carlo cross-checks, and fit process
parameters from transform data. Process specs are JSON strings (or dicts)
matching the passage-kit config format.
"""

import json as _json

from ._core import (  # noqa: F401
    NumericalError,
    ValidationError,
    __version__,
    compare_mc_closed,
    eval_psi,
    eval_psi_prime,
    extract_sigma2_lattice,
    first_passage_transform,
    fit_phi_grid,
    psi_inverse,
    pssmp_coefficients,
    sample_first_passage,
    validate_triplet,
)


def spec(family, **kwargs):
    """Builds a process spec JSON string, e.g. spec("levy", triplet=bm())."""
    return _json.dumps({"family": family, **kwargs})


def triplet(gamma=0.0, sigma2=0.0, jumps=None, p=0.0):
    """Builds a Levy triplet dict for use inside spec(...)."""
    return {"gamma": gamma, "sigma2": sigma2, "jumps": jumps or {"type": "none"}, "p": p}


def brownian(sigma2=1.0, gamma=0.0, p=0.0):
    return triplet(gamma=gamma, sigma2=sigma2, p=p)
