"""Analysis of one-parameter bilevel programs.

Thin wrapper over the compiled core: every report comes back as a dict
with the same fields as the JSON printed by the `parcalm` command.
"""

import json as _json

from . import _core
from ._core import (
    DomainError,
    Error,
    InconclusiveError,
    InfeasiblePointError,
    NumericalError,
    ParseError,
    PreconditionError,
    Problem,
    ProblemError,
    builtin_names,
    load_problem,
)

__all__ = [
    "DomainError", "Error", "InconclusiveError", "InfeasiblePointError", "NumericalError", "ParseError",
    "PreconditionError", "Problem", "ProblemError", "builtin_names", "load_problem", "problem",
    "classify", "solve_lower", "trace", "check_stationarity", "mpcc_licq", "estimate_modulus",
    "verify_calmness", "solve", "corpus",
]


def problem(source):
    """A problem from a file path, "builtin:<name>" or a bare builtin name."""
    if source in builtin_names():
        source = "builtin:" + source
    return _core.resolve_problem(source)


def _p(P):
    return problem(P) if isinstance(P, str) else P


def classify(P, x, y, simplicity=True):
    return _json.loads(_core.classify(_p(P), x, list(y), simplicity))


def solve_lower(P, x):
    return _json.loads(_core.solve_lower(_p(P), x))


def trace(P, x, y, to, step=0.01):
    return _json.loads(_core.trace(_p(P), x, list(y), to, step))


def check_stationarity(P, x, y):
    return _json.loads(_core.check_stationarity(_p(P), x, list(y)))


def mpcc_licq(P, x, y, u):
    return _json.loads(_core.mpcc_licq(_p(P), x, list(y), list(u)))


def estimate_modulus(P, x, y, radius=0.2, samples=200, condition="FJ", uwsm=False, v_max=1.0, seed=0):
    return _json.loads(_core.estimate_modulus(_p(P), x, list(y), radius, samples, condition, uwsm, v_max, seed))


def verify_calmness(P, x, y, mu, radius=0.2, samples=200, condition="FJ", seed=0):
    return _json.loads(_core.verify_calmness(_p(P), x, list(y), mu, radius, samples, condition, seed))


def solve(P, grid=201):
    return _json.loads(_core.solve(_p(P), grid))


def corpus(seed=0):
    return _json.loads(_core.corpus(seed))
