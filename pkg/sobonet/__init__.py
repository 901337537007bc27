"""
sobonet - explicit ReLU / ReQU network constructions for Sobolev-norm
approximation, capacity calculators and an H¹ training lab.

Modules:
    network        layered networks, jets, combinators
    relu_build     teeth / square / product / step / partition nets
    requ_build     exact polynomial nets and the smooth partition
    local_poly     averaged Taylor polynomials and piecewise approximants
    assemble       full approximant assembly with width/depth budgets
    metrics        grid sup-error estimates and rate fits
    complexity     VC / pseudo-dimension bounds, shattering, bump grids
    sobolev_train  H¹ loss, gradient descent and the gap experiment
"""
from .errors import (
    BudgetExceededError,
    ConstructionFailedError,
    DivergenceError,
    InvalidInputError,
    OutOfDomainError,
    PreconditionError,
    QuadratureError,
    SobonetError,
    UnsupportedOrderError,
)
from .network import Layer, Network, combine, differentiate, evaluate, load_network, save_network
from .targets import TargetFunction, get_target

__version__ = "0.3.0"

__all__ = [
    "__version__",
    "BudgetExceededError",
    "ConstructionFailedError",
    "DivergenceError",
    "InvalidInputError",
    "Layer",
    "Network",
    "OutOfDomainError",
    "PreconditionError",
    "QuadratureError",
    "SobonetError",
    "TargetFunction",
    "UnsupportedOrderError",
    "combine",
    "differentiate",
    "evaluate",
    "get_target",
    "load_network",
    "save_network",
]
