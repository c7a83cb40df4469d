"""Jet-space calculus, Koszul-Tate resolutions and conservation laws."""

from .cdiff import CDiffOp, MultiLinOp, cdiff_adjoint, cdiff_apply, cdiff_compose, selfadjoint_project
from .expr import DiffPoly, JetContext, JetSymbol, Q
from .jetcalc import (
    EquationSystem,
    HorizontalForm,
    Section,
    euler,
    evolutionary_apply,
    horizontal_d,
    ideal_decompose,
    linearize,
    reduce_mod_equation,
    total_derivative,
)

__version__ = "0.1.0"
