"""Decentralized observers reconstructing generator states from PMU data."""

from pmuobs.observers.algebraic import (
    AlgebraicEstimate,
    estimate,
    estimate_x1,
    estimate_x3,
    estimate_x3_alt,
)
from pmuobs.observers.drem import DremEstimator, FilterBank, HOperator, mix
from pmuobs.observers.iii import IiiState, iii_step_adaptive, iii_step_known
from pmuobs.observers.pipeline import ESTIMATE_COLUMNS, EstimatesTable, estimate_trajectory

__all__ = [
    "AlgebraicEstimate",
    "estimate",
    "estimate_x1",
    "estimate_x3",
    "estimate_x3_alt",
    "DremEstimator",
    "FilterBank",
    "HOperator",
    "mix",
    "IiiState",
    "iii_step_adaptive",
    "iii_step_known",
    "ESTIMATE_COLUMNS",
    "EstimatesTable",
    "estimate_trajectory",
]
