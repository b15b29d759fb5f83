"""Transferability metrics and evaluation harness for load disaggregation."""

__version__ = "0.1.0"

from .metrics import ConfusionCounts, MetricKind, MetricValue, accuracy, confusion, f1, mae, nde, nep, rmse
from .timeseries import ApplianceTrace, HouseholdRecord, PowerSeries, State, align, derive_states, load_csv, resample
from .transfer import (
    GeneralisationRatio,
    SeenScore,
    TransferReport,
    UnseenScore,
    auh,
    build_report,
    euh,
    g_loss_classification,
    g_loss_regression,
    generalisation_ratio,
    mgl,
)

__all__ = [
    "ApplianceTrace",
    "ConfusionCounts",
    "GeneralisationRatio",
    "HouseholdRecord",
    "MetricKind",
    "MetricValue",
    "PowerSeries",
    "SeenScore",
    "State",
    "TransferReport",
    "UnseenScore",
    "accuracy",
    "align",
    "auh",
    "build_report",
    "confusion",
    "derive_states",
    "euh",
    "f1",
    "g_loss_classification",
    "g_loss_regression",
    "generalisation_ratio",
    "load_csv",
    "mae",
    "mgl",
    "nde",
    "nep",
    "resample",
    "rmse",
]
