"""Distribution-aware approximate multipliers built from compressed partial products."""
from pathlib import Path

from .distribution import Histogram, OperandDistribution, product_joint, uniform
from .ga import GAConfig, GAResult, optimize
from .lut import MultiplierLUT, build_lut, error_stats, exact_lut, load_lut, save_lut
from .netlist import cost_report, emit_hdl, emit_netlist, simulate_netlist
from .objective import ObjectiveConfig, expected_error, objective, penalty, sampled_expected_error, squared_error
from .ppmatrix import (
    SearchSpace,
    default_grouping,
    dnn_preset,
    enumerate_search_space,
    evaluate,
    exact_multiply,
    make_space,
    term_value,
    uncompressed_sum,
)

__version__ = "0.1.0"

__all__ = [
    "Histogram",
    "OperandDistribution",
    "product_joint",
    "uniform",
    "GAConfig",
    "GAResult",
    "optimize",
    "MultiplierLUT",
    "build_lut",
    "error_stats",
    "exact_lut",
    "load_lut",
    "save_lut",
    "cost_report",
    "emit_hdl",
    "emit_netlist",
    "simulate_netlist",
    "ObjectiveConfig",
    "expected_error",
    "objective",
    "penalty",
    "sampled_expected_error",
    "squared_error",
    "SearchSpace",
    "default_grouping",
    "dnn_preset",
    "enumerate_search_space",
    "evaluate",
    "exact_multiply",
    "make_space",
    "term_value",
    "uncompressed_sum",
    "data_path",
]


def data_path(name: str) -> Path:
    """Path of a file shipped in ``approxmul/data``."""
    return Path(__file__).parent / "data" / name
