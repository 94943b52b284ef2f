from .graph import ColoredGraph, RefinementOrder, ValidationReport
from .aux_graph import AuxGraph
from .experiment import ExperimentRun

__all__ = ["ColoredGraph", "RefinementOrder", "ValidationReport", "AuxGraph", "ExperimentRun"]
