"""Accuracy metrics and the modeled cost ledger."""
from .accuracy import average_precision, mean_average_precision, top1_accuracy
from .cost import COMPONENTS, CostModel, CostReport, RunTrace, flops_ledger, frame_rate
