from .cv import CVResult, cross_validate_c1, stratified_folds
from .experiment import (METHODS, REPORT_COLUMNS, EvalReport, ExperimentPlan, ReportRow,
                         p_sweep_plans, run_experiment)
from .metrics import mean_absolute, mean_zero_one
from .report import check_rows, emit_report, read_report

__all__ = ["CVResult", "cross_validate_c1", "stratified_folds", "METHODS", "REPORT_COLUMNS",
           "EvalReport", "ExperimentPlan", "ReportRow", "p_sweep_plans", "run_experiment",
           "mean_absolute", "mean_zero_one", "check_rows", "emit_report", "read_report"]
