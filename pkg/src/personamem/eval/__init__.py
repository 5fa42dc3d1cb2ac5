from .datasets import ADAPTERS, EvalItem, load_dataset
from .harness import (
    ItemRow,
    MetricReport,
    load_reports,
    render_report,
    run_eval,
    save_reports,
)
from .metrics import AgreementResult, percent_agreement, rouge1_f, token_sim_f

__all__ = [
    "ADAPTERS",
    "AgreementResult",
    "EvalItem",
    "ItemRow",
    "MetricReport",
    "load_dataset",
    "load_reports",
    "percent_agreement",
    "render_report",
    "rouge1_f",
    "run_eval",
    "save_reports",
    "token_sim_f",
]
