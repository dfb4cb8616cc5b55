"""Survival learners (CoxNet, RSF, boosted Cox) and concordance evaluation."""

from .base import (SURVIVAL_KINDS, FittedSurvivalModel, load_survival_model, predict_risk,
                   save_survival_model)
from .boosting import cox_negative_gradient, fit_xgb_cox
from .cox import RiskSets, cox_gradient, cox_partial_loglik, fit_cox_newton, fit_coxnet
from .forest import fit_rsf, log_rank_scores, nelson_aalen
from .metrics import c_index, c_index_bruteforce, cv_c_index, fit_survival

__all__ = [
    "SURVIVAL_KINDS", "FittedSurvivalModel", "load_survival_model", "predict_risk",
    "save_survival_model", "cox_negative_gradient", "fit_xgb_cox", "RiskSets", "cox_gradient",
    "cox_partial_loglik", "fit_cox_newton", "fit_coxnet", "fit_rsf", "log_rank_scores",
    "nelson_aalen", "c_index", "c_index_bruteforce", "cv_c_index", "fit_survival",
]
