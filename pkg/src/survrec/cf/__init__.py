"""Collaborative-filtering recommenders fitted on the binary enrollment matrix."""

from .base import (KINDS, FittedRecommender, ScoredCandidates, fit_recommender, load_recommender,
                   rank_top_l, save_recommender, score_unobserved)
from .factor import fit_nmf, fit_svd, fit_wrmf
from .knn import fit_iknn, fit_uknn, shrunk_cosine
from .linear import fit_ease, fit_slim

__all__ = [
    "KINDS", "FittedRecommender", "ScoredCandidates", "fit_recommender", "load_recommender",
    "rank_top_l", "save_recommender", "score_unobserved", "fit_nmf", "fit_svd", "fit_wrmf",
    "fit_iknn", "fit_uknn", "shrunk_cosine", "fit_ease", "fit_slim",
]
