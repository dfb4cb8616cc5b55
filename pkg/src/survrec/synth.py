"""Synthetic MOOC interaction generator with affinity-driven survival times."""

from __future__ import annotations

import csv
import io

import numpy as np

from .data import HEADER


def _latent(rng, users, courses, latent_dim, match, quality_sd):
    p = rng.normal(0.0, 1.0, (users, latent_dim))
    q = rng.normal(0.0, 1.0, (courses, latent_dim))
    quality = rng.normal(0.0, quality_sd, courses)
    return match * (p @ q.T) / np.sqrt(latent_dim) + quality[None, :]


def generate_synthetic(users: int = 500, courses: int = 60, latent_dim: int = 5, seed: int = 0,
                       density: float = 0.22, hazard_effect: float = 3.0, match: float = 0.4,
                       quality_sd: float = 1.0, enroll_effect: float = 1.0, ability_sd: float = 0.3,
                       ease_sd: float = 0.0) -> str:
    """Interaction CSV text in the standard ``user_id,item_id,elapsed_days,event`` schema.

    Parameters
    ----------
    users, courses, latent_dim : int
        Matrix shape and rank of the user-course match term.
    seed : int
        Seed of the single generator all draws come from.
    density : float
        Target enrollment probability; the logit intercept is solved for it.
    hazard_effect : float
        Weight of the affinity in both event hazards.
    match : float
        Weight of the personal ``p_u . q_i / sqrt(d)`` term in the affinity.
    quality_sd : float
        Spread of the per-course quality shared by every user.
    enroll_effect : float
        Weight of the affinity in the enrollment logit.
    ability_sd, ease_sd : float
        Spread of per-user and per-course hazard shifts unrelated to enrollment.

    Notes
    -----
    The affinity ``match * p_u . q_i / sqrt(d) + quality_i`` drives the
    enrollment logit. Each enrollment then races a completion hazard
    ``exp(b * affinity + ability + ease)`` against a dropout hazard with the
    opposite sign, so users finish well-suited courses sooner and would drop
    them later. The elapsed time is the winning event time scaled by a
    per-course length.
    """
    if users < 2 or courses < 2 or latent_dim < 1:
        raise ValueError("users, courses must be >= 2 and latent_dim >= 1")
    if not 0.0 < density < 1.0:
        raise ValueError("density must be in (0, 1)")
    rng = np.random.default_rng(seed)
    affinity = _latent(rng, users, courses, latent_dim, match, quality_sd)
    logit = enroll_effect * affinity
    # intercept chosen so the expected density matches the target
    lo, hi = -20.0, 20.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.mean(1.0 / (1.0 + np.exp(-(logit + mid)))) < density:
            lo = mid
        else:
            hi = mid
    prob = 1.0 / (1.0 + np.exp(-(logit + 0.5 * (lo + hi))))
    enrolled = rng.random((users, courses)) < prob

    ability = rng.normal(0.0, ability_sd, users)
    ease = rng.normal(0.0, ease_sd, courses)
    length = rng.uniform(20.0, 120.0, courses)
    shift = hazard_effect * affinity + ability[:, None] + ease[None, :]
    t_c = rng.exponential(1.0, (users, courses)) / np.exp(shift)
    t_d = rng.exponential(1.0, (users, courses)) / np.exp(-shift)
    completed = t_c < t_d
    days = np.round(np.minimum(t_c, t_d) * length[None, :] / 2.0, 2)

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(HEADER)
    for u, i in zip(*np.nonzero(enrolled)):
        writer.writerow([f"u{u}", f"c{i}", f"{days[u, i]:.2f}", "c" if completed[u, i] else "d"])
    return out.getvalue()


def synthetic_affinity(users: int, courses: int, latent_dim: int = 5, seed: int = 0, match: float = 0.4,
                       quality_sd: float = 1.0) -> np.ndarray:
    """The latent affinity matrix :func:`generate_synthetic` draws for ``seed``."""
    return _latent(np.random.default_rng(seed), users, courses, latent_dim, match, quality_sd)
