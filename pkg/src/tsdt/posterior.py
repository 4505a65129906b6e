"""Gaussian posteriors over tree values.

Leaf accuracies carry Beta posteriors that are moment-matched to Normals,
a tree's terminal value is the probability-weighted sum of its leaf
accuracies, and internal search nodes combine their children either with
Clark's moment-matched maximum or by copying the best child.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dtree import leaf_probabilities

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Gaussian:
    mu: float
    var: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.var)):
            raise ValueError(f"non-finite Gaussian ({self.mu}, {self.var})")
        if self.var < 0:
            raise ValueError(f"negative variance {self.var}")

    @property
    def sd(self):
        return math.sqrt(self.var)


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    @classmethod
    def from_counts(cls, correct, n):
        """Uniform prior updated with ``correct`` hits out of ``n`` trials."""
        return cls(1.0 + correct, 1.0 + n - correct)


def beta_moments(p):
    """Normal with the mean and variance of ``Beta(p.alpha, p.beta)``."""
    a, b = float(p.alpha), float(p.beta)
    s = a + b
    return Gaussian(a / s, a * b / (s * s * (1.0 + s)))


def _norm_cdf(x):
    return 0.5 * math.erfc(-x / _SQRT2)


def _norm_pdf(x):
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def leaf_value_posterior(store, tree, gamma=0.75):
    """Posterior on the accuracy of ``tree``.

    Parameters
    ----------
    store : NodeStore
        Statistics of every leaf region of ``tree``.
    tree : TreeState
    gamma : float in (0, 1]
        Exponent applied to the aggregated variance; 1 leaves it untouched,
        smaller values keep the posterior from collapsing too fast.

    Returns
    -------
    Gaussian
        Mean ``sum_l p(l) mu_l`` and variance ``(sum_l p(l)^2 var_l) ** gamma``
        where ``p`` is the chain-rule leaf probability estimate.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    probs = leaf_probabilities(store, tree)
    mu = 0.0
    var = 0.0
    for key, p in probs.items():
        if key not in store:
            raise KeyError(f"leaf region {key} missing from store")
        stats = store[key]
        a = 1.0 + stats.correct
        b = 1.0 + stats.n - stats.correct
        s = a + b
        mu += p * a / s
        var += p * p * a * b / (s * s * (1.0 + s))
    return Gaussian(mu, var ** gamma if var > 0 else 0.0)


def clark_max(g1, g2):
    """Moment-matched Normal approximation of ``max(X1, X2)`` for independent Normals."""
    spread = g1.var + g2.var
    if spread <= 0.0:
        return Gaussian(max(g1.mu, g2.mu), 0.0)
    a = math.sqrt(spread)
    alpha = (g1.mu - g2.mu) / a
    cdf = _norm_cdf(alpha)
    cdf_neg = _norm_cdf(-alpha)
    pdf = _norm_pdf(alpha)
    mu = g1.mu * cdf + g2.mu * cdf_neg + a * pdf
    second = ((g1.mu ** 2 + g1.var) * cdf + (g2.mu ** 2 + g2.var) * cdf_neg
              + (g1.mu + g2.mu) * a * pdf)
    return Gaussian(mu, max(second - mu * mu, 0.0))


def fold_max(children):
    """Right-nested pairwise Clark maximum: ``max(g1, max(g2, ... max(g_{n-1}, g_n)))``."""
    if not children:
        raise ValueError("fold_max of an empty list")
    acc = children[-1]
    for g in reversed(children[:-1]):
        acc = clark_max(g, acc)
    return acc


def penalize(child, is_terminal, lam):
    if is_terminal or lam == 0:
        return child
    return Gaussian(child.mu - lam, child.var)


def fast_max(children, lam=0.0):
    """Posterior of the child with the largest penalised mean.

    ``children`` holds ``(Gaussian, is_terminal)`` pairs. Ties go to the
    terminal child, then to the earliest entry.
    """
    if not children:
        raise ValueError("fast_max of an empty list")
    best = None
    best_key = None
    for idx, (g, terminal) in enumerate(children):
        pg = penalize(g, terminal, lam)
        key = (pg.mu, 1 if terminal else 0, -idx)
        if best_key is None or key > best_key:
            best, best_key = pg, key
    return best


def _arrays(children, lam):
    mus = np.array([g.mu - (0.0 if t else lam) for g, t in children], dtype=float)
    sds = np.sqrt(np.array([g.var for g, _ in children], dtype=float))
    return mus, sds


def thompson_select(children, lam, rng):
    """Index of the child whose penalised posterior draw is largest."""
    if not children:
        raise ValueError("thompson_select over no children")
    mus, sds = _arrays(children, lam)
    return int(np.argmax(rng.normal(mus, sds)))


def policy_probabilities(children, lam, rng, trials=10_000):
    """Monte Carlo estimate of each child's probability of being selected."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    mus, sds = _arrays(children, lam)
    draws = rng.normal(mus, sds, size=(trials, len(children)))
    counts = np.bincount(np.argmax(draws, axis=1), minlength=len(children))
    return counts / trials
