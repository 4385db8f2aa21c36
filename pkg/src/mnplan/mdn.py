"""Isotropic Gaussian mixture head: constraints, log density, NLL gradient, sampling.

Raw head layout for ``q`` components in ``d`` dimensions (length ``q*(d+2)``)::

    [alpha logits (q) | means (q*d, component-major) | sigma pre-activations (q)]
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SIGMA_FLOOR = 1e-6
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class GmmParams:
    alpha: np.ndarray  # (q,)
    mu: np.ndarray  # (q, d)
    sigma: np.ndarray  # (q,)

    @property
    def n_components(self) -> int:
        return self.alpha.size

    @property
    def dim(self) -> int:
        return self.mu.shape[1]

    def is_valid(self, tol: float = 1e-9) -> bool:
        return bool(
            np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.sigma))
            and np.all(self.alpha >= 0) and abs(self.alpha.sum() - 1.0) <= tol and np.all(self.sigma > 0)
        )

    def to_dict(self) -> dict:
        return {"alpha": self.alpha.tolist(), "mu": self.mu.tolist(), "sigma": self.sigma.tolist()}


def head_size(q: int, d: int) -> int:
    return q * (d + 2)


def _split(raw, q, d):
    a = raw[..., :q]
    mu = raw[..., q:q + q * d].reshape(raw.shape[:-1] + (q, d))
    s = raw[..., q + q * d:]
    return a, mu, s


def _elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _softmax(a):
    e = np.exp(a - a.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def constrain_batch(raw, q: int, d: int):
    """Batched :func:`constrain`: returns ``(alpha, mu, sigma)`` arrays."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape[-1] != head_size(q, d):
        raise ValueError(f"raw head has {raw.shape[-1]} values, expected {head_size(q, d)}")
    if not np.all(np.isfinite(raw)):
        raise FloatingPointError("non-finite raw head output")
    a, mu, s = _split(raw, q, d)
    return _softmax(a), mu.copy(), _elu(s) + 1.0 + SIGMA_FLOOR


def constrain(raw, q: int, d: int) -> GmmParams:
    """softmax on the logits, identity on the means, ``elu + 1 + 1e-6`` on sigma."""
    alpha, mu, sigma = constrain_batch(np.asarray(raw).reshape(-1), q, d)
    return GmmParams(alpha, mu, sigma)


def _component_terms(alpha, mu, sigma, c):
    d = mu.shape[-1]
    diff = c[..., None, :] - mu
    sq = np.einsum("...qd,...qd->...q", diff, diff)
    with np.errstate(divide="ignore"):
        log_alpha = np.log(alpha)
    terms = log_alpha - 0.5 * d * LOG_2PI - d * np.log(sigma) - sq / (2.0 * sigma * sigma)
    return terms, diff, sq


def _logsumexp(t):
    m = np.max(t, axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return (m + np.log(np.sum(np.exp(t - m), axis=-1, keepdims=True)))[..., 0]


def log_density(params: GmmParams, c) -> float:
    """``log sum_i alpha_i N(c; mu_i, sigma_i^2 I)`` via log-sum-exp."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (params.dim,):
        raise ValueError(f"point has shape {c.shape}, mixture is {params.dim}-dimensional")
    terms, _, _ = _component_terms(params.alpha, params.mu, params.sigma, c)
    return float(_logsumexp(terms))


def density_naive(params: GmmParams, c) -> float:
    """Direct (non-log) evaluation of the mixture density."""
    c = np.asarray(c, dtype=np.float64)
    d = params.dim
    sq = np.sum((c - params.mu) ** 2, axis=1)
    norm = (2.0 * math.pi) ** (d / 2.0) * params.sigma ** d
    return float(np.sum(params.alpha / norm * np.exp(-sq / (2.0 * params.sigma ** 2))))


def nll_loss_and_grad(raw, target, q: int, d: int):
    """Negative log-likelihood of ``target`` and its gradient w.r.t. the raw head.

    Accepts a single vector or a batch ``(B, q*(d+2))`` with targets ``(B, d)``;
    returns per-sample losses and gradients of matching shape.
    """
    raw = np.asarray(raw, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    single = raw.ndim == 1
    if single:
        raw = raw[None, :]
        target = target[None, :]
    if target.shape != (raw.shape[0], d):
        raise ValueError("target shape does not match the head")
    a_raw, mu, s_raw = _split(raw, q, d)
    alpha, _, sigma = constrain_batch(raw, q, d)
    terms, diff, sq = _component_terms(alpha, mu, sigma, target)
    lse = _logsumexp(terms)
    loss = -lse
    resp = np.exp(terms - lse[:, None])  # responsibilities
    g_alpha = alpha - resp
    g_mu = -(resp / (sigma * sigma))[..., None] * diff
    dl_dsigma = -resp * (-d / sigma + sq / sigma ** 3)
    g_s = dl_dsigma * np.where(s_raw > 0, 1.0, np.exp(np.minimum(s_raw, 0.0)))
    grad = np.concatenate([g_alpha, g_mu.reshape(raw.shape[0], q * d), g_s], axis=1)
    if not (np.all(np.isfinite(loss)) and np.all(np.isfinite(grad))):
        raise FloatingPointError("non-finite NLL or gradient")
    if single:
        return float(loss[0]), grad[0]
    return loss, grad


def _pick_components(alpha, rng, n):
    # inverse-CDF draw; the last bin absorbs rounding in the cumulative sum
    cdf = np.cumsum(alpha)
    k = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    return np.minimum(k, len(alpha) - 1)


def sample(params: GmmParams, rng, size: int | None = None):
    """Draw a component by ``alpha`` then ``mu_k + sigma_k * z``."""
    n = 1 if size is None else size
    out, _ = sample_with_components(params, rng, n)
    return out[0] if size is None else out


def sample_with_components(params: GmmParams, rng, size: int):
    k = _pick_components(params.alpha, rng, size)
    z = rng.standard_normal((size, params.dim))
    return params.mu[k] + params.sigma[k][:, None] * z, k
