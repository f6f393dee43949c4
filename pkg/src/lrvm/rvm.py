"""Sparse Bayesian binary classifier (relevance vector machine).

Training alternates a Laplace approximation of the weight posterior, found
by penalized Newton/IRLS iterations, with MacKay-style re-estimation of the
per-weight prior precisions ``alpha``. Bases whose precision exceeds the
prune threshold are removed for good.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import expit

from .kernel import cross_kernel


class RvmError(RuntimeError):
    """Raised when a posterior cannot be computed."""


@dataclass(frozen=True)
class TrainerConfig:
    alpha_init: float = 1e-4
    prune_threshold: float = 1e9
    tol: float = 1e-3
    max_outer: int = 500
    newton_tol: float = 1e-6
    max_newton: int = 25
    max_halvings: int = 10


DEFAULT_TRAINER = TrainerConfig()


@dataclass(frozen=True)
class DesignMatrix:
    """Rows are instances, columns are basis functions; column 0 is the bias when set."""

    values: np.ndarray
    has_bias: bool = True

    def __post_init__(self):
        V = np.asarray(self.values, dtype=float)
        if V.ndim != 2:
            raise ValueError("design matrix must be 2-D")
        if not np.all(np.isfinite(V)):
            raise ValueError("design matrix has non-finite entries")
        if self.has_bias and V.shape[1] and not np.all(V[:, 0] == 1.0):
            raise ValueError("bias column must be all ones")
        object.__setattr__(self, "values", V)

    @classmethod
    def from_kernel(cls, K) -> "DesignMatrix":
        K = np.asarray(K, dtype=float)
        return cls(np.hstack([np.ones((K.shape[0], 1)), K]), has_bias=True)

    @property
    def basis_count(self) -> int:
        return self.values.shape[1]


@dataclass
class PosteriorState:
    """Laplace approximation at the posterior mode, over the active bases only.

    Attributes
    ----------
    w_hat : ndarray (M_active,)
    sigma : ndarray (M_active, M_active)
        Inverse of the negative Hessian at the mode.
    b_diag : ndarray (N,)
        Bernoulli variances ``p (1 - p)`` at the mode.
    active : ndarray of int
        Design columns the state refers to.
    converged : bool
    newton_steps : int
    jitter : float
        Diagonal jitter that had to be added to factor the Hessian (0 if none).
    """

    w_hat: np.ndarray
    sigma: np.ndarray
    b_diag: np.ndarray
    active: np.ndarray
    converged: bool
    newton_steps: int
    jitter: float = 0.0


@dataclass(frozen=True)
class RvmModel:
    active: np.ndarray
    weights: np.ndarray
    alpha: np.ndarray
    gamma: float | None = None
    has_bias: bool = True

    @property
    def _kernel_mask(self) -> np.ndarray:
        if self.has_bias:
            return self.active != 0
        return np.ones(len(self.active), dtype=bool)

    @property
    def bias(self) -> float:
        if self.has_bias and len(self.active) and self.active[0] == 0:
            return float(self.weights[0])
        return 0.0

    @property
    def basis_rows(self) -> np.ndarray:
        """Training-row index of every surviving kernel basis."""
        cols = self.active[self._kernel_mask]
        return cols - 1 if self.has_bias else cols

    @property
    def kernel_weights(self) -> np.ndarray:
        return self.weights[self._kernel_mask]

    @property
    def kernel_alpha(self) -> np.ndarray:
        return self.alpha[self._kernel_mask]

    @property
    def rv_count(self) -> int:
        return int(np.count_nonzero(self._kernel_mask))


@dataclass(frozen=True)
class TrainReport:
    outer_iterations: int
    final_active: int
    converged: bool
    newton_failures: int = 0
    jitter_events: int = 0


def sigmoid(z):
    """Logistic function, overflow safe for large ``|z|``."""
    out = expit(np.asarray(z, dtype=float))
    return out if out.ndim else float(out)


def penalized_loglik(Phi, t, alpha, w) -> float:
    """``log p(t|w) - w' A w / 2`` for a Bernoulli likelihood with logit link."""
    y = Phi @ w
    return float(t @ y - np.logaddexp(0.0, y).sum() - 0.5 * (alpha * w) @ w)


def _spd_factor(H):
    """Cholesky factor of ``H``; escalating diagonal jitter on failure."""
    try:
        return cho_factor(H, lower=True, check_finite=False), 0.0
    except LinAlgError:
        pass
    M = H.shape[0]
    jitter = 1e-8 * np.trace(H) / M
    for _ in range(3):
        try:
            return cho_factor(H + jitter * np.eye(M), lower=True, check_finite=False), jitter
        except LinAlgError:
            jitter *= 10.0
    raise RvmError("Hessian is not positive definite even after jitter")


def irls_posterior(design: DesignMatrix, t, alpha, w0=None,
                   config: TrainerConfig = DEFAULT_TRAINER) -> PosteriorState:
    """Posterior mode and covariance of the weights for fixed ``alpha``.

    Bases with ``alpha = inf`` are treated as pruned. ``w0`` (full length)
    warm-starts the Newton iterations.
    """
    alpha = np.asarray(alpha, dtype=float)
    t = np.asarray(t, dtype=float)
    active = np.flatnonzero(np.isfinite(alpha))
    if active.size == 0:
        raise ValueError("no active basis functions")
    if np.any((t != 0) & (t != 1)):
        raise ValueError("targets must be binary")
    Phi = design.values[:, active]
    a = alpha[active]
    w = np.zeros(active.size) if w0 is None else np.asarray(w0, dtype=float)[active].copy()

    f = penalized_loglik(Phi, t, a, w)
    converged = False
    jitter = 0.0
    steps = 0
    for steps in range(1, config.max_newton + 1):
        p = sigmoid(Phi @ w)
        b = p * (1.0 - p)
        g = Phi.T @ (t - p) - a * w
        H = (Phi.T * b) @ Phi
        H.flat[::H.shape[0] + 1] += a
        cf, jit = _spd_factor(H)
        jitter = max(jitter, jit)
        delta = cho_solve(cf, g, check_finite=False)
        lam = 1.0
        for _ in range(config.max_halvings + 1):
            w_new = w + lam * delta
            f_new = penalized_loglik(Phi, t, a, w_new)
            if f_new >= f:
                break
            lam *= 0.5
        else:
            # no ascent direction left within roundoff
            converged = np.max(np.abs(lam * delta)) < config.newton_tol
            break
        w, f = w_new, f_new
        if np.max(np.abs(lam * delta)) < config.newton_tol:
            converged = True
            break

    p = sigmoid(Phi @ w)
    b = p * (1.0 - p)
    H = (Phi.T * b) @ Phi
    H.flat[::H.shape[0] + 1] += a
    cf, jit = _spd_factor(H)
    jitter = max(jitter, jit)
    sigma = cho_solve(cf, np.eye(active.size), check_finite=False)
    sigma = 0.5 * (sigma + sigma.T)
    return PosteriorState(w, sigma, b, active, converged, steps, jitter)


def update_alphas(w_hat, sigma, alpha, prune_threshold: float = DEFAULT_TRAINER.prune_threshold):
    """Re-estimated precisions ``(1 - alpha_i Sigma_ii) / w_i^2``.

    Non-positive, non-finite or over-threshold results come back as ``inf``.
    """
    w_hat = np.asarray(w_hat, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    sigma_diag = np.diag(sigma) if sigma.ndim == 2 else sigma.reshape(-1)
    if not (w_hat.shape == alpha.shape == sigma_diag.shape):
        raise ValueError("w_hat, sigma and alpha must cover the same active set")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        new = (1.0 - alpha * sigma_diag) / (w_hat * w_hat)
    bad = ~np.isfinite(new) | (new <= 0) | (new > prune_threshold)
    new[bad] = np.inf
    return new


def train_rvm(design: DesignMatrix, t, config: TrainerConfig = DEFAULT_TRAINER,
              gamma: float | None = None, callback=None) -> tuple[RvmModel, TrainReport]:
    """Fit a relevance vector classifier on ``design`` with binary targets ``t``.

    The bias column, when present, is never pruned; its precision is clamped
    at the prune threshold instead. ``callback(iteration, alpha, posterior)``
    is invoked after every hyperparameter update.
    """
    t = np.asarray(t, dtype=float)
    M = design.basis_count
    if design.values.shape[0] != t.shape[0] or t.shape[0] < 1:
        raise ValueError("design rows and targets disagree")
    alpha = np.full(M, config.alpha_init)
    w = np.zeros(M)
    converged = False
    failures = jitters = 0
    it = 0
    for it in range(1, config.max_outer + 1):
        post = irls_posterior(design, t, alpha, w, config)
        failures += not post.converged
        jitters += post.jitter > 0
        active = post.active
        old = alpha[active]
        new = update_alphas(post.w_hat, post.sigma, old, config.prune_threshold)
        if design.has_bias and active[0] == 0 and not np.isfinite(new[0]):
            new[0] = config.prune_threshold
        kept = np.isfinite(new)
        change = np.max(np.abs(np.log(new[kept]) - np.log(old[kept]))) if kept.any() else 0.0

        alpha = np.full(M, np.inf)
        alpha[active] = new
        w = np.zeros(M)
        w[active[kept]] = post.w_hat[kept]
        if callback is not None:
            callback(it, alpha.copy(), post)
        if not kept.any():
            break
        if kept.all() and change < config.tol:
            converged = True
            break

    if not np.isfinite(alpha).any():
        return RvmModel(np.empty(0, dtype=np.int64), np.empty(0), np.empty(0), gamma,
                        design.has_bias), TrainReport(it, 0, converged, failures, jitters)

    post = irls_posterior(design, t, alpha, w, config)
    failures += not post.converged
    jitters += post.jitter > 0
    model = RvmModel(
        active=post.active,
        weights=post.w_hat,
        alpha=alpha[post.active],
        gamma=gamma,
        has_bias=design.has_bias,
    )
    return model, TrainReport(it, len(post.active), converged, failures, jitters)


def predict_prob(model: RvmModel, kappa) -> float:
    """Class-1 probability given kernel values for the model's non-bias bases."""
    kappa = np.asarray(kappa, dtype=float).reshape(-1)
    if kappa.shape[0] != model.rv_count:
        raise ValueError(f"expected {model.rv_count} kernel values, got {kappa.shape[0]}")
    return float(sigmoid(model.bias + model.kernel_weights @ kappa))


def prior_variance_profile(model: RvmModel, x, rv_rows, include_bias: bool = True) -> float:
    """Prior variance of the latent output at ``x``: sum of ``phi_m(x)^2 / alpha_m``.

    ``rv_rows`` holds the input rows of the model's kernel bases, in order.
    The bias basis contributes the constant ``1 / alpha_bias``.
    """
    if len(model.active) == 0:
        raise ValueError("model has no active bases")
    if model.gamma is None:
        raise ValueError("model carries no kernel width")
    phi = cross_kernel(x, rv_rows, model.gamma)
    if phi.shape[0] != model.rv_count:
        raise ValueError("rv_rows do not match the model's kernel bases")
    value = float(np.sum(phi * phi / model.kernel_alpha))
    if include_bias and model.has_bias and model.active[0] == 0:
        value += 1.0 / model.alpha[0]
    return value
