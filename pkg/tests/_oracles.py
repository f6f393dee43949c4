"""Independent reference computations used by several test modules."""
import numpy as np


def penalized_objective(Phi, t, alpha, w):
    """Bernoulli log-likelihood minus the Gaussian prior penalty, written from scratch."""
    y = Phi @ w
    log_p = -np.logaddexp(0.0, -y)
    log_q = -np.logaddexp(0.0, y)
    return float(np.sum(t * log_p + (1 - t) * log_q) - 0.5 * np.sum(alpha * w ** 2))


def fd_gradient(f, w, h=1e-6):
    g = np.zeros_like(w)
    for i in range(len(w)):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (f(w + e) - f(w - e)) / (2 * h)
    return g


def mode_residual(Phi, t, alpha, w):
    """Relative infinity norm of the finite-difference gradient at ``w``.

    Normalized by ``1 + max_i sum_n |Phi_ni|``, the largest magnitude the
    likelihood gradient of any single weight can take.
    """
    g = fd_gradient(lambda v: penalized_objective(Phi, t, alpha, v), np.asarray(w, float))
    scale = np.abs(Phi).sum(axis=0).max()
    return np.max(np.abs(g)) / (1.0 + scale)


def random_problem(rng, n_lo=5, n_hi=30):
    """Bias plus Gaussian bases on random 2-D points, random binary targets, random alphas."""
    n = int(rng.integers(n_lo, n_hi + 1))
    X = rng.normal(size=(n, 2))
    gamma = float(rng.choice([0.25, 0.5, 1.0, 2.0]))
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    Phi = np.hstack([np.ones((n, 1)), np.exp(-gamma * d2)])
    t = (rng.random(n) < 0.5).astype(float)
    t[0], t[1] = 0.0, 1.0
    alpha = 10.0 ** rng.uniform(-2, 2, size=n + 1)
    return Phi, t, alpha


def scalar_alpha_update(alpha, sigma_ii, w):
    return (1.0 - alpha * sigma_ii) / (w * w)
