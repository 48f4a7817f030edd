"""Diagonal Gaussians shared by the prior, posterior, and losses."""

from dataclasses import dataclass

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class DiagonalGaussian:
    mean: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.log_var = np.asarray(self.log_var, dtype=np.float64)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        eps = rng.standard_normal(self.mean.shape)
        return self.sample_eps(eps)

    def sample_eps(self, eps) -> np.ndarray:
        """Reparameterized draw mean + exp(logvar/2) * eps."""
        return self.mean + np.exp(0.5 * self.log_var) * eps

    def log_prob(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(-0.5 * np.sum(
            LOG_2PI + self.log_var
            + (x - self.mean) ** 2 / np.exp(self.log_var)))


def kl_diag(post: DiagonalGaussian, prior: DiagonalGaussian) -> float:
    """KL(post || prior) between diagonal Gaussians, in nats."""
    var_q, var_p = np.exp(post.log_var), np.exp(prior.log_var)
    return float(0.5 * np.sum(
        prior.log_var - post.log_var
        + (var_q + (post.mean - prior.mean) ** 2) / var_p - 1.0))
