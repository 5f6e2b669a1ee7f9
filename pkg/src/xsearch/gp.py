"""Squared-exponential Gaussian process regression.

Zero-mean GP with an ARD squared-exponential kernel and a fixed Gaussian
likelihood noise. Besides the usual predictive mean and variance, a model
snapshot exposes the posterior of the process gradient at a query point
after conditioning on a *virtual* noise-free observation ``f(x) = u``. That
quantity is what the crossing statistics in :mod:`xsearch.crossings` are
built from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

DEFAULT_NOISE_VARIANCE = 1e-4  # sigma_n = 0.01
VIRTUAL_JITTER = 1e-8

_JITTER_START = 1e-10
_JITTER_MAX = 1e-4


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky factorization failed even after the maximum jitter."""


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of the squared-exponential kernel.

    ``noise_variance`` is the likelihood noise sigma_n^2; it is held fixed and
    never fitted.
    """

    lengthscales: tuple[float, ...]
    signal_variance: float = 1.0
    noise_variance: float = DEFAULT_NOISE_VARIANCE

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        if not ls or min(ls) <= 0:
            raise ValueError(f"lengthscales must be positive, got {ls}")
        if self.signal_variance <= 0 or self.noise_variance <= 0:
            raise ValueError("signal and noise variance must be positive")

    @classmethod
    def isotropic(cls, dim: int, lengthscale: float, signal_variance: float = 1.0,
                  noise_variance: float = DEFAULT_NOISE_VARIANCE) -> "KernelParams":
        return cls((lengthscale,) * dim, signal_variance, noise_variance)

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def to_dict(self) -> dict:
        return {
            "lengthscales": list(self.lengthscales),
            "signal_variance": self.signal_variance,
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelParams":
        return cls(tuple(d["lengthscales"]), d["signal_variance"], d["noise_variance"])


@dataclass(frozen=True)
class HyperPriors:
    """Box priors on the kernel hyperparameters.

    With ``penalty == 0`` the MAP estimate is the bounded maximum-likelihood
    point. A positive penalty adds ``penalty * ||theta - centre||^2`` in log
    space, pulling towards the geometric centre of the boxes.
    """

    lengthscale_bounds: tuple[float, float] = (0.01, 2.0)
    signal_variance_bounds: tuple[float, float] = (0.1, 10.0)
    penalty: float = 0.0

    def __post_init__(self):
        for lo, hi in (self.lengthscale_bounds, self.signal_variance_bounds):
            if not 0 < lo < hi:
                raise ValueError(f"invalid bounds ({lo}, {hi})")

    def scaled(self, c: float) -> "HyperPriors":
        """Priors for inputs rescaled by ``c``."""
        lo, hi = self.lengthscale_bounds
        return HyperPriors((lo * c, hi * c), self.signal_variance_bounds, self.penalty)


@dataclass
class Dataset:
    """Observed inputs (rows in the unit hypercube) and scalar outputs."""

    inputs: np.ndarray
    outputs: np.ndarray
    dim: int = field(default=0)

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, self.dim or 1) if x.size else x.reshape(0, self.dim or 1)
        y = np.asarray(self.outputs, dtype=float).reshape(-1)
        if self.dim and x.shape[1] != self.dim:
            raise ValueError(f"inputs have {x.shape[1]} columns, expected {self.dim}")
        if x.shape[0] != y.shape[0]:
            raise ValueError("inputs and outputs differ in length")
        if x.size and (x.min() < 0.0 or x.max() > 1.0):
            raise ValueError("inputs must lie in the unit hypercube")
        self.inputs, self.outputs, self.dim = x, y, x.shape[1]
        if self.dim < 1:
            raise ValueError("dimension must be at least 1")

    @classmethod
    def empty(cls, dim: int) -> "Dataset":
        return cls(np.zeros((0, dim)), np.zeros(0), dim)

    def __len__(self) -> int:
        return self.outputs.shape[0]

    def append(self, x, y: float) -> "Dataset":
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        return Dataset(np.vstack([self.inputs, x]), np.append(self.outputs, y), self.dim)

    def save(self, path: str | Path) -> None:
        header = ",".join([f"x{j + 1}" for j in range(self.dim)] + ["y"])
        table = np.column_stack([self.inputs, self.outputs])
        np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        dim = len(header) - 1
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if table.size == 0:
            return cls.empty(dim)
        return cls(table[:, :dim], table[:, dim], dim)


@dataclass(frozen=True)
class PosteriorGaussian:
    mean: float
    variance: float


@dataclass(frozen=True)
class GradientPosterior:
    """Per-dimension marginals of the gradient posterior at one point."""

    mean: np.ndarray
    stddev: np.ndarray


def _as_points(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1:
        x = x.reshape(-1, dim) if x.size == dim or dim == 1 else x.reshape(1, -1)
    if x.shape[-1] != dim:
        raise ValueError(f"points have dimension {x.shape[-1]}, expected {dim}")
    return x


def se_kernel(params: KernelParams, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gram matrix ``k(a_i, b_j)`` for point arrays of shape (n, D) and (m, D)."""
    ls = np.asarray(params.lengthscales)
    a = np.asarray(a, dtype=float) / ls
    b = np.asarray(b, dtype=float) / ls
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    np.maximum(sq, 0.0, out=sq)
    sq *= -0.5
    np.exp(sq, out=sq)
    sq *= params.signal_variance
    return sq


def kernel_eval(params: KernelParams, x, x_hat) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_hat = np.atleast_1d(np.asarray(x_hat, dtype=float))
    if x.shape != (params.dim,) or x_hat.shape != (params.dim,):
        raise ValueError(
            f"dimension mismatch: kernel has D={params.dim}, got {x.shape} and {x_hat.shape}"
        )
    r2 = np.sum(((x - x_hat) / np.asarray(params.lengthscales)) ** 2)
    return float(params.signal_variance * math.exp(-0.5 * r2))


def cholesky_jittered(k: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``k + jitter*I``, escalating jitter by 10x.

    Jitter starts at 1e-10*scale and stops at 1e-4*scale. ``k`` is restored
    to its original contents on return.
    """
    diag = np.diag_indices_from(k)
    jitter = _JITTER_START * scale
    while jitter <= _JITTER_MAX * scale * (1 + 1e-9):
        k[diag] += jitter
        try:
            return sla.cholesky(k, lower=True, check_finite=False), jitter
        except np.linalg.LinAlgError:
            pass
        finally:
            k[diag] -= jitter
        jitter *= 10.0
    raise FactorizationError(f"matrix not positive definite with jitter {jitter / 10:.1e}")


class GPModel:
    """Posterior snapshot of a zero-mean SE-kernel GP.

    Immutable once built: the Cholesky factor of ``K + sigma_n^2 I`` and the
    weight vector are computed in the constructor.

    Parameters
    ----------
    data : Dataset
    params : KernelParams
    derivative_variance : {"posterior", "prior"}
        How the gradient standard deviation is obtained. ``"posterior"`` uses
        the full posterior given the data and the virtual observation;
        ``"prior"`` uses the stationary prior value ``sigma_f / ell_j``.
    """

    def __init__(self, data: Dataset, params: KernelParams,
                 derivative_variance: Literal["posterior", "prior"] = "posterior"):
        if data.dim != params.dim:
            raise ValueError(f"dataset has D={data.dim}, kernel has D={params.dim}")
        if derivative_variance not in ("posterior", "prior"):
            raise ValueError(f"unknown derivative_variance {derivative_variance!r}")
        self.data = data
        self.params = params
        self.derivative_variance = derivative_variance
        self.dim = data.dim
        self._ls2 = np.asarray(params.lengthscales) ** 2
        n = len(data)
        if n:
            k = se_kernel(params, data.inputs, data.inputs)
            k[np.diag_indices(n)] += params.noise_variance
            self._chol, self.jitter = cholesky_jittered(k, params.signal_variance)
            self._alpha = sla.cho_solve((self._chol, True), data.outputs, check_finite=False)
        else:
            self._chol = np.zeros((0, 0))
            self._alpha = np.zeros(0)
            self.jitter = 0.0

    @property
    def n(self) -> int:
        return len(self.data)

    def _solve_lower(self, b: np.ndarray) -> np.ndarray:
        return sla.solve_triangular(self._chol, b, lower=True, check_finite=False)

    def predict(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and (latent, noise-free) variance at points ``x``."""
        x = _as_points(x, self.dim)
        sf2 = self.params.signal_variance
        if not self.n:
            return np.zeros(len(x)), np.full(len(x), sf2)
        kx = se_kernel(self.params, x, self.data.inputs)
        mean = kx @ self._alpha
        v = self._solve_lower(kx.T)
        var = sf2 - np.einsum("ij,ij->j", v, v)
        return mean, np.maximum(var, 0.0)

    def posterior(self, x) -> PosteriorGaussian:
        m, v = self.predict(x)
        return PosteriorGaussian(float(m[0]), float(v[0]))

    def posterior_mean(self, x) -> np.ndarray:
        x = _as_points(x, self.dim)
        if not self.n:
            return np.zeros(len(x))
        return se_kernel(self.params, x, self.data.inputs) @ self._alpha

    def gradient_terms(self, x) -> dict[str, np.ndarray]:
        """Joint posterior pieces of ``(f(x), grad f(x))`` given the data.

        Returns a dict with, for points of shape (n, D):

        ``mean``, ``var``      posterior of f(x), shape (n,)
        ``grad_mean``          E[grad f(x)], shape (n, D)
        ``grad_var``           Var[d f / d x_j], shape (n, D)
        ``cross``              Cov[d f / d x_j, f(x)], shape (n, D)
        """
        x = _as_points(x, self.dim)
        sf2 = self.params.signal_variance
        prior_gvar = sf2 / self._ls2
        npts = len(x)
        if not self.n:
            zeros = np.zeros((npts, self.dim))
            return {
                "mean": np.zeros(npts),
                "var": np.full(npts, sf2),
                "grad_mean": zeros,
                "grad_var": np.broadcast_to(prior_gvar, (npts, self.dim)).copy(),
                "cross": zeros.copy(),
            }
        xd = self.data.inputs
        kx = se_kernel(self.params, x, xd)  # (n, N)
        diff = x[:, None, :] - xd[None, :, :]  # (n, N, D)
        dk = -(diff / self._ls2) * kx[:, :, None]  # d k(x, x_i) / d x_j
        mean = kx @ self._alpha
        grad_mean = np.einsum("nid,i->nd", dk, self._alpha)
        rhs = np.concatenate([kx[:, :, None], dk], axis=2)  # (n, N, D+1)
        rhs = rhs.transpose(1, 0, 2).reshape(self.n, npts * (self.dim + 1))
        w = self._solve_lower(rhs).reshape(self.n, npts, self.dim + 1)
        v = w[:, :, 0]
        wg = w[:, :, 1:]
        var = np.maximum(sf2 - np.einsum("in,in->n", v, v), 0.0)
        grad_var = prior_gvar - np.einsum("ind,ind->nd", wg, wg)
        cross = -np.einsum("in,ind->nd", v, wg)
        return {
            "mean": mean,
            "var": var,
            "grad_mean": grad_mean,
            "grad_var": np.maximum(grad_var, 0.0),
            "cross": cross,
        }

    def virtual_gradient(self, terms: dict[str, np.ndarray], u) -> tuple[np.ndarray, np.ndarray]:
        """Gradient posterior after adding the virtual observation ``f(x) = u``.

        ``u`` may be a scalar or an array of S thresholds; the result then has
        shape (S, n, D). The virtual observation is conditioned noise-free up
        to a 1e-8 jitter.
        """
        u = np.asarray(u, dtype=float)
        denom = terms["var"] + VIRTUAL_JITTER * self.params.signal_variance
        resid = (u[..., None] - terms["mean"]) / denom  # (..., n)
        mu = terms["grad_mean"] + terms["cross"] * resid[..., None]
        if self.derivative_variance == "prior":
            nu = np.broadcast_to(
                np.sqrt(self.params.signal_variance / self._ls2), mu.shape
            )
        else:
            nu2 = terms["grad_var"] - terms["cross"] ** 2 / denom[:, None]
            nu = np.broadcast_to(np.sqrt(np.maximum(nu2, 0.0)), mu.shape)
        return mu, nu

    def gradient_posterior_with_virtual(self, x, u: float) -> GradientPosterior:
        terms = self.gradient_terms(_as_points(x, self.dim)[:1])
        mu, nu = self.virtual_gradient(terms, u)
        return GradientPosterior(mu[0].copy(), np.array(nu[0]))


def gradient_posterior_with_virtual(data: Dataset, params: KernelParams, x,
                                    u: float) -> GradientPosterior:
    return GPModel(data, params).gradient_posterior_with_virtual(x, u)


def posterior(data: Dataset, params: KernelParams, x) -> PosteriorGaussian:
    return GPModel(data, params).posterior(x)


def _nlml_and_grad(theta, x, y, sq_diffs, noise, priors_centre, penalty):
    dim = x.shape[1]
    ls2 = np.exp(2.0 * theta[:dim])
    sf2 = math.exp(theta[dim])
    scaled = sq_diffs / ls2  # (N, N, D)
    kern = sf2 * np.exp(-0.5 * scaled.sum(-1))
    n = len(y)
    k = kern.copy()
    k[np.diag_indices(n)] += noise
    try:
        chol, _ = cholesky_jittered(k, sf2)
    except FactorizationError:
        return np.inf, np.zeros_like(theta)
    alpha = sla.cho_solve((chol, True), y, check_finite=False)
    nlml = 0.5 * y @ alpha + np.log(np.diag(chol)).sum() + 0.5 * n * math.log(2 * math.pi)
    kinv = sla.cho_solve((chol, True), np.eye(n), check_finite=False)
    a = np.outer(alpha, alpha) - kinv
    grad = np.empty_like(theta)
    ak = a * kern
    # dK/dlog(ell_j) = K * (x_j - x'_j)^2 / ell_j^2
    grad[:dim] = -0.5 * np.einsum("ij,ijd->d", ak, scaled)
    grad[dim] = -0.5 * ak.sum()
    if penalty:
        delta = theta - priors_centre
        nlml += penalty * delta @ delta
        grad += 2.0 * penalty * delta
    return nlml, grad


def log_marginal_likelihood(data: Dataset, params: KernelParams) -> float:
    x, y = data.inputs, data.outputs
    sq = (x[:, None, :] - x[None, :, :]) ** 2
    theta = np.append(np.log(params.lengthscales), math.log(params.signal_variance))
    val, _ = _nlml_and_grad(theta, x, y, sq, params.noise_variance, theta, 0.0)
    return -val


def fit_hyperparameters(data: Dataset, priors: HyperPriors | None = None, restarts: int = 5,
                        seed: int = 0, noise_variance: float = DEFAULT_NOISE_VARIANCE,
                        initial: KernelParams | None = None) -> KernelParams:
    """Bounded MAP fit of lengthscales and signal variance.

    Optimizes in log space with L-BFGS-B and analytic gradients from
    ``restarts`` starting points: the centre of the prior box (or
    ``initial`` when given), then log-uniform draws from ``seed``. If every
    local search fails the best evaluated candidate is returned.
    """
    if not len(data):
        raise ValueError("cannot fit hyperparameters to an empty dataset")
    priors = priors or HyperPriors()
    dim = data.dim
    lo = np.log([priors.lengthscale_bounds[0]] * dim + [priors.signal_variance_bounds[0]])
    hi = np.log([priors.lengthscale_bounds[1]] * dim + [priors.signal_variance_bounds[1]])
    centre = 0.5 * (lo + hi)
    rng = np.random.default_rng(seed)
    starts = [centre]
    if initial is not None:
        starts[0] = np.clip(
            np.append(np.log(initial.lengthscales), math.log(initial.signal_variance)), lo, hi
        )
    for _ in range(max(restarts, 1) - 1):
        starts.append(lo + rng.random(dim + 1) * (hi - lo))

    x, y = data.inputs, data.outputs
    sq = (x[:, None, :] - x[None, :, :]) ** 2
    args = (x, y, sq, noise_variance, centre, priors.penalty)
    best_theta, best_val = starts[0], np.inf
    for theta0 in starts:
        val0, _ = _nlml_and_grad(theta0, *args)
        if val0 < best_val:
            best_theta, best_val = theta0, val0
        try:
            res = minimize(_nlml_and_grad, theta0, args=args, jac=True, method="L-BFGS-B",
                           bounds=list(zip(lo, hi)))
        except (ValueError, np.linalg.LinAlgError):
            continue
        if np.isfinite(res.fun) and res.fun < best_val:
            best_theta, best_val = np.clip(res.x, lo, hi), float(res.fun)
    best_theta = np.asarray(best_theta)
    return KernelParams(tuple(np.exp(best_theta[:dim])), float(np.exp(best_theta[dim])),
                        noise_variance)


def sample_prior_on_grid(params: KernelParams, grid, seed: int) -> Dataset:
    """One joint draw of the GP prior at ``grid``, returned as a table."""
    grid = _as_points(grid, params.dim)
    if not len(grid):
        raise ValueError("grid must be nonempty")
    k = se_kernel(params, grid, grid)
    chol, _ = cholesky_jittered(k, params.signal_variance)
    del k
    z = np.random.default_rng(seed).standard_normal(len(grid))
    return Dataset(grid, chol @ z, params.dim)


