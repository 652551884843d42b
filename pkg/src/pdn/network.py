"""Mixture density network: spectrum in, Gaussian-mixture parameters out.

The front end is a tanh multilayer perceptron. Its head emits m*(d+2) raw
values per input, split into m mixing logits, m*d component means, and m raw
deviations. Constraints hold by construction:

    pi    = softmax(logits)            (non-negative, sums to 1)
    mu    = raw means                  (unconstrained)
    sigma = sigma_floor + exp(raw)     (isotropic, bounded away from 0)

The training loss is the negative log-likelihood of the conditional mixture,

    nll(x, y) = -log sum_i pi_i(x) N(y; mu_i(x), sigma_i(x)^2 I),

evaluated in log space via log-sum-exp. Gradients are hand-derived
reverse-mode accumulation through the softmax, the exp reparameterization,
and the mixture posterior responsibilities; `finite_difference_gradients`
provides the independent check.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int = 250
    hidden_layers: tuple[int, ...] = (256, 128)
    components: int = 10
    output_dim: int = 5
    sigma_floor: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        if self.input_dim < 1 or self.components < 1 or self.output_dim < 1:
            raise InvalidConfigError(
                f"input_dim, components, output_dim must all be >= 1, got "
                f"({self.input_dim}, {self.components}, {self.output_dim})"
            )
        if any(w < 1 for w in self.hidden_layers):
            raise InvalidConfigError(f"hidden widths must be >= 1, got {self.hidden_layers}")
        if self.sigma_floor <= 0:
            raise InvalidConfigError(f"sigma_floor must be > 0, got {self.sigma_floor}")

    @property
    def head_dim(self) -> int:
        return self.components * (self.output_dim + 2)


@dataclass
class MixtureParams:
    """Conditional mixture for one input: weights, means, isotropic deviations."""

    pi: np.ndarray  # (m,)
    mu: np.ndarray  # (m, d)
    sigma: np.ndarray  # (m,)

    @property
    def components(self) -> int:
        return self.pi.shape[0]

    @property
    def output_dim(self) -> int:
        return self.mu.shape[1]


@dataclass
class NetworkWeights:
    """Dense-layer parameters as [W0, b0, W1, b1, ..., W_head, b_head]."""

    config: NetworkConfig
    arrays: list

    def copy(self) -> "NetworkWeights":
        return NetworkWeights(self.config, [a.copy() for a in self.arrays])


def layer_dims(config: NetworkConfig) -> list[tuple[int, int]]:
    widths = [config.input_dim, *config.hidden_layers, config.head_dim]
    return list(zip(widths[:-1], widths[1:]))


def init_weights(config: NetworkConfig) -> NetworkWeights:
    """Glorot-uniform weights, zero biases; head deviation bias set so that the
    initial sigma is about 0.3 in normalized output space (a broad mixture
    avoids early component collapse)."""
    rng = np.random.default_rng(config.seed)
    arrays = []
    for fan_in, fan_out in layer_dims(config):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        arrays.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        arrays.append(np.zeros(fan_out))
    sigma_init = max(0.3 - config.sigma_floor, config.sigma_floor)
    m, d = config.components, config.output_dim
    arrays[-1][m + m * d :] = np.log(sigma_init)
    return NetworkWeights(config, arrays)


def _split_head(raw, config):
    m, d = config.components, config.output_dim
    logits = raw[:, :m]
    mu = raw[:, m : m + m * d].reshape(-1, m, d)
    raw_sigma = raw[:, m + m * d :]
    return logits, mu, raw_sigma


def _forward_batch(weights: NetworkWeights, X):
    """Batched forward pass. Returns (pi, log_pi, mu, sigma) and the
    activation stack needed by the backward pass."""
    config = weights.config
    activations = [X]
    h = X
    n_hidden = len(config.hidden_layers)
    for i in range(n_hidden):
        W, b = weights.arrays[2 * i], weights.arrays[2 * i + 1]
        h = np.tanh(h @ W + b)
        activations.append(h)
    W, b = weights.arrays[2 * n_hidden], weights.arrays[2 * n_hidden + 1]
    raw = h @ W + b

    logits, mu, raw_sigma = _split_head(raw, config)
    shifted = logits - logits.max(axis=1, keepdims=True)
    with np.errstate(over="ignore", under="ignore"):
        exp_l = np.exp(shifted)
        norm = exp_l.sum(axis=1, keepdims=True)
        pi = exp_l / norm
        log_pi = shifted - np.log(norm)
        sigma = config.sigma_floor + np.exp(raw_sigma)
    return pi, log_pi, mu, sigma, activations


def forward_batch(weights: NetworkWeights, X):
    """Mixture parameters for a batch of inputs: pi (n, m), mu (n, m, d), sigma (n, m)."""
    X = _checked_inputs(weights.config, X)
    pi, _, mu, sigma, _ = _forward_batch(weights, X)
    return pi, mu, sigma


def forward(weights: NetworkWeights, x) -> MixtureParams:
    """Mixture parameters for a single input vector."""
    pi, mu, sigma = forward_batch(weights, np.asarray(x, dtype=float)[None, :])
    return MixtureParams(pi[0], mu[0], sigma[0])


def _checked_inputs(config, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != config.input_dim:
        raise InvalidInputError(
            f"expected inputs of dimension {config.input_dim}, got shape {X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("inputs must be finite")
    return X


def _log_gaussians(mu, sigma, Y):
    """log N(y; mu_i, sigma_i^2 I) for every sample/component pair."""
    d = Y.shape[1]
    diff = Y[:, None, :] - mu
    sq = np.einsum("nmd,nmd->nm", diff, diff)
    return -0.5 * d * LOG_2PI - d * np.log(sigma) - sq / (2.0 * sigma**2), sq


def nll_batch(pi, mu, sigma, Y, log_pi=None):
    """Per-sample negative log mixture likelihood, shape (n,)."""
    if log_pi is None:
        with np.errstate(divide="ignore"):
            log_pi = np.log(pi)
    log_n, _ = _log_gaussians(mu, sigma, Y)
    return -_logsumexp(log_pi + log_n)


def _logsumexp(a):
    """Row-wise log(sum(exp)), stable down to densities near exp(-700) and below."""
    amax = a.max(axis=1, keepdims=True)
    with np.errstate(under="ignore"):
        out = amax[:, 0] + np.log(np.exp(a - amax).sum(axis=1))
    return out


def nll(params: MixtureParams, y) -> float:
    """Negative log-likelihood of one target under one conditional mixture."""
    y = np.asarray(y, dtype=float)
    if y.shape != (params.output_dim,):
        raise InvalidInputError(
            f"expected target of dimension {params.output_dim}, got shape {y.shape}"
        )
    return float(
        nll_batch(params.pi[None], params.mu[None], params.sigma[None], y[None])[0]
    )


def backward_batch(weights: NetworkWeights, X, Y):
    """Mean nll over the batch and its gradient w.r.t. every weight array.

    The head gradient follows from the posterior responsibilities
    r_i = pi_i N_i / sum_j pi_j N_j:

        d nll / d logit_i    = pi_i - r_i
        d nll / d mu_i       = r_i (mu_i - y) / sigma_i^2
        d nll / d raw_sig_i  = r_i (d / sigma_i - |y - mu_i|^2 / sigma_i^3)
                               * (sigma_i - sigma_floor)
    """
    config = weights.config
    X = _checked_inputs(config, X)
    Y = np.asarray(Y, dtype=float)
    n, d = Y.shape
    m = config.components

    pi, log_pi, mu, sigma, activations = _forward_batch(weights, X)
    log_n, sq = _log_gaussians(mu, sigma, Y)
    joint = log_pi + log_n
    lse = _logsumexp(joint)
    with np.errstate(under="ignore"):
        resp = np.exp(joint - lse[:, None])
    mean_nll = float(np.mean(-lse))

    delta = np.empty((n, config.head_dim))
    delta[:, :m] = pi - resp
    d_mu = (resp / sigma**2)[:, :, None] * (mu - Y[:, None, :])
    delta[:, m : m + m * d] = d_mu.reshape(n, m * d)
    delta[:, m + m * d :] = (
        resp * (d / sigma - sq / sigma**3) * (sigma - config.sigma_floor)
    )

    grads = [None] * len(weights.arrays)
    n_hidden = len(config.hidden_layers)
    for i in range(n_hidden, -1, -1):
        W = weights.arrays[2 * i]
        h_in = activations[i]
        grads[2 * i] = h_in.T @ delta / n
        grads[2 * i + 1] = delta.mean(axis=0)
        if i > 0:
            delta = (delta @ W.T) * (1.0 - activations[i] ** 2)
    return mean_nll, grads


def backward(weights: NetworkWeights, x, y):
    """Gradient of nll for a single (input, target) pair."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    value, grads = backward_batch(weights, x[None], y[None])
    return value, grads


def finite_difference_gradients(weights: NetworkWeights, X, Y, h: float = 1e-5):
    """Central-difference gradient of the mean nll, one entry at a time.

    Independent of `backward_batch`: only the forward pass and the batched
    nll are exercised. Slow by design; meant for small configurations.
    """

    def loss():
        pi, mu, sigma = forward_batch(weights, X)
        return float(np.mean(nll_batch(pi, mu, sigma, Y)))

    grads = []
    for array in weights.arrays:
        grad = np.zeros_like(array)
        flat = array.reshape(-1)
        gflat = grad.reshape(-1)
        for j in range(flat.size):
            original = flat[j]
            flat[j] = original + h
            up = loss()
            flat[j] = original - h
            down = loss()
            flat[j] = original
            gflat[j] = (up - down) / (2.0 * h)
        grads.append(grad)
    return grads


def gradient_relative_error(analytic, numeric) -> float:
    """max over all parameters of |a - b| / max(1, |a|, |b|)."""
    worst = 0.0
    for a, b in zip(analytic, numeric):
        scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        worst = max(worst, float(np.max(np.abs(a - b) / scale)))
    return worst
