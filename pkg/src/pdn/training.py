"""Mini-batch maximum-likelihood training with adaptive moment estimation.

Deterministic for a fixed seed: the validation split, the per-epoch shuffles,
and the batch reduction order are all driven by one seeded generator, and
weights are updated sequentially. Epoch 0 in the log is the evaluation of the
freshly initialized weights, before any update.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import InvalidArgumentError, InvalidConfigError, TrainingDivergedError
from .network import (
    NetworkConfig,
    NetworkWeights,
    backward_batch,
    forward_batch,
    init_weights,
    nll_batch,
)

COLLAPSE_THRESHOLD = 1e-6
_EVAL_CHUNK = 4096


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 64
    epochs: int = 200
    validation_fraction: float = 0.1
    seed: int = 0
    # Multiplier the step size decays to, exponentially over the epochs.
    # Constant-rate moment descent stalls at a precision plateau; the decayed
    # tail is what lets component means settle to sub-grid accuracy.
    lr_decay: float = 0.1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise InvalidConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise InvalidConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise InvalidConfigError(
                f"validation_fraction must be in [0, 1), got {self.validation_fraction}"
            )
        if not 0.0 < self.lr_decay <= 1.0:
            raise InvalidConfigError(f"lr_decay must be in (0, 1], got {self.lr_decay}")

    def learning_rate_at(self, epoch: int) -> float:
        """Step size for a 1-based epoch, decayed exponentially to
        learning_rate * lr_decay at the final epoch."""
        if self.epochs == 1:
            return self.learning_rate
        fraction = (epoch - 1) / (self.epochs - 1)
        return self.learning_rate * self.lr_decay**fraction


@dataclass
class EpochRecord:
    epoch: int
    train_nll: float
    val_nll: float
    wall_time_s: float
    collapsed_components: tuple[int, ...] = ()


@dataclass
class TrainingLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_val_nll(self) -> float:
        return self.records[self.best_epoch].val_nll

    def to_csv(self, path, config_hash: str | None = None) -> None:
        """Epoch CSV: epoch, train nll, validation nll, wall time. The wall
        time column is measured, hence not reproducible across runs."""
        with open(path, "w", encoding="utf-8") as fh:
            if config_hash is not None:
                fh.write(f"# config_hash={config_hash}\n")
            fh.write("epoch,train_nll,val_nll,wall_time_s,collapsed_components\n")
            for r in self.records:
                collapsed = ";".join(str(i) for i in r.collapsed_components)
                fh.write(
                    f"{r.epoch},{r.train_nll:.17g},{r.val_nll:.17g},"
                    f"{r.wall_time_s:.6f},{collapsed}\n"
                )


class AdamOptimizer:
    """Adaptive moment estimation over a list of parameter arrays."""

    def __init__(self, arrays, config: TrainConfig):
        self.config = config
        self.learning_rate = config.learning_rate
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.t = 0

    def step(self, arrays, grads) -> None:
        c = self.config
        self.t += 1
        bias1 = 1.0 - c.beta1**self.t
        bias2 = 1.0 - c.beta2**self.t
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m += (1.0 - c.beta1) * (g - m)
            v += (1.0 - c.beta2) * (g * g - v)
            a -= self.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + c.epsilon)


def _mean_nll_and_pi(weights, X, Y):
    """Full-set evaluation in fixed-size chunks; also tracks per-component
    max pi for collapse reporting."""
    total = 0.0
    pi_max = np.zeros(weights.config.components)
    for lo in range(0, X.shape[0], _EVAL_CHUNK):
        sl = slice(lo, lo + _EVAL_CHUNK)
        pi, mu, sigma = forward_batch(weights, X[sl])
        total += float(np.sum(nll_batch(pi, mu, sigma, Y[sl])))
        pi_max = np.maximum(pi_max, pi.max(axis=0))
    return total / X.shape[0], pi_max


def train(
    dataset: Dataset,
    net_config: NetworkConfig,
    train_config: TrainConfig = TrainConfig(),
) -> tuple[NetworkWeights, TrainingLog]:
    """Fit the mixture network on a normalized corpus.

    Returns the weights of the best-validation epoch together with the full
    per-epoch log. Raises TrainingDivergedError the moment a batch loss stops
    being finite.
    """
    if dataset.normalization is None:
        raise InvalidArgumentError("train expects a normalized dataset (see data.normalize)")
    X, Y = dataset.spectra, dataset.radii
    if net_config.input_dim != X.shape[1] or net_config.output_dim != Y.shape[1]:
        raise InvalidConfigError(
            f"network dims ({net_config.input_dim} in, {net_config.output_dim} out) "
            f"do not match corpus ({X.shape[1]} in, {Y.shape[1]} out)"
        )

    rng = np.random.default_rng(train_config.seed)
    n = X.shape[0]
    order = rng.permutation(n)
    n_val = int(round(train_config.validation_fraction * n))
    n_val = min(n_val, n - 1) if n > 1 else 0
    train_idx, val_idx = order[: n - n_val], order[n - n_val :]
    X_train, Y_train = X[train_idx], Y[train_idx]
    if n_val:
        X_val, Y_val = X[val_idx], Y[val_idx]
    else:
        X_val, Y_val = X_train, Y_train

    weights = init_weights(net_config)
    optimizer = AdamOptimizer(weights.arrays, train_config)
    log = TrainingLog()

    t0 = time.perf_counter()
    train_nll, pi_max = _mean_nll_and_pi(weights, X_train, Y_train)
    val_nll, _ = _mean_nll_and_pi(weights, X_val, Y_val)
    log.records.append(
        EpochRecord(0, train_nll, val_nll, time.perf_counter() - t0, _collapsed(pi_max))
    )
    best_val = val_nll
    best_weights = weights.copy()
    log.best_epoch = 0

    step = 0
    last_finite = val_nll
    n_train = X_train.shape[0]
    for epoch in range(1, train_config.epochs + 1):
        t_epoch = time.perf_counter()
        optimizer.learning_rate = train_config.learning_rate_at(epoch)
        shuffle = rng.permutation(n_train)
        for lo in range(0, n_train, train_config.batch_size):
            batch = shuffle[lo : lo + train_config.batch_size]
            loss, grads = backward_batch(weights, X_train[batch], Y_train[batch])
            step += 1
            if not np.isfinite(loss):
                raise TrainingDivergedError(step, last_finite)
            last_finite = loss
            optimizer.step(weights.arrays, grads)

        train_nll, pi_max = _mean_nll_and_pi(weights, X_train, Y_train)
        val_nll, _ = _mean_nll_and_pi(weights, X_val, Y_val)
        if not (np.isfinite(train_nll) and np.isfinite(val_nll)):
            raise TrainingDivergedError(step, last_finite)
        log.records.append(
            EpochRecord(
                epoch, train_nll, val_nll, time.perf_counter() - t_epoch, _collapsed(pi_max)
            )
        )
        if val_nll < best_val:
            best_val = val_nll
            best_weights = weights.copy()
            log.best_epoch = epoch

    return best_weights, log


def _collapsed(pi_max) -> tuple[int, ...]:
    """Components whose mixing weight stayed below threshold across the whole
    evaluated set. Reported, never pruned."""
    return tuple(int(i) for i in np.nonzero(pi_max < COLLAPSE_THRESHOLD)[0])
