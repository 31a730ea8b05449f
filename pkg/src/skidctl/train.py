"""Damped least-squares training of the inverse-map network.

Full-batch training: residuals are stacked over the batch, the residual
Jacobian is accumulated analytically by reverse-mode passes, and each
candidate step solves the damped normal equations

    (J^T J + mu I) dw = -J^T xi

with a symmetric positive-definite factorization.  Accepted steps divide
the damping by beta, rejected steps multiply it, so the method slides
between Gauss-Newton and small gradient-descent steps.  Stopping follows
the goal / gradient-floor / step-floor / epoch-cap / validation-failure
rules; the returned parameters are the ones with the best validation MSE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    ContractError,
    InvalidParameterError,
    LMStepError,
    NumericFaultError,
    TrainingDivergedError,
)
from .network import Batch, Network, flatten, unflatten

MU_MIN = 1e-12
MU_MAX = 1e12


@dataclass(frozen=True)
class LMConfig:
    """Damping schedule, stop criteria and the pipeline seed."""

    mu0: float = 1e-3
    beta: float = 10.0
    max_epochs: int = 200
    goal: float = 1e-3
    min_grad: float = 1e-4
    step_tol: float = 1e-10
    max_val_failures: int = 6
    seed: int = 0

    def __post_init__(self):
        if not self.mu0 > 0.0:
            raise InvalidParameterError(f"mu0 must be positive, got {self.mu0!r}")
        if not self.beta > 1.0:
            raise InvalidParameterError(f"beta must exceed 1, got {self.beta!r}")
        if not self.goal > 0.0:
            raise InvalidParameterError(f"goal must be positive, got {self.goal!r}")
        if not self.min_grad > 0.0:
            raise InvalidParameterError(f"min_grad must be positive, got {self.min_grad!r}")
        if self.step_tol < 0.0:
            raise InvalidParameterError(f"step_tol must be >= 0, got {self.step_tol!r}")
        if self.max_epochs < 1 or self.max_val_failures < 1:
            raise InvalidParameterError("max_epochs and max_val_failures must be >= 1")


@dataclass(frozen=True)
class DataSplit:
    """Disjoint train/validation/test index sets covering all samples."""

    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    ratios: tuple[float, float, float]


def split_data(n: int, ratios=(0.70, 0.15, 0.15), seed: int = 0) -> DataSplit:
    """Seeded random partition: floor-sized val/test, remainder to train."""
    if len(ratios) != 3 or any(r <= 0.0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-12:
        raise ContractError(f"ratios must be three positive values summing to 1, got {ratios!r}")
    n_val = int(math.floor(ratios[1] * n))
    n_test = int(math.floor(ratios[2] * n))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ContractError(f"n={n} too small for ratios {ratios!r}: every split needs >= 1 sample")
    perm = np.random.default_rng(seed).permutation(n)
    return DataSplit(
        train_idx=perm[:n_train],
        val_idx=perm[n_train : n_train + n_val],
        test_idx=perm[n_train + n_val :],
        ratios=tuple(ratios),
    )


def _forward_internal(net: Network, v: np.ndarray):
    """Fast batched forward returning all activations (BLAS path).

    Training-internal only: column results may differ from the public
    forward in the last bits, which none of the training contracts need.
    """
    activations = [v[None, :]]
    last = len(net.weights) - 1
    for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = w @ activations[-1] + b[:, None]
        activations.append(z if layer == last else np.tanh(z))
    return activations


def compute_jacobian(net: Network, batch: Batch) -> np.ndarray:
    """Residual Jacobian, one row per sample, one column per parameter.

    Row p holds d(y_hat_p - t_p)/dw = d(y_hat_p)/dw in flatten() order.
    Accumulated by a vectorized reverse pass per layer; the reduction
    order is fixed, so results are deterministic.
    """
    if len(batch) < 1:
        raise ContractError("batch must be non-empty")
    acts = _forward_internal(net, batch.inputs)
    p = len(batch)
    # grad[j, p] = d y_hat_p / d z_l[j]
    grad = np.ones((1, p))
    blocks = [None] * len(net.weights)
    for layer in range(len(net.weights) - 1, -1, -1):
        a_prev = acts[layer]
        w_block = np.einsum("jp,kp->pjk", grad, a_prev).reshape(p, -1)
        blocks[layer] = (w_block, grad.T.copy())
        if layer > 0:
            grad = (net.weights[layer].T @ grad) * (1.0 - acts[layer] ** 2)
    jac = np.concatenate([part for pair in blocks for part in pair], axis=1)
    if not np.isfinite(jac).all():
        raise NumericFaultError("Jacobian contains non-finite entries")
    return jac


def _solve_damped(jtj: np.ndarray, jtxi: np.ndarray, mu: float) -> np.ndarray:
    """Solve (J^T J + mu I) dw = -J^T xi by Cholesky, with refinement.

    Raises LMStepError when the factorization fails or the solve cannot
    reach 1e-10 relative residual; the trainer treats that as a rejected
    step and retries at larger damping.
    """
    n = jtj.shape[0]
    a = jtj if mu == 0.0 else jtj + mu * np.eye(n)
    rhs = -jtxi
    try:
        cho = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
        dw = scipy.linalg.cho_solve(cho, rhs, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise LMStepError(f"Cholesky factorization failed at mu={mu!r}") from exc
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return np.zeros(n)
    for _ in range(2):
        residual = a @ dw - rhs
        if float(np.linalg.norm(residual)) <= 1e-10 * rhs_norm:
            return dw
        dw = dw - scipy.linalg.cho_solve(cho, residual, check_finite=False)
    residual = a @ dw - rhs
    if float(np.linalg.norm(residual)) > 1e-10 * rhs_norm:
        raise LMStepError(f"damped solve residual too large at mu={mu!r}")
    return dw


def lm_step(jac: np.ndarray, xi: np.ndarray, mu: float) -> np.ndarray:
    """One damped normal-equation step for residuals xi at damping mu."""
    if mu < 0.0:
        raise ContractError(f"mu must be >= 0, got {mu!r}")
    jac = np.asarray(jac, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    return _solve_damped(jac.T @ jac, jac.T @ xi, mu)


@dataclass
class EpochRecord:
    epoch: int
    mu: float
    accepted: bool
    train_mse: float
    val_mse: float
    test_mse: float
    grad_norm: float
    val_failures: int


@dataclass
class TrainHistory:
    """Per-epoch diagnostics plus the stop reason."""

    epochs: list[EpochRecord] = field(default_factory=list)
    stop_reason: str = ""
    best_val_mse: float = math.inf
    best_epoch: int = 0

    def accepted_train_mse(self) -> list[float]:
        return [rec.train_mse for rec in self.epochs if rec.accepted]

    def mu_trajectory(self) -> list[float]:
        return [rec.mu for rec in self.epochs]


def _batch_mse(net: Network, batch: Batch) -> float:
    out = _forward_internal(net, batch.inputs)[-1][0]
    diff = out - batch.targets
    return float(diff @ diff / diff.size)


def train(
    net: Network,
    batch_train: Batch,
    batch_val: Batch,
    batch_test: Batch,
    cfg: LMConfig,
) -> tuple[Network, TrainHistory]:
    """Full-batch damped least-squares training loop.

    The caller supplies batches already normalized to [-1, +1].  Accepted
    epochs strictly decrease the training MSE; damping moves by exactly a
    factor of beta per epoch (clamped to [1e-12, 1e12]).
    """
    sizes = list(net.layer_sizes)
    w = flatten(net)
    current = unflatten(sizes, w)
    history = TrainHistory()
    mu = cfg.mu0
    p = len(batch_train)

    e_train = _batch_mse(current, batch_train)
    e_val = _batch_mse(current, batch_val)
    e_test = _batch_mse(current, batch_test)
    best_val, best_w, best_epoch = e_val, w.copy(), 0
    val_failures = 0
    jac = None  # cache: valid while w is unchanged

    for epoch in range(1, cfg.max_epochs + 1):
        if e_train <= cfg.goal:
            history.stop_reason = "goal"
            break
        if jac is None:
            jac = compute_jacobian(current, batch_train)
            xi = _forward_internal(current, batch_train.inputs)[-1][0] - batch_train.targets
            jtj = jac.T @ jac
            jtxi = jac.T @ xi
        grad_norm = float(np.linalg.norm((2.0 / p) * jtxi))
        if grad_norm < cfg.min_grad:
            history.stop_reason = "min_grad"
            break

        try:
            dw = _solve_damped(jtj, jtxi, mu)
        except LMStepError:
            # failed solve counts as a rejected step at increased damping
            if mu >= MU_MAX:
                history.stop_reason = "diverged"
                raise TrainingDivergedError(
                    "damping ceiling reached without a solvable step", history
                )
            mu = min(mu * cfg.beta, MU_MAX)
            history.epochs.append(
                EpochRecord(epoch, mu, False, e_train, e_val, e_test, grad_norm, val_failures)
            )
            continue

        step_norm = float(np.linalg.norm(dw))
        if step_norm < cfg.step_tol:
            history.stop_reason = "step_tol"
            break

        candidate = unflatten(sizes, w + dw)
        e_cand = _batch_mse(candidate, batch_train)
        if e_cand < e_train:
            w = w + dw
            current = candidate
            e_train = e_cand
            e_val = _batch_mse(current, batch_val)
            e_test = _batch_mse(current, batch_test)
            mu = max(mu / cfg.beta, MU_MIN)
            jac = None
            accepted = True
            if e_val < best_val:
                best_val, best_w, best_epoch = e_val, w.copy(), epoch
                val_failures = 0
            else:
                val_failures += 1
        else:
            if mu >= MU_MAX:
                history.stop_reason = "diverged"
                raise TrainingDivergedError(
                    "damping ceiling reached without an acceptable step", history
                )
            mu = min(mu * cfg.beta, MU_MAX)
            accepted = False
        history.epochs.append(
            EpochRecord(epoch, mu, accepted, e_train, e_val, e_test, grad_norm, val_failures)
        )
        if accepted and val_failures >= cfg.max_val_failures:
            history.stop_reason = "val_failures"
            break
    else:
        history.stop_reason = "max_epochs"
    history.best_val_mse = best_val
    history.best_epoch = best_epoch
    return unflatten(sizes, best_w), history
