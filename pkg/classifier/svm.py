"""
Soft-margin RBF support vector machine trained with sequential minimal
optimization (SMO).

Decision function: f(x) = sum_k y_k alpha_k K(x, s_k) + b, with
K(x, y) = exp(-gamma * ||x - y||^2).
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SvmConfig:
    """
    SMO hyperparameters.

    ``gamma`` may be the string 'scale' (1 / (n_features * feature variance));
    ``class_weight_neg`` of None scales the negative-class box by n_pos / n_neg.
    """

    gamma: object = 'scale'
    C: float = 1.0
    tol: float = 1e-3
    max_passes: int = 1000
    class_weight_neg: object = None
    seed: int = 0
    alpha_eps: float = 1e-12

    def __post_init__(self):
        if self.gamma != 'scale' and not float(self.gamma) > 0:
            raise ValueError(f"gamma must be positive or 'scale', got {self.gamma}")
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.max_passes < 1:
            raise ValueError(f"max_passes must be >= 1, got {self.max_passes}")
        if self.class_weight_neg is not None and not self.class_weight_neg > 0:
            raise ValueError(f"class_weight_neg must be positive, got {self.class_weight_neg}")

    def to_dict(self):
        return {
            'gamma': self.gamma,
            'C': self.C,
            'tol': self.tol,
            'max_passes': self.max_passes,
            'class_weight_neg': self.class_weight_neg,
            'seed': self.seed,
        }


@dataclass
class SvmModel:
    """Support vectors, their signed dual coefficients y_k*alpha_k and the bias."""

    support_vectors: np.ndarray
    dual_coeffs: np.ndarray
    bias: float
    gamma: float
    converged: bool = True
    support_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    box: tuple = (1.0, 1.0)

    @property
    def n_support(self):
        return self.dual_coeffs.shape[0]

    @property
    def dim(self):
        return self.support_vectors.shape[1]


def rbf_kernel(x, y, gamma):
    """exp(-gamma * ||x - y||^2) for two vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"rbf_kernel: shapes differ, {x.shape} vs {y.shape}")
    return float(np.exp(-gamma * np.sum((x - y) ** 2)))


def rbf_gram(X, Y, gamma):
    """Kernel matrix between the rows of X and the rows of Y."""
    return np.exp(-gamma * cdist(X, Y, 'sqeuclidean'))


def resolve_gamma(gamma, X):
    if gamma != 'scale':
        return float(gamma)
    var = float(X.var())
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


class _SmoSolver:
    """Platt's SMO with an error cache and per-sample box constraints."""

    def __init__(self, K, y, box, tol, alpha_eps, rng):
        self.K = K
        self.y = y
        self.box = box
        self.tol = tol
        self.alpha_eps = alpha_eps
        self.rng = rng
        self.n = y.shape[0]
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        self.E = -y.astype(np.float64)

    def refresh_errors(self):
        self.E = self.K @ (self.alpha * self.y) + self.b - self.y

    def _dual_objective(self, i1, i2, a1, a2):
        # Negative dual restricted to the pair; other alphas held fixed
        K, y = self.K, self.y
        v1 = self.E[i1] + y[i1] - self.b - y[i1] * self.alpha[i1] * K[i1, i1] - y[i2] * self.alpha[i2] * K[i1, i2]
        v2 = self.E[i2] + y[i2] - self.b - y[i1] * self.alpha[i1] * K[i1, i2] - y[i2] * self.alpha[i2] * K[i2, i2]
        s = y[i1] * y[i2]
        return (0.5 * K[i1, i1] * a1 * a1 + 0.5 * K[i2, i2] * a2 * a2 + s * K[i1, i2] * a1 * a2
                + y[i1] * a1 * v1 + y[i2] * a2 * v2 - a1 - a2)

    def take_step(self, i1, i2):
        if i1 == i2:
            return False
        K, y = self.K, self.y
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = y[i1], y[i2]
        E1, E2 = self.E[i1], self.E[i2]
        C1, C2 = self.box[i1], self.box[i2]
        s = y1 * y2

        if y1 != y2:
            L, H = max(0.0, a2 - a1), min(C2, C1 + a2 - a1)
        else:
            L, H = max(0.0, a1 + a2 - C1), min(C2, a1 + a2)
        if L >= H:
            return False

        eta = K[i1, i1] + K[i2, i2] - 2.0 * K[i1, i2]
        if eta > 0:
            a2_new = min(H, max(L, a2 + y2 * (E1 - E2) / eta))
        else:
            obj_L = self._dual_objective(i1, i2, a1 + s * (a2 - L), L)
            obj_H = self._dual_objective(i1, i2, a1 + s * (a2 - H), H)
            if obj_L < obj_H - self.alpha_eps:
                a2_new = L
            elif obj_L > obj_H + self.alpha_eps:
                a2_new = H
            else:
                a2_new = a2

        if abs(a2_new - a2) < self.alpha_eps * (a2_new + a2 + self.alpha_eps):
            return False

        a1_new = a1 + s * (a2 - a2_new)
        if a1_new < 0.0:
            a2_new += s * a1_new
            a1_new = 0.0
        elif a1_new > C1:
            a2_new += s * (a1_new - C1)
            a1_new = C1

        d1 = y1 * (a1_new - a1)
        d2 = y2 * (a2_new - a2)
        b1 = self.b - E1 - d1 * K[i1, i1] - d2 * K[i1, i2]
        b2 = self.b - E2 - d1 * K[i1, i2] - d2 * K[i2, i2]
        if 0.0 < a1_new < C1:
            b_new = b1
        elif 0.0 < a2_new < C2:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)

        self.E += d1 * K[i1] + d2 * K[i2] + (b_new - self.b)
        self.alpha[i1], self.alpha[i2] = a1_new, a2_new
        self.b = b_new
        return True

    def _violates(self, i):
        r = self.E[i] * self.y[i]
        return (r < -self.tol and self.alpha[i] < self.box[i]) or (r > self.tol and self.alpha[i] > 0.0)

    def examine(self, i2):
        if not self._violates(i2):
            return 0
        non_bound = np.flatnonzero((self.alpha > 0.0) & (self.alpha < self.box))
        if non_bound.size > 1:
            i1 = int(non_bound[np.argmax(np.abs(self.E[non_bound] - self.E[i2]))])
            if self.take_step(i1, i2):
                return 1
        if non_bound.size:
            for i1 in np.roll(non_bound, -int(self.rng.integers(non_bound.size))):
                if self.take_step(int(i1), i2):
                    return 1
        for i1 in np.roll(np.arange(self.n), -int(self.rng.integers(self.n))):
            if self.take_step(int(i1), i2):
                return 1
        return 0

    def max_violation(self):
        """Largest KKT violation over all samples (0 when optimal within tol)."""
        r = self.E * self.y
        lower = np.where(self.alpha < self.box, np.maximum(-r, 0.0), 0.0)
        upper = np.where(self.alpha > 0.0, np.maximum(r, 0.0), 0.0)
        return float(np.max(np.maximum(lower, upper)))

    def _snapshot(self):
        violation = self.max_violation()
        self.violations.append(violation)
        if self.best is None or violation < self.best[0]:
            self.best = (violation, self.alpha.copy(), self.b)

    def _restore_best(self):
        _, alpha, b = self.best
        self.alpha, self.b = alpha.copy(), b
        self.refresh_errors()

    def solve(self, max_passes):
        """
        Run SMO passes until the KKT conditions hold within tol.

        When ``max_passes`` runs out first, the iterate with the smallest
        KKT violation seen at the end of a pass is restored.
        """
        self.violations, self.best = [], None
        examine_all = True
        for _ in range(max_passes):
            if examine_all:
                candidates = range(self.n)
            else:
                candidates = np.flatnonzero((self.alpha > 0.0) & (self.alpha < self.box))
            changed = sum(self.examine(int(i)) for i in candidates)
            self.refresh_errors()
            self._snapshot()

            if examine_all:
                if changed == 0 and self.violations[-1] <= self.tol:
                    return True
                if changed:
                    examine_all = False
            elif changed == 0:
                examine_all = True
        self._restore_best()
        return self.best[0] <= self.tol


def smo_train(X, y, cfg):
    """
    Fit the SVM dual with SMO.

    Args:
        X (np.ndarray): Feature matrix, one sample per row
        y (np.ndarray): Labels in {+1, -1}
        cfg (SvmConfig): Hyperparameters

    Returns:
        SvmModel: Model built from the samples with alpha > 0. ``converged``
        is False when KKT conditions still fail after ``max_passes`` loops.

    Raises:
        ValueError: On single-class input or labels outside {+1, -1}
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"smo_train: features {X.shape} do not match labels {y.shape}")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("smo_train: labels must be +1 or -1")
    n_pos = int(np.sum(y > 0))
    n_neg = int(np.sum(y < 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError(f"smo_train needs both classes, got {n_pos} positive and {n_neg} negative")

    gamma = resolve_gamma(cfg.gamma, X)
    weight_neg = cfg.class_weight_neg if cfg.class_weight_neg is not None else n_pos / n_neg
    c_pos, c_neg = cfg.C, cfg.C * weight_neg
    box = np.where(y > 0, c_pos, c_neg)

    solver = _SmoSolver(rbf_gram(X, X, gamma), y, box, cfg.tol, cfg.alpha_eps, np.random.default_rng(cfg.seed))
    converged = solver.solve(cfg.max_passes)
    if not converged:
        logger.warning(f"SMO stopped after {cfg.max_passes} passes; keeping the iterate with KKT violation "
                       f"{solver.max_violation():.3e} > tol {cfg.tol}")

    support = np.flatnonzero(solver.alpha > 0.0)
    logger.debug(f"SMO finished: {support.size} support vectors of {y.size}, b={solver.b:.6f}")
    return SvmModel(
        support_vectors=X[support].copy(),
        dual_coeffs=(y * solver.alpha)[support],
        bias=float(solver.b),
        gamma=gamma,
        converged=converged,
        support_indices=support,
        box=(c_pos, c_neg),
    )


def decision_value(model, x):
    """
    Signed score f(x) = sum_k y_k alpha_k K(x, s_k) + b.

    Args:
        model (SvmModel): Trained model
        x (np.ndarray): One feature vector or a batch (one per row)

    Returns:
        float or np.ndarray: Score(s); the predicted class is the sign
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[np.newaxis, :] if single else x
    if model.n_support == 0:
        scores = np.full(X.shape[0], model.bias)
    else:
        if X.shape[1] != model.dim:
            raise ValueError(f"decision_value: expected features of length {model.dim}, got {X.shape[1]}")
        scores = rbf_gram(X, model.support_vectors, model.gamma) @ model.dual_coeffs + model.bias
    return float(scores[0]) if single else scores


def predict(model, x):
    """+1 (genuine) when the score is >= 0, otherwise -1."""
    return np.where(np.asarray(decision_value(model, x)) >= 0.0, 1, -1)
