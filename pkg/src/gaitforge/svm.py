"""Soft-margin SVM: SMO dual solver plus a one-vs-one multiclass wrapper.

The inner loop runs in the compiled ``gaitforge._smo`` extension when it is
available and falls back to a numpy implementation with identical pair
selection otherwise (``HAVE_COMPILED_SMO`` tells you which one you got).
Problems whose Gram matrix exceeds the memory budget use a row-caching
variant instead of a precomputed Gram.
"""

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonConvergence

try:
    from ._smo import solve_gram as _solve_gram_compiled
except ImportError:
    _solve_gram_compiled = None

HAVE_COMPILED_SMO = _solve_gram_compiled is not None


def default_c_grid(kernel):
    lo = -5 if kernel == "linear" else -1
    return [2.0**e for e in range(lo, 16, 2)]


def default_gamma_grid():
    return [2.0**e for e in range(-15, 6, 2)]


@dataclass(frozen=True)
class SvmConfig:
    """Kernel, hyper-parameter grids and solver budget."""

    kernel: str = "linear"
    c_grid: tuple = None
    gamma_grid: tuple = None
    class_weights: dict = None  # class label -> multiplier on C
    tol: float = 1e-3
    max_iter: int = 500_000
    cache_mb: float = 256.0

    def __post_init__(self):
        if self.kernel not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        object.__setattr__(
            self, "c_grid",
            tuple(self.c_grid) if self.c_grid else tuple(default_c_grid(self.kernel)),
        )
        if self.kernel == "rbf":
            object.__setattr__(
                self, "gamma_grid",
                tuple(self.gamma_grid) if self.gamma_grid else tuple(default_gamma_grid()),
            )
        else:
            object.__setattr__(self, "gamma_grid", (None,))
        if any(c <= 0 for c in self.c_grid):
            raise ValueError("C grid must be positive")
        if self.kernel == "rbf" and any(g <= 0 for g in self.gamma_grid):
            raise ValueError("gamma grid must be positive")


def kernel_matrix(kernel, gamma, X, Z=None):
    Z = X if Z is None else Z
    if kernel == "linear":
        return X @ Z.T
    sq_x = np.sum(X * X, axis=1)[:, None]
    sq_z = np.sum(Z * Z, axis=1)[None, :]
    d2 = np.maximum(sq_x + sq_z - 2.0 * (X @ Z.T), 0.0)
    return np.exp(-gamma * d2)


_ETA_MIN = 1e-12


def _solve_gram_python(K, y, C, tol, max_iter, alpha0=None):
    """Numpy SMO over a precomputed Gram; mirrors the compiled kernel."""
    n = K.shape[0]
    diag = np.ascontiguousarray(np.diag(K))
    if alpha0 is None:
        alpha = np.zeros(n)
        grad = np.full(n, -1.0)
    else:
        alpha = np.array(alpha0, dtype=float)
        grad = y * (K @ (alpha * y)) - 1.0
    pos = y > 0
    neg = ~pos
    for it in range(max_iter):
        crit = -y * grad
        in_up = (pos & (alpha < C)) | (neg & (alpha > 0.0))
        in_low = (pos & (alpha > 0.0)) | (neg & (alpha < C))
        up_vals = np.where(in_up, crit, -np.inf)
        low_vals = np.where(in_low, crit, np.inf)
        i = int(np.argmax(up_vals))
        m_up = up_vals[i]
        m_low = low_vals.min()
        gap = m_up - m_low
        if not np.isfinite(gap) or gap <= tol:
            return alpha, 0.5 * (m_up + m_low), it, gap
        # second-order partner selection (same rule as the compiled kernel)
        b = m_up - crit
        eta_row = np.maximum(diag[i] + diag - 2.0 * K[i], _ETA_MIN)
        score = np.where(in_low & (b > 0.0), b * b / eta_row, -1.0)
        j = int(np.argmax(score))
        if score[j] <= 0.0:
            return alpha, 0.5 * (m_up + m_low), it, gap
        eta = max(diag[i] + diag[j] - 2.0 * K[i, j], _ETA_MIN)
        lam = (m_up - crit[j]) / eta
        lam = min(lam, (C[i] - alpha[i]) if y[i] > 0 else alpha[i])
        lam = min(lam, alpha[j] if y[j] > 0 else (C[j] - alpha[j]))
        if lam <= 0.0:
            return alpha, 0.5 * (m_up + m_low), it, gap
        d_i = y[i] * lam
        d_j = -y[j] * lam
        alpha[i] = np.clip(alpha[i] + d_i, 0.0, C[i])
        alpha[j] = np.clip(alpha[j] + d_j, 0.0, C[j])
        grad += y * (y[i] * K[i] * d_i + y[j] * K[j] * d_j)
    crit = -y * grad
    m_up = np.where((pos & (alpha < C)) | (neg & (alpha > 0.0)), crit, -np.inf).max()
    m_low = np.where((pos & (alpha > 0.0)) | (neg & (alpha < C)), crit, np.inf).min()
    return alpha, 0.5 * (m_up + m_low), max_iter, m_up - m_low


def _solve_rowcache(X, y, C, kernel, gamma, tol, max_iter, cache_mb):
    """SMO with an LRU row cache for problems too large for a full Gram."""
    n = X.shape[0]
    diag = np.sum(X * X, axis=1) if kernel == "linear" else np.ones(n)
    max_rows = max(2, int(cache_mb * 1e6 / (8 * n)))
    cache = OrderedDict()

    def row(i):
        if i in cache:
            cache.move_to_end(i)
            return cache[i]
        r = kernel_matrix(kernel, gamma, X[i : i + 1], X)[0]
        cache[i] = r
        if len(cache) > max_rows:
            cache.popitem(last=False)
        return r

    alpha = np.zeros(n)
    grad = np.full(n, -1.0)
    pos = y > 0
    neg = ~pos
    for it in range(max_iter):
        crit = -y * grad
        in_up = (pos & (alpha < C)) | (neg & (alpha > 0.0))
        in_low = (pos & (alpha > 0.0)) | (neg & (alpha < C))
        up_vals = np.where(in_up, crit, -np.inf)
        low_vals = np.where(in_low, crit, np.inf)
        i = int(np.argmax(up_vals))
        m_up = up_vals[i]
        m_low = low_vals.min()
        gap = m_up - m_low
        if not np.isfinite(gap) or gap <= tol:
            return alpha, 0.5 * (m_up + m_low), it, gap
        K_i = row(i)
        b = m_up - crit
        eta_row = np.maximum(diag[i] + diag - 2.0 * K_i, _ETA_MIN)
        score = np.where(in_low & (b > 0.0), b * b / eta_row, -1.0)
        j = int(np.argmax(score))
        if score[j] <= 0.0:
            return alpha, 0.5 * (m_up + m_low), it, gap
        K_j = row(j)
        eta = max(diag[i] + diag[j] - 2.0 * K_i[j], _ETA_MIN)
        lam = (m_up - crit[j]) / eta
        lam = min(lam, (C[i] - alpha[i]) if y[i] > 0 else alpha[i])
        lam = min(lam, alpha[j] if y[j] > 0 else (C[j] - alpha[j]))
        if lam <= 0.0:
            return alpha, 0.5 * (m_up + m_low), it, gap
        d_i = y[i] * lam
        d_j = -y[j] * lam
        alpha[i] = np.clip(alpha[i] + d_i, 0.0, C[i])
        alpha[j] = np.clip(alpha[j] + d_j, 0.0, C[j])
        grad += y * (y[i] * K_i * d_i + y[j] * K_j * d_j)
    crit = -y * grad
    m_up = np.where((pos & (alpha < C)) | (neg & (alpha > 0.0)), crit, -np.inf).max()
    m_low = np.where((pos & (alpha > 0.0)) | (neg & (alpha < C)), crit, np.inf).min()
    return alpha, 0.5 * (m_up + m_low), max_iter, m_up - m_low


@dataclass
class BinarySvm:
    """One trained binary machine (labels internally mapped to +-1)."""

    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i at the support vectors
    bias: float
    kernel: str
    gamma: float
    alpha: np.ndarray  # full dual vector (KKT checks)
    y: np.ndarray
    c_vector: np.ndarray
    iterations: int

    def decision(self, X):
        if X.shape[1] != self.support_vectors.shape[1]:
            raise DimensionMismatch(
                f"expected {self.support_vectors.shape[1]} features, got {X.shape[1]}"
            )
        K = kernel_matrix(self.kernel, self.gamma, X, self.support_vectors)
        return K @ self.dual_coef + self.bias

    def kkt_residuals(self):
        """(box violation, |sum alpha_i y_i|) of the stored duals."""
        box = float(
            np.max(np.maximum(-self.alpha, self.alpha - self.c_vector), initial=0.0)
        )
        return box, float(abs(np.dot(self.alpha, self.y)))


def solve_dual(K, y, C_vec, tol, max_iter, alpha0=None):
    """Run the best available solver over a precomputed Gram.

    Returns (alpha, bias, iterations, gap); callers must treat gap > tol as
    non-convergence.
    """
    solver = _solve_gram_compiled or _solve_gram_python
    return solver(
        np.ascontiguousarray(K), np.ascontiguousarray(y, dtype=float),
        np.ascontiguousarray(C_vec, dtype=float), tol, int(max_iter), alpha0,
    )


def train_binary(X, y_signed, C, kernel="linear", gamma=None, tol=1e-3,
                 max_iter=500_000, cache_mb=256.0, class_c=None, alpha0=None,
                 gram=None):
    """Solve one binary soft-margin problem; ``class_c`` overrides per-sample C."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y_signed, dtype=float)
    n = X.shape[0]
    C_vec = np.full(n, float(C)) if class_c is None else np.ascontiguousarray(class_c, dtype=float)
    gram_bytes = 8.0 * n * n
    if gram is not None or gram_bytes <= cache_mb * 1e6:
        K = gram if gram is not None else kernel_matrix(kernel, gamma, X)
        alpha, bias, iters, gap = solve_dual(K, y, C_vec, tol, max_iter, alpha0)
    else:
        alpha, bias, iters, gap = _solve_rowcache(
            X, y, C_vec, kernel, gamma, tol, int(max_iter), cache_mb
        )
    if gap > tol:
        raise NonConvergence(
            f"SMO stopped at KKT gap {gap:.3g} > tol {tol} after {iters} "
            f"iterations (kernel={kernel}, C={C}, gamma={gamma})"
        )
    alpha = np.asarray(alpha)
    sv = alpha > 1e-12
    return BinarySvm(
        support_vectors=X[sv],
        dual_coef=alpha[sv] * y[sv],
        bias=float(bias),
        kernel=kernel,
        gamma=gamma,
        alpha=alpha,
        y=y,
        c_vector=C_vec,
        iterations=iters,
    )


def resolve_votes(votes, duels, classes):
    """Majority vote; ties recount head-to-head duels, then lowest class index.

    ``votes`` is (n, k) counts; ``duels[(ia, ib)]`` is the per-sample boolean
    "class ia beat class ib" array for ia < ib.
    """
    n = votes.shape[0]
    out = np.empty(n, dtype=object)
    top = votes.max(axis=1)
    for r in range(n):
        tied = np.flatnonzero(votes[r] == top[r])
        if tied.size == 1:
            out[r] = classes[tied[0]]
            continue
        duel = np.zeros(tied.size, dtype=int)
        for p, ia in enumerate(tied):
            for q, ib in enumerate(tied):
                if ia < ib and (ia, ib) in duels:
                    if duels[(ia, ib)][r]:
                        duel[p] += 1
                    else:
                        duel[q] += 1
        out[r] = classes[tied[np.flatnonzero(duel == duel.max())[0]]]
    return out


@dataclass
class OvoSvm:
    """One-vs-one multiclass SVM with deterministic vote tie-breaking."""

    classes: tuple
    machines: dict = field(default_factory=dict)  # (a, b) -> BinarySvm

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        n = X.shape[0]
        votes = np.zeros((n, len(self.classes)), dtype=int)
        duels = {}
        index = {c: i for i, c in enumerate(self.classes)}
        for (a, b), machine in self.machines.items():
            ia, ib = index[a], index[b]
            a_wins = machine.decision(X) >= 0.0
            votes[a_wins, ia] += 1
            votes[~a_wins, ib] += 1
            duels[(ia, ib)] = a_wins
        return resolve_votes(votes, duels, self.classes)


def train_ovo(X, labels, cfg, C, gamma=None):
    """Train a one-vs-one SVM at a single grid point."""
    labels = np.asarray(labels, dtype=object)
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    weights = cfg.class_weights or {}
    model = OvoSvm(classes=classes)
    for ai in range(len(classes)):
        for bi in range(ai + 1, len(classes)):
            a, b = classes[ai], classes[bi]
            mask = (labels == a) | (labels == b)
            y_signed = np.where(labels[mask] == a, 1.0, -1.0)
            class_c = np.where(
                labels[mask] == a,
                C * float(weights.get(a, 1.0)),
                C * float(weights.get(b, 1.0)),
            )
            model.machines[(a, b)] = train_binary(
                X[mask], y_signed, C, kernel=cfg.kernel, gamma=gamma,
                tol=cfg.tol, max_iter=cfg.max_iter, cache_mb=cfg.cache_mb,
                class_c=class_c,
            )
    return model
