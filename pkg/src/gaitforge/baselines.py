"""Reference classifiers: k-nearest neighbors and a small MLP.

Both exist to be compared against the SVM; they share the same training
harness (grid search over patient-disjoint CV folds) in classification.py.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, DivergingLoss

DEFAULT_K_GRID = tuple(range(1, 32, 2))
DEFAULT_LAYOUT_GRID = ((16,), (32,), (32, 16))


@dataclass
class KnnModel:
    train_x: np.ndarray
    train_y: np.ndarray
    k: int

    def predict(self, X):
        order, _ = knn_neighbor_order(self.train_x, X)
        return knn_vote(order, self.train_y, self.k)


def knn_neighbor_order(train_x, X, chunk=4096):
    """Stable argsort of Euclidean distances train->query, plus distances."""
    train_x = np.asarray(train_x, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    orders, dists = [], []
    for lo in range(0, X.shape[0], chunk):
        block = X[lo : lo + chunk]
        d2 = (
            np.sum(block * block, axis=1)[:, None]
            + np.sum(train_x * train_x, axis=1)[None, :]
            - 2.0 * block @ train_x.T
        )
        d2 = np.maximum(d2, 0.0)
        order = np.argsort(d2, axis=1, kind="stable")
        orders.append(order)
        dists.append(np.take_along_axis(d2, order, axis=1))
    return np.vstack(orders), np.vstack(dists)


def knn_vote(order, train_y, k):
    """Majority vote over the k nearest; ties fall to the single nearest label."""
    train_y = np.asarray(train_y, dtype=object)
    neigh = train_y[order[:, :k]]
    out = np.empty(order.shape[0], dtype=object)
    for r in range(order.shape[0]):
        labs, counts = np.unique(neigh[r].astype(str), return_counts=True)
        winners = labs[counts == counts.max()]
        if winners.size == 1:
            out[r] = winners[0]
        else:
            out[r] = neigh[r, 0]
    return out


def train_knn_single(X, y, k):
    return KnnModel(
        train_x=np.asarray(X, dtype=float), train_y=np.asarray(y, dtype=object), k=k
    )


# ---------------------------------------------------------------------------
# MLP: tanh hidden layers, softmax output, cross-entropy, mini-batch GD
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MlpSchedule:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 0.10
    decay_every: int = 50
    decay_factor: float = 0.5


class Mlp:
    def __init__(self, n_in, hidden, classes, seed):
        if any(h < 1 for h in hidden):
            raise ConfigInvalid("hidden layers must have at least one unit")
        self.classes = tuple(classes)
        self.hidden = tuple(hidden)
        sizes = [n_in, *hidden, len(self.classes)]
        rng = np.random.default_rng([seed, 0x317])
        self.weights = [
            rng.normal(0.0, 1.0 / np.sqrt(sizes[i]), size=(sizes[i], sizes[i + 1]))
            for i in range(len(sizes) - 1)
        ]
        self.biases = [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)]

    def _forward(self, X):
        acts = [X]
        h = X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ W + b)
            acts.append(h)
        logits = h @ self.weights[-1] + self.biases[-1]
        logits = logits - logits.max(axis=1, keepdims=True)
        expz = np.exp(logits)
        probs = expz / expz.sum(axis=1, keepdims=True)
        return acts, probs

    def loss_and_grads(self, X, y_idx):
        """Mean cross-entropy and its gradients w.r.t. all weights/biases."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = X.shape[0]
        acts, probs = self._forward(X)
        eps = 1e-12
        loss = -float(np.mean(np.log(probs[np.arange(n), y_idx] + eps)))
        delta = probs.copy()
        delta[np.arange(n), y_idx] -= 1.0
        delta /= n
        grads_w, grads_b = [], []
        for layer in range(len(self.weights) - 1, -1, -1):
            a_prev = acts[layer]
            grads_w.append(a_prev.T @ delta)
            grads_b.append(delta.sum(axis=0))
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (1.0 - acts[layer] ** 2)
        return loss, grads_w[::-1], grads_b[::-1]

    def predict(self, X):
        _, probs = self._forward(np.atleast_2d(np.asarray(X, dtype=float)))
        idx = np.argmax(probs, axis=1)
        return np.asarray([self.classes[i] for i in idx], dtype=object)

    # flat parameter access for finite-difference checks
    def get_flat(self):
        return np.concatenate(
            [w.ravel() for w in self.weights] + [b.ravel() for b in self.biases]
        )

    def set_flat(self, flat):
        pos = 0
        for i, w in enumerate(self.weights):
            self.weights[i] = flat[pos : pos + w.size].reshape(w.shape)
            pos += w.size
        for i, b in enumerate(self.biases):
            self.biases[i] = flat[pos : pos + b.size].reshape(b.shape)
            pos += b.size

    def flat_grads(self, X, y_idx):
        loss, gw, gb = self.loss_and_grads(X, y_idx)
        return loss, np.concatenate(
            [g.ravel() for g in gw] + [g.ravel() for g in gb]
        )


def train_mlp_single(X, labels, hidden, seed, schedule=None):
    """Train one MLP with the fixed deterministic schedule."""
    schedule = schedule or MlpSchedule()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray(labels, dtype=object)
    classes = tuple(sorted(set(labels.tolist())))
    y_idx = np.asarray([classes.index(l) for l in labels])
    net = Mlp(X.shape[1], hidden, classes, seed)
    rng = np.random.default_rng([seed, 0x63])
    n = X.shape[0]
    lr = schedule.learning_rate
    for epoch in range(schedule.epochs):
        if epoch > 0 and epoch % schedule.decay_every == 0:
            lr *= schedule.decay_factor
        order = rng.permutation(n)
        for lo in range(0, n, schedule.batch_size):
            batch = order[lo : lo + schedule.batch_size]
            loss, gw, gb = net.loss_and_grads(X[batch], y_idx[batch])
            if not np.isfinite(loss):
                raise DivergingLoss(f"loss became {loss} at epoch {epoch}")
            for i in range(len(net.weights)):
                net.weights[i] -= lr * gw[i]
                net.biases[i] -= lr * gb[i]
    return net
