"""Fisher-criterion LDA discriminativity analysis.

Each (class partition, feature set) cell holds the LDA classification
accuracy minus that partition's zero-rule baseline, in percentage points.
Accuracy is estimated by patient-disjoint stratified 5-fold cross-validation
by default (``eval_mode="cv"``); resubstitution is available for comparison.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import SingularScatter
from .features import PARAMETER_NAMES

SCATTER_RIDGE = 1e-6  # times trace(S_W)/d


def zero_rule_baseline(labels):
    """Accuracy (percent) of always predicting the most frequent class."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty label vector")
    _, counts = np.unique(labels, return_counts=True)
    return 100.0 * counts.max() / labels.size


@dataclass
class LdaModel:
    classes: tuple
    means: np.ndarray  # (k, d)
    pooled_cov: np.ndarray  # regularized, (d, d)
    _solve: np.ndarray = None  # cached inverse applied to means

    def predict(self, X):
        """Nearest class mean under the pooled-covariance Mahalanobis metric."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        inv_means = self._solve  # (k, d): Sigma^-1 mu_c
        lin = X @ inv_means.T  # x' Sigma^-1 mu_c
        quad = 0.5 * np.einsum("kd,kd->k", self.means, inv_means)
        scores = lin - quad
        idx = np.argmax(scores, axis=1)
        return np.asarray([self.classes[i] for i in idx], dtype=object)

    def discriminant_directions(self):
        """Eigenvectors of S_W^-1 S_B, strongest first (k-1 columns)."""
        import scipy.linalg

        k = len(self.classes)
        grand = self.means.mean(axis=0)
        diff = self.means - grand
        s_b = diff.T @ diff
        vals, vecs = scipy.linalg.eigh(s_b, self.pooled_cov)
        order = np.argsort(vals)[::-1]
        return vecs[:, order[: max(1, k - 1)]]


def lda_fit(X, labels):
    """Gaussian equal-covariance discriminant (uniform priors).

    The pooled within-class scatter is ridge-regularized with
    ``1e-6 * trace(S_W)/d`` so single near-constant features stay solvable.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray(labels)
    classes = tuple(sorted(set(labels.tolist())))
    n, d = X.shape
    if n <= len(classes):
        raise ValueError("need more samples than classes")
    means = np.vstack([X[labels == c].mean(axis=0) for c in classes])
    s_w = np.zeros((d, d))
    for c, mu in zip(classes, means):
        block = X[labels == c] - mu
        s_w += block.T @ block
    ridge = SCATTER_RIDGE * (np.trace(s_w) / d if np.trace(s_w) > 0 else 1.0)
    s_w_reg = s_w + ridge * np.eye(d)
    pooled = s_w_reg / max(n - len(classes), 1)
    try:
        solve = np.linalg.solve(pooled, means.T).T
    except np.linalg.LinAlgError:
        raise SingularScatter(
            "within-class scatter singular even after regularization"
        ) from None
    return LdaModel(classes=classes, means=means, pooled_cov=pooled, _solve=solve)


def assign_group_folds(subject_ids, labels, n_folds, seed):
    """Fold index per row: subjects shuffled per class, dealt round-robin."""
    subject_ids = np.asarray(subject_ids, dtype=object)
    labels = np.asarray(labels)
    rng = np.random.default_rng([seed, 0xF0])
    fold_of_subject = {}
    for c in sorted(set(labels.tolist())):
        subs = sorted(set(subject_ids[labels == c].tolist()))
        rng.shuffle(subs)
        for i, s in enumerate(subs):
            fold_of_subject[s] = i % n_folds
    return np.asarray([fold_of_subject[s] for s in subject_ids], dtype=int)


def lda_accuracy(X, labels, subject_ids, eval_mode="cv", n_folds=5, seed=0):
    """Trial-level LDA accuracy (percent) under the chosen protocol."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] != len(labels):
        X = X.T
    labels = np.asarray(labels)
    if eval_mode == "resub":
        model = lda_fit(X, labels)
        return 100.0 * float(np.mean(model.predict(X) == labels))
    folds = assign_group_folds(subject_ids, labels, n_folds, seed)
    correct = 0
    for f in range(n_folds):
        test = folds == f
        train = ~test
        if not test.any():
            continue
        if len(set(labels[train].tolist())) < 2:
            continue  # degenerate fold; its trials count as errors
        model = lda_fit(X[train], labels[train])
        correct += int(np.sum(model.predict(X[test]) == labels[test]))
    return 100.0 * correct / len(labels)


@dataclass(frozen=True)
class ClassPartition:
    """Subset/merge of the five classes; maps class letter -> effective label."""

    name: str
    mapping: dict  # class letter -> effective label (classes absent are excluded)

    def effective_labels(self, labels):
        """(row mask, effective labels of the kept rows)."""
        labels = np.asarray(labels)
        keep = np.asarray([lab in self.mapping for lab in labels])
        eff = np.asarray([self.mapping[lab] for lab in labels[keep]], dtype=object)
        return keep, eff


def standard_partitions():
    """The 12 grid rows: 4x control-vs-single, all five, N/GD, 6 GD pairs."""
    parts = [
        ClassPartition("N/A", {"N": "N", "A": "A"}),
        ClassPartition("N/C", {"N": "N", "C": "C"}),
        ClassPartition("N/H", {"N": "N", "H": "H"}),
        ClassPartition("N/K", {"N": "N", "K": "K"}),
        ClassPartition("N/C/A/K/H", {c: c for c in "NCAKH"}),
        ClassPartition("N/GD", {"N": "N", "C": "GD", "A": "GD", "K": "GD", "H": "GD"}),
    ]
    gd = ["A", "C", "H", "K"]
    for i in range(len(gd)):
        for j in range(i + 1, len(gd)):
            a, b = gd[i], gd[j]
            parts.append(ClassPartition(f"{a}/{b}", {a: a, b: b}))
    return parts


TASK_PARTITIONS = {
    "ncakh": ClassPartition("N/C/A/K/H", {c: c for c in "NCAKH"}),
    "nvgd": ClassPartition(
        "N/GD", {"N": "N", "C": "GD", "A": "GD", "K": "GD", "H": "GD"}
    ),
    "thigh-shank": ClassPartition(
        "N/thigh/shank",
        {"N": "N", "H": "thigh", "K": "thigh", "A": "shank", "C": "shank"},
    ),
}


@dataclass
class DiscriminativityGrid:
    values: pd.DataFrame  # rows = partitions, columns = feature sets
    baselines: dict  # partition name -> zero-rule %

    def long_format(self):
        rows = []
        for part in self.values.index:
            for col in self.values.columns:
                rows.append(
                    {
                        "partition": part,
                        "feature": col,
                        "divergence": self.values.loc[part, col],
                        "baseline": self.baselines[part],
                    }
                )
        return pd.DataFrame(rows)


def grid_columns(bundle, representations):
    """Ordered (column name, matrix, usable-row mask) triples for the grid."""
    cols = []
    ok = bundle.params_ok
    for j, name in enumerate(PARAMETER_NAMES):
        cols.append((name, bundle.params[:, j : j + 1], ok))
    cols.append(("ALL_PARAMS", bundle.params, ok))
    full = np.ones(bundle.n_trials, dtype=bool)
    order = ["PCA_FV", "PCA_FAP", "PCA_FML", "PCA_COPAP", "PCA_COPML",
             "PCA_F_ALL", "PCA_COP", "PCA_ALL"]
    for key in order:
        rep = representations[key]
        cols.append((key, rep.matrix, full))
    return cols


def single_signal_representations(bundle, target_variance=0.98):
    """The eight PCA columns of the grid, fit on all rows (descriptive use)."""
    from .representations import build_waveform_representation

    full = np.ones(bundle.n_trials, dtype=bool)
    reps = {}
    for sig, key in zip(
        ("f_v", "f_ap", "f_ml", "cop_ap", "cop_ml"),
        ("PCA_FV", "PCA_FAP", "PCA_FML", "PCA_COPAP", "PCA_COPML"),
    ):
        reps[key] = build_waveform_representation(
            bundle, full, signals=(sig,), target_variance=target_variance
        )
    reps["PCA_F_ALL"] = build_waveform_representation(
        bundle, full, signals=("f_v", "f_ap", "f_ml"), target_variance=target_variance
    )
    reps["PCA_COP"] = build_waveform_representation(
        bundle, full, signals=("cop_ap", "cop_ml"), target_variance=target_variance
    )
    reps["PCA_ALL"] = build_waveform_representation(
        bundle, full, target_variance=target_variance
    )
    return reps


def discriminativity_grid(bundle, partitions=None, eval_mode="cv", seed=0,
                          target_variance=0.98):
    """The full partitions x feature-sets divergence grid.

    Cells that cannot be computed are left NaN; the grid is still emitted.
    """
    partitions = partitions or standard_partitions()
    reps = single_signal_representations(bundle, target_variance)
    cols = grid_columns(bundle, reps)
    baselines = {}
    values = {}

    def compute_cell(part, keep, matrix, usable):
        mask = keep & usable
        if mask.sum() < 10:
            return np.nan
        sub_labels = np.asarray(
            [part.mapping[lab] for lab in bundle.labels[mask]], dtype=object
        )
        if len(set(sub_labels.tolist())) < 2:
            return np.nan
        try:
            acc = lda_accuracy(
                matrix[mask], sub_labels, bundle.subject_ids[mask],
                eval_mode=eval_mode, seed=seed,
            )
        except (SingularScatter, ValueError):
            return np.nan
        return acc - zero_rule_baseline(sub_labels)

    for part in partitions:
        keep, eff = part.effective_labels(bundle.labels)
        if keep.sum() == 0:
            baselines[part.name] = np.nan
            values[part.name] = {name: np.nan for name, _, _ in cols}
            continue
        baselines[part.name] = zero_rule_baseline(eff)
        row = {}
        for name, matrix, usable in cols:
            row[name] = compute_cell(part, keep, matrix, usable)
        values[part.name] = row

    frame = pd.DataFrame.from_dict(values, orient="index")
    frame = frame[[name for name, _, _ in cols]]
    frame.index = [p.name for p in partitions]
    return DiscriminativityGrid(values=frame, baselines=baselines)
