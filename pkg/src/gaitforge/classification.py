"""Patient-disjoint splits, grid-search training and evaluation reports."""

import json
from dataclasses import dataclass, field

import numpy as np

from . import baselines, svm
from .discriminativity import assign_group_folds, zero_rule_baseline
from .errors import ClassTooSmall, NonConvergence

TRAIN_FRACTION = 0.65
CV_FOLDS = 5


def split_patient_disjoint(subject_classes, train_fraction=TRAIN_FRACTION, seed=0):
    """Stratified subject-level split; every class needs >= 2 subjects.

    ``subject_classes`` maps subject id -> class label. Returns
    (train ids, test ids) as sorted tuples; all of a subject's sessions and
    trials follow it to one side.
    """
    by_class = {}
    for sid in sorted(subject_classes):
        by_class.setdefault(subject_classes[sid], []).append(sid)
    rng = np.random.default_rng([seed, 0x51])
    train, test = [], []
    for label in sorted(by_class):
        subs = by_class[label]
        if len(subs) < 2:
            raise ClassTooSmall(f"class {label} has {len(subs)} subject(s)")
        subs = list(subs)
        rng.shuffle(subs)
        n_train = int(round(train_fraction * len(subs)))
        n_train = min(max(n_train, 1), len(subs) - 1)
        train += subs[:n_train]
        test += subs[n_train:]
    return tuple(sorted(train)), tuple(sorted(test))


def rows_for_subjects(subject_ids, chosen):
    chosen = set(chosen)
    return np.asarray([s in chosen for s in subject_ids], dtype=bool)


@dataclass
class TrainedModel:
    kind: str  # svm | knn | mlp
    model: object
    selected: dict
    cv_accuracy: float
    grid_results: list = field(default_factory=list)  # (params dict, mean cv acc)
    failures: list = field(default_factory=list)

    def predict(self, X):
        return self.model.predict(X)


def _cv_grid_search(X, labels, subject_ids, candidates, fit_one, folds, seed):
    """Generic CV grid search; ties resolved by candidate order."""
    fold_ids = assign_group_folds(subject_ids, labels, folds, seed)
    results, failures = [], []
    best = None
    for cand in candidates:
        correct, total = [], []
        failed = False
        for f in range(folds):
            test = fold_ids == f
            train = ~test
            if not test.any() or len(set(labels[train].tolist())) < 2:
                continue
            try:
                model = fit_one(X[train], labels[train], cand)
            except NonConvergence as exc:
                failures.append((cand, str(exc)))
                failed = True
                break
            pred = model.predict(X[test])
            correct.append(float(np.mean(pred == labels[test])) * 100.0)
        if failed or not correct:
            continue
        mean_acc = float(np.mean(correct))
        results.append((cand, mean_acc))
        if best is None or mean_acc > best[1]:
            best = (cand, mean_acc)
    if best is None:
        raise NonConvergence("every grid point failed cross-validation")
    return best, results, failures


def _svm_cv_accuracies(X, labels, subject_ids, cfg, folds, seed):
    """Mean CV accuracy per (C, gamma) grid point.

    Within each fold and gamma, every one-vs-one pair computes its Gram once
    and warm-starts the dual solution along the ascending C grid, which keeps
    the large-C end of the grid tractable. Grid points whose solve exhausts
    the iteration budget in any fold are recorded as failures and dropped
    from model selection.
    """
    labels = np.asarray(labels, dtype=object)
    classes = tuple(sorted(set(labels.tolist())))
    pairs = [
        (classes[a], classes[b])
        for a in range(len(classes))
        for b in range(a + 1, len(classes))
    ]
    weights = cfg.class_weights or {}
    fold_ids = assign_group_folds(subject_ids, labels, folds, seed)
    fold_acc = {(c, g): [] for c in cfg.c_grid for g in cfg.gamma_grid}
    failures = []
    class_index = {c: i for i, c in enumerate(classes)}

    for f in range(folds):
        test = fold_ids == f
        train = ~test
        if not test.any() or len(set(labels[train].tolist())) < 2:
            continue
        Xtr, ytr = X[train], labels[train]
        Xte, yte = X[test], labels[test]
        for gamma in cfg.gamma_grid:
            pair_state = {}
            for a, b in pairs:
                rows = (ytr == a) | (ytr == b)
                if rows.sum() < 2 or len(set(ytr[rows].tolist())) < 2:
                    continue
                Xp = np.ascontiguousarray(Xtr[rows])
                y_signed = np.where(ytr[rows] == a, 1.0, -1.0)
                w_vec = np.where(
                    ytr[rows] == a,
                    float(weights.get(a, 1.0)),
                    float(weights.get(b, 1.0)),
                )
                gram = svm.kernel_matrix(cfg.kernel, gamma, Xp)
                k_test = svm.kernel_matrix(cfg.kernel, gamma, Xte, Xp)
                pair_state[(a, b)] = [y_signed, w_vec, gram, k_test, None, None]
            for C in cfg.c_grid:
                votes = np.zeros((Xte.shape[0], len(classes)), dtype=int)
                duels = {}
                bad = False
                for (a, b), state in pair_state.items():
                    y_signed, w_vec, gram, k_test, alpha_prev, c_prev = state
                    # bound duals scale with C, so rescaling the previous
                    # solution lands them on the new box exactly
                    alpha0 = None if alpha_prev is None else alpha_prev * (C / c_prev)
                    alpha, bias, _iters, gap = svm.solve_dual(
                        gram, y_signed, C * w_vec, cfg.tol, cfg.max_iter,
                        alpha0=alpha0,
                    )
                    state[4], state[5] = alpha, C  # warm start for the next C
                    if gap > cfg.tol:
                        failures.append(
                            ({"C": C, "gamma": gamma, "pair": (a, b), "fold": f},
                             f"KKT gap {gap:.3g} > tol after budget")
                        )
                        bad = True
                        continue
                    dec = k_test @ (alpha * y_signed) + bias
                    a_wins = dec >= 0.0
                    votes[a_wins, class_index[a]] += 1
                    votes[~a_wins, class_index[b]] += 1
                    duels[(class_index[a], class_index[b])] = a_wins
                if bad:
                    fold_acc[(C, gamma)].append(None)
                    continue
                pred = svm.resolve_votes(votes, duels, classes)
                fold_acc[(C, gamma)].append(
                    100.0 * float(np.mean(pred == yte))
                )
    results = []
    for C in cfg.c_grid:
        for gamma in cfg.gamma_grid:
            accs = fold_acc[(C, gamma)]
            if not accs or any(a is None for a in accs):
                continue
            results.append(({"C": C, "gamma": gamma}, float(np.mean(accs))))
    return results, failures


def train_svm(X, labels, subject_ids, cfg=None, folds=CV_FOLDS, seed=0):
    """Grid-search a one-vs-one SVM with patient-disjoint CV, refit the best.

    CV ties resolve to the smaller C, then the smaller gamma (grid order).
    """
    cfg = cfg or svm.SvmConfig()
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=object)
    results, failures = _svm_cv_accuracies(X, labels, subject_ids, cfg, folds, seed)
    if not results:
        raise NonConvergence("every SVM grid point failed cross-validation")
    best = max(results, key=lambda r: r[1])  # first max wins: smaller C, gamma
    final = svm.train_ovo(X, labels, cfg, best[0]["C"], best[0]["gamma"])
    return TrainedModel(
        kind="svm",
        model=final,
        selected={
            "kernel": cfg.kernel,
            **{k: v for k, v in best[0].items() if v is not None},
        },
        cv_accuracy=best[1],
        grid_results=results,
        failures=failures,
    )


def train_knn(X, labels, subject_ids, k_grid=baselines.DEFAULT_K_GRID,
              folds=CV_FOLDS, seed=0):
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=object)
    fold_ids = assign_group_folds(subject_ids, labels, folds, seed)
    # one distance sort per fold serves every k in the grid
    acc = {k: [] for k in k_grid}
    for f in range(folds):
        test = fold_ids == f
        train = ~test
        if not test.any() or len(set(labels[train].tolist())) < 2:
            continue
        order, _ = baselines.knn_neighbor_order(X[train], X[test])
        for k in k_grid:
            pred = baselines.knn_vote(order, labels[train], min(k, train.sum()))
            acc[k].append(float(np.mean(pred == labels[test])) * 100.0)
    results = [({"k": k}, float(np.mean(a))) for k, a in acc.items() if a]
    if not results:
        raise ClassTooSmall("no usable CV folds")
    best = max(results, key=lambda r: r[1])  # max is stable: first best wins ties
    final = baselines.train_knn_single(X, labels, best[0]["k"])
    return TrainedModel(
        kind="knn", model=final, selected=best[0],
        cv_accuracy=best[1], grid_results=results,
    )


def train_mlp(X, labels, subject_ids, layout_grid=baselines.DEFAULT_LAYOUT_GRID,
              folds=CV_FOLDS, seed=0, schedule=None):
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=object)
    candidates = [{"hidden": tuple(h)} for h in layout_grid]

    def fit_one(Xt, yt, cand):
        return baselines.train_mlp_single(Xt, yt, cand["hidden"], seed, schedule)

    best, results, failures = _cv_grid_search(
        X, labels, subject_ids, candidates, fit_one, folds, seed
    )
    final = fit_one(X, labels, best[0])
    return TrainedModel(
        kind="mlp", model=final, selected=best[0],
        cv_accuracy=best[1], grid_results=results, failures=failures,
    )


@dataclass
class EvaluationReport:
    task: str
    representation: str
    normalization: str
    classifier: str
    selected: dict
    cv_accuracy: float
    accuracy: float
    baseline: float
    divergence: float
    confusion: list  # row-major, true class x predicted class
    class_order: tuple
    per_class_recall: dict
    n_train: int
    n_test: int
    majority_vote_accuracy: float
    provenance: dict

    def to_dict(self):
        return {
            "task": self.task,
            "representation": self.representation,
            "normalization": self.normalization,
            "classifier": self.classifier,
            "selected": self.selected,
            "cv_accuracy": self.cv_accuracy,
            "accuracy": self.accuracy,
            "baseline": self.baseline,
            "divergence": self.divergence,
            "class_order": list(self.class_order),
            "confusion": self.confusion,
            "per_class_recall": self.per_class_recall,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "majority_vote_accuracy": self.majority_vote_accuracy,
            "provenance": self.provenance,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def confusion_matrix(y_true, y_pred, class_order):
    idx = {c: i for i, c in enumerate(class_order)}
    mat = np.zeros((len(class_order), len(class_order)), dtype=int)
    for t, p in zip(y_true, y_pred):
        mat[idx[t], idx[p]] += 1
    return mat


def evaluate(model, X_test, y_test, test_subjects, *, task="", representation="",
             normalization="", n_train=0, provenance=None):
    """Trial-level test evaluation plus a patient-majority-vote extra."""
    y_test = np.asarray(y_test, dtype=object)
    pred = model.predict(np.asarray(X_test, dtype=float))
    accuracy = 100.0 * float(np.mean(pred == y_test))
    baseline = zero_rule_baseline(y_test)
    class_order = tuple(sorted(set(y_test.tolist())))
    conf = confusion_matrix(y_test, pred, class_order)
    recall = {}
    for i, c in enumerate(class_order):
        row_sum = conf[i].sum()
        recall[c] = float(conf[i, i] / row_sum) if row_sum else float("nan")
    # patient-level majority vote over that subject's trial predictions
    votes = {}
    truth = {}
    for sid, p, t in zip(test_subjects, pred, y_test):
        votes.setdefault(sid, []).append(p)
        truth[sid] = t
    maj_correct = 0
    for sid, plist in votes.items():
        labs, counts = np.unique(np.asarray(plist, dtype=str), return_counts=True)
        winners = sorted(labs[counts == counts.max()].tolist())
        if winners[0] == truth[sid]:
            maj_correct += 1
    majority_acc = 100.0 * maj_correct / len(votes) if votes else float("nan")
    return EvaluationReport(
        task=task,
        representation=representation,
        normalization=normalization,
        classifier=model.kind,
        selected=model.selected,
        cv_accuracy=model.cv_accuracy,
        accuracy=accuracy,
        baseline=baseline,
        divergence=accuracy - baseline,
        confusion=conf.tolist(),
        class_order=class_order,
        per_class_recall=recall,
        n_train=n_train,
        n_test=int(len(y_test)),
        majority_vote_accuracy=majority_acc,
        provenance=provenance or {},
    )
