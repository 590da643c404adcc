"""Feature parameterizations: raw parameters, waveform PCA, parameter PCA.

PCA models and normalization statistics are fit on a caller-supplied subset
of rows (the training split) and applied to everything, so test rows never
leak into the fitted statistics.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstantColumnWarning, DegenerateData, DimensionMismatch, ZeroSpreadWarning
from .features import PARAMETER_NAMES, WAVEFORM_SIGNALS

VARIANCE_TARGETS = (0.90, 0.95, 0.98)


@dataclass
class PcaModel:
    """Mean, orthonormal components and spectrum of one fitted PCA."""

    mean: np.ndarray
    components: np.ndarray  # (retained, d), rows orthonormal
    eigenvalues: np.ndarray  # full spectrum, descending
    retained_variance_target: float
    retained_count: int

    @property
    def total_variance(self):
        return float(self.eigenvalues.sum())

    @property
    def explained_ratio(self):
        return float(self.eigenvalues[: self.retained_count].sum()) / self.total_variance


def retained_for_target(eigenvalues, target):
    """Smallest k whose cumulative explained variance reaches the target."""
    total = float(np.sum(eigenvalues))
    cum = np.cumsum(eigenvalues) / total
    hit = np.flatnonzero(cum >= target)
    return int(hit[0]) + 1 if hit.size else len(eigenvalues)


def pca_fit(data, target_variance):
    """Mean-centered eigendecomposition of the sample covariance.

    Component signs are fixed so the largest-magnitude entry of each
    component is positive, making the decomposition reproducible across
    platforms.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
        raise ValueError("need an (n>=2, d>=1) matrix")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / (X.shape[0] - 1)
    total = float(np.trace(cov))
    if total <= 0.0:
        raise DegenerateData("data has zero total variance")
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    k = retained_for_target(eigvals, target_variance)
    comps = eigvecs[:, :k].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(
        mean=mean,
        components=comps,
        eigenvalues=eigvals,
        retained_variance_target=target_variance,
        retained_count=k,
    )


def pca_project(model, data):
    X = np.asarray(data, dtype=float)
    if X.shape[-1] != model.mean.shape[0]:
        raise DimensionMismatch(
            f"model has {model.mean.shape[0]} dims, data has {X.shape[-1]}"
        )
    return (X - model.mean) @ model.components.T


@dataclass
class NormalizationState:
    method: str  # none | zscore | minmax
    stats: dict = field(default_factory=dict)
    fit_rows: np.ndarray = None  # boolean mask the stats were fit on


@dataclass
class Representation:
    """A named feature matrix over trials plus its fitted models/statistics."""

    name: str
    matrix: np.ndarray  # (n_trials, dims)
    normalization: NormalizationState
    pca_models: dict = field(default_factory=dict)  # signal/source -> PcaModel
    block_dims: dict = field(default_factory=dict)  # signal -> retained count
    dropped_columns: tuple = ()

    @property
    def dims(self):
        return self.matrix.shape[1]


def build_params_representation(bundle):
    """The raw 52-parameter matrix as a Representation.

    Rows whose extraction failed stay NaN; callers select usable rows with
    ``bundle.params_ok``.
    """
    return Representation(
        name="PARAMS",
        matrix=bundle.params.copy(),
        normalization=NormalizationState(method="none"),
    )


SIGNAL_BLOCK_ORDER = WAVEFORM_SIGNALS  # f_v, f_ap, f_ml, cop_ap, cop_ml


def waveform_rep_name(signals):
    if tuple(signals) == SIGNAL_BLOCK_ORDER:
        return "PCA_ALL5"
    if tuple(signals) == ("f_v", "f_ap", "f_ml"):
        return "PCA_F_ALL"
    if tuple(signals) == ("cop_ap", "cop_ml"):
        return "PCA_COP"
    return "PCA_" + "+".join(s.upper() for s in signals)


def build_waveform_representation(bundle, train_rows, signals=SIGNAL_BLOCK_ORDER,
                                  target_variance=0.98):
    """Per-signal PCA of the downsampled waveforms, concatenated in fixed order."""
    signals = tuple(s for s in SIGNAL_BLOCK_ORDER if s in signals)
    if not signals:
        raise ValueError("no signals selected")
    blocks, models, block_dims = [], {}, {}
    for sig in signals:
        X = bundle.waveforms[sig]
        model = pca_fit(X[train_rows], target_variance)
        blocks.append(pca_project(model, X))
        models[sig] = model
        block_dims[sig] = model.retained_count
    return Representation(
        name=waveform_rep_name(signals),
        matrix=np.hstack(blocks),
        normalization=NormalizationState(method="none"),
        pca_models=models,
        block_dims=block_dims,
    )


def build_param_pca_representation(bundle, train_rows, pre_normalization="zscore",
                                   target_variance=0.98):
    """PCA over the (pre-normalized) 52-parameter vectors.

    Columns that are constant on the training rows carry no information and
    break z-scoring; they are dropped with a warning.
    """
    X = bundle.params
    train = np.asarray(train_rows) & bundle.params_ok
    if train.sum() < 2:
        raise DegenerateData("need at least two complete training rows")
    Xt = X[train]
    if pre_normalization == "zscore":
        center, spread = Xt.mean(axis=0), Xt.std(axis=0)
    elif pre_normalization == "minmax":
        center, spread = Xt.min(axis=0), np.ptp(Xt, axis=0)
    else:
        raise ValueError(f"unknown pre-normalization {pre_normalization!r}")
    keep = spread > 0.0
    if not keep.all():
        dropped = tuple(np.asarray(PARAMETER_NAMES)[~keep])
        warnings.warn(
            f"constant parameter columns dropped before PCA: {dropped}",
            ConstantColumnWarning,
            stacklevel=2,
        )
    else:
        dropped = ()
    Z = (X[:, keep] - center[keep]) / spread[keep]
    Z[~bundle.params_ok] = np.nan
    model = pca_fit(Z[train], target_variance)
    scores = np.full((X.shape[0], model.retained_count), np.nan)
    scores[bundle.params_ok] = pca_project(model, Z[bundle.params_ok])
    name = (
        "PCA_OF_PARAMS_Z" if pre_normalization == "zscore" else "PCA_OF_PARAMS_MINMAX"
    )
    return Representation(
        name=name,
        matrix=scores,
        normalization=NormalizationState(method="none"),
        pca_models={"params": model},
        block_dims={"params": model.retained_count},
        dropped_columns=dropped,
    )


def normalize(rep, method, fit_rows):
    """New Representation with per-dimension normalization fit on ``fit_rows``.

    Dimensions with zero variance/range pass through unchanged with a
    warning. Values outside the fitted range are NOT clipped.
    """
    fit_rows = np.asarray(fit_rows, dtype=bool)
    if not fit_rows.any():
        raise ValueError("fit split is empty")
    X = rep.matrix
    fit_block = X[fit_rows]
    fit_block = fit_block[np.all(np.isfinite(fit_block), axis=1)]
    out = X.copy()
    stats = {}
    if method == "none":
        pass
    elif method == "zscore":
        mu = fit_block.mean(axis=0)
        sd = fit_block.std(axis=0)
        degenerate = sd == 0.0
        if degenerate.any():
            warnings.warn(
                f"{int(degenerate.sum())} zero-variance dims left unnormalized",
                ZeroSpreadWarning, stacklevel=2,
            )
        sd_safe = np.where(degenerate, 1.0, sd)
        mu_safe = np.where(degenerate, 0.0, mu)
        out = (X - mu_safe) / sd_safe
        stats = {"mean": mu, "std": sd}
    elif method == "minmax":
        lo = fit_block.min(axis=0)
        rng = np.ptp(fit_block, axis=0)
        degenerate = rng == 0.0
        if degenerate.any():
            warnings.warn(
                f"{int(degenerate.sum())} zero-range dims left unnormalized",
                ZeroSpreadWarning, stacklevel=2,
            )
        rng_safe = np.where(degenerate, 1.0, rng)
        lo_safe = np.where(degenerate, 0.0, lo)
        out = (X - lo_safe) / rng_safe
        stats = {"min": lo, "range": rng}
    else:
        raise ValueError(f"unknown normalization {method!r}")
    return Representation(
        name=rep.name,
        matrix=out,
        normalization=NormalizationState(method=method, stats=stats, fit_rows=fit_rows),
        pca_models=rep.pca_models,
        block_dims=rep.block_dims,
        dropped_columns=rep.dropped_columns,
    )
