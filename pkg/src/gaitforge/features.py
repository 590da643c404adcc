"""Extraction of the 52 gait parameters from normalized stance waveforms.

42 discrete parameters (DPs) come from the affected limb's waveforms; the 10
time-distance parameters (TDPs, including stance time) come from the bilateral
step pair and are averaged over each session's valid trials before being
attached to every trial of that session.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import signalops as ops
from .errors import LandmarkNotFound, NoSignChange, SinglePlateOnly
from .preprocess import N_POINTS, PreprocessConfig, preprocess_trial

# Column order of the parameter table (fixed; 42 per-foot DPs then 10 TDPs
# are interleaved exactly as in the reference parameter list).
PARAMETER_NAMES = [
    "ST",
    "F_V1", "T_V1", "F_V2", "T_V2", "F_V3", "T_V3",
    "F_AP1", "T_AP1", "F_AP2", "T_AP2", "F_AP3", "T_AP3",
    "F_ML1", "T_ML1", "F_ML2", "T_ML2", "F_ML3", "T_ML3",
    "F_VAVG", "F_APAVG", "F_MLAVG",
    "IF_V", "IF_AP", "IF_ML", "IF_V1", "IF_V2", "IF_V3",
    "IF_APDEC", "IF_APACC", "IF_LAT", "IF_MED",
    "COPANG", "COPDEV", "COP_AP", "COPV", "COP_ML",
    "DECT", "ACCT",
    "LR0080", "LR2080", "UR8000", "UR8020",
    "DS", "STEPLEN", "STEPV", "STRIDET", "BF", "CAD",
    "STEPWD", "STRLEN", "GV",
]

TIMEDISTANCE_NAMES = [
    "ST", "DS", "STEPLEN", "STEPV", "STRIDET", "BF", "CAD",
    "STEPWD", "STRLEN", "GV",
]

DISCRETE_NAMES = [n for n in PARAMETER_NAMES if n not in TIMEDISTANCE_NAMES]

assert len(PARAMETER_NAMES) == 52
assert len(DISCRETE_NAMES) == 42 and len(TIMEDISTANCE_NAMES) == 10

KMH_PER_MS = 3.6


@dataclass(frozen=True)
class PhaseSplit:
    """Braking/propulsion boundary: the F_AP sign change, in % of stance."""

    crossover_fraction: float  # %ST

    def __post_init__(self):
        if not 0.0 < self.crossover_fraction < 100.0:
            raise ValueError("crossover must be inside the stance")

    @property
    def index(self):
        """Fractional sample index of the crossover on the 1000-point grid."""
        return self.crossover_fraction / 100.0 * (N_POINTS - 1)


@dataclass
class ParameterVector:
    """One trial's named parameters; missing landmarks are NaN and flagged."""

    values: dict
    missing: tuple = ()

    def __getitem__(self, name):
        return self.values[name]

    def as_row(self):
        return [self.values.get(n, math.nan) for n in PARAMETER_NAMES]

    @property
    def complete(self):
        return not self.missing and all(
            np.isfinite(self.values.get(n, math.nan)) for n in PARAMETER_NAMES
        )


def split_phases(f_ap):
    """Locate the braking->propulsion transition of the AP force.

    The crossover is the first negative-to-positive zero crossing between the
    global minimum (braking trough) and the global maximum (propulsion peak).
    """
    f_ap = np.asarray(f_ap, dtype=float)
    i_min = int(np.argmin(f_ap))
    i_max = int(np.argmax(f_ap))
    if f_ap[i_min] >= 0.0:
        raise NoSignChange("F_AP is never negative; no braking phase")
    if f_ap[i_max] <= 0.0:
        raise NoSignChange("F_AP is never positive; no propulsive phase")
    if i_min >= i_max:
        raise NoSignChange("F_AP minimum does not precede its maximum")
    cross = ops.upward_zero_crossing(f_ap, i_min, i_max)
    if cross is None:
        raise NoSignChange("no upward zero crossing between F_AP extrema")
    return PhaseSplit(crossover_fraction=100.0 * cross / (N_POINTS - 1))


def _secant(values, times):
    """Slope between two (value, time) pairs; None when the interval is empty."""
    v0, v1 = values
    t0, t1 = times
    if t0 is None or t1 is None or t1 <= t0:
        return None
    return (v1 - v0) / (t1 - t0)


def extract_discrete(wf):
    """The 42 per-foot discrete parameters of one StanceWaveforms.

    Landmarks that cannot be located (e.g. loading-rate crossings on a flat
    signal) are flagged in ``missing`` and set to NaN; everything else is
    still computed.
    """
    st = wf.stance_time
    dt = st / (N_POINTS - 1)
    vals = {}
    missing = []

    split = split_phases(wf.f_ap)  # NoSignChange propagates
    cross_idx = split.index
    kb = int(math.floor(cross_idx))  # last braking sample
    kp = int(math.ceil(cross_idx))  # first propulsion sample

    def pct(index):
        return 100.0 * index / (N_POINTS - 1)

    f_v, f_ap, f_ml = wf.f_v, wf.f_ap, wf.f_ml

    fv1, iv1 = ops.argmax_window(f_v, 0, kb)
    fv3, iv3 = ops.argmax_window(f_v, kp, N_POINTS - 1)
    fv2, iv2 = ops.argmin_window(f_v, iv1, iv3)
    vals.update(
        F_V1=fv1, T_V1=pct(iv1), F_V2=fv2, T_V2=pct(iv2), F_V3=fv3, T_V3=pct(iv3)
    )

    fap2, iap2 = ops.argmin_window(f_ap, 0, kb)
    fap1, iap1 = ops.argmax_window(f_ap, 0, iap2)
    fap3, iap3 = ops.argmax_window(f_ap, kp, N_POINTS - 1)
    vals.update(
        F_AP1=fap1, T_AP1=pct(iap1), F_AP2=fap2, T_AP2=pct(iap2),
        F_AP3=fap3, T_AP3=pct(iap3),
    )

    fml1, iml1 = ops.argmin_window(f_ml, 0, kb)
    fml2, iml2 = ops.argmax_window(f_ml, 0, kb)
    fml3, iml3 = ops.argmax_window(f_ml, kp, N_POINTS - 1)
    vals.update(
        F_ML1=fml1, T_ML1=pct(iml1), F_ML2=fml2, T_ML2=pct(iml2),
        F_ML3=fml3, T_ML3=pct(iml3),
    )

    vals["F_VAVG"] = float(np.mean(f_v))
    vals["F_APAVG"] = float(np.mean(f_ap))
    vals["F_MLAVG"] = float(np.mean(f_ml))

    # impulses: %BW*s = 100 * integral of the BW-normalized force over time
    cross_t = cross_idx * dt
    vals["IF_V"] = 100.0 * ops.integrate(f_v, dt)
    vals["IF_AP"] = 100.0 * ops.integrate(f_ap, dt)
    vals["IF_ML"] = 100.0 * ops.integrate(f_ml, dt)
    vals["IF_V1"] = 100.0 * ops.integrate(f_v, dt, iv1 * dt)
    vals["IF_V2"] = 100.0 * ops.integrate(f_v, dt, iv2 * dt)
    vals["IF_V3"] = 100.0 * ops.integrate(f_v, dt, iv3 * dt)
    vals["IF_APDEC"] = 100.0 * ops.integrate(f_ap, dt, cross_t)
    vals["IF_APACC"] = 100.0 * ops.integrate_between(f_ap, dt, cross_t, st)
    pos_ml, neg_ml = ops.positive_negative_integrals(f_ml, dt)
    vals["IF_MED"] = 100.0 * pos_ml  # medial = positive F_ML
    vals["IF_LAT"] = 100.0 * abs(neg_ml)

    # COP linear regression in the (AP, ML) plane
    ap, ml = wf.cop_ap, wf.cop_ml
    var_ap = float(np.var(ap))
    if var_ap <= 0.0:
        vals["COPANG"] = math.nan
        vals["COPDEV"] = math.nan
        missing += ["COPANG", "COPDEV"]
    else:
        slope = float(np.cov(ap, ml, bias=True)[0, 1]) / var_ap
        intercept = float(np.mean(ml)) - slope * float(np.mean(ap))
        resid = ml - (slope * ap + intercept)
        vals["COPANG"] = math.degrees(math.atan(slope))
        vals["COPDEV"] = float(np.sqrt(np.mean(resid**2)))
    vals["COP_AP"] = float(np.ptp(ap))
    vals["COP_ML"] = float(np.ptp(ml))
    vals["COPV"] = 1.0 / st  # foot length (= 1 FL) per stance time

    neg_dur, pos_dur = ops.sign_durations(f_ap, dt)
    vals["DECT"] = neg_dur
    vals["ACCT"] = pos_dur

    # loading/unloading rates: secant slopes between interpolated crossings
    t80 = ops.first_reach_time(f_v, dt, 0.8 * fv1, 0, rising=True)
    t20 = ops.first_reach_time(f_v, dt, 0.2 * fv1, 0, rising=True)
    u80 = ops.first_reach_time(f_v, dt, 0.8 * fv3, iv3, rising=False)
    u20 = ops.first_reach_time(f_v, dt, 0.2 * fv3, iv3, rising=False)
    lr0080 = _secant((float(f_v[0]), 0.8 * fv1), (0.0, t80))
    lr2080 = _secant((0.2 * fv1, 0.8 * fv1), (t20, t80))
    ur8000 = _secant((0.8 * fv3, float(f_v[-1])), (u80, st))
    ur8020 = _secant((0.8 * fv3, 0.2 * fv3), (u80, u20))
    for name, value in (
        ("LR0080", lr0080), ("LR2080", lr2080),
        ("UR8000", ur8000), ("UR8020", ur8020),
    ):
        if value is None:
            vals[name] = math.nan
            missing.append(name)
        else:
            vals[name] = value

    return ParameterVector(values=vals, missing=tuple(missing))


def extract_timedistance(pre, affected_plate):
    """Per-trial TDPs from the bilateral contact pair (before session averaging)."""
    c1, c2 = pre.contacts
    if c1 is None or c2 is None:
        raise SinglePlateOnly(pre.trial_id)
    ds_overlap = max(0.0, min(c1.to_time, c2.to_time) - max(c1.ic_time, c2.ic_time))
    step_time = c2.ic_time - c1.ic_time
    to_time = c2.to_time - c1.to_time
    if step_time <= 0 or to_time <= 0:
        raise SinglePlateOnly(
            f"{pre.trial_id}: plate 2 contact does not follow plate 1"
        )
    step_len = abs(c2.ic_cop_ap - c1.ic_cop_ap)
    # second step is unobserved with two plates; estimated from the toe-off pair
    to_step_len = abs(c2.to_cop_ap - c1.to_cop_ap)
    stride_t = step_time + to_time
    v1 = step_len / step_time
    v2 = to_step_len / to_time
    return {
        "ST": pre.waveforms[affected_plate].stance_time,
        "DS": ds_overlap,
        "STEPLEN": step_len,
        "STEPV": v1 * KMH_PER_MS,
        "STRIDET": stride_t,
        "BF": 1.0 / stride_t,
        "CAD": 120.0 / stride_t,
        "STEPWD": abs(c1.mean_cop_ml - c2.mean_cop_ml),
        "STRLEN": step_len + to_step_len,
        "GV": 0.5 * (v1 + v2) * KMH_PER_MS,
    }


@dataclass(frozen=True)
class ExtractConfig:
    """Pipeline-wide extraction options."""

    preprocess: PreprocessConfig = PreprocessConfig()
    control_side: str = "first-contact"  # left | right | first-contact

    def affected_plate(self, subject):
        """Index (0/1) of the plate carrying the limb whose DPs are extracted."""
        side = subject.affected_side
        if side == "unspecified":
            side = self.control_side
        if side in ("first-contact", "left"):
            return 0
        if side == "right":
            return 1
        raise ValueError(f"cannot resolve affected side {side!r}")


WAVEFORM_SIGNALS = ("f_v", "f_ap", "f_ml", "cop_ap", "cop_ml")
PCA_SAMPLE_STRIDE = 3  # every third sample, starting at 0


@dataclass
class FeatureBundle:
    """All per-trial products of one extraction run, row-aligned.

    ``params`` has NaN rows for trials whose parameter extraction failed;
    ``params_ok`` marks complete rows. Waveform matrices hold the affected
    limb's signals at every third stance sample (334 columns each).
    """

    trial_ids: list
    subject_ids: np.ndarray
    session_ids: np.ndarray
    labels: np.ndarray  # class letters as strings
    params: np.ndarray  # (n, 52)
    params_ok: np.ndarray  # (n,) bool
    waveforms: dict  # signal -> (n, 334)
    exclusions: list  # (trial_id, stage, message)

    @property
    def n_trials(self):
        return len(self.trial_ids)

    def subset(self, trial_ids):
        """Row-sliced bundle for the given trials (order: as stored).

        Balanced subsets keep whole sessions, so the session-averaged TDPs
        attached to each row remain valid.
        """
        wanted = set(trial_ids)
        mask = np.asarray([t in wanted for t in self.trial_ids], dtype=bool)
        idx = np.flatnonzero(mask)
        return FeatureBundle(
            trial_ids=[self.trial_ids[i] for i in idx],
            subject_ids=self.subject_ids[mask],
            session_ids=self.session_ids[mask],
            labels=self.labels[mask],
            params=self.params[mask],
            params_ok=self.params_ok[mask],
            waveforms={sig: m[mask] for sig, m in self.waveforms.items()},
            exclusions=[e for e in self.exclusions if e[0] in wanted],
        )

    def param_table(self):
        """DataFrame of complete parameter rows (trial_id + 52 columns)."""
        import pandas as pd

        frame = pd.DataFrame(self.params[self.params_ok], columns=PARAMETER_NAMES)
        frame.insert(0, "trial_id", [t for t, ok in zip(self.trial_ids, self.params_ok) if ok])
        return frame

    def subject_classes(self):
        """Mapping subject_id -> class letter."""
        out = {}
        for sid, lab in zip(self.subject_ids, self.labels):
            out[sid] = lab
        return out


def _extract_one(ds, cfg, trial_id):
    """(trial_id, stage, payload) for one trial; never raises."""
    trial = ds.trials[trial_id]
    subject = ds.subject_of_trial(trial_id)
    session = ds.session_of_trial(trial_id)
    try:
        if trial.plate1 is None:
            trial = trial.materialized()
        pre = preprocess_trial(trial, subject, session, cfg.preprocess)
    except Exception as exc:  # per-trial failure; run continues
        return trial_id, "preprocess", str(exc)
    plate = cfg.affected_plate(subject)
    wf = pre.waveforms[plate]
    dp = td = None
    err = None
    try:
        dp = extract_discrete(wf)
        td = extract_timedistance(pre, plate)
    except (NoSignChange, LandmarkNotFound, SinglePlateOnly) as exc:
        dp = td = None
        err = str(exc)
    waves = tuple(wf.signals[sig][::PCA_SAMPLE_STRIDE] for sig in WAVEFORM_SIGNALS)
    return trial_id, "ok", (subject, session, dp, td, waves, err)


def extract_features(ds, cfg=None, jobs=None):
    """Run preprocessing + parameter extraction over every trial of a dataset.

    Per-trial failures are collected as exclusions and the run continues.
    TDPs are averaged per session over its successfully processed trials and
    attached identically to each of that session's rows. Trials are
    independent, so the per-trial stage maps in parallel when ``jobs`` > 1.
    """
    from ._parallel import parallel_map

    cfg = cfg or ExtractConfig()
    trial_ids, subj_ids, sess_ids, labels = [], [], [], []
    dp_rows, td_rows = [], []
    wave_rows = {sig: [] for sig in WAVEFORM_SIGNALS}
    exclusions = []

    results = parallel_map(
        lambda tid: _extract_one(ds, cfg, tid), ds.trial_ids_sorted(), jobs=jobs
    )
    for trial_id, stage, payload in results:
        if stage == "preprocess":
            exclusions.append((trial_id, "preprocess", payload))
            continue
        subject, session, dp, td, waves, err = payload
        if err is not None:
            exclusions.append((trial_id, "extract", err))
        trial_ids.append(trial_id)
        subj_ids.append(subject.id)
        sess_ids.append(session.id)
        labels.append(subject.gait_class.value)
        dp_rows.append(dp)
        td_rows.append(td)
        for sig, wave in zip(WAVEFORM_SIGNALS, waves):
            wave_rows[sig].append(wave)

    n = len(trial_ids)
    params = np.full((n, len(PARAMETER_NAMES)), np.nan)
    params_ok = np.zeros(n, dtype=bool)

    # session-average the TDPs, then assemble full rows
    sess_ids_arr = np.asarray(sess_ids, dtype=object)
    td_index = {name: k for k, name in enumerate(TIMEDISTANCE_NAMES)}
    session_mean = {}
    for sess in sorted(set(sess_ids)):
        rows = [
            td_rows[i]
            for i in range(n)
            if sess_ids[i] == sess and td_rows[i] is not None
        ]
        if rows:
            session_mean[sess] = {
                name: float(np.mean([r[name] for r in rows]))
                for name in TIMEDISTANCE_NAMES
            }

    name_index = {name: k for k, name in enumerate(PARAMETER_NAMES)}
    for i in range(n):
        dp = dp_rows[i]
        mean_td = session_mean.get(sess_ids[i])
        if dp is None or mean_td is None:
            continue
        for name, value in dp.values.items():
            params[i, name_index[name]] = value
        for name in TIMEDISTANCE_NAMES:
            params[i, name_index[name]] = mean_td[name]
        if not dp.missing and np.all(np.isfinite(params[i])):
            params_ok[i] = True
        else:
            exclusions.append(
                (trial_ids[i], "landmarks", f"missing {','.join(dp.missing)}")
            )

    waveforms = {
        sig: (np.vstack(wave_rows[sig]) if n else np.empty((0, 334)))
        for sig in WAVEFORM_SIGNALS
    }
    return FeatureBundle(
        trial_ids=trial_ids,
        subject_ids=np.asarray(subj_ids, dtype=object),
        session_ids=sess_ids_arr,
        labels=np.asarray(labels, dtype=object),
        params=params,
        params_ok=params_ok,
        waveforms=waveforms,
        exclusions=exclusions,
    )


def parameter_stats(bundle):
    """Per-class median/IQR/range of every parameter (boxplot-style summary)."""
    import pandas as pd

    rows = []
    ok = bundle.params_ok
    for label in sorted(set(bundle.labels)):
        mask = ok & (bundle.labels == label)
        block = bundle.params[mask]
        for j, name in enumerate(PARAMETER_NAMES):
            colv = block[:, j]
            if colv.size == 0:
                continue
            q1, med, q3 = np.percentile(colv, [25, 50, 75])
            rows.append(
                {
                    "class": label,
                    "parameter": name,
                    "median": med,
                    "q1": q1,
                    "q3": q3,
                    "iqr": q3 - q1,
                    "min": colv.min(),
                    "max": colv.max(),
                    "n": int(colv.size),
                }
            )
    return pd.DataFrame(rows)
