"""Class-conditional synthetic GRF/COP corpora with controllable separability.

Two waveform families live here:

* the smooth family (sums of Gaussian lobes under a C1 edge taper) generates
  raw two-plate recordings for full-pipeline runs; its landmarks are
  recoverable to high precision by root-finding on the analytic shape
  (see :func:`predicted_discrete`), and

* a piecewise-linear reference family whose vertices sit exactly on the
  1000-point stance grid, so every parameter — including trapezoid-rule
  impulses — has an exact closed form (see :func:`pl_reference_*`).

Generation is a pure function of the config: per-subject and per-trial RNG
streams are derived from (seed, indices), so any subset regenerates
identically.
"""

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.optimize import brentq, minimize_scalar

from .dataset import Dataset, GaitClass, Session, Subject, Trial
from .errors import ConfigInvalid
from .preprocess import GRAVITY, N_POINTS, ContactGeometry, StanceWaveforms

# ---------------------------------------------------------------------------
# smooth family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MorphParams:
    """Shape of one foot's stance in BW / stance-fraction / FL units."""

    stance_time: float = 0.70
    step_time: float = 0.55
    fv_p1: float = 0.75
    fv_p1_t: float = 0.24
    fv_p1_w: float = 0.10
    fv_p2: float = 0.72
    fv_p2_t: float = 0.76
    fv_p2_w: float = 0.10
    fv_valley: float = 0.62
    fv_valley_w: float = 0.30
    ap_blip: float = 0.10
    ap_blip_t: float = 0.09
    ap_blip_w: float = 0.055
    ap_brake: float = 0.22
    ap_brake_t: float = 0.25
    ap_brake_w: float = 0.11
    ap_push: float = 0.26
    ap_push_t: float = 0.78
    ap_push_w: float = 0.10
    ml_dip: float = 0.035
    ml_dip_t: float = 0.10
    ml_dip_w: float = 0.055
    ml_b1: float = 0.055
    ml_b1_t: float = 0.35
    ml_b1_w: float = 0.13
    ml_b2: float = 0.060
    ml_b2_t: float = 0.78
    ml_b2_w: float = 0.11
    cop_len: float = 0.80
    cop_drift: float = 0.06
    cop_arc: float = 0.020
    mode_fv: float = 0.0
    mode_ap: float = 0.0
    edge: float = 0.14

    def shifted(self, deltas, scale=1.0):
        updates = {k: getattr(self, k) + scale * v for k, v in deltas.items()}
        return replace(self, **updates)


def _gauss(s, center, width):
    return np.exp(-0.5 * ((s - center) / width) ** 2)


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


class ShapeFunctions:
    """Analytic stance-shape evaluators for one MorphParams."""

    def __init__(self, m):
        self.m = m

    def taper(self, s):
        e = self.m.edge
        return _smoothstep(np.asarray(s) / e) * _smoothstep((1.0 - np.asarray(s)) / e)

    def f_v(self, s):
        m = self.m
        s = np.asarray(s, dtype=float)
        core = (
            m.fv_p1 * _gauss(s, m.fv_p1_t, m.fv_p1_w)
            + m.fv_p2 * _gauss(s, m.fv_p2_t, m.fv_p2_w)
            + m.fv_valley * _gauss(s, 0.5, m.fv_valley_w)
            + m.mode_fv * (_gauss(s, 0.40, 0.075) - _gauss(s, 0.60, 0.075))
        )
        return self.taper(s) * core

    def f_ap(self, s):
        m = self.m
        s = np.asarray(s, dtype=float)
        core = (
            m.ap_blip * _gauss(s, m.ap_blip_t, m.ap_blip_w)
            - m.ap_brake * _gauss(s, m.ap_brake_t, m.ap_brake_w)
            + m.ap_push * _gauss(s, m.ap_push_t, m.ap_push_w)
            + m.mode_ap * (_gauss(s, 0.33, 0.08) - _gauss(s, 0.66, 0.08))
        )
        return self.taper(s) * core

    def f_ml(self, s):
        m = self.m
        s = np.asarray(s, dtype=float)
        core = (
            -m.ml_dip * _gauss(s, m.ml_dip_t, m.ml_dip_w)
            + m.ml_b1 * _gauss(s, m.ml_b1_t, m.ml_b1_w)
            + m.ml_b2 * _gauss(s, m.ml_b2_t, m.ml_b2_w)
        )
        return self.taper(s) * core

    def cop_progress(self, s):
        # flat before 6% and after 94% of stance so the 30 N validity window
        # clamps onto constant values
        return _smoothstep((np.asarray(s, dtype=float) - 0.06) / 0.88)

    def cop_ap_fl(self, s):
        return self.m.cop_len * self.cop_progress(s)

    def cop_ml_fl(self, s):
        u = np.clip((np.asarray(s, dtype=float) - 0.06) / 0.88, 0.0, 1.0)
        return self.m.cop_drift * self.cop_progress(s) + self.m.cop_arc * np.sin(
            math.pi * u
        )


# class structure: a coarse thigh/shank/control split plus within-group nuances;
# part of the signal lives in the mid-stance modes that landmark parameters
# barely see, which is what gives waveform PCA its edge over the parameters.
CLASS_OFFSETS = {
    "N": {},
    "C": {
        "fv_p2": -0.10, "fv_p1": -0.045, "ap_push": -0.050, "ap_brake": -0.025,
        "stance_time": 0.045, "step_time": 0.020, "cop_len": -0.070,
        "mode_fv": -0.055, "ml_dip": 0.012,
    },
    "A": {
        "fv_p2": -0.085, "ap_push": -0.040, "stance_time": 0.035,
        "step_time": 0.015, "cop_len": -0.055, "mode_fv": 0.055,
        "ml_b2": 0.018, "fv_p1_w": 0.012,
    },
    "K": {
        "fv_valley": 0.085, "ap_brake": -0.035, "stance_time": 0.015,
        "step_time": 0.035, "cop_drift": 0.028, "mode_ap": 0.050,
        "ml_b1": 0.016, "fv_p1": -0.02,
    },
    "H": {
        "fv_valley": 0.070, "stance_time": 0.060, "step_time": 0.045,
        "cop_drift": 0.022, "cop_arc": 0.016, "mode_ap": -0.050,
        "mode_fv": 0.030, "ml_dip": -0.010,
    },
}

# per-parameter scales for subject-level random effects and trial noise
SUBJECT_EFFECT_SCALES = {
    "fv_p1": 0.030, "fv_p2": 0.030, "fv_valley": 0.025,
    "ap_brake": 0.016, "ap_push": 0.016, "ap_blip": 0.006,
    "stance_time": 0.022, "step_time": 0.016,
    "cop_len": 0.025, "cop_drift": 0.008, "mode_fv": 0.020, "mode_ap": 0.018,
    "ml_b1": 0.006, "ml_b2": 0.006,
}
TRIAL_EFFECT_SCALES = {
    "fv_p1": 0.012, "fv_p2": 0.012, "fv_valley": 0.010,
    "ap_brake": 0.007, "ap_push": 0.007,
    "stance_time": 0.008, "step_time": 0.006,
    "cop_len": 0.008, "cop_drift": 0.003, "mode_fv": 0.008, "mode_ap": 0.007,
}


@dataclass(frozen=True)
class ClassSpec:
    n_subjects: int
    n_sessions: int  # total across the class, distributed evenly
    trials_per_session: int = 8
    n_male: int = None
    age_mean: float = 40.0
    age_sd: float = 12.0
    mass_mean: float = 80.0
    mass_sd: float = 15.0


@dataclass(frozen=True)
class GeneratorConfig:
    classes: dict
    seed: int = 0
    sample_rate: float = 500.0
    class_sep: float = 1.0
    subject_sd: float = 1.0
    trial_sd: float = 1.0
    ripple_bw: float = 0.030
    foot_length_m: float = 0.26
    foot_length_sd: float = 0.012
    plate_ml_gap_m: float = 0.18
    lead_in_s: float = 0.25
    morph: MorphParams = MorphParams()
    class_offsets: dict = field(default_factory=lambda: CLASS_OFFSETS)

    def __post_init__(self):
        for label, spec in self.classes.items():
            GaitClass(label)  # raises on unknown labels
            if spec.n_subjects <= 0 or spec.n_sessions < spec.n_subjects:
                raise ConfigInvalid(
                    f"class {label}: need n_subjects >= 1 and "
                    "n_sessions >= n_subjects"
                )
            if spec.trials_per_session < 1:
                raise ConfigInvalid(f"class {label}: trials_per_session >= 1")
        if self.sample_rate <= 40.0:
            raise ConfigInvalid("sample_rate must exceed twice the 20 Hz cutoff")
        m = self.morph
        for name in ("fv_p1", "fv_p2", "fv_valley", "ap_brake", "ap_push"):
            if getattr(m, name) < 0:
                raise ConfigInvalid(f"morph amplitude {name} must be >= 0")
        if not m.fv_p1_t < 0.5 < m.fv_p2_t:
            raise ConfigInvalid("vertical peak times must straddle midstance")


def _session_allocation(total, n_subjects):
    base, extra = divmod(total, n_subjects)
    return [base + 1 if i < extra else base for i in range(n_subjects)]


def _trial_morph(cfg, label, subj_rng_offsets, trial_rng):
    deltas = dict(cfg.class_offsets.get(label, {}))
    m = cfg.morph.shifted(deltas, scale=cfg.class_sep)
    m = m.shifted(subj_rng_offsets, scale=1.0)
    if cfg.trial_sd > 0:
        trial_deltas = {
            k: trial_rng.normal(0.0, s * cfg.trial_sd)
            for k, s in TRIAL_EFFECT_SCALES.items()
        }
        m = m.shifted(trial_deltas, scale=1.0)
    return m


def _render_plate(shape, st, fs, t_start, n_samples, bw_newton, foot_length,
                  ap_origin, ml_origin, ml_sign, ripple_fv, ripple_ap):
    """Sample one foot's raw (n,5) plate block on the trial clock."""
    t = np.arange(n_samples) / fs
    s = (t - t_start) / st
    inside = (s >= 0.0) & (s <= 1.0)
    si = s[inside]
    taper = shape.taper(si)
    fv = shape.f_v(si) + (ripple_fv(si) * taper if ripple_fv else 0.0)
    fap = shape.f_ap(si) + (ripple_ap(si) * taper if ripple_ap else 0.0)
    fml = shape.f_ml(si)
    block = np.zeros((n_samples, 5))
    block[inside, 0] = fap * bw_newton
    block[inside, 1] = fml * bw_newton * ml_sign
    block[inside, 2] = np.maximum(fv, 0.0) * bw_newton
    cop_ap = ap_origin + foot_length * shape.cop_ap_fl(si)
    cop_ml = ml_origin + ml_sign * foot_length * shape.cop_ml_fl(si)
    block[inside, 3] = cop_ap
    block[inside, 4] = cop_ml
    # outside stance the plate is unloaded; COP columns repeat the edge value
    first, last = np.flatnonzero(inside)[[0, -1]]
    block[:first, 3] = block[first, 3]
    block[last + 1 :, 3] = block[last, 3]
    block[:first, 4] = block[first, 4]
    block[last + 1 :, 4] = block[last, 4]
    return block


def generate(cfg, out_dir=None):
    """Synthesize a dataset; optionally write the CSV corpus to ``out_dir``.

    Returns the Dataset. With ``out_dir`` the trials reference the written
    recording files lazily; without it the raw arrays stay in memory.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    rec_dir = None
    meta_rows = []
    if out_dir is not None:
        rec_dir = out_dir / "recordings"
        rec_dir.mkdir(parents=True, exist_ok=True)

    subjects, sessions, trials = {}, {}, {}
    subj_counter = 0
    for label in sorted(cfg.classes):
        spec = cfg.classes[label]
        alloc = _session_allocation(spec.n_sessions, spec.n_subjects)
        n_male = spec.n_male if spec.n_male is not None else spec.n_subjects // 2
        for si in range(spec.n_subjects):
            subj_counter += 1
            sid = f"S{subj_counter:04d}"
            srng = np.random.default_rng([cfg.seed, 0x5B, subj_counter])
            age = max(18.0, spec.age_mean + spec.age_sd * srng.standard_normal())
            mass = max(45.0, spec.mass_mean + spec.mass_sd * srng.standard_normal())
            sex = "male" if si < n_male else "female"
            affected = "unspecified" if label == "N" else ("left", "right")[si % 2]
            subject = Subject(
                id=sid, gait_class=GaitClass(label), age=age,
                body_mass=mass, sex=sex, affected_side=affected,
            )
            subjects[sid] = subject
            subj_offsets = {
                k: srng.normal(0.0, s * cfg.subject_sd)
                for k, s in SUBJECT_EFFECT_SCALES.items()
            }
            for sess_i in range(alloc[si]):
                sess_id = f"{sid}-E{sess_i + 1:02d}"
                fl = max(
                    0.20,
                    cfg.foot_length_m
                    + cfg.foot_length_sd * srng.standard_normal(),
                )
                session = Session(id=sess_id, subject_id=sid, foot_length=fl)
                sessions[sess_id] = session
                for trial_i in range(spec.trials_per_session):
                    trial_id = f"{sess_id}-T{trial_i + 1:02d}"
                    trng = np.random.default_rng(
                        [cfg.seed, 0x7A, subj_counter, sess_i, trial_i]
                    )
                    plate1, plate2 = _synth_trial(
                        cfg, label, subject, fl, subj_offsets, trng
                    )
                    rec_name = f"{trial_id}.csv"
                    if out_dir is not None:
                        _write_recording(rec_dir / rec_name, plate1, plate2)
                        trial = Trial(
                            id=trial_id, session_id=sess_id,
                            sample_rate=cfg.sample_rate,
                            recording_path=rec_dir / rec_name,
                        )
                    else:
                        trial = Trial(
                            id=trial_id, session_id=sess_id,
                            sample_rate=cfg.sample_rate,
                            plate1=plate1, plate2=plate2,
                        )
                    trials[trial_id] = trial
                    session.trial_ids.append(trial_id)
                    meta_rows.append(
                        {
                            "subject_id": sid,
                            "class": label,
                            "age": round(age, 2),
                            "body_mass_kg": round(mass, 2),
                            "sex": sex,
                            "affected_side": affected,
                            "session_id": sess_id,
                            "foot_length_m": round(fl, 4),
                            "trial_id": trial_id,
                            "recording_file": f"recordings/{rec_name}",
                        }
                    )
    if out_dir is not None:
        pd.DataFrame(meta_rows).to_csv(out_dir / "metadata.csv", index=False)
    return Dataset(subjects, sessions, trials)


def _synth_trial(cfg, label, subject, foot_length, subj_offsets, trng):
    m = _trial_morph(cfg, label, subj_offsets, trng)
    ripple_amp = cfg.ripple_bw * cfg.trial_sd
    # draw ripple weights once per signal so both feet share them
    if ripple_amp > 0:
        c_fv = trng.uniform(0.12, 0.88, size=4)
        w_fv = trng.normal(0.0, ripple_amp, size=4)
        c_ap = trng.uniform(0.12, 0.88, size=4)
        w_ap = trng.normal(0.0, 0.5 * ripple_amp, size=4)

        def rip_fv(s):
            out = np.zeros_like(s)
            for c, w in zip(c_fv, w_fv):
                out += w * _gauss(s, c, 0.05)
            return out

        def rip_ap(s):
            out = np.zeros_like(s)
            for c, w in zip(c_ap, w_ap):
                out += w * _gauss(s, c, 0.05)
            return out

    else:
        rip_fv = rip_ap = None

    shape = ShapeFunctions(m)
    st = m.stance_time
    step = m.step_time
    if step >= st:
        step = st - 0.05  # keep a double-support overlap
    ic1 = cfg.lead_in_s
    ic2 = ic1 + step
    n_samples = int(math.ceil((ic2 + st + cfg.lead_in_s) * cfg.sample_rate))
    bw_newton = subject.body_mass * GRAVITY
    step_len = step * 1.30 * (st / 0.70)  # forward progression per step, m
    plate1 = _render_plate(
        shape, st, cfg.sample_rate, ic1, n_samples, bw_newton, foot_length,
        ap_origin=0.30, ml_origin=+0.5 * cfg.plate_ml_gap_m, ml_sign=+1.0,
        ripple_fv=rip_fv, ripple_ap=rip_ap,
    )
    plate2 = _render_plate(
        shape, st, cfg.sample_rate, ic2, n_samples, bw_newton, foot_length,
        ap_origin=0.30 + step_len, ml_origin=-0.5 * cfg.plate_ml_gap_m,
        ml_sign=-1.0, ripple_fv=rip_fv, ripple_ap=rip_ap,
    )
    return plate1, plate2


def _write_recording(path, plate1, plate2):
    n1, n2 = len(plate1), len(plate2)
    frame = pd.DataFrame(
        np.vstack([plate1, plate2]),
        columns=["Fx_N", "Fy_N", "Fz_N", "COPx_m", "COPy_m"],
    )
    frame.insert(0, "plate", np.repeat([1, 2], [n1, n2]))
    frame.to_csv(path, index=False, float_format="%.6g")


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

# class cardinalities of the published clinical corpus (subjects, sessions,
# males) — the paper-shape preset mirrors these exactly, at a desk-scale
# sample rate
PUBLISHED_SHAPE = {
    "N": (161, 161, 84),
    "C": (82, 320, 74),
    "A": (62, 259, 56),
    "K": (69, 258, 44),
    "H": (66, 189, 53),
}
PUBLISHED_DEMOGRAPHICS = {
    "N": (32.4, 13.6, 74.1, 16.2),
    "C": (42.4, 9.9, 84.5, 12.1),
    "A": (40.0, 11.5, 88.3, 16.9),
    "K": (41.5, 11.4, 83.7, 19.6),
    "H": (43.6, 14.7, 81.6, 18.3),
}


def paper_shape_config(seed=0, sample_rate=250.0):
    classes = {}
    for label, (n_sub, n_sess, n_male) in PUBLISHED_SHAPE.items():
        age_m, age_sd, mass_m, mass_sd = PUBLISHED_DEMOGRAPHICS[label]
        classes[label] = ClassSpec(
            n_subjects=n_sub, n_sessions=n_sess, trials_per_session=8,
            n_male=n_male, age_mean=age_m, age_sd=age_sd,
            mass_mean=mass_m, mass_sd=mass_sd,
        )
    return GeneratorConfig(classes=classes, seed=seed, sample_rate=sample_rate)


def small_config(seed=0, subjects_per_class=4, sessions_per_subject=1,
                 trials_per_session=2, sample_rate=400.0, **overrides):
    classes = {
        label: ClassSpec(
            n_subjects=subjects_per_class,
            n_sessions=subjects_per_class * sessions_per_subject,
            trials_per_session=trials_per_session,
        )
        for label in ("N", "C", "A", "K", "H")
    }
    return GeneratorConfig(
        classes=classes, seed=seed, sample_rate=sample_rate, **overrides
    )


def mid_corpus_config(seed=0, sample_rate=250.0):
    """Imbalanced mid-separability corpus used for directional experiments."""
    classes = {
        "N": ClassSpec(28, 28, 8, n_male=14),
        "C": ClassSpec(16, 32, 8, n_male=12),
        "A": ClassSpec(12, 24, 8, n_male=9),
        "K": ClassSpec(14, 28, 8, n_male=8),
        "H": ClassSpec(12, 24, 8, n_male=9),
    }
    return GeneratorConfig(
        classes=classes, seed=seed, sample_rate=sample_rate,
        class_sep=1.0, subject_sd=1.0, trial_sd=1.0,
    )


# ---------------------------------------------------------------------------
# analytic oracle for the smooth family
# ---------------------------------------------------------------------------


def _maximize(f, lo, hi):
    res = minimize_scalar(
        lambda s: -f(float(s)), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.x), float(-res.fun)


def _minimize(f, lo, hi):
    res = minimize_scalar(
        lambda s: f(float(s)), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.x), float(res.fun)


def predicted_discrete(morph, body_mass, sample_rate, lead_in_s,
                       step_threshold_n=10.0):
    """High-precision landmark predictions for one zero-noise smooth stance.

    Works directly on the analytic shape functions: threshold crossings by
    root bracketing, extrema by bounded scalar minimization, so it is
    independent of the sampled/filtered pipeline it validates. Times are
    returned in %ST of the sample-quantized detected stance window.
    """
    shape = ShapeFunctions(morph)
    st = morph.stance_time
    thr = step_threshold_n / (body_mass * GRAVITY)

    def fv(s):
        return float(shape.f_v(s))

    def fap(s):
        return float(shape.f_ap(s))

    def fml(s):
        return float(shape.f_ml(s))

    s_on = brentq(lambda s: fv(s) - thr, 1e-9, 0.25, xtol=1e-14)
    s_off = brentq(lambda s: fv(s) - thr, 0.75, 1.0 - 1e-9, xtol=1e-14)
    # the pipeline detects the first/last sample at/above threshold
    fs = sample_rate
    k_ic = math.ceil((lead_in_s + s_on * st) * fs - 1e-9)
    k_to = math.floor((lead_in_s + s_off * st) * fs + 1e-9)
    t_ic = k_ic / fs
    t_to = k_to / fs
    st_det = t_to - t_ic

    def pct(s_abs):
        return 100.0 * (lead_in_s + s_abs * st - t_ic) / st_det

    sv1, fv1 = _maximize(fv, 0.10, 0.45)
    sv3, fv3 = _maximize(fv, 0.55, 0.92)
    sv2, fv2 = _minimize(fv, sv1, sv3)
    sb, fap2 = _minimize(fap, 0.08, 0.45)
    sa1, fap1 = _maximize(fap, 0.0, sb)
    sp, fap3 = _maximize(fap, 0.55, 0.95)
    sm1, fml1 = _minimize(fml, 0.0, 0.30)
    sm2, fml2 = _maximize(fml, 0.10, 0.55)
    sm3, fml3 = _maximize(fml, 0.55, 0.95)
    cross = brentq(fap, sb, sp, xtol=1e-14)

    return {
        "detected_ic_time": t_ic,
        "detected_to_time": t_to,
        "detected_stance_time": st_det,
        "crossover_pct": pct(cross),
        "F_V1": fv1, "T_V1": pct(sv1),
        "F_V2": fv2, "T_V2": pct(sv2),
        "F_V3": fv3, "T_V3": pct(sv3),
        "F_AP1": fap1, "T_AP1": pct(sa1),
        "F_AP2": fap2, "T_AP2": pct(sb),
        "F_AP3": fap3, "T_AP3": pct(sp),
        "F_ML1": fml1, "T_ML1": pct(sm1),
        "F_ML2": fml2, "T_ML2": pct(sm2),
        "F_ML3": fml3, "T_ML3": pct(sm3),
    }


# ---------------------------------------------------------------------------
# band-limited validation trial
# ---------------------------------------------------------------------------


class BandlimitedShapes:
    """Stance shapes made of a few low harmonics (< 6 Hz for ~0.7 s stances).

    The 20 Hz low-pass passes these within ~5e-4 BW, so pipeline output can
    be compared against direct evaluation of the analytic functions at the
    1000 resampled time points.
    """

    def __init__(self, fv_amp=1.15, ap_amp=0.25, ml_amp=0.06, cop_len=0.8):
        self.fv_amp = fv_amp
        self.ap_amp = ap_amp
        self.ml_amp = ml_amp
        self.cop_len = cop_len

    def f_v(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
        return self.fv_amp * np.sin(math.pi * s) ** 4

    def f_ap(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
        return -self.ap_amp * np.sin(2 * math.pi * s) * np.sin(math.pi * s) ** 2

    def f_ml(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
        return self.ml_amp * np.sin(math.pi * s) ** 2

    def cop_ap_fl(self, s):
        # flat zones cover the sub-30 N stretch of the sin^4 onset (~14% ST)
        return self.cop_len * _smoothstep((np.asarray(s, dtype=float) - 0.16) / 0.68)

    def cop_ml_fl(self, s):
        u = np.clip((np.asarray(s, dtype=float) - 0.16) / 0.68, 0.0, 1.0)
        return 0.05 * np.sin(math.pi * u)

    def onset_fraction(self, threshold_bw):
        """Stance fraction where f_v first reaches the threshold (closed form)."""
        return math.asin((threshold_bw / self.fv_amp) ** 0.25) / math.pi


def bandlimited_trial(body_mass=75.0, foot_length=0.26, stance_time=0.72,
                      step_time=0.55, sample_rate=1000.0, lead_in=0.3,
                      trial_id="bl-trial", shapes=None):
    """Two-plate raw Trial built from the band-limited family.

    Returns (Trial, shapes, timing dict); the shapes object evaluates the
    analytic signals for oracle comparisons.
    """
    shapes = shapes or BandlimitedShapes()
    ic1 = lead_in
    ic2 = ic1 + step_time
    n = int(math.ceil((ic2 + stance_time + lead_in) * sample_rate))
    bw = body_mass * GRAVITY

    def plate(t_start, origin_ap, origin_ml, ml_sign):
        t = np.arange(n) / sample_rate
        s = (t - t_start) / stance_time
        inside = (s >= 0.0) & (s <= 1.0)
        si = s[inside]
        block = np.zeros((n, 5))
        block[inside, 0] = shapes.f_ap(si) * bw
        block[inside, 1] = shapes.f_ml(si) * bw * ml_sign
        block[inside, 2] = shapes.f_v(si) * bw
        block[inside, 3] = origin_ap + foot_length * shapes.cop_ap_fl(si)
        block[inside, 4] = origin_ml + ml_sign * foot_length * shapes.cop_ml_fl(si)
        first, last = np.flatnonzero(inside)[[0, -1]]
        for c in (3, 4):
            block[:first, c] = block[first, c]
            block[last + 1 :, c] = block[last, c]
        return block

    plate1 = plate(ic1, 0.30, 0.09, +1.0)
    plate2 = plate(ic2, 1.00, -0.09, -1.0)
    trial = Trial(
        id=trial_id, session_id="bl-session", sample_rate=sample_rate,
        plate1=plate1, plate2=plate2,
    )
    timing = {"ic1": ic1, "ic2": ic2, "stance_time": stance_time}
    return trial, shapes, timing


# ---------------------------------------------------------------------------
# piecewise-linear reference family (exact closed forms)
# ---------------------------------------------------------------------------

# vertices on the 1000-point stance grid: (sample index, value)
PL_FV = [(0, 0.0), (80, 0.80), (240, 1.10), (500, 0.72), (760, 1.08),
         (930, 0.50), (999, 0.0)]
PL_FAP = [(0, 0.0), (30, 0.040), (60, 0.0), (180, -0.180), (500, 0.0),
          (780, 0.220), (999, 0.0)]
PL_FML = [(0, 0.0), (100, -0.030), (200, 0.0), (360, 0.060), (500, 0.045),
          (760, 0.090), (999, 0.0)]
PL_COP_RANGE_FL = 0.85
PL_COP_ANGLE_DEG = 5.0


def _pl_samples(vertices):
    ks = np.array([k for k, _ in vertices], dtype=float)
    vs = np.array([v for _, v in vertices], dtype=float)
    return np.interp(np.arange(N_POINTS, dtype=float), ks, vs)


def _pl_integral(vertices, dt, k_end=None):
    """Exact integral of the vertex-defined PL function up to sample k_end."""
    total = 0.0
    for (k0, v0), (k1, v1) in zip(vertices[:-1], vertices[1:]):
        if k_end is not None and k_end <= k0:
            break
        if k_end is not None and k_end < k1:
            v_end = v0 + (v1 - v0) * (k_end - k0) / (k1 - k0)
            total += 0.5 * (v0 + v_end) * (k_end - k0)
            break
        total += 0.5 * (v0 + v1) * (k1 - k0)
    return total * dt


def _pl_sample_mean(vertices):
    """Mean of the 1000 grid samples (arithmetic series per segment)."""
    total = 0.0
    for i, ((k0, v0), (k1, v1)) in enumerate(zip(vertices[:-1], vertices[1:])):
        count = k1 - k0 + 1
        total += count * 0.5 * (v0 + v1)
        if i > 0:
            total -= v0  # interior vertex counted by both segments
    return total / N_POINTS


def _pl_crossing(vertices, level, after=0.0, rising=True):
    """Fractional grid index where the PL function first meets ``level``."""
    for (k0, v0), (k1, v1) in zip(vertices[:-1], vertices[1:]):
        if k1 <= after:
            continue
        lo = max(k0, after)
        v_lo = v0 + (v1 - v0) * (lo - k0) / (k1 - k0) if k1 > k0 else v0
        if rising and v_lo >= level:
            return lo
        if not rising and v_lo <= level:
            return lo
        if rising and v_lo < level <= v1:
            return lo + (level - v_lo) / (v1 - v_lo) * (k1 - lo)
        if not rising and v_lo > level >= v1:
            return lo + (v_lo - level) / (v_lo - v1) * (k1 - lo)
    return None


def pl_expected_discrete(stance_time):
    """Closed-form values of the 42 per-foot parameters for the PL family."""
    dt = stance_time / (N_POINTS - 1)

    def pct(k):
        return 100.0 * k / (N_POINTS - 1)

    vals = {
        "F_V1": 1.10, "T_V1": pct(240),
        "F_V2": 0.72, "T_V2": pct(500),
        "F_V3": 1.08, "T_V3": pct(760),
        "F_AP1": 0.040, "T_AP1": pct(30),
        "F_AP2": -0.180, "T_AP2": pct(180),
        "F_AP3": 0.220, "T_AP3": pct(780),
        "F_ML1": -0.030, "T_ML1": pct(100),
        "F_ML2": 0.060, "T_ML2": pct(360),
        "F_ML3": 0.090, "T_ML3": pct(760),
        "F_VAVG": _pl_sample_mean(PL_FV),
        "F_APAVG": _pl_sample_mean(PL_FAP),
        "F_MLAVG": _pl_sample_mean(PL_FML),
        "IF_V": 100.0 * _pl_integral(PL_FV, dt),
        "IF_AP": 100.0 * _pl_integral(PL_FAP, dt),
        "IF_ML": 100.0 * _pl_integral(PL_FML, dt),
        "IF_V1": 100.0 * _pl_integral(PL_FV, dt, 240),
        "IF_V2": 100.0 * _pl_integral(PL_FV, dt, 500),
        "IF_V3": 100.0 * _pl_integral(PL_FV, dt, 760),
        "IF_APDEC": 100.0 * _pl_integral(PL_FAP, dt, 500),
        "IF_APACC": 100.0 * (_pl_integral(PL_FAP, dt) - _pl_integral(PL_FAP, dt, 500)),
        # lateral lobe of the PL F_ML is the triangle over [0, 200]
        "IF_LAT": 100.0 * abs(_pl_integral(PL_FML, dt, 200)),
        "IF_MED": 100.0 * (_pl_integral(PL_FML, dt) - _pl_integral(PL_FML, dt, 200)),
        "COPANG": PL_COP_ANGLE_DEG,
        "COPDEV": 0.0,
        "COP_AP": PL_COP_RANGE_FL,
        "COP_ML": PL_COP_RANGE_FL * math.tan(math.radians(PL_COP_ANGLE_DEG)),
        "COPV": 1.0 / stance_time,
        # F_AP is negative on (60, 500), positive elsewhere except endpoints
        "DECT": (500 - 60) * dt,
        "ACCT": (60 + (999 - 500)) * dt,
    }
    t80 = _pl_crossing(PL_FV, 0.8 * 1.10) * dt
    t20 = _pl_crossing(PL_FV, 0.2 * 1.10) * dt
    u80 = _pl_crossing(PL_FV, 0.8 * 1.08, after=760, rising=False) * dt
    u20 = _pl_crossing(PL_FV, 0.2 * 1.08, after=760, rising=False) * dt
    vals["LR0080"] = (0.8 * 1.10 - 0.0) / t80
    vals["LR2080"] = (0.8 * 1.10 - 0.2 * 1.10) / (t80 - t20)
    vals["UR8000"] = (0.0 - 0.8 * 1.08) / (stance_time - u80)
    vals["UR8020"] = (0.2 * 1.08 - 0.8 * 1.08) / (u20 - u80)
    return vals


PL_TIMING = {
    "ic1": 0.50, "to1": 1.15, "ic2": 1.05, "to2": 1.70,
    "ic_cop_ap1": 0.30, "ic_cop_ap2": 1.00,
    "mean_cop_ml1": 0.085, "mean_cop_ml2": -0.083,
    "foot_length": 0.26,
}


def pl_expected_timedistance():
    """Closed-form TDPs for the PL reference trial's contact pair."""
    t = PL_TIMING
    st = t["to1"] - t["ic1"]
    step_time = t["ic2"] - t["ic1"]
    to_time = t["to2"] - t["to1"]
    step_len = t["ic_cop_ap2"] - t["ic_cop_ap1"]
    cop_travel = PL_COP_RANGE_FL * t["foot_length"]
    to_step_len = (t["ic_cop_ap2"] + cop_travel) - (t["ic_cop_ap1"] + cop_travel)
    stride_t = step_time + to_time
    v1 = step_len / step_time
    v2 = to_step_len / to_time
    return {
        "ST": st,
        "DS": t["to1"] - t["ic2"],
        "STEPLEN": step_len,
        "STEPV": v1 * 3.6,
        "STRIDET": stride_t,
        "BF": 1.0 / stride_t,
        "CAD": 120.0 / stride_t,
        "STEPWD": abs(t["mean_cop_ml1"] - t["mean_cop_ml2"]),
        "STRLEN": step_len + to_step_len,
        "GV": 0.5 * (v1 + v2) * 3.6,
    }


def pl_reference_waveforms(foot="left"):
    """StanceWaveforms of the PL reference foot (exact grid samples)."""
    t = PL_TIMING
    st = t["to1"] - t["ic1"]
    grid = np.arange(N_POINTS, dtype=float)
    cop_ap = PL_COP_RANGE_FL * grid / (N_POINTS - 1)
    cop_ml = cop_ap * math.tan(math.radians(PL_COP_ANGLE_DEG))
    return StanceWaveforms(
        f_v=_pl_samples(PL_FV),
        f_ap=_pl_samples(PL_FAP),
        f_ml=_pl_samples(PL_FML),
        cop_ap=cop_ap,
        cop_ml=cop_ml,
        stance_time=st,
        initial_contact_time=t["ic1"],
        toe_off_time=t["to1"],
        foot=foot,
    )


def pl_reference_contacts():
    """The contact-geometry pair matching :data:`PL_TIMING`."""
    t = PL_TIMING
    travel = PL_COP_RANGE_FL * t["foot_length"]
    c1 = ContactGeometry(
        foot="left", ic_time=t["ic1"], to_time=t["to1"],
        ic_cop_ap=t["ic_cop_ap1"], ic_cop_ml=0.08,
        to_cop_ap=t["ic_cop_ap1"] + travel, to_cop_ml=0.08,
        mean_cop_ap=t["ic_cop_ap1"] + travel / 2,
        mean_cop_ml=t["mean_cop_ml1"],
    )
    c2 = ContactGeometry(
        foot="right", ic_time=t["ic2"], to_time=t["to2"],
        ic_cop_ap=t["ic_cop_ap2"], ic_cop_ml=-0.08,
        to_cop_ap=t["ic_cop_ap2"] + travel, to_cop_ml=-0.08,
        mean_cop_ap=t["ic_cop_ap2"] + travel / 2,
        mean_cop_ml=t["mean_cop_ml2"],
    )
    return c1, c2
