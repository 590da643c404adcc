"""Raw trial -> normalized stance waveforms.

Pipeline per plate: zero-phase low-pass filter the force channels, detect the
stance window on the vertical force, resample every signal to 1000 points
over [initial contact, toe-off], express forces in multiples of body weight
and COP displacement (relative to its initial-contact value) in multiples of
foot length. COP samples are only trusted where the vertical force is at
least ``cop_threshold`` newtons; outside that window the nearest valid value
is used.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, filtfilt

from .errors import (
    CutoffAboveNyquist,
    DegenerateStance,
    MultipleStancesWarning,
    NoStanceDetected,
)

GRAVITY = 9.81  # m/s^2, exact by convention
N_POINTS = 1000
PLATE_FEET = ("left", "right")  # fixed convention: plate 1 = left, plate 2 = right


@dataclass(frozen=True)
class FilterSpec:
    """Zero-phase low-pass Butterworth specification."""

    order: int = 2
    cutoff_hz: float = 20.0

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("filter order must be >= 1")
        if self.cutoff_hz <= 0:
            raise ValueError("cutoff must be positive")


@dataclass
class StanceWaveforms:
    """The five normalized stance-phase signals of one foot.

    Forces are in BW, COP displacements in FL, all resampled to 1000 points
    spanning 0..100% of stance. Sample k corresponds to stance fraction
    k/999.
    """

    f_v: np.ndarray
    f_ap: np.ndarray
    f_ml: np.ndarray
    cop_ap: np.ndarray
    cop_ml: np.ndarray
    stance_time: float
    initial_contact_time: float
    toe_off_time: float
    foot: str

    def __post_init__(self):
        for name in ("f_v", "f_ap", "f_ml", "cop_ap", "cop_ml"):
            sig = np.asarray(getattr(self, name), dtype=float)
            if sig.shape != (N_POINTS,):
                raise ValueError(f"{name} must have exactly {N_POINTS} samples")
            setattr(self, name, sig)
        if self.stance_time <= 0:
            raise ValueError("stance_time must be positive")
        if np.any(self.f_v < -1e-12):
            raise ValueError("f_v must be non-negative after thresholding")

    @property
    def signals(self):
        return {
            "f_v": self.f_v,
            "f_ap": self.f_ap,
            "f_ml": self.f_ml,
            "cop_ap": self.cop_ap,
            "cop_ml": self.cop_ml,
        }


@dataclass(frozen=True)
class ContactGeometry:
    """World-frame COP anchors and timing of one foot's stance (for TDPs)."""

    foot: str
    ic_time: float
    to_time: float
    ic_cop_ap: float
    ic_cop_ml: float
    to_cop_ap: float
    to_cop_ml: float
    mean_cop_ap: float
    mean_cop_ml: float

    @property
    def stance_time(self):
        return self.to_time - self.ic_time


@dataclass
class PreprocessedTrial:
    """Both feet of one trial: waveforms plus contact geometry."""

    trial_id: str
    waveforms: tuple  # (plate 1, plate 2) StanceWaveforms
    contacts: tuple  # (plate 1, plate 2) ContactGeometry


@dataclass(frozen=True)
class PreprocessConfig:
    filter_spec: FilterSpec = field(default_factory=FilterSpec)
    step_threshold_n: float = 10.0
    cop_threshold_n: float = 30.0
    min_stance_samples: int = 50
    # AP/ML offset of each plate's COP coordinates into the shared walkway frame
    plate_offsets: tuple = ((0.0, 0.0), (0.0, 0.0))


def butterworth_lowpass(signal, spec, sample_rate):
    """Zero-phase (forward-backward) Butterworth low-pass along axis 0.

    Even-reflection padding of length 3*(order+1) avoids startup transients
    inside short stances. The effective amplitude response is |H(f)|^2, i.e.
    -6 dB at the cutoff.
    """
    if spec.cutoff_hz >= sample_rate / 2.0:
        raise CutoffAboveNyquist(
            f"cutoff {spec.cutoff_hz} Hz >= Nyquist {sample_rate / 2.0} Hz"
        )
    signal = np.asarray(signal, dtype=float)
    padlen = 3 * (spec.order + 1)
    if signal.shape[0] < 3 * spec.order:
        raise ValueError("signal too short for the requested filter order")
    b, a = butter(spec.order, spec.cutoff_hz / (sample_rate / 2.0), btype="low")
    return filtfilt(b, a, signal, axis=0, padtype="even", padlen=padlen)


def detect_stance(f_v, threshold):
    """(initial contact, toe off) sample indices of the longest supra-threshold run.

    Indices are inclusive: ``f_v[ic:to+1] >= threshold``. Multiple runs
    trigger a MultipleStancesWarning and the longest one (earliest on ties)
    is kept.
    """
    f_v = np.asarray(f_v, dtype=float)
    mask = f_v >= threshold
    if not mask.any():
        raise NoStanceDetected(
            f"vertical force never reaches the {threshold} N step threshold"
        )
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, stops = edges[::2], edges[1::2]  # stop is exclusive
    if len(starts) > 1:
        warnings.warn(
            f"{len(starts)} supra-threshold runs found; using the longest",
            MultipleStancesWarning,
            stacklevel=2,
        )
    lengths = stops - starts
    best = int(np.argmax(lengths))
    return int(starts[best]), int(stops[best] - 1)


def _resample_plate(plate, sample_rate, subject, session, cfg, plate_index):
    """One plate's raw (n,5) block -> (StanceWaveforms, ContactGeometry)."""
    forces = butterworth_lowpass(plate[:, :3], cfg.filter_spec, sample_rate)
    f_ap_raw, f_ml_raw, f_v_raw = forces[:, 0], forces[:, 1], forces[:, 2]
    try:
        ic, to = detect_stance(f_v_raw, cfg.step_threshold_n)
    except NoStanceDetected as exc:
        raise NoStanceDetected(f"plate {plate_index + 1}: {exc}") from None
    if to - ic + 1 < cfg.min_stance_samples:
        raise DegenerateStance(
            f"plate {plate_index + 1}: stance of {to - ic + 1} samples "
            f"(< {cfg.min_stance_samples})"
        )
    t = np.arange(plate.shape[0]) / sample_rate
    ic_t, to_t = t[ic], t[to]
    stance_time = to_t - ic_t
    grid = ic_t + (to_t - ic_t) * np.arange(N_POINTS) / (N_POINTS - 1)

    bw = subject.body_mass * GRAVITY
    f_v = np.interp(grid, t, f_v_raw) / bw
    f_ap = np.interp(grid, t, f_ap_raw) / bw
    f_ml = np.interp(grid, t, f_ml_raw) / bw
    f_v = np.maximum(f_v, 0.0)

    # COP is only defined where the (filtered) vertical force is credible.
    valid = np.flatnonzero(f_v_raw[ic : to + 1] >= cfg.cop_threshold_n) + ic
    if valid.size == 0:
        raise NoStanceDetected(
            f"plate {plate_index + 1}: vertical force never reaches the "
            f"{cfg.cop_threshold_n} N COP threshold"
        )
    v0, v1 = int(valid[0]), int(valid[-1])
    off_ap, off_ml = cfg.plate_offsets[plate_index]
    cop_ap_world = plate[v0 : v1 + 1, 3] + off_ap
    cop_ml_world = plate[v0 : v1 + 1, 4] + off_ml
    t_valid = t[v0 : v1 + 1]
    # np.interp clamps outside [t_v0, t_v1]: stance edges hold the nearest valid COP
    cop_ap_s = np.interp(grid, t_valid, cop_ap_world)
    cop_ml_s = np.interp(grid, t_valid, cop_ml_world)

    geometry = ContactGeometry(
        foot=PLATE_FEET[plate_index],
        ic_time=ic_t,
        to_time=to_t,
        ic_cop_ap=float(cop_ap_s[0]),
        ic_cop_ml=float(cop_ml_s[0]),
        to_cop_ap=float(cop_ap_s[-1]),
        to_cop_ml=float(cop_ml_s[-1]),
        mean_cop_ap=float(cop_ap_s.mean()),
        mean_cop_ml=float(cop_ml_s.mean()),
    )
    fl = session.foot_length
    wf = StanceWaveforms(
        f_v=f_v,
        f_ap=f_ap,
        f_ml=f_ml,
        cop_ap=(cop_ap_s - cop_ap_s[0]) / fl,
        cop_ml=(cop_ml_s - cop_ml_s[0]) / fl,
        stance_time=stance_time,
        initial_contact_time=ic_t,
        toe_off_time=to_t,
        foot=PLATE_FEET[plate_index],
    )
    return wf, geometry


def preprocess_trial(trial, subject, session, cfg=None):
    """Full preprocessing of one trial (both plates)."""
    cfg = cfg or PreprocessConfig()
    plates = (trial.plate1, trial.plate2)
    out = [
        _resample_plate(plate, trial.sample_rate, subject, session, cfg, i)
        for i, plate in enumerate(plates)
    ]
    return PreprocessedTrial(
        trial_id=trial.id,
        waveforms=(out[0][0], out[1][0]),
        contacts=(out[0][1], out[1][1]),
    )


def normalize_trial(trial, subject, session, spec=None):
    """The two feet's StanceWaveforms for one trial (plate 1 first)."""
    cfg = PreprocessConfig(filter_spec=spec) if spec is not None else None
    return preprocess_trial(trial, subject, session, cfg).waveforms
