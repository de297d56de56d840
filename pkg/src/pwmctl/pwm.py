"""Waveform <-> pulse-train conversion, pulse shaping, and spectral checks.

A pulse train replaces a continuous control u_k(t) by M fixed-amplitude
pulses, one per interval of duration tau. The signed width of pulse m is
the interval integral of u_k divided by the amplitude xi_k, so the train
carries the same short-time integral as the waveform. Below the threshold
frequency min(2*pi/tau, M*omega_min) the two signals share their Fourier
components; the error lives above it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import erf

from .errors import (
    MalformedInput,
    ResolutionTooLow,
    Unreachable,
    WidthOverflow,
    ZeroWaveform,
)

__all__ = [
    "SineWaveform",
    "SampledWaveform",
    "PulseTrain",
    "SwitchEvent",
    "SpectrumReport",
    "amplitude_from_waveform",
    "widths_from_waveform",
    "train_from_waveforms",
    "switching_instances",
    "staircase_from_train",
    "two_level_durations",
    "stretch_train",
    "render_samples",
    "train_callable",
    "spectrum_compare",
    "train_to_csv",
    "train_from_csv",
    "spectrum_to_csv",
    "spectrum_from_csv",
    "waveform_to_json",
    "waveform_from_json",
]

# Gaussian pulses decay as exp(-pi t^2 / w^2); the equivalent standard
# deviation is w / sqrt(2 pi) and tails are cut at 5 of those (area error
# erfc(5/sqrt(2))/2 < 1e-10 of the pulse area).
_GAUSS_SIGMA_EQUIV = 1.0 / math.sqrt(2.0 * math.pi)
_GAUSS_CUTOFF_SIGMAS = 5.0


@dataclass(frozen=True)
class SineWaveform:
    """Analytic sinusoid  amplitude * sin(omega t + phase),  omega in rad/ns."""

    amplitude: float
    omega: float
    phase: float = 0.0
    band: tuple[float, float] | None = None

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        band = self.band if self.band is not None else (self.omega, self.omega)
        if not (0 < band[0] <= band[1]):
            raise ValueError("band must satisfy 0 < omega_min <= omega_max")
        object.__setattr__(self, "band", (float(band[0]), float(band[1])))

    def value(self, t):
        return self.amplitude * np.sin(self.omega * np.asarray(t, dtype=float) + self.phase)

    def integral(self, t0: float, t1: float) -> float:
        a, w, p = self.amplitude, self.omega, self.phase
        return a * (math.cos(w * t0 + p) - math.cos(w * t1 + p)) / w

    def max_abs(self, t_final: float) -> float:
        """Exact max of |u| on [0, t_final]: endpoints plus interior extrema."""
        w, p = self.omega, self.phase
        candidates = [0.0, t_final]
        n_lo = math.ceil((w * 0.0 + p - math.pi / 2) / math.pi)
        t_star = (math.pi / 2 + n_lo * math.pi - p) / w
        while t_star <= t_final:
            if t_star >= 0.0:
                candidates.append(t_star)
            n_lo += 1
            t_star = (math.pi / 2 + n_lo * math.pi - p) / w
        return max(abs(float(self.value(t))) for t in candidates)


@dataclass(frozen=True)
class SampledWaveform:
    """Real signal given on a uniform grid; treated as its linear interpolant."""

    values: np.ndarray
    dt: float
    band: tuple[float, float]
    t0: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("need at least 2 samples")
        if self.dt <= 0:
            raise ValueError("grid step must be positive")
        if not (0 < self.band[0] <= self.band[1]):
            raise ValueError("band must satisfy 0 < omega_min <= omega_max")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))

    @property
    def t_end(self) -> float:
        return self.t0 + (self.values.size - 1) * self.dt

    def value(self, t):
        t = np.asarray(t, dtype=float)
        grid = self.t0 + self.dt * np.arange(self.values.size)
        return np.interp(t, grid, self.values)

    def _antiderivative(self, t: float) -> float:
        # Exact integral of the linear interpolant from t0 to t.
        if t < self.t0 - 1e-9 * self.dt or t > self.t_end + 1e-9 * self.dt:
            raise ValueError(f"time {t} outside sampled grid [{self.t0}, {self.t_end}]")
        x = min(max((t - self.t0) / self.dt, 0.0), self.values.size - 1.0)
        i = min(int(x), self.values.size - 2)
        s = x - i
        v = self.values
        cum = 0.5 * self.dt * (v[:i] + v[1 : i + 1]).sum() if i else 0.0
        vt = v[i] + (v[i + 1] - v[i]) * s
        return cum + 0.5 * s * self.dt * (v[i] + vt)

    def integral(self, t0: float, t1: float) -> float:
        return self._antiderivative(t1) - self._antiderivative(t0)

    def max_abs(self, t_final: float) -> float:
        grid = self.t0 + self.dt * np.arange(self.values.size)
        inside = grid <= t_final + 1e-9 * self.dt
        if not inside.any():
            raise ZeroWaveform("no samples inside the window")
        return float(np.max(np.abs(self.values[inside])))


Waveform = SineWaveform | SampledWaveform


@dataclass(frozen=True)
class PulseTrain:
    """M intervals of duration tau with a K x M matrix of signed widths (ns).

    three_level: each pulse is +/-xi_k for |width| ns, centered in its
    interval, zero otherwise. two_level: the control sits at xi_k for
    width ns (centered) and at xi_low_k for the remainder of the interval.
    """

    tau: float
    widths: np.ndarray
    xi: np.ndarray
    shape: str = "rectangular"
    level_scheme: str = "three_level"
    xi_low: np.ndarray | None = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        w = np.atleast_2d(np.asarray(self.widths, dtype=float)).copy()
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float)).copy()
        if xi.shape != (w.shape[0],):
            raise ValueError(f"xi has shape {xi.shape}, expected ({w.shape[0]},)")
        if np.any(xi <= 0):
            raise ValueError("pulse amplitudes must be positive")
        if self.shape not in ("rectangular", "gaussian"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.level_scheme not in ("three_level", "two_level"):
            raise ValueError(f"unknown level scheme {self.level_scheme!r}")
        limit = self.tau * (1 + 1e-9)
        if self.level_scheme == "three_level":
            if np.any(np.abs(w) > limit):
                raise WidthOverflow("|width| exceeds tau")
            if self.xi_low is not None:
                raise ValueError("xi_low only applies to the two_level scheme")
        else:
            if np.any(w < -1e-9 * self.tau) or np.any(w > limit):
                raise WidthOverflow("two-level high durations must lie in [0, tau]")
            if self.xi_low is None:
                raise ValueError("two_level scheme requires xi_low")
            lo = np.atleast_1d(np.asarray(self.xi_low, dtype=float)).copy()
            if lo.shape != xi.shape or np.any(lo >= xi):
                raise ValueError("xi_low must match xi in length and satisfy xi_low < xi")
            lo.setflags(write=False)
            object.__setattr__(self, "xi_low", lo)
        np.clip(w, -self.tau, self.tau, out=w)
        w.setflags(write=False)
        xi.setflags(write=False)
        object.__setattr__(self, "widths", w)
        object.__setattr__(self, "xi", xi)

    @property
    def num_controls(self) -> int:
        return self.widths.shape[0]

    @property
    def num_intervals(self) -> int:
        return self.widths.shape[1]

    @property
    def total_time(self) -> float:
        return self.num_intervals * self.tau


class SwitchEvent(NamedTuple):
    on: float
    off: float
    sign: int


@dataclass(frozen=True)
class SpectrumReport:
    """DFT magnitudes of a waveform and its train on a shared frequency grid."""

    frequencies: np.ndarray
    magnitudes_waveform: np.ndarray
    magnitudes_train: np.ndarray
    threshold: float
    max_relative_deviation_below_threshold: float


def amplitude_from_waveform(w: Waveform, t_final: float) -> float:
    """max_t |u(t)| over [0, t_final]; the default pulse amplitude xi.

    Exact for analytic sinusoids, grid max for sampled data. Raises
    ZeroWaveform when the maximum is zero.
    """
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    peak = w.max_abs(t_final)
    if peak == 0.0:
        raise ZeroWaveform("waveform is identically zero on the window")
    return peak


def widths_from_waveform(w: Waveform, tau: float, num_intervals: int, xi: float) -> np.ndarray:
    """Signed pulse widths: interval integrals of u divided by xi.

    |width| <= tau is guaranteed whenever xi >= max|u|; WidthOverflow
    signals an amplitude chosen too small.
    """
    if xi <= 0:
        raise ValueError("xi must be positive")
    if tau <= 0:
        raise ValueError("tau must be positive")
    widths = np.empty(num_intervals)
    for m in range(num_intervals):
        widths[m] = w.integral(m * tau, (m + 1) * tau) / xi
    over = np.abs(widths) - tau
    if np.any(over > 1e-9 * tau):
        raise WidthOverflow(
            f"max |width| = {np.max(np.abs(widths)):.6g} exceeds tau = {tau:.6g}"
        )
    return np.clip(widths, -tau, tau)


def train_from_waveforms(
    waveforms: Sequence[Waveform],
    tau: float,
    num_intervals: int,
    xi: Sequence[float] | None = None,
    shape: str = "rectangular",
) -> PulseTrain:
    """Encode one waveform per control into a single train (xi=None: max|u|)."""
    t_final = num_intervals * tau
    if xi is None:
        xi = [amplitude_from_waveform(w, t_final) for w in waveforms]
    xi = np.asarray(xi, dtype=float)
    widths = np.stack(
        [widths_from_waveform(w, tau, num_intervals, x) for w, x in zip(waveforms, xi)]
    )
    return PulseTrain(tau=tau, widths=widths, xi=xi, shape=shape)


def switching_instances(train: PulseTrain, k: int) -> list[SwitchEvent]:
    """(on, off, sign) per pulse; pulse m is centered at (m - 1/2) tau.

    Zero-width pulses are omitted.
    """
    events = []
    tau = train.tau
    for m, width in enumerate(train.widths[k], start=1):
        if width == 0.0:
            continue
        center = (m - 0.5) * tau
        half = 0.5 * abs(width)
        events.append(SwitchEvent(center - half, center + half, int(np.sign(width))))
    return events


def staircase_from_train(train: PulseTrain) -> np.ndarray:
    """Per-interval constant values with the same integral: xi * width / tau."""
    if train.level_scheme == "two_level":
        high = train.xi[:, None] * train.widths
        low = train.xi_low[:, None] * (train.tau - train.widths)
        return (high + low) / train.tau
    return train.xi[:, None] * train.widths / train.tau


def two_level_durations(
    target_integral: float, xi_high: float, xi_low: float, tau: float
) -> tuple[float, float]:
    """Durations (t_high, t_low) with t_high + t_low = tau and
    xi_high*t_high + xi_low*t_low = target_integral."""
    if xi_high <= xi_low:
        raise ValueError("xi_high must exceed xi_low")
    if tau <= 0:
        raise ValueError("tau must be positive")
    lo, hi = xi_low * tau, xi_high * tau
    slack = 1e-12 * max(abs(lo), abs(hi), 1.0)
    if target_integral < lo - slack or target_integral > hi + slack:
        raise Unreachable(
            f"target integral {target_integral:.6g} outside [{lo:.6g}, {hi:.6g}]"
        )
    t_high = (target_integral - lo) / (xi_high - xi_low)
    t_high = min(max(t_high, 0.0), tau)
    return t_high, tau - t_high


def stretch_train(train: PulseTrain, kappa: float) -> PulseTrain:
    """Magnitude stretch: xi -> kappa*xi, widths -> widths/kappa.

    Per-interval integrals are unchanged; kappa -> infinity is the
    hard-pulse limit.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if train.level_scheme != "three_level":
        raise ValueError("stretching is defined for three-level trains")
    return PulseTrain(
        tau=train.tau,
        widths=train.widths / kappa,
        xi=train.xi * kappa,
        shape=train.shape,
    )


def _gauss_bin_areas(edges: np.ndarray, center: float, width: float) -> np.ndarray:
    """Integrals of the truncated unit-peak Gaussian exp(-pi (t-c)^2 / w^2)
    over consecutive bins."""
    cutoff = _GAUSS_CUTOFF_SIGMAS * _GAUSS_SIGMA_EQUIV * abs(width)
    lo = np.clip(edges[:-1], center - cutoff, center + cutoff)
    hi = np.clip(edges[1:], center - cutoff, center + cutoff)
    scale = math.sqrt(math.pi) / abs(width)
    return 0.5 * abs(width) * (erf(scale * (hi - center)) - erf(scale * (lo - center)))


def render_samples(
    train: PulseTrain,
    k: int,
    sample_rate: float,
    periodic: bool = False,
) -> tuple[np.ndarray, float]:
    """Bin-averaged time-domain samples of control k over [0, M*tau].

    Sample i holds the mean of s_k(t) over [i*dt, (i+1)*dt), which keeps
    every per-bin (and hence per-interval) integral exact for rectangular
    pulses and exact up to tail truncation for Gaussians. With
    periodic=True, Gaussian tails wrap around the window instead of being
    clipped. Returns (values, dt).
    """
    if sample_rate * train.tau < 8 - 1e-9:
        raise ResolutionTooLow(
            f"sample_rate*tau = {sample_rate * train.tau:.3g} < 8: pulses unresolved"
        )
    per = math.ceil(sample_rate * train.tau - 1e-9)
    dt = train.tau / per
    n = per * train.num_intervals
    t_total = train.total_time
    edges = dt * np.arange(n + 1)
    out = np.zeros(n)
    tau, xi = train.tau, float(train.xi[k])
    xi_low = float(train.xi_low[k]) if train.level_scheme == "two_level" else 0.0

    if train.level_scheme == "two_level":
        if train.shape != "rectangular":
            raise ValueError("two-level trains render as rectangular only")
        out += xi_low
        amp = xi - xi_low
        for m, t_high in enumerate(train.widths[k], start=1):
            if t_high == 0.0:
                continue
            center = (m - 0.5) * tau
            on, off = center - 0.5 * t_high, center + 0.5 * t_high
            overlap = np.clip(edges[1:], on, off) - np.clip(edges[:-1], on, off)
            out += amp * overlap / dt
        return out, dt

    for m, width in enumerate(train.widths[k], start=1):
        if width == 0.0:
            continue
        center = (m - 0.5) * tau
        amp = xi * np.sign(width)
        if train.shape == "rectangular":
            on, off = center - 0.5 * abs(width), center + 0.5 * abs(width)
            overlap = np.clip(edges[1:], on, off) - np.clip(edges[:-1], on, off)
            out += amp * overlap / dt
        else:
            cutoff = _GAUSS_CUTOFF_SIGMAS * _GAUSS_SIGMA_EQUIV * abs(width)
            wraps = math.ceil(cutoff / t_total) if periodic else 0
            for j in range(-wraps, wraps + 1):
                out += amp * _gauss_bin_areas(edges, center + j * t_total, width) / dt
    return out, dt


def train_callable(train: PulseTrain, k: int) -> Callable[[np.ndarray], np.ndarray]:
    """Pointwise s_k(t) as a vectorized callable (for reference propagation)."""
    tau, xi = train.tau, float(train.xi[k])
    widths = train.widths[k]
    two_level = train.level_scheme == "two_level"
    xi_low = float(train.xi_low[k]) if two_level else 0.0
    gaussian = train.shape == "gaussian"

    def signal(t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, xi_low) if two_level else np.zeros(t.shape)
        for m, width in enumerate(widths, start=1):
            if width == 0.0:
                continue
            center = (m - 0.5) * tau
            if gaussian:
                cutoff = _GAUSS_CUTOFF_SIGMAS * _GAUSS_SIGMA_EQUIV * abs(width)
                mask = np.abs(t - center) <= cutoff
                out[mask] += xi * np.sign(width) * np.exp(
                    -math.pi * (t[mask] - center) ** 2 / width**2
                )
            else:
                half = 0.5 * abs(width)
                mask = (t >= center - half) & (t < center + half)
                if two_level:
                    out[mask] = xi
                else:
                    out[mask] += xi * np.sign(width)
        return out

    return signal


def spectrum_compare(
    w: Waveform,
    train: PulseTrain,
    k: int = 0,
    t_final: float | None = None,
    samples_per_interval: int = 32,
) -> SpectrumReport:
    """DFT-compare waveform and train over [0, M*tau].

    Both signals are bin-averaged on the same grid (>= 32 samples per
    interval), so they share any sampling attenuation. The threshold is
    min(2*pi/tau, M*omega_min); the reported deviation is the max of
    |mag_train - mag_waveform| over bins below 0.8 * threshold, relative
    to the waveform's peak amplitude max|u| (the signal's own scale, so
    bins where the waveform is silent still count).
    """
    if samples_per_interval < 32:
        raise ValueError("need at least 32 samples per interval")
    num_intervals = train.num_intervals
    if t_final is not None and abs(t_final - train.total_time) > 1e-9 * train.tau:
        raise ValueError("t_final must equal M*tau")
    t_total = train.total_time
    values_t, dt = render_samples(train, k, samples_per_interval / train.tau, periodic=True)
    n = values_t.size
    edges = dt * np.arange(n + 1)
    values_w = np.array(
        [w.integral(edges[i], edges[i + 1]) / dt for i in range(n)]
    )

    mags_w = np.abs(np.fft.rfft(values_w)) / n
    mags_t = np.abs(np.fft.rfft(values_t)) / n
    freqs = 2.0 * math.pi * np.arange(mags_w.size) / t_total

    omega_min = w.band[0]
    threshold = min(2.0 * math.pi / train.tau, num_intervals * omega_min)
    mask = freqs < 0.8 * threshold
    ref = w.max_abs(t_total)
    if ref > 0.0 and mask.any():
        deviation = float(np.max(np.abs(mags_t[mask] - mags_w[mask])) / ref)
    else:
        deviation = float(np.max(mags_t[mask])) if mask.any() else 0.0
    return SpectrumReport(
        frequencies=freqs,
        magnitudes_waveform=mags_w,
        magnitudes_train=mags_t,
        threshold=threshold,
        max_relative_deviation_below_threshold=deviation,
    )


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def train_to_csv(train: PulseTrain, path) -> None:
    """Train CSV: metadata comment, then one `k,m,width_ns,xi_rad_per_ns,sign`
    row per (k, m), both indices 1-based. Floats use repr for exact round trips."""
    lines = [
        f"# tau_ns={train.tau!r} shape={train.shape} level_scheme={train.level_scheme}"
    ]
    if train.xi_low is not None:
        lines[0] += " xi_low=" + ",".join(repr(float(x)) for x in train.xi_low)
    lines.append("k,m,width_ns,xi_rad_per_ns,sign")
    for k in range(train.num_controls):
        xi = float(train.xi[k])
        for m in range(train.num_intervals):
            width = float(train.widths[k, m])
            lines.append(f"{k + 1},{m + 1},{width!r},{xi!r},{int(np.sign(width))}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def train_from_csv(path) -> PulseTrain:
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        key, val = token.split("=", 1)
                        meta[key] = val
                continue
            if line.startswith("k,"):
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise MalformedInput(f"bad train CSV row: {line!r}")
            rows.append((int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2]), float(parts[3])))
    if "tau_ns" not in meta:
        raise MalformedInput("train CSV missing '# tau_ns=...' metadata line")
    if not rows:
        raise MalformedInput("train CSV contains no pulses")
    num_controls = max(r[0] for r in rows) + 1
    num_intervals = max(r[1] for r in rows) + 1
    widths = np.zeros((num_controls, num_intervals))
    xi = np.zeros(num_controls)
    seen = np.zeros((num_controls, num_intervals), dtype=bool)
    for k, m, width, amp in rows:
        widths[k, m] = width
        xi[k] = amp
        seen[k, m] = True
    if not seen.all():
        raise MalformedInput("train CSV is missing (k,m) rows")
    xi_low = None
    if "xi_low" in meta:
        xi_low = np.array([float(x) for x in meta["xi_low"].split(",")])
    return PulseTrain(
        tau=float(meta["tau_ns"]),
        widths=widths,
        xi=xi,
        shape=meta.get("shape", "rectangular"),
        level_scheme=meta.get("level_scheme", "three_level"),
        xi_low=xi_low,
    )


def spectrum_to_csv(report: SpectrumReport, path) -> None:
    lines = [
        f"# threshold_rad_per_ns={report.threshold!r} "
        f"max_rel_dev_below_threshold={report.max_relative_deviation_below_threshold!r}",
        "freq_rad_per_ns,mag_waveform,mag_train",
    ]
    for f, mw, mt in zip(
        report.frequencies, report.magnitudes_waveform, report.magnitudes_train
    ):
        lines.append(f"{float(f)!r},{float(mw)!r},{float(mt)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def spectrum_from_csv(path) -> SpectrumReport:
    meta = {}
    freqs, mw, mt = [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        key, val = token.split("=", 1)
                        meta[key] = val
                continue
            if line.startswith("freq"):
                continue
            parts = line.split(",")
            freqs.append(float(parts[0]))
            mw.append(float(parts[1]))
            mt.append(float(parts[2]))
    return SpectrumReport(
        frequencies=np.array(freqs),
        magnitudes_waveform=np.array(mw),
        magnitudes_train=np.array(mt),
        threshold=float(meta["threshold_rad_per_ns"]),
        max_relative_deviation_below_threshold=float(meta["max_rel_dev_below_threshold"]),
    )


def waveform_to_json(w: Waveform) -> dict:
    if isinstance(w, SineWaveform):
        return {
            "kind": "sinusoid",
            "amplitude": w.amplitude,
            "omega_rad_per_ns": w.omega,
            "phase": w.phase,
            "band_rad_per_ns": list(w.band),
        }
    return {
        "kind": "sampled",
        "values": w.values.tolist(),
        "dt_ns": w.dt,
        "t0_ns": w.t0,
        "band_rad_per_ns": list(w.band),
    }


def waveform_from_json(obj: dict) -> Waveform:
    try:
        kind = obj["kind"]
        if kind == "sinusoid":
            band = obj.get("band_rad_per_ns")
            return SineWaveform(
                amplitude=float(obj["amplitude"]),
                omega=float(obj["omega_rad_per_ns"]),
                phase=float(obj.get("phase", 0.0)),
                band=tuple(band) if band else None,
            )
        if kind == "sampled":
            return SampledWaveform(
                values=np.asarray(obj["values"], dtype=float),
                dt=float(obj["dt_ns"]),
                band=tuple(obj["band_rad_per_ns"]),
                t0=float(obj.get("t0_ns", 0.0)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"bad waveform JSON: {exc}") from exc
    raise MalformedInput(f"unknown waveform kind {obj.get('kind')!r}")
