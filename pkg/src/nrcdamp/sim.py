"""Discrete-time simulation of the dual loop and chirp identification.

Controllers and plant are discretized by the bilinear (trapezoidal) map;
pure delays become integer sample counts. The closed-loop runner follows a
strictly causal ordering (controllers act on the previous measurement),
which removes the algebraic loop the biproper damping controller would
otherwise create.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .lti import RationalTF
from .plants import PlantSpec, build_plant


@dataclass(frozen=True)
class DiscreteSS:
    """Discrete state-space block with an input delay in whole samples."""

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    c_matrix: np.ndarray
    d_matrix: np.ndarray
    ts: float
    input_delay_samples: int = 0

    @property
    def order(self) -> int:
        return self.a_matrix.shape[0]


def _bilinear_poly(coeffs_s: np.ndarray, c: float, n_total: int) -> np.ndarray:
    """Map an ascending s-polynomial through s = c(z-1)/(z+1).

    Returns ascending z-coefficients of sum_i a_i c^i (z-1)^i (z+1)^(n-i).
    """
    zm1 = np.array([-1.0, 1.0])
    zp1 = np.array([1.0, 1.0])
    out = np.zeros(n_total + 1)
    for i, a in enumerate(coeffs_s):
        term = np.array([a * c**i])
        for _ in range(i):
            term = np.convolve(term, zm1)
        for _ in range(n_total - i):
            term = np.convolve(term, zp1)
        out[: term.size] += term
    return out


def discretize(
    tf: RationalTF, ts: float, prewarp_rad_s: float | None = None
) -> DiscreteSS:
    """Bilinear discretization of a proper (or biproper) RationalTF.

    The map is s = c(z-1)/(z+1) with c = 2/ts, or c = w0/tan(w0 ts/2) when
    a prewarp frequency is given; DC is preserved exactly either way. The
    pure delay rounds to input_delay_samples = round(delay_s/ts).
    """
    if ts <= 0.0:
        raise ValueError("ts must be > 0")
    if tf.num.degree > tf.den.degree:
        raise ValueError("improper transfer function cannot be discretized")
    if prewarp_rad_s is not None:
        if not (0.0 < prewarp_rad_s < math.pi / ts):
            raise ValueError("prewarp frequency must lie below Nyquist")
        c = prewarp_rad_s / math.tan(prewarp_rad_s * ts / 2.0)
    else:
        c = 2.0 / ts
    n_total = tf.den.degree
    num_z = _bilinear_poly(tf.num.coeffs, c, n_total)
    den_z = _bilinear_poly(tf.den.coeffs, c, n_total)
    # tf2ss wants descending coefficients
    a, b, cm, d = sps.tf2ss(num_z[::-1], den_z[::-1])
    return DiscreteSS(
        a_matrix=a,
        b_matrix=b,
        c_matrix=cm,
        d_matrix=d,
        ts=ts,
        input_delay_samples=int(round(tf.delay_s / ts)),
    )


def discrete_frf(block: DiscreteSS, omega) -> np.ndarray:
    """Frequency response of a discrete block on the unit circle."""
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    z = np.exp(1j * w * block.ts)
    a, b, c, d = block.a_matrix, block.b_matrix, block.c_matrix, block.d_matrix
    n = a.shape[0]
    out = np.empty(w.size, dtype=complex)
    for i, zi in enumerate(z):
        if n:
            out[i] = (c @ np.linalg.solve(zi * np.eye(n) - a, b) + d)[0, 0]
        else:
            out[i] = d[0, 0]
    out *= np.exp(-1j * w * block.ts * block.input_delay_samples)
    return out if np.ndim(omega) else out[0]


class _Runner:
    """Mutable per-block simulation state for the sample loop."""

    def __init__(self, block: DiscreteSS):
        self.a = block.a_matrix
        self.b = block.b_matrix[:, 0]
        self.c = block.c_matrix[0]
        self.d = block.d_matrix[0, 0]
        self.x = np.zeros(block.order)

    def step(self, u: float) -> float:
        y = float(self.c @ self.x + self.d * u)
        self.x = self.a @ self.x + self.b * u
        return y


@dataclass(frozen=True)
class SimTrace:
    """Sampled dual-loop record; y_meas = x_true + n and e = r - y_meas."""

    time_s: np.ndarray
    r: np.ndarray
    d: np.ndarray
    n: np.ndarray
    u: np.ndarray
    x_true: np.ndarray
    y_meas: np.ndarray
    e: np.ndarray


def simulate_dual_loop(
    plant_d: DiscreteSS,
    tracker_d: DiscreteSS,
    nrc_d: DiscreteSS,
    r,
    d,
    n,
    absorb_loop_lag: bool = True,
) -> SimTrace:
    """Run the dual loop sample by sample.

    Per sample: e = r - y[k-1]; u = tracker(e) - nrc(y[k-1]); the plant
    integrates u + d (after its input-delay buffer) and y = x_true + n.
    The causal ordering implies one sample of measurement lag; with
    ``absorb_loop_lag`` (default) that sample is counted against the
    plant's modeled delay buffer, so the simulated loop delay matches the
    continuous model whenever the plant carries at least one delay sample.
    """
    r = np.asarray(r, dtype=float)
    d = np.asarray(d, dtype=float)
    n = np.asarray(n, dtype=float)
    if not (r.shape == d.shape == n.shape) or r.ndim != 1:
        raise ValueError("r, d, n must be 1-D arrays of equal length")
    if not (plant_d.ts == tracker_d.ts == nrc_d.ts):
        raise ValueError("all blocks must share the same sampling time")
    ts = plant_d.ts
    nsamp = r.size

    plant = _Runner(plant_d)
    tracker = _Runner(tracker_d)
    damper = _Runner(nrc_d)

    n_delay = plant_d.input_delay_samples
    if absorb_loop_lag and n_delay >= 1:
        n_delay -= 1
    buf = np.zeros(n_delay) if n_delay else None

    u = np.empty(nsamp)
    x_true = np.empty(nsamp)
    y_meas = np.empty(nsamp)
    y_prev = 0.0
    for k in range(nsamp):
        e_k = r[k] - y_prev
        u_k = tracker.step(e_k) - damper.step(y_prev)
        v = u_k + d[k]
        if buf is not None:
            v, buf = buf[0], np.append(buf[1:], v)
        x_k = plant.step(v)
        y_prev = x_k + n[k]
        u[k] = u_k
        x_true[k] = x_k
        y_meas[k] = y_prev
    time_s = np.arange(nsamp) * ts
    return SimTrace(
        time_s=time_s, r=r, d=d, n=n, u=u, x_true=x_true, y_meas=y_meas, e=r - y_meas
    )


def trace_to_csv(trace: SimTrace, path) -> None:
    """Write a simulation trace as CSV."""
    cols = ("time_s", "r", "d", "n", "u", "x_true", "y_meas", "e")
    data = [getattr(trace, c) for c in cols]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in zip(*data):
            fh.write(",".join(f"{v:.12g}" for v in row) + "\n")


def make_reference(
    kind: str, amplitude: float, ts: float, duration_s: float, freq_hz: float = 0.0
) -> np.ndarray:
    """Deterministic reference signal: 'step' or 'sine'."""
    nsamp = int(round(duration_s / ts))
    t = np.arange(nsamp) * ts
    if kind == "step":
        return np.full(nsamp, amplitude)
    if kind == "sine":
        if freq_hz <= 0.0:
            raise ValueError("sine reference needs freq_hz > 0")
        return amplitude * np.sin(2.0 * np.pi * freq_hz * t)
    raise ValueError(f"unknown reference kind '{kind}'")


def make_uniform_noise(seed: int, amplitude: float, nsamples: int) -> np.ndarray:
    """Seeded uniform noise in [-amplitude, amplitude] for reproducible runs."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-amplitude, amplitude, nsamples)


def phase_compensate(y, phi_deg: float, f_hz: float, ts: float) -> np.ndarray:
    """Remove a known phase lag by shifting forward whole samples.

    The lag phi at frequency f corresponds to t_d = phi/(360 f); the signal
    is advanced by round(|t_d|/ts) samples and the tail truncated.
    """
    if f_hz <= 0.0 or ts <= 0.0:
        raise ValueError("f_hz and ts must be > 0")
    y = np.asarray(y, dtype=float)
    t_d = phi_deg / (f_hz * 360.0)
    n_d = int(round(abs(t_d) / ts))
    if n_d >= y.size:
        raise ValueError("compensation shift exceeds the signal length")
    return y[n_d:].copy()


def tracking_metrics(r, y) -> tuple[float, float]:
    """(max tracking error, rms tracking error) of y against r."""
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    if r.size == 0 or r.shape != y.shape:
        raise ValueError("r and y must be nonempty arrays of equal length")
    e = y - r
    return float(np.max(np.abs(e))), float(np.sqrt(np.mean(e * e)))


def sinusoid_phasor(x, f_hz: float, ts: float, skip_frac: float = 0.6) -> complex:
    """Steady-state complex amplitude of x at frequency f.

    Projects the tail of the record (after skip_frac of it) onto the
    quadrature pair at f over a whole number of cycles. Ratios of phasors
    extracted from two signals with the same arguments give the complex
    gain between them.
    """
    x = np.asarray(x, dtype=float)
    start = int(x.size * skip_frac)
    tail = x[start:]
    cycles = int(math.floor(tail.size * ts * f_hz))
    if cycles < 1:
        raise ValueError("record too short for one whole cycle after skipping")
    nuse = int(round(cycles / (f_hz * ts)))
    tail = tail[-nuse:]
    t = np.arange(tail.size) * ts
    ph = 2.0 * np.pi * f_hz * t
    return complex(2.0 * np.mean(tail * np.exp(-1j * ph)))


def sinusoid_amplitude(x, f_hz: float, ts: float, skip_frac: float = 0.6) -> float:
    """Steady-state amplitude of x at frequency f (see sinusoid_phasor)."""
    return abs(sinusoid_phasor(x, f_hz, ts, skip_frac))


def log_chirp(
    fs: float,
    duration_s: float = 10.0,
    f0: float = 10.0,
    f1: float = 5000.0,
    amplitude: float = 0.1,
    taper_frac: float = 0.05,
) -> np.ndarray:
    """Logarithmic chirp with raised-cosine edge tapers."""
    if not (0.0 < f0 < f1 < fs / 2.0):
        raise ValueError("need 0 < f0 < f1 < fs/2")
    nsamp = int(round(duration_s * fs))
    t = np.arange(nsamp) / fs
    u = amplitude * sps.chirp(t, f0=f0, t1=duration_s, f1=f1, method="logarithmic")
    return u * sps.windows.tukey(nsamp, alpha=2.0 * taper_frac)


def open_loop_response(
    plant: PlantSpec,
    fs: float,
    duration_s: float = 10.0,
    amplitude: float = 0.1,
    oversample: int = 8,
    f0: float = 10.0,
    f1: float = 5000.0,
):
    """Chirp-driven open-loop run of a plant, sampled at fs.

    The plant is integrated at ``oversample`` times the output rate (the
    excitation is evaluated directly at the fine rate, as a continuous
    drive would be), then input and output are decimated by sampling. This
    keeps discretization warping far below the identification tolerances.
    Returns (u, y) at fs.
    """
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    fs_fine = fs * oversample
    u_fine = log_chirp(fs_fine, duration_s, f0=f0, f1=f1, amplitude=amplitude)
    g = build_plant(plant)
    ts_fine = 1.0 / fs_fine
    block = discretize(g.without_delay(), ts_fine)
    num_z, den_z = sps.ss2tf(
        block.a_matrix, block.b_matrix, block.c_matrix, block.d_matrix
    )
    y_fine = sps.lfilter(num_z[0], den_z, u_fine)
    n_delay = int(round(g.delay_s / ts_fine))
    if n_delay:
        y_fine = np.concatenate([np.zeros(n_delay), y_fine[:-n_delay]])
    return u_fine[::oversample].copy(), y_fine[::oversample].copy()


@dataclass(frozen=True)
class FrfEstimate:
    """Spectral FRF estimate with coherence."""

    freq_hz: np.ndarray
    mag_db: np.ndarray
    phase_deg: np.ndarray
    coherence: np.ndarray


def chirp_identify(u, y, fs: float, segment_len: int) -> FrfEstimate:
    """H1 spectral FRF estimate S_uy/S_uu from broadband input-output data.

    Hann-tapered, half-overlapping segments are averaged; coherence comes
    from the same segmentation. The record must cover at least two
    segments, and the input must carry power.
    """
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    if u.shape != y.shape or u.ndim != 1:
        raise ValueError("u and y must be 1-D arrays of equal length")
    if u.size < 2 * segment_len:
        raise ValueError("need at least two segments of data")
    kw = dict(
        fs=fs,
        window="hann",
        nperseg=segment_len,
        noverlap=segment_len // 2,
        detrend=False,
    )
    f, s_uu = sps.welch(u, **kw)
    if np.max(s_uu) <= 0.0:
        raise ValueError("input signal has no power")
    _, s_uy = sps.csd(u, y, **kw)
    _, coh = sps.coherence(u, y, **kw)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(s_uu > 0.0, s_uy / s_uu, np.nan)
        mag = 20.0 * np.log10(np.abs(h))
    phase = np.degrees(np.unwrap(np.angle(h)))
    return FrfEstimate(freq_hz=f, mag_db=mag, phase_deg=phase, coherence=coh)


def frf_to_csv(est: FrfEstimate, path) -> None:
    """Write an FRF estimate as CSV."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("freq_hz,mag_db,phase_deg,coherence\n")
        for row in zip(est.freq_hz, est.mag_db, est.phase_deg, est.coherence):
            fh.write(",".join(f"{v:.12g}" for v in row) + "\n")
