"""Periodograms of observable time series and their alignment with energy gaps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .solver import EigenDecomposition
from .hamiltonians import SparseOperator, StateVector, check_same_space

MIN_LENGTH = 16
# relative height a local maximum must exceed to count as a peak
PEAK_THRESHOLD = 1e-3
_WINDOWS = ("rectangular", "hann")


class GridError(ValueError):
    """Time samples are not uniformly spaced or too few."""


@dataclass
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise GridError("times and values must be 1-D arrays of equal length")
        if len(self.times) < MIN_LENGTH:
            raise GridError(f"need at least {MIN_LENGTH} samples, got {len(self.times)}")
        steps = np.diff(self.times)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(1.0, abs(steps[0])):
            raise GridError("time grid must be uniform and increasing")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass
class PowerSpectrum:
    omega: np.ndarray
    power: np.ndarray
    label: str = ""

    @property
    def resolution(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def peaks(self, threshold: float = PEAK_THRESHOLD) -> np.ndarray:
        """Indices of strict local maxima above ``threshold * max(power)``.

        The zero-frequency bin is never a peak.
        """
        p = self.power
        top = p.max()
        if top <= 0:
            return np.array([], dtype=int)
        left = np.concatenate([[np.inf], p[:-1]])
        right = np.concatenate([p[1:], [-np.inf]])
        mask = (p > left) & (p >= right) & (p > threshold * top)
        mask[0] = False
        return np.nonzero(mask)[0]

    def dominant(self) -> float:
        """Frequency of the tallest nonzero-frequency peak (``nan`` if none)."""
        idx = self.peaks()
        if len(idx) == 0:
            return float("nan")
        return float(self.omega[idx[np.argmax(self.power[idx])]])


def power_spectrum(series: TimeSeries, window: str = "rectangular") -> PowerSpectrum:
    """One-sided periodogram over angular frequencies ``2 pi k / (n dt)``.

    The temporal mean is removed first. Normalisation makes the total power
    equal to ``n`` times the variance of the series for the rectangular
    window.
    """
    if window not in _WINDOWS:
        raise ValueError(f"window must be one of {_WINDOWS}")
    x = series.values - series.values.mean()
    n = len(x)
    if window == "hann":
        x = x * np.hanning(n)
    X = np.fft.rfft(x)
    power = np.abs(X) ** 2 / n
    # fold negative frequencies in; DC and Nyquist appear once
    power[1 : (n + 1) // 2] *= 2
    omega = 2 * np.pi * np.fft.rfftfreq(n, d=series.dt)
    return PowerSpectrum(omega, power, series.label)


@dataclass
class PeakMatch:
    gap: float
    peak: float | None
    bins: float | None

    @property
    def found(self) -> bool:
        return self.peak is not None


@dataclass
class PeakReport:
    matches: list = field(default_factory=list)
    resolution: float = 0.0

    @property
    def no_peak(self) -> bool:
        return all(not m.found for m in self.matches)

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "no_peak": self.no_peak,
            "matches": [{"gap": m.gap, "peak": m.peak, "bins": m.bins} for m in self.matches],
        }


def peak_match(spectrum: PowerSpectrum, gaps, threshold: float = PEAK_THRESHOLD) -> PeakReport:
    """Nearest spectral peak to each gap, with the distance in FFT bins."""
    gaps = np.atleast_1d(np.asarray(gaps, dtype=float))
    if len(gaps) == 0 or len(spectrum.omega) < 2:
        raise ValueError("need at least one gap and a non-trivial spectrum")
    res = spectrum.resolution
    peaks = spectrum.omega[spectrum.peaks(threshold)]
    report = PeakReport(resolution=res)
    for g in gaps:
        if len(peaks) == 0:
            report.matches.append(PeakMatch(float(g), None, None))
            continue
        k = int(np.argmin(np.abs(peaks - g)))
        report.matches.append(PeakMatch(float(g), float(peaks[k]), float(abs(peaks[k] - g) / res)))
    return report


@dataclass
class GapLine:
    partner: int
    omega: float
    amplitude: float


def observable_gaps(psi: StateVector, eig: EigenDecomposition, op: SparseOperator,
                    count: int = 3) -> list[GapLine]:
    """Frequencies ``|E_i - E_j|`` ranked by their weight in ``<O(t)>``.

    Relative to the eigenstate ``i`` carrying the largest overlap with
    ``psi``, partner ``j`` contributes the line ``2|c_i c_j O_ij|`` at
    ``|E_i - E_j|``. Partners are returned by decreasing line amplitude.
    """
    check_same_space(psi.space, eig.space)
    check_same_space(op.space, eig.space)
    c = eig.vectors.conj().T @ psi.amplitudes
    i = int(np.argmax(np.abs(c)))
    col = eig.vectors.conj().T @ (op.matrix @ eig.vectors[:, i])
    amp = 2 * np.abs(c[i] * c.conj() * col)
    amp[i] = 0.0
    order = np.argsort(-amp, kind="stable")[:count]
    return [GapLine(int(j), float(abs(eig.energies[i] - eig.energies[j])), float(amp[j]))
            for j in order]
