"""Coherent-window harmonic analysis and THD reporting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_MAX_ORDER = 25
EN50160_VOLTAGE_THD_LIMIT = 8.0


class UndefinedTHD(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HarmonicSpectrum:
    """Per-harmonic content of a coherently sampled window.

    ``bins`` holds the complex sine-referenced amplitude ``a * exp(j theta)``
    of every harmonic order, including 0 (the mean).
    """

    fundamental_freq: float
    amplitudes: dict
    phases: dict
    window: tuple
    bins: np.ndarray = field(repr=False)
    dc: float = 0.0

    @property
    def max_order(self) -> int:
        return max(self.amplitudes)


def samples_per_period(f: float, tau: float) -> int:
    spp = 1.0 / (f * tau)
    n = round(spp)
    if n < 1 or abs(spp - n) > 1e-9 * spp:
        raise ValueError(f"1/(f*tau) = {spp!r} is not an integer number of samples")
    return n


def harmonic_spectrum(signal, f: float, tau: float, max_order: int = DEFAULT_MAX_ORDER,
                      start: int = 0) -> HarmonicSpectrum:
    """Amplitude and phase of orders ``1 .. max_order`` over the whole window.

    The window must span an integer number ``q`` of fundamental periods; order
    ``n`` then lands exactly on DFT bin ``n q``, so no window function is used.
    ``start`` is only recorded in ``window`` for bookkeeping.
    """
    s = np.asarray(signal, dtype=float).ravel()
    N = s.size
    spp = samples_per_period(f, tau)
    if N == 0 or N % spp:
        raise ValueError(f"window of {N} samples is not a whole number of {spp}-sample periods")
    q = N // spp
    if not max_order * f < 1.0 / (2.0 * tau):
        raise ValueError(f"order {max_order} at {f} Hz exceeds the Nyquist frequency")
    X = np.fft.rfft(s)
    orders = np.arange(max_order + 1)
    c = 2.0 * X[orders * q] / N
    # a sin(x + th) -> rfft bin (N/2) a exp(j th) / j, so a exp(j th) = j c
    bins = 1j * c
    bins[0] = X[0].real / N
    amplitudes = {int(n): float(abs(bins[n])) for n in orders[1:]}
    phases = {int(n): float(np.angle(bins[n])) for n in orders[1:]}
    return HarmonicSpectrum(fundamental_freq=f, amplitudes=amplitudes, phases=phases,
                            window=(start, N), bins=bins, dc=float(bins[0].real))


def thd(spectrum: HarmonicSpectrum, max_order: int | None = None) -> float:
    """Total harmonic distortion in percent relative to the fundamental."""
    top = spectrum.max_order if max_order is None else max_order
    if top > spectrum.max_order:
        raise ValueError(f"spectrum only holds orders up to {spectrum.max_order}")
    a1 = spectrum.amplitudes[1]
    # a fundamental at roundoff level of the largest component counts as zero
    scale = max(spectrum.amplitudes.values())
    if not a1 > 1e-12 * scale or scale == 0:
        raise UndefinedTHD("fundamental amplitude is zero; THD undefined")
    rest = sum(spectrum.amplitudes[n] ** 2 for n in range(2, top + 1))
    return 100.0 * math.sqrt(rest) / a1


def amplitude_frequency_check(signal, f: float, tau: float,
                              max_order: int = DEFAULT_MAX_ORDER) -> tuple[float, float]:
    """Return ``(fundamental amplitude, dominant frequency in Hz)``.

    The mean is excluded when picking the dominant bin.
    """
    sp = harmonic_spectrum(signal, f, tau, max_order)
    dominant = max(sp.amplitudes, key=sp.amplitudes.get)
    return sp.amplitudes[1], dominant * f


@dataclass
class SignalThd:
    name: str
    thd_percent: float
    amplitudes: dict
    limit: float | None = None

    @property
    def passed(self) -> bool:
        return self.limit is None or self.thd_percent <= self.limit


@dataclass
class ThdReport:
    signals: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.signals)

    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_csv(self) -> str:
        orders = max((max(s.amplitudes) for s in self.signals), default=0)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["signal", "thd_percent"] + [f"a{n}" for n in range(1, orders + 1)])
        for s in self.signals:
            w.writerow([s.name, repr(s.thd_percent)]
                       + [repr(s.amplitudes.get(n, 0.0)) for n in range(1, orders + 1)])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"{'signal':<12}{'THD %':>10}{'a1':>12}{'limit %':>10}  status"]
        for s in self.signals:
            lim = "-" if s.limit is None else f"{s.limit:.2f}"
            lines.append(f"{s.name:<12}{s.thd_percent:>10.3f}{s.amplitudes[1]:>12.5g}{lim:>10}  "
                         f"{'pass' if s.passed else 'FAIL'}")
        return "\n".join(lines)


def thd_report(signals: dict, f: float, tau: float, max_order: int = DEFAULT_MAX_ORDER,
               limits: dict | None = None) -> ThdReport:
    """Build a report for ``{name: samples}``; ``limits`` maps names to percent."""
    limits = limits or {}
    rep = ThdReport()
    for name, s in signals.items():
        sp = harmonic_spectrum(s, f, tau, max_order)
        rep.signals.append(SignalThd(name, thd(sp, max_order), dict(sp.amplitudes), limits.get(name)))
    return rep
