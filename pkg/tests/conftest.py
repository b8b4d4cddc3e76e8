import re

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per numbered acceptance criterion."""
    outcome = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            m = re.search(r"test_criterion_(\d+)", nodeid)
            if m:
                outcome[int(m.group(1))] = (status, nodeid.split("::")[-1])
    if not outcome:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for n in sorted(outcome):
        status, name = outcome[n]
        word = "PASS" if status == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {word}  {name}")


def tone(freq_hz: float, seconds: float, rate: int, amp: float = 0.6,
         phase: float = 0.0) -> np.ndarray:
    t = np.arange(int(round(seconds * rate))) / rate
    return amp * np.sin(2 * np.pi * freq_hz * t + phase)


def tone_bursts(rng: np.random.Generator, n: int, bin_idx: int, length: int) -> np.ndarray:
    """Sinusoids at an exact FFT bin with random phase/amplitude, float32."""
    t = np.arange(length)
    rows = [rng.uniform(0.5, 0.9) * np.sin(2 * np.pi * bin_idx * t / length
                                           + rng.uniform(0, 2 * np.pi))
            for _ in range(n)]
    return np.stack(rows).astype(np.float32)


def band_noise(rng: np.random.Generator, lo_hz: float, hi_hz: float,
               seconds: float, rate: int) -> np.ndarray:
    """Band-limited noise via spectral masking, peak 0.7."""
    n = int(round(seconds * rate))
    spec = np.fft.rfft(rng.normal(0.0, 1.0, n))
    f = np.fft.rfftfreq(n, 1.0 / rate)
    spec[(f < lo_hz) | (f > hi_hz)] = 0.0
    x = np.fft.irfft(spec, n)
    return 0.7 * x / (np.abs(x).max() + 1e-12)


def fft_peak_hz(x: np.ndarray, rate: int) -> float:
    spec = np.abs(np.fft.rfft(x))
    spec[0] = 0.0
    return float(np.fft.rfftfreq(x.size, 1.0 / rate)[int(spec.argmax())])
