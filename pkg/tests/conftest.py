from pathlib import Path

import numpy as np
import pytest

from narcast import _kernels
from narcast.series import parse_monthly_csv

ROOT = Path(__file__).resolve().parents[1]

# bundled monthly counts and the published running totals
BUNDLED_MONTHLY = [1039, 1227, 552, 257, 187, 490, 523, 133, 1219, 735, 620, 1076,
                  888, 855, 1038, 1119, 645, 1495, 1045, 878, 981, 1136, 1268, 993, 875, 1054]
BUNDLED_AGGREGATED = [75846, 77073, 77625, 77882, 78069, 78559, 79082, 79215, 80434, 81169,
                     81789, 82865, 83753, 84608, 85646, 86765, 87410, 88905, 89950, 90828,
                     91809, 92945, 94213, 95206, 96081, 97135]


@pytest.fixture
def bundled_text():
    return (ROOT / "data" / "harp_covid.csv").read_text(encoding="utf-8")


@pytest.fixture
def bundled(bundled_text):
    return parse_monthly_csv(bundled_text)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_BACKENDS = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])


@pytest.fixture(params=_BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per kernel implementation."""
    suffix = request.param
    for name in ("forward_batch", "jacobian", "rollout"):
        monkeypatch.setattr(_kernels, name, getattr(_kernels, f"{name}_{suffix}"))
    return suffix


def tanh_nar3(n, seed, coef=(2.0, -1.5, 0.2), noise_frac=0.01, burn=100):
    """y_t = tanh(c1 y_{t-1} + c2 y_{t-2} + c3 y_{t-3}) + eps_t.

    The linearization at 0 is unstable and tanh bounds it, so the noise-free
    process settles on a limit cycle. ``eps`` has sd ``noise_frac`` times the
    range of a noise-free pilot run.
    """
    def run(sd, gen):
        y = np.zeros(n + burn)
        y[:3] = (0.1, 0.2, 0.3)
        for t in range(3, n + burn):
            y[t] = np.tanh(coef[0] * y[t - 1] + coef[1] * y[t - 2] + coef[2] * y[t - 3])
            if sd:
                y[t] += gen.normal(0.0, sd)
        return y[burn:]

    sd = noise_frac * np.ptp(run(0.0, None))
    return run(sd, np.random.default_rng(seed))


def ar1(n, seed, phi=0.8, sd=0.1, burn=200):
    gen = np.random.default_rng(seed)
    y = np.zeros(n + burn)
    for t in range(1, n + burn):
        y[t] = phi * y[t - 1] + gen.normal(0.0, sd)
    return y[burn:]


# (number, label, passed, seconds), filled by test_acceptance.criterion
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, label, ok, secs in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {label}  ({secs:.2f} s)")
