"""Independent high-precision references used only by the tests."""

from __future__ import annotations

import mpmath


def wright_series_mp(alpha: float, theta: float, dps: int = 120) -> float:
    """Defining series of M_alpha summed at ``dps`` digits."""
    with mpmath.workdps(dps):
        a = mpmath.mpf(alpha)
        th = mpmath.mpf(theta)
        s = mpmath.mpf(0)
        fac = mpmath.mpf(1)
        small = 0
        n = 1
        while True:
            t = (-th) ** (n - 1) * mpmath.rgamma(1 - a * n) / fac
            s += t
            fac *= n
            # terms vanish at Gamma poles, so demand a run of small ones past the peak
            if n > 2 * theta ** (1.0 / (1.0 - alpha)) + 10 and abs(t) < mpmath.mpf(10) ** (-dps + 5) * abs(s):
                small += 1
                if small >= 3:
                    break
            else:
                small = 0
            n += 1
        return float(s)


def ml_series_mp(alpha: float, beta: float, z: float, dps: int = 60) -> float:
    """Brute-force Mittag-Leffler series; ``dps`` must exceed the peak term size."""
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        am, bm = mpmath.mpf(alpha), mpmath.mpf(beta)
        s = mpmath.mpf(0)
        zk = mpmath.mpf(1)
        k = 0
        peak_k = abs(z) ** (1.0 / alpha) / alpha + 10
        while True:
            t = zk * mpmath.rgamma(am * k + bm)
            s += t
            zk *= zz
            if k > peak_k and abs(t) < mpmath.mpf(10) ** (-dps + 5) * abs(s):
                break
            k += 1
        return float(s)


def ml_dps(alpha: float, z: float) -> int:
    """Digits needed so cancellation in the series leaves ~30 correct."""
    return int(40 + abs(z) ** (1.0 / alpha) / 2.3)
