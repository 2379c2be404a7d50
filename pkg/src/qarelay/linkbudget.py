"""60 GHz link budget: pathloss, oxygen absorption, signal/noise power, capacity.

All distances are in meters and rates in bit/s. The optimization layer works
in Gbit/s and converts at instance build time.

The oxygen term is piecewise: zero up to the threshold distance and linear in
the *whole* path length beyond it, so capacity has a downward jump just past
200 m with the default parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


class DomainError(ValueError):
    """Raised when an input lies outside the domain of a model function."""


@dataclass(frozen=True)
class LinkBudgetParams:
    eirp_dbm: float = 40.0
    rx_gain_db: float = 40.0
    shadow_margin_db: float = 10.0
    pathloss_exponent: float = 2.5
    wavelength_m: float = 0.005
    bandwidth_hz: float = 2.16e9
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 6.0
    oxygen_db_per_m: float = 15.0 / 1000.0
    oxygen_threshold_m: float = 200.0

    def __post_init__(self) -> None:
        if not self.bandwidth_hz > 0:
            raise DomainError(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")
        if not self.wavelength_m > 0:
            raise DomainError(f"wavelength_m must be positive, got {self.wavelength_m}")
        if not self.pathloss_exponent > 0:
            raise DomainError(f"pathloss_exponent must be positive, got {self.pathloss_exponent}")
        if self.oxygen_threshold_m < 0 or self.oxygen_db_per_m < 0:
            raise DomainError("oxygen parameters must be non-negative")

    def with_updates(self, **changes: float) -> "LinkBudgetParams":
        return replace(self, **changes)


DEFAULT_PARAMS = LinkBudgetParams()
EUROPE_EIRP_DBM = 57.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0:
        raise DomainError(f"cannot express non-positive value {value} in dB")
    return 10.0 * math.log10(value)


def _check_distance(d: float) -> None:
    if not d > 0 or math.isinf(d):
        raise DomainError(f"distance must be positive and finite, got {d}")


def pathloss_db(d: float, p: LinkBudgetParams = DEFAULT_PARAMS) -> float:
    """Mean pathloss as a (negative) gain: 10*log10((lambda / (4*pi*d))**n)."""
    _check_distance(d)
    return 10.0 * p.pathloss_exponent * math.log10(p.wavelength_m / (4.0 * math.pi * d))


def oxygen_db(d: float, p: LinkBudgetParams = DEFAULT_PARAMS) -> float:
    if d < 0:
        raise DomainError(f"distance must be non-negative, got {d}")
    if d > p.oxygen_threshold_m:
        return p.oxygen_db_per_m * d
    return 0.0


def signal_power_dbm(d: float, p: LinkBudgetParams = DEFAULT_PARAMS) -> float:
    return (
        p.eirp_dbm
        + p.rx_gain_db
        - p.shadow_margin_db
        - oxygen_db(d, p)
        + pathloss_db(d, p)
    )


def noise_power_dbm(p: LinkBudgetParams = DEFAULT_PARAMS) -> float:
    return p.noise_psd_dbm_hz + 10.0 * math.log10(p.bandwidth_hz) + p.noise_figure_db


def snr_db(d: float, p: LinkBudgetParams = DEFAULT_PARAMS) -> float:
    return signal_power_dbm(d, p) - noise_power_dbm(p)


def capacity_bps(d: float, p: LinkBudgetParams = DEFAULT_PARAMS) -> float:
    """Shannon capacity B*log2(1 + SNR) of a link of length ``d`` meters."""
    return p.bandwidth_hz * math.log2(1.0 + db_to_linear(snr_db(d, p)))


@dataclass(frozen=True)
class LinkReport:
    distance_m: float
    pathloss_db: float
    oxygen_db: float
    signal_dbm: float
    noise_dbm: float
    snr_db: float
    capacity_gbps: float


def link_report(d: float, p: LinkBudgetParams = DEFAULT_PARAMS) -> LinkReport:
    sig = signal_power_dbm(d, p)
    noise = noise_power_dbm(p)
    return LinkReport(
        distance_m=d,
        pathloss_db=pathloss_db(d, p),
        oxygen_db=oxygen_db(d, p),
        signal_dbm=sig,
        noise_dbm=noise,
        snr_db=sig - noise,
        capacity_gbps=capacity_bps(d, p) / 1e9,
    )


def max_range_m(rate_bps: float, p: LinkBudgetParams = DEFAULT_PARAMS, hi: float = 10_000.0) -> float:
    """Largest distance whose capacity still reaches ``rate_bps``.

    Capacity is strictly decreasing in distance (the oxygen jump only makes it
    drop faster), so bisection on the sign of ``capacity - rate`` is exact up
    to floating point.
    """
    lo = 1e-6
    if capacity_bps(lo, p) < rate_bps:
        return 0.0
    if capacity_bps(hi, p) >= rate_bps:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if capacity_bps(mid, p) >= rate_bps:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9:
            break
    return lo
