"""CDS pricing: par spreads, constant default intensities, PV01s, and PVLGDs.

All prices are quoted per $100 of face. A contract is a standard running-spread
CDS with quarterly coupons; under a constant default intensity h the survival
probability to time t is exp(-h*t), so

    PV01  = (1/100) * sum_i exp(-(r+h)*t_i) * (t_i - t_{i-1})
    PVLGD = sum_i (exp(-h*t_{i-1}) - exp(-h*t_i)) * exp(-r*t_i) * L

and the par spread (in basis points) is PVLGD / PV01. Observed spreads are
inverted to intensities by linear interpolation against a precomputed table of
par spreads on a fixed intensity grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError

__all__ = [
    "ContractSpec",
    "IntensityGrid",
    "CdsQuote",
    "survival_prob",
    "pv01",
    "pvlgd_from_intensity",
    "par_spread",
    "SpreadConverter",
    "intensity_from_spread",
    "pvlgd_from_spread",
]


@dataclass(frozen=True)
class ContractSpec:
    """Terms of the CDS contract used throughout the pipeline.

    loss_given_default is in dollars per $100 face (60 means the bond loses
    60% of par on default). risk_free_rate is continuously compounded.
    """

    risk_free_rate: float
    maturity_years: float = 5.0
    coupon_interval_years: float = 0.25
    loss_given_default: float = 60.0

    def __post_init__(self):
        if self.maturity_years <= 0:
            raise ValidationError(f"maturity_years must be > 0, got {self.maturity_years}")
        if self.coupon_interval_years <= 0:
            raise ValidationError(
                f"coupon_interval_years must be > 0, got {self.coupon_interval_years}"
            )
        n = self.maturity_years / self.coupon_interval_years
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ValidationError(
                "maturity_years must be a positive integer multiple of "
                f"coupon_interval_years (got {self.maturity_years}/{self.coupon_interval_years})"
            )
        if not 0.0 <= self.loss_given_default <= 100.0:
            raise ValidationError(
                f"loss_given_default must be in [0, 100], got {self.loss_given_default}"
            )

    @property
    def n_coupons(self) -> int:
        return int(round(self.maturity_years / self.coupon_interval_years))

    @property
    def coupon_times(self) -> np.ndarray:
        """Payment dates t_1..t_C in years (t_0 = 0 is implicit)."""
        return np.arange(1, self.n_coupons + 1) * self.coupon_interval_years


@dataclass(frozen=True)
class IntensityGrid:
    """Strictly increasing intensity knots starting at 0, spanning [0, 200].

    The default grid is dense where par spreads are most sensitive: step
    0.0025 on [0, 0.20], step 0.04 on [0.24, 4], step 0.5 above.
    """

    knots: np.ndarray = field(default_factory=lambda: _default_knots())

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        if knots.ndim != 1 or knots.size < 2:
            raise ValidationError("grid needs at least two knots")
        if knots[0] != 0.0:
            raise ValidationError("grid must start at 0")
        if not np.all(np.diff(knots) > 0):
            raise ValidationError("grid knots must be strictly increasing")
        if knots[-1] < 200.0:
            raise ValidationError("grid must cover [0, 200]")


def _default_knots() -> np.ndarray:
    fine = np.linspace(0.0, 0.20, 81)          # step 0.0025
    mid = np.linspace(0.24, 4.0, 95)           # step 0.04
    coarse = 4.04 + 0.5 * np.arange(392)       # step 0.5, last knot 199.54
    return np.concatenate([fine, mid, coarse, [200.0]])


@dataclass(frozen=True)
class CdsQuote:
    """One entity-date CDS observation with its derived quantities."""

    entity_id: str
    date: str
    spread_bp: float
    intensity: float
    pvlgd: float

    def __post_init__(self):
        if self.spread_bp < 0:
            raise ValidationError(f"spread_bp must be >= 0, got {self.spread_bp}")
        if self.intensity < 0:
            raise ValidationError(f"intensity must be >= 0, got {self.intensity}")
        if self.pvlgd < 0:
            raise ValidationError(f"pvlgd must be >= 0, got {self.pvlgd}")


def survival_prob(h, t):
    """P(no default by t) = exp(-h*t) under constant intensity h."""
    h = np.asarray(h, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(h < 0) or np.any(t < 0):
        raise ValidationError("survival_prob requires h >= 0 and t >= 0")
    out = np.exp(-h * t)
    return float(out) if out.ndim == 0 else out


def pv01(h, spec: ContractSpec):
    """Present value of 1bp of running spread; strictly decreasing in h."""
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValidationError("pv01 requires h >= 0")
    t = spec.coupon_times
    disc = np.exp(-(spec.risk_free_rate + h[..., None]) * t)
    out = disc.sum(axis=-1) * spec.coupon_interval_years / 100.0
    return float(out) if out.ndim == 0 else out


def pvlgd_from_intensity(h, spec: ContractSpec):
    """Expected discounted default loss, in dollars per $100 face."""
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValidationError("pvlgd_from_intensity requires h >= 0")
    t = spec.coupon_times
    t_prev = t - spec.coupon_interval_years
    default_prob = np.exp(-h[..., None] * t_prev) - np.exp(-h[..., None] * t)
    out = (default_prob * np.exp(-spec.risk_free_rate * t)).sum(axis=-1) * spec.loss_given_default
    return float(out) if out.ndim == 0 else out


def par_spread(h, spec: ContractSpec):
    """Spread (bp) equating premium and protection legs: PVLGD / PV01."""
    h = np.asarray(h, dtype=float)
    out = np.divide(pvlgd_from_intensity(h, spec), pv01(h, spec))
    return float(out) if np.ndim(out) == 0 else out


class SpreadConverter:
    """Spread <-> intensity inversion via a cached par-spread table.

    The table of par spreads at every grid knot is computed once; conversion
    then interpolates linearly in (par_spread, h) pairs. Read-only after
    construction, so instances are safe to share across threads.
    """

    def __init__(self, spec: ContractSpec, grid: IntensityGrid | None = None):
        self.spec = spec
        self.grid = grid if grid is not None else IntensityGrid()
        self._spreads = par_spread(self.grid.knots, spec)
        self._spreads.setflags(write=False)
        self.grid.knots.setflags(write=False)

    @property
    def max_spread_bp(self) -> float:
        return float(self._spreads[-1])

    def intensity_from_spread(self, spread_bp):
        spread_bp = np.asarray(spread_bp, dtype=float)
        if np.any(spread_bp < 0):
            raise ValidationError("spread_bp must be >= 0")
        if np.any(spread_bp > self.max_spread_bp):
            raise ValidationError(
                f"spread above the {self.max_spread_bp:.0f}bp ceiling of the intensity grid"
            )
        out = np.interp(spread_bp, self._spreads, self.grid.knots)
        return float(out) if out.ndim == 0 else out

    def pvlgd_from_spread(self, spread_bp):
        return pvlgd_from_intensity(self.intensity_from_spread(spread_bp), self.spec)

    def spread_from_pvlgd(self, pvlgd):
        """Inverse map: PVLGD ($ per 100 face) -> par spread (bp)."""
        pvlgd = np.asarray(pvlgd, dtype=float)
        table = pvlgd_from_intensity(self.grid.knots, self.spec)
        if np.any(pvlgd < 0) or np.any(pvlgd > table[-1]):
            raise ValidationError(
                f"pvlgd must lie in [0, {table[-1]:.3f}] for this contract"
            )
        out = np.interp(pvlgd, table, self._spreads)
        return float(out) if out.ndim == 0 else out

    def quote(self, entity_id: str, date: str, spread_bp: float) -> CdsQuote:
        h = self.intensity_from_spread(spread_bp)
        return CdsQuote(
            entity_id=entity_id,
            date=date,
            spread_bp=float(spread_bp),
            intensity=h,
            pvlgd=pvlgd_from_intensity(h, self.spec),
        )


_converters: dict[ContractSpec, SpreadConverter] = {}


def _converter(spec: ContractSpec, grid: IntensityGrid | None) -> SpreadConverter:
    if grid is not None:
        return SpreadConverter(spec, grid)
    conv = _converters.get(spec)
    if conv is None:
        conv = _converters.setdefault(spec, SpreadConverter(spec))
    return conv


def intensity_from_spread(spread_bp, spec: ContractSpec, grid: IntensityGrid | None = None):
    """Invert an observed par spread (bp) to its constant default intensity."""
    return _converter(spec, grid).intensity_from_spread(spread_bp)


def pvlgd_from_spread(spread_bp, spec: ContractSpec, grid: IntensityGrid | None = None):
    """Spread (bp) -> PVLGD ($ per 100 face), composing inversion and pricing."""
    return _converter(spec, grid).pvlgd_from_spread(spread_bp)
