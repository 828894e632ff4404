"""Physical scenario definitions: power budget, coherence, antennas, fading law.

Everything downstream (bounds, channel synthesis, Monte-Carlo checks) is
parameterized by a :class:`ChannelScenario`.  All quantities are kept in SI
units (hertz, seconds) and all rates produced from them are in nats/s; the
only unit conversion in the package is the optional dB input at the parse
boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

__all__ = [
    "ScenarioError",
    "ParseError",
    "ValidationError",
    "FadingFamily",
    "ChannelScenario",
    "OccupancyPoint",
    "kurtosis",
    "snr_per_dof",
    "parse_scenario",
    "serialize_scenario",
]

RAYLEIGH = "rayleigh"
RICE = "rice"
NAKAGAMI = "nakagami"


class ScenarioError(ValueError):
    """Base class for scenario construction/parsing failures."""


class ParseError(ScenarioError):
    """Malformed scenario document (syntax, unknown or duplicate key)."""


class ValidationError(ScenarioError):
    """Well-formed document whose values violate a scenario invariant."""


@dataclass(frozen=True)
class FadingFamily:
    """Small-scale fading law of the channel coefficients.

    ``kind`` is one of ``rayleigh``, ``rice`` (``param`` = line-of-sight
    factor k >= 0) or ``nakagami`` (``param`` = shape m > 0).
    """

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in (RAYLEIGH, RICE, NAKAGAMI):
            raise ValidationError(f"unknown fading kind {self.kind!r}")
        if self.kind == RICE and not self.param >= 0:
            raise ValidationError("rice factor k must be >= 0")
        if self.kind == NAKAGAMI and not self.param > 0:
            raise ValidationError("nakagami shape m must be > 0")

    @classmethod
    def rayleigh(cls) -> "FadingFamily":
        return cls(RAYLEIGH)

    @classmethod
    def rice(cls, k: float) -> "FadingFamily":
        return cls(RICE, float(k))

    @classmethod
    def nakagami(cls, m: float) -> "FadingFamily":
        return cls(NAKAGAMI, float(m))

    @property
    def label(self) -> str:
        """Scenario-file spelling: ``rayleigh``, ``rice:<k>`` or ``nakagami:<m>``."""
        if self.kind == RAYLEIGH:
            return RAYLEIGH
        return f"{self.kind}:{self.param!r}"


def kurtosis(fading: FadingFamily) -> float:
    """Kurtosis of the fading coefficients, E|h|^4 / (E|h|^2)^2.

    Rayleigh gives 2, Rice with factor k gives 2 - 4k^2/(1+2k)^2 and
    Nakagami-m gives 1 + 1/m.
    """
    if fading.kind == RAYLEIGH:
        return 2.0
    if fading.kind == RICE:
        k = fading.param
        return 2.0 - 4.0 * k * k / (1.0 + 2.0 * k) ** 2
    return 1.0 + 1.0 / fading.param


@dataclass(frozen=True)
class ChannelScenario:
    """Block-fading wideband MIMO setup.

    Attributes:
        snr_density: P/N0 in hertz (received power over noise PSD).
        coherence_time: Tc in seconds.
        coherence_bandwidth: Bc in hertz.
        nt: number of transmit antennas.
        nr: number of receive antennas.
        fading: fading law of the channel coefficients.
    """

    snr_density: float
    coherence_time: float
    coherence_bandwidth: float
    nt: int
    nr: int
    fading: FadingFamily

    def __post_init__(self):
        if not self.snr_density > 0:
            raise ValidationError("snr_density must be > 0")
        if not self.coherence_time > 0:
            raise ValidationError("coherence_time must be > 0")
        if not self.coherence_bandwidth > 0:
            raise ValidationError("coherence_bandwidth must be > 0")
        if not (isinstance(self.nt, int) and self.nt >= 1):
            raise ValidationError("nt must be a positive integer")
        if not (isinstance(self.nr, int) and self.nr >= 1):
            raise ValidationError("nr must be a positive integer")
        if not self.coherence_product > 1:
            raise ValidationError("coherence product <= 1")

    @property
    def coherence_product(self) -> float:
        """Bc*Tc, the number of time-frequency units per fading block."""
        return self.coherence_bandwidth * self.coherence_time

    @property
    def wideband_limit(self) -> float:
        """Infinite-bandwidth AWGN capacity Nr*P/N0 in nats/s."""
        return self.nr * self.snr_density

    @property
    def kurtosis(self) -> float:
        return kurtosis(self.fading)


def snr_per_dof(scenario: ChannelScenario, bandwidth: float) -> float:
    """SNR per degree of freedom at each receive antenna, (P/N0)/B."""
    if not bandwidth > 0:
        raise ValidationError("bandwidth must be > 0")
    return scenario.snr_density / bandwidth


@dataclass(frozen=True)
class OccupancyPoint:
    """A (duty cycle, bandwidth) pair with its bandwidth occupancy delta*B."""

    delta: float
    bandwidth: float
    occupancy: float

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValidationError("delta must be in (0, 1]")
        if not self.bandwidth > 0:
            raise ValidationError("bandwidth must be > 0")
        product = self.delta * self.bandwidth
        if abs(self.occupancy - product) > math.ulp(product):
            raise ValidationError("occupancy must equal delta * bandwidth")

    @classmethod
    def of(cls, delta: float, bandwidth: float) -> "OccupancyPoint":
        return cls(delta, bandwidth, delta * bandwidth)


# Scenario-file keys.  snr_density_hz and snr_density_db_hz are mutually
# exclusive spellings of the same quantity.
_KEYS = {
    "snr_density_hz",
    "snr_density_db_hz",
    "coherence_time_s",
    "coherence_bandwidth_hz",
    "nt",
    "nr",
    "fading",
}


def _parse_fading(text: str) -> FadingFamily:
    text = text.strip().lower()
    if text == RAYLEIGH:
        return FadingFamily.rayleigh()
    for kind in (RICE, NAKAGAMI):
        if text.startswith(kind + ":"):
            try:
                param = float(text[len(kind) + 1:])
            except ValueError:
                raise ParseError(f"bad {kind} parameter in {text!r}") from None
            return FadingFamily(kind, param)
    raise ParseError(f"unknown fading spec {text!r}")


def _parse_flat(text: str) -> dict:
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ParseError(f"line {lineno}: unknown key {key!r}")
        if key in fields:
            raise ParseError(f"line {lineno}: duplicate key {key!r}")
        fields[key] = value
    return fields


def _field(fields: dict, key: str, convert):
    if key not in fields:
        raise ValidationError(f"missing required field {key!r}")
    try:
        return convert(fields[key])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field {key!r}: {exc}") from None


def _as_int(value) -> int:
    if isinstance(value, bool):
        raise ValueError("expected integer")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value != int(value):
            raise ValueError("expected integer")
        return int(value)
    return int(str(value).strip())


def parse_scenario(text: str) -> ChannelScenario:
    """Parse a scenario document (flat ``key = value`` form or JSON object).

    Raises ParseError on malformed input and ValidationError when a field is
    missing or violates a scenario invariant.
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            fields = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON scenario: {exc}") from None
        if not isinstance(fields, dict):
            raise ParseError("JSON scenario must be an object")
        unknown = set(fields) - _KEYS
        if unknown:
            raise ParseError(f"unknown keys {sorted(unknown)}")
    else:
        fields = _parse_flat(text)

    if "snr_density_hz" in fields and "snr_density_db_hz" in fields:
        raise ParseError("give either snr_density_hz or snr_density_db_hz, not both")
    if "snr_density_db_hz" in fields:
        snr_density = 10.0 ** (_field(fields, "snr_density_db_hz", float) / 10.0)
    else:
        snr_density = _field(fields, "snr_density_hz", float)

    fading = fields.get("fading")
    if fading is None:
        raise ValidationError("missing required field 'fading'")
    if not isinstance(fading, FadingFamily):
        fading = _parse_fading(str(fading))

    return ChannelScenario(
        snr_density=snr_density,
        coherence_time=_field(fields, "coherence_time_s", float),
        coherence_bandwidth=_field(fields, "coherence_bandwidth_hz", float),
        nt=_field(fields, "nt", _as_int),
        nr=_field(fields, "nr", _as_int),
        fading=fading,
    )


def serialize_scenario(scenario: ChannelScenario) -> str:
    """Render a scenario in the canonical flat form; parse round-trips exactly."""
    lines = [
        f"snr_density_hz = {scenario.snr_density!r}",
        f"coherence_time_s = {scenario.coherence_time!r}",
        f"coherence_bandwidth_hz = {scenario.coherence_bandwidth!r}",
        f"nt = {scenario.nt}",
        f"nr = {scenario.nr}",
        f"fading = {scenario.fading.label}",
    ]
    return "\n".join(lines) + "\n"
