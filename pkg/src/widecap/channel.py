"""Discrete block-fading MIMO channel: taps, DFT response, pilot circulants.

One coherence block carries K = B*Tc complex samples; the channel impulse
response between each antenna pair has M = K/(Bc*Tc) i.i.d. taps.  The
K-point DFT of the zero-padded taps gives the per-subcarrier channel blocks
H[k].  A unit-power pilot sequence defines a tall circulant regressor whose
Gram spectrum controls the channel-uncertainty penalty, and a block-IDFT
matrix maps the repeated-coefficient filter-bank signaling model onto the
K-sample DFT model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .scenario import NAKAGAMI, RAYLEIGH, RICE, ChannelScenario

__all__ = [
    "DiscreteChannel",
    "PilotCirculant",
    "FilterBankCodeword",
    "sample_taps",
    "frequency_response",
    "circulant_eigenvalues",
    "block_idft_matrix",
    "filterbank_equivalence_check",
    "channel_to_json",
    "channel_from_json",
]


def integer_coherence_length(coherence_product: float) -> int:
    """Round the coherence product up to the integer symbol-block length."""
    nearest = round(coherence_product)
    if abs(coherence_product - nearest) < 1e-9 * max(1.0, abs(coherence_product)):
        return int(nearest)
    return int(math.ceil(coherence_product))


@dataclass(frozen=True)
class DiscreteChannel:
    """Sampled channel taps for one fading block, with derived DFT blocks.

    ``taps`` has shape (nr, nt, M); ``gains`` is the average power profile
    (length M, shared by all antenna pairs, summing to one); ``freq_blocks``
    has shape (K, nr, nt) once :func:`frequency_response` has run.
    """

    k_samples: int
    m_taps: int
    taps: np.ndarray
    gains: np.ndarray
    freq_blocks: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.m_taps < 1:
            raise ValueError("need at least one tap")
        if self.k_samples % self.m_taps != 0:
            raise ValueError("k_samples must be an integer multiple of m_taps")
        if self.taps.ndim != 3 or self.taps.shape[2] != self.m_taps:
            raise ValueError("taps must have shape (nr, nt, m_taps)")
        if self.gains.shape != (self.m_taps,):
            raise ValueError("gains must have shape (m_taps,)")
        if abs(self.gains.sum() - 1.0) > 1e-12:
            raise ValueError("gain profile must sum to one")

    @property
    def coherence_length(self) -> int:
        return self.k_samples // self.m_taps

    @property
    def nr(self) -> int:
        return self.taps.shape[0]

    @property
    def nt(self) -> int:
        return self.taps.shape[1]


def unit_fading_samples(rng: np.random.Generator, fading, shape) -> np.ndarray:
    """Zero-mean unit-power complex coefficients from the given fading law.

    The Rice line-of-sight component takes an independent uniform phase per
    draw, and Nakagami amplitudes get an independent uniform phase, so every
    family is phase-symmetric (zero mean) with E|h|^2 = 1.
    """
    if fading.kind == RAYLEIGH:
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    if fading.kind == RICE:
        los_power = 2.0 * fading.param / (1.0 + 2.0 * fading.param)
        theta = rng.uniform(0.0, 2.0 * math.pi, shape)
        scatter = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
        return math.sqrt(los_power) * np.exp(1j * theta) + math.sqrt(1.0 - los_power) * scatter
    if fading.kind == NAKAGAMI:
        m = fading.param
        amplitude = np.sqrt(rng.gamma(m, 1.0 / m, shape))
        theta = rng.uniform(0.0, 2.0 * math.pi, shape)
        return amplitude * np.exp(1j * theta)
    raise ValueError(f"cannot synthesize taps for fading kind {fading.kind!r}")


def sample_taps(
    scenario: ChannelScenario,
    k_samples: int,
    rng_seed: int,
    gains: Optional[np.ndarray] = None,
) -> DiscreteChannel:
    """Draw one channel realization with M = K/ceil(Bc*Tc) taps per pair.

    Taps are i.i.d. across delays and antenna pairs, scaled so the n-th tap
    has average power gains[n] (uniform 1/M by default; a custom profile is
    renormalized to unit sum).  Deterministic for a given seed.
    """
    l_c = integer_coherence_length(scenario.coherence_product)
    if k_samples % l_c != 0:
        raise ValueError("k_samples must be divisible by the integer coherence length")
    m = k_samples // l_c
    if gains is None:
        gains = np.full(m, 1.0 / m)
    else:
        gains = np.asarray(gains, dtype=float)
        if gains.shape != (m,) or np.any(gains < 0) or gains.sum() <= 0:
            raise ValueError("gain profile must be non-negative with positive sum")
        gains = gains / gains.sum()
    rng = np.random.default_rng(rng_seed)
    taps = unit_fading_samples(rng, scenario.fading, (scenario.nr, scenario.nt, m))
    taps = taps * np.sqrt(gains)
    return DiscreteChannel(k_samples=k_samples, m_taps=m, taps=taps, gains=gains)


def frequency_response(channel: DiscreteChannel) -> DiscreteChannel:
    """Populate the K-point DFT blocks H[k][v,u] = sum_n h[v,u,n] e^(-j2*pi*k*n/K).

    Parseval (sum_k |H[k]|^2 = K * sum_n |h[n]|^2 per antenna pair) is
    checked inline to 1e-9 relative.
    """
    k = channel.k_samples
    spectrum = np.fft.fft(channel.taps, n=k, axis=-1)  # (nr, nt, K)
    power_freq = np.sum(np.abs(spectrum) ** 2, axis=-1)
    power_time = k * np.sum(np.abs(channel.taps) ** 2, axis=-1)
    if not np.allclose(power_freq, power_time, rtol=1e-9, atol=0.0):
        raise RuntimeError("Parseval check failed in frequency_response")
    blocks = np.ascontiguousarray(np.moveaxis(spectrum, -1, 0))  # (K, nr, nt)
    return replace(channel, freq_blocks=blocks)


def analytic_tap_correlation(gains: np.ndarray, k_samples: int, lag) -> np.ndarray:
    """Correlation of H[k] and H[k+lag] implied by the gain profile (its DFT)."""
    n = np.arange(len(gains))
    lag = np.atleast_1d(lag)
    return np.array(
        [np.sum(gains * np.exp(-2j * np.pi * d * n / k_samples)) for d in lag]
    )


@dataclass(frozen=True)
class PilotCirculant:
    """Tall circulant regressor built from a unit-power pilot sequence.

    Entry (i, j) is base_signal[(i - j) mod K] for j = 0..cols-1; column
    u*M + m is the pilot delayed by u*M + m, which realizes the
    delayed-copies pilot layout across transmit antennas.
    """

    k_rows: int
    cols: int
    base_signal: np.ndarray

    def __post_init__(self):
        if self.base_signal.shape != (self.k_rows,):
            raise ValueError("base_signal must have length k_rows")
        if not 1 <= self.cols <= self.k_rows:
            raise ValueError("cols must be in [1, k_rows]")
        power = np.mean(np.abs(self.base_signal) ** 2)
        if abs(power - 1.0) > 1e-12:
            raise ValueError("base_signal must have exactly unit average power")

    def materialize(self) -> np.ndarray:
        """The literal K x cols matrix of delayed pilot copies."""
        i = np.arange(self.k_rows)[:, None]
        j = np.arange(self.cols)[None, :]
        return self.base_signal[(i - j) % self.k_rows]

    def gram(self) -> np.ndarray:
        """The literal Gram matrix (cols x cols, Hermitian Toeplitz)."""
        xi = self.materialize()
        return xi.conj().T @ xi

    def folded_gram(self) -> np.ndarray:
        """Circulant form of the Gram: alias the pilot into cols bins first.

        Its eigenvalues are exactly the closed-form spectrum returned by
        :func:`circulant_eigenvalues`; requires cols to divide K.
        """
        if self.k_rows % self.cols != 0:
            raise ValueError("folded form needs cols to divide k_rows")
        folded = self.base_signal.reshape(-1, self.cols).sum(axis=0)
        i = np.arange(self.cols)[:, None]
        j = np.arange(self.cols)[None, :]
        circulant = folded[(i - j) % self.cols]
        return circulant.conj().T @ circulant


def circulant_eigenvalues(pilot: PilotCirculant):
    """Pilot Gram spectrum lambda_m = |sum_k x[k] e^(-j2*pi*k*m/cols)|^2 and psi.

    Returns (eigenvalues, psi) with psi = min_m lambda_m / K, the normalized
    worst eigenvalue entering the channel-uncertainty penalty.
    """
    k = np.arange(pilot.k_rows)
    m = np.arange(pilot.cols)
    phases = np.exp(-2j * np.pi * np.outer(k, m) / pilot.cols)
    eigenvalues = np.abs(pilot.base_signal @ phases) ** 2
    return eigenvalues, float(eigenvalues.min() / pilot.k_rows)


@dataclass(frozen=True)
class FilterBankCodeword:
    """Symbols x[m, l] on M frequency bins over L_c periods of one block."""

    m_bins: int
    l_symbols: int
    symbols: np.ndarray

    def __post_init__(self):
        if self.symbols.shape != (self.m_bins, self.l_symbols):
            raise ValueError("symbols must have shape (m_bins, l_symbols)")


def block_idft_matrix(l_symbols: int, m_bins: int) -> np.ndarray:
    """Unitary block-diagonal K x K matrix with M copies of the L_c-point IDFT."""
    v = np.arange(l_symbols)
    f = np.exp(2j * np.pi * np.outer(v, v) / l_symbols) / math.sqrt(l_symbols)
    return np.kron(np.eye(m_bins), f)


def _periodic_pulse(z, l_symbols: int):
    """Band-limited interpolation pulse, periodic over one coherence block.

    p(z) = (1/L) * sum_{v=0..L-1} e^(-j2*pi*v*z) evaluated through its closed
    (Dirichlet) form; z is time in units of the block duration.  p is 1 at
    integer z and 0 at the other symbol instants z = l/L.
    """
    z = np.asarray(z, dtype=float)
    num = np.sin(np.pi * l_symbols * z)
    den = np.sin(np.pi * z)
    integral = np.isclose(den, 0.0, atol=1e-12)
    safe_den = np.where(integral, 1.0, den)
    pulse = np.exp(-1j * np.pi * (l_symbols - 1) * z) * (num / safe_den) / l_symbols
    return np.where(integral, 1.0 + 0.0j, pulse)  # p is exactly 1 at integer z


def filterbank_equivalence_check(codeword: FilterBankCodeword, channel: DiscreteChannel) -> float:
    """Max-abs gap between the synthesized filter-bank signal and H*Phi*x.

    Path one synthesizes the continuous-time signal of the M-bin model
    (pulse-shaped, bin-modulated, scaled by the per-bin channel
    coefficients), samples it at rate B and applies the K-point analysis
    transform.  Path two evaluates the block-diagonal channel acting on the
    block-IDFT precoded codeword.  With K = M*L_c both are exact and the
    discrepancy is at machine level.
    """
    if channel.nt != 1 or channel.nr != 1:
        raise ValueError("equivalence check is defined for SISO channels")
    m_bins, l_symbols = codeword.m_bins, codeword.l_symbols
    k = m_bins * l_symbols
    if channel.k_samples != k or channel.m_taps != m_bins:
        raise ValueError("channel grid does not match the codeword grid")

    bin_coeff = np.fft.fft(channel.taps[0, 0])  # per-bin coefficients h[u]

    # Path one: continuous-time synthesis sampled at rate B, then the
    # K-point analysis transform (kernel conjugate to the bin modulation).
    n = np.arange(k)
    z = n[:, None] / k - np.arange(l_symbols)[None, :] / l_symbols  # (n, l)
    pulse = _periodic_pulse(z, l_symbols)
    modulation = np.exp(-2j * np.pi * np.outer(n, np.arange(m_bins)) / m_bins)  # (n, m)
    samples = np.einsum("m,nm,nl,ml->n", bin_coeff, modulation, pulse, codeword.symbols)
    analysis = np.exp(2j * np.pi * np.outer(np.arange(k), n) / k)  # (k, n)
    spectrum = analysis @ samples

    # Path two: diagonal channel times block-IDFT precoding.
    phi = block_idft_matrix(l_symbols, m_bins)
    x_vec = codeword.symbols.reshape(-1)
    direct = np.repeat(bin_coeff, l_symbols) * (phi @ x_vec)

    return float(np.max(np.abs(spectrum - m_bins * math.sqrt(l_symbols) * direct)))


def channel_to_json(channel: DiscreteChannel) -> str:
    """Serialize a channel realization (taps as [re, im] pairs) for replay."""
    payload = {
        "k_samples": channel.k_samples,
        "m_taps": channel.m_taps,
        "gains": channel.gains.tolist(),
        "taps": [
            [[[float(tap.real), float(tap.imag)] for tap in tx] for tx in rx]
            for rx in channel.taps
        ],
    }
    return json.dumps(payload)


def channel_from_json(text: str) -> DiscreteChannel:
    payload = json.loads(text)
    taps = np.array(
        [[[complex(re, im) for re, im in tx] for tx in rx] for rx in payload["taps"]]
    )
    return DiscreteChannel(
        k_samples=int(payload["k_samples"]),
        m_taps=int(payload["m_taps"]),
        taps=taps,
        gains=np.array(payload["gains"], dtype=float),
    )
