"""Empirical wavelet decomposition of a real signal.

The pipeline is: magnitude spectrum -> adaptive band-boundary detection ->
Meyer-type band filter bank -> filtering in the Fourier domain. The filters
form an amplitude partition of unity (their pointwise sum is one at every FFT
bin), so summing the band components reconstructs the signal exactly up to
floating-point rounding. Band edges live on the normalized frequency axis
``omega = 2*pi*bin/n`` with the one-sided grid covering ``[0, pi]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ewtforecast.series import _as_float_vector, _frozen

MIN_SIGNAL_LENGTH = 4


@dataclass(frozen=True)
class Spectrum:
    """One-sided magnitude spectrum |DFT| on the grid of size floor(n/2)+1."""

    magnitudes: np.ndarray
    signal_length: int

    def __post_init__(self):
        mag = _as_float_vector(self.magnitudes, "magnitudes")
        if mag.size != self.signal_length // 2 + 1:
            raise ValueError(
                f"grid size {mag.size} inconsistent with signal length {self.signal_length}"
            )
        if np.any(mag < 0.0):
            raise ValueError("magnitudes must be non-negative")
        object.__setattr__(self, "magnitudes", _frozen(mag))

    def omegas(self) -> np.ndarray:
        """Normalized frequency of each grid bin."""
        return 2.0 * np.pi * np.arange(self.magnitudes.size) / self.signal_length


@dataclass(frozen=True)
class EwtBoundaries:
    """Band edges, strictly increasing in the open interval (0, pi).

    ``uniform_fallback`` marks boundaries produced by the uniform segmentation
    fallback (too few spectral peaks for the requested band count).
    """

    omegas: np.ndarray
    uniform_fallback: bool = False

    def __post_init__(self):
        om = _as_float_vector(self.omegas, "boundary frequencies")
        if om.size and not (np.all(om > 0.0) and np.all(om < np.pi)):
            raise ValueError("boundaries must lie strictly inside (0, pi)")
        if om.size > 1 and not np.all(np.diff(om) > 0.0):
            raise ValueError("boundaries must be strictly increasing")
        object.__setattr__(self, "omegas", _frozen(om))

    @property
    def n_bands(self) -> int:
        return int(self.omegas.size) + 1


@dataclass(frozen=True)
class EwtFilterBank:
    """K real symmetric frequency responses over the full FFT grid of length n.

    The responses sum to one at every bin, and each response satisfies
    ``response[k] == response[n - k]`` so that filtered components stay real.
    """

    boundaries: EwtBoundaries
    gamma: float
    responses: np.ndarray
    signal_length: int
    gamma_requested: float
    gamma_clipped: bool = False

    def __post_init__(self):
        resp = np.asarray(self.responses, dtype=np.float64)
        if resp.ndim != 2 or resp.shape != (self.boundaries.n_bands, self.signal_length):
            raise ValueError(
                f"responses must have shape (K, n) = "
                f"({self.boundaries.n_bands}, {self.signal_length}), got {resp.shape}"
            )
        object.__setattr__(self, "responses", _frozen(resp))

    @property
    def n_bands(self) -> int:
        return self.boundaries.n_bands


@dataclass(frozen=True)
class EwtDecomposition:
    """Band components of one signal; their elementwise sum is the signal."""

    components: np.ndarray
    bank: EwtFilterBank
    max_imag_residue: float = 0.0

    def __post_init__(self):
        comp = np.asarray(self.components, dtype=np.float64)
        if comp.ndim != 2 or comp.shape != (self.bank.n_bands, self.bank.signal_length):
            raise ValueError("components must have shape (K, n) matching the bank")
        object.__setattr__(self, "components", _frozen(comp))


def magnitude_spectrum(signal) -> Spectrum:
    """|DFT| of a real signal on the one-sided grid."""
    x = _as_float_vector(signal, "signal")
    if x.size < MIN_SIGNAL_LENGTH:
        raise ValueError(f"signal too short for a spectrum: {x.size} < {MIN_SIGNAL_LENGTH}")
    return Spectrum(np.abs(np.fft.rfft(x)), x.size)


def _moving_average(values: np.ndarray, width: int) -> np.ndarray:
    if width <= 1:
        return values
    kernel = np.full(width, 1.0 / width)
    return np.convolve(values, kernel, mode="same")


def _local_maxima(values: np.ndarray) -> list[int]:
    """Plateau-aware local maxima: each flat run strictly above both neighbours
    counts once, at its center bin. Edge runs need only their inner neighbour."""
    n = values.size
    out = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[j + 1] == values[i]:
            j += 1
        left_ok = i == 0 or values[i - 1] < values[i]
        right_ok = j == n - 1 or values[j + 1] < values[i]
        spans_all = i == 0 and j == n - 1
        if left_ok and right_ok and not spans_all:
            out.append((i + j) // 2)
        i = j + 1
    return out


def detect_boundaries(spectrum: Spectrum, n_bands: int, smooth_window: int = 5) -> EwtBoundaries:
    """Place ``n_bands - 1`` band edges from the spectrum's peak structure.

    The ``n_bands`` largest local maxima of the (optionally smoothed) spectrum
    are retained and each edge sits at the global minimum of the raw spectrum
    between two consecutive retained peaks. With fewer peaks than bands the
    interval (0, pi) is segmented uniformly and the result is flagged.

    ``smooth_window`` is the moving-average width applied before peak picking;
    1 disables smoothing.
    """
    if n_bands < 1:
        raise ValueError(f"band count must be >= 1, got {n_bands}")
    if n_bands == 1:
        return EwtBoundaries(np.empty(0))
    mag = spectrum.magnitudes
    smoothed = _moving_average(mag, smooth_window)
    peaks = _local_maxima(smoothed)
    if len(peaks) < n_bands:
        omegas = np.pi * np.arange(1, n_bands) / n_bands
        return EwtBoundaries(omegas, uniform_fallback=True)
    ranked = sorted(peaks, key=lambda p: (-smoothed[p], p))[:n_bands]
    ranked.sort()
    bins = []
    for lo, hi in zip(ranked[:-1], ranked[1:]):
        bins.append(lo + 1 + int(np.argmin(mag[lo + 1:hi])))
    omegas = 2.0 * np.pi * np.asarray(bins, dtype=np.float64) / spectrum.signal_length
    return EwtBoundaries(omegas)


def _smooth_step(x: np.ndarray) -> np.ndarray:
    """Polynomial smooth step on [0, 1]: 0 at 0, 1 at 1, flat at both ends."""
    return x ** 4 * (35.0 - 84.0 * x + 70.0 * x ** 2 - 20.0 * x ** 3)


def build_filter_bank(boundaries: EwtBoundaries, signal_length: int, gamma: float = 0.1) -> EwtFilterBank:
    """Construct the K band filters for a signal of length ``signal_length``.

    Around each edge ``w`` the neighbouring filters cross-fade over the zone
    ``[(1-gamma)*w, (1+gamma)*w]`` with raised-cosine profiles driven by a
    smooth-step polynomial, so adjacent responses sum to one exactly. ``gamma``
    is clipped (and the clip flagged) whenever the requested value would make
    transition zones of consecutive edges overlap.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if signal_length < MIN_SIGNAL_LENGTH:
        raise ValueError(f"signal length must be >= {MIN_SIGNAL_LENGTH}")
    k_bands = boundaries.n_bands
    n = signal_length
    if k_bands == 1:
        return EwtFilterBank(boundaries, gamma, np.ones((1, n)), n, gamma)

    om = boundaries.omegas
    gamma_eff = gamma
    if om.size > 1:
        ratios = np.diff(om) / (om[1:] + om[:-1])
        gamma_eff = min(gamma, float(ratios.min()))
    clipped = gamma_eff < gamma

    # |omega| per FFT bin, computed from index distance so the symmetry
    # response[k] == response[n - k] is bit-exact.
    idx = np.arange(n)
    aw = 2.0 * np.pi * np.minimum(idx, n - idx) / n

    rising = np.empty((om.size, n))
    falling = np.empty((om.size, n))
    for i, w in enumerate(om):
        lo = (1.0 - gamma_eff) * w
        width = 2.0 * gamma_eff * w
        x = np.clip((aw - lo) / width, 0.0, 1.0)
        arg = 0.5 * np.pi * _smooth_step(x)
        rising[i] = np.sin(arg) ** 2
        falling[i] = np.cos(arg) ** 2

    responses = np.empty((k_bands, n))
    for k in range(k_bands):
        resp = np.ones(n)
        if k > 0:
            resp = resp * rising[k - 1]
        if k < k_bands - 1:
            resp = resp * falling[k]
        responses[k] = resp
    return EwtFilterBank(boundaries, gamma_eff, responses, n, gamma, clipped)


def decompose(signal, bank: EwtFilterBank) -> EwtDecomposition:
    """Split a signal into K band components via the bank's frequency responses.

    Component k is the inverse DFT of ``response_k * DFT(signal)``; the
    imaginary residue discarded by the final cast is recorded on the result.
    """
    x = _as_float_vector(signal, "signal")
    if x.size != bank.signal_length:
        raise ValueError(f"signal length {x.size} does not match bank grid {bank.signal_length}")
    spectrum = np.fft.fft(x)
    filtered = np.fft.ifft(bank.responses * spectrum[None, :], axis=1)
    residue = float(np.abs(filtered.imag).max()) if filtered.size else 0.0
    return EwtDecomposition(filtered.real, bank, residue)


def reconstruct(decomposition) -> np.ndarray:
    """Elementwise sum of band components.

    Accepts an :class:`EwtDecomposition` or any 2-D array-like of equal-length
    components.
    """
    if isinstance(decomposition, EwtDecomposition):
        comp = decomposition.components
    else:
        try:
            comp = np.asarray(decomposition, dtype=np.float64)
        except ValueError:
            raise ValueError("components have ragged lengths") from None
        if comp.ndim != 2:
            raise ValueError(f"expected a stack of equal-length components, got shape {comp.shape}")
    if comp.shape[0] < 1:
        raise ValueError("no components to reconstruct from")
    return comp.sum(axis=0)
