"""Discrete Fourier transform with an explicit direction flag."""

import numpy as np

from ..errors import InvalidArgumentError


def dft(samples, direction="forward"):
    """Unnormalised forward DFT, inverse scaled by 1/N (numpy convention).

    X_k = sum_j x_j exp(-2 pi i j k / N) for ``direction='forward'``.
    """
    x = np.asarray(samples, dtype=complex)
    if x.ndim != 1 or x.size < 1:
        raise InvalidArgumentError("dft: need a non-empty 1-d vector")
    if direction == "forward":
        return np.fft.fft(x)
    if direction == "inverse":
        return np.fft.ifft(x)
    raise InvalidArgumentError(f"dft: unknown direction {direction!r}")


def dft_frequencies(n, spacing):
    """Frequencies (1/unit of ``spacing``) matching the ``dft`` output order."""
    return np.fft.fftfreq(n, d=spacing)
