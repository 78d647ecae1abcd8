"""Gabor filter-bank energy statistics."""
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from ..errors import ValidationError
from ..imaging import to_float_gray
from .base import FeatureVector, params_digest

BASE_WAVELENGTH = 4.0
SIGMA_RATIO = 0.56
ASPECT = 0.5


def gabor_kernel(wavelength, theta, sigma_ratio=SIGMA_RATIO, aspect=ASPECT):
    """Complex Gabor kernel; the Gaussian envelope is normalized to unit sum.

    ``theta`` is the direction of the wave vector, so ``theta = 0`` responds
    to vertical stripes.
    """
    sigma = sigma_ratio * wavelength
    r = int(np.ceil(3.0 * sigma / aspect))
    y, x = np.mgrid[-r:r + 1, -r:r + 1].astype(np.float64)
    xr = x * np.cos(theta) + y * np.sin(theta)
    yr = -x * np.sin(theta) + y * np.cos(theta)
    env = np.exp(-(xr ** 2 + (aspect * yr) ** 2) / (2.0 * sigma ** 2))
    env /= env.sum()
    return env * np.exp(2j * np.pi * xr / wavelength)


def bank_geometry(scales, orientations):
    wavelengths = [BASE_WAVELENGTH * 2.0 ** s for s in range(scales)]
    thetas = [np.pi * k / orientations for k in range(orientations)]
    return wavelengths, thetas


@lru_cache(maxsize=16)
def _spectra(h, w, scales, orientations):
    """Per scale: (pad radius, padded shape, stack of kernel spectra)."""
    wavelengths, thetas = bank_geometry(scales, orientations)
    out = []
    for lam in wavelengths:
        kernels = [gabor_kernel(lam, t) for t in thetas]
        r = kernels[0].shape[0] // 2
        shape = (sfft.next_fast_len(h + 2 * r), sfft.next_fast_len(w + 2 * r))
        stack = np.empty((len(kernels),) + shape, dtype=np.complex128)
        for i, k in enumerate(kernels):
            # kernel center moved to index (0, 0) for circular convolution
            buf = np.zeros(shape, dtype=np.complex128)
            buf[:2 * r + 1, :2 * r + 1] = k
            buf = np.roll(buf, (-r, -r), axis=(0, 1))
            stack[i] = sfft.fft2(buf)
        stack.flags.writeable = False
        out.append((r, shape, stack))
    return tuple(out)


def gabor_responses(plane, scales=4, orientations=6):
    """Magnitude responses, shape ``(scales, orientations, H, W)``.

    Borders are reflect-101; the circular FFT never wraps into the kept
    region because each padded extent exceeds the kernel radius.
    """
    h, w = plane.shape
    result = np.empty((scales, orientations, h, w))
    for s, (r, shape, stack) in enumerate(_spectra(h, w, scales, orientations)):
        padded = np.pad(plane, r, mode="reflect")
        spec = sfft.fft2(padded, s=shape)
        resp = sfft.ifft2(spec[np.newaxis] * stack, axes=(-2, -1))
        result[s] = np.abs(resp[:, r:r + h, r:r + w])
    return result


def gabor_features(img, scales=4, orientations=6):
    """Mean and standard deviation of each filter's magnitude response.

    Wavelengths double from 4 px; orientations split [0, pi) evenly.
    Layout is ``[mean, std]`` per filter, scale-major.
    """
    if scales < 1 or orientations < 2:
        raise ValidationError("need scales >= 1 and orientations >= 2")
    mags = gabor_responses(to_float_gray(img), scales, orientations)
    flat = mags.reshape(scales * orientations, -1)
    stats = np.stack([flat.mean(axis=1), flat.std(axis=1)], axis=1)
    digest = params_digest("Gabor", {"scales": scales, "orientations": orientations,
                                     "base_wavelength": BASE_WAVELENGTH,
                                     "sigma_ratio": SIGMA_RATIO, "aspect": ASPECT})
    return FeatureVector("Gabor", digest, stats.reshape(-1))
