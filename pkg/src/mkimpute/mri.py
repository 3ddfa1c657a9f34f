"""k-space operators and synthetic dynamic-MRI data.

Frames of an I1 x I2 grid are flattened column-major into I0 = I1 * I2 rows;
columns index the I3 time frames.  The spatial transform is the unnormalized
2D DFT per frame stored DC-centered (zero frequency at the grid center, the
usual scanner layout, so the central band really is the low-frequency
region); the inverse carries 1/(I1*I2).  The temporal transform is the
unnormalized 1D DFT along rows, unshifted, so Ft^H Ft = I3 * Id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .sampling import SamplingPattern


def flatten_frames(tensor: np.ndarray) -> np.ndarray:
    """(I1, I2, I3) -> (I1*I2, I3), column-major within each frame."""
    i1, i2, i3 = tensor.shape
    return tensor.reshape(i1 * i2, i3, order="F")


def unflatten_frames(X: np.ndarray, i1: int, i2: int) -> np.ndarray:
    """(I1*I2, I3) -> (I1, I2, I3); inverse of flatten_frames."""
    if X.shape[0] != i1 * i2:
        raise InputError(f"cannot unflatten {X.shape[0]} rows into {i1}x{i2}")
    return X.reshape(i1, i2, -1, order="F")


def fft2_frames(X: np.ndarray, i1: int, i2: int) -> np.ndarray:
    """Per-frame unnormalized 2D DFT, DC-centered, on the flattened layout."""
    cube = unflatten_frames(np.asarray(X, dtype=complex), i1, i2)
    spec = np.fft.fftshift(np.fft.fft2(cube, axes=(0, 1), norm="backward"), axes=(0, 1))
    return flatten_frames(spec)


def ifft2_frames(X: np.ndarray, i1: int, i2: int) -> np.ndarray:
    """Inverse of fft2_frames; carries the 1/(I1*I2) factor."""
    cube = unflatten_frames(np.asarray(X, dtype=complex), i1, i2)
    spec = np.fft.ifftshift(cube, axes=(0, 1))
    return flatten_frames(np.fft.ifft2(spec, axes=(0, 1), norm="backward"))


def dft_temporal(X: np.ndarray) -> np.ndarray:
    """Unnormalized DFT along each row (the time profile of one pixel)."""
    return np.fft.fft(np.asarray(X, dtype=complex), axis=1, norm="backward")


def idft_temporal(X: np.ndarray) -> np.ndarray:
    return np.fft.ifft(np.asarray(X, dtype=complex), axis=1, norm="backward")


@dataclass
class KtDataset:
    """Flattened k-space frames with dims, mask and optional ground truth."""

    kspace: np.ndarray  # (I1*I2) x I3
    dims: tuple[int, int, int]
    pattern: SamplingPattern | None = None
    ground_truth_image: np.ndarray | None = None


@dataclass
class PhantomParams:
    period: int | None = None  # pulsation period in frames; defaults to I3
    background: float = 0.6
    disk: float = 1.0
    pulse: float = 0.35  # rim modulation amplitude, relative to disk level
    disk_radius: float = 0.35
    edge_width: float = 0.06
    noise_snr_db: float | None = None
    seed: int = 0


def pulse_schedule(t: np.ndarray, period: int) -> np.ndarray:
    """Rim-modulation weight per frame; periodic with the given period."""
    return np.sin(2.0 * np.pi * np.asarray(t, dtype=float) / period)


def make_phantom(i1: int, i2: int, i3: int, params: PhantomParams | None = None) -> KtDataset:
    """Synthetic cine phantom: static background ellipse plus an inner disk
    whose rim expands and contracts sinusoidally (linearized radius
    pulsation), complex-valued with a smooth spatial phase.

    Every pixel's time profile is constant + one sinusoid, so its temporal
    DFT concentrates on at most three frequency bins when the period divides
    I3.  k-space is the exact per-frame 2D DFT of the stored ground truth.
    """
    if min(i1, i2, i3) < 8:
        raise InputError("phantom dims must each be at least 8")
    p = params or PhantomParams()
    period = p.period or i3

    rows = (np.arange(i1) - (i1 - 1) / 2.0) / (i1 / 2.0)
    cols = (np.arange(i2) - (i2 - 1) / 2.0) / (i2 / 2.0)
    u, v = np.meshgrid(rows, cols, indexing="ij")
    r = np.sqrt(u**2 + v**2)

    def smooth_step(x):  # ~1 for x >> 0, ~0 for x << 0
        return 0.5 * (1.0 + np.tanh(x / p.edge_width))

    ellipse = smooth_step(1.0 - np.sqrt((u / 0.92) ** 2 + (v / 0.78) ** 2))
    disk = smooth_step(p.disk_radius - r)
    rim = np.exp(-((r - p.disk_radius) ** 2) / (2.0 * p.edge_width**2))
    phase = np.exp(1j * (0.6 * u + 0.4 * v + 0.5 * u * v))

    static = (p.background * ellipse + p.disk * disk) * phase
    moving = (p.disk * p.pulse) * rim * phase

    w = pulse_schedule(np.arange(i3), period)
    cube = static[:, :, None] + moving[:, :, None] * w[None, None, :]
    truth = flatten_frames(cube.astype(complex))

    if p.noise_snr_db is not None:
        rng = np.random.default_rng(p.seed)
        signal = np.mean(np.abs(truth) ** 2)
        noise_var = signal / 10.0 ** (p.noise_snr_db / 10.0)
        noise = rng.standard_normal(truth.shape) + 1j * rng.standard_normal(truth.shape)
        truth = truth + np.sqrt(noise_var / 2.0) * noise

    return KtDataset(
        kspace=fft2_frames(truth, i1, i2),
        dims=(i1, i2, i3),
        ground_truth_image=truth,
    )


def save_kt(ds: KtDataset, path) -> None:
    """Raw complex128 binary with one JSON header line (dims + layout note)."""
    header = {
        "i1": ds.dims[0],
        "i2": ds.dims[1],
        "i3": ds.dims[2],
        "layout": "column-major frames, complex128, kspace then optional truth",
        "has_truth": ds.ground_truth_image is not None,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(np.ascontiguousarray(ds.kspace, dtype=np.complex128).tobytes())
        if ds.ground_truth_image is not None:
            fh.write(np.ascontiguousarray(ds.ground_truth_image, dtype=np.complex128).tobytes())


def load_kt(path) -> KtDataset:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        i1, i2, i3 = header["i1"], header["i2"], header["i3"]
        n = i1 * i2 * i3
        raw = fh.read()
    kspace = np.frombuffer(raw[: n * 16], dtype=np.complex128).reshape(i1 * i2, i3)
    truth = None
    if header["has_truth"]:
        truth = np.frombuffer(raw[n * 16 : 2 * n * 16], dtype=np.complex128).reshape(i1 * i2, i3)
    return KtDataset(kspace=kspace.copy(), dims=(i1, i2, i3),
                     ground_truth_image=None if truth is None else truth.copy())


def kt_to_csv(ds: KtDataset, path) -> None:
    """Human-readable export for small instances, entries as 're<+/-im>j'."""
    if ds.kspace.size > 65536:
        raise InputError("csv export is meant for small instances")
    with open(path, "w") as fh:
        fh.write(f"# dims={ds.dims}, column-major frames\n")
        for row in ds.kspace:
            fh.write(",".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in row) + "\n")
