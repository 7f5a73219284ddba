"""Programmable-aperture sensing model and measurement file format.

The aperture displays rows of a binary matrix A with entries (h + 1) / 2
where h are entries of the order-N Sylvester Hadamard matrix, so every
aperture pattern is 0/1.  A measurement of an image x (flattened row-major
and zero-padded to length N) is

    z[i] = (H x)[rows[i]] / 2 + sum(x) / 2

which we evaluate with an in-place fast Walsh-Hadamard transform instead
of materializing H.  Because Sylvester H is symmetric, the adjoint is the
same transform applied to the measurement vector scattered onto its rows.

Measurement sets are serialized in a small self-describing container
("MVM1"): a text header followed by little-endian binary payload, exact
enough to reproduce a run bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import SplitMix64, normal_stream


def fwht(x: np.ndarray) -> np.ndarray:
    """In-place fast Walsh-Hadamard transform in Sylvester (natural) order.

    Length must be a power of two.  Applying the transform twice scales by
    the length: fwht(fwht(x)) == len(x) * x.
    """
    n = x.shape[0]
    if n == 0 or n & (n - 1):
        raise ValueError("fwht length must be a power of two")
    h = 1
    while h < n:
        y = x.reshape(-1, 2 * h)
        a = y[:, :h]
        b = y[:, h:]
        t = a - b
        a += b
        b[...] = t
        h *= 2
    return x


@dataclass
class SensingSpec:
    """Which Hadamard rows the aperture cycles through for one acquisition."""

    order: int
    rows: np.ndarray
    seed: int
    pixel_count: int

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        n = self.order
        if n < 1 or n & (n - 1):
            raise ValueError("order must be a power of two")
        if not 1 <= self.pixel_count <= n:
            raise ValueError("pixel_count must lie in [1, order]")
        if self.rows.ndim != 1 or self.rows.size == 0:
            raise ValueError("rows must be a non-empty 1-D index array")
        if self.rows[0] != 0:
            raise ValueError("rows[0] must be 0 (the all-ones pattern)")
        if self.rows.min() < 0 or self.rows.max() >= n:
            raise ValueError("row indices must lie in [0, order)")
        if np.unique(self.rows).size != self.rows.size:
            raise ValueError("row indices must be distinct")

    @property
    def count(self) -> int:
        return int(self.rows.size)


def order_for_pixels(pixel_count: int) -> int:
    """Smallest power-of-two Hadamard order that covers pixel_count."""
    if pixel_count < 1:
        raise ValueError("pixel_count must be positive")
    return 1 << max(0, (pixel_count - 1).bit_length())


def select_rows(order: int, rate: float, seed: int) -> np.ndarray:
    """Choose ceil(rate * order) distinct Hadamard rows, row 0 always first.

    The remaining rows are drawn uniformly without replacement from
    [1, order) by a splitmix64-seeded Fisher-Yates shuffle over a lazily
    indexed range, so the selection depends only on (order, rate, seed).
    """
    if order < 1 or order & (order - 1):
        raise ValueError("order must be a power of two")
    if not 0.0 < rate <= 1.0:
        raise ValueError("rate must lie in (0, 1]")
    count = math.ceil(rate * order)
    if count < 1:
        raise ValueError("rate too small: no rows selected")
    rng = SplitMix64(seed)
    rows = np.empty(count, dtype=np.int64)
    rows[0] = 0
    # partial Fisher-Yates over the virtual array [1 .. order-1]
    state: dict[int, int] = {}
    n = order - 1
    for i in range(count - 1):
        j = i + rng.below(n - i)
        vi = state.get(i, i + 1)
        rows[i + 1] = state.get(j, j + 1)
        state[j] = vi
    return rows


# ---------------------------------------------------------------------------
# measuring
# ---------------------------------------------------------------------------

def _measure_flat(x: np.ndarray, spec: SensingSpec) -> np.ndarray:
    work = np.zeros(spec.order)
    work[: x.size] = x
    total = x.sum()
    fwht(work)
    return 0.5 * (work[spec.rows] + total)


def _adjoint_flat(v: np.ndarray, spec: SensingSpec) -> np.ndarray:
    work = np.zeros(spec.order)
    work[spec.rows] = v
    total = v.sum()
    fwht(work)
    return 0.5 * (work[: spec.pixel_count] + total)


def measure(image: np.ndarray, spec: SensingSpec) -> np.ndarray:
    """Apply the 0/1 aperture patterns to an image: z = A x."""
    img = np.asarray(image, dtype=np.float64)
    if img.size != spec.pixel_count:
        raise ValueError(
            f"image has {img.size} pixels but spec expects {spec.pixel_count}"
        )
    return _measure_flat(img.ravel(), spec)


def measure_adjoint(values: np.ndarray, spec: SensingSpec) -> np.ndarray:
    """Apply the transpose of the measurement map: x = A^T v (flattened)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size != spec.count:
        raise ValueError(
            f"got {v.size} values but spec selects {spec.count} rows"
        )
    return _adjoint_flat(v.ravel(), spec)


def add_noise(z: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Add iid Gaussian noise with std sigma * mean(|z|), per-seed exact."""
    if sigma < 0.0:
        raise ValueError("noise level must be >= 0")
    z = np.asarray(z, dtype=np.float64)
    if sigma == 0.0:
        return z.copy()
    scale = sigma * np.mean(np.abs(z))
    return z + scale * normal_stream(seed, z.size)


@dataclass
class MeasurementSet:
    """Per-sensor measurement vectors acquired with one shared row set."""

    spec: SensingSpec
    values: list = field(default_factory=list)  # one float64 vector per sensor
    width: int = 0
    height: int = 0
    rate: float = 0.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        self.values = [np.asarray(v, dtype=np.float64) for v in self.values]
        self.rate = float(self.rate)
        self.noise_sigma = float(self.noise_sigma)
        if not self.values:
            raise ValueError("measurement set needs at least one sensor")
        for v in self.values:
            if v.shape != (self.spec.count,):
                raise ValueError("each sensor vector must match the row count")
        if self.width * self.height != self.spec.pixel_count:
            raise ValueError("width*height must equal spec.pixel_count")
        if not 0.0 < self.rate <= 1.0:
            raise ValueError("rate must lie in (0, 1]")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")

    @property
    def sensor_count(self) -> int:
        return len(self.values)


# ---------------------------------------------------------------------------
# MVM1 container
# ---------------------------------------------------------------------------

_MVM_MAGIC = "MVM1"


def write_mvm(path, ms: MeasurementSet) -> None:
    """Serialize a measurement set: text header, then row indices as
    little-endian u32 and per-sensor values as little-endian f64."""
    header = (
        f"{_MVM_MAGIC}\n"
        f"order={ms.spec.order}\n"
        f"rate={ms.rate!r}\n"
        f"seed={ms.spec.seed}\n"
        f"rows={ms.spec.count}\n"
        f"sensors={ms.sensor_count}\n"
        f"width={ms.width}\n"
        f"height={ms.height}\n"
        f"noise_sigma={ms.noise_sigma!r}\n"
        "\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(ms.spec.rows.astype("<u4").tobytes())
        for v in ms.values:
            fh.write(v.astype("<f8").tobytes())


def read_mvm(path) -> MeasurementSet:
    """Read a measurement set written by write_mvm."""
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.find(b"\n\n")
    if end < 0:
        raise ValueError("missing MVM1 header terminator")
    lines = data[:end].decode("ascii").split("\n")
    if lines[0] != _MVM_MAGIC:
        raise ValueError(f"not an MVM1 file (magic {lines[0]!r})")
    fields = {}
    for line in lines[1:]:
        key, _, value = line.partition("=")
        if not _:
            raise ValueError(f"malformed MVM1 header line {line!r}")
        fields[key] = value
    order = int(fields["order"])
    count = int(fields["rows"])
    sensors = int(fields["sensors"])
    width = int(fields["width"])
    height = int(fields["height"])
    pos = end + 2
    if len(data) - pos < count * (4 + 8 * sensors):
        raise ValueError("MVM1 payload truncated")
    rows = np.frombuffer(data, dtype="<u4", count=count, offset=pos).astype(np.int64)
    pos += 4 * count
    values = []
    for _ in range(sensors):
        values.append(np.frombuffer(data, dtype="<f8", count=count, offset=pos).copy())
        pos += 8 * count
    spec = SensingSpec(order=order, rows=rows, seed=int(fields["seed"]),
                       pixel_count=width * height)
    return MeasurementSet(spec=spec, values=values, width=width, height=height,
                          rate=float(fields["rate"]),
                          noise_sigma=float(fields["noise_sigma"]))
