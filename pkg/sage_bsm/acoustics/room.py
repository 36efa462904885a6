"""
Shoebox image-method simulation of array measurements and SH-domain
reference signals, plus room statistics.
"""
import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import sparse, stats
from scipy.signal import butter, fftconvolve, sosfilt

from sage_bsm.acoustics.sph import sh_matrix
from sage_bsm.exceptions import (
    DimensionMismatchError,
    InsufficientDecayError,
    OutsideRoomError,
    SceneError,
)
from sage_bsm.helpers import ImageSourceList, MicSignals, RoomSpec, Scene, ShSignal

logger = logging.getLogger(__name__)

TAPS = 32
_TAP_OFFSETS = np.arange(-(TAPS // 2) + 1, TAPS // 2 + 1)
_CHUNK = 2048


def _axis_lattice(max_order: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-axis ``(p, r)`` pairs with reflection count ``|2r − p| ≤ max_order``."""
    r = np.repeat(np.arange(-max_order, max_order + 1), 2)
    p = np.tile(np.array([0, 1]), 2 * max_order + 1)
    q = np.abs(2 * r - p)
    keep = q <= max_order
    r, p, q = r[keep], p[keep], q[keep]
    order = np.lexsort((r, p, q))
    return p[order], r[order], q[order]


class _ImageLattice:
    """Receiver-independent part of the image enumeration."""

    def __init__(self, room: RoomSpec, source: Sequence[float], max_order: int) -> None:
        p, r, q = _axis_lattice(max_order)
        ix, iy, iz = np.meshgrid(
            np.arange(q.size), np.arange(q.size), np.arange(q.size), indexing="ij"
        )
        ix, iy, iz = ix.ravel(), iy.ravel(), iz.ravel()
        total = q[ix] + q[iy] + q[iz]
        keep = total <= max_order
        ix, iy, iz, total = ix[keep], iy[keep], iz[keep], total[keep]
        rank = np.argsort(total, kind="stable")
        ix, iy, iz, total = ix[rank], iy[rank], iz[rank], total[rank]

        origin = np.asarray(room.origin)
        local = np.asarray(source, dtype=float) - origin
        dimensions = np.asarray(room.dimensions)
        beta = np.asarray(room.reflection_coefficients).reshape(3, 2)
        positions = np.empty((total.size, 3))
        reflection = np.ones(total.size)
        for axis, index in enumerate((ix, iy, iz)):
            pa, ra = p[index], r[index]
            positions[:, axis] = (
                origin[axis] + (1 - 2 * pa) * local[axis] + 2 * ra * dimensions[axis]
            )
            reflection *= beta[axis, 0] ** np.abs(ra - pa) * beta[axis, 1] ** np.abs(ra)
        self.positions = positions
        self.reflection = reflection
        self.orders = total

    def __len__(self) -> int:
        return int(self.orders.size)

    def as_seen_from(
        self, receiver: Sequence[float], speed_of_sound: float
    ) -> ImageSourceList:
        receiver = tuple(float(v) for v in receiver)
        distances = np.linalg.norm(self.positions - np.asarray(receiver), axis=1)
        return ImageSourceList(
            self.positions,
            self.reflection / (4.0 * np.pi * distances),
            distances / speed_of_sound,
            self.orders,
            receiver,  # type: ignore[arg-type]
        )


def _check_inside(room: RoomSpec, point: Sequence[float], name: str) -> None:
    if not room.contains(point):
        raise OutsideRoomError(f"{name} {tuple(point)} is not inside the room")


def compute_image_sources(
    room: RoomSpec,
    source: Sequence[float],
    receiver_point: Sequence[float],
    max_order: Optional[int] = None,
) -> ImageSourceList:
    """
    Enumerate the image sources of a shoebox room up to a total reflection order.

    Along each axis an image is ``origin + (1 − 2p)(s − origin) + 2rL``; it
    has met the wall through the origin ``|r − p|`` times and the opposite
    wall ``|r|`` times. Its gain is the product of the met reflection
    coefficients over ``4πd``. Images are sorted by order, the true source
    first.

    Args:
        room (RoomSpec): The room.
        source (tuple): Source position.
        receiver_point (tuple): Receiver position.
        max_order (int, optional): Defaults to ``room.max_order``.

    Returns:
        ImageSourceList: Images with gains, delays and orders.

    Raises:
        OutsideRoomError: If the source or receiver lies outside the room.

    Example:
        images = compute_image_sources(room, (2.0, 1.5, 1.2), (1.0, 1.2, 1.3), 0)
        images.gains[0]  # 1 / (4π d)
    """
    order = room.max_order if max_order is None else int(max_order)
    if order < 0:
        raise SceneError("max_order must be non-negative")
    _check_inside(room, source, "source")
    _check_inside(room, receiver_point, "receiver")
    lattice = _ImageLattice(room, source, order)
    return lattice.as_seen_from(receiver_point, room.speed_of_sound)


def fractional_delay_taps(delays: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample indices and weights of 32-tap Hann-windowed sinc delays.

    Args:
        delays (np.ndarray): Delays in samples, shape (I,).

    Returns:
        tuple: Integer indices and weights, both shaped (I, 32).
    """
    delays = np.asarray(delays, dtype=float)
    base = np.floor(delays)
    t = _TAP_OFFSETS[np.newaxis, :] - (delays - base)[:, np.newaxis]
    weights = np.sinc(t) * 0.5 * (1.0 + np.cos(np.pi * t / (TAPS // 2)))
    indices = base.astype(np.int64)[:, np.newaxis] + _TAP_OFFSETS[np.newaxis, :]
    return indices, weights


def _tap_extent(images: ImageSourceList, sample_rate: int) -> int:
    if len(images) == 0:
        return 0
    return int(np.floor(images.delays.max() * sample_rate)) + TAPS // 2 + 1


def _accumulate(images: ImageSourceList, sample_rate: int, length: int) -> np.ndarray:
    if len(images) == 0:
        return np.zeros(length)
    indices, weights = fractional_delay_taps(images.delays * sample_rate)
    weights = weights * images.gains[:, np.newaxis]
    keep = (indices >= 0) & (indices < length)
    return np.bincount(indices[keep], weights=weights[keep], minlength=length)[:length]


def scene_rir_length(scene: Scene, max_order: Optional[int] = None) -> int:
    """Common RIR length covering every microphone and the array centre."""
    order = scene.room.max_order if max_order is None else max_order
    lattice = _ImageLattice(scene.room, scene.source_position, order)
    receivers = np.vstack(
        [scene.array.absolute_positions, [scene.array.center_position]]
    )
    extent = 1
    for receiver in receivers:
        images = lattice.as_seen_from(receiver, scene.room.speed_of_sound)
        extent = max(extent, _tap_extent(images, scene.sample_rate))
    return extent


def room_impulse_response(
    room: RoomSpec,
    source: Sequence[float],
    receiver: Sequence[float],
    sample_rate: int,
    direct_only: bool = False,
    length: Optional[int] = None,
    max_order: Optional[int] = None,
) -> np.ndarray:
    """
    Omni RIR from ``source`` to ``receiver``.

    ``direct_only`` keeps the order-0 image alone; ``length`` defaults to
    the extent of the full response.
    """
    images = compute_image_sources(room, source, receiver, max_order)
    size = length if length is not None else max(_tap_extent(images, sample_rate), 1)
    if direct_only:
        images = images.direct()
    return _accumulate(images, sample_rate, size)


def array_impulse_responses(
    scene: Scene, max_order: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Direct and reflection-only RIRs of every microphone, each (M, T)."""
    order = scene.room.max_order if max_order is None else max_order
    lattice = _ImageLattice(scene.room, scene.source_position, order)
    length = scene_rir_length(scene, order)
    direct = np.zeros((scene.array.count, length))
    reverberant = np.zeros((scene.array.count, length))
    for mic, receiver in enumerate(scene.array.absolute_positions):
        images = lattice.as_seen_from(receiver, scene.room.speed_of_sound)
        direct[mic] = _accumulate(images.direct(), scene.sample_rate, length)
        reverberant[mic] = _accumulate(images.reflections(), scene.sample_rate, length)
    return direct, reverberant


def _convolve_rows(signal: np.ndarray, responses: np.ndarray) -> np.ndarray:
    out = np.zeros((responses.shape[0], signal.size + responses.shape[1] - 1))
    for row, response in enumerate(responses):
        if np.any(response):
            out[row] = fftconvolve(signal, response)
    return out


def render_mic_signals(scene: Scene, max_order: Optional[int] = None) -> MicSignals:
    """
    Simulate the microphone signals of ``scene``.

    The direct part convolves the source with the order-0 image alone, the
    reverberant part with all other images; sensor noise is drawn from
    ``scene.seed`` when ``scene.noise_snr`` is finite. ``full`` is their sum.

    Example:
        signals = render_mic_signals(scene)
        np.array_equal(signals.full - signals.direct - signals.noise,
                       signals.reverberant)
    """
    order = scene.room.max_order if max_order is None else max_order
    logger.info(
        "Rendering %s microphone signals with image order %s", scene.array.count, order
    )
    rir_direct, rir_reverberant = array_impulse_responses(scene, order)
    direct = _convolve_rows(scene.source_signal, rir_direct)
    reverberant = _convolve_rows(scene.source_signal, rir_reverberant)
    noise = generate_noise(direct + reverberant, scene.noise_snr, scene.seed)
    return MicSignals(direct, reverberant, noise, scene.sample_rate)


def render_reference_plane_waves(
    scene: Scene,
    sh_order: int,
    max_order: Optional[int] = None,
    part: str = "full",
) -> ShSignal:
    """
    SH-domain signal of the sound field at the array centre.

    Each image contributes ``g·s(t − τ)·conj(Y_n^m(d))`` where ``d`` is its
    arrival direction at the centre.

    Args:
        scene (Scene): The scene.
        sh_order (int): SH order of the encoding.
        max_order (int, optional): Image order; defaults to the room's.
        part (str): ``"full"``, ``"direct"`` (order-0 image only) or
            ``"reverberant"`` (all other images).

    Returns:
        ShSignal: Same length as the microphone signals of the scene.
    """
    if sh_order < 0:
        raise SceneError(f"SH order must be non-negative, got {sh_order}")
    order = scene.room.max_order if max_order is None else max_order
    images = _ImageLattice(scene.room, scene.source_position, order).as_seen_from(
        scene.array.center_position, scene.room.speed_of_sound
    )
    if part == "direct":
        images = images.direct()
    elif part == "reverberant":
        images = images.reflections()
    elif part != "full":
        raise SceneError(f"unknown reference part {part!r}")
    length = scene.source_signal.size + scene_rir_length(scene, order) - 1
    logger.info(
        "Encoding %s images at SH order %s (%s part)", len(images), sh_order, part
    )
    if len(images) == 0:
        return ShSignal.silent(sh_order, scene.source_signal, length, scene.sample_rate)

    indices, weights = fractional_delay_taps(images.delays * scene.sample_rate)
    weights = weights * images.gains[:, np.newaxis]
    valid = indices >= 0
    start = int(indices[valid].min())
    rows = int(indices[valid].max()) - start + 1
    channels = (sh_order + 1) ** 2
    rir = np.zeros((rows, channels), dtype=np.complex128)
    colatitudes, azimuths = images.colatitudes, images.azimuths
    for first in range(0, len(images), _CHUNK):
        chunk = slice(first, min(first + _CHUNK, len(images)))
        chunk_indices = indices[chunk]
        chunk_valid = valid[chunk]
        columns = np.broadcast_to(
            np.arange(chunk_indices.shape[0])[:, np.newaxis], chunk_indices.shape
        )
        taps = sparse.csr_matrix(
            (
                weights[chunk][chunk_valid],
                (chunk_indices[chunk_valid] - start, columns[chunk_valid]),
            ),
            shape=(rows, chunk_indices.shape[0]),
        )
        encoding = np.conj(sh_matrix(sh_order, colatitudes[chunk], azimuths[chunk]))
        rir += taps @ encoding
    return ShSignal(
        rir, start, scene.source_signal, length, sh_order, scene.sample_rate
    )


def generate_noise(signals: np.ndarray, snr: float, seed: int = 0) -> np.ndarray:
    """
    White Gaussian noise with per-channel power ``P_channel / snr``.

    ``snr = inf`` yields zeros. The draw depends only on ``seed`` and the
    shape of ``signals``.
    """
    signals = np.atleast_2d(signals)
    if not snr > 0.0:
        raise SceneError(f"noise SNR must be positive, got {snr}")
    if math.isinf(snr):
        return np.zeros_like(signals, dtype=float)
    power = np.mean(np.abs(signals) ** 2, axis=1, keepdims=True)
    rng = np.random.default_rng(seed)
    return rng.standard_normal(signals.shape) * np.sqrt(power / snr)


def add_noise(signals: np.ndarray, snr: float, seed: int = 0) -> np.ndarray:
    """
    Add seeded white Gaussian sensor noise at a per-channel SNR.

    Example:
        noisy = add_noise(signals.full, snr=100.0, seed=7)
    """
    signals = np.atleast_2d(np.asarray(signals, dtype=float))
    if math.isinf(snr):
        return signals.copy()
    return signals + generate_noise(signals, snr, seed)


def compute_drr(full_rir: np.ndarray, direct_rir: np.ndarray) -> float:
    """
    Direct-to-reverberant ratio in dB.

    Returns ``math.inf`` when the reverberant part has no energy.

    Raises:
        DimensionMismatchError: If the RIRs differ in length.
    """
    full_rir = np.asarray(full_rir, dtype=float)
    direct_rir = np.asarray(direct_rir, dtype=float)
    if full_rir.shape != direct_rir.shape:
        raise DimensionMismatchError(
            f"RIRs differ in shape: {full_rir.shape} vs {direct_rir.shape}"
        )
    direct_energy = float(np.sum(direct_rir**2))
    reverberant_energy = float(np.sum((full_rir - direct_rir) ** 2))
    if reverberant_energy == 0.0:
        logger.info("Reverberant energy is zero, DRR is +inf")
        return math.inf
    if direct_energy == 0.0:
        return -math.inf
    return 10.0 * math.log10(direct_energy / reverberant_energy)


def energy_decay_curve(rir: np.ndarray) -> np.ndarray:
    """Schroeder backward integral in dB relative to the total energy."""
    power = np.asarray(rir, dtype=float) ** 2
    energy = np.cumsum(power[::-1])[::-1]
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(energy / energy[0])


def estimate_t60(rir: np.ndarray, sample_rate: int) -> float:
    """
    Reverberation time from the Schroeder decay.

    A line is fitted to the decay between −5 and −25 dB and the resulting
    20 dB decay time is multiplied by three.

    Raises:
        InsufficientDecayError: If the decay never reaches −40 dB or too
            few samples fall inside the fit range.
    """
    rir = np.asarray(rir, dtype=float)
    if rir.size == 0 or not np.any(rir):
        raise InsufficientDecayError("RIR has no energy")
    curve = energy_decay_curve(rir)
    if curve.min() > -40.0:
        raise InsufficientDecayError(
            f"RIR decays only {-curve.min():.1f} dB, at least 40 dB are needed"
        )
    fit = np.flatnonzero((curve <= -5.0) & (curve >= -25.0))
    if fit.size < 2:
        raise InsufficientDecayError("too few samples between -5 and -25 dB")
    slope, *_ = stats.linregress(fit / float(sample_rate), curve[fit])
    if not slope < 0.0:
        raise InsufficientDecayError("decay curve does not fall")
    return 3.0 * (-20.0 / slope)


def synthesize_source(duration: float, sample_rate: int, seed: int = 0) -> np.ndarray:
    """
    Deterministic speech-shaped noise.

    White Gaussian noise is band limited to 80 Hz – 0.45·fs, tilted by a
    first-order low-pass at 500 Hz and scaled to a 0.5 peak.
    """
    count = int(round(duration * sample_rate))
    if count <= 0:
        raise SceneError(f"source duration must be positive, got {duration}")
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(count)
    band = butter(
        4, [80.0, 0.45 * sample_rate], btype="bandpass", fs=sample_rate, output="sos"
    )
    tilt = butter(1, 500.0, btype="lowpass", fs=sample_rate, output="sos")
    shaped = sosfilt(tilt, sosfilt(band, white))
    return 0.5 * shaped / np.max(np.abs(shaped))
