"""Forward models: abstract linear operator A, its four variants, and
Poisson measurement simulation.

Every model applies a positive scalar `scale` multiplicatively to A and
carries a nonnegative mean background vector b, so the measurement mean is
|scale * (A x)_i|^2 + b_i.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field

import numpy as np
from numpy.typing import NDArray


class FieldTag(enum.Enum):
    """Field the unknown signal lives in."""

    REAL = "real"
    COMPLEX = "complex"
    REAL_NONNEGATIVE = "real_nonnegative"

    @property
    def is_real(self) -> bool:
        return self is not FieldTag.COMPLEX


@dataclass
class SignalVector:
    """The unknown signal with its field tag and optional image shape."""

    values: NDArray
    field: FieldTag = FieldTag.COMPLEX
    dims: tuple[int, int] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("signal must be a nonempty 1D vector")
        if self.field.is_real and np.max(np.abs(self.values.imag)) > 1e-12:
            raise ValueError("real-field signal has nonzero imaginary part")
        if self.field is FieldTag.REAL_NONNEGATIVE and np.min(self.values.real) < 0:
            raise ValueError("nonnegative-field signal has negative entries")

    @property
    def n(self) -> int:
        return self.values.size


def project_field(x: NDArray, field: FieldTag) -> NDArray:
    """Project an iterate onto its field: realify, clamp negatives."""
    if field is FieldTag.COMPLEX:
        return x
    x = x.real.astype(complex)
    if field is FieldTag.REAL_NONNEGATIVE:
        x = np.maximum(x.real, 0.0).astype(complex)
    return x


class ForwardModel:
    """Base class: linear map with scale factor, background, and an optional
    fixed additive offset (the known reference in the canonical-DFT model).

    `apply` returns the scaled field including the offset; `apply_linear`
    and `adjoint` are the exact linear/adjoint pair used in all gradient and
    quadratic-form computations.
    """

    rows: int
    cols: int

    def __init__(
        self,
        rows: int,
        cols: int,
        background=0.0,
        scale: float = 1.0,
        offset_raw: NDArray | None = None,
    ):
        if rows < 1 or cols < 1:
            raise ValueError(f"bad operator shape ({rows}, {cols})")
        self.rows = rows
        self.cols = cols
        self.scale = float(scale)
        b = np.broadcast_to(np.asarray(background, dtype=float), (rows,)).copy()
        if np.any(b < 0) or not np.all(np.isfinite(b)):
            raise ValueError("background must be finite and nonnegative")
        self.background = b
        self.offset_raw = None if offset_raw is None else np.asarray(offset_raw, complex)

    # subclasses implement the unscaled linear map
    def _apply(self, x: NDArray) -> NDArray:
        raise NotImplementedError

    def _adjoint(self, v: NDArray) -> NDArray:
        raise NotImplementedError

    def _check_x(self, x) -> NDArray:
        x = np.asarray(x)
        if x.shape != (self.cols,):
            raise ValueError(
                f"apply: x has shape {x.shape}, operator expects ({self.cols},)"
            )
        return x.astype(complex)

    def apply(self, x: NDArray) -> NDArray:
        """Scaled field c * (A x), including the fixed offset if present."""
        out = self._apply(self._check_x(x))
        if self.offset_raw is not None:
            out = out + self.offset_raw
        return self.scale * out

    def apply_linear(self, x: NDArray) -> NDArray:
        """Scaled linear part only; the Jacobian action."""
        return self.scale * self._apply(self._check_x(x))

    def adjoint(self, v: NDArray) -> NDArray:
        v = np.asarray(v)
        if v.shape != (self.rows,):
            raise ValueError(
                f"adjoint: v has shape {v.shape}, operator expects ({self.rows},)"
            )
        return self.scale * self._adjoint(v.astype(complex))

    def intensities(self, x: NDArray) -> NDArray:
        """Measurement means |c (A x)_i|^2 + b_i."""
        return np.abs(self.apply(x)) ** 2 + self.background

    def normal_diag(self) -> NDArray | None:
        """Diagonal of A'A (including scale) when A'A is diagonal, else None."""
        return None

    def densify(self) -> NDArray:
        """Explicit (rows, cols) matrix of the linear part, for small-N oracles."""
        cols = []
        for j in range(self.cols):
            e = np.zeros(self.cols, dtype=complex)
            e[j] = 1.0
            cols.append(self.apply_linear(e))
        return np.stack(cols, axis=1)


class DenseModel(ForwardModel):
    """Explicit matrix model (random Gaussian or file-ingested)."""

    def __init__(self, entries: NDArray, background=0.0, scale: float = 1.0):
        entries = np.asarray(entries, dtype=complex)
        if entries.ndim != 2:
            raise ValueError("dense model needs a 2D matrix")
        if not np.all(np.isfinite(entries.view(float))):
            raise ValueError("dense model entries must be finite")
        super().__init__(entries.shape[0], entries.shape[1], background, scale)
        self.entries = entries

    def _apply(self, x):
        return self.entries @ x

    def _adjoint(self, v):
        return self.entries.conj().T @ v


def random_gaussian_model(
    rows: int, cols: int, seed: int = 0, background=0.0
) -> DenseModel:
    """Complex random Gaussian system matrix, entries CN(0, 1)."""
    rng = np.random.default_rng(seed)
    a = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols)))
    return DenseModel(a / np.sqrt(2.0), background=background)


class CanonicalDftModel(ForwardModel):
    """2D DFT of the horizontal concatenation [x, 0, reference].

    The unknown image x and the known reference share the height; the zero
    block defaults to the width of x. The DFT is the unnormalized forward
    transform, optionally zero-padded to `fft_dims`.
    """

    def __init__(
        self,
        image_dims: tuple[int, int],
        reference: NDArray,
        pad_width: int | None = None,
        fft_dims: tuple[int, int] | None = None,
        background=0.0,
        scale: float = 1.0,
    ):
        h, w = image_dims
        reference = np.asarray(reference, dtype=float)
        if reference.ndim != 2 or reference.shape[0] != h:
            raise ValueError("reference height must match image height")
        if np.any(reference < 0):
            raise ValueError("reference must be nonnegative")
        self.image_dims = (h, w)
        self.reference = reference
        self.pad_width = w if pad_width is None else int(pad_width)
        concat_w = w + self.pad_width + reference.shape[1]
        self.concat_dims = (h, concat_w)
        self.fft_dims = self.concat_dims if fft_dims is None else tuple(fft_dims)
        if self.fft_dims[0] < h or self.fft_dims[1] < concat_w:
            raise ValueError("fft_dims smaller than the concatenated image")
        ref_img = np.zeros(self.concat_dims, dtype=complex)
        ref_img[:, w + self.pad_width:] = reference
        offset = np.fft.fft2(ref_img, s=self.fft_dims).ravel()
        super().__init__(
            self.fft_dims[0] * self.fft_dims[1], h * w, background, scale, offset
        )

    def _apply(self, x):
        h, w = self.image_dims
        img = np.zeros(self.concat_dims, dtype=complex)
        img[:, :w] = x.reshape(h, w)
        return np.fft.fft2(img, s=self.fft_dims).ravel()

    def _adjoint(self, v):
        h, w = self.image_dims
        m = self.rows
        full = np.fft.ifft2(v.reshape(self.fft_dims)) * m  # conjugate DFT kernel
        return full[:h, :w].ravel()

    def reference_only_spectrum(self) -> NDArray:
        """Scaled DFT magnitudes with x = 0, i.e. the reference alone."""
        return self.apply(np.zeros(self.cols, dtype=complex))

    def normal_diag(self):
        return np.full(self.cols, self.scale**2 * self.rows)


class MaskedDftModel(ForwardModel):
    """Oversampled 1D DFT of mask-weighted copies of x.

    Row block l is the length-(2N-1) DFT of D_l * x; the stacked system has
    M = L * (2N - 1) rows.
    """

    def __init__(self, masks: NDArray, background=0.0, scale: float = 1.0):
        masks = np.asarray(masks, dtype=float)
        if masks.ndim != 2:
            raise ValueError("masks must be an (L, N) array")
        self.masks = masks
        self.num_masks, n = masks.shape
        self.n_tilde = 2 * n - 1
        super().__init__(self.num_masks * self.n_tilde, n, background, scale)

    def _apply(self, x):
        return np.fft.fft(self.masks * x[None, :], n=self.n_tilde, axis=1).ravel()

    def _adjoint(self, v):
        blocks = v.reshape(self.num_masks, self.n_tilde)
        w = np.fft.ifft(blocks, axis=1) * self.n_tilde
        return np.sum(self.masks * w[:, : self.cols], axis=0)

    def normal_diag(self):
        return self.scale**2 * self.n_tilde * np.sum(self.masks**2, axis=0)


def make_masks(
    num_masks: int, n: int, seed: int = 0, exact_half: bool = False
) -> NDArray:
    """Binary sampling masks: first all-ones, the rest at rate 0.5."""
    rng = np.random.default_rng(seed)
    masks = np.ones((num_masks, n))
    for l in range(1, num_masks):
        if exact_half:
            idx = rng.permutation(n)[: n // 2]
            row = np.zeros(n)
            row[idx] = 1.0
            masks[l] = row
        else:
            masks[l] = (rng.random(n) < 0.5).astype(float)
    return masks


def load_file_matrix(path: str, background=0.0) -> DenseModel:
    """Dense model from CSV: header "M,N", then rows of "re:im" entries."""
    with open(path, "r") as f:
        header = f.readline().strip()
        try:
            m, n = (int(t) for t in header.split(","))
        except ValueError as exc:
            raise ValueError(f"bad file-matrix header {header!r}") from exc
        entries = np.zeros((m, n), dtype=complex)
        for i in range(m):
            line = f.readline()
            if not line:
                raise ValueError(f"file matrix ended early at row {i}")
            parts = line.strip().split(",")
            if len(parts) != n:
                raise ValueError(f"row {i} has {len(parts)} entries, expected {n}")
            for j, p in enumerate(parts):
                re, im = p.split(":")
                entries[i, j] = float(re) + 1j * float(im)
    return DenseModel(entries, background=background)


def save_file_matrix(path: str, entries: NDArray) -> None:
    entries = np.asarray(entries, dtype=complex)
    m, n = entries.shape
    with open(path, "w") as f:
        f.write(f"{m},{n}\n")
        for row in entries:
            f.write(",".join(f"{z.real:.17g}:{z.imag:.17g}" for z in row) + "\n")


def load_pgm(path: str) -> NDArray:
    """Grayscale PGM (P2 or P5) as a float image normalized to [0, 1]."""
    with open(path, "rb") as f:
        data = f.read()
    tokens = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        # skip whitespace and comments
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    magic = tokens[0].decode()
    if magic not in ("P2", "P5"):
        raise ValueError(f"not a PGM file: magic {magic!r}")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == "P5":
        i += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.uint8
        img = np.frombuffer(data, dtype=dtype, count=w * h, offset=i)
    else:
        img = np.array(data[i:].split()[: w * h], dtype=float)
    return img.reshape(h, w).astype(float) / float(maxval)


@dataclass
class MeasurementSet:
    """Poisson counts with their generating seed and realized mean."""

    y: NDArray
    seed: int
    mean_count: float = dc_field(default=0.0)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if np.any(self.y < 0):
            raise ValueError("measurements must be nonnegative")
        self.mean_count = float(np.mean(self.y))


def calibrate_scale(
    model: ForwardModel, x_true: NDArray, target_mean: float
) -> float:
    """Set model.scale so the exact mean intensity equals target_mean."""
    if target_mean <= 0:
        raise ValueError("target mean count must be positive")
    raw = model._apply(np.asarray(x_true, dtype=complex))
    if model.offset_raw is not None:
        raw = raw + model.offset_raw
    m2 = float(np.mean(np.abs(raw) ** 2))
    mb = float(np.mean(model.background))
    if m2 == 0.0:
        if np.isclose(target_mean, mb):
            model.scale = 0.0
            return 0.0
        raise ValueError("A x_true = 0: target mean unattainable by scaling")
    if target_mean < mb:
        raise ValueError(
            f"target mean {target_mean} below mean background {mb}"
        )
    c = float(np.sqrt((target_mean - mb) / m2))
    model.scale = c
    return c


def simulate_poisson(model: ForwardModel, x_true: NDArray, seed: int) -> MeasurementSet:
    """Draw y_i ~ Poisson(|c (A x)_i|^2 + b_i), reproducibly."""
    mean = model.intensities(np.asarray(x_true, dtype=complex))
    assert np.all(mean >= 0)
    rng = np.random.default_rng(seed)
    y = rng.poisson(mean).astype(float)
    return MeasurementSet(y=y, seed=seed)
