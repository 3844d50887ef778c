"""Image I/O, grid graphs with similarity weights, noise synthesis, metrics.

Pixels are float64 in [0, 1] on load; noisy intermediates may leave that
range and are only clipped for metric computation and saving, so the solver
sees genuinely Gaussian noise.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .graph import Graph
from .solver import SolverConfig, glr_denoise, gtv_denoise, ncgtv_denoise


class ImageFormatError(ValueError):
    """Malformed or unsupported image file."""


@dataclass(frozen=True)
class Image:
    """Float image, (H, W) for grayscale or (H, W, 3) for color."""

    data: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.data, dtype=np.float64)
        if d.ndim == 3 and d.shape[2] == 1:
            d = d[:, :, 0]
        if d.ndim not in (2, 3) or (d.ndim == 3 and d.shape[2] != 3):
            raise ValueError("image must be (H, W) or (H, W, 3)")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("empty image")
        object.__setattr__(self, "data", d)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return 1 if self.data.ndim == 2 else 3

    def clipped(self):
        """Copy with pixels clamped to [0, 1] (for metrics and saving)."""
        return Image(np.clip(self.data, 0.0, 1.0))

    def luminance(self):
        """Rec. 601 luma plane; identity for grayscale."""
        if self.channels == 1:
            return self.data
        return self.data @ np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class FeatureConfig:
    """Pixel features are (intensity, row/height, col/width); edge weights
    are exp(-d) with d the diagonal-metric squared feature distance.  Pixels
    within Chebyshev distance ``window_radius`` are connected."""

    window_radius: int = 1
    metric_diag: tuple = (8.0, 1.0, 1.0)

    def __post_init__(self):
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")
        if len(self.metric_diag) != 3 or any(m < 0 for m in self.metric_diag):
            raise ValueError("metric_diag needs 3 nonnegative weights")


def grid_graph(plane, fc: FeatureConfig) -> Graph:
    """Similarity graph of a single-channel plane.

    Nodes are pixels in row-major order; edge (i, j) with i < j gets weight
    exp(-(m0 dI^2 + m1 (dr/H)^2 + m2 (dc/W)^2)).
    """
    if isinstance(plane, Image):
        if plane.channels != 1:
            raise ValueError("grid_graph needs a single-channel plane")
        plane = plane.data
    plane = np.ascontiguousarray(plane, dtype=np.float64)
    if plane.ndim != 2 or plane.size == 0:
        raise ValueError("grid_graph needs a nonempty 2-d plane")
    h, w = plane.shape
    m0, m1, m2 = fc.metric_diag
    r = fc.window_radius
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    ei, ej, ew = [], [], []
    for dr in range(0, r + 1):
        for dc in range(-r, r + 1):
            if dr == 0 and dc <= 0:
                continue  # canonical half-neighborhood keeps i < j
            c0 = max(0, -dc)
            c1 = w - max(0, dc)
            if dr >= h or c0 >= c1:
                continue
            src = idx[: h - dr, c0:c1]
            dst = idx[dr:, c0 + dc : c1 + dc]
            di = plane[: h - dr, c0:c1] - plane[dr:, c0 + dc : c1 + dc]
            d = m0 * di * di + m1 * (dr / h) ** 2 + m2 * (dc / w) ** 2
            ei.append(src.ravel())
            ej.append(dst.ravel())
            ew.append(np.exp(-d).ravel())
    if not ei:
        return Graph.from_edges(h * w, [])
    return Graph(h * w, np.concatenate(ei), np.concatenate(ej), np.concatenate(ew))


def add_awgn(img: Image, sigma: float, seed: int) -> Image:
    """Additive white Gaussian noise with sigma on the 8-bit (0-255) scale.

    Deterministic for a given seed; the result is intentionally not clipped.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return Image(img.data.copy())
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(img.data.shape) * (sigma / 255.0)
    return Image(img.data + noise)


def psnr_values(a, b, peak: float = 1.0) -> float:
    """PSNR between two arrays; +inf when they are identical."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / mse))


def psnr(a: Image, b: Image, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB."""
    return psnr_values(a.data, b.data, peak)


def _gaussian_kernel(sigma=1.5, radius=5):
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def _filter_valid(plane, k):
    out = sliding_window_view(plane, k.size, axis=0) @ k
    return sliding_window_view(out, k.size, axis=1) @ k


def _ssim_plane(x, y, data_range, k1, k2, sigma, radius):
    kern = _gaussian_kernel(sigma, radius)
    ux = _filter_valid(x, kern)
    uy = _filter_valid(y, kern)
    vx = _filter_valid(x * x, kern) - ux * ux
    vy = _filter_valid(y * y, kern) - uy * uy
    vxy = _filter_valid(x * y, kern) - ux * uy
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    return float(np.mean(s))


def ssim(a: Image, b: Image, data_range: float = 1.0) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Local statistics are Gaussian-weighted moments; channels of color images
    are scored independently and averaged.
    """
    if a.data.shape != b.data.shape:
        raise ValueError("shape mismatch")
    radius = 5
    if min(a.height, a.width) < 2 * radius + 1:
        raise ValueError("image smaller than the 11x11 SSIM window")
    if a.channels == 1:
        return _ssim_plane(a.data, b.data, data_range, 0.01, 0.03, 1.5, radius)
    vals = [
        _ssim_plane(a.data[:, :, c], b.data[:, :, c], data_range, 0.01, 0.03, 1.5, radius)
        for c in range(3)
    ]
    return float(np.mean(vals))


def synth_pwc(n: int, num_pieces: int, amplitude_range, seed: int):
    """Piecewise-constant 1-d signal with num_pieces - 1 breakpoints.

    Breakpoints are distinct, every piece is nonempty and consecutive pieces
    always differ; deterministic per seed.
    """
    if not 1 <= num_pieces <= n:
        raise ValueError("need 1 <= num_pieces <= n")
    lo, hi = amplitude_range
    rng = np.random.default_rng(seed)
    cuts = np.sort(rng.choice(np.arange(1, n), size=num_pieces - 1, replace=False))
    x = np.empty(n)
    prev = None
    for seg in np.split(np.arange(n), cuts):
        amp = rng.uniform(lo, hi)
        while prev is not None and amp == prev:
            amp = rng.uniform(lo, hi)
        x[seg] = amp
        prev = amp
    return x


def synth_blocks(width: int, height: int, pieces_x: int, pieces_y: int, seed: int) -> Image:
    """Piecewise-constant block image: random cell grid with uniform levels."""
    if width < 1 or height < 1:
        raise ValueError("empty image")
    rng = np.random.default_rng(seed)
    col = synth_pwc(width, min(pieces_x, width), (0.0, 1.0), rng.integers(2**31))
    row = synth_pwc(height, min(pieces_y, height), (0.0, 1.0), rng.integers(2**31))
    img = 0.5 * (row[:, None] + col[None, :])
    return Image(img)


# ---------------------------------------------------------------------------
# 8-bit PGM (P2/P5) and PPM (P3/P6); PNG through Pillow when installed.

def _header_tokens(data, count):
    pos = 0
    tokens = []
    while len(tokens) < count:
        while pos < len(data):
            ch = data[pos : pos + 1]
            if ch.isspace():
                pos += 1
            elif ch == b"#":
                while pos < len(data) and data[pos : pos + 1] not in (b"\n", b""):
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated header")
        tokens.append(data[start:pos])
    return tokens, pos


def _parse_pnm(data: bytes) -> Image:
    tokens, pos = _header_tokens(data, 4)
    magic = tokens[0]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise ImageFormatError(f"unsupported magic {magic!r}")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ImageFormatError("non-numeric header field") from exc
    if w < 1 or h < 1:
        raise ImageFormatError("empty image")
    if maxval != 255:
        raise ImageFormatError(f"unsupported bit depth (maxval {maxval}, want 255)")
    nch = 3 if magic in (b"P3", b"P6") else 1
    count = w * h * nch
    if magic in (b"P5", b"P6"):
        pos += 1  # single whitespace byte separates header from raster
        raster = data[pos : pos + count]
        if len(raster) < count:
            raise ImageFormatError("truncated raster")
        vals = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
    else:
        fields = data[pos:].split()
        if len(fields) < count:
            raise ImageFormatError("truncated raster")
        try:
            vals = np.array([int(f) for f in fields[:count]], dtype=np.float64)
        except ValueError as exc:
            raise ImageFormatError("non-numeric sample") from exc
        if np.any(vals < 0) or np.any(vals > 255):
            raise ImageFormatError("sample out of range")
    shape = (h, w) if nch == 1 else (h, w, 3)
    return Image(vals.reshape(shape) / 255.0)


def load_image(path) -> Image:
    """Read an 8-bit PGM/PPM (or PNG when Pillow is available)."""
    if str(path).lower().endswith(".png"):
        return _load_png(path)
    with open(path, "rb") as fh:
        return _parse_pnm(fh.read())


def save_image(img: Image, path):
    """Write binary PGM/PPM (or PNG); pixels are clipped and quantized."""
    arr = np.rint(np.clip(img.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    if str(path).lower().endswith(".png"):
        _save_png(arr, path)
        return
    magic = b"P5" if img.channels == 1 else b"P6"
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (img.width, img.height))
        fh.write(arr.tobytes())


def _load_png(path):
    try:
        from PIL import Image as PILImage
    except ImportError as exc:
        raise ImageFormatError("PNG support requires Pillow") from exc
    with PILImage.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK") else "L")
        return Image(np.asarray(im, dtype=np.float64) / 255.0)


def _save_png(arr, path):
    try:
        from PIL import Image as PILImage
    except ImportError as exc:
        raise ImageFormatError("PNG support requires Pillow") from exc
    PILImage.fromarray(arr).save(path)


# ---------------------------------------------------------------------------
# patch-based image denoising

def _tile_starts(total, patch, overlap):
    if total <= patch:
        return [0]
    step = patch - overlap
    starts = list(range(0, total - patch, step))
    starts.append(total - patch)
    return sorted(set(starts))


def worker_count():
    """Bounded worker pool size; NCGTV_THREADS overrides the CPU count."""
    env = os.environ.get("NCGTV_THREADS", "").strip()
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("NCGTV_THREADS must be >= 1")
        return n
    return min(8, os.cpu_count() or 1)


def _denoise_on_graph(y, g, method, cfg):
    """Returns (restored signal, DenoiseResult or None)."""
    if method == "ncgtv":
        r = ncgtv_denoise(y, g, cfg)
        return r.x, r
    if method == "gtv":
        r = gtv_denoise(y, g, cfg)
        return r.x, r
    if method == "glr":
        return glr_denoise(y, g, cfg.mu, cfg.cg_tol, cfg.cg_max_iter), None
    raise ValueError(f"unknown method {method!r}")


def denoise_image(
    img: Image,
    method: str,
    cfg: SolverConfig,
    fc: FeatureConfig,
    patch: int = 36,
    overlap: int = 4,
    color_graph: str = "luminance",
    return_diagnostics: bool = False,
):
    """Denoise an image tile by tile.

    Tiles of ``patch`` pixels with 4-pixel overlap are denoised on their own
    similarity graphs (built from the luminance of the noisy input, or per
    channel) and averaged on the seams.  Tiles run on a worker pool; the
    merge order is fixed by tile index, so results are deterministic.

    With ``return_diagnostics`` the per-tile, per-channel DenoiseResults come
    back as a second value: a list of (tile_index, channel, result) entries.
    """
    if color_graph not in ("luminance", "per-channel"):
        raise ValueError("color_graph must be 'luminance' or 'per-channel'")
    data = img.data if img.channels == 3 else img.data[:, :, None]
    h, w, nch = data.shape
    tiles = [
        (r0, c0)
        for r0 in _tile_starts(h, min(patch, h), overlap)
        for c0 in _tile_starts(w, min(patch, w), overlap)
    ]
    ph, pw = min(patch, h), min(patch, w)
    lum = img.luminance()

    def solve_tile(rc):
        r0, c0 = rc
        block = data[r0 : r0 + ph, c0 : c0 + pw, :]
        out = np.empty_like(block)
        diags = []
        g = None
        if color_graph == "luminance":
            g = grid_graph(lum[r0 : r0 + ph, c0 : c0 + pw], fc)
        for ch in range(nch):
            gch = g if g is not None else grid_graph(block[:, :, ch], fc)
            xch, res = _denoise_on_graph(block[:, :, ch].ravel(), gch, method, cfg)
            out[:, :, ch] = xch.reshape(ph, pw)
            diags.append((ch, res))
        return out, diags

    if len(tiles) == 1:
        results = [solve_tile(tiles[0])]
    else:
        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            results = list(pool.map(solve_tile, tiles))
    acc = np.zeros((h, w, nch))
    cnt = np.zeros((h, w, 1))
    all_diags = []
    for t, ((r0, c0), (block, diags)) in enumerate(zip(tiles, results)):  # fixed merge order
        acc[r0 : r0 + ph, c0 : c0 + pw, :] += block
        cnt[r0 : r0 + ph, c0 : c0 + pw, :] += 1.0
        all_diags.extend((t, ch, res) for ch, res in diags)
    acc /= cnt
    out_img = Image(acc[:, :, 0] if img.channels == 1 else acc)
    if return_diagnostics:
        return out_img, all_diags
    return out_img
