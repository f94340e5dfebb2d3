import numpy as np


def to_gray8(X):
    """Min-max normalise to 0..255; a constant matrix maps to 128."""
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError("cannot render non-finite values")
    lo, hi = X.min(), X.max()
    if hi == lo:
        return np.full(X.shape, 128, dtype=np.uint8)
    return np.rint(255.0 * (X - lo) / (hi - lo)).astype(np.uint8)


def render_pgm(X, path):
    """Write `X` as an 8-bit binary (P5) PGM image."""
    img = to_gray8(X)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5 {w} {h} 255\n".encode("ascii"))
        f.write(img.tobytes())
