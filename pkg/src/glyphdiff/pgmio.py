"""8-bit binary PGM (P5) image files and the disk <-> model-space mapping.

On disk ink is dark (0) on a light background (255); in model space images
are float32 in [-1, 1] with ink at -1.
"""

import numpy as np


def model_to_u8(img):
    return np.clip(np.rint((np.asarray(img) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def u8_to_model(u8):
    return (u8.astype(np.float32) / 127.5 - 1.0).astype(np.float32)


def write_pgm(path, img):
    """img: model-space (H, W) float array."""
    u8 = model_to_u8(img)
    h, w = u8.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(u8.tobytes())


def read_pgm(path):
    """Returns a model-space (H, W) float32 array."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":  # comment line
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255, got {maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)
    return u8_to_model(pixels)
