"""
Image file IO: PFM for depth maps, binary PPM (P6) for RGB images.

PFM: "Pf" header, "width height", scale line whose sign encodes endianness
(negative = little-endian), then 32-bit floats with rows stored bottom to top.
PPM: "P6", width, height, maxval 255, then interleaved RGB bytes; values in
[0, 1] are quantized as round(255 * v).
"""

import re
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from ..interfaces.errors import FormatError
from ..tensor import Tensor

PathLike = Union[str, Path]


def _read_header_line(buffer: bytes, offset: int) -> Tuple[str, int]:
    end = buffer.find(b"\n", offset)
    if end < 0:
        raise FormatError("unterminated header line", "pfm", offset)
    try:
        return buffer[offset:end].decode("ascii").strip(), end + 1
    except UnicodeDecodeError:
        raise FormatError("non-ASCII header", "pfm", offset) from None


def decode_pfm(buffer: bytes) -> np.ndarray:
    """Parse PFM bytes into an H x W float32 array (top row first)."""
    tag, offset = _read_header_line(buffer, 0)
    if tag == "PF":
        raise FormatError("color PFM (PF) is not supported, expected Pf", "pfm", 0)
    if tag != "Pf":
        raise FormatError(f"bad magic {tag[:8]!r}, expected Pf", "pfm", 0)

    dims_offset = offset
    dims, offset = _read_header_line(buffer, offset)
    match = re.fullmatch(r"(\d+)\s+(\d+)", dims)
    if not match:
        raise FormatError(f"bad dimensions line {dims[:32]!r}", "pfm", dims_offset)
    width, height = int(match.group(1)), int(match.group(2))
    if width < 1 or height < 1:
        raise FormatError(f"non-positive dimensions {width}x{height}", "pfm", dims_offset)

    scale_offset = offset
    scale_text, offset = _read_header_line(buffer, offset)
    try:
        scale = float(scale_text)
    except ValueError:
        raise FormatError(f"bad scale line {scale_text[:32]!r}", "pfm", scale_offset) from None
    if scale == 0:
        raise FormatError("scale must be nonzero", "pfm", scale_offset)
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")

    expected = width * height * 4
    available = len(buffer) - offset
    if available < expected:
        raise FormatError(
            f"truncated payload: {available} of {expected} bytes", "pfm", len(buffer)
        )
    values = np.frombuffer(buffer, dtype=dtype, count=width * height, offset=offset)
    return np.flipud(values.reshape(height, width)).astype(np.float32)


def encode_pfm(depth: np.ndarray, little_endian: bool = True) -> bytes:
    if depth.ndim != 2:
        raise FormatError(f"PFM depth maps must be 2-D, got shape {depth.shape}", "pfm")
    height, width = depth.shape
    dtype = np.dtype("<f4") if little_endian else np.dtype(">f4")
    header = f"Pf\n{width} {height}\n{-1.0 if little_endian else 1.0}\n".encode("ascii")
    return header + np.flipud(depth).astype(dtype).tobytes()


def read_pfm(path: PathLike) -> Tensor:
    return Tensor(decode_pfm(Path(path).read_bytes()), dtype=np.float32)


def write_pfm(path: PathLike, depth: Union[Tensor, np.ndarray], little_endian: bool = True) -> None:
    array = depth.data if isinstance(depth, Tensor) else np.asarray(depth)
    if array.ndim == 3 and array.shape[-1] == 1:
        array = array[..., 0]
    Path(path).write_bytes(encode_pfm(array, little_endian))


def _ppm_tokens(buffer: bytes, count: int) -> Tuple[List[Tuple[bytes, int]], int]:
    """Read ``count`` whitespace-separated header tokens, skipping # comments."""
    tokens: List[Tuple[bytes, int]] = []
    offset = 0
    while len(tokens) < count:
        if offset >= len(buffer):
            raise FormatError("truncated header", "ppm", offset)
        char = buffer[offset : offset + 1]
        if char.isspace():
            offset += 1
        elif char == b"#":
            end = buffer.find(b"\n", offset)
            offset = len(buffer) if end < 0 else end + 1
        else:
            start = offset
            while offset < len(buffer) and not buffer[offset : offset + 1].isspace():
                offset += 1
            tokens.append((buffer[start:offset], start))
    # exactly one whitespace byte separates the header from the raster
    return tokens, offset + 1


def decode_ppm(buffer: bytes) -> np.ndarray:
    """Parse binary PPM bytes into an H x W x 3 float array in [0, 1]."""
    tokens, offset = _ppm_tokens(buffer, 4)
    (magic, _), *numbers = tokens
    if magic != b"P6":
        raise FormatError(f"bad magic {magic[:8]!r}, expected P6", "ppm", 0)
    values = []
    for token, position in numbers:
        if not token.isdigit():
            raise FormatError(f"bad header field {token[:16]!r}", "ppm", position)
        values.append(int(token))
    width, height, maxval = values
    if width < 1 or height < 1:
        raise FormatError(f"non-positive dimensions {width}x{height}", "ppm", numbers[0][1])
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}, expected 255", "ppm", numbers[2][1])

    expected = width * height * 3
    if len(buffer) - offset < expected:
        raise FormatError(
            f"truncated payload: {max(len(buffer) - offset, 0)} of {expected} bytes", "ppm", len(buffer)
        )
    raster = np.frombuffer(buffer, dtype=np.uint8, count=expected, offset=offset)
    return raster.reshape(height, width, 3).astype(np.float64) / 255.0


def encode_ppm(image: np.ndarray) -> bytes:
    if image.ndim != 3 or image.shape[-1] != 3:
        raise FormatError(f"PPM images must be H x W x 3, got shape {image.shape}", "ppm")
    height, width, _ = image.shape
    quantized = np.round(255.0 * np.clip(image, 0.0, 1.0)).astype(np.uint8)
    return f"P6\n{width} {height}\n255\n".encode("ascii") + quantized.tobytes()


def read_ppm(path: PathLike) -> Tensor:
    return Tensor(decode_ppm(Path(path).read_bytes()))


def write_ppm(path: PathLike, image: Union[Tensor, np.ndarray]) -> None:
    array = image.data if isinstance(image, Tensor) else np.asarray(image)
    Path(path).write_bytes(encode_ppm(array))
