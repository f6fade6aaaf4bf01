# *************************************************************************************************************************
#   LogitsSidecar.py
#       Binary sidecar holding the agent's raw token logits, addressed by (row_offset, row_count) from trace steps.
# -------------------------------------------------------------------------------------------------------------------
#   Format (little-endian):
#       magic 'SGLW' | u32 version (1) | u64 vocabulary size V | u64 token rows T | T x V float32, row-major
#
#   Design Notes:
#   -.  The body is memory-mapped read-only, so row ranges are served without loading the file and concurrent
#       readers are safe.
#   -.  Finiteness is checked on the rows that are read.
# *************************************************************************************************************************

import logging
import os
import struct

import numpy as np

from src.utils.errors import SidecarBoundsError, SidecarFormatError

logger = logging.getLogger(__name__)

SIDECAR_MAGIC = b"SGLW"
SIDECAR_VERSION = 1
SIDECAR_HEADER = struct.Struct("<4sIQQ")
SIDECAR_DTYPE = np.dtype("<f4")


class LogitsSidecar:
    def __init__(self, path):
        self.path = path
        try:
            file_size = os.path.getsize(path)
            with open(path, "rb") as handle:
                header = handle.read(SIDECAR_HEADER.size)
        except FileNotFoundError:
            raise SidecarFormatError(f"sidecar not found: {path}")

        if len(header) < SIDECAR_HEADER.size:
            raise SidecarFormatError(f"{path}: file too short for a sidecar header")
        magic, version, vocab_size, row_count = SIDECAR_HEADER.unpack(header)
        if magic != SIDECAR_MAGIC:
            raise SidecarFormatError(f"{path}: bad magic {magic!r}")
        if version != SIDECAR_VERSION:
            raise SidecarFormatError(f"{path}: unsupported version {version}")
        if vocab_size < 2:
            raise SidecarFormatError(f"{path}: vocabulary size {vocab_size} < 2")

        expected = SIDECAR_HEADER.size + row_count * vocab_size * SIDECAR_DTYPE.itemsize
        if file_size < expected:
            held = (file_size - SIDECAR_HEADER.size) // (vocab_size * SIDECAR_DTYPE.itemsize)
            raise SidecarBoundsError(f"{path}: header claims {row_count} rows but file holds {held}")

        self.vocab_size = int(vocab_size)
        self.row_count = int(row_count)
        if self.row_count == 0:
            self._matrix = np.empty((0, self.vocab_size), dtype=SIDECAR_DTYPE)
        else:
            self._matrix = np.memmap(path, dtype=SIDECAR_DTYPE, mode="r", offset=SIDECAR_HEADER.size,
                                     shape=(self.row_count, self.vocab_size))
        logger.debug("Opened sidecar %s (V=%d, T=%d)", path, self.vocab_size, self.row_count)

    def rows(self, row_offset, row_count):
        """
        Return rows [row_offset, row_offset + row_count) as a float64 array.
        """
        if row_count < 1 or row_offset < 0 or row_offset + row_count > self.row_count:
            raise SidecarBoundsError(
                f"{self.path}: rows [{row_offset}, {row_offset + row_count}) outside [0, {self.row_count})")
        block = np.array(self._matrix[row_offset:row_offset + row_count], dtype=np.float64)
        if not np.all(np.isfinite(block)):
            raise SidecarFormatError(f"{self.path}: non-finite logits in rows [{row_offset}, {row_offset + row_count})")
        return block

    def rows_for(self, logits_ref):
        return self.rows(logits_ref.row_offset, logits_ref.row_count)

    def close(self):
        mmap = getattr(self._matrix, "_mmap", None)
        self._matrix = None
        if mmap is not None:
            mmap.close()


def open_sidecar(path):
    return LogitsSidecar(path)


def write_sidecar(path, matrix):
    """
    Write a T x V matrix of logits as a sidecar file; returns the path.
    """
    matrix = np.asarray(matrix, dtype=SIDECAR_DTYPE)
    if matrix.ndim != 2:
        raise SidecarFormatError(f"sidecar matrix must be 2-d, got shape {matrix.shape}")
    row_count, vocab_size = matrix.shape
    if vocab_size < 2:
        raise SidecarFormatError(f"vocabulary size {vocab_size} < 2")
    if not np.all(np.isfinite(matrix)):
        raise SidecarFormatError("sidecar logits must be finite")

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as handle:
        handle.write(SIDECAR_HEADER.pack(SIDECAR_MAGIC, SIDECAR_VERSION, vocab_size, row_count))
        handle.write(np.ascontiguousarray(matrix).tobytes(order="C"))
    return path
