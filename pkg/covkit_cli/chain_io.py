"""
Reading chain files.

CSV: UTF-8, comma separated, one row per iteration, with an optional single
header row detected by its first row not being numeric. Binary: the packed
little-endian float64 layout written by `covkit.chains.write_chain`.
"""
import csv
import io
import sys
from typing import BinaryIO, TextIO

import numpy as np

from covkit.chains import CHAIN_HEADER, CHAIN_MAGIC
from covkit.errors import ChainFormatError
from covkit.estimators import ChainMatrix

from .configuration import logger

CHAIN_FORMATS = ('csv', 'bin')


def _parse_row(cells, line_number):
    values = []
    for column, cell in enumerate(cells, start=1):
        try:
            values.append(float(cell))
        except ValueError:
            raise ChainFormatError(f"Non-numeric value '{cell.strip()}' at line {line_number}, column {column}")
    return values


def read_csv_chain(stream: TextIO) -> ChainMatrix:
    rows = []
    width = None
    header_skipped = False
    for line_number, cells in enumerate(csv.reader(stream), start=1):
        if not cells or all(not cell.strip() for cell in cells):
            continue
        if not rows and not header_skipped:
            try:
                rows.append(_parse_row(cells, line_number))
            except ChainFormatError:
                header_skipped = True
                logger.debug(f"Skipping header row: {','.join(cells)}")
                continue
            width = len(cells)
            continue
        if width is None:
            width = len(cells)
        if len(cells) != width:
            raise ChainFormatError(f"Ragged row at line {line_number}: expected {width} columns, found {len(cells)}")
        rows.append(_parse_row(cells, line_number))

    if not rows:
        raise ChainFormatError("Chain file has no data rows")
    return _to_chain(np.array(rows, dtype=np.float64))


def read_binary_chain(stream: BinaryIO) -> ChainMatrix:
    header = stream.read(CHAIN_HEADER.size)
    if len(header) < CHAIN_HEADER.size:
        raise ChainFormatError("Binary chain is truncated inside its header")
    magic, n, p = CHAIN_HEADER.unpack(header)
    if magic != CHAIN_MAGIC:
        raise ChainFormatError(f"Bad binary chain magic {magic!r}, expected {CHAIN_MAGIC!r}")
    expected = n * p * 8
    body = stream.read(expected)
    if len(body) != expected:
        raise ChainFormatError(f"Binary chain is truncated: expected {expected} data bytes for {n}x{p}, "
                               f"found {len(body)}")
    data = np.frombuffer(body, dtype='<f8').astype(np.float64).reshape(n, p)
    return _to_chain(data)


def _to_chain(data: np.ndarray) -> ChainMatrix:
    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        row, column = bad[0]
        raise ChainFormatError(f"Non-finite value {data[row, column]} at row {row + 1}, column {column + 1}")
    if data.shape[0] < 2:
        raise ChainFormatError(f"Chain needs at least 2 rows, found {data.shape[0]}")
    return ChainMatrix(data)


def load_chain(path: str, fmt: str = 'csv') -> ChainMatrix:
    """
    Load a chain from a file path, or from stdin when path is '-'.

    Args:
        path: File path or '-'
        fmt: 'csv' or 'bin'
    Returns:
        ChainMatrix
    Raises:
        ChainFormatError: On unreadable, malformed or non-finite input
    """
    if fmt not in CHAIN_FORMATS:
        raise ChainFormatError(f"Unknown chain format '{fmt}', use one of {', '.join(CHAIN_FORMATS)}")
    try:
        if path == '-':
            if fmt == 'bin':
                chain = read_binary_chain(sys.stdin.buffer)
            else:
                chain = read_csv_chain(sys.stdin)
        elif fmt == 'bin':
            with open(path, 'rb') as handle:
                chain = read_binary_chain(handle)
        else:
            with open(path, 'r', encoding='utf-8', newline='') as handle:
                chain = read_csv_chain(handle)
    except OSError as e:
        raise ChainFormatError(f"Cannot read chain file {path}: {e}")
    except UnicodeDecodeError as e:
        raise ChainFormatError(f"Chain file {path} is not UTF-8 text: {e}")
    logger.info(f"Loaded chain {path} with n={chain.n}, p={chain.p}")
    return chain


def load_chain_bytes(payload: bytes, fmt: str = 'csv') -> ChainMatrix:
    if fmt == 'bin':
        return read_binary_chain(io.BytesIO(payload))
    return read_csv_chain(io.StringIO(payload.decode('utf-8')))
