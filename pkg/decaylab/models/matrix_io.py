from pathlib import Path
from typing import Union

import numpy as np
import scipy.sparse as sp

from decaylab.core.errors import ConfigError

PathLike = Union[str, Path]


def read_coo(path: PathLike, field: str = "model.custom") -> sp.csr_matrix:
    """Read a square matrix from 'n nnz' + 'row col value' lines (0-based)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"matrix file {path} not found", field=field)
    with path.open() as handle:
        header = handle.readline().split()
        try:
            n, nnz = int(header[0]), int(header[1])
        except (IndexError, ValueError):
            raise ConfigError(f"{path}: first line must be 'n nnz'", field=field)
        body = np.loadtxt(handle, ndmin=2) if nnz else np.empty((0, 3))

    if body.shape != (nnz, 3):
        raise ConfigError(f"{path}: expected {nnz} 'row col value' lines, found {body.shape[0]}", field=field)
    rows, cols = body[:, 0].astype(int), body[:, 1].astype(int)
    if nnz and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
        raise ConfigError(f"{path}: index outside 0..{n - 1}", field=field)
    return sp.coo_matrix((body[:, 2], (rows, cols)), shape=(n, n)).tocsr()


def write_coo(path: PathLike, matrix) -> None:
    coo = sp.coo_matrix(matrix)
    with Path(path).open("w") as handle:
        handle.write(f"{coo.shape[0]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            handle.write(f"{r} {c} {v:.17g}\n")
