"""Portable binary persistence of ground-state records.

Layout (all little-endian):

    magic   4 bytes  b"FDMR"
    version u32      currently 1
    params  f64 lam, f64 d_aniso, f64 h1, u32 length
    config  u32 m, u32 sweeps, f64 lanczos_tol, f64 trunc_target,
            u8 sz_flag, i32 sz_sector (0 when unset)
    scalars f64 energy, f64 max_trunc_error,
            u8 total_sz_flag, f64 total_sz (0 when unset)
    sweep energies: u32 count, f64 values
    wavefunction: array
    rho_spectrum: array
    system stack: u32 count, then arrays
    environment stack: u32 count, then arrays

where "array" means u32 ndim, u32 dims[ndim], then row-major f64 data.
Fidelity needs pairs of records; persisting them decouples the two runs.
"""

import struct

import numpy as np

from .engine import (DmrgConfig, GroundStateRecord, SuperblockWavefunction,
                     TransformationStack)
from .errors import CheckpointFormatError
from .model import ModelParams

MAGIC = b"FDMR"
VERSION = 1


def _write_array(out, arr):
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    out.append(struct.pack("<I", arr.ndim))
    out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    out.append(arr.astype("<f8").tobytes())


def _read_array(buf, pos):
    (ndim,), pos = _unpack(buf, pos, "<I")
    dims, pos = _unpack(buf, pos, f"<{ndim}I")
    count = int(np.prod(dims)) if ndim else 1
    end = pos + 8 * count
    if end > len(buf):
        raise CheckpointFormatError("truncated array data")
    arr = np.frombuffer(buf[pos:end], dtype="<f8").reshape(dims).copy()
    return arr, end


def _unpack(buf, pos, fmt):
    size = struct.calcsize(fmt)
    if pos + size > len(buf):
        raise CheckpointFormatError("truncated checkpoint")
    return struct.unpack_from(fmt, buf, pos), pos + size


def save_record(record: GroundStateRecord, path):
    out = [MAGIC, struct.pack("<I", VERSION)]
    p, c = record.params, record.config
    out.append(struct.pack("<dddI", p.lam, p.d_aniso, p.h1, p.length))
    out.append(struct.pack("<IIddBi", c.m, c.sweeps, c.lanczos_tol,
                           c.trunc_target, c.sz_sector is not None,
                           c.sz_sector or 0))
    out.append(struct.pack("<ddBd", record.energy, record.max_trunc_error,
                           record.total_sz is not None,
                           record.total_sz or 0.0))
    out.append(struct.pack("<I", len(record.sweep_energies)))
    out.append(struct.pack(f"<{len(record.sweep_energies)}d",
                           *record.sweep_energies))
    _write_array(out, record.wavefunction.tensor)
    _write_array(out, record.rho_spectrum)
    for stack in (record.stacks.system, record.stacks.environment):
        out.append(struct.pack("<I", len(stack)))
        for arr in stack:
            _write_array(out, arr)
    with open(path, "wb") as fh:
        fh.write(b"".join(out))


def load_record(path) -> GroundStateRecord:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise CheckpointFormatError(f"{path}: not a checkpoint file (bad magic)")
    pos = 4
    (version,), pos = _unpack(buf, pos, "<I")
    if version != VERSION:
        raise CheckpointFormatError(
            f"{path}: unsupported checkpoint version {version}")
    (lam, d_aniso, h1, length), pos = _unpack(buf, pos, "<dddI")
    (m, sweeps, tol, target, sz_flag, sz), pos = _unpack(buf, pos, "<IIddBi")
    (energy, trunc, tsz_flag, tsz), pos = _unpack(buf, pos, "<ddBd")
    (n_sweep,), pos = _unpack(buf, pos, "<I")
    sweep_energies, pos = _unpack(buf, pos, f"<{n_sweep}d")
    tensor, pos = _read_array(buf, pos)
    spectrum, pos = _read_array(buf, pos)
    stacks = []
    for _ in range(2):
        (count,), pos = _unpack(buf, pos, "<I")
        arrays = []
        for _ in range(count):
            arr, pos = _read_array(buf, pos)
            arrays.append(arr)
        stacks.append(tuple(arrays))
    return GroundStateRecord(
        params=ModelParams(lam=lam, d_aniso=d_aniso, h1=h1, length=length),
        config=DmrgConfig(m=m, sweeps=sweeps, lanczos_tol=tol,
                          trunc_target=target,
                          sz_sector=sz if sz_flag else None),
        energy=energy,
        wavefunction=SuperblockWavefunction(tensor),
        stacks=TransformationStack(system=stacks[0], environment=stacks[1]),
        rho_spectrum=spectrum,
        max_trunc_error=trunc,
        sweep_energies=sweep_energies,
        total_sz=tsz if tsz_flag else None)
