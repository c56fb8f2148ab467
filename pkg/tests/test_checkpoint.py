import numpy as np
import pytest

from fidscan.checkpoint import load_record, save_record
from fidscan.engine import DmrgConfig, run_dmrg
from fidscan.errors import CheckpointFormatError
from fidscan.fidelity import overlap
from fidscan.model import ModelParams


@pytest.fixture(scope="module")
def record():
    params = ModelParams(lam=0.5, d_aniso=0.63, h1=-1.0, length=8)
    return run_dmrg(params, DmrgConfig(m=18, sweeps=2))


def test_roundtrip(tmp_path, record):
    path = tmp_path / "rec.fdmr"
    save_record(record, path)
    loaded = load_record(path)
    assert loaded.params == record.params
    assert loaded.config == record.config
    assert loaded.energy == record.energy
    assert loaded.max_trunc_error == record.max_trunc_error
    assert loaded.sweep_energies == record.sweep_energies
    assert loaded.total_sz == record.total_sz
    assert np.array_equal(loaded.wavefunction.tensor,
                          record.wavefunction.tensor)
    assert np.array_equal(loaded.rho_spectrum, record.rho_spectrum)
    for a, b in zip(loaded.stacks.system, record.stacks.system):
        assert np.array_equal(a, b)
    for a, b in zip(loaded.stacks.environment, record.stacks.environment):
        assert np.array_equal(a, b)


def test_roundtrip_preserves_overlap(tmp_path, record):
    path = tmp_path / "rec.fdmr"
    save_record(record, path)
    loaded = load_record(path)
    assert overlap(loaded, record) == pytest.approx(1.0, abs=1e-12)


def test_sz_sector_roundtrip(tmp_path):
    params = ModelParams(lam=1.0, d_aniso=0.5, h1=-1.0, length=8)
    rec = run_dmrg(params, DmrgConfig(m=18, sweeps=2, sz_sector=0))
    path = tmp_path / "sz.fdmr"
    save_record(rec, path)
    loaded = load_record(path)
    assert loaded.config.sz_sector == 0
    assert loaded.total_sz == rec.total_sz


def test_bad_magic(tmp_path):
    path = tmp_path / "junk.fdmr"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(CheckpointFormatError):
        load_record(path)


def test_bad_version(tmp_path, record):
    path = tmp_path / "rec.fdmr"
    save_record(record, path)
    data = bytearray(path.read_bytes())
    data[4:8] = (99).to_bytes(4, "little")
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointFormatError):
        load_record(path)


def test_truncated_file(tmp_path, record):
    path = tmp_path / "rec.fdmr"
    save_record(record, path)
    data = path.read_bytes()
    path.write_bytes(data[:len(data) // 2])
    with pytest.raises(CheckpointFormatError):
        load_record(path)
