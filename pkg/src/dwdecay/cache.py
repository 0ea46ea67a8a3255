"""Versioned binary cache for two-body eigensystems.

Layout (all little-endian):

    magic  b"DWD2"
    uint32 format version (currently 1)
    uint64 header length, then that many bytes of UTF-8 JSON holding the
           provenance dict (spec parameters, u, truncation, interaction
           region), array shapes and the SHA-256 of the payload
    payload: i_idx int64[n], j_idx int64[n], energies float64[n],
             vectors float64[n*n] (C order)

Reload verifies magic, version and payload hash and reproduces the arrays
bit-identically.  The single-particle basis is rebuilt from the stored spec
(deterministic and cheap relative to the diagonalization).
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .spsolver import PotentialSpec, solve_double_well
from .twobody import PairBasis, TwoBodyEigensystem

__all__ = ["save_eigensystem", "load_eigensystem", "try_load", "cache_path"]

_MAGIC = b"DWD2"
_VERSION = 1


class CacheFormatError(RuntimeError):
    pass


def cache_path(cache_dir, eig_or_provenance) -> Path:
    prov = (eig_or_provenance.provenance
            if isinstance(eig_or_provenance, TwoBodyEigensystem)
            else dict(eig_or_provenance))
    h = hashlib.sha256(repr(sorted(prov.items())).encode()).hexdigest()[:24]
    return Path(cache_dir) / f"tb_{h}.dwd"


def _payload_bytes(eig: TwoBodyEigensystem) -> list:
    le = "<"
    return [
        np.ascontiguousarray(eig.pair_basis.i_idx, dtype=le + "i8").tobytes(),
        np.ascontiguousarray(eig.pair_basis.j_idx, dtype=le + "i8").tobytes(),
        np.ascontiguousarray(eig.energies, dtype=le + "f8").tobytes(),
        np.ascontiguousarray(eig.vectors, dtype=le + "f8").tobytes(),
    ]


def save_eigensystem(eig: TwoBodyEigensystem, cache_dir) -> Path:
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    chunks = _payload_bytes(eig)
    sha = hashlib.sha256()
    for c in chunks:
        sha.update(c)
    header = {
        "provenance": eig.provenance,
        "n_pairs": int(len(eig.pair_basis)),
        "payload_sha256": sha.hexdigest(),
        "byte_order": "little",
    }
    raw = json.dumps(header, sort_keys=True).encode()
    path = cache_path(cache_dir, eig)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        for c in chunks:
            fh.write(c)
    tmp.replace(path)
    return path


def load_eigensystem(path) -> TwoBodyEigensystem:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise CacheFormatError(f"{path}: bad magic")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise CacheFormatError(f"{path}: unsupported version {version}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode())
        n = header["n_pairs"]
        raw = fh.read()
    sizes = [8 * n, 8 * n, 8 * n, 8 * n * n]
    if len(raw) != sum(sizes):
        raise CacheFormatError(f"{path}: truncated payload")
    sha = hashlib.sha256(raw).hexdigest()
    if sha != header["payload_sha256"]:
        raise CacheFormatError(f"{path}: payload hash mismatch")
    off = 0
    parts = []
    for s in sizes:
        parts.append(raw[off:off + s])
        off += s
    i_idx = np.frombuffer(parts[0], dtype="<i8")
    j_idx = np.frombuffer(parts[1], dtype="<i8")
    energies = np.frombuffer(parts[2], dtype="<f8")
    vectors = np.frombuffer(parts[3], dtype="<f8").reshape(n, n)

    prov = header["provenance"]
    spec = PotentialSpec(ell=prov["ell"], b=prov["b"], r=prov["r"], v0=prov["v0"])
    basis = solve_double_well(spec, prov["e_max"])
    pb = PairBasis(basis, n_cut=prov["n_cut"], e2_cut=prov["e2_cut"])
    if not (np.array_equal(pb.i_idx, i_idx) and np.array_equal(pb.j_idx, j_idx)):
        raise CacheFormatError(f"{path}: pair-basis layout mismatch with stored spec")
    return TwoBodyEigensystem(pb, prov["u"], energies.copy(), vectors.copy(),
                              prov["interaction_region"])


def try_load(cache_dir, provenance) -> TwoBodyEigensystem | None:
    path = cache_path(cache_dir, provenance)
    if not path.exists():
        return None
    eig = load_eigensystem(path)
    if eig.provenance != dict(provenance):
        return None
    return eig
