"""Binary container for grid data.

Layout: ``b"SGF1"``, a little-endian uint32 header length, a UTF-8 JSON
header, then the arrays listed in the header as row-major complex128
blocks in the same order.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .builders import SolutionData
from .families import LambdaFamily
from .grid import Domain, GridField

MAGIC = b"SGF1"


class ContainerError(ValueError):
    pass


def write_container(path, kind, domain: Domain, arrays: dict, meta=None):
    arrays = {k: np.ascontiguousarray(v, dtype="<c16") for k, v in arrays.items()}
    header = {"kind": kind, "domain": domain.to_dict(), "meta": meta or {},
              "arrays": [{"name": k, "shape": list(v.shape)} for k, v in arrays.items()]}
    raw = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        for v in arrays.values():
            fh.write(v.tobytes())


def read_container(path):
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ContainerError(f"{path}: not a grid container (bad magic)")
    (n,) = struct.unpack("<I", data[4:8])
    try:
        header = json.loads(data[8:8 + n])
    except json.JSONDecodeError as exc:
        raise ContainerError(f"{path}: corrupt header") from exc
    pos = 8 + n
    arrays = {}
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"]))
        if pos + 16 * count > len(data):
            raise ContainerError(f"{path}: truncated data for array {spec['name']!r}")
        block = np.frombuffer(data, dtype="<c16", count=count, offset=pos)
        arrays[spec["name"]] = block.reshape(spec["shape"]).astype(complex)
        pos += 16 * count
    if pos != len(data):
        raise ContainerError(f"{path}: {len(data) - pos} trailing bytes")
    return header, Domain.from_dict(header["domain"]), arrays


def save_field(path, f: GridField):
    write_container(path, "field", f.domain, {f"c{i}": c for i, c in enumerate(f.comps)},
                    {"degree": f.degree})


def load_field(path) -> GridField:
    header, dom, arrays = read_container(path)
    if header["kind"] != "field":
        raise ContainerError(f"expected a field, found {header['kind']!r}")
    comps = tuple(arrays[f"c{i}"] for i in range(len(arrays)))
    return GridField(dom, header["meta"]["degree"], comps)


def save_family(path, fam: LambdaFamily):
    arrays = {}
    for k, c in fam.coeffs.items():
        arrays[f"{k}:dz"], arrays[f"{k}:dzbar"] = c.comps
    meta = {"higgs_type": fam.higgs_type, "label": fam.label,
            "truncation_tail": fam.truncation_tail}
    write_container(path, "family", fam.domain, arrays, meta)


def load_family(path) -> LambdaFamily:
    header, dom, arrays = read_container(path)
    if header["kind"] != "family":
        raise ContainerError(f"expected a family, found {header['kind']!r}")
    ks = sorted({int(name.split(":")[0]) for name in arrays})
    coeffs = {k: GridField(dom, 1, (arrays[f"{k}:dz"], arrays[f"{k}:dzbar"])) for k in ks}
    return LambdaFamily(dom, coeffs, **header["meta"])


def save_solution(path, sol: SolutionData):
    write_container(path, "solution", sol.domain, {"u": sol.u, "q": sol.q},
                    {"target": sol.target})


def load_solution(path) -> SolutionData:
    header, dom, arrays = read_container(path)
    if header["kind"] != "solution":
        raise ContainerError(f"expected a solution, found {header['kind']!r}")
    return SolutionData(dom, arrays["u"].real, arrays["q"], header["meta"]["target"])
