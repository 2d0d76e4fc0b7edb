"""Volume I/O: a minimal NIfTI-1 single-file subset plus a raw+JSON fallback format.

Supported NIfTI-1 datatypes: 2 (uint8), 4 (int16), 16 (float32), little-endian,
uncompressed ``.nii`` or gzipped ``.nii.gz``.  Scalar volumes use dim[0] = 3;
3-channel vector fields use dim[0] = 5, dim[4] = 1, dim[5] = 3 and intent code
1007, with the three components stored as consecutive scalar volumes (x fastest).
The raw fallback stores the same voxel layout in ``.rawvol`` with a JSON sidecar
carrying dims/spacing/dtype/channels.

The 12-value affine rows from input headers are carried through verbatim and
never interpreted; registration operates in voxel space.
"""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["FormatError", "VolumeHeader", "read_volume", "write_volume"]

_HEADER_SIZE = 348
_VOX_OFFSET = 352
_INTENT_VECTOR = 1007

_DTYPES = {2: "uint8", 4: "int16", 16: "float32"}
_DTYPE_CODES = {v: k for k, v in _DTYPES.items()}
_BITPIX = {"uint8": 8, "int16": 16, "float32": 32}

_header_dtype = np.dtype(
    [
        ("sizeof_hdr", "<i4"),
        ("data_type", "S10"),
        ("db_name", "S18"),
        ("extents", "<i4"),
        ("session_error", "<i2"),
        ("regular", "S1"),
        ("dim_info", "u1"),
        ("dim", "<i2", (8,)),
        ("intent_p1", "<f4"),
        ("intent_p2", "<f4"),
        ("intent_p3", "<f4"),
        ("intent_code", "<i2"),
        ("datatype", "<i2"),
        ("bitpix", "<i2"),
        ("slice_start", "<i2"),
        ("pixdim", "<f4", (8,)),
        ("vox_offset", "<f4"),
        ("scl_slope", "<f4"),
        ("scl_inter", "<f4"),
        ("slice_end", "<i2"),
        ("slice_code", "u1"),
        ("xyzt_units", "u1"),
        ("cal_max", "<f4"),
        ("cal_min", "<f4"),
        ("slice_duration", "<f4"),
        ("toffset", "<f4"),
        ("glmax", "<i4"),
        ("glmin", "<i4"),
        ("descrip", "S80"),
        ("aux_file", "S24"),
        ("qform_code", "<i2"),
        ("sform_code", "<i2"),
        ("quatern_b", "<f4"),
        ("quatern_c", "<f4"),
        ("quatern_d", "<f4"),
        ("qoffset_x", "<f4"),
        ("qoffset_y", "<f4"),
        ("qoffset_z", "<f4"),
        ("srow_x", "<f4", (4,)),
        ("srow_y", "<f4", (4,)),
        ("srow_z", "<f4", (4,)),
        ("intent_name", "S16"),
        ("magic", "S4"),
    ]
)
assert _header_dtype.itemsize == _HEADER_SIZE


class FormatError(ValueError):
    """Malformed or unsupported volume file."""


def _default_affine(spacing):
    aff = np.zeros((3, 4), dtype=np.float64)
    aff[0, 0], aff[1, 1], aff[2, 2] = spacing
    return aff


@dataclass
class VolumeHeader:
    dims: tuple
    spacing: tuple = (1.0, 1.0, 1.0)
    dtype: str = "float32"
    channels: int = 1
    affine: np.ndarray = field(default=None, repr=False)  # 3x4, stored but never applied

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise FormatError(f"bad dims {self.dims}")
        self.spacing = tuple(float(s) for s in self.spacing)
        if self.dtype not in _DTYPE_CODES:
            raise FormatError(f"unsupported dtype {self.dtype!r}")
        if self.channels not in (1, 3):
            raise FormatError(f"channel count must be 1 or 3, got {self.channels}")
        if self.affine is None:
            self.affine = _default_affine(self.spacing)
        else:
            self.affine = np.asarray(self.affine, dtype=np.float64).reshape(3, 4)


def _open(path: str, mode: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def _is_rawvol(path: str) -> bool:
    return str(path).endswith(".rawvol")


def read_volume(path, as_labels: bool = False):
    """Load a volume; returns (VolumeHeader, payload).

    Payload is a float64 scalar volume for 1-channel data, an int32 label volume
    when ``as_labels`` is set (integer datatypes only), or a float64 (nx,ny,nz,3)
    vector field for 3-channel data.
    """
    path = str(path)
    if _is_rawvol(path):
        header, raw = _read_rawvol(path)
    else:
        header, raw = _read_nifti(path)
    return header, _payload_from_raw(header, raw, as_labels, path)


def _read_nifti(path):
    try:
        with _open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {path!r}: {exc}") from exc
    if len(blob) < _HEADER_SIZE:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    hdr = np.frombuffer(blob[:_HEADER_SIZE], dtype=_header_dtype)[0]
    if int(hdr["sizeof_hdr"]) != _HEADER_SIZE or hdr["magic"] not in (b"n+1", b"n+1\x00"):
        raise FormatError(f"{path}: not a little-endian NIfTI-1 single file (bad magic/size)")
    code = int(hdr["datatype"])
    if code not in _DTYPES:
        raise FormatError(f"{path}: unsupported datatype code {code}")
    ndim = int(hdr["dim"][0])
    dims = tuple(int(d) for d in hdr["dim"][1:4])
    if ndim == 5 and int(hdr["dim"][5]) == 3:
        channels = 3
    elif ndim in (3, 4) and all(int(d) <= 1 for d in hdr["dim"][4:8]):
        channels = 1
    else:
        raise FormatError(f"{path}: unsupported dim layout {hdr['dim'].tolist()}")
    header = VolumeHeader(
        dims=dims,
        spacing=tuple(float(s) for s in hdr["pixdim"][1:4]),
        dtype=_DTYPES[code],
        channels=channels,
        affine=np.stack([hdr["srow_x"], hdr["srow_y"], hdr["srow_z"]]),
    )
    offset = max(int(hdr["vox_offset"]), _HEADER_SIZE)
    expected = header.channels * int(np.prod(dims)) * np.dtype(header.dtype).itemsize
    data = blob[offset:offset + expected]
    if len(data) != expected:
        raise FormatError(f"{path}: size mismatch, need {expected} data bytes, have {len(data)}")
    return header, np.frombuffer(data, dtype=np.dtype(header.dtype).newbyteorder("<"))


def _read_rawvol(path):
    sidecar = path + ".json"
    try:
        with open(sidecar, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read sidecar {sidecar!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{sidecar}: invalid JSON sidecar: {exc}") from exc
    try:
        header = VolumeHeader(
            dims=tuple(meta["dims"]),
            spacing=tuple(meta.get("spacing", (1.0, 1.0, 1.0))),
            dtype=meta["dtype"],
            channels=int(meta.get("channels", 1)),
        )
    except KeyError as exc:
        raise FormatError(f"{sidecar}: missing key {exc}") from exc
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {path!r}: {exc}") from exc
    expected = header.channels * int(np.prod(header.dims)) * np.dtype(header.dtype).itemsize
    if len(blob) != expected:
        raise FormatError(f"{path}: size mismatch, need {expected} bytes, have {len(blob)}")
    return header, np.frombuffer(blob, dtype=np.dtype(header.dtype).newbyteorder("<"))


def _payload_from_raw(header, raw, as_labels, path):
    nx, ny, nz = header.dims
    if header.channels == 3:
        arr = raw.reshape(3, nz, ny, nx)  # file order: x fastest, component slowest
        return np.ascontiguousarray(arr.transpose(3, 2, 1, 0).astype(np.float64))
    arr = np.ascontiguousarray(raw.reshape(nz, ny, nx).transpose(2, 1, 0))
    if as_labels:
        if header.dtype == "float32":
            raise FormatError(f"{path}: labels require an integer datatype, got float32")
        return arr.astype(np.int32)
    return arr.astype(np.float64)


def _raw_from_payload(header, payload):
    nx, ny, nz = header.dims
    np_dtype = np.dtype(header.dtype).newbyteorder("<")
    if header.channels == 3:
        if payload.shape != (nx, ny, nz, 3):
            raise FormatError(
                f"payload shape {payload.shape} does not match header dims {header.dims} x 3"
            )
        return np.ascontiguousarray(payload.transpose(3, 2, 1, 0)).astype(np_dtype).tobytes()
    if payload.shape != (nx, ny, nz):
        raise FormatError(f"payload shape {payload.shape} does not match header dims {header.dims}")
    if header.dtype != "float32":
        info = np.iinfo(np.dtype(header.dtype))
        if payload.min() < info.min or payload.max() > info.max:
            raise FormatError(f"label values outside {header.dtype} range")
    return np.ascontiguousarray(payload.transpose(2, 1, 0)).astype(np_dtype).tobytes()


def write_volume(path, header: VolumeHeader, payload: np.ndarray) -> None:
    """Write a scalar volume, label volume or vector field in NIfTI-1 or rawvol form."""
    path = str(path)
    payload = np.asarray(payload)
    data = _raw_from_payload(header, payload)  # validates before any write
    if _is_rawvol(path):
        meta = {
            "dims": list(header.dims),
            "spacing": list(header.spacing),
            "dtype": header.dtype,
            "channels": header.channels,
        }
        try:
            with open(path + ".json", "w", encoding="utf-8") as fh:
                json.dump(meta, fh)
                fh.write("\n")
            with open(path, "wb") as fh:
                fh.write(data)
        except OSError as exc:
            raise OSError(f"cannot write {path!r}: {exc}") from exc
        return

    hdr = np.zeros((), dtype=_header_dtype)
    hdr["sizeof_hdr"] = _HEADER_SIZE
    hdr["regular"] = b"r"
    if header.channels == 3:
        hdr["dim"][0] = 5
        hdr["dim"][1:6] = (*header.dims, 1, 3)
        hdr["dim"][6:] = 1
        hdr["intent_code"] = _INTENT_VECTOR
    else:
        hdr["dim"][0] = 3
        hdr["dim"][1:4] = header.dims
        hdr["dim"][4:] = 1
    hdr["datatype"] = _DTYPE_CODES[header.dtype]
    hdr["bitpix"] = _BITPIX[header.dtype]
    hdr["pixdim"][0] = 1.0
    hdr["pixdim"][1:4] = header.spacing
    hdr["vox_offset"] = _VOX_OFFSET
    hdr["scl_slope"] = 1.0
    hdr["xyzt_units"] = 2  # mm
    hdr["descrip"] = b"patchreg"
    hdr["sform_code"] = 1
    hdr["srow_x"] = header.affine[0]
    hdr["srow_y"] = header.affine[1]
    hdr["srow_z"] = header.affine[2]
    hdr["magic"] = b"n+1\x00"
    try:
        with _open(path, "wb") as fh:
            fh.write(hdr.tobytes())
            fh.write(b"\x00\x00\x00\x00")  # no extensions
            fh.write(data)
    except OSError as exc:
        raise OSError(f"cannot write {path!r}: {exc}") from exc
