"""Binary checkpoint container.

Layout::

    b"BFLW"            magic
    u32                format version
    u64                header length in bytes
    header             UTF-8 JSON: tensors (name, shape, dtype, offset, nbytes),
                       run config, config hash, permutations, transform
    payload            raw little-endian float64 tensors, in header order

All integers are little-endian. The header is written with sorted keys and
no whitespace, so saving the same networks twice gives identical bytes.
"""

import hashlib
import json
import struct

import numpy as np

from amortflow.amortizer import build_amortizer
from amortflow.config import RunConfig
from amortflow.exceptions import CheckpointError, ConfigurationError

MAGIC = b"BFLW"
VERSION = 1
_DTYPE = "<f8"


def encode(amortizer, run_config, meta=None):
    """Serialise networks and their config to ``bytes``."""
    tensors, chunks, offset = [], [], 0
    for name, value in amortizer.state_dict().items():
        raw = np.ascontiguousarray(value, dtype=_DTYPE).tobytes()
        tensors.append({"name": name, "shape": list(value.shape), "dtype": _DTYPE, "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = {
        "config": run_config.to_dict(),
        "config_hash": run_config.config_hash(),
        "permutations": amortizer.inn.permutation_indices(),
        "transform": amortizer.transform.to_dict(),
        "tensors": tensors,
        "meta": meta or {},
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<IQ", VERSION, len(head)) + head + b"".join(chunks)


def save_checkpoint(path, amortizer, run_config, meta=None):
    data = encode(amortizer, run_config, meta)
    with open(path, "wb") as fh:
        fh.write(data)
    return checkpoint_id(data)


def checkpoint_id(data):
    return hashlib.sha256(data).hexdigest()[:16]


def read_header(data):
    if len(data) < 16 or data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic bytes)")
    version, head_len = struct.unpack("<IQ", data[4:16])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    if 16 + head_len > len(data):
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(data[16 : 16 + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"corrupt checkpoint header: {err}") from None
    return header, 16 + head_len


def decode(data, expected_config=None, force=False):
    """Rebuild ``(amortizer, run_config, header)`` from checkpoint bytes.

    With ``expected_config`` the stored config hash must match unless ``force``.
    """
    header, start = read_header(data)
    try:
        run_config = RunConfig.from_dict(header["config"])
    except (ConfigurationError, KeyError) as err:
        raise CheckpointError(f"checkpoint config invalid: {err}") from None
    if run_config.config_hash() != header.get("config_hash"):
        raise CheckpointError("checkpoint config hash does not match its embedded config")
    if expected_config is not None and expected_config.config_hash() != header["config_hash"] and not force:
        raise CheckpointError("config hash differs from the checkpoint's (use --force to override)")
    payload = memoryview(data)[start:]
    state = {}
    for t in header["tensors"]:
        if t["dtype"] != _DTYPE:
            raise CheckpointError(f"unsupported dtype {t['dtype']} for {t['name']}")
        end = t["offset"] + t["nbytes"]
        if end > len(payload) or t["nbytes"] != 8 * int(np.prod(t["shape"], dtype=np.int64)):
            raise CheckpointError(f"tensor {t['name']} exceeds payload or has inconsistent size")
        state[t["name"]] = np.frombuffer(payload[t["offset"] : end], dtype=_DTYPE).reshape(t["shape"]).copy()
    model = run_config.build_model()
    amortizer = build_amortizer(model, run_config.network, run_config.seed, header["transform"])
    try:
        amortizer.inn.set_permutations(header["permutations"])
        amortizer.load_state_dict(state)
    except (KeyError, ValueError) as err:
        raise CheckpointError(f"checkpoint does not match its config: {err}") from None
    return amortizer, run_config, header


def load_checkpoint(path, expected_config=None, force=False):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as err:
        raise CheckpointError(f"cannot read checkpoint {path}: {err.strerror}") from None
    amortizer, run_config, header = decode(data, expected_config, force)
    header["id"] = checkpoint_id(data)
    return amortizer, run_config, header
