"""Single-file checkpoint: text manifest followed by a little-endian payload.

Layout::

    PULSEGAN-CKPT\\n
    <manifest byte length>\\n
    <JSON manifest>
    <payload>

The manifest holds the header (format version, layer plan, training
hyperparameters, RNG and scheduler state, epoch) and one record per array
with its name, dtype, shape, Adam step, byte offset and length. Each
parameter contributes three consecutive arrays (values, first moment,
second moment); buffers contribute one. A SHA-256 of the payload guards
against truncation.
"""
from __future__ import annotations

import hashlib
import json

import numpy as np

from .errors import CheckpointError
from .io import atomic_write_bytes
from .models import NetPlan
from .training import GanState, TrainConfig

MAGIC = b"PULSEGAN-CKPT\n"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


def _records(store):
    for p in store:
        yield {"name": p.name, "kind": "param", "shape": list(p.shape), "step": p.step}, (p.value, p.m, p.v)
    for name, b in store.buffers.items():
        yield {"name": name, "kind": "buffer", "shape": list(b.shape), "step": 0}, (b,)


def dumps(state: GanState) -> bytes:
    payload = bytearray()
    records = []
    stores = [("generator", state.gen.store)]
    if state.disc is not None:
        stores.append(("discriminator", state.disc.store))
    for net, store in stores:
        for rec, arrays in _records(store):
            rec = dict(rec, net=net, dtype="float64", offset=len(payload))
            for a in arrays:
                payload += np.ascontiguousarray(a, dtype=_DTYPE).tobytes(order="C")
            rec["nbytes"] = len(payload) - rec["offset"]
            records.append(rec)
    header = {
        "format_version": FORMAT_VERSION,
        "plan": state.cfg.plan.to_dict(),
        "hyperparameters": state.cfg.to_dict(),
        "rng_seed": state.cfg.seed,
        "rng_state": state.rng.bit_generator.state,
        "scheduler": state.scheduler.state_dict(),
        "epoch": state.epoch,
        "has_discriminator": state.disc is not None,
        "payload_sha256": hashlib.sha256(bytes(payload)).hexdigest(),
        "payload_nbytes": len(payload),
    }
    manifest = json.dumps({"header": header, "records": records}, sort_keys=True, indent=1).encode()
    return MAGIC + str(len(manifest)).encode() + b"\n" + manifest + bytes(payload)


def save_checkpoint(state: GanState, path):
    atomic_write_bytes(path, dumps(state))


def _parse(blob: bytes):
    if not blob.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file (bad magic)")
    rest = blob[len(MAGIC):]
    nl = rest.find(b"\n")
    if nl < 0:
        raise CheckpointError("corrupt manifest: missing length line")
    try:
        mlen = int(rest[:nl])
        manifest = json.loads(rest[nl + 1:nl + 1 + mlen].decode())
        header, records = manifest["header"], manifest["records"]
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupt manifest: {exc}") from exc
    payload = rest[nl + 1 + mlen:]
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {header.get('format_version')} "
            f"(expected {FORMAT_VERSION})"
        )
    if len(payload) != header["payload_nbytes"] or \
            hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise CheckpointError("corrupt manifest: payload truncated or checksum mismatch")
    return header, records, payload


def loads(blob: bytes) -> GanState:
    header, records, payload = _parse(blob)
    plan = NetPlan.from_dict(header["plan"])
    cfg = TrainConfig.from_dict(header["hyperparameters"], plan)
    state = GanState(cfg, with_discriminator=header["has_discriminator"])
    stores = {"generator": state.gen.store}
    if state.disc is not None:
        stores["discriminator"] = state.disc.store
    seen = set()
    for rec in records:
        store = stores.get(rec["net"])
        if store is None:
            raise CheckpointError(f"record for unknown network {rec['net']!r}")
        shape = tuple(rec["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        n_arrays = 3 if rec["kind"] == "param" else 1
        if rec["nbytes"] != n_arrays * count * _DTYPE.itemsize:
            raise CheckpointError(f"record {rec['name']}: size does not match shape")
        flat = np.frombuffer(payload, dtype=_DTYPE, count=n_arrays * count, offset=rec["offset"])
        arrays = [flat[i * count:(i + 1) * count].reshape(shape) for i in range(n_arrays)]
        try:
            if rec["kind"] == "param":
                p = store[rec["name"]]
                if p.shape != shape:
                    raise CheckpointError(f"record {rec['name']}: shape {shape} != {p.shape}")
                p.value[...], p.m[...], p.v[...] = arrays
                p.step = int(rec["step"])
                p.zero_grad()
            else:
                buf = store.buffers[rec["name"]]
                if buf.shape != shape:
                    raise CheckpointError(f"record {rec['name']}: shape mismatch")
                buf[...] = arrays[0]
        except KeyError as exc:
            raise CheckpointError(f"unknown record {rec['name']!r}") from exc
        seen.add((rec["net"], rec["name"]))
    for net, store in stores.items():
        for name in list(store.params) + list(store.buffers):
            if (net, name) not in seen:
                raise CheckpointError(f"checkpoint is missing record {name!r}")
    state.rng.bit_generator.state = header["rng_state"]
    state.scheduler.load_state_dict(header["scheduler"])
    state.epoch = int(header["epoch"])
    return state


def load_checkpoint(path) -> GanState:
    with open(path, "rb") as fh:
        return loads(fh.read())
