"""Versioned binary checkpoints.

Layout: magic, format version, a UTF-8 metadata block (key = value
lines), a name -> (shape, offset) index, then one contiguous float64
blob. Round-trips are bit-exact because arrays are written raw.
"""

from __future__ import annotations

import struct

import numpy as np

_MAGIC = b"PSCK"
_VERSION = 1


def save_arrays(path, arrays, metadata=None):
    """arrays: mapping name -> float64 ndarray. metadata: str -> str."""
    names = list(arrays)
    # asarray keeps 0-d arrays 0-d; tobytes() serializes C-order regardless.
    blobs = [np.asarray(arrays[n], dtype=np.float64) for n in names]
    meta_text = "".join(f"{k} = {v}\n" for k, v in (metadata or {}).items())
    meta_bytes = meta_text.encode("utf-8")

    index = bytearray()
    offset = 0
    for name, arr in zip(names, blobs):
        name_b = name.encode("utf-8")
        index += struct.pack("<H", len(name_b)) + name_b
        index += struct.pack("<B", arr.ndim)
        index += struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b""
        index += struct.pack("<Q", offset)
        offset += arr.nbytes

    with open(path, "wb") as f:
        f.write(struct.pack("<4sI", _MAGIC, _VERSION))
        f.write(struct.pack("<I", len(meta_bytes)))
        f.write(meta_bytes)
        f.write(struct.pack("<I", len(names)))
        f.write(bytes(index))
        f.write(struct.pack("<Q", offset))
        for arr in blobs:
            f.write(arr.tobytes())


def load_arrays(path):
    """Returns (arrays dict, metadata dict)."""
    with open(path, "rb") as f:
        magic, version = struct.unpack("<4sI", f.read(8))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack("<I", f.read(4))
        meta = {}
        for line in f.read(meta_len).decode("utf-8").splitlines():
            if "=" in line:
                k, v = line.split("=", 1)
                meta[k.strip()] = v.strip()
        (count,) = struct.unpack("<I", f.read(4))
        entries = []
        for _ in range(count):
            (name_len,) = struct.unpack("<H", f.read(2))
            name = f.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim)) if ndim else ()
            (offset,) = struct.unpack("<Q", f.read(8))
            entries.append((name, shape, offset))
        (blob_size,) = struct.unpack("<Q", f.read(8))
        blob = f.read(blob_size)

    arrays = {}
    for name, shape, offset in entries:
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).reshape(shape)
        arrays[name] = arr.copy()
    return arrays, meta


def save_model(path, model, vocab_symbols=None, extra_metadata=None):
    meta = {
        "aggregation_mode": model.aggregation_mode,
        "vocab_size": str(model.enc_cfg.vocab_size),
        "num_blocks": str(model.enc_cfg.num_blocks),
        "num_heads": str(model.enc_cfg.num_heads),
        "model_dim": str(model.enc_cfg.model_dim),
        "ffn_inner_dim": str(model.enc_cfg.ffn_inner_dim),
        "num_mels": str(model.dec_cfg.num_mels),
        "prenet_dims": f"{model.dec_cfg.prenet_dims[0]},{model.dec_cfg.prenet_dims[1]}",
        "recurrent_dims": f"{model.dec_cfg.recurrent_dims[0]},{model.dec_cfg.recurrent_dims[1]}",
        "reduction_factor": str(model.dec_cfg.reduction_factor),
        "postnet_channels": str(model.dec_cfg.postnet_channels),
        "max_steps": str(model.dec_cfg.max_steps),
    }
    if vocab_symbols:
        meta["vocab"] = " ".join(vocab_symbols)
    if extra_metadata:
        meta.update({k: str(v) for k, v in extra_metadata.items()})
    save_arrays(path, model.state_dict(), meta)


def load_model(path, rng=None):
    """Rebuild an AcousticModel (and its vocabulary list, when stored)."""
    from .decoder import DecoderConfig
    from .encoder import EncoderConfig
    from .model import AcousticModel

    arrays, meta = load_arrays(path)
    enc = EncoderConfig(vocab_size=int(meta["vocab_size"]),
                        num_blocks=int(meta["num_blocks"]),
                        num_heads=int(meta["num_heads"]),
                        model_dim=int(meta["model_dim"]),
                        ffn_inner_dim=int(meta["ffn_inner_dim"]))
    p1, p2 = (int(x) for x in meta["prenet_dims"].split(","))
    r1, r2 = (int(x) for x in meta["recurrent_dims"].split(","))
    dec = DecoderConfig(num_mels=int(meta["num_mels"]), prenet_dims=(p1, p2),
                        recurrent_dims=(r1, r2),
                        reduction_factor=int(meta["reduction_factor"]),
                        postnet_channels=int(meta["postnet_channels"]),
                        max_steps=int(meta["max_steps"]))
    model = AcousticModel(enc, dec, meta["aggregation_mode"],
                          rng or np.random.default_rng(0))
    model.load_state(arrays)
    vocab_symbols = meta.get("vocab", "").split() or None
    return model, meta, vocab_symbols
