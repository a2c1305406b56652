"""Named parameter collections and their JSON checkpoint format."""

from __future__ import annotations

import hashlib
import json
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .autodiff import Tensor, parameter

CHECKPOINT_FORMAT = "temporal-signed-params/1"


class ParamSet:
    """Ordered mapping of name -> trainable :class:`Tensor`."""

    def __init__(self, arrays=None):
        self._tensors: OrderedDict[str, Tensor] = OrderedDict()
        for name, value in (arrays or {}).items():
            self.add(name, value)

    def add(self, name, value):
        self._tensors[name] = parameter(value, name=name)
        return self._tensors[name]

    def __getitem__(self, name) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def names(self):
        return list(self._tensors)

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data for k, t in self._tensors.items()}

    def grads(self) -> dict[str, np.ndarray]:
        return {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for k, t in self._tensors.items()}

    def zero_grad(self):
        for t in self._tensors.values():
            t.grad = None

    def copy(self) -> "ParamSet":
        return ParamSet({k: t.data.copy() for k, t in self._tensors.items()})

    def frozen(self) -> dict[str, Tensor]:
        """Constant (non-differentiable) views of the current values."""
        return {k: Tensor(t.data.copy(), name=k) for k, t in self._tensors.items()}

    def num_values(self) -> int:
        return int(sum(t.data.size for t in self._tensors.values()))

    def version(self) -> str:
        h = hashlib.sha1()
        for k, t in self._tensors.items():
            h.update(k.encode())
            h.update(np.ascontiguousarray(t.data).tobytes())
        return h.hexdigest()

    def to_manifest(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "dtype": "float64",
            "tensors": {k: {"shape": list(t.data.shape), "data": t.data.ravel().tolist()}
                        for k, t in self._tensors.items()},
        }

    @classmethod
    def from_manifest(cls, manifest: dict) -> "ParamSet":
        if manifest.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {manifest.get('format')!r}")
        out = cls()
        for k, spec in manifest["tensors"].items():
            out.add(k, np.asarray(spec["data"], dtype=np.float64).reshape(spec["shape"]))
        return out


def save_checkpoint(path, groups: dict[str, ParamSet], extra=None):
    doc = {"format": CHECKPOINT_FORMAT, "groups": {g: p.to_manifest() for g, p in groups.items()}}
    if extra:
        doc["extra"] = extra
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_checkpoint(path) -> dict[str, ParamSet]:
    doc = json.loads(Path(path).read_text())
    return {g: ParamSet.from_manifest(m) for g, m in doc["groups"].items()}


def xavier(rng, fan_in, fan_out, shape=None):
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, std, size=shape or (fan_in, fan_out))
