"""Named parameters with explicit sharing.

A physical name owns a :class:`Tensor`. An alias is a logical name that
resolves to a physical one, so ``registry["qa/context_encoder/ffn/W_a"]`` and
``registry["qg/context_encoder/ffn/W_a"]`` can be the very same storage.
"""

from __future__ import annotations

from typing import Dict, Iterable, Mapping, Optional

import numpy

from tensor_api.tensor import Tensor


class ParameterRegistry:
    def __init__(self):
        self._tensors: Dict[str, Tensor] = {}
        self._aliases: Dict[str, str] = {}
        self._masks: Dict[str, numpy.ndarray] = {}

    def register(self, name: str, values: numpy.ndarray, update_mask: Optional[numpy.ndarray] = None) -> Tensor:
        """Add a trainable tensor; ``update_mask`` zeros select frozen entries."""
        if name in self._tensors or name in self._aliases:
            raise ValueError(f"Parameter '{name}' already exists.")
        tensor = Tensor(numpy.array(values, dtype=numpy.float64), requires_grad=True, name=name)
        self._tensors[name] = tensor
        if update_mask is not None:
            mask = numpy.asarray(update_mask, dtype=numpy.float64)
            if mask.shape != tensor.shape:
                raise ValueError(f"Update mask for '{name}' has shape {mask.shape}, expected {tensor.shape}.")
            self._masks[name] = mask
        return tensor

    def alias(self, name: str, target: str) -> None:
        if name in self._tensors or name in self._aliases:
            raise ValueError(f"Parameter '{name}' already exists.")
        if target not in self._tensors:
            raise ValueError(f"Alias target '{target}' not found.")
        self._aliases[name] = target

    def alias_prefix(self, prefix: str, target_prefix: str) -> None:
        """Alias every physical ``target_prefix/...`` as ``prefix/...``."""
        stem = target_prefix.rstrip("/") + "/"
        targets = [n for n in self._tensors if n.startswith(stem)]
        if not targets:
            raise ValueError(f"Alias target '{target_prefix}' not found.")
        for target in targets:
            self.alias(prefix.rstrip("/") + "/" + target[len(stem):], target)

    def resolve(self, name: str) -> str:
        if name in self._tensors:
            return name
        if name in self._aliases:
            return self._aliases[name]
        raise KeyError(f"Parameter '{name}' not found.")

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[self.resolve(name)]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors or name in self._aliases

    def __len__(self) -> int:
        return len(self._tensors)

    def scope(self, prefix: str) -> Dict[str, Tensor]:
        """Tensors under ``prefix/`` (physical or aliased), keyed by the remainder."""
        stem = prefix.rstrip("/") + "/"
        out = {}
        for name in list(self._tensors) + list(self._aliases):
            if name.startswith(stem):
                out[name[len(stem):]] = self[name]
        if not out:
            raise KeyError(f"Parameter scope '{prefix}' not found.")
        return out

    def has_scope(self, prefix: str) -> bool:
        stem = prefix.rstrip("/") + "/"
        return any(n.startswith(stem) for n in list(self._tensors) + list(self._aliases))

    def shares(self, a: str, b: str) -> bool:
        return self[a] is self[b]

    @property
    def physical(self) -> Dict[str, Tensor]:
        return dict(self._tensors)

    @property
    def aliases(self) -> Dict[str, str]:
        return dict(self._aliases)

    @property
    def masks(self) -> Dict[str, numpy.ndarray]:
        return dict(self._masks)

    def update_mask(self, name: str) -> Optional[numpy.ndarray]:
        return self._masks.get(self.resolve(name))

    def mask_gradients(self, grads: Mapping[str, numpy.ndarray]) -> Dict[str, numpy.ndarray]:
        return {name: g * self._masks[name] if name in self._masks else g for name, g in grads.items()}

    def census(self, prefixes: Optional[Iterable[str]] = None) -> int:
        """Number of scalar parameters, counting shared storage once."""
        if prefixes is None:
            return sum(t.size for t in self._tensors.values())
        stems = tuple(p.rstrip("/") + "/" for p in prefixes)
        return sum(t.size for n, t in self._tensors.items() if n.startswith(stems))
