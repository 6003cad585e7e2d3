"""Key/value store instrumented with read/write trigger handlers.

Every configurator keeps its metadata in a TriggerStore.  Handlers can be
registered for four kinds of access (global read, global write, indexed
read, indexed write) and fire on the matching triggered operation.  The
untriggered operations bypass handlers entirely, which is what a handler
must use when it mutates the store, otherwise it would retrigger itself.

Read triggers fire before the value is fetched, so an indexed read handler
may lazily construct or refresh the value it guards.

The storage backend is a plain dict by default and can be hot-swapped for
any object honouring the mutable mapping contract (get/set/delete/contains
and iteration in insertion order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, MutableMapping

from .errors import (
    BackendContractViolation,
    InvalidKey,
    KeyNotFound,
    RecursionLimitExceeded,
)

DEFAULT_MAX_DEPTH = 16

_READ = "read"
_WRITE = "write"


@dataclass(frozen=True)
class TriggerKind:
    """One of the four trigger kinds: mode is "read" or "write", key is None
    for the global kinds and the guarded key for the indexed kinds."""

    mode: str
    key: str | None = None

    def __post_init__(self):
        if self.mode not in (_READ, _WRITE):
            raise ValueError(f"trigger mode must be 'read' or 'write', got {self.mode!r}")
        if self.key is not None:
            _check_key(self.key)

    @property
    def is_global(self) -> bool:
        return self.key is None


GLOBAL_READ = TriggerKind(_READ)
GLOBAL_WRITE = TriggerKind(_WRITE)


def indexed_read(key: str) -> TriggerKind:
    return TriggerKind(_READ, key)


def indexed_write(key: str) -> TriggerKind:
    return TriggerKind(_WRITE, key)


@dataclass(frozen=True)
class TriggerHandler:
    """A registered callback plus the extra values fixed at registration time.

    The callback receives a single list argument: element 0 is the store,
    element 1 is the key that was accessed, the rest are the extras.
    """

    handler_id: int
    kind: TriggerKind
    callback: Callable[[list], object]
    extras: tuple = field(default_factory=tuple)

    def fire(self, store: "TriggerStore", key: str) -> None:
        self.callback([store, key, *self.extras])


def _check_key(key) -> str:
    if not isinstance(key, str) or not key or key.split() != [key]:
        raise InvalidKey(f"invalid key: {key!r}")
    return key


class TriggerStore:
    """Ordered string-to-string mapping that fires handlers on triggered access.

    Handler firing order is fixed: all global handlers, then all handlers
    indexed on the accessed key, each group in registration order.  Nested
    triggered accesses performed by handlers are allowed up to ``max_depth``
    activations; beyond that RecursionLimitExceeded is raised.

    The mapping dunders are sugar: ``store[k]`` / ``store[k] = v`` are the
    triggered read/write, while iteration, ``in`` and ``len`` never trigger.
    """

    def __init__(self, backend: MutableMapping[str, str] | None = None,
                 max_depth: int = DEFAULT_MAX_DEPTH):
        if backend is None:
            backend = {}
        else:
            _validate_backend(backend)
        self._backend = backend
        self._handlers: dict[TriggerKind, list[TriggerHandler]] = {}
        self._next_id = 0
        self._depth = 0
        self._max_depth = max_depth

    # triggered access

    def write(self, key: str, value: str) -> None:
        _check_key(key)
        self._backend[key] = _check_value(value)
        self._fire(_WRITE, key)

    def read(self, key: str) -> str:
        _check_key(key)
        self._fire(_READ, key)
        if key not in self._backend:
            raise KeyNotFound(f"key not found: {key!r}")
        return self._backend[key]

    # untriggered access

    def untriggered_write(self, key: str, value: str) -> None:
        _check_key(key)
        self._backend[key] = _check_value(value)

    def untriggered_read(self, key: str) -> str:
        _check_key(key)
        if key not in self._backend:
            raise KeyNotFound(f"key not found: {key!r}")
        return self._backend[key]

    def delete(self, key: str) -> None:
        if key not in self._backend:
            raise KeyNotFound(f"key not found: {key!r}")
        del self._backend[key]

    # handler registry

    def register_trigger(self, kind: TriggerKind, callback: Callable[[list], object],
                         *extras) -> int:
        """Register ``callback`` for ``kind`` and return a handler id.

        The callback must accept one list argument: [store, key, *extras].
        """
        handler = TriggerHandler(self._next_id, kind, callback, tuple(extras))
        self._next_id += 1
        self._handlers.setdefault(kind, []).append(handler)
        return handler.handler_id

    def deregister_trigger(self, handler_id: int) -> None:
        for handlers in self._handlers.values():
            for i, handler in enumerate(handlers):
                if handler.handler_id == handler_id:
                    del handlers[i]
                    return
        raise ValueError(f"no trigger registered with id {handler_id}")

    def _fire(self, mode: str, key: str) -> None:
        pending = list(self._handlers.get(TriggerKind(mode), ()))
        pending += self._handlers.get(TriggerKind(mode, key), ())
        if not pending:
            return
        if self._depth >= self._max_depth:
            raise RecursionLimitExceeded(
                f"trigger nesting exceeded {self._max_depth} activations at key {key!r}")
        self._depth += 1
        try:
            for handler in pending:
                handler.fire(self, key)
        finally:
            self._depth -= 1

    @property
    def activation_depth(self) -> int:
        """Number of handler activations currently on the stack (0 outside triggers)."""
        return self._depth

    # backend management

    def swap_backend(self, new_backend: MutableMapping[str, str]) -> None:
        """Move all entries into ``new_backend`` and use it from now on.

        Trigger registrations survive the swap.  The candidate is probed for
        mapping conformance first and rejected with BackendContractViolation.
        """
        _validate_backend(new_backend)
        for key, value in self._backend.items():
            new_backend[key] = value
        self._backend = new_backend

    @property
    def backend(self) -> MutableMapping[str, str]:
        return self._backend

    # mapping sugar (iteration and membership never trigger)

    def __getitem__(self, key: str) -> str:
        return self.read(key)

    def __setitem__(self, key: str, value: str) -> None:
        self.write(key, value)

    def __contains__(self, key) -> bool:
        return key in self._backend

    def __iter__(self) -> Iterator[str]:
        return iter(self._backend)

    def __len__(self) -> int:
        return len(self._backend)

    def keys(self):
        return self._backend.keys()

    def items(self):
        return self._backend.items()


def _check_value(value) -> str:
    if not isinstance(value, str):
        raise TypeError(f"store values are strings, got {type(value).__name__}")
    return value


_PROBE_A = "__runjob_backend_probe_a__"
_PROBE_B = "__runjob_backend_probe_b__"


def _validate_backend(backend) -> None:
    """Probe set/get/contains/iterate/delete and insertion-order iteration."""
    try:
        backend[_PROBE_A] = "a"
        backend[_PROBE_B] = "b"
        if backend[_PROBE_A] != "a" or backend[_PROBE_B] != "b":
            raise BackendContractViolation("backend does not return stored values")
        if _PROBE_A not in backend:
            raise BackendContractViolation("backend does not support membership tests")
        probes = [k for k in backend if k in (_PROBE_A, _PROBE_B)]
        if probes != [_PROBE_A, _PROBE_B]:
            raise BackendContractViolation("backend does not iterate in insertion order")
        del backend[_PROBE_A]
        del backend[_PROBE_B]
        if _PROBE_A in backend:
            raise BackendContractViolation("backend does not delete keys")
    except BackendContractViolation:
        raise
    except Exception as exc:
        raise BackendContractViolation(f"backend failed the mapping probe: {exc}") from exc
