"""The Linker: configurator container, communication bus, and framework driver.

It owns the attach-ordered configurator list, the script-object repository,
framework message groups, the strict/lenient dependency mode, and the
declarative state dump.  All cross-namespace parameter lookup funnels
through :meth:`Linker.lookup_parameter`, which is where visibility rules
and reference-cycle detection live.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

from .configurator import Configurator, ConfiguratorDescription, Outcome, parse_identifier
from .errors import (
    AmbiguousIdentifier,
    CircularReference,
    DuplicateIdentifier,
    RunjobError,
    UnknownConfigurator,
    UnknownType,
    UnsatisfiedDependency,
    VisibilityViolation,
)
from .scriptgen import ScriptGenRegistration, ScriptObject

DEFAULT_RUN_MODE = "foreground"


@dataclass(frozen=True)
class DispatchRecord:
    message: str
    description: ConfiguratorDescription
    outcome: Outcome


class Linker:
    def __init__(self, *, strict: bool = True, output_dir="." , run_mode: str = DEFAULT_RUN_MODE,
                 types: dict | None = None):
        self._types: dict[str, type] = dict(types or {})
        self._configurators: dict[tuple[str, str], Configurator] = {}
        self.repository: list[ScriptObject] = []
        self.framework_groups: dict[str, list[str]] = {}
        self.dispatch_log: list[DispatchRecord] = []
        self.strict = bool(strict)
        self.output_dir = Path(output_dir)
        self.run_mode = run_mode
        self._registrations: list[ScriptGenRegistration] = []
        self._next_sequence = 0
        self._resolution_stack: list[tuple[str, str, str]] = []

    # type registry

    def register_type(self, type_name: str, factory) -> None:
        self._types[type_name] = factory

    def knows_type(self, type_name: str) -> bool:
        return type_name in self._types

    # container

    @property
    def configurators(self) -> list[Configurator]:
        return list(self._configurators.values())

    def attach(self, type_name: str, instance_name: str | None = None) -> str:
        """Instantiate and append a configurator; returns its identifier.

        Strict mode validates the new configurator's requirements against
        the attached set and rolls the attach back on failure.
        """
        factory = self._types.get(type_name)
        if factory is None:
            raise UnknownType(f"unknown configurator type {type_name!r}")
        description = ConfiguratorDescription(type_name, instance_name)
        key = (description.type_name, description.instance_name)
        if key in self._configurators:
            raise DuplicateIdentifier(f"{description.identifier!r} is already attached")
        cfg = factory(description)
        cfg.bind(self)
        self._configurators[key] = cfg
        try:
            for registration in self._registrations:
                if registration.delegator_type == type_name:
                    self._apply_registration(registration, cfg)
            if self.strict:
                self._validate_requirements(cfg)
        except Exception:
            del self._configurators[key]
            raise
        return description.identifier

    def _validate_requirements(self, cfg: Configurator) -> None:
        attached = [c.description for c in self._configurators.values()]
        for requirement in cfg.requirements:
            if not any(requirement.pattern.matches(d) for d in attached):
                raise UnsatisfiedDependency(
                    f"{cfg.identifier}: requirement {requirement.pattern.render()!r} "
                    "matches no attached configurator")

    def find(self, identifier) -> Configurator:
        """Resolve "Type", "Type named Name", or a unique instance name.

        Single tokens match a type-named configurator first; failing that,
        exactly one attached instance with that instance name.
        """
        if isinstance(identifier, str):
            tokens = identifier.split()
        else:
            tokens = list(identifier)
        type_name, instance = parse_identifier(tokens)
        if instance is not None:
            cfg = self._configurators.get((type_name, instance))
            if cfg is None:
                raise UnknownConfigurator(f"no configurator {type_name} named {instance}")
            return cfg
        cfg = self._configurators.get((type_name, type_name))
        if cfg is not None:
            return cfg
        by_instance = [c for c in self._configurators.values()
                       if c.description.instance_name == type_name]
        if len(by_instance) == 1:
            return by_instance[0]
        if len(by_instance) > 1:
            raise AmbiguousIdentifier(
                f"{type_name!r} names {len(by_instance)} attached configurators")
        raise UnknownConfigurator(f"no configurator matches {type_name!r}")

    def find_by_description(self, description: ConfiguratorDescription) -> Configurator:
        cfg = self._configurators.get((description.type_name, description.instance_name))
        if cfg is None:
            raise UnknownConfigurator(f"no configurator {description.identifier!r}")
        return cfg

    def route(self, identifier, macro) -> None:
        """Issue one macro command to the identified configurator."""
        self.find(identifier).apply_macro(macro, self)

    # scriptgen registrations

    def register_delegation(self, scriptgen: Configurator, delegator_type: str,
                            messages=("MakeJob",)) -> None:
        if delegator_type not in self._types:
            raise UnknownType(f"unknown configurator type {delegator_type!r}")
        registration = ScriptGenRegistration(
            scriptgen.description, delegator_type, frozenset(messages))
        if registration not in self._registrations:
            self._registrations.append(registration)
        for cfg in self._configurators.values():
            if cfg.description.type_name == delegator_type:
                self._apply_registration(registration, cfg)

    def _apply_registration(self, registration: ScriptGenRegistration,
                            cfg: Configurator) -> None:
        from .configurator import DependencyPattern  # local to avoid cycle at import

        for message in registration.messages:
            cfg.delegations[message] = registration.scriptgen
        cfg.add_requirement(DependencyPattern(registration.scriptgen.type_name,
                                              registration.scriptgen.instance_name),
                            auto=True)

    @property
    def registrations(self) -> list[ScriptGenRegistration]:
        return list(self._registrations)

    # framework

    def run_framework(self, *messages: str) -> list[DispatchRecord]:
        """Dispatch each message to every configurator in attach order.

        Tokens naming a framework group expand to the group's messages.  The
        first handler error aborts the run, annotated with the failing
        configurator's description.
        """
        expanded: list[str] = []
        for message in messages:
            expanded.extend(self.framework_groups.get(message, [message]))
        records = []
        for message in expanded:
            for cfg in list(self._configurators.values()):
                try:
                    outcome = cfg.handle_framework(message, self)
                except RunjobError as exc:
                    exc.dispatch_context = (message, cfg.identifier)
                    raise
                record = DispatchRecord(message, cfg.description, outcome)
                self.dispatch_log.append(record)
                records.append(record)
        return records

    def define_group(self, name: str, messages) -> None:
        self.framework_groups[name] = list(messages)

    # parameter lookup

    def lookup_parameter(self, requester: ConfiguratorDescription | None,
                         target_identifier, key: str) -> str:
        """Resolve ``key`` in the target namespace on behalf of ``requester``.

        Strict mode demands a declared requirement of the requester matching
        the target; lookups inside one's own namespace are always allowed.
        A requester of None (direct API use) bypasses the visibility check.
        """
        target = self.find(target_identifier)
        if self.strict and requester is not None and target.description != requester:
            requester_cfg = self.find_by_description(requester)
            if not any(r.pattern.matches(target.description)
                       for r in requester_cfg.requirements):
                raise VisibilityViolation(
                    f"{requester.identifier} reads {target.identifier}:{key} "
                    "without a declared dependency")
        return target.resolve_value(key, self)

    @contextmanager
    def resolution_guard(self, description: ConfiguratorDescription, key: str):
        frame = (description.type_name, description.instance_name, key)
        if frame in self._resolution_stack:
            chain = " -> ".join(f"{t}:{k}" if t == i else f"{t} named {i}:{k}"
                                for t, i, k in self._resolution_stack + [frame])
            raise CircularReference(f"reference cycle: {chain}")
        self._resolution_stack.append(frame)
        try:
            yield
        finally:
            self._resolution_stack.pop()

    # script object repository

    def new_script_object(self, object_id: str, target: str, payload: str,
                          producer: ConfiguratorDescription,
                          kind: str = "fragment") -> ScriptObject:
        obj = ScriptObject(object_id, target, payload, producer, self._next_sequence, kind)
        self._next_sequence += 1
        self.repository.append(obj)
        return obj

    def add_script_object(self, obj: ScriptObject) -> None:
        self.repository.append(obj)
        self._next_sequence = max(self._next_sequence, obj.sequence + 1)

    def collect_script_objects(self, target: str | None = None,
                               producer: ConfiguratorDescription | None = None,
                               kind: str | None = None) -> list[ScriptObject]:
        matches = [obj for obj in self.repository
                   if (target is None or obj.target == target)
                   and (producer is None or obj.producer == producer)
                   and (kind is None or obj.kind == kind)]
        matches.sort(key=lambda obj: obj.sequence)
        return matches

    def remove_script_objects(self, producer: ConfiguratorDescription | None = None,
                              object_id: str | None = None) -> int:
        keep = [obj for obj in self.repository
                if not ((producer is None or obj.producer == producer)
                        and (object_id is None or obj.object_id == object_id))]
        removed = len(self.repository) - len(keep)
        self.repository = keep
        return removed

    def materialize(self, obj: ScriptObject) -> Path:
        """Write a script object under the output directory and return the path.

        Shell artifacts get the executable bit; DAG composites are written
        as ``workflow.dag``.
        """
        self.output_dir.mkdir(parents=True, exist_ok=True)
        if obj.target == "dag":
            path = self.output_dir / "workflow.dag"
        else:
            path = self.output_dir / f"{obj.object_id}.sh"
        with open(path, "w", newline="\n") as handle:
            handle.write(obj.payload)
        if path.suffix == ".sh":
            path.chmod(0o755)
        return path

    # declarative dump

    def dump_state(self, resolve: bool = False) -> str:
        """Serialize attach/configure state as a re-sourceable macro script.

        With ``resolve`` the lazy definitions are snapshotted to their
        current literals, turning the dump into a provenance record instead
        of a live description.
        """
        lines = ["# runjob state dump"]
        configurators = list(self._configurators.values())
        for cfg in configurators:
            lines.append(f"attach {cfg.identifier}")
        # registration order matters when two scriptgens claim one type
        for registration in self._registrations:
            owner = self.find_by_description(registration.scriptgen)
            lines.append(f"cfg {owner.identifier} register {registration.delegator_type}")
        for cfg in configurators:
            for command in cfg.dump_commands(resolve, self):
                lines.append(f"cfg {cfg.identifier} {command}")
        for name, messages in self.framework_groups.items():
            lines.append(f"framework group {name} {' '.join(messages)}")
        return "\n".join(lines) + "\n"
