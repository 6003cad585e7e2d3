"""Configurators: named metadata packages that describe one workflow step.

A configurator owns a TriggerStore of key/value metadata, a synonym table,
declared dependencies on other configurators, framework-message handlers,
and a chain of macro handlers ending in the base parser (additem, define,
addreq, synonym, oncall).  Attached to a linker it becomes a namespace;
values defined as references resolve lazily through the linker on every
read.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import (
    InvalidKey,
    KeyNotFound,
    MacroParseError,
    NoConstructRegistered,
    RunjobError,
    UnknownMacro,
    UnsatisfiedDependency,
)
from .trigger_store import TriggerStore, indexed_read


def _check_token(token, what: str = "token") -> str:
    if not isinstance(token, str) or not token or token.split() != [token]:
        raise InvalidKey(f"invalid {what}: {token!r}")
    return token


@dataclass(frozen=True)
class ConfiguratorDescription:
    """Identity of a configurator: type, instance name, version.

    The instance name defaults to the type name; the rendered identifier is
    then just the type ("HelloWorldScriptGen") instead of the full
    "HelloWorld named English" form.
    """

    type_name: str
    instance_name: str | None = None
    version: str = "1"

    def __post_init__(self):
        _check_token(self.type_name, "type name")
        if self.instance_name is None:
            object.__setattr__(self, "instance_name", self.type_name)
        else:
            _check_token(self.instance_name, "instance name")

    @property
    def identifier(self) -> str:
        if self.instance_name == self.type_name:
            return self.type_name
        return f"{self.type_name} named {self.instance_name}"

    @property
    def slug(self) -> str:
        """Filesystem/DAG-safe form of the identifier."""
        if self.instance_name == self.type_name:
            return self.type_name
        return f"{self.type_name}_{self.instance_name}"


def parse_identifier(tokens: Sequence[str]) -> tuple[str, str | None]:
    """Parse "Type" or "Type named Name" token forms."""
    if len(tokens) == 1:
        return tokens[0], None
    if len(tokens) == 3 and tokens[1] == "named":
        return tokens[0], tokens[2]
    raise MacroParseError(
        "malformed configurator identifier: " + (" ".join(tokens) or "<empty>"))


@dataclass(frozen=True)
class DependencyPattern:
    """Requirement pattern matched against attached configurator descriptions.

    ``instance_name``/``version`` of None match anything, so "addreq Step"
    is satisfied by every attached Step instance.
    """

    type_name: str
    instance_name: str | None = None
    version: str | None = None

    def matches(self, description: ConfiguratorDescription) -> bool:
        if self.type_name != description.type_name:
            return False
        if self.instance_name is not None and self.instance_name != description.instance_name:
            return False
        if self.version is not None and self.version != description.version:
            return False
        return True

    def render(self) -> str:
        if self.instance_name is None:
            return self.type_name
        return f"{self.type_name} named {self.instance_name}"

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "DependencyPattern":
        type_name, instance = parse_identifier(tokens)
        return cls(type_name, instance)


@dataclass(frozen=True)
class Requirement:
    pattern: DependencyPattern
    auto: bool = False  # implied by a scriptgen registration; not dumped


@dataclass(frozen=True)
class Outcome:
    """Result of dispatching one framework message to one configurator."""

    kind: str  # "Handled" | "Delegated" | "Skipped"
    target: ConfiguratorDescription | None = None

    def __str__(self) -> str:
        if self.kind == "Delegated":
            return f"Delegated to {self.target.identifier}"
        return self.kind


HANDLED = Outcome("Handled")
SKIPPED = Outcome("Skipped")


def delegated(target: ConfiguratorDescription) -> Outcome:
    return Outcome("Delegated", target)


@dataclass(frozen=True)
class ValueExpression:
    """Right-hand side of a define: literal text, a cross-namespace reference,
    a synonym-table lookup, or a registered construct function."""

    kind: str  # "literal" | "reference" | "synonym" | "construct"
    text: str  # literal value, or the original ::-token for the other kinds
    ref: tuple[str, str] | None = None  # (identifier token, remote key)
    synonym_key: str | None = None  # explicit ::synonym:key form

    @classmethod
    def literal(cls, value: str) -> "ValueExpression":
        return cls("literal", value)

    @classmethod
    def reference(cls, identifier: str, key: str) -> "ValueExpression":
        return cls("reference", f"::{identifier}:{key}", ref=(identifier, key))

    @classmethod
    def synonym(cls, key: str | None = None) -> "ValueExpression":
        text = "::synonym" if key is None else f"::synonym:{key}"
        return cls("synonym", text, synonym_key=key)

    @classmethod
    def construct(cls) -> "ValueExpression":
        return cls("construct", "::construct")


def parse_expression(tokens: Sequence[str]) -> ValueExpression:
    """Parse define expression tokens.

    A leading ``::`` token selects the non-literal forms (::construct,
    ::synonym, ::synonym:key, ::Identifier:key); anything else is the
    literal rest-of-line joined with single spaces.
    """
    if not tokens:
        raise MacroParseError("define requires an expression")
    head = tokens[0]
    if head.startswith("::"):
        if len(tokens) != 1:
            raise MacroParseError(f"unexpected tokens after expression {head!r}")
        body = head[2:]
        if body == "construct":
            return ValueExpression.construct()
        if body == "synonym":
            return ValueExpression.synonym()
        if body.startswith("synonym:"):
            key = body[len("synonym:"):]
            if not key:
                raise MacroParseError(f"malformed synonym expression {head!r}")
            return ValueExpression.synonym(key)
        identifier, sep, key = body.partition(":")
        if not sep or not identifier or not key:
            raise MacroParseError(f"malformed reference {head!r}")
        return ValueExpression.reference(identifier, key)
    return ValueExpression.literal(" ".join(tokens))


@dataclass
class _Definition:
    expression: ValueExpression
    trigger_id: int | None = None  # installed read trigger for the lazy kinds


class Configurator:
    """Base configurator: metadata store plus macro and framework plumbing.

    Subclasses declare schema keys in ``__init__``, register framework
    handlers with :meth:`register_framework_handler`, and extend the macro
    language with :meth:`add_macro_handler` (new handlers run before the
    base parser, which always stays last in the chain).
    """

    STATIC_REQUIREMENTS: tuple[DependencyPattern, ...] = ()

    def __init__(self, description: ConfiguratorDescription):
        self.description = description
        self.store = TriggerStore()
        self.synonyms: dict[str, tuple[str, str]] = {}
        self.requirements: list[Requirement] = []
        self.delegations: dict[str, ConfiguratorDescription] = {}
        self._framework_handlers: dict[str, Callable] = {}
        self._macro_handlers: list[Callable] = [self._base_macro_handler]
        self._stored_commands: dict[str, list[str]] = {}
        self._constructors: dict[str, Callable] = {}
        self._definitions: dict[str, _Definition] = {}
        self._linker = None
        self.register_framework_handler("Reset", self._handle_reset)
        for pattern in self.STATIC_REQUIREMENTS:
            self.add_requirement(pattern)

    @property
    def identifier(self) -> str:
        return self.description.identifier

    @property
    def linker(self):
        return self._linker

    def bind(self, linker) -> None:
        """Called by the linker on attach."""
        self._linker = linker

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.identifier!r}>"

    # macro handling

    def add_macro_handler(self, handler: Callable[[list], bool]) -> None:
        """Insert a macro handler ahead of the base parser.

        A handler takes the token list and returns True when it consumed the
        macro.  The base parser stays last.
        """
        self._macro_handlers.insert(len(self._macro_handlers) - 1, handler)

    def apply_macro(self, macro, linker=None) -> None:
        """Route one macro command through the handler chain."""
        if linker is not None:
            self._linker = self._linker or linker
        tokens = macro.split() if isinstance(macro, str) else list(macro)
        if not tokens:
            raise MacroParseError("empty macro")
        for handler in list(self._macro_handlers):
            if handler(tokens):
                return
        raise UnknownMacro(f"{self.identifier}: unknown macro {tokens[0]!r}")

    def _base_macro_handler(self, tokens: list[str]) -> bool:
        verb = tokens[0]
        if verb == "additem":
            if len(tokens) != 2:
                raise MacroParseError("usage: additem <key>")
            self.add_item(tokens[1])
        elif verb == "define":
            if len(tokens) < 3:
                raise MacroParseError("usage: define <key> <expression>")
            self.define(tokens[1], parse_expression(tokens[2:]))
        elif verb == "addreq":
            if len(tokens) < 2:
                raise MacroParseError("usage: addreq <cfg-identifier>")
            self.add_requirement(DependencyPattern.from_tokens(tokens[1:]))
        elif verb == "synonym":
            if len(tokens) != 3:
                raise MacroParseError("usage: synonym <key> ::<cfg-identifier>:<key>")
            target = parse_expression(tokens[2:])
            if target.kind != "reference":
                raise MacroParseError(f"synonym target must be a reference, got {tokens[2]!r}")
            self.set_synonym(tokens[1], target.ref)
        elif verb == "oncall":
            if len(tokens) < 4 or tokens[2] != "do":
                raise MacroParseError("usage: oncall <message> do <macro>")
            self.store_oncall(tokens[1], tokens[3:])
        else:
            return False
        return True

    def _check_macro_syntax(self, tokens: list[str]) -> None:
        """Arity/shape check for base verbs without executing anything.

        Non-base verbs are accepted here and validated by their handler when
        the command eventually runs.
        """
        if not tokens:
            raise MacroParseError("empty macro")
        verb = tokens[0]
        if verb == "additem" and len(tokens) != 2:
            raise MacroParseError("usage: additem <key>")
        elif verb == "define":
            if len(tokens) < 3:
                raise MacroParseError("usage: define <key> <expression>")
            parse_expression(tokens[2:])
        elif verb == "addreq":
            if len(tokens) < 2:
                raise MacroParseError("usage: addreq <cfg-identifier>")
            DependencyPattern.from_tokens(tokens[1:])
        elif verb == "synonym" and len(tokens) != 3:
            raise MacroParseError("usage: synonym <key> ::<cfg-identifier>:<key>")
        elif verb == "oncall":
            if len(tokens) < 4 or tokens[2] != "do":
                raise MacroParseError("usage: oncall <message> do <macro>")
            self._check_macro_syntax(tokens[3:])

    # base metadata operations

    def add_item(self, key: str) -> None:
        """Declare a metadata key; existing values survive re-declaration."""
        _check_token(key, "key")
        if key not in self.store:
            self.store.untriggered_write(key, "")

    def define(self, key: str, expression) -> None:
        """Set ``key`` to a literal or install a lazy resolution trigger.

        References, synonym lookups and constructs are installed as indexed
        read triggers: every read re-resolves through the linker, so changes
        upstream (or a fresh construct result) are always visible.
        """
        _check_token(key, "key")
        if isinstance(expression, str):
            expression = ValueExpression.literal(expression)
        old = self._definitions.pop(key, None)
        if old is not None and old.trigger_id is not None:
            self.store.deregister_trigger(old.trigger_id)
        if expression.kind == "literal":
            self._definitions[key] = _Definition(expression)
            self.store.write(key, expression.text)
            return
        if expression.kind == "construct" and key not in self._constructors:
            raise NoConstructRegistered(
                f"{self.identifier}: no construct function registered for {key!r}")
        if key not in self.store:
            self.store.untriggered_write(key, "")
        trigger_id = self.store.register_trigger(
            indexed_read(key), self._make_resolver(key, expression))
        self._definitions[key] = _Definition(expression, trigger_id)

    def _make_resolver(self, key: str, expression: ValueExpression):
        def resolve(args):
            value = self._evaluate_expression(key, expression)
            self.store.untriggered_write(key, value)
        return resolve

    def _evaluate_expression(self, key: str, expression: ValueExpression) -> str:
        if expression.kind == "literal":
            return expression.text
        if expression.kind == "construct":
            fn = self._constructors.get(key)
            if fn is None:
                raise NoConstructRegistered(
                    f"{self.identifier}: no construct function registered for {key!r}")
            return str(fn(self, self._linker))
        if expression.kind == "synonym":
            lookup = expression.synonym_key or key
            target = self.synonyms.get(lookup)
            if target is None:
                raise KeyNotFound(f"{self.identifier}: no synonym defined for {lookup!r}")
            identifier, remote_key = target
        else:  # reference
            identifier, remote_key = expression.ref
        if self._linker is None:
            raise RunjobError(
                f"{self.identifier}: cannot resolve {expression.text!r} without a linker")
        return self._linker.lookup_parameter(self.description, identifier, remote_key)

    def add_requirement(self, pattern, auto: bool = False) -> Requirement:
        """Record a dependency; strict linkers validate it immediately."""
        if not isinstance(pattern, DependencyPattern):
            pattern = DependencyPattern.from_tokens(
                pattern.split() if isinstance(pattern, str) else pattern)
        for index, existing in enumerate(self.requirements):
            if existing.pattern == pattern:
                if existing.auto and not auto:
                    # an explicit addreq outranks the registration-implied edge
                    self.requirements[index] = Requirement(pattern, auto=False)
                    return self.requirements[index]
                return existing
        if self._linker is not None and self._linker.strict:
            if not any(pattern.matches(cfg.description) for cfg in self._linker.configurators):
                raise UnsatisfiedDependency(
                    f"{self.identifier}: requirement {pattern.render()!r} matches "
                    "no attached configurator")
        requirement = Requirement(pattern, auto)
        self.requirements.append(requirement)
        return requirement

    def set_synonym(self, key: str, target: tuple[str, str]) -> None:
        _check_token(key, "key")
        identifier, remote_key = target
        self.synonyms[key] = (_check_token(identifier, "identifier"),
                              _check_token(remote_key, "key"))

    def store_oncall(self, message: str, command) -> None:
        """Store a macro to run whenever ``message`` is dispatched to us."""
        _check_token(message, "message")
        tokens = command.split() if isinstance(command, str) else list(command)
        self._check_macro_syntax(tokens)
        self._stored_commands.setdefault(message, []).append(" ".join(tokens))

    def register_construct(self, key: str, fn: Callable) -> None:
        """Attach a construct function (developer API, not reachable from macros)."""
        self._constructors[_check_token(key, "key")] = fn

    def register_framework_handler(self, message: str, fn: Callable) -> None:
        self._framework_handlers[_check_token(message, "message")] = fn

    # framework dispatch

    def handle_framework(self, message: str, linker=None) -> Outcome:
        """Dispatch one framework message: stored commands first, then either
        the registered delegation, the registered handler, or nothing."""
        if linker is not None:
            self._linker = self._linker or linker
        stored = list(self._stored_commands.get(message, ()))
        for command in stored:
            self.apply_macro(command)
        if message in self.delegations:
            target = self.delegations[message]
            scriptgen = self._linker.find_by_description(target)
            scriptgen.handle_delegated(message, self)
            return delegated(target)
        if message in self._framework_handlers:
            self._framework_handlers[message](self._linker)
            return HANDLED
        # Stored commands count as handling; Skipped must mean no side effects.
        return HANDLED if stored else SKIPPED

    def _handle_reset(self, linker) -> None:
        if linker is not None:
            linker.remove_script_objects(producer=self.description)
        self.on_reset(linker)

    def on_reset(self, linker) -> None:
        """Subclass hook run on every Reset dispatch."""

    # resolution

    def resolve_value(self, key: str, linker=None) -> str:
        """Triggered read of ``key`` with cycle detection across namespaces."""
        linker = linker if linker is not None else self._linker
        if linker is None:
            return self.store.read(key)
        with linker.resolution_guard(self.description, key):
            return self.store.read(key)

    def fragment_payload(self, linker) -> str:
        raise NotImplementedError(
            f"{type(self).__name__} does not generate script fragments")

    # state dump support

    @property
    def definitions(self) -> dict[str, ValueExpression]:
        return {key: d.expression for key, d in self._definitions.items()}

    @property
    def stored_commands(self) -> dict[str, list[str]]:
        return {msg: list(cmds) for msg, cmds in self._stored_commands.items()}

    def dump_commands(self, resolve: bool = False, linker=None) -> list[str]:
        """Own state as base-parser macros, in a re-sourceable order."""
        lines = []
        for key in self.store:
            expression = self.definitions.get(key)
            if resolve and expression is not None and expression.kind != "literal":
                value = self.resolve_value(key, linker)
                lines.append(f"define {key} {value}" if value else f"additem {key}")
            elif expression is not None and expression.kind != "literal":
                lines.append(f"define {key} {expression.text}")
            else:
                value = self.store.untriggered_read(key)
                lines.append(f"define {key} {value}" if value else f"additem {key}")
        for requirement in self.requirements:
            if not requirement.auto:
                lines.append(f"addreq {requirement.pattern.render()}")
        for key, (identifier, remote_key) in self.synonyms.items():
            lines.append(f"synonym {key} ::{identifier}:{remote_key}")
        for message, commands in self._stored_commands.items():
            for command in commands:
                lines.append(f"oncall {message} do {command}")
        return lines
