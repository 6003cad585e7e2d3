"""Script generation: delegated fragment emission, composites, DAG wrapping.

A ScriptGen is a configurator that other configurators delegate their job
generation to.  Delegators render their own fragment payload; the scriptgen
drives emission into the linker repository and later assembles the
fragments into a composite shell script, or wraps them into a DAG
description via DagGen.
"""

from __future__ import annotations

from dataclasses import dataclass

from .configurator import Configurator, ConfiguratorDescription
from .errors import CyclicWorkflow, MacroParseError

SHELL_HEADER = "#!/bin/sh"


@dataclass(frozen=True)
class ScriptObject:
    """One generated code artifact held in the linker repository."""

    object_id: str
    target: str  # execution environment, e.g. "shell" or "dag"
    payload: str
    producer: ConfiguratorDescription
    sequence: int
    kind: str = "fragment"  # or "composite"


@dataclass(frozen=True)
class ScriptGenRegistration:
    """A scriptgen's claim on a delegator type and the messages it takes over."""

    scriptgen: ConfiguratorDescription
    delegator_type: str
    messages: frozenset = frozenset({"MakeJob"})


def shell_quote(text: str) -> str:
    """Double-quote ``text`` for POSIX sh, escaping the characters that stay
    special inside double quotes."""
    escaped = ""
    for ch in text:
        if ch in '\\"$`':
            escaped += "\\"
        escaped += ch
    return f'"{escaped}"'


def fragment_id(producer: ConfiguratorDescription) -> str:
    return f"job_{producer.slug}"


def compose_shell(fragments) -> str:
    """Concatenate fragment payloads into one script; each fragment runs in a
    subshell so its state cannot leak into the next."""
    lines = [SHELL_HEADER]
    for fragment in fragments:
        lines.append("(")
        lines.append(fragment.payload.rstrip("\n"))
        lines.append(")")
    lines.append("exit 0")
    return "\n".join(lines) + "\n"


class ScriptGen(Configurator):
    """Delegation target assembling shell composites.

    Handles MakeScript itself; MakeJob reaches it only through delegation
    from registered delegator types (macro: ``register <Type>``).
    """

    script_target = "shell"

    def __init__(self, description: ConfiguratorDescription):
        super().__init__(description)
        self.register_framework_handler("MakeScript", self._handle_make_script)
        self.add_macro_handler(self._scriptgen_macro_handler)

    def _scriptgen_macro_handler(self, tokens: list[str]) -> bool:
        if tokens[0] != "register":
            return False
        if len(tokens) != 2:
            raise MacroParseError("usage: register <configurator-type>")
        self.register_delegator(tokens[1])
        return True

    def register_delegator(self, delegator_type: str, linker=None) -> None:
        """Make every configurator of ``delegator_type`` (present and future)
        delegate MakeJob to us; each delegator also gains a dependency on us."""
        linker = linker if linker is not None else self._linker
        linker.register_delegation(self, delegator_type)

    def handle_delegated(self, message: str, delegator: Configurator) -> ScriptObject:
        if message == "MakeJob":
            return self.delegated_make_job(delegator)
        raise MacroParseError(f"{self.identifier}: no delegated handler for {message!r}")

    def delegated_make_job(self, delegator: Configurator) -> ScriptObject:
        """Emit one fragment for ``delegator`` into the linker repository."""
        payload = delegator.fragment_payload(self._linker)
        return self._linker.new_script_object(
            fragment_id(delegator.description), self.script_target, payload,
            delegator.description, kind="fragment")

    def fragments(self, linker=None) -> list[ScriptObject]:
        """Repository fragments whose producer currently delegates to us."""
        linker = linker if linker is not None else self._linker
        mine = []
        for obj in linker.collect_script_objects(target=self.script_target, kind="fragment"):
            producer = linker.find_by_description(obj.producer)
            if self.description in producer.delegations.values():
                mine.append(obj)
        return mine

    def _handle_make_script(self, linker) -> None:
        self.make_composite(linker)

    def make_composite(self, linker=None) -> ScriptObject:
        """Assemble our fragments, in sequence order, into one composite."""
        linker = linker if linker is not None else self._linker
        payload = compose_shell(self.fragments(linker))
        object_id = f"composite_{self.description.slug}"
        linker.remove_script_objects(object_id=object_id)
        return linker.new_script_object(
            object_id, self.script_target, payload, self.description, kind="composite")


def requirement_edges(linker, producers) -> list[tuple[ConfiguratorDescription,
                                                       ConfiguratorDescription]]:
    """Derive parent->child edges among ``producers`` from declared
    requirements: B requiring A yields the edge A -> B."""
    edges = []
    for child in producers:
        child_cfg = linker.find_by_description(child)
        for requirement in child_cfg.requirements:
            for parent in producers:
                if parent == child:
                    continue
                if requirement.pattern.matches(parent):
                    edge = (parent, child)
                    if edge not in edges:
                        edges.append(edge)
    return edges


def _assert_acyclic(nodes, edges) -> None:
    indegree = {node: 0 for node in nodes}
    for _, child in edges:
        indegree[child] += 1
    ready = [node for node in nodes if indegree[node] == 0]
    seen = 0
    while ready:
        node = ready.pop()
        seen += 1
        for parent, child in edges:
            if parent == node:
                indegree[child] -= 1
                if indegree[child] == 0:
                    ready.append(child)
    if seen != len(nodes):
        raise CyclicWorkflow("requirement graph among job producers has a cycle")


def build_dag(linker, fragments=None) -> str:
    """Render fragments plus their producers' requirement graph as DAG text:
    one JOB line per fragment, one PARENT/CHILD line per edge."""
    if fragments is None:
        fragments = linker.collect_script_objects(target="shell", kind="fragment")
    producers = []
    for fragment in fragments:
        if fragment.producer not in producers:
            producers.append(fragment.producer)
    edges = requirement_edges(linker, producers)
    _assert_acyclic(producers, edges)
    order = {producer: i for i, producer in enumerate(producers)}
    edges.sort(key=lambda e: (order[e[0]], order[e[1]]))
    lines = [f"JOB {fragment_id(p)} {fragment_id(p)}.sh" for p in producers]
    lines += [f"PARENT {fragment_id(a)} CHILD {fragment_id(b)}" for a, b in edges]
    return "\n".join(lines) + "\n"


class DagGen(ScriptGen):
    """Wraps shell fragments into a DAG composite instead of a shell script.

    The optional ScriptGenName key narrows wrapping to fragments belonging
    to that scriptgen; unset, every shell fragment in the repository is
    wrapped.
    """

    script_target = "dag"

    def __init__(self, description: ConfiguratorDescription):
        super().__init__(description)
        self.add_item("ScriptGenName")

    def make_composite(self, linker=None) -> ScriptObject:
        return self.make_dag(linker)

    def make_dag(self, linker=None) -> ScriptObject:
        linker = linker if linker is not None else self._linker
        name = self.store.untriggered_read("ScriptGenName")
        fragments = None
        if name:
            fragments = linker.find(name).fragments(linker)
        payload = build_dag(linker, fragments)
        object_id = f"dag_{self.description.slug}"
        linker.remove_script_objects(object_id=object_id)
        return linker.new_script_object(
            object_id, "dag", payload, self.description, kind="composite")
