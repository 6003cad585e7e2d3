"""Configurator behavior: schema, macros, expressions, dependencies, dispatch."""

import pytest

from runjob.configurator import (
    Configurator,
    ConfiguratorDescription,
    DependencyPattern,
    ValueExpression,
    parse_expression,
)
from runjob.errors import (
    CircularReference,
    InvalidKey,
    KeyNotFound,
    MacroParseError,
    NoConstructRegistered,
    UnknownMacro,
    UnsatisfiedDependency,
)


def bare(type_name="Box", instance=None):
    return Configurator(ConfiguratorDescription(type_name, instance))


class TestDescription:
    def test_instance_defaults_to_type(self):
        desc = ConfiguratorDescription("HelloWorldScriptGen")
        assert desc.instance_name == "HelloWorldScriptGen"
        assert desc.identifier == "HelloWorldScriptGen"
        assert desc.slug == "HelloWorldScriptGen"

    def test_named_instance_rendering(self):
        desc = ConfiguratorDescription("HelloWorld", "English")
        assert desc.identifier == "HelloWorld named English"
        assert desc.slug == "HelloWorld_English"

    def test_version_defaults(self):
        assert ConfiguratorDescription("T").version == "1"


class TestDependencyPattern:
    def test_type_only_matches_any_instance(self):
        pattern = DependencyPattern("Step")
        assert pattern.matches(ConfiguratorDescription("Step", "A"))
        assert pattern.matches(ConfiguratorDescription("Step"))
        assert not pattern.matches(ConfiguratorDescription("Fork"))

    def test_instance_constrained(self):
        pattern = DependencyPattern("Step", "A")
        assert pattern.matches(ConfiguratorDescription("Step", "A"))
        assert not pattern.matches(ConfiguratorDescription("Step", "B"))

    def test_unversioned_matches_any_version(self):
        pattern = DependencyPattern("Step")
        assert pattern.matches(ConfiguratorDescription("Step", "A", version="7"))
        assert not DependencyPattern("Step", version="2").matches(
            ConfiguratorDescription("Step", "A", version="7"))

    def test_render_round_trips_through_tokens(self):
        for pattern in (DependencyPattern("Step"), DependencyPattern("Step", "A")):
            assert DependencyPattern.from_tokens(pattern.render().split()) == pattern


class TestParseExpression:
    def test_literal_joins_tokens_with_single_spaces(self):
        expr = parse_expression(["Hello", "World"])
        assert expr.kind == "literal"
        assert expr.text == "Hello World"

    def test_reference(self):
        expr = parse_expression(["::HelloWorldScriptGen:English"])
        assert expr.kind == "reference"
        assert expr.ref == ("HelloWorldScriptGen", "English")

    def test_construct_and_synonym_forms(self):
        assert parse_expression(["::construct"]).kind == "construct"
        assert parse_expression(["::synonym"]).synonym_key is None
        assert parse_expression(["::synonym:InFile"]).synonym_key == "InFile"

    @pytest.mark.parametrize("tokens", [[], ["::"], ["::x"], ["::x:"], ["::construct", "x"]])
    def test_malformed_expressions(self, tokens):
        with pytest.raises(MacroParseError):
            parse_expression(tokens)


class TestAddItem:
    def test_added_key_is_empty(self):
        cfg = bare()
        cfg.add_item("French")
        assert cfg.store.untriggered_read("French") == ""

    def test_re_add_preserves_value(self):
        cfg = bare()
        cfg.add_item("k")
        cfg.add_item("k")
        cfg.define("k", ValueExpression.literal("v"))
        assert cfg.store.untriggered_read("k") == "v"
        cfg.add_item("k")  # re-add after define keeps the value
        assert cfg.store.untriggered_read("k") == "v"

    def test_empty_key_rejected(self):
        with pytest.raises(InvalidKey):
            bare().add_item("")


class TestDefine:
    def test_literal_then_read(self):
        cfg = bare()
        cfg.define("English", ValueExpression.literal("Hello World"))
        assert cfg.store.read("English") == "Hello World"

    def test_define_autocreates_key(self):
        cfg = bare()
        cfg.define("ScriptGenName", ValueExpression.literal("X"))
        assert "ScriptGenName" in cfg.store

    def test_construct_requires_registered_function(self):
        cfg = bare()
        with pytest.raises(NoConstructRegistered):
            cfg.define("k", ValueExpression.construct())

    def test_construct_reruns_on_every_read(self):
        cfg = bare()
        counter = [0]

        def build(cfg_, linker):
            counter[0] += 1
            return f"result-{counter[0]}"

        cfg.register_construct("k", build)
        cfg.define("k", ValueExpression.construct())
        assert cfg.store.read("k") == "result-1"
        assert cfg.store.read("k") == "result-2"

    def test_redefinition_replaces_old_trigger(self):
        cfg = bare()
        cfg.register_construct("k", lambda c, l: "constructed")
        cfg.define("k", ValueExpression.construct())
        assert cfg.store.read("k") == "constructed"
        cfg.define("k", ValueExpression.literal("plain"))
        assert cfg.store.read("k") == "plain"


class Custom(Configurator):
    def __init__(self, description):
        super().__init__(description)
        self.handled = []
        self.add_macro_handler(self._custom)

    def _custom(self, tokens):
        if tokens[0] != "frobnicate":
            return False
        self.handled.append(tokens)
        return True


class TestApplyMacro:
    def test_additem_via_macro(self):
        cfg = bare()
        cfg.apply_macro("additem English")
        assert cfg.store.untriggered_read("English") == ""

    def test_unknown_macro(self):
        with pytest.raises(UnknownMacro):
            bare().apply_macro("frobnicate")

    def test_subclass_handler_takes_priority_over_base(self):
        cfg = Custom(ConfiguratorDescription("Custom"))
        cfg.apply_macro("frobnicate hard")
        assert cfg.handled == [["frobnicate", "hard"]]

    def test_base_parser_not_invoked_for_macros_a_handler_accepts(self):
        cfg = Custom(ConfiguratorDescription("Custom"))
        calls = []
        original = cfg._base_macro_handler
        cfg._macro_handlers[-1] = lambda tokens: calls.append(tokens) or original(tokens)
        cfg.apply_macro("frobnicate")
        assert calls == []
        cfg.apply_macro("additem x")
        assert calls == [["additem", "x"]]

    def test_macro_arity_errors(self):
        cfg = bare()
        for macro in ("additem", "define k", "synonym a b c", "oncall X cmd"):
            with pytest.raises(MacroParseError):
                cfg.apply_macro(macro)


class TestRequirements:
    def test_satisfied_requirement_recorded(self, linker):
        linker.attach("HelloWorldScriptGen")
        identifier = linker.attach("HelloWorld", "English")
        cfg = linker.find(identifier)
        cfg.apply_macro("addreq HelloWorldScriptGen")
        assert any(r.pattern.type_name == "HelloWorldScriptGen" for r in cfg.requirements)

    def test_strict_mode_rejects_unattached_target(self, linker):
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        with pytest.raises(UnsatisfiedDependency):
            cfg.apply_macro("addreq Ghost")

    def test_lenient_mode_records_anything(self, lenient_linker):
        cfg = lenient_linker.find(lenient_linker.attach("HelloWorld", "English"))
        cfg.apply_macro("addreq Ghost")
        assert any(r.pattern.type_name == "Ghost" for r in cfg.requirements)

    def test_requirements_deduplicate(self, linker):
        linker.attach("HelloWorldScriptGen")
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        cfg.apply_macro("addreq HelloWorldScriptGen")
        cfg.apply_macro("addreq HelloWorldScriptGen")
        patterns = [r.pattern for r in cfg.requirements]
        assert len(patterns) == len(set(patterns))

    def test_attaching_more_never_invalidates(self, linker):
        linker.attach("HelloWorldScriptGen")
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        cfg.apply_macro("addreq HelloWorldScriptGen")
        for name in ("French", "German"):
            linker.attach("HelloWorld", name)
        linker._validate_requirements(cfg)  # must not raise


class TestSynonyms:
    def test_synonym_lookup_routes_to_target(self, linker):
        linker.attach("HelloWorldScriptGen")
        linker.route("HelloWorldScriptGen", "define English Hello World")
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        cfg.apply_macro("addreq HelloWorldScriptGen")
        cfg.apply_macro("synonym InFile ::HelloWorldScriptGen:English")
        cfg.apply_macro("define InFile ::synonym")
        assert cfg.resolve_value("InFile") == "Hello World"

    def test_explicit_synonym_key_form(self, linker):
        linker.attach("HelloWorldScriptGen")
        linker.route("HelloWorldScriptGen", "define English Hello World")
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        cfg.apply_macro("addreq HelloWorldScriptGen")
        cfg.apply_macro("synonym Greeting ::HelloWorldScriptGen:English")
        cfg.apply_macro("define Msg ::synonym:Greeting")
        assert cfg.resolve_value("Msg") == "Hello World"

    def test_redefining_synonym_wins(self, linker):
        linker.attach("HelloWorldScriptGen")
        linker.route("HelloWorldScriptGen", "define English Hello World")
        linker.route("HelloWorldScriptGen", "define German Hallo Welt")
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        cfg.apply_macro("addreq HelloWorldScriptGen")
        cfg.apply_macro("synonym InFile ::HelloWorldScriptGen:English")
        cfg.apply_macro("synonym InFile ::HelloWorldScriptGen:German")
        cfg.apply_macro("define InFile ::synonym")
        assert cfg.resolve_value("InFile") == "Hallo Welt"

    def test_missing_synonym_reports_key(self, linker):
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        cfg.apply_macro("define InFile ::synonym")
        with pytest.raises(KeyNotFound):
            cfg.resolve_value("InFile")


class TestOncall:
    def test_stored_commands_run_in_order(self, linker):
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        cfg.apply_macro("oncall Tick do define HelloMessage first")
        cfg.apply_macro("oncall Tick do define HelloMessage second")
        cfg.handle_framework("Tick", linker)
        assert cfg.store.untriggered_read("HelloMessage") == "second"

    def test_invalid_stored_command_rejected(self, linker):
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        with pytest.raises(MacroParseError):
            cfg.apply_macro("oncall Tick do define onlykey")

    def test_never_dispatched_never_runs(self, linker):
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        cfg.apply_macro("oncall Tick do define HelloMessage boom")
        linker.run_framework("Reset")
        assert cfg.store.untriggered_read("HelloMessage") == ""


class TestHandleFramework:
    def test_delegation_outcome(self, linker):
        linker.attach("HelloWorldScriptGen")
        linker.attach("HelloWorld", "English")
        linker.route("HelloWorldScriptGen", "define English hi")
        linker.route("HelloWorldScriptGen", "register HelloWorld")
        linker.route("HelloWorld named English",
                     "define HelloMessage ::HelloWorldScriptGen:English")
        outcome = linker.find("HelloWorld named English").handle_framework("MakeJob", linker)
        assert str(outcome) == "Delegated to HelloWorldScriptGen"

    def test_unhandled_message_is_skipped_with_no_side_effects(self, linker):
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        before = dict(cfg.store.items())
        outcome = cfg.handle_framework("MakeScript", linker)
        assert str(outcome) == "Skipped"
        assert dict(cfg.store.items()) == before

    def test_reset_is_handled_by_every_configurator(self, linker):
        for type_name in ("HelloWorldScriptGen", "Fork", "Step", "FileInput"):
            cfg = linker.find(linker.attach(type_name))
            assert str(cfg.handle_framework("Reset", linker)) == "Handled"

    def test_stored_commands_alone_count_as_handled(self, linker):
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        cfg.apply_macro("oncall Tick do additem Extra")
        assert str(cfg.handle_framework("Tick", linker)) == "Handled"


class TestResolveValue:
    def test_reference_chain_ends_in_literal(self, linker):
        for name in ("StepA", "StepB", "StepC"):
            linker.attach("Step", name)
        linker.route("Step named StepC", "define OutputFile final.txt")
        linker.route("Step named StepB", "addreq Step named StepC")
        linker.route("Step named StepB", "define OutputFile ::StepC:OutputFile")
        linker.route("Step named StepA", "addreq Step named StepB")
        linker.route("Step named StepA", "define OutputFile ::StepB:OutputFile")
        assert linker.find("StepA").resolve_value("OutputFile") == "final.txt"

    def test_two_cycle_detected(self, lenient_linker):
        linker = lenient_linker
        linker.attach("Step", "A")
        linker.attach("Step", "B")
        linker.route("Step named A", "define x ::B:y")
        linker.route("Step named B", "define y ::A:x")
        with pytest.raises(CircularReference):
            linker.find("A").resolve_value("x")

    def test_resolution_is_repeatable(self, linker):
        linker.attach("HelloWorldScriptGen")
        linker.route("HelloWorldScriptGen", "define English Hello World")
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        cfg.apply_macro("addreq HelloWorldScriptGen")
        cfg.apply_macro("define HelloMessage ::HelloWorldScriptGen:English")
        assert cfg.resolve_value("HelloMessage") == cfg.resolve_value("HelloMessage")

    def test_each_read_performs_fresh_lookup(self, linker):
        linker.attach("HelloWorldScriptGen")
        linker.route("HelloWorldScriptGen", "define English one")
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        cfg.apply_macro("addreq HelloWorldScriptGen")
        cfg.apply_macro("define HelloMessage ::HelloWorldScriptGen:English")
        assert cfg.resolve_value("HelloMessage") == "one"
        linker.route("HelloWorldScriptGen", "define English two")
        assert cfg.resolve_value("HelloMessage") == "two"

    def test_missing_key(self, linker):
        cfg = linker.find(linker.attach("HelloWorld", "English"))
        with pytest.raises(KeyNotFound):
            cfg.resolve_value("Nope")

    def test_chain_of_length_three_does_three_lookups_per_resolve(self, linker):
        for name in ("A", "B", "C", "D"):
            linker.attach("Step", name)
        linker.route("Step named D", "define v end")
        for child, parent in (("C", "D"), ("B", "C"), ("A", "B")):
            linker.route(f"Step named {child}", f"addreq Step named {parent}")
            linker.route(f"Step named {child}", f"define v ::{parent}:v")
        calls = []
        original = linker.lookup_parameter

        def counting(requester, target, key):
            calls.append((target, key))
            return original(requester, target, key)

        linker.lookup_parameter = counting
        assert linker.find("A").resolve_value("v") == "end"
        assert len(calls) == 3  # one per reference hop, no caching
        linker.find("A").resolve_value("v")
        assert len(calls) == 6
