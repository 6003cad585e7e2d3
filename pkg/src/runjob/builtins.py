"""Builtin configurator types and the stock type registry.

HelloWorld / HelloWorldScriptGen reproduce the canonical greeting demo,
Step models a generic application stage for chained workflows, FileInput
serves metadata loaded from a key=value file, and Fork is the batch portal
that launches materialized composites as child processes.
"""

from __future__ import annotations

import os
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .configurator import Configurator, ConfiguratorDescription
from .errors import MalformedLine, RunjobError, SpawnFailure
from .linker import Linker
from .scriptgen import DagGen, ScriptGen, shell_quote

RUN_MODES = ("foreground", "background", "dry-run")


class HelloWorld(Configurator):
    """Greets with its HelloMessage; job generation is delegated."""

    def __init__(self, description: ConfiguratorDescription):
        super().__init__(description)
        self.add_item("HelloMessage")

    def fragment_payload(self, linker) -> str:
        message = self.resolve_value("HelloMessage", linker)
        return f"echo {shell_quote(message)}"


class HelloWorldScriptGen(ScriptGen):
    """Scriptgen for HelloWorld steps; doubles as their metadata server
    (greeting texts live in its own store and are read by reference)."""


class Step(Configurator):
    """Generic application step: Executable consuming InputFile, producing
    OutputFile, with extra Args spliced onto the command line."""

    SCHEMA = ("Executable", "InputFile", "OutputFile", "Args")

    def __init__(self, description: ConfiguratorDescription):
        super().__init__(description)
        for key in self.SCHEMA:
            self.add_item(key)

    def fragment_payload(self, linker) -> str:
        executable = self.resolve_value("Executable", linker)
        if not executable:
            raise RunjobError(f"{self.identifier}: Executable is not set")
        parts = [shell_quote(executable)]
        args = self.resolve_value("Args", linker)
        if args:
            parts.append(args)
        infile = self.resolve_value("InputFile", linker)
        if infile:
            parts.append(f"< {shell_quote(infile)}")
        outfile = self.resolve_value("OutputFile", linker)
        if outfile:
            parts.append(f"> {shell_quote(outfile)}")
        return " ".join(parts)


class FileInput(Configurator):
    """Metadata server backed by a key=value file, reloaded on every Reset."""

    def __init__(self, description: ConfiguratorDescription):
        super().__init__(description)
        self.add_item("SourceFile")

    def on_reset(self, linker) -> None:
        if self.store.untriggered_read("SourceFile"):
            self.load()

    def load(self) -> int:
        """Read SourceFile into the store (untriggered); returns pair count."""
        path = Path(self.store.untriggered_read("SourceFile"))
        count = 0
        for key, value in read_key_values(path):
            self.store.untriggered_write(key, value)
            count += 1
        return count


def read_key_values(path: Path) -> list[tuple[str, str]]:
    """Parse ``key=value`` lines; '#' comments and blank lines are skipped."""
    if not path.exists():
        raise FileNotFoundError(f"no such metadata file: {path}")
    pairs = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise MalformedLine(f"expected key=value, got {raw!r}",
                                filename=str(path), lineno=lineno)
        pairs.append((key, value))
    return pairs


@dataclass
class RunResult:
    command: str
    pid: int | None = None
    returncode: int | None = None
    stdout: str = ""
    process: object = field(default=None, repr=False, compare=False)


@dataclass
class RunReport:
    mode: str
    results: list[RunResult] = field(default_factory=list)

    @property
    def stdout(self) -> str:
        return "".join(result.stdout for result in self.results)


class Fork(Configurator):
    """Batch portal: on RunJob it launches the composites of the scriptgen
    named by ScriptGenName.  ExecutableList is normally defined as
    ::construct, so the list is rebuilt (and the composites rematerialized)
    on every run."""

    def __init__(self, description: ConfiguratorDescription):
        super().__init__(description)
        self.add_item("ScriptGenName")
        self.add_item("ExecutableList")
        self.register_construct("ExecutableList", _collect_composite_paths)
        self.register_framework_handler("RunJob", self._handle_run_job)
        self.last_run_report: RunReport | None = None

    def _handle_run_job(self, linker) -> None:
        self.last_run_report = self.run_jobs(linker, linker.run_mode)

    def on_reset(self, linker) -> None:
        self.last_run_report = None

    def run_jobs(self, linker, mode: str = "foreground") -> RunReport:
        """Spawn every path in ExecutableList according to ``mode``."""
        if mode not in RUN_MODES:
            raise RunjobError(f"unknown run mode {mode!r}")
        paths = self.resolve_value("ExecutableList", linker).split()
        report = RunReport(mode)
        failures = []
        for index, path in enumerate(paths):
            result = RunResult(command=path)
            report.results.append(result)
            if mode == "dry-run":
                continue
            env = _child_environment(Path(path).stem or str(index))
            executable = os.path.abspath(path)  # entries are paths, never PATH lookups
            try:
                if mode == "background":
                    process = subprocess.Popen([executable], env=env)
                    result.pid = process.pid
                    result.process = process
                else:
                    completed = subprocess.run(
                        [executable], env=env, capture_output=True, text=True)
                    result.returncode = completed.returncode
                    result.stdout = completed.stdout
            except OSError as exc:
                failures.append((path, str(exc)))
        if failures:
            detail = "; ".join(f"{path}: {reason}" for path, reason in failures)
            raise SpawnFailure(f"failed to spawn {len(failures)} job(s): {detail}",
                               failures=failures)
        return report


def _collect_composite_paths(cfg: Fork, linker) -> str:
    """Construct function for Fork.ExecutableList: materialize and list the
    named scriptgen's composites, in sequence order."""
    name = cfg.store.untriggered_read("ScriptGenName")
    if not name:
        return ""
    scriptgen = linker.find(name)
    composites = linker.collect_script_objects(
        target=scriptgen.script_target, producer=scriptgen.description, kind="composite")
    return " ".join(str(linker.materialize(obj)) for obj in composites)


def _child_environment(job_id: str) -> dict[str, str]:
    """Minimal environment for spawned jobs plus the job id marker."""
    env = {"RUNJOB_JOB_ID": job_id}
    for name in ("PATH", "HOME", "LANG"):
        if name in os.environ:
            env[name] = os.environ[name]
    env.setdefault("PATH", "/usr/bin:/bin")
    return env


BUILTIN_TYPES: dict[str, type] = {
    "HelloWorld": HelloWorld,
    "HelloWorldScriptGen": HelloWorldScriptGen,
    "ScriptGen": ScriptGen,
    "DagGen": DagGen,
    "Step": Step,
    "FileInput": FileInput,
    "Fork": Fork,
}


def make_linker(**kwargs) -> Linker:
    """A linker preloaded with the builtin configurator types."""
    types = dict(BUILTIN_TYPES)
    types.update(kwargs.pop("types", {}))
    return Linker(types=types, **kwargs)
