"""Command line entry point: run macro scripts, dump state, build artifacts.

Exit codes: 0 success, 1 script/runtime error (message carries file:line
when known), 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .builtins import Fork, make_linker
from .errors import RunjobError
from .linker import Linker
from .macro_lang import MacroInterpreter, check_script, execute_file, tokenize
from .scriptgen import build_dag

DEFAULT_FRAMEWORK = ("Reset", "MakeJob", "MakeScript", "RunJob")
LENIENT_ENV_VAR = "RUNJOB_LENIENT_DEPS"


@dataclass
class CliConfig:
    script_path: Path | None  # None means REPL
    output_dir: Path = Path(".")
    target: str = "shell"
    strict_deps: bool = True
    dump_path: Path | None = None
    resolve_dump: bool = False
    check_only: bool = False
    run_mode: str = "foreground"
    framework: tuple[str, ...] = DEFAULT_FRAMEWORK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="runjob",
        description="Plan workflows from macro scripts and compile them into "
                    "shell composites or DAG files.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a macro script")
    run.add_argument("script", help="macro script file")
    _common_flags(run)
    run.add_argument("--check", action="store_true",
                     help="parse the script (and sourced files) without executing")
    run.add_argument("--dump", metavar="PATH",
                     help="write the declarative state dump ('-' for stdout)")
    run.add_argument("--resolve", action="store_true",
                     help="snapshot lazy definitions to literals in the dump")
    run.add_argument("--framework", metavar="MESSAGES",
                     default=" ".join(DEFAULT_FRAMEWORK),
                     help="framework messages to run after the script "
                          "(default: %(default)s)")
    run.add_argument("--no-framework", action="store_true",
                     help="do not run any framework messages after the script")

    repl_parser = sub.add_parser("repl", help="interactive directive session")
    _common_flags(repl_parser)
    return parser


def _common_flags(parser) -> None:
    parser.add_argument("--out", metavar="DIR", default=".",
                        help="output directory for materialized artifacts")
    parser.add_argument("--target", choices=("shell", "dag"), default="shell")
    parser.add_argument("--lenient-deps", action="store_true",
                        help="disable dependency checking and namespace visibility "
                             f"rules (also via {LENIENT_ENV_VAR}=1)")
    parser.add_argument("--run-mode", choices=("foreground", "background", "dry-run"),
                        default="foreground")
    parser.add_argument("--background", action="store_true",
                        help="shorthand for --run-mode background")


def _config_from_args(args) -> CliConfig:
    lenient = args.lenient_deps or os.environ.get(LENIENT_ENV_VAR) == "1"
    run_mode = "background" if args.background else args.run_mode
    return CliConfig(
        script_path=Path(args.script) if getattr(args, "script", None) else None,
        output_dir=Path(args.out),
        target=args.target,
        strict_deps=not lenient,
        dump_path=Path(args.dump) if getattr(args, "dump", None) else None,
        resolve_dump=getattr(args, "resolve", False),
        check_only=getattr(args, "check", False),
        run_mode=run_mode,
        framework=() if getattr(args, "no_framework", False)
        else tuple(getattr(args, "framework", " ".join(DEFAULT_FRAMEWORK)).split()),
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    config = _config_from_args(args)
    try:
        if args.command == "repl":
            repl(_new_linker(config))
            return 0
        return run_script(config)
    except RunjobError as exc:
        context = getattr(exc, "dispatch_context", None)
        if context:
            message, identifier = context
            print(f"error: {exc} (dispatching {message} to {identifier})",
                  file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _new_linker(config: CliConfig) -> Linker:
    return make_linker(strict=config.strict_deps, output_dir=config.output_dir,
                       run_mode=config.run_mode)


def run_script(config: CliConfig) -> int:
    if config.check_only:
        check_script(config.script_path)
        return 0
    linker = _new_linker(config)
    execute_file(linker, config.script_path)
    if config.framework:
        linker.run_framework(*config.framework)
    for path in materialize_outputs(linker, config.target):
        print(f"wrote {path}")
    _print_run_reports(linker)
    if config.dump_path is not None:
        dump = linker.dump_state(resolve=config.resolve_dump)
        if str(config.dump_path) == "-":
            sys.stdout.write(dump)
        else:
            config.dump_path.write_text(dump)
            print(f"wrote {config.dump_path}")
    return 0


def materialize_outputs(linker: Linker, target: str) -> list[Path]:
    """Write the selected artifacts into the linker's output directory."""
    paths = []
    if target == "dag":
        fragments = linker.collect_script_objects(target="shell", kind="fragment")
        for fragment in fragments:
            paths.append(linker.materialize(fragment))
        dags = linker.collect_script_objects(target="dag", kind="composite")
        if dags:
            paths.append(linker.materialize(dags[-1]))
        else:
            dag_path = linker.output_dir / "workflow.dag"
            linker.output_dir.mkdir(parents=True, exist_ok=True)
            with open(dag_path, "w", newline="\n") as handle:
                handle.write(build_dag(linker, fragments))
            paths.append(dag_path)
    else:
        for composite in linker.collect_script_objects(target="shell", kind="composite"):
            paths.append(linker.materialize(composite))
    return paths


def _print_run_reports(linker: Linker) -> None:
    for cfg in linker.configurators:
        report = getattr(cfg, "last_run_report", None)
        if report is None:
            continue
        if report.mode == "dry-run":
            for result in report.results:
                print(f"dry-run: {result.command}")
        elif report.mode == "background":
            for result in report.results:
                print(f"started {result.command} (pid {result.pid})")
        elif report.stdout:
            sys.stdout.write(report.stdout)


REPL_HELP = """\
directives: attach / cfg / framework run / framework group / source / loop ... endloop
builtins:   dump        print the declarative state dump
            quit        leave the session
"""


def repl(linker: Linker, input_stream=None, output=None) -> None:
    """Line-oriented interactive session; errors are printed, not fatal."""
    stream = input_stream if input_stream is not None else sys.stdin
    out = output if output is not None else sys.stdout
    interactive = input_stream is None and stream.isatty()

    def prompt(text: str) -> None:
        if interactive:
            out.write(text)
            out.flush()

    buffer: list[str] = []
    depth = 0
    prompt("runjob> ")
    for raw in stream:
        line = raw.rstrip()
        buffer.append(line)
        if line.endswith("\\"):
            prompt("... ")
            continue
        tokens_so_far = tokenize("\n".join(buffer))
        last = tokens_so_far[-1] if tokens_so_far else None
        if last and last.tokens:
            if last.tokens[0] == "loop":
                depth += 1
            elif last.tokens[0] == "endloop":
                depth -= 1
        if depth > 0:
            prompt("... ")
            continue
        text = "\n".join(buffer)
        buffer = []
        depth = 0
        stripped = text.strip()
        if stripped in ("quit", "exit"):
            break
        if stripped == "help":
            out.write(REPL_HELP)
            prompt("runjob> ")
            continue
        if stripped == "dump":
            out.write(linker.dump_state())
            prompt("runjob> ")
            continue
        try:
            records_before = len(linker.dispatch_log)
            MacroInterpreter(linker).run_text(text)
            for record in linker.dispatch_log[records_before:]:
                out.write(f"{record.message} {record.description.identifier}: "
                          f"{record.outcome}\n")
            _write_new_reports(linker, out)
        except (RunjobError, OSError) as exc:
            out.write(f"error: {exc}\n")
        prompt("runjob> ")
    prompt("\n")


def _write_new_reports(linker: Linker, out) -> None:
    for cfg in linker.configurators:
        if isinstance(cfg, Fork) and cfg.last_run_report is not None:
            if cfg.last_run_report.stdout:
                out.write(cfg.last_run_report.stdout)
            cfg.last_run_report = None


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
