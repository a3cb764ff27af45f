"""Command-line front end: batch execution, explain mode, and a small REPL.

Exit codes: 0 success, 1 query error (parse/validate/plan), 2 data error
(document loading, unknown doc names), 3 internal invariant breach.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from typing import Optional, TextIO

from .engine import Engine
from .errors import DataError, JpqError, QueryError
from .model import DocRegistry, parse_document, serialize
from .parser import parse_query

EXIT_OK = 0
EXIT_QUERY = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


@dataclass
class CliConfig:
    docs: list[tuple[str, str]] = field(default_factory=list)
    query_path: Optional[str] = None
    query_text: Optional[str] = None
    explain: bool = False
    pretty: bool = False
    output: Optional[str] = None


def _load_docs(bindings: list[tuple[str, str]]) -> DocRegistry:
    registry = DocRegistry()
    for name, path in bindings:
        try:
            with open(path, encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise DataError(f"cannot read document {name!r}: {e}") from e
        registry.register(name, parse_document(text))
    return registry


def _execute(config: CliConfig, query_text: str, out: TextIO) -> None:
    registry = _load_docs(config.docs)
    engine = Engine(registry)
    q = parse_query(query_text)
    if config.explain:
        out.write(engine.explain(q) + "\n")
    result = engine.run(q)
    out.write(serialize(result, pretty=config.pretty) + "\n")


def run_query(
    config: CliConfig, out: Optional[TextIO] = None, err: Optional[TextIO] = None
) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    if config.query_text is not None:
        query_text = config.query_text
    else:
        try:
            with open(config.query_path, encoding="utf-8") as f:
                query_text = f.read()
        except OSError as e:
            err.write(f"error: cannot read query file: {e}\n")
            return EXIT_DATA
    sink = out
    close = False
    if config.output:
        try:
            sink = open(config.output, "w", encoding="utf-8")
        except OSError as e:
            err.write(f"error: cannot open output file: {e}\n")
            return EXIT_DATA
        close = True
    try:
        _execute(config, query_text, sink)
        return EXIT_OK
    except DataError as e:
        err.write(f"error: {e}\n")
        return EXIT_DATA
    except QueryError as e:
        err.write(f"error: {e}\n")
        return EXIT_QUERY
    except JpqError as e:
        err.write(f"internal error: {e}\n")
        return EXIT_INTERNAL
    finally:
        if close:
            sink.close()


def repl(
    stdin: Optional[TextIO] = None,
    out: Optional[TextIO] = None,
    err: Optional[TextIO] = None,
    pretty: bool = False,
) -> int:
    """Interactive loop: `:load name path`, `:run <query>`, `:explain <query>`,
    `:quit`.  Errors are reported per command without ending the session."""
    stdin = sys.stdin if stdin is None else stdin
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    registry = DocRegistry()
    engine = Engine(registry)
    out.write("jpq - :load name path | :run <query> | :explain <query> | :quit\n")
    while True:
        out.write("jpq> ")
        out.flush()
        line = stdin.readline()
        if not line:
            return EXIT_OK
        line = line.strip()
        if not line:
            continue
        cmd, _, rest = line.partition(" ")
        try:
            if cmd == ":quit":
                return EXIT_OK
            elif cmd == ":load":
                name, _, path = rest.strip().partition(" ")
                if not name or not path.strip():
                    err.write("usage: :load name path\n")
                    continue
                with open(path.strip(), encoding="utf-8") as f:
                    registry.register(name, parse_document(f.read()))
                out.write(f"loaded {name}\n")
            elif cmd == ":run":
                q = parse_query(rest)
                out.write(serialize(engine.run(q), pretty=pretty) + "\n")
            elif cmd == ":explain":
                q = parse_query(rest)
                out.write(engine.explain(q) + "\n")
            else:
                err.write(f"unknown command {cmd!r}\n")
        except (JpqError, OSError) as e:
            err.write(f"error: {e}\n")


def _parse_doc_binding(text: str) -> tuple[str, str]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(f"expected name=path, got {text!r}")
    return name, path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="jpq", description="Run pattern-based queries over JSON documents."
    )
    p.add_argument(
        "--doc",
        metavar="NAME=PATH",
        type=_parse_doc_binding,
        action="append",
        default=[],
        help="bind a document name to a JSON file (repeatable)",
    )
    src = p.add_mutually_exclusive_group()
    src.add_argument("--query", metavar="PATH", help="read the query from a file")
    src.add_argument("-e", "--expr", metavar="TEXT", help="query text inline")
    p.add_argument("--explain", action="store_true", help="print the query plan")
    p.add_argument("--pretty", action="store_true", help="indent the output")
    p.add_argument("--output", metavar="PATH", help="write the result to a file")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.query is None and args.expr is None:
        return repl(pretty=args.pretty)
    config = CliConfig(
        docs=args.doc,
        query_path=args.query,
        query_text=args.expr,
        explain=args.explain,
        pretty=args.pretty,
        output=args.output,
    )
    return run_query(config)


if __name__ == "__main__":
    sys.exit(main())
