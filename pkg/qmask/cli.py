"""
Command-line front end.

    qmask <command> --manifest <path> [--out <dir>] [--seed <u64>]
    qmask examples [--name <name>]

Commands: entropy, region, decouple, dephasing, classcheck, code. Each run
writes ``<command>.csv``, ``<command>.json`` and the resolved
``manifest.json`` into the output directory; failures write ``error.json``
there and print it to stderr.
"""
import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from qmask import __version__
from qmask.core.config import get_settings
from qmask.exceptions import (
    EXIT_OK,
    EXIT_VALIDATION,
    ManifestValidationError,
    NumericalError,
    QMaskException,
)
from qmask.logging_config import get_logger, setup_logging
from qmask.models.schemas.manifest import COMMANDS, manifest_adapter
from qmask.services.export_service import error_payload, write_csv, write_json
from qmask.services.run_service import run_manifest

DEFAULT_OUT = "qmask-out"


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


def _validation_errors(exc: ValidationError) -> List[Dict[str, Any]]:
    return [
        {"field": ".".join(str(part) for part in err["loc"]), "message": err["msg"]}
        for err in exc.errors()
    ]


def parse_manifest(
    data: Any, command: Optional[str] = None, seed: Optional[int] = None
):
    """
    Validate a manifest dict; ``command`` and ``seed`` from the command line
    fill in or override the manifest's own.

    Raises:
        ManifestValidationError: naming each offending field
    """
    if not isinstance(data, dict):
        raise ManifestValidationError("manifest must be a JSON object")
    data = dict(data)
    if command is not None:
        if data.setdefault("command", command) != command:
            raise ManifestValidationError(
                f"manifest is for '{data['command']}', not '{command}'",
                [{"field": "command", "message": "does not match the subcommand"}],
            )
    if seed is not None:
        data["seed"] = seed
    try:
        return manifest_adapter.validate_python(data)
    except ValidationError as exc:
        errors = _validation_errors(exc)
        fields = ", ".join(err["field"] for err in errors)
        raise ManifestValidationError(f"invalid manifest ({fields})", errors) from exc


def load_manifest(
    path: Path, command: Optional[str] = None, seed: Optional[int] = None
):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ManifestValidationError(f"manifest {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ManifestValidationError(
            f"manifest {path} is not valid JSON: {exc.msg}",
            [{"field": f"line {exc.lineno}", "message": exc.msg}],
        ) from exc
    return parse_manifest(data, command, seed)


def list_examples() -> Dict[str, Dict[str, Any]]:
    """The bundled manifests by name."""
    catalog = {}
    entries = resources.files("qmask.manifests").iterdir()
    for entry in sorted(entries, key=lambda p: p.name):
        if entry.name.endswith(".json"):
            text = entry.read_text(encoding="utf-8")
            catalog[entry.name[: -len(".json")]] = json.loads(text)
    return catalog


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------


def _fail(exc: QMaskException, out_dir: Optional[Path]) -> int:
    payload = error_payload(exc)
    if out_dir is not None:
        write_json(payload, out_dir / "error.json")
    print(json.dumps(payload, indent=2, sort_keys=True, default=str), file=sys.stderr)
    return exc.exit_code


def run(args: argparse.Namespace) -> int:
    """Execute one command; returns the process exit code."""
    out_dir = Path(args.out) if args.out else None
    try:
        manifest = load_manifest(args.manifest, args.command, args.seed)
        if out_dir is None:
            out_dir = Path(manifest.out or Path(DEFAULT_OUT) / args.command)
        result, seed = run_manifest(manifest)
        log = get_logger(__name__, command=args.command, seed=seed)
        write_csv(result.frame, out_dir / f"{args.command}.csv", result.header)
        write_json(result.payload, out_dir / f"{args.command}.json")
        echo = manifest.model_dump(mode="json")
        echo["seed"] = seed
        echo["out"] = str(out_dir)
        echo["version"] = __version__
        write_json(echo, out_dir / "manifest.json")
        log.info("Artifacts written to %s", out_dir)
    except QMaskException as exc:
        return _fail(exc, out_dir)
    except (np.linalg.LinAlgError, ValueError, ArithmeticError) as exc:
        get_logger(__name__, command=args.command).debug("Run failed", exc_info=True)
        wrapped = NumericalError(f"{type(exc).__name__}: {exc}")
        wrapped.details["cause"] = type(exc).__name__
        return _fail(wrapped, out_dir)
    return EXIT_OK


def examples(args: argparse.Namespace) -> int:
    catalog = list_examples()
    if args.name is None:
        for name, data in catalog.items():
            print(f"{name}\t{data.get('command', '?')}\t{data.get('description', '')}")
        return EXIT_OK
    if args.name not in catalog:
        return _fail(
            ManifestValidationError(
                f"unknown example '{args.name}'",
                [{"field": "name", "message": f"choose from {sorted(catalog)}"}],
            ),
            None,
        )
    print(json.dumps(catalog[args.name], indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="qmask",
        description=(
            "Masking rate-leakage toolkit for state-dependent quantum channels."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="Logging level")
    parser.add_argument(
        "--json-logs",
        action="store_true",
        default=settings.LOG_JSON,
        help="Emit logs as JSON lines on stderr",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        p = sub.add_parser(command, help=f"Run a {command} manifest")
        p.add_argument(
            "--manifest", required=True, type=Path, help="Manifest JSON file"
        )
        p.add_argument("--out", default=None, help="Output directory")
        p.add_argument(
            "--seed", type=int, default=None, help="Seed (overrides the manifest)"
        )
        p.set_defaults(handler=run)
    ex = sub.add_parser("examples", help="List or print bundled manifests")
    ex.add_argument("--name", default=None, help="Print one manifest")
    ex.set_defaults(handler=examples)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    setup_logging(args.log_level, args.json_logs)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
