"""Run configuration from a ``key=value`` file plus ``--key value`` overrides."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from pydantic import ValidationError

from glfem.core.exceptions import ConfigError
from glfem.schemas.run import RunConfig

logger = logging.getLogger(__name__)

COMMANDS = ("minimize", "eigs", "converge", "bestapprox", "lod")


def read_config_file(path: Path) -> Dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    values: Dict[str, str] = {}
    for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"line {number} of {path} is not of the form key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def parse_overrides(tokens: List[str]) -> Dict[str, str]:
    """``--key value`` and ``--key=value`` pairs left over by argparse."""
    values: Dict[str, str] = {}
    position = 0
    while position < len(tokens):
        token = tokens[position]
        if not token.startswith("--"):
            raise ConfigError(token, "unexpected argument; overrides take the form --key value")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            position += 1
        else:
            if position + 1 >= len(tokens):
                raise ConfigError(key.replace("-", "_"), "missing value")
            value = tokens[position + 1]
            position += 2
        values[key.replace("-", "_")] = value
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glfem",
        usage="%(prog)s [command] [--config PATH] [--key value ...]",
        description="Ginzburg-Landau minimizers: gradient flow + Newton, local uniqueness, convergence and LOD studies. "
        f"Commands: {', '.join(COMMANDS)}.",
        epilog="Any RunConfig key can be overridden with --key value (e.g. --kappa 8 --n 64).",
        allow_abbrev=False,
        exit_on_error=False,
    )
    parser.add_argument("--config", type=Path, help="Path to a key=value configuration file")
    return parser


def split_command(tokens: List[str]) -> Tuple[Optional[str], List[str]]:
    """The command is the leading token when it is not a flag."""
    if not tokens or tokens[0].startswith("-"):
        return None, tokens
    command, rest = tokens[0], tokens[1:]
    if command not in COMMANDS:
        raise ConfigError("command", f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    return command, rest


def to_config(values: Dict[str, str]) -> RunConfig:
    unknown = sorted(set(values) - set(RunConfig.model_fields))
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    if "command" not in values:
        raise ConfigError("command", "missing; pass it as the first argument or in the config file")
    if "kappa" not in values:
        raise ConfigError("kappa", "missing")
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        error = exc.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else "config"
        raise ConfigError(key, error["msg"]) from exc


def parse_config(argv: Optional[Iterable[str]] = None) -> RunConfig:
    tokens = list(argv) if argv is not None else sys.argv[1:]
    command, tokens = split_command(tokens)
    try:
        args, extras = build_parser().parse_known_args(tokens)
    except argparse.ArgumentError as exc:
        raise ConfigError("config", str(exc)) from exc

    values: Dict[str, str] = {}
    if args.config is not None:
        values.update(read_config_file(args.config))
    values.update(parse_overrides(extras))
    if command is not None:
        values["command"] = command

    config = to_config(values)
    logger.debug("resolved config: %s", config.model_dump())
    return config
