import json
import os
import shutil
import tempfile
from argparse import Namespace
from contextlib import contextmanager
from functools import wraps
from logging import getLogger
from pathlib import Path
from time import perf_counter
from typing import Any, Callable, Iterator, TypeVar

from pydantic import BaseModel

from .. import __version__
from ..config import settings
from ..exceptions import FormatError, UsageError
from .constants import MANIFEST_FILE

logger = getLogger("hidden_population")
RT = TypeVar("RT")

TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}


class RunManifest(BaseModel):
    subcommand: str
    config: dict[str, Any]
    seed: int | None = None
    inputs: dict[str, str] = {}
    outputs: list[str] = []
    version: str = __version__
    duration_seconds: float = 0.0


def log_command(wrapped: Callable[..., RT]) -> Callable[..., RT]:
    @wraps(wrapped)
    def wrapper(args: Namespace, *rest: Any, **kwargs: Any) -> RT:
        arguments = {
            key: value
            for key, value in vars(args).items()
            if key not in ("handler", "command_parser")
        }
        logger.debug(f"{wrapped.__name__} arguments: {arguments}")

        started = perf_counter()
        result = wrapped(args, *rest, **kwargs)

        logger.debug(f"{wrapped.__name__} output: {result}")
        logger.info(f"{wrapped.__name__} finished in {perf_counter() - started:.1f}s")

        return result

    return wrapper


def parse_list(raw: str, name: str) -> tuple[float, ...]:
    """'0.90,0.95' -> (0.9, 0.95)."""
    try:
        values = tuple(float(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise UsageError(
            f"{name} must be comma-separated numbers, got {raw!r}"
        ) from exc

    if not values or not all(0 < value < 1 for value in values):
        raise UsageError(f"{name} must lie in (0, 1), got {raw!r}")

    return values


def load_config_file(path: Path) -> dict[str, str]:
    """Read `key = value` lines; `#` starts a comment, keys use flag names."""
    values: dict[str, str] = {}

    with path.open() as handle:
        for line_number, raw_line in enumerate(handle, start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue

            key, separator, value = line.partition("=")
            if not separator or not key.strip():
                raise FormatError("expected `key = value`", path, line_number)

            values[key.strip().lstrip("-").replace("-", "_")] = value.strip()

    return values


def config_defaults(values: dict[str, str], namespace: Namespace) -> dict[str, Any]:
    """Match config keys against parsed destinations, coercing boolean flags."""
    known = vars(namespace)
    defaults: dict[str, Any] = {}

    for key, value in values.items():
        if key not in known or key in ("config", "handler", "command_parser"):
            raise UsageError(f"unknown config key {key!r}")

        if isinstance(known[key], bool):
            if value.lower() not in TRUE_WORDS | FALSE_WORDS:
                raise UsageError(
                    f"config key {key!r} expects a boolean, got {value!r}"
                )
            defaults[key] = value.lower() in TRUE_WORDS
        else:
            defaults[key] = value

    return defaults


@contextmanager
def staged_output(directory: Path) -> Iterator[Path]:
    """Yield a scratch directory that replaces files in `directory` only on success."""
    directory.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{directory.name}.", dir=directory.parent))

    try:
        yield stage
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        logger.debug(f"Removed partial outputs in {stage}")
        raise

    if not directory.exists():
        os.replace(stage, directory)
        return

    for entry in sorted(stage.iterdir()):
        target = directory / entry.name
        if target.is_dir() and not target.is_symlink():
            shutil.rmtree(target)
        os.replace(entry, target)

    stage.rmdir()


def write_manifest(manifest: RunManifest, directory: Path) -> Path:
    path = directory / MANIFEST_FILE
    partial = path.with_suffix(".json.partial")

    partial.write_text(json.dumps(model_config(manifest), sort_keys=True, indent=2))
    os.replace(partial, path)

    return path


def model_config(model: BaseModel) -> dict[str, Any]:
    """A pydantic model as plain JSON types."""
    return json.loads(model.json())


def output_directory(args: Namespace, subcommand: str) -> Path:
    return Path(args.out) if args.out else settings.output_root / subcommand
