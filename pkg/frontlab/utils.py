"""frontlab utility helpers: logging setup, hashing and output emission."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
from rich.logging import RichHandler

from frontlab.config import OUTPUT_SCHEMA_VERSION

_LOGGER_NAME = "frontlab"


def configure_logging(verbose: bool = False) -> logging.Logger:
    """Attach a single :class:`RichHandler` to the ``frontlab`` logger.

    The root logger is left alone so that embedding applications keep
    control of their own handlers. Calling this twice does not duplicate
    output.
    """
    logger = logging.getLogger(_LOGGER_NAME)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(show_time=False, show_path=verbose, markup=False)
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
    logger.propagate = False
    return logger


def canonical_json(payload: object) -> str:
    """Serialize *payload* deterministically (sorted keys, no whitespace drift)."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=_json_default)


def config_hash(payload: dict) -> str:
    """SHA-256 of the canonical JSON form of a validated configuration."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def _json_default(value: object) -> object:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"object of type {type(value).__name__} is not JSON serializable")


def _csv_cell(value: object) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return str(value)


class RunWriter:
    """Single writer for one run directory.

    Every JSON document gets ``schema_version`` and ``config_hash`` injected;
    CSV floats are written with ``repr`` so that output bytes only depend on
    the computed values.

    Attributes:
        out_dir: Directory receiving the artifacts.
        config_hash: Hash of the configuration that produced them.
        written: Paths written so far, in order.
    """

    __slots__ = ("out_dir", "config_hash", "written")

    def __init__(self, out_dir: Path | str, config_hash: str) -> None:
        self.out_dir = Path(out_dir)
        self.config_hash = config_hash
        self.written: list[Path] = []
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_json(self, name: str, payload: dict) -> Path:
        document = {
            "schema_version": OUTPUT_SCHEMA_VERSION,
            "config_hash": self.config_hash,
            **payload,
        }
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(document, fh, sort_keys=True, indent=2, default=_json_default)
            fh.write("\n")
        self.written.append(path)
        return path

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_csv_cell(cell) for cell in row])
        self.written.append(path)
        return path
