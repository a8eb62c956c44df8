"""The fixed example corpus: problem files with expected-label sidecars."""

from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path

from .core import SchemaError
from .io import validate

CORPUS_ENV = "EXTREMALKIT_CORPUS_DIR"
CORPUS_IDS = ("ex3.3i", "ex3.3ii", "ex4.3", "ex4.4", "ex4.5-trunc", "walkthrough2cone", "qc-pair",
              "decomp-quadrant")


def corpus_dir() -> Path:
    override = os.environ.get(CORPUS_ENV)
    if override:
        return Path(override)
    return Path(str(resources.files("extremalkit").joinpath("corpus")))


def _read(path: Path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"corpus file not found: {path}", "/") from None
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path.name}: invalid JSON ({e.msg})", "/") from None


def load_example(example_id: str) -> tuple[dict, dict]:
    """Problem document and expected sidecar for a corpus id."""
    if example_id not in CORPUS_IDS:
        raise SchemaError(f"unknown example id {example_id!r}; known: {', '.join(CORPUS_IDS)}", "/")
    root = corpus_dir()
    doc = _read(root / f"{example_id}.json")
    expected = _read(root / f"{example_id}.expected.json")
    validate(expected, "expected")
    return doc, expected


def manifest_path() -> Path:
    return corpus_dir() / "manifest.json"
