"""Python access to the diffusyn core: statistics, manifests and the CLI."""

import json

from ._diffusyn import (
    DiffusynError,
    accuracy,
    bias_index,
    chi_square,
    f1,
    spearman,
    validate_manifest,
)
from ._diffusyn import manifest_json as _manifest_json
from ._diffusyn import run_cli as _run_cli

__all__ = [
    "DiffusynError",
    "accuracy",
    "bias_index",
    "chi_square",
    "f1",
    "spearman",
    "validate_manifest",
    "load_items",
    "run",
]


def load_items(path):
    """Items of a manifest as a list of dicts."""
    return json.loads(_manifest_json(str(path)))


def run(*args):
    """Run a CLI subcommand in-process.

    Returns (exit_code, output); output is parsed JSON when the command
    printed JSON, otherwise the raw text.
    """
    code, out, _err = _run_cli([str(a) for a in args])
    try:
        return code, json.loads(out)
    except ValueError:
        return code, out
