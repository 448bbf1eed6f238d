"""Versioned single-document JSON persistence for stacked models."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import _serial
from .dataset import DEFAULT_SCHEMA, FeatureSchema, ScalerParams
from .errors import ModelLoadError, SchemaError, VersionError
from .stack import StackedModel, stacked_model_from_dict

FORMAT_NAME = "posture-stack-model"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelFile:
    model: StackedModel
    schema: FeatureSchema = DEFAULT_SCHEMA
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "format": FORMAT_NAME,
            "format_version": FORMAT_VERSION,
            "schema": self.schema.to_dict(),
            "scaler": self.model.scaler.to_dict(),
            "model": self.model.to_dict(),
            "metadata": self.metadata,
        }


def atomic_write_text(path, text):
    """Write via a sibling temp file and rename; no partial file on failure."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _umask():
    mask = os.umask(0)
    os.umask(mask)
    return mask


def dumps_model(model, schema=DEFAULT_SCHEMA, metadata=None):
    return json.dumps(ModelFile(model, schema, dict(metadata or {})).to_dict(),
                      sort_keys=True, separators=(",", ":")) + "\n"


def save_model(model, path, schema=DEFAULT_SCHEMA, metadata=None):
    atomic_write_text(path, dumps_model(model, schema, metadata))


def parse_model(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelLoadError("<document>", f"invalid JSON ({exc})") from None
    if _serial.field(doc, "format", "", str) != FORMAT_NAME:
        raise ModelLoadError("format", f"expected {FORMAT_NAME!r}")
    version = _serial.field(doc, "format_version", "", int)
    if version != FORMAT_VERSION:
        raise VersionError("format_version",
                           f"unsupported version {version} (this build reads {FORMAT_VERSION})")
    try:
        schema = FeatureSchema.from_dict(_serial.field(doc, "schema", "", dict))
    except (KeyError, TypeError, SchemaError) as exc:
        raise ModelLoadError("schema", str(exc)) from None
    try:
        scaler = ScalerParams.from_dict(_serial.field(doc, "scaler", "", dict))
    except (KeyError, TypeError, ValueError, SchemaError) as exc:
        raise ModelLoadError("scaler", str(exc)) from None
    if scaler.means.shape[0] != schema.n_features:
        raise ModelLoadError("scaler", "arity does not match schema")
    model = stacked_model_from_dict(_serial.field(doc, "model", "", dict), scaler, "model")
    if model.n_classes != schema.n_classes:
        raise ModelLoadError("model.n_classes", "does not match schema class count")
    metadata = _serial.field(doc, "metadata", "", dict)
    return ModelFile(model, schema, metadata)


def read_model_file(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ModelLoadError("<document>", f"not UTF-8 text ({exc})") from None
    return parse_model(text)


def load_model(path):
    return read_model_file(path).model
