"""Trained-model files.

Layout (UTF-8 text)::

    NBMODELv1
    sha256:<hex digest of the payload line>
    <JSON payload>

The payload records the model kind, its parameters and, optionally, the
preprocessor and rating scale it was trained with, so that ``predict`` can
score raw CSV rows.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from ..cart import DecisionTree
from ..dataset import Preprocessor
from ..ensemble import Ensemble
from ..errors import CorruptModel, VersionMismatch
from ..mlp import MLPModel
from ..rating_scale import RatingScale
from ..svm import BinarySVMModel, ConstantClassifier, MulticlassSVM

MAGIC = "NBMODEL"
VERSION = 1
HEADER = f"{MAGIC}v{VERSION}"

_KINDS = {
    "tree": DecisionTree,
    "ensemble": Ensemble,
    "mlp": MLPModel,
    "binary_svm": BinarySVMModel,
    "constant": ConstantClassifier,
    "multiclass_svm": MulticlassSVM,
}


@dataclass(frozen=True, eq=False)
class ModelBundle:
    model: object
    preprocessor: Preprocessor | None = None
    scale: RatingScale | None = None
    feature_names: tuple[str, ...] = ()
    method: str = ""


def _kind_of(model) -> str:
    for kind, cls in _KINDS.items():
        if isinstance(model, cls):
            return kind
    raise TypeError(f"cannot persist {type(model).__name__}")


def save_model(path: str | Path, model, preprocessor: Preprocessor | None = None,
               scale: RatingScale | None = None, feature_names=(), method: str = "") -> None:
    payload = {
        "kind": _kind_of(model),
        "method": method,
        "model": model.to_dict(),
        "preprocessor": preprocessor.to_dict() if preprocessor is not None else None,
        "scale": {"name": scale.name, "labels": list(scale.labels)} if scale is not None else None,
        "feature_names": list(feature_names),
    }
    body = json.dumps(payload, separators=(",", ":"), sort_keys=True)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    Path(path).write_text(f"{HEADER}\nsha256:{digest}\n{body}\n", encoding="utf-8")


def load_bundle(path: str | Path) -> ModelBundle:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise CorruptModel(f"{path}: not a text model file") from None
    lines = text.split("\n")
    header = lines[0].strip()
    if not header.startswith(MAGIC):
        raise CorruptModel(f"{path}: missing {MAGIC} header")
    if header != HEADER:
        raise VersionMismatch(f"{path}: unsupported model format {header!r}, expected {HEADER!r}")
    if len(lines) < 3 or not lines[1].startswith("sha256:"):
        raise CorruptModel(f"{path}: truncated model file")
    body = lines[2]
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != lines[1][len("sha256:"):].strip():
        raise CorruptModel(f"{path}: checksum mismatch")
    try:
        payload = json.loads(body)
        model = _KINDS[payload["kind"]].from_dict(payload["model"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptModel(f"{path}: {exc}") from None
    pre = payload.get("preprocessor")
    sc = payload.get("scale")
    return ModelBundle(
        model=model,
        preprocessor=Preprocessor.from_dict(pre) if pre else None,
        scale=RatingScale(tuple(sc["labels"]), sc["name"]) if sc else None,
        feature_names=tuple(payload.get("feature_names", ())),
        method=payload.get("method", ""),
    )


def load_model(path: str | Path):
    return load_bundle(path).model
