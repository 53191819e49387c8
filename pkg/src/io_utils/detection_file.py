"""
Detections file written by `detect` and read by `eval`.

{
    "records": [
        {"boxes": [{"h": 5, "score": 0.41, "w": 6, "x": 10, "y": 22}], "image": "tiles/test/test_00000.png"},
        ...
    ]
}
"""

import json
import math
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from io_utils.errors import ConfigurationError, CorruptArtifactError, UnknownReferenceError, validation_message


class ScoredBox(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    x: int
    y: int
    w: int
    h: int
    score: float

    @field_validator("x", "y")
    @classmethod
    def _origin(cls, v):
        if v < 0:
            raise ValueError("box origin must be >= 0")
        return v

    @field_validator("w", "h")
    @classmethod
    def _extent(cls, v):
        if v < 1:
            raise ValueError("box extent must be >= 1")
        return v

    @field_validator("score")
    @classmethod
    def _finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("score must be finite")
        return v


class DetectionRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    image: str
    boxes: list[ScoredBox] = Field(default_factory=list)


class DetectionFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    records: list[DetectionRecord] = Field(default_factory=list)

    @model_validator(mode="after")
    def _unique_images(self):
        seen = set()
        for r in self.records:
            if r.image in seen:
                raise ValueError(f"duplicate image {r.image}")
            seen.add(r.image)
        return self

    def by_image(self) -> dict:
        return {r.image: r.boxes for r in self.records}


def record_for(image: str, boxes) -> DetectionRecord:
    """DetectionRecord from DetectionBox-like objects."""
    return DetectionRecord(image=image, boxes=[ScoredBox(x=b.x, y=b.y, w=b.w, h=b.h, score=b.score) for b in boxes])


def detections_json(detections: DetectionFile) -> str:
    return json.dumps(detections.model_dump(), indent=4, sort_keys=True) + "\n"


def save_detections(detections: DetectionFile, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(detections_json(detections))
    except OSError as e:
        raise ConfigurationError(f"cannot write detections {path}: {e}") from e
    return path


def load_detections(path) -> DetectionFile:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"detections file not found: {path}")
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CorruptArtifactError(f"{path}: not a JSON detections file ({e})")
    try:
        return DetectionFile.model_validate(data)
    except ValidationError as e:
        raise CorruptArtifactError(f"{path}: invalid detections file ({validation_message(e)})") from e


def check_references(detections: DetectionFile, known_paths):
    known = set(known_paths)
    for r in detections.records:
        if r.image not in known:
            raise UnknownReferenceError(f"detections reference {r.image}, which the manifest doesn't list")
