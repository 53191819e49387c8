"""
Errors shared by every stage.

Each error carries the exit code main.py returns for it:
 - 0 ok
 - 2 usage / configuration
 - 3 data contract (shapes, empty datasets, anomalies in the train split)
 - 4 corrupt artifact (checkpoint, manifest, detections file)
 - 5 reference error (detection for an image the manifest doesn't know)
"""


class VqadError(Exception):
    exit_code = 1


class ConfigurationError(VqadError):
    exit_code = 2


class ShapeError(VqadError):
    exit_code = 3


class DataError(VqadError):
    exit_code = 3


class DataContractError(VqadError):
    exit_code = 3


class CorruptArtifactError(VqadError):
    exit_code = 4


class UnknownReferenceError(VqadError):
    exit_code = 5


def validation_message(err) -> str:
    """Flatten a pydantic ValidationError into one readable line."""
    parts = []
    for item in err.errors():
        loc = ".".join(str(p) for p in item.get("loc", ())) or "<root>"
        parts.append(f"{loc}: {item.get('msg', 'invalid')}")
    return "; ".join(parts)
