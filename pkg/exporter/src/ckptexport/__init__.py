from .export import (CheckpointFormatError, ExportManifest,
                     MissingActionBoundsError, UnsupportedActivationError,
                     UnsupportedLayerError, export_checkpoint)

__version__ = "0.1.0"

__all__ = [
    "CheckpointFormatError",
    "ExportManifest",
    "MissingActionBoundsError",
    "UnsupportedActivationError",
    "UnsupportedLayerError",
    "export_checkpoint",
    "__version__",
]
