"""Microplastic detection in fluorescence microscopy images.

End-to-end desk-scale pipeline: synthetic spiked-dataset generation with
ground-truth masks, patch-based preprocessing, UNet-style segmentation
trained with momentum SGD, pixel metrics, and particle-level analysis.
"""

__version__ = "0.1.0"

from .core import (
    BinaryMask,
    DatasetManifest,
    Detection,
    FluorescenceImage,
    ManifestEntry,
    MetricsReport,
    ParticleSpec,
    PatchGrid,
    Polymer,
    validate_pair,
)

__all__ = [
    "BinaryMask", "DatasetManifest", "Detection", "FluorescenceImage",
    "ManifestEntry", "MetricsReport", "ParticleSpec", "PatchGrid", "Polymer",
    "validate_pair", "__version__",
]
