"""Joint recovery of initial pressure and the speed law from photoacoustic
boundary data: k-space simulator, phantom generator, constrained mapping and
reconstruction networks."""

from ._core import (
    Ellipse,
    MappingNet,
    ReconstructionNet,
    Simulator,
    __version__,
    build_dataset,
    gamma_ground_truth,
    pixel_shuffle,
    pixel_unshuffle,
    rasterize,
    sample_phantom,
    shepp_logan,
    wavenumbers,
)

__all__ = [
    "Ellipse",
    "MappingNet",
    "ReconstructionNet",
    "Simulator",
    "__version__",
    "build_dataset",
    "gamma_ground_truth",
    "pixel_shuffle",
    "pixel_unshuffle",
    "rasterize",
    "sample_phantom",
    "shepp_logan",
    "wavenumbers",
]
