"""Multiple description coding with dithered lattice quantizers.

Modules
-------
lattice
    Subtractively dithered scalar and cubic lattice quantizers.
gs
    Gram-Schmidt / LDL^T view of sequential dithered quantization.
region
    Closed-form quadratic Gaussian multiple-description region.
codec
    Successive, splitting, separate and reuse two-description codecs.
geometry
    Partition analysis of the undithered scalar scheme.
harness
    Sources, Monte Carlo experiments and reports.
"""

from .region import DistortionTriple, test_channel_params, split_params
from .lattice import DitheredLattice, quantize, reconstruct

__all__ = ["DistortionTriple", "DitheredLattice", "quantize", "reconstruct",
           "split_params", "test_channel_params"]
__version__ = "0.1.0"
