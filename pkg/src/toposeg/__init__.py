"""Diffusion filtering and topological-derivative crack segmentation for grayscale images."""
from .image import (
    ImageFormatError, NoiseSpec, SyntheticSpec, add_gaussian_noise, check_image,
    load_image, make_synthetic, save_image,
)
from .diffusion import (
    DiffusionParams, anisotropic_filter, anisotropic_step, conductance,
    isotropic_filter, isotropic_step,
)
from .topo import (
    DerivativeField, DiffusivityField, EdgeLattice, TopoParams, all_derivatives,
    continuum_td_field, cost_functional, diffuse_with_cracks, discrete_td_restore,
    edge_topological_derivative, insert_cracks,
)
from .segmentation import continuum_td_segment, extract_segmentation, segmentation_from_image
from .metrics import IterationTrace, MetricsReport, boundary_f1, mse, psnr, region_count
from .kernels import BACKEND

__version__ = "0.1.0"
