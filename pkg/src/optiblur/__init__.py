"""optiblur: ray-traced lens PSF grids, spatially-variant image
degradation, and slanted-edge MTF metrology."""

__version__ = "0.1.0"

from .degrade import (
    DegradationPlan,
    degrade_image,
    mean_brightness,
    normalize_kernel,
    plan_for_image,
)
from .image import RasterImage, load_png, save_png
from .materials import AIR, BK7, CATALOG, F2, Material, refractive_index
from .metrology import (
    AnnulusPartition,
    MTFReport,
    default_annuli,
    load_reference_psf,
    make_test_chart,
    partition_rois,
    region_report,
    rmse,
)
from .paraxial import ParaxialSummary, paraxial_solve, refocus
from .pipeline import PipelineConfig, run_pipeline
from .prescription import (
    LensPrescription,
    Surface,
    axial_positions,
    doublet,
    load_prescription,
    parse_prescription,
    serialize_prescription,
)
from .psf import (
    PSF,
    PupilFunction,
    airy_first_zero_um,
    build_pupil,
    encircled_energy,
    fraunhofer_psf,
    opd_map,
    ring_to_peak_ratio,
)
from .psfgrid import PSFGrid, grid_field_angles, mosaic, render_psf_grid, resize_grid
from .psfio import export_grid, export_psf, load_grid, load_psf
from .raytrace import (
    Ray,
    RayPath,
    find_chief,
    intersect,
    refract,
    trace_bundle,
    trace_ray,
)
from .sfr import EdgeROI, SFRCurve, esfr, mtf50
