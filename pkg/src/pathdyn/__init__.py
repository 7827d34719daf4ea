"""Similarity analysis of pathline dynamics in 2D time-dependent flows."""

from .advect import IntegrationParams, PathlineSamples, integrate_pathline, seed_grid, seed_subgrid_spec
from .distribution import (AbsoluteContinuityError, BinningPolicy, Circle, DynHistogram, Ellipse,
                           EmptyRecordError, EmptyRegionError, Polygon, Region,
                           fit_binning, histogram, jsd, kl_divergence, parse_region_text,
                           reference_distribution)
from .dynamics import (DynamicsRecord, FtleField, StrainRotationStep, compute_dynamics,
                       deformation_product, expm2x2, ftle_flow_map, ftle_localized,
                       ftle_localized_field, ftle_strain_sum, ftle_strain_sum_field,
                       strain_rotation_step, trace_seeds)
from .field import (DatasetError, GridSpec, UnknownFieldError, VectorField2D, VelocitySample,
                    analytic_velocity, load_dataset, make_analytic, save_dataset)
from .simfield import (DivergenceField, SimilarityEngine, export_field, load_field,
                       render, render_array, similarity_field)
from .store import DynamicsCache, build_cache, load_cache, save_cache

__version__ = "0.1.0"
