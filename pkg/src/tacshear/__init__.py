"""Tactile marker-displacement simulation for flat elastomer sensors."""

from .core import PIXEL_SCALE, HydroParams, MarkerField, Pose, TactileGrid, pose_compose, transform_points
from .geometry import (
    Box,
    Cylinder,
    GridSdf,
    Halfspace,
    SdfField,
    Sphere,
    SurfaceSamples,
    Torus,
    elastomer_sdf,
    sample_surface,
    sdf_eval,
    sdf_gradient,
)
from .dilation import ContactSet, dilation_field, find_contacts
from .tracker import (
    HydroShearModel,
    TrackerState,
    contact_fraction,
    gravity_augmented_field,
    recover_forces_from_offsets,
    shear_field,
    step_tracker,
    total_field,
)

__version__ = "0.1.0"
