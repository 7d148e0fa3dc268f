//! Voxel-mask geometry: boxes, connected components, volumes and the two
//! slice-based diameter measurements.

mod bbox;
mod components;
mod diameter;
mod hull;

pub use bbox::{iou, BoundingBox3D};
pub use components::{connected_components, mask_iou, mask_volume, Connectivity};
pub use diameter::{diameter_v1, diameter_v2, DiameterResult};
pub use hull::{convex_hull, Point2};

#[cfg(test)]
pub(crate) mod shapes;
