use serde::{Deserialize, Serialize};

/// Axis-aligned voxel box, half-open: `min` is inclusive, `max` exclusive.
/// Serialized as `[z0, y0, x0, z1, y1, x1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i64; 6]", into = "[i64; 6]")]
pub struct BoundingBox3D {
    pub min: [i64; 3],
    pub max: [i64; 3],
}

impl From<[i64; 6]> for BoundingBox3D {
    fn from(v: [i64; 6]) -> Self {
        BoundingBox3D {
            min: [v[0], v[1], v[2]],
            max: [v[3], v[4], v[5]],
        }
    }
}

impl From<BoundingBox3D> for [i64; 6] {
    fn from(b: BoundingBox3D) -> Self {
        [b.min[0], b.min[1], b.min[2], b.max[0], b.max[1], b.max[2]]
    }
}

impl BoundingBox3D {
    pub fn new(min: [i64; 3], max: [i64; 3]) -> Self {
        BoundingBox3D { min, max }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|a| self.min[a] < self.max[a])
    }

    pub fn extent(&self) -> [i64; 3] {
        [0, 1, 2].map(|a| (self.max[a] - self.min[a]).max(0))
    }

    /// Volume in voxels.
    pub fn volume(&self) -> i64 {
        self.extent().iter().product()
    }

    pub fn intersection(&self, other: &BoundingBox3D) -> Option<BoundingBox3D> {
        let b = BoundingBox3D {
            min: [0, 1, 2].map(|a| self.min[a].max(other.min[a])),
            max: [0, 1, 2].map(|a| self.max[a].min(other.max[a])),
        };
        b.is_valid().then_some(b)
    }

    pub fn union_hull(&self, other: &BoundingBox3D) -> BoundingBox3D {
        BoundingBox3D {
            min: [0, 1, 2].map(|a| self.min[a].min(other.min[a])),
            max: [0, 1, 2].map(|a| self.max[a].max(other.max[a])),
        }
    }

    /// Geometric center in voxel coordinates.
    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| 0.5 * (self.min[a] + self.max[a]) as f64)
    }

    /// Length of the box diagonal in mm.
    pub fn diagonal_mm(&self, spacing: [f64; 3]) -> f64 {
        let e = self.extent();
        (0..3).map(|a| (e[a] as f64 * spacing[a]).powi(2)).sum::<f64>().sqrt()
    }
}

/// Intersection-over-union of two boxes, computed on integer voxel counts.
pub fn iou(a: &BoundingBox3D, b: &BoundingBox3D) -> f64 {
    let inter = a.intersection(b).map_or(0, |i| i.volume());
    let union = a.volume() + b.volume() - inter;
    if union <= 0 {
        return 0.0;
    }
    inter as f64 / union as f64
}
