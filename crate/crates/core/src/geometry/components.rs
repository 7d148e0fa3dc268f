use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::io::MaskContainer;

/// Voxel adjacency used for component labeling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    /// Face neighbours only.
    #[serde(rename = "6")]
    Six,
    /// Faces, edges and corners.
    #[default]
    #[serde(rename = "26")]
    TwentySix,
}

impl Connectivity {
    fn offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for dz in -1..=1i64 {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let manhattan = dz.abs() + dy.abs() + dx.abs();
                    let keep = match self {
                        Connectivity::Six => manhattan == 1,
                        Connectivity::TwentySix => manhattan > 0,
                    };
                    if keep {
                        out.push([dz, dy, dx]);
                    }
                }
            }
        }
        out
    }
}

impl std::str::FromStr for Connectivity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "6" => Ok(Connectivity::Six),
            "26" => Ok(Connectivity::TwentySix),
            _ => Err(format!("connectivity must be 6 or 26, got `{s}`")),
        }
    }
}

/// Maximal connected foreground sets, largest first; equal sizes are ordered
/// by their smallest flat index. Each component keeps the input grid.
pub fn connected_components(mask: &MaskContainer, connectivity: Connectivity) -> Vec<MaskContainer> {
    let shape = mask.shape();
    let dense = mask.to_dense();
    let mut label = vec![u32::MAX; dense.len()];
    let offsets = connectivity.offsets();
    let dims = shape.map(|n| n as i64);

    // (size, first index, members)
    let mut comps: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    let mut queue = VecDeque::new();
    for seed in mask.flat_indices() {
        if label[seed] != u32::MAX {
            continue;
        }
        let id = comps.len() as u32;
        label[seed] = id;
        queue.push_back(seed);
        let mut members = Vec::new();
        while let Some(f) = queue.pop_front() {
            members.push(f);
            let p = mask.unflatten(f).map(|c| c as i64);
            for o in &offsets {
                let q = [p[0] + o[0], p[1] + o[1], p[2] + o[2]];
                if (0..3).any(|a| q[a] < 0 || q[a] >= dims[a]) {
                    continue;
                }
                let g = ((q[0] * dims[1] + q[1]) * dims[2] + q[2]) as usize;
                if dense[g] && label[g] == u32::MAX {
                    label[g] = id;
                    queue.push_back(g);
                }
            }
        }
        members.sort_unstable();
        comps.push((members.len(), seed, members));
    }

    comps.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    comps
        .into_iter()
        .map(|(_, _, members)| {
            let mut part = vec![false; dense.len()];
            for m in members {
                part[m] = true;
            }
            MaskContainer::from_dense(shape, mask.spacing(), mask.origin(), &part)
                .expect("component fits its parent grid")
        })
        .collect()
}

/// Foreground volume in mm³.
pub fn mask_volume(mask: &MaskContainer) -> f64 {
    let s = mask.spacing();
    mask.count() as f64 * s[0] * s[1] * s[2]
}

/// Voxel-wise IoU of two masks placed in a common scan frame.
pub fn mask_iou(a: &MaskContainer, b: &MaskContainer) -> f64 {
    let va: HashSet<[i64; 3]> = a.global_voxels().collect();
    let inter = b.global_voxels().filter(|v| va.contains(v)).count();
    let union = va.len() + b.count() as usize - inter;
    if union == 0 {
        return 0.0;
    }
    inter as f64 / union as f64
}
