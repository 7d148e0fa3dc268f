use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{connected_components, diameter_v1, BoundingBox3D, Connectivity};
use crate::io::MaskContainer;
use crate::model::Detection;

/// Components whose mean diameter falls below this are dropped.
pub const MIN_COMPONENT_DIAMETER_MM: f64 = 4.0;

/// A segmented finding in scan voxel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub id: String,
    pub mask: MaskContainer,
    pub bbox: BoundingBox3D,
    pub score: f64,
    /// Center of the patch the finding was segmented in, in voxel
    /// coordinates; the bbox center when absent.
    pub patch_center: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DedupOptions {
    pub min_diameter_mm: f64,
    pub connectivity: Connectivity,
}

impl Default for DedupOptions {
    fn default() -> Self {
        DedupOptions {
            min_diameter_mm: MIN_COMPONENT_DIAMETER_MM,
            connectivity: Connectivity::TwentySix,
        }
    }
}

fn centroid(mask: &MaskContainer) -> [f64; 3] {
    let mut sum = [0.0; 3];
    let mut n = 0.0;
    for v in mask.global_voxels() {
        for a in 0..3 {
            sum[a] += v[a] as f64 + 0.5;
        }
        n += 1.0;
    }
    sum.map(|s| s / n)
}

/// Drop small components, then keep the one whose centroid is closest (in
/// mm) to the patch center. `None` when nothing survives.
fn clean(f: &Finding, opts: &DedupOptions) -> Result<Option<MaskContainer>> {
    let center = f.patch_center.unwrap_or_else(|| f.bbox.center());
    let s = f.mask.spacing();
    let mut best: Option<(f64, MaskContainer)> = None;
    for comp in connected_components(&f.mask, opts.connectivity) {
        if diameter_v1(&comp)?.mean < opts.min_diameter_mm {
            continue;
        }
        let c = centroid(&comp);
        let d2: f64 = (0..3).map(|a| ((c[a] - center[a]) * s[a]).powi(2)).sum();
        if best.as_ref().is_none_or(|b| d2 < b.0) {
            best = Some((d2, comp));
        }
    }
    Ok(best.map(|(_, m)| {
        let vox: Vec<[i64; 3]> = m.global_voxels().collect();
        MaskContainer::from_global_voxels(&vox, s).expect("component is non-empty")
    }))
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut i = i;
    while parent[i] != r {
        let next = parent[i];
        parent[i] = r;
        i = next;
    }
    r
}

/// Clean every finding, then merge findings whose masks share a voxel
/// (transitively). A merged finding has the union mask, its bounding box,
/// the highest member score and the id of its first member. Output follows
/// the order of first members, and output masks never overlap.
pub fn dedup(findings: &[Finding], opts: &DedupOptions) -> Result<Vec<Finding>> {
    let mut kept: Vec<(usize, MaskContainer)> = Vec::new();
    for (i, f) in findings.iter().enumerate() {
        if let Some(m) = clean(f, opts)? {
            kept.push((i, m));
        }
    }

    let sets: Vec<HashSet<[i64; 3]>> = kept.iter().map(|(_, m)| m.global_voxels().collect()).collect();
    let mut parent: Vec<usize> = (0..kept.len()).collect();
    for a in 0..kept.len() {
        for b in (a + 1)..kept.len() {
            let (small, large) = if sets[a].len() <= sets[b].len() { (a, b) } else { (b, a) };
            if sets[small].iter().any(|v| sets[large].contains(v)) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }

    let mut out = Vec::new();
    for root in 0..kept.len() {
        if find(&mut parent, root) != root {
            continue;
        }
        let members: Vec<usize> = (0..kept.len()).filter(|&k| find(&mut parent, k) == root).collect();
        let first = &findings[kept[root].0];
        if members.len() == 1 {
            let mask = kept[root].1.clone();
            out.push(Finding {
                id: first.id.clone(),
                bbox: mask.bbox().expect("cleaned masks are non-empty"),
                mask,
                score: first.score,
                patch_center: first.patch_center,
            });
            continue;
        }
        let mut vox: Vec<[i64; 3]> = members.iter().flat_map(|&k| sets[k].iter().copied()).collect();
        vox.sort_unstable();
        vox.dedup();
        let mask = MaskContainer::from_global_voxels(&vox, first.mask.spacing())?;
        let score = members
            .iter()
            .map(|&k| findings[kept[k].0].score)
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(Finding {
            id: first.id.clone(),
            bbox: mask.bbox().expect("union is non-empty"),
            mask,
            score,
            patch_center: first.patch_center,
        });
    }
    Ok(out)
}

/// Closed diameter window check.
pub fn in_size_window(diameter_mm: f64, low_mm: f64, high_mm: f64) -> bool {
    (low_mm..=high_mm).contains(&diameter_mm)
}

/// Keep detections whose derived mean diameter lies in `[low_mm, high_mm]`.
/// Detections without a derived diameter are dropped.
pub fn size_window_filter(detections: &[Detection], low_mm: f64, high_mm: f64) -> Vec<Detection> {
    detections
        .iter()
        .filter(|d| d.derived_diameter.is_some_and(|x| in_size_window(x, low_mm, high_mm)))
        .cloned()
        .collect()
}
