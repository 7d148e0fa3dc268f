//! Test fixtures and brute-force oracles for the geometry code.

use crate::io::MaskContainer;

pub fn grid_with(shape: [usize; 3], voxels: &[[usize; 3]]) -> MaskContainer {
    grid_with_spacing(shape, [1.0; 3], voxels)
}

pub fn grid_with_spacing(shape: [usize; 3], spacing: [f64; 3], voxels: &[[usize; 3]]) -> MaskContainer {
    let mut dense = vec![false; shape.iter().product()];
    for v in voxels {
        dense[(v[0] * shape[1] + v[1]) * shape[2] + v[2]] = true;
    }
    MaskContainer::from_dense(shape, spacing, [0; 3], &dense).unwrap()
}

/// Voxels whose centers lie within `radius` (voxels) of `center`, where
/// `center` is expressed in voxel-corner coordinates (voxel i spans [i, i+1)).
pub fn digital_ball(shape: [usize; 3], center: [f64; 3], radius: f64, spacing: [f64; 3]) -> MaskContainer {
    let mut vox = Vec::new();
    for z in 0..shape[0] {
        for y in 0..shape[1] {
            for x in 0..shape[2] {
                let c = [z as f64 + 0.5, y as f64 + 0.5, x as f64 + 0.5];
                let d2: f64 = (0..3).map(|a| (c[a] - center[a]).powi(2)).sum();
                if d2 <= radius * radius {
                    vox.push([z, y, x]);
                }
            }
        }
    }
    grid_with_spacing(shape, spacing, &vox)
}

/// Single-slice mask from rows of `#`/`.` characters.
pub fn slice_from_ascii(rows: &[&str], spacing: [f64; 3]) -> MaskContainer {
    let ny = rows.len();
    let nx = rows[0].len();
    let mut vox = Vec::new();
    for (y, r) in rows.iter().enumerate() {
        for (x, ch) in r.chars().enumerate() {
            if ch == '#' {
                vox.push([0, y, x]);
            }
        }
    }
    grid_with_spacing([1, ny, nx], spacing, &vox)
}

/// Component count by pairwise union-find over voxel coordinates; no grid
/// traversal is shared with the implementation.
pub fn oracle_flood_fill(mask: &MaskContainer, diagonal: bool) -> usize {
    let vox: Vec<[i64; 3]> = mask.global_voxels().collect();
    let mut parent: Vec<usize> = (0..vox.len()).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..vox.len() {
        for j in (i + 1)..vox.len() {
            let d: Vec<i64> = (0..3).map(|a| (vox[i][a] - vox[j][a]).abs()).collect();
            let adjacent = if diagonal {
                d.iter().all(|&x| x <= 1)
            } else {
                d.iter().sum::<i64>() == 1
            };
            if adjacent {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..vox.len()).filter(|&i| find(&mut parent, i) == i).count()
}
