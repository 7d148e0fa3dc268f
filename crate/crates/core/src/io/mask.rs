//! Run-length encoded binary voxel masks and the `.vmask` file format.
//!
//! A `.vmask` file is a JSON header line followed by one `start length` pair
//! per line. Runs index the C-order (z-major) flattening of the mask grid.
//!
//! ```text
//! {"shape":[12,16,16],"spacing_mm":[1.0,0.7,0.7]}
//! 1234 5
//! 1250 7
//! ```
//!
//! An optional `"origin"` header field places the grid inside the scan
//! volume (voxel offset of grid index (0,0,0)); it defaults to zero.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox3D;

#[derive(Debug, Clone, PartialEq)]
pub struct MaskContainer {
    shape: [usize; 3],
    spacing: [f64; 3],
    origin: [i64; 3],
    runs: Vec<(u64, u64)>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    shape: [usize; 3],
    spacing_mm: [f64; 3],
    #[serde(default, skip_serializing_if = "is_zero")]
    origin: [i64; 3],
}

fn is_zero(o: &[i64; 3]) -> bool {
    *o == [0; 3]
}

impl MaskContainer {
    /// Builds a mask from canonical runs: sorted, non-empty, neither
    /// overlapping nor touching, and inside the grid.
    pub fn new(shape: [usize; 3], spacing: [f64; 3], origin: [i64; 3], runs: Vec<(u64, u64)>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::invalid(format!("mask shape {shape:?} has an empty axis")));
        }
        if !spacing.iter().all(|&s| s.is_finite() && s > 0.0) {
            return Err(Error::invalid(format!(
                "mask spacing {spacing:?} must be strictly positive"
            )));
        }
        let total = (shape[0] * shape[1] * shape[2]) as u64;
        let mut end = 0u64;
        for (i, &(start, len)) in runs.iter().enumerate() {
            if len == 0 {
                return Err(Error::invalid(format!("run {i} has zero length")));
            }
            if i > 0 && start <= end {
                return Err(Error::invalid(format!(
                    "run {i} overlaps, touches or precedes run {}",
                    i - 1
                )));
            }
            end = start + len;
            if end > total {
                return Err(Error::invalid(format!(
                    "run {i} ends at {end}, past the grid size {total}"
                )));
            }
        }
        Ok(MaskContainer {
            shape,
            spacing,
            origin,
            runs,
        })
    }

    pub fn empty(shape: [usize; 3], spacing: [f64; 3], origin: [i64; 3]) -> Result<Self> {
        Self::new(shape, spacing, origin, Vec::new())
    }

    pub fn from_dense(shape: [usize; 3], spacing: [f64; 3], origin: [i64; 3], dense: &[bool]) -> Result<Self> {
        if dense.len() != shape.iter().product::<usize>() {
            return Err(Error::invalid("dense buffer length does not match the mask shape"));
        }
        let mut runs = Vec::new();
        let mut i = 0;
        while i < dense.len() {
            if dense[i] {
                let start = i;
                while i < dense.len() && dense[i] {
                    i += 1;
                }
                runs.push((start as u64, (i - start) as u64));
            } else {
                i += 1;
            }
        }
        Self::new(shape, spacing, origin, runs)
    }

    /// Tight mask around a set of global voxel coordinates.
    pub fn from_global_voxels(voxels: &[[i64; 3]], spacing: [f64; 3]) -> Result<Self> {
        let Some(first) = voxels.first() else {
            return Err(Error::Empty("voxel list"));
        };
        let mut lo = *first;
        let mut hi = *first;
        for v in voxels {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        let shape = [0, 1, 2].map(|a| (hi[a] - lo[a] + 1) as usize);
        let mut dense = vec![false; shape.iter().product()];
        for v in voxels {
            let l = [0, 1, 2].map(|a| (v[a] - lo[a]) as usize);
            dense[(l[0] * shape[1] + l[1]) * shape[2] + l[2]] = true;
        }
        Self::from_dense(shape, spacing, lo, &dense)
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [i64; 3] {
        self.origin
    }

    pub fn runs(&self) -> &[(u64, u64)] {
        &self.runs
    }

    pub fn len_grid(&self) -> usize {
        self.shape.iter().product()
    }

    /// Number of foreground voxels.
    pub fn count(&self) -> u64 {
        self.runs.iter().map(|r| r.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn to_dense(&self) -> Vec<bool> {
        let mut dense = vec![false; self.len_grid()];
        for &(start, len) in &self.runs {
            dense[start as usize..(start + len) as usize].fill(true);
        }
        dense
    }

    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let [_, ny, nx] = self.shape;
        [flat / (ny * nx), (flat / nx) % ny, flat % nx]
    }

    /// Foreground flat indices in increasing order.
    pub fn flat_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.runs.iter().flat_map(|&(s, l)| (s as usize)..((s + l) as usize))
    }

    /// Foreground voxels in scan coordinates.
    pub fn global_voxels(&self) -> impl Iterator<Item = [i64; 3]> + '_ {
        self.flat_indices().map(move |f| {
            let l = self.unflatten(f);
            [0, 1, 2].map(|a| l[a] as i64 + self.origin[a])
        })
    }

    /// Tight box of the foreground in scan coordinates.
    pub fn bbox(&self) -> Option<BoundingBox3D> {
        let mut it = self.global_voxels();
        let first = it.next()?;
        let (mut lo, mut hi) = (first, first);
        for v in it {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        Some(BoundingBox3D::new(lo, hi.map(|x| x + 1)))
    }

    pub fn to_vmask_string(&self) -> String {
        let header = Header {
            shape: self.shape,
            spacing_mm: self.spacing,
            origin: self.origin,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for (s, l) in &self.runs {
            out.push_str(&format!("{s} {l}\n"));
        }
        out
    }

    pub fn parse_vmask(text: &str, file: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header_line) = lines.next().ok_or_else(|| Error::Parse {
            file: file.into(),
            line: 1,
            field: "header".into(),
            message: "missing header line".into(),
        })?;
        let header: Header = serde_json::from_str(header_line).map_err(|e| Error::Parse {
            file: file.into(),
            line: 1,
            field: "header".into(),
            message: e.to_string(),
        })?;
        let mut runs = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |field: &str, message: String| Error::Parse {
                file: file.into(),
                line: i + 1,
                field: field.into(),
                message,
            };
            let mut parts = line.split_ascii_whitespace();
            let mut next = |field: &str| -> Result<u64> {
                parts
                    .next()
                    .ok_or_else(|| parse_err(field, "missing value".into()))?
                    .parse::<u64>()
                    .map_err(|e| parse_err(field, e.to_string()))
            };
            let start = next("start")?;
            let len = next("length")?;
            runs.push((start, len));
        }
        Self::new(header.shape, header.spacing_mm, header.origin, runs).map_err(|e| Error::Parse {
            file: file.into(),
            line: 0,
            field: "runs".into(),
            message: e.to_string(),
        })
    }

    pub fn read_vmask(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_vmask(&text, &path.display().to_string())
    }

    pub fn write_vmask(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_vmask_string()).map_err(|e| Error::io(path, e))
    }
}

/// Resolves `mask_ref` keys to masks. Directory-backed stores read one mask
/// at a time so memory never holds the whole mask collection.
#[derive(Debug, Clone, Default)]
pub enum MaskStore {
    #[default]
    None,
    Dir(PathBuf),
    Memory(std::collections::BTreeMap<String, MaskContainer>),
}

impl MaskStore {
    pub fn path_for(dir: &Path, mask_ref: &str) -> PathBuf {
        dir.join(format!("{mask_ref}.vmask"))
    }

    pub fn load(&self, mask_ref: &str) -> Result<MaskContainer> {
        match self {
            MaskStore::None => Err(Error::invalid(format!("no mask store configured for `{mask_ref}`"))),
            MaskStore::Dir(dir) => MaskContainer::read_vmask(&Self::path_for(dir, mask_ref)),
            MaskStore::Memory(map) => map
                .get(mask_ref)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("unknown mask_ref `{mask_ref}`"))),
        }
    }
}
