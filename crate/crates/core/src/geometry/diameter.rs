//! Slice-based long-axis / short-axis diameters.
//!
//! Both procedures work on the axial slice where the largest 3D component
//! (26-connectivity) has the most voxels, lower slice index on ties. Chords
//! are measured between voxel centers and then extended by one in-plane
//! voxel (the finer in-plane spacing), so a run of `n` voxels measures `n`
//! voxels and a single voxel measures one spacing.
//!
//! * [`diameter_v1`]: LAX is the longest chord of the convex hull of the
//!   voxel centers; SAX is the longest hull chord orthogonal to it.
//! * [`diameter_v2`]: restricted to the largest 2D component on that slice;
//!   SAX endpoints follow the segmentation border (pixel squares, clipped to
//!   the hull), and a SAX segment that does not reach the LAX is extended
//!   until it does.
//!
//! In-plane coordinates are `(y, x)` in mm, measured from the scan origin.

use serde::{Deserialize, Serialize};

use super::components::{connected_components, Connectivity};
use super::hull::{convex_hull, Point2};
use crate::error::{Error, Result};
use crate::io::MaskContainer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterResult {
    pub lax: f64,
    pub sax: f64,
    pub mean: f64,
    /// Global z index of the measured slice.
    pub slice_index: i64,
    pub lax_segment: [[f64; 2]; 2],
    pub sax_segment: [[f64; 2]; 2],
}

const REL_TIE: f64 = 1e-12;

struct Slice {
    z: i64,
    pixels: Vec<[i64; 2]>,
}

/// Largest 3D component, then its largest-area axial slice.
fn measurement_slice(mask: &MaskContainer) -> Result<Slice> {
    if mask.is_empty() {
        return Err(Error::Empty("mask has no foreground voxel"));
    }
    let comps = connected_components(mask, Connectivity::TwentySix);
    let comp = &comps[0];
    let nz = mask.shape()[0];
    let mut area = vec![0usize; nz];
    for v in comp.global_voxels() {
        area[(v[0] - mask.origin()[0]) as usize] += 1;
    }
    let mut best = 0;
    for z in 1..nz {
        if area[z] > area[best] {
            best = z;
        }
    }
    let z = best as i64 + mask.origin()[0];
    let pixels = comp
        .global_voxels()
        .filter(|v| v[0] == z)
        .map(|v| [v[1], v[2]])
        .collect();
    Ok(Slice { z, pixels })
}

fn center_mm(p: Point2, sy: f64, sx: f64) -> [f64; 2] {
    [(p[0] as f64 + 0.5) * sy, (p[1] as f64 + 0.5) * sx]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Longest chord among hull vertices. Ties go to the smaller angle with the
/// y axis, then to the lexicographically smaller endpoint pair.
fn long_axis(hull: &[Point2], sy: f64, sx: f64) -> (Point2, Point2) {
    if hull.len() == 1 {
        return (hull[0], hull[0]);
    }
    let mut best: Option<(f64, f64, (Point2, Point2))> = None;
    for i in 0..hull.len() {
        for j in (i + 1)..hull.len() {
            let (a, b) = if hull[i] <= hull[j] {
                (hull[i], hull[j])
            } else {
                (hull[j], hull[i])
            };
            let dy = (b[0] - a[0]) as f64 * sy;
            let dx = (b[1] - a[1]) as f64 * sx;
            let len2 = dy * dy + dx * dx;
            let angle = dx.abs().atan2(dy.abs());
            let better = match &best {
                None => true,
                Some((bl, ba, bp)) => {
                    if len2 > bl * (1.0 + REL_TIE) {
                        true
                    } else if len2 < bl * (1.0 - REL_TIE) {
                        false
                    } else if angle < ba - REL_TIE {
                        true
                    } else if angle > ba + REL_TIE {
                        false
                    } else {
                        (a, b) < *bp
                    }
                }
            };
            if better {
                best = Some((len2, angle, (a, b)));
            }
        }
    }
    best.expect("at least two hull vertices").2
}

/// Frame aligned with the long axis: `v` along it, `u` across it.
struct AxisFrame {
    a: [f64; 2],
    b: [f64; 2],
    v: [f64; 2],
    u: [f64; 2],
}

impl AxisFrame {
    fn new(a: [f64; 2], b: [f64; 2]) -> Self {
        let len = dist(a, b);
        // a degenerate axis points along y
        let v = if len > 0.0 {
            [(b[0] - a[0]) / len, (b[1] - a[1]) / len]
        } else {
            [1.0, 0.0]
        };
        AxisFrame {
            a,
            b,
            v,
            u: [-v[1], v[0]],
        }
    }

    fn point(&self, s: f64, t: f64) -> [f64; 2] {
        [s * self.v[0] + t * self.u[0], s * self.v[1] + t * self.u[1]]
    }

    fn s_range(&self) -> (f64, f64) {
        let (sa, sb) = (dot(self.v, self.a), dot(self.v, self.b));
        (sa.min(sb), sa.max(sb))
    }
}

/// Interval of `t` where the line `{s v + t u}` crosses a convex polygon.
fn hull_chord(poly: &[[f64; 2]], frame: &AxisFrame, s: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let n = poly.len();
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let fp = dot(frame.v, p) - s;
        let fq = dot(frame.v, q) - s;
        if fp.abs() <= 1e-12 {
            let t = dot(frame.u, p);
            lo = lo.min(t);
            hi = hi.max(t);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let r = fp / (fp - fq);
            let x = [p[0] + (q[0] - p[0]) * r, p[1] + (q[1] - p[1]) * r];
            let t = dot(frame.u, x);
            lo = lo.min(t);
            hi = hi.max(t);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

struct Measured {
    frame: AxisFrame,
    /// (s, t0, t1) of the SAX chord between centers.
    sax: (f64, f64, f64),
    footprint: f64,
}

impl Measured {
    fn finish(&self, z: i64) -> DiameterResult {
        let f = &self.frame;
        let (s, t0, t1) = self.sax;
        let half = 0.5 * self.footprint;
        let lax = dist(f.a, f.b) + self.footprint;
        let sax = (t1 - t0) + self.footprint;
        let (sa, sb) = (dot(f.v, f.a), dot(f.v, f.b));
        let t_lax = dot(f.u, f.a);
        DiameterResult {
            lax,
            sax,
            mean: 0.5 * (lax + sax),
            slice_index: z,
            lax_segment: [f.point(sa - half, t_lax), f.point(sb + half, t_lax)],
            sax_segment: [f.point(s, t0 - half), f.point(s, t1 + half)],
        }
    }
}

struct HullFrame {
    poly: Vec<[f64; 2]>,
    frame: AxisFrame,
}

fn hull_frame(pixels: &[[i64; 2]], sy: f64, sx: f64) -> HullFrame {
    let hull = convex_hull(pixels);
    let (a, b) = long_axis(&hull, sy, sx);
    HullFrame {
        poly: hull.iter().map(|&p| center_mm(p, sy, sx)).collect(),
        frame: AxisFrame::new(center_mm(a, sy, sx), center_mm(b, sy, sx)),
    }
}

/// Diameter on the convex hull of the largest component's largest slice.
pub fn diameter_v1(mask: &MaskContainer) -> Result<DiameterResult> {
    let slice = measurement_slice(mask)?;
    let [_, sy, sx] = mask.spacing();
    let HullFrame { poly, frame } = hull_frame(&slice.pixels, sy, sx);

    let mut best: Option<(f64, f64, f64)> = None;
    for p in &poly {
        let s = dot(frame.v, *p);
        if let Some((t0, t1)) = hull_chord(&poly, &frame, s) {
            if best.is_none_or(|b| t1 - t0 > (b.2 - b.1) * (1.0 + REL_TIE)) {
                best = Some((s, t0, t1));
            }
        }
    }
    let sax = best.expect("hull has at least one vertex");
    Ok(Measured {
        frame,
        sax,
        footprint: sy.min(sx),
    }
    .finish(slice.z))
}

/// 8-connected components of a pixel set; returns the largest (lowest
/// `(y, x)` on ties).
fn largest_2d_component(pixels: &[[i64; 2]]) -> Vec<[i64; 2]> {
    use std::collections::{HashSet, VecDeque};
    let all: HashSet<[i64; 2]> = pixels.iter().copied().collect();
    let mut sorted = pixels.to_vec();
    sorted.sort_unstable();
    let mut seen = HashSet::new();
    let mut best: Vec<[i64; 2]> = Vec::new();
    for &start in &sorted {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some([y, x]) = queue.pop_front() {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let q = [y + dy, x + dx];
                    if all.contains(&q) && seen.insert(q) {
                        comp.push(q);
                        queue.push_back(q);
                    }
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

/// Intervals of `t` where the line `{s v + t u}` lies inside the union of
/// pixel squares, merged and sorted.
fn segmentation_chords(pixels: &[[i64; 2]], sy: f64, sx: f64, frame: &AxisFrame, s: f64) -> Vec<(f64, f64)> {
    let reach = 0.5 * (frame.v[0].abs() * sy + frame.v[1].abs() * sx) + 1e-9;
    let base = frame.point(s, 0.0);
    let mut spans = Vec::new();
    for &p in pixels {
        if (dot(frame.v, center_mm(p, sy, sx)) - s).abs() > reach {
            continue;
        }
        let [y, x] = p;
        let bounds = [
            (y as f64 * sy, (y + 1) as f64 * sy),
            (x as f64 * sx, (x + 1) as f64 * sx),
        ];
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        let mut empty = false;
        for axis in 0..2 {
            let (b0, b1) = bounds[axis];
            let d = frame.u[axis];
            if d.abs() < 1e-15 {
                if base[axis] < b0 - 1e-12 || base[axis] > b1 + 1e-12 {
                    empty = true;
                }
                continue;
            }
            let (t0, t1) = ((b0 - base[axis]) / d, (b1 - base[axis]) / d);
            lo = lo.max(t0.min(t1));
            hi = hi.min(t0.max(t1));
        }
        if !empty && lo <= hi + 1e-12 {
            spans.push((lo, hi.max(lo)));
        }
    }
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in spans {
        match merged.last_mut() {
            Some(last) if a <= last.1 + 1e-9 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    merged
}

/// Diameter with SAX endpoints on the segmentation border of the largest
/// 2D component on the measured slice.
pub fn diameter_v2(mask: &MaskContainer) -> Result<DiameterResult> {
    let slice = measurement_slice(mask)?;
    let [_, sy, sx] = mask.spacing();
    let pixels = largest_2d_component(&slice.pixels);
    let HullFrame { poly, frame } = hull_frame(&pixels, sy, sx);
    let t_lax = dot(frame.u, frame.a);
    let (s_min, s_max) = frame.s_range();

    // breakpoints of the chord length: square corners and hull vertices
    let mut offsets: Vec<f64> = poly.iter().map(|p| dot(frame.v, *p)).collect();
    for &[y, x] in &pixels {
        for (cy, cx) in [(y, x), (y + 1, x), (y, x + 1), (y + 1, x + 1)] {
            offsets.push(dot(frame.v, [cy as f64 * sy, cx as f64 * sx]));
        }
    }
    offsets.retain(|&s| s >= s_min - 1e-12 && s <= s_max + 1e-12);
    offsets.sort_by(f64::total_cmp);
    offsets.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut best: Option<(f64, f64, f64)> = None;
    for s in offsets {
        let Some((h0, h1)) = hull_chord(&poly, &frame, s) else {
            continue;
        };
        for (c0, c1) in segmentation_chords(&pixels, sy, sx, &frame, s) {
            let (c0, c1) = (c0.max(h0), c1.min(h1));
            if c0 > c1 {
                continue;
            }
            let (t0, t1) = (c0.min(t_lax), c1.max(t_lax));
            if best.is_none_or(|b| t1 - t0 > (b.2 - b.1) * (1.0 + REL_TIE)) {
                best = Some((s, t0, t1));
            }
        }
    }
    let sax = best.unwrap_or((dot(frame.v, frame.a), t_lax, t_lax));
    Ok(Measured {
        frame,
        sax,
        footprint: sy.min(sx),
    }
    .finish(slice.z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes::{digital_ball, grid_with_spacing, slice_from_ascii};
    use crate::geometry::BoundingBox3D;

    /// Longest chord orthogonal to `lax` over a convex polygon, by trying
    /// every (vertex, edge) pair: a chord through a vertex in direction
    /// `u` ends where it meets an edge.
    fn oracle_orthogonal_chord(poly: &[[f64; 2]], lax: [[f64; 2]; 2]) -> f64 {
        let d = [lax[1][0] - lax[0][0], lax[1][1] - lax[0][1]];
        let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let u = [-d[1] / n, d[0] / n];
        let mut best: f64 = 0.0;
        for &p in poly {
            for i in 0..poly.len() {
                let a = poly[i];
                let b = poly[(i + 1) % poly.len()];
                // p + t u = a + r (b - a)
                let e = [b[0] - a[0], b[1] - a[1]];
                let det = u[0] * (-e[1]) - u[1] * (-e[0]);
                if det.abs() < 1e-14 {
                    continue;
                }
                let rhs = [a[0] - p[0], a[1] - p[1]];
                let t = (rhs[0] * (-e[1]) - rhs[1] * (-e[0])) / det;
                let r = (u[0] * rhs[1] - u[1] * rhs[0]) / det;
                if (-1e-12..=1.0 + 1e-12).contains(&r) {
                    best = best.max(t.abs());
                }
            }
        }
        best
    }

    fn oracle_longest_pair(points: &[[f64; 2]]) -> f64 {
        let mut best: f64 = 0.0;
        for a in points {
            for b in points {
                best = best.max(dist(*a, *b));
            }
        }
        best
    }

    fn rectangle(ny: usize, nx: usize, spacing: f64) -> MaskContainer {
        let mut vox = Vec::new();
        for y in 0..ny {
            for x in 0..nx {
                vox.push([0, y, x]);
            }
        }
        grid_with_spacing([1, ny, nx], [1.0, spacing, spacing], &vox)
    }

    #[test]
    fn single_voxel() {
        let m = grid_with_spacing([1, 1, 1], [1.0; 3], &[[0, 0, 0]]);
        for d in [diameter_v1(&m).unwrap(), diameter_v2(&m).unwrap()] {
            assert_eq!(d.lax, 1.0);
            assert_eq!(d.sax, 1.0);
        }
    }

    #[test]
    fn empty_mask_is_an_error() {
        let m = grid_with_spacing([2, 2, 2], [1.0; 3], &[]);
        assert!(diameter_v1(&m).is_err());
        assert!(diameter_v2(&m).is_err());
    }

    #[test]
    fn rectangle_20_by_10_mm() {
        let m = rectangle(32, 16, 0.625);
        let d = diameter_v1(&m).unwrap();
        // centers span 19.375 x 9.375 mm; closed form: the diagonal, and the
        // perpendicular from a free corner, each plus one voxel
        let (h, w) = (19.375, 9.375);
        let diag = f64::hypot(h, w);
        assert!((d.lax - (diag + 0.625)).abs() < 1e-9, "{d:?}");
        assert!((d.sax - (w * diag / h + 0.625)).abs() < 1e-9, "{d:?}");
        assert!((d.lax - 20f64.hypot(10.0)).abs() < 0.625);
        // exhaustive chord searches
        let (lo, hi_y, hi_x) = (0.3125, 0.3125 + h, 0.3125 + w);
        let poly = [[lo, lo], [hi_y, lo], [hi_y, hi_x], [lo, hi_x]];
        assert!((d.lax - oracle_longest_pair(&poly) - 0.625).abs() < 1e-9);
        assert!((d.sax - oracle_orthogonal_chord(&poly, d.lax_segment) - 0.625).abs() < 1e-9);
        // tie between the two diagonals goes to the lexicographically smaller pair
        assert!(d.lax_segment[0][1] < d.lax_segment[1][1]);
        // convex mask: contour and hull coincide
        let d2 = diameter_v2(&m).unwrap();
        assert!((d2.lax - d.lax).abs() < 1e-9 && (d2.sax - d.sax).abs() < 1e-9);
    }

    #[test]
    fn sax_is_orthogonal_and_bounded() {
        let m = digital_ball([1, 21, 21], [0.5, 10.0, 10.0], 7.3, [1.0, 0.7, 0.9]);
        let d = diameter_v1(&m).unwrap();
        let l = d.lax_segment;
        let s = d.sax_segment;
        let lv = [l[1][0] - l[0][0], l[1][1] - l[0][1]];
        let sv = [s[1][0] - s[0][0], s[1][1] - s[0][1]];
        assert!(dot(lv, sv).abs() < 1e-9);
        assert!(d.sax <= d.lax + 1e-12);
        let bb = BoundingBox3D::new([0, 0, 0], [1, 21, 21]);
        assert!(d.lax <= bb.diagonal_mm(m.spacing()));
        assert!((d.mean - 0.5 * (d.lax + d.sax)).abs() < 1e-15);
    }

    #[test]
    fn sphere_radius_8_at_0625() {
        let m = digital_ball([20, 20, 20], [10.0; 3], 8.0, [0.625; 3]);
        let d = diameter_v1(&m).unwrap();
        assert!((d.mean - 10.0).abs() <= 0.625, "{d:?}");
        assert_eq!(d.slice_index, 9, "first of the equal-area central slices");
    }

    #[test]
    fn spheres_recover_diameter_within_one_voxel() {
        for r in 4..=16 {
            let n = 2 * r + 4;
            let c = (r + 2) as f64;
            let m = digital_ball([n, n, n], [c; 3], r as f64, [1.0; 3]);
            let d = diameter_v1(&m).unwrap();
            assert!((d.mean - 2.0 * r as f64).abs() <= 1.0, "r={r}: {d:?}");
        }
    }

    #[test]
    fn largest_component_only() {
        let mut vox: Vec<[usize; 3]> = Vec::new();
        for y in 0..4 {
            for x in 0..4 {
                vox.push([0, y, x]);
            }
        }
        for x in 10..19 {
            vox.push([2, 10, x]);
        }
        // second blob is longer but smaller by volume
        let m = grid_with_spacing([3, 20, 20], [1.0; 3], &vox);
        let d = diameter_v1(&m).unwrap();
        assert_eq!(d.slice_index, 0);
        assert!((d.lax - (18f64.sqrt() + 1.0)).abs() < 1e-12);
    }

    fn crescent() -> MaskContainer {
        slice_from_ascii(
            &[
                "....######....",
                "..##########..",
                ".####....####.",
                "###........###",
                "##..........##",
                "##..........##",
                "#............#",
                "#............#",
            ],
            [1.0, 0.8, 0.8],
        )
    }

    /// Dense sampling of orthogonal lines and of points along them. A point
    /// counts when it lies in a foreground pixel and inside the center hull.
    /// Mirrors the extension rule and adds the one-voxel footprint.
    fn oracle_sax_v2(m: &MaskContainer, lax: [[f64; 2]; 2]) -> f64 {
        let [_, sy, sx] = m.spacing();
        let [_, ny, nx] = m.shape();
        let dense = m.to_dense();
        let lattice: Vec<Point2> = m.global_voxels().map(|v| [v[1], v[2]]).collect();
        let hull: Vec<[f64; 2]> = convex_hull(&lattice)
            .iter()
            .map(|p| [(p[0] as f64 + 0.5) * sy, (p[1] as f64 + 0.5) * sx])
            .collect();
        // counter-clockwise polygon: inside means left of (or on) every edge
        let in_hull = |p: [f64; 2]| {
            (0..hull.len()).all(|i| {
                let a = hull[i];
                let b = hull[(i + 1) % hull.len()];
                (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -1e-9
            })
        };
        let inside = |p: [f64; 2]| {
            let (y, x) = ((p[0] / sy).floor(), (p[1] / sx).floor());
            y >= 0.0
                && x >= 0.0
                && (y as usize) < ny
                && (x as usize) < nx
                && dense[y as usize * nx + x as usize]
                && in_hull(p)
        };
        let d = [lax[1][0] - lax[0][0], lax[1][1] - lax[0][1]];
        let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let v = [d[0] / n, d[1] / n];
        let u = [-v[1], v[0]];
        let t_lax = dot(u, lax[0]);
        let span = (ny as f64 * sy).hypot(nx as f64 * sx);
        let s0 = dot(v, lax[0]);
        let mut best: f64 = 0.0;
        let steps = 1500;
        let tsteps = 4000;
        for i in 0..=steps {
            let s = s0 + n * i as f64 / steps as f64;
            let mut run: Option<(f64, f64)> = None;
            let mut runs = Vec::new();
            for j in 0..=tsteps {
                let t = -span + 2.0 * span * j as f64 / tsteps as f64;
                let p = [s * v[0] + t * u[0], s * v[1] + t * u[1]];
                if inside(p) {
                    run = Some(run.map_or((t, t), |(a, _)| (a, t)));
                } else if let Some(r) = run.take() {
                    runs.push(r);
                }
            }
            runs.extend(run);
            for (a, b) in runs {
                best = best.max(b.max(t_lax) - a.min(t_lax));
            }
        }
        best + sy.min(sx)
    }

    #[test]
    fn crescent_v2_sax_not_longer_than_v1() {
        let m = crescent();
        let d1 = diameter_v1(&m).unwrap();
        let d2 = diameter_v2(&m).unwrap();
        assert!((d1.lax - d2.lax).abs() < 1e-12);
        assert!(d2.sax <= d1.sax + 1e-12, "{d1:?} {d2:?}");
        let approx = oracle_sax_v2(&m, d2.lax_segment);
        assert!((approx - d2.sax).abs() < 0.05, "oracle {approx} vs {}", d2.sax);
    }

    #[test]
    fn ring_slice_uses_border_chords() {
        // a thick ring: hull chords cross the hole, segmentation chords stop at it
        let m = slice_from_ascii(
            &[
                "..#######..",
                ".#########.",
                "###.....###",
                "##.......##",
                "##.......##",
                "##.......##",
                "###.....###",
                ".#########.",
                "..#######..",
            ],
            [1.0, 1.0, 1.0],
        );
        let d1 = diameter_v1(&m).unwrap();
        let d2 = diameter_v2(&m).unwrap();
        assert!(d2.sax <= d1.sax + 1e-12);
        let approx = oracle_sax_v2(&m, d2.lax_segment);
        assert!((approx - d2.sax).abs() < 0.05, "oracle {approx} vs {}", d2.sax);
    }

    #[test]
    fn v2_uses_largest_2d_component_of_the_slice() {
        // two pieces joined through the slice above, separate on the measured slice
        let mut vox: Vec<[usize; 3]> = Vec::new();
        for y in 0..6 {
            for x in 0..6 {
                vox.push([1, y, x]);
            }
        }
        for y in 0..2 {
            for x in 8..10 {
                vox.push([1, y, x]);
            }
        }
        vox.push([0, 0, 6]);
        vox.push([0, 0, 7]);
        let m = grid_with_spacing([2, 10, 12], [1.0; 3], &vox);
        let d1 = diameter_v1(&m).unwrap();
        let d2 = diameter_v2(&m).unwrap();
        assert!(d2.lax < d1.lax);
        assert!((d2.lax - (50f64.sqrt() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn digital_disk_v2_matches_v1_when_digitally_convex() {
        // a digital disk is a staircase, not a convex set, so border chords can be
        // shorter than hull chords; LAX is shared and SAX never grows.
        let m = digital_ball([1, 17, 17], [0.5, 8.0, 8.0], 8.0, [1.0, 0.625, 0.625]);
        let d1 = diameter_v1(&m).unwrap();
        let d2 = diameter_v2(&m).unwrap();
        assert_eq!(d1.lax, d2.lax);
        assert!(d2.sax <= d1.sax + 1e-12);
        assert!(d1.sax - d2.sax < 0.625, "{d1:?} {d2:?}");
    }

    proptest::proptest! {
        #[test]
        fn invariants_hold_on_random_masks(
            dense in proptest::collection::vec(proptest::bool::weighted(0.4), 2 * 7 * 7),
            sy in 0.3f64..1.5,
            sx in 0.3f64..1.5,
        ) {
            proptest::prop_assume!(dense.iter().any(|&b| b));
            let m = MaskContainer::from_dense([2, 7, 7], [1.0, sy, sx], [0; 3], &dense).unwrap();
            let bb = m.bbox().unwrap();
            for d in [diameter_v1(&m).unwrap(), diameter_v2(&m).unwrap()] {
                proptest::prop_assert!(d.sax <= d.lax + 1e-9);
                proptest::prop_assert!(d.lax > 0.0);
                proptest::prop_assert!(d.lax <= bb.diagonal_mm(m.spacing()) + 1e-9);
                proptest::prop_assert!((d.mean - 0.5 * (d.lax + d.sax)).abs() < 1e-12);
            }
            let d1 = diameter_v1(&m).unwrap();
            let d2 = diameter_v2(&m).unwrap();
            proptest::prop_assert!(d2.lax <= d1.lax + 1e-9);
            proptest::prop_assert_eq!(d1, diameter_v1(&m).unwrap());
        }
    }
}
