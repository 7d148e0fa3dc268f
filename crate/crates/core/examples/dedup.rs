//! Merge overlapping segmented findings into disjoint nodules.

use cadeval::geometry::diameter_v1;
use cadeval::io::sphere_mask;
use cadeval::matching::{dedup, in_size_window, DedupOptions, Finding};

fn finding(id: &str, center: [i64; 3], radius: f64, score: f64) -> cadeval::Result<Finding> {
    let mask = sphere_mask(center, radius, [1.0; 3])?;
    Ok(Finding {
        id: id.into(),
        bbox: mask.bbox().expect("non-empty sphere"),
        mask,
        score,
        patch_center: None,
    })
}

fn main() -> cadeval::Result<()> {
    let findings = vec![
        finding("a", [20, 20, 20], 5.0, 0.9),
        finding("b", [22, 21, 20], 5.0, 0.6),
        finding("c", [60, 60, 60], 3.0, 0.4),
    ]
    .into_iter()
    .collect::<cadeval::Result<Vec<_>>>()?;
    let merged = dedup(&findings, &DedupOptions::default())?;
    for f in &merged {
        let d = diameter_v1(&f.mask)?.mean;
        println!(
            "{}: score {:.2}, {} voxels, {d:.1} mm, in 4-40 mm window: {}",
            f.id,
            f.score,
            f.mask.count(),
            in_size_window(d, 4.0, 40.0)
        );
    }
    Ok(())
}
