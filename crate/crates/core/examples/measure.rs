//! Long-axis, short-axis and mean diameter of a segmentation mask.

use cadeval::geometry::{diameter_v1, diameter_v2, mask_volume};
use cadeval::io::sphere_mask;

fn main() -> cadeval::Result<()> {
    let spacing = [1.25, 0.7, 0.7];
    for radius in [3.0, 6.0, 12.0] {
        let m = sphere_mask([0, 0, 0], radius, spacing)?;
        let (a, b) = (diameter_v1(&m)?, diameter_v2(&m)?);
        println!(
            "sphere {:>4.1} mm: v1 lax {:.2} sax {:.2} mean {:.2} | v2 mean {:.2} | volume {:.1} mm3",
            2.0 * radius,
            a.lax,
            a.sax,
            a.mean,
            b.mean,
            mask_volume(&m)
        );
    }
    Ok(())
}
