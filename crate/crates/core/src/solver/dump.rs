use std::io::Write;

use super::SimulationResult;
use crate::num::Real;

/// Writes recorded snapshots as whitespace-separated columns
/// `z t_ns re_E im_E abs2_P abs2_S`, one row per (snapshot, cell).
/// z is the normalised cell centre.
pub fn write_field_dump<T: Real, W: Write>(result: &SimulationResult<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# z t_ns re_E im_E abs2_P abs2_S")?;
    for snap in &result.snapshots {
        let n = snap.p.len();
        let t_ns = snap.time.as_f64() * 1e9;
        for j in 0..n {
            let z = (j as f64 + 0.5) / n as f64;
            writeln!(
                out,
                "{z:.6} {t_ns:.4} {:.9e} {:.9e} {:.9e} {:.9e}",
                snap.e[j].re.as_f64(),
                snap.e[j].im.as_f64(),
                snap.p[j].norm_sqr().as_f64(),
                snap.s[j].norm_sqr().as_f64()
            )?;
        }
    }
    Ok(())
}
