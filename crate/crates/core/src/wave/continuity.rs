use super::density::DensitySnapshot;
use super::WaveError;

/// Discrete L¹ norm of `∂_t ρ + Σ_j ∇_j·(ρ v^j)` between two snapshots.
///
/// The time derivative is the difference quotient across the pair and the
/// flux is averaged over both snapshots, so the scheme is centred at the
/// midpoint in time; spatial derivatives are periodic central differences.
pub fn continuity_residual(a: &DensitySnapshot, b: &DensitySnapshot) -> Result<f64, WaveError> {
    if a.axis != b.axis || a.particles != b.particles || a.cells() != b.cells() {
        return Err(WaveError::GridMismatch("continuity check needs snapshots on one grid".into()));
    }
    let dt = b.time - a.time;
    if !(dt > 0.0) {
        return Err(WaveError::GridMismatch(format!("snapshot times must increase, got dt = {dt}")));
    }
    let dims = a.dims();
    let p = a.axis.points;
    let cells = a.cells();
    let flux = |cell: usize, axis: usize| {
        0.5 * (a.density[cell] * a.velocity[cell * dims + axis] + b.density[cell] * b.velocity[cell * dims + axis])
    };
    let strides: Vec<usize> = (0..dims).map(|ax| p.pow((dims - 1 - ax) as u32)).collect();
    let inv_2h = 1.0 / (2.0 * a.axis.spacing);
    let mut total = 0.0;
    for cell in 0..cells {
        let mut r = (b.density[cell] - a.density[cell]) / dt;
        for (ax, &stride) in strides.iter().enumerate() {
            let i = (cell / stride) % p;
            let base = cell - i * stride;
            let up = base + ((i + 1) % p) * stride;
            let down = base + ((i + p - 1) % p) * stride;
            r += (flux(up, ax) - flux(down, ax)) * inv_2h;
        }
        total += r.abs();
    }
    Ok(total * a.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::density::JointAxis;

    fn zero(time: f64) -> DensitySnapshot {
        let axis = JointAxis {
            points: 4,
            spacing: 1.0,
            origin: -2.0,
        };
        DensitySnapshot::from_fields(time, 1, axis, 1.0, vec![0.0; 64], vec![0.0; 192]).unwrap()
    }

    #[test]
    fn zero_state_has_zero_residual() {
        assert_eq!(continuity_residual(&zero(0.0), &zero(0.1)).unwrap(), 0.0);
        assert!(continuity_residual(&zero(0.1), &zero(0.1)).is_err());
    }
}
