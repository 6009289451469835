//! Stokes probability versus write power.

use super::ModelError;

/// Stokes probability at zero write power, %.
pub const BACKGROUND_PERCENT: f64 = 0.5;
/// Total Stokes probability at the 90 µW operating point, %.
pub const OPERATING_PERCENT: f64 = 1.6;
pub const OPERATING_POWER_UW: f64 = 90.0;
/// Slope of the linear law, %/µW, fixed by the two anchors above.
pub const SLOPE_PERCENT_PER_UW: f64 = (OPERATING_PERCENT - BACKGROUND_PERCENT) / OPERATING_POWER_UW;

/// Total Stokes probability in percent, linear in write power.
///
/// The law holds only at moderate power; at high power the comb degrades
/// and the measured probability bends away from the line.
pub fn stokes_probability(write_power_uw: f64, slope: f64, background: f64) -> Result<f64, ModelError> {
    if !(write_power_uw >= 0.0) || !(slope >= 0.0) || !(background >= 0.0) {
        return Err(ModelError::Domain(format!(
            "stokes_probability needs non-negative inputs, got power={write_power_uw}, slope={slope}, background={background}"
        )));
    }
    Ok(slope * write_power_uw + background)
}

/// Genuine creation density (%/µs) giving `total_percent` over a gate of
/// `gate_us` once `background_percent` is removed.
pub fn density_for_total(total_percent: f64, background_percent: f64, gate_us: f64) -> f64 {
    (total_percent - background_percent).max(0.0) / gate_us
}
