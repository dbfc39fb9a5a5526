//! Physical constants shared across the crate.

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Vacuum permittivity (F/m).
pub const EPS_0: f64 = 8.854_187_8128e-12;

/// Operating temperature (K). Both benchmark tables are quoted at 25 °C and
/// the models carry no temperature dependence beyond the thermal voltage.
pub const T_OP: f64 = 298.15;

/// Thermal voltage kT/q at 25 °C (V).
pub const U_T: f64 = BOLTZMANN * T_OP / ELEMENTARY_CHARGE;

/// ln(10), for decade/subthreshold-slope conversions.
pub const LN10: f64 = core::f64::consts::LN_10;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermal_voltage_at_25c() {
        assert!((U_T - 0.025693).abs() < 1e-5);
    }
}
