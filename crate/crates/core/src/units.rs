//! dBm <-> watt conversions used at configuration boundaries.

/// `10^((p - 30) / 10)` watts.
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

/// Inverse of [`dbm_to_watts`].
pub fn watts_to_dbm(p_watts: f64) -> f64 {
    10.0 * p_watts.log10() + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn reference_points() {
        assert_relative_eq!(dbm_to_watts(30.0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(dbm_to_watts(20.0), 0.1, max_relative = 1e-12);
        // Thermal floor for B = 5 MHz: -174 + 10 log10(5e6) dBm.
        let thermal = -174.0 + 10.0 * 5.0e6f64.log10();
        assert_relative_eq!(thermal, -107.0102999566, max_relative = 1e-10);
        assert_relative_eq!(dbm_to_watts(thermal), 1.9905358528e-14, max_relative = 1e-9);
    }

    proptest! {
        #[test]
        fn round_trip(p in -200.0f64..100.0) {
            let back = watts_to_dbm(dbm_to_watts(p));
            prop_assert!((back - p).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }
}
