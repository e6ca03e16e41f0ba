//! Spherical distances in statute miles.

/// Mean Earth radius, miles.
pub const EARTH_RADIUS_MI: f64 = 3958.8;

/// Haversine great-circle distance between two `[lon, lat]` points in degrees.
pub fn great_circle_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (lon1, lat1) = (a[0].to_radians(), a[1].to_radians());
    let (lon2, lat2) = (b[0].to_radians(), b[1].to_radians());
    let s_lat = ((lat2 - lat1) / 2.0).sin();
    let s_lon = ((lon2 - lon1) / 2.0).sin();
    let h = s_lat * s_lat + lat1.cos() * lat2.cos() * s_lon * s_lon;
    2.0 * EARTH_RADIUS_MI * h.sqrt().min(1.0).asin()
}

/// Point reached from `origin` after `distance` miles on initial `bearing`
/// (degrees clockwise from north).
pub fn destination(origin: [f64; 2], bearing: f64, distance: f64) -> [f64; 2] {
    let (lon1, lat1) = (origin[0].to_radians(), origin[1].to_radians());
    let d = distance / EARTH_RADIUS_MI;
    let th = bearing.to_radians();
    let lat2 = (lat1.sin() * d.cos() + lat1.cos() * d.sin() * th.cos()).asin();
    let lon2 = lon1 + (th.sin() * d.sin() * lat1.cos()).atan2(d.cos() - lat1.sin() * lat2.sin());
    [lon2.to_degrees(), lat2.to_degrees()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_degree_of_latitude() {
        let d = great_circle_distance([0.0, 30.0], [0.0, 31.0]);
        // R * pi / 180
        let expected = 3958.8 * std::f64::consts::PI / 180.0;
        assert!((d - expected).abs() < 1e-9);
        assert!((d - 69.0941).abs() < 1e-4);
    }

    #[test]
    fn identical_points() {
        assert_eq!(great_circle_distance([-95.0, 38.0], [-95.0, 38.0]), 0.0);
    }

    #[test]
    fn quarter_meridian() {
        let d = great_circle_distance([10.0, 0.0], [10.0, 90.0]);
        assert!((d - EARTH_RADIUS_MI * std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn destination_round_trip() {
        let o = [-95.0, 38.0];
        let p = destination(o, 57.0, 420.0);
        assert!((great_circle_distance(o, p) - 420.0).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn symmetric_and_nonnegative(
            lon1 in -180.0f64..180.0, lat1 in -89.0f64..89.0,
            lon2 in -180.0f64..180.0, lat2 in -89.0f64..89.0,
        ) {
            let ab = great_circle_distance([lon1, lat1], [lon2, lat2]);
            let ba = great_circle_distance([lon2, lat2], [lon1, lat1]);
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1.0));
        }
    }
}
