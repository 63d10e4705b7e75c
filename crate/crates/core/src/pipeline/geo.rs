//! Planar projection for raw GPS fixes.
//!
//! Equirectangular projection about a reference point `(lat0, lon0)`:
//! `x = R * (lon - lon0) * cos(lat0)`, `y = R * (lat - lat0)`, angles in
//! radians and `R = 6_371_008.8 m` (mean Earth radius). Over paddock-sized
//! areas the distortion is far below GPS noise.

pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Project `(lat, lon)` degrees to metres east/north of `origin`.
pub fn equirectangular(lat: f64, lon: f64, origin: (f64, f64)) -> (f64, f64) {
    let (lat0, lon0) = (origin.0.to_radians(), origin.1.to_radians());
    let x = EARTH_RADIUS_M * (lon.to_radians() - lon0) * lat0.cos();
    let y = EARTH_RADIUS_M * (lat.to_radians() - lat0);
    (x, y)
}

/// Project a batch of fixes about their own centroid.
pub fn project_about_centroid(fixes: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if fixes.is_empty() {
        return Vec::new();
    }
    let n = fixes.len() as f64;
    let origin = fixes
        .iter()
        .fold((0.0, 0.0), |(a, b), &(lat, lon)| (a + lat / n, b + lon / n));
    fixes.iter().map(|&(lat, lon)| equirectangular(lat, lon, origin)).collect()
}
