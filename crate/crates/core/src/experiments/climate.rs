//! Synthetic monthly climate over a continental rectangle.
//!
//! Mean temperature falls with latitude and dips over a cold plateau in the
//! south-west. The seasonal amplitude grows with latitude and with distance
//! from the east coast, so stations with similar means can differ sharply in
//! their annual range. Precipitation rises from north-west to south-east and
//! peaks in summer, later in the north.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Station;
use crate::imputation::MONTHS;

pub const LONGITUDE_RANGE: (f64, f64) = (75.0, 131.0);
pub const LATITUDE_RANGE: (f64, f64) = (18.5, 52.73);

const COAST_LONGITUDE: f64 = 122.0;
const PLATEAU: (f64, f64) = (88.0, 32.0);

/// Noise-free climate at a location.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClimateNormals {
    pub temperature_mean: f64,
    /// Half the July-minus-January temperature difference.
    pub temperature_amplitude: f64,
    pub precipitation_mean: f64,
    /// Concentration of rain around its peak; 0 is uniform.
    pub monsoon: f64,
    /// 0-based month of peak rainfall; the rainy season arrives later in the north.
    pub monsoon_peak: f64,
}

/// South-east (1) to north-west (-1) position.
fn monsoon_axis(lon: f64, lat: f64) -> f64 {
    let x = (lon - LONGITUDE_RANGE.0) / (LONGITUDE_RANGE.1 - LONGITUDE_RANGE.0);
    let y = (lat - LATITUDE_RANGE.0) / (LATITUDE_RANGE.1 - LATITUDE_RANGE.0);
    x - y
}

pub fn climate_normals(lon: f64, lat: f64) -> ClimateNormals {
    let plateau = (-((lon - PLATEAU.0).powi(2) / (2.0 * 10.0f64.powi(2)) + (lat - PLATEAU.1).powi(2) / (2.0 * 5.0f64.powi(2)))).exp();
    let temperature_mean = 25.0 - 0.75 * (lat - LATITUDE_RANGE.0) - 16.0 * plateau;
    let inland = (COAST_LONGITUDE - lon).max(0.0) + 3.0 * (lon - COAST_LONGITUDE).max(0.0);
    let temperature_amplitude = 3.0 + 0.35 * (lat - LATITUDE_RANGE.0) + 0.25 * inland - 6.0 * plateau;
    let axis = monsoon_axis(lon, lat);
    ClimateNormals {
        temperature_mean,
        temperature_amplitude,
        precipitation_mean: 70.0 + 45.0 * axis,
        monsoon: 1.2 + 0.5 * axis,
        monsoon_peak: 5.0 + 2.5 * (lat - LATITUDE_RANGE.0) / (LATITUDE_RANGE.1 - LATITUDE_RANGE.0),
    }
}

/// Relative rainfall of month `m` (0-based), averaging 1 over the year.
fn monsoon_profile(kappa: f64, peak: f64) -> [f64; MONTHS] {
    let raw: [f64; MONTHS] =
        std::array::from_fn(|m| (kappa * (2.0 * std::f64::consts::PI * (m as f64 - peak) / MONTHS as f64).cos()).exp());
    let mean = raw.iter().sum::<f64>() / MONTHS as f64;
    raw.map(|r| r / mean)
}

/// `n` stations at uniform random locations. `noise_level` scales every
/// Gaussian perturbation: per station, the temperature mean and amplitude
/// (sd 0.7), rainfall mean (sd 15) and concentration (sd 0.2); per month,
/// temperature (sd 0.5) and rainfall (sd 4).
pub fn generate_synthetic_stations(n: usize, seed: u64, noise_level: f64) -> Vec<Station> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let s = noise_level.max(0.0);
    (0..n)
        .map(|_| {
            let lon = rng.random_range(LONGITUDE_RANGE.0..=LONGITUDE_RANGE.1);
            let lat = rng.random_range(LATITUDE_RANGE.0..=LATITUDE_RANGE.1);
            let c = climate_normals(lon, lat);
            let t_mean = c.temperature_mean + 0.7 * s * unit.sample(&mut rng);
            let amplitude = (c.temperature_amplitude + 0.7 * s * unit.sample(&mut rng)).max(0.0);
            let p_mean = (c.precipitation_mean + 15.0 * s * unit.sample(&mut rng)).max(1.0);
            let kappa = (c.monsoon + 0.2 * s * unit.sample(&mut rng)).max(0.0);
            let profile = monsoon_profile(kappa, c.monsoon_peak);
            let temperatures = std::array::from_fn(|m| {
                let season = -(2.0 * std::f64::consts::PI * m as f64 / MONTHS as f64).cos();
                t_mean + amplitude * season + 0.5 * s * unit.sample(&mut rng)
            });
            let precipitations =
                std::array::from_fn(|m| (p_mean * profile[m] + 4.0 * s * unit.sample(&mut rng)).max(0.0));
            Station {
                longitude: lon,
                latitude: lat,
                temperatures,
                precipitations,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continentality_separates_equal_latitudes() {
        let coast = climate_normals(120.0, 45.0);
        let inland = climate_normals(105.0, 45.0);
        assert!((coast.temperature_mean - inland.temperature_mean).abs() < 1.0);
        assert!(inland.temperature_amplitude > coast.temperature_amplitude + 2.0);
    }

    #[test]
    fn temperature_falls_northward() {
        assert!(climate_normals(115.0, 20.0).temperature_mean > climate_normals(115.0, 50.0).temperature_mean);
    }

    #[test]
    fn deterministic_and_sized() {
        let a = generate_synthetic_stations(260, 7, 0.0);
        assert_eq!(a.len(), 260);
        assert_eq!(a, generate_synthetic_stations(260, 7, 0.0));
        assert_ne!(a, generate_synthetic_stations(260, 8, 0.0));
        for s in &a {
            s.validate().unwrap();
            assert!((LONGITUDE_RANGE.0..=LONGITUDE_RANGE.1).contains(&s.longitude));
            assert!((LATITUDE_RANGE.0..=LATITUDE_RANGE.1).contains(&s.latitude));
        }
    }

    #[test]
    fn noiseless_series_follow_normals() {
        let s = &generate_synthetic_stations(1, 3, 0.0)[0];
        let c = climate_normals(s.longitude, s.latitude);
        let mean = s.temperatures.iter().sum::<f64>() / 12.0;
        assert!((mean - c.temperature_mean).abs() < 1e-9);
        assert!((s.temperatures[6] - s.temperatures[0] - 2.0 * c.temperature_amplitude).abs() < 1e-9);
        assert!((s.precipitations.iter().sum::<f64>() / 12.0 - c.precipitation_mean).abs() < 1e-9);
    }
}
