//! Seasonal-plus-noise generators for every measurable catalog feature.

/// Daily value model: `base + region offset + amp * cos(2 pi (doy - peak) / 365.25) + AR(1) noise`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureModel {
    pub base: f64,
    pub amplitude: f64,
    pub peak_doy: f64,
    /// Standard deviation of per-region offsets (0 for meteorological features).
    pub region_sd: f64,
    /// Innovation standard deviation of the AR(1) anomaly.
    pub noise_sd: f64,
    pub phi: f64,
    pub min: f64,
    pub max: f64,
    /// Decimal places written by the generator.
    pub decimals: u32,
}

const fn m(base: f64, amplitude: f64, peak_doy: f64, region_sd: f64, noise_sd: f64, phi: f64, min: f64, max: f64, decimals: u32) -> FeatureModel {
    FeatureModel { base, amplitude, peak_doy, region_sd, noise_sd, phi, min, max, decimals }
}

/// Generator for a catalog feature; `None` for derived features.
pub fn model_for(feature: &str) -> Option<FeatureModel> {
    Some(match feature {
        "mean_temperature" => m(10.5, 6.5, 205.0, 0.0, 1.2, 0.8, -15.0, 40.0, 1),
        "max_temperature" => m(14.5, 7.0, 205.0, 0.0, 1.5, 0.75, -10.0, 45.0, 1),
        "min_temperature" => m(6.5, 5.5, 210.0, 0.0, 1.5, 0.75, -20.0, 30.0, 1),
        "sunshine_duration" => m(4.6, 2.6, 150.0, 0.0, 2.4, 0.35, 0.0, 16.0, 1),
        "global_radiation" => m(1000.0, 780.0, 172.0, 0.0, 130.0, 0.93, 20.0, 3300.0, 0),
        "wind_speed" => m(6.2, 1.2, 15.0, 0.0, 1.8, 0.55, 0.3, 30.0, 1),
        "wind_direction" => m(205.0, 0.0, 0.0, 0.0, 55.0, 0.5, 1.0, 360.0, 0),
        "precipitation_duration" => m(1.0, 0.4, 330.0, 0.0, 2.4, 0.45, 0.0, 24.0, 1),
        "precipitation" => m(0.4, 0.6, 320.0, 0.0, 3.2, 0.4, 0.0, 80.0, 1),
        "oxygen_concentration" => m(8.6, 1.4, 30.0, 0.3, 0.2, 0.92, 3.0, 14.0, 2),
        "oxygen_saturation" => m(97.0, 6.0, 120.0, 2.0, 1.5, 0.9, 60.0, 140.0, 1),
        "chlorophyll" => m(6.0, 4.0, 120.0, 1.0, 0.9, 0.9, 0.2, 60.0, 2),
        "chloride" => m(16500.0, 350.0, 260.0, 350.0, 75.0, 0.985, 9000.0, 21000.0, 0),
        "chlorosity" => m(16.6, 0.4, 250.0, 0.3, 0.08, 0.97, 9.0, 21.0, 3),
        "pheophytin" => m(2.0, 1.0, 140.0, 0.4, 0.4, 0.9, 0.05, 20.0, 2),
        "ph" => m(8.0, 0.08, 130.0, 0.03, 0.02, 0.9, 7.0, 9.0, 3),
        "air_pressure" => m(1015.0, 3.0, 200.0, 0.5, 3.5, 0.8, 950.0, 1060.0, 1),
        "water_height" => m(5.0, 8.0, 330.0, 6.0, 30.0, 0.35, -300.0, 400.0, 0),
        "water_height_calculated" => m(5.0, 8.0, 330.0, 6.0, 25.0, 0.35, -300.0, 400.0, 0),
        "water_temperature" => m(12.5, 6.3, 218.0, 0.5, 0.22, 0.985, -1.0, 30.0, 2),
        "hydro_wind_direction" => m(210.0, 0.0, 0.0, 10.0, 60.0, 0.5, 1.0, 360.0, 0),
        "hydro_wind_speed" => m(6.8, 1.3, 15.0, 0.4, 1.9, 0.55, 0.3, 30.0, 1),
        "conductivity" => m(4300.0, 120.0, 240.0, 80.0, 18.0, 0.96, 2500.0, 5500.0, 0),
        "salinity" => m(30.0, 0.7, 255.0, 0.6, 0.12, 0.96, 15.0, 36.0, 2),
        _ => return None,
    })
}

impl FeatureModel {
    pub fn seasonal(&self, doy: f64) -> f64 {
        self.base + self.amplitude * (2.0 * std::f64::consts::PI * (doy - self.peak_doy) / 365.25).cos()
    }

    pub fn finish(&self, raw: f64) -> f64 {
        let p = 10f64.powi(self.decimals as i32);
        (raw.clamp(self.min, self.max) * p).round() / p
    }
}
