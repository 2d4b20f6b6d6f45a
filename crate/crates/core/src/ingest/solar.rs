//! Sunrise, sunset and day length from solar geometry.
//!
//! Solar position from low-precision Julian-century series (equation of time
//! and declination), evaluated at the event time, with the standard 90.833°
//! zenith (refraction plus solar radius). Times are decimal hours in UTC+1.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZENITH_DEG: f64 = 90.833;
const UTC_OFFSET_HOURS: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolarTimes {
    pub sunrise_hour: f64,
    pub sunset_hour: f64,
    pub day_length: f64,
}

/// Fixed reference coordinate for the derived calendar features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub latitude: f64,
    pub longitude: f64,
}

impl Default for Site {
    /// Vlissingen.
    fn default() -> Self {
        Self {
            latitude: 51.5,
            longitude: 3.6,
        }
    }
}

pub fn derive_solar(date: NaiveDate, latitude: f64, longitude: f64) -> Result<SolarTimes> {
    if !latitude.is_finite() || latitude.abs() >= 66.5 {
        return Err(Error::LatitudeOutOfRange(latitude));
    }
    let sunrise_hour = event_utc_hour(date, latitude, longitude, true) + UTC_OFFSET_HOURS;
    let sunset_hour = event_utc_hour(date, latitude, longitude, false) + UTC_OFFSET_HOURS;
    Ok(SolarTimes {
        sunrise_hour,
        sunset_hour,
        day_length: sunset_hour - sunrise_hour,
    })
}

/// Equation of time (minutes) and declination (radians) at Julian day `jd`.
fn solar_position(jd: f64) -> (f64, f64) {
    let t = (jd - 2_451_545.0) / 36_525.0;
    let l0 = (280.46646 + t * (36_000.76983 + t * 0.0003032)).rem_euclid(360.0);
    let m = (357.52911 + t * (35_999.05029 - 0.0001537 * t)).to_radians();
    let e = 0.016708634 - t * (0.000042037 + 0.0000001267 * t);
    let c = m.sin() * (1.914602 - t * (0.004817 + 0.000014 * t))
        + (2.0 * m).sin() * (0.019993 - 0.000101 * t)
        + (3.0 * m).sin() * 0.000289;
    let omega = (125.04 - 1934.136 * t).to_radians();
    let lambda = (l0 + c - 0.00569 - 0.00478 * omega.sin()).to_radians();
    let eps0 = 23.0 + (26.0 + (21.448 - t * (46.815 + t * (0.00059 - t * 0.001813))) / 60.0) / 60.0;
    let eps = (eps0 + 0.00256 * omega.cos()).to_radians();
    let decl = (eps.sin() * lambda.sin()).asin();
    let y = (eps / 2.0).tan().powi(2);
    let l0 = l0.to_radians();
    let eqtime = 4.0
        * (y * (2.0 * l0).sin() - 2.0 * e * m.sin() + 4.0 * e * y * m.sin() * (2.0 * l0).cos()
            - 0.5 * y * y * (4.0 * l0).sin()
            - 1.25 * e * e * (2.0 * m).sin())
        .to_degrees();
    (eqtime, decl)
}

/// Sunrise or sunset in UTC hours, re-evaluating the sun's position at the event.
fn event_utc_hour(date: NaiveDate, latitude: f64, longitude: f64, rising: bool) -> f64 {
    // Julian day at 00:00 UTC.
    let jd0 = f64::from(date.num_days_from_ce()) + 1_721_424.5;
    let lat = latitude.to_radians();
    let mut hour = 12.0;
    for _ in 0..3 {
        let (eqtime, decl) = solar_position(jd0 + hour / 24.0);
        let cos_ha = ZENITH_DEG.to_radians().cos() / (lat.cos() * decl.cos()) - lat.tan() * decl.tan();
        let ha = cos_ha.clamp(-1.0, 1.0).acos().to_degrees();
        let minutes = if rising {
            720.0 - 4.0 * (longitude + ha) - eqtime
        } else {
            720.0 - 4.0 * (longitude - ha) - eqtime
        };
        hour = minutes / 60.0;
    }
    hour
}

/// ISO-8601 week number (1..=53).
pub fn iso_week(date: NaiveDate) -> u32 {
    date.iso_week().week()
}
