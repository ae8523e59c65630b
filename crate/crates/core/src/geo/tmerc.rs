//! WGS84 transverse Mercator in the Krüger n-series form (6th order), as used
//! by all UTM zones.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geo::Hemisphere;

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;
const UTM_K0: f64 = 0.9996;
const UTM_FALSE_EASTING: f64 = 500_000.0;
const UTM_FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;
const MAX_ABS_LAT: f64 = 84.0;

struct Series {
    e: f64,
    e2: f64,
    // Rectifying radius scaled by k0.
    k0_a_hat: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
}

fn series() -> &'static Series {
    static SERIES: OnceLock<Series> = OnceLock::new();
    SERIES.get_or_init(|| {
        let f = WGS84_F;
        let e2 = f * (2.0 - f);
        let n = f / (2.0 - f);
        let n2 = n * n;
        let n3 = n2 * n;
        let n4 = n3 * n;
        let n5 = n4 * n;
        let n6 = n5 * n;
        let a_hat = WGS84_A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
        let alpha = [
            n / 2.0 - 2.0 / 3.0 * n2 + 5.0 / 16.0 * n3 + 41.0 / 180.0 * n4
                - 127.0 / 288.0 * n5
                + 7891.0 / 37800.0 * n6,
            13.0 / 48.0 * n2 - 3.0 / 5.0 * n3 + 557.0 / 1440.0 * n4 + 281.0 / 630.0 * n5
                - 1983433.0 / 1935360.0 * n6,
            61.0 / 240.0 * n3 - 103.0 / 140.0 * n4
                + 15061.0 / 26880.0 * n5
                + 167603.0 / 181440.0 * n6,
            49561.0 / 161280.0 * n4 - 179.0 / 168.0 * n5 + 6601661.0 / 7257600.0 * n6,
            34729.0 / 80640.0 * n5 - 3418889.0 / 1995840.0 * n6,
            212378941.0 / 319334400.0 * n6,
        ];
        let beta = [
            n / 2.0 - 2.0 / 3.0 * n2 + 37.0 / 96.0 * n3 - 1.0 / 360.0 * n4 - 81.0 / 512.0 * n5
                + 96199.0 / 604800.0 * n6,
            1.0 / 48.0 * n2 + 1.0 / 15.0 * n3 - 437.0 / 1440.0 * n4 + 46.0 / 105.0 * n5
                - 1118711.0 / 3870720.0 * n6,
            17.0 / 480.0 * n3 - 37.0 / 840.0 * n4 - 209.0 / 4480.0 * n5
                + 5569.0 / 90720.0 * n6,
            4397.0 / 161280.0 * n4 - 11.0 / 504.0 * n5 - 830251.0 / 7257600.0 * n6,
            4583.0 / 161280.0 * n5 - 108847.0 / 3991680.0 * n6,
            20648693.0 / 638668800.0 * n6,
        ];
        Series {
            e: e2.sqrt(),
            e2,
            k0_a_hat: UTM_K0 * a_hat,
            alpha,
            beta,
        }
    })
}

/// Longitude of the central meridian of `zone`, in degrees.
pub fn central_meridian(zone: u8) -> f64 {
    zone as f64 * 6.0 - 183.0
}

/// Standard 6° UTM zone containing `lon` (degrees). Longitudes on a zone
/// boundary belong to the eastern zone; 180° wraps to zone 60.
pub fn utm_zone_for_lon(lon: f64) -> u8 {
    let z = ((lon + 180.0) / 6.0).floor() as i64 + 1;
    z.clamp(1, 60) as u8
}

fn check_zone(zone: u8) -> Result<()> {
    if (1..=60).contains(&zone) {
        Ok(())
    } else {
        Err(Error::invalid(format!("UTM zone {zone} outside 1..=60")))
    }
}

// Conformal latitude tangent from geodetic tangent.
fn conformal_tan(tau: f64, s: &Series) -> f64 {
    let tau1 = tau.hypot(1.0);
    let sig = (s.e * (s.e * tau / tau1).atanh()).sinh();
    tau * sig.hypot(1.0) - sig * tau1
}

// Inverse of `conformal_tan` by Newton iteration.
fn geodetic_tan(tau_p: f64, s: &Series) -> f64 {
    let mut tau = tau_p / (1.0 - s.e2);
    for _ in 0..10 {
        let tau_pi = conformal_tan(tau, s);
        let tau1 = tau.hypot(1.0);
        let dtau = (tau_p - tau_pi) * (1.0 + (1.0 - s.e2) * tau * tau)
            / ((1.0 - s.e2) * tau1 * tau_pi.hypot(1.0));
        tau += dtau;
        if dtau.abs() <= 1e-15 * tau.abs().max(1.0) {
            break;
        }
    }
    tau
}

/// Projects geodetic (`lat`, `lon`) in degrees to UTM (easting, northing) in
/// meters for the given zone and hemisphere.
pub fn utm_forward(lat: f64, lon: f64, zone: u8, hemisphere: Hemisphere) -> Result<(f64, f64)> {
    check_zone(zone)?;
    if !lat.is_finite() || lat.abs() >= MAX_ABS_LAT {
        return Err(Error::invalid(format!("latitude {lat} outside (-84, 84)")));
    }
    if !lon.is_finite() || !(-180.0..180.0).contains(&lon) {
        return Err(Error::invalid(format!("longitude {lon} outside [-180, 180)")));
    }
    let s = series();
    let mut dlon = lon - central_meridian(zone);
    if dlon < -180.0 {
        dlon += 360.0;
    } else if dlon >= 180.0 {
        dlon -= 360.0;
    }
    let dlam = dlon * PI / 180.0;
    let phi = lat * PI / 180.0;

    let tau_p = conformal_tan(phi.tan(), s);
    let (sin_l, cos_l) = dlam.sin_cos();
    let xi_p = tau_p.atan2(cos_l);
    let eta_p = (sin_l / tau_p.hypot(cos_l)).asinh();

    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, a) in s.alpha.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
    }

    let easting = UTM_FALSE_EASTING + s.k0_a_hat * eta;
    let northing = s.k0_a_hat * xi
        + match hemisphere {
            Hemisphere::North => 0.0,
            Hemisphere::South => UTM_FALSE_NORTHING_SOUTH,
        };
    Ok((easting, northing))
}

/// Inverse of [`utm_forward`]: UTM (easting, northing) to (lat, lon) degrees.
pub fn utm_inverse(
    easting: f64,
    northing: f64,
    zone: u8,
    hemisphere: Hemisphere,
) -> Result<(f64, f64)> {
    check_zone(zone)?;
    if !easting.is_finite() || !northing.is_finite() {
        return Err(Error::invalid("non-finite UTM coordinate"));
    }
    let s = series();
    let y = match hemisphere {
        Hemisphere::North => northing,
        Hemisphere::South => northing - UTM_FALSE_NORTHING_SOUTH,
    };
    let xi = y / s.k0_a_hat;
    let eta = (easting - UTM_FALSE_EASTING) / s.k0_a_hat;

    let mut xi_p = xi;
    let mut eta_p = eta;
    for (j, b) in s.beta.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi_p -= b * (k * xi).sin() * (k * eta).cosh();
        eta_p -= b * (k * xi).cos() * (k * eta).sinh();
    }

    let sinh_eta = eta_p.sinh();
    let (sin_xi, cos_xi) = xi_p.sin_cos();
    let tau_p = sin_xi / sinh_eta.hypot(cos_xi);
    let tau = geodetic_tan(tau_p, s);

    let lat = tau.atan() * 180.0 / PI;
    let mut lon = central_meridian(zone) + sinh_eta.atan2(cos_xi) * 180.0 / PI;
    if lon >= 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    Ok((lat, lon))
}
