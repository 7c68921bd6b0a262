//! Gaussian plume forward model.
//!
//! Concentrations are computed in the wind frame of the source with ground
//! reflection and no plume rise (effective height equals release height).
//! Dispersion uses the Briggs open-country parameterisation:
//!
//! | class | σ_y(x)                        | σ_z(x)                         |
//! |-------|-------------------------------|--------------------------------|
//! | A     | 0.22x(1+0.0001x)^-1/2         | 0.20x                          |
//! | B     | 0.16x(1+0.0001x)^-1/2         | 0.12x                          |
//! | C     | 0.11x(1+0.0001x)^-1/2         | 0.08x(1+0.0002x)^-1/2          |
//! | D     | 0.08x(1+0.0001x)^-1/2         | 0.06x(1+0.0015x)^-1/2          |
//! | E     | 0.06x(1+0.0001x)^-1/2         | 0.03x(1+0.0003x)^-1            |
//! | F     | 0.04x(1+0.0001x)^-1/2         | 0.016x(1+0.0003x)^-1           |

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Molar volume of an ideal gas at 25 °C and 1 atm, L/mol.
pub const MOLAR_VOLUME_L: f64 = 24.45;
/// Molar mass of methane, g/mol.
pub const METHANE_MOLAR_MASS: f64 = 16.04;
/// Records below this wind speed are treated as calm and never evaluated.
pub const CALM_WIND: f64 = 0.1;

/// Pasquill stability class, A (very unstable) to F (very stable).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StabilityClass {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl StabilityClass {
    pub const ALL: [StabilityClass; 6] = [
        StabilityClass::A,
        StabilityClass::B,
        StabilityClass::C,
        StabilityClass::D,
        StabilityClass::E,
        StabilityClass::F,
    ];

    /// 1-based index (A = 1).
    pub fn index(self) -> u8 {
        self as u8 + 1
    }

    pub fn letter(self) -> char {
        (b'A' + self as u8) as char
    }
}

impl std::fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl std::str::FromStr for StabilityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Self::A),
            "B" | "b" => Ok(Self::B),
            "C" | "c" => Ok(Self::C),
            "D" | "d" => Ok(Self::D),
            "E" | "e" => Ok(Self::E),
            "F" | "f" => Ok(Self::F),
            other => Err(Error::Parse(format!("unknown stability class {other:?}"))),
        }
    }
}

/// One weather observation. `w_dir` is the direction the wind blows
/// toward, in degrees counter-clockwise from east.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherSample {
    pub t: f64,
    pub w_dir: f64,
    pub w_spd: f64,
    pub solar: f64,
    pub stab: StabilityClass,
}

impl WeatherSample {
    /// Builds a sample and classifies stability from speed and insolation.
    pub fn new(t: f64, w_dir: f64, w_spd: f64, solar: f64) -> Self {
        Self { t, w_dir: w_dir.rem_euclid(360.0), w_spd, solar, stab: classify_stability(w_spd, solar) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlumeSource {
    pub x: f64,
    pub y: f64,
    /// Release height, meters.
    pub z: f64,
    /// Emission rate, kg/h.
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Receptor {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Pasquill class from wind speed and incoming solar radiation.
///
/// Daytime columns are strong (> 700 W/m²), moderate (350–700) and slight
/// (50–350); weak daytime insolation (10–50) counts as overcast and maps to
/// D. Below 10 W/m² the clear-night column applies. Split cells of the
/// classic table (A–B, B–C, C–D) take the more unstable class. Winds of
/// 12 m/s or more are outside the table and are neutral.
pub fn classify_stability(w_spd: f64, solar: f64) -> StabilityClass {
    use StabilityClass::*;
    if w_spd >= 12.0 {
        return D;
    }
    let band = if w_spd < 2.0 {
        0
    } else if w_spd < 3.0 {
        1
    } else if w_spd < 5.0 {
        2
    } else if w_spd < 6.0 {
        3
    } else {
        4
    };
    const STRONG: [StabilityClass; 5] = [A, A, B, C, C];
    const MODERATE: [StabilityClass; 5] = [A, B, B, C, D];
    const SLIGHT: [StabilityClass; 5] = [B, C, C, D, D];
    const NIGHT: [StabilityClass; 5] = [F, F, E, D, D];
    if solar < 10.0 {
        NIGHT[band]
    } else if solar < 50.0 {
        D
    } else if solar < 350.0 {
        SLIGHT[band]
    } else if solar <= 700.0 {
        MODERATE[band]
    } else {
        STRONG[band]
    }
}

/// Briggs rural `(σ_y, σ_z)` in meters at downwind distance `x` (> 0).
pub fn dispersion_coefficients(stab: StabilityClass, x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(Error::NotDownwind(x));
    }
    Ok(sigmas(stab, x))
}

#[inline]
fn sigmas(stab: StabilityClass, x: f64) -> (f64, f64) {
    use StabilityClass::*;
    let lateral = 1.0 / (1.0 + 0.0001 * x).sqrt();
    match stab {
        A => (0.22 * x * lateral, 0.20 * x),
        B => (0.16 * x * lateral, 0.12 * x),
        C => (0.11 * x * lateral, 0.08 * x / (1.0 + 0.0002 * x).sqrt()),
        D => (0.08 * x * lateral, 0.06 * x / (1.0 + 0.0015 * x).sqrt()),
        E => (0.06 * x * lateral, 0.03 * x / (1.0 + 0.0003 * x)),
        F => (0.04 * x * lateral, 0.016 * x / (1.0 + 0.0003 * x)),
    }
}

/// kg/h to g/s.
#[inline]
pub fn kg_per_h_to_g_per_s(rate: f64) -> f64 {
    rate * 1000.0 / 3600.0
}

/// Methane mass concentration (mg/m³) to volume mixing ratio (ppm).
#[inline]
pub fn mg_m3_to_ppm(c: f64) -> f64 {
    c * MOLAR_VOLUME_L / METHANE_MOLAR_MASS
}

/// Concentration in ppm at `receptor` due to `source` under `weather`.
///
/// Upwind receptors (non-positive downwind distance) see zero.
pub fn concentration(source: &PlumeSource, weather: &WeatherSample, receptor: &Receptor) -> Result<f64> {
    if !(weather.w_spd > 0.0) {
        return Err(Error::CalmWind(weather.w_spd));
    }
    let theta = weather.w_dir.to_radians();
    let (s, c) = theta.sin_cos();
    Ok(concentration_in_frame(source, weather.stab, weather.w_spd, c, s, receptor))
}

/// Core evaluation with the wind unit vector `(cos, sin)` precomputed.
/// Callers guarantee `w_spd > 0`.
#[inline]
pub(crate) fn concentration_in_frame(
    source: &PlumeSource,
    stab: StabilityClass,
    w_spd: f64,
    cos_dir: f64,
    sin_dir: f64,
    receptor: &Receptor,
) -> f64 {
    let dx = receptor.x - source.x;
    let dy = receptor.y - source.y;
    let downwind = dx * cos_dir + dy * sin_dir;
    if downwind <= 0.0 {
        return 0.0;
    }
    let crosswind = -dx * sin_dir + dy * cos_dir;
    let (sy, sz) = sigmas(stab, downwind);
    let q = kg_per_h_to_g_per_s(source.rate);
    let h = source.z;
    let z = receptor.z;
    let lateral = (-crosswind * crosswind / (2.0 * sy * sy)).exp();
    let vertical = (-(z - h) * (z - h) / (2.0 * sz * sz)).exp() + (-(z + h) * (z + h) / (2.0 * sz * sz)).exp();
    let g_m3 = q / (2.0 * PI * w_spd * sy * sz) * lateral * vertical;
    let ppm = mg_m3_to_ppm(g_m3 * 1000.0);
    if ppm.is_finite() {
        ppm
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn weather(dir: f64, spd: f64, stab: StabilityClass) -> WeatherSample {
        WeatherSample { t: 0.0, w_dir: dir, w_spd: spd, solar: 0.0, stab }
    }

    #[test]
    fn stability_table_cells() {
        assert_eq!(classify_stability(1.5, 800.0), StabilityClass::A);
        assert_eq!(classify_stability(5.5, 150.0), StabilityClass::D);
        for solar in [0.0, 30.0, 200.0, 500.0, 1000.0] {
            assert_eq!(classify_stability(20.0, solar), StabilityClass::D);
        }
        assert_eq!(classify_stability(1.0, 0.0), StabilityClass::F);
        assert_eq!(classify_stability(4.0, 0.0), StabilityClass::E);
        assert_eq!(classify_stability(7.0, 800.0), StabilityClass::C);
        assert_eq!(classify_stability(4.0, 500.0), StabilityClass::B);
    }

    #[test]
    fn class_d_sigmas_at_100m() {
        let (sy, sz) = dispersion_coefficients(StabilityClass::D, 100.0).unwrap();
        assert!((sy - 0.08 * 100.0 * (1.0f64 + 0.0001 * 100.0).powf(-0.5)).abs() < 1e-12);
        assert!((sz - 0.06 * 100.0 * (1.0f64 + 0.0015 * 100.0).powf(-0.5)).abs() < 1e-12);
        // frozen regression values
        assert!((sy - 7.960_297_521_679_913).abs() < 1e-12);
        assert!((sz - 5.595_028_849_441_883).abs() < 1e-12);
    }

    #[test]
    fn sigmas_reject_non_downwind() {
        assert!(matches!(dispersion_coefficients(StabilityClass::A, 0.0), Err(Error::NotDownwind(_))));
        assert!(dispersion_coefficients(StabilityClass::A, -3.0).is_err());
    }

    #[test]
    fn sigmas_vanish_near_source() {
        for s in StabilityClass::ALL {
            let (sy, sz) = dispersion_coefficients(s, 1e-9).unwrap();
            assert!(sy > 0.0 && sy < 1e-9 && sz > 0.0 && sz < 1e-9);
        }
    }

    #[test]
    fn unstable_spreads_more_than_stable() {
        for i in 1..=200 {
            let x = i as f64 * 10.0;
            let (ya, za) = dispersion_coefficients(StabilityClass::A, x).unwrap();
            let (yf, zf) = dispersion_coefficients(StabilityClass::F, x).unwrap();
            assert!(ya > yf && za > zf);
        }
    }

    #[test]
    fn sigmas_nondecreasing() {
        for s in StabilityClass::ALL {
            let mut prev = (0.0, 0.0);
            for i in 1..2000 {
                let (y, z) = dispersion_coefficients(s, i as f64).unwrap();
                assert!(y >= prev.0 && z >= prev.1);
                prev = (y, z);
            }
        }
    }

    #[test]
    fn upwind_receptor_sees_nothing() {
        let src = PlumeSource { x: 0.0, y: 0.0, z: 2.0, rate: 5.0 };
        let w = weather(0.0, 3.0, StabilityClass::D);
        let r = Receptor { x: -50.0, y: 3.0, z: 2.0 };
        assert_eq!(concentration(&src, &w, &r).unwrap(), 0.0);
    }

    #[test]
    fn calm_wind_rejected() {
        let src = PlumeSource { x: 0.0, y: 0.0, z: 2.0, rate: 5.0 };
        let r = Receptor { x: 50.0, y: 0.0, z: 2.0 };
        assert!(matches!(concentration(&src, &weather(0.0, 0.0, StabilityClass::D), &r), Err(Error::CalmWind(_))));
    }

    #[test]
    fn reference_case_about_4_5_ppm() {
        let src = PlumeSource { x: 0.0, y: 0.0, z: 2.0, rate: 5.0 };
        let r = Receptor { x: 100.0, y: 0.0, z: 2.0 };
        let c = concentration(&src, &weather(0.0, 3.0, StabilityClass::D), &r).unwrap();
        assert!((c - 4.474_884_738_599_687_5).abs() < 1e-9, "{c}");
    }

    #[test]
    fn ground_receptor_terms_coincide() {
        // At z = 0 the reflection bracket equals 2·exp(-H²/(2σ_z²)).
        let src = PlumeSource { x: 0.0, y: 0.0, z: 3.0, rate: 2.0 };
        let r = Receptor { x: 80.0, y: 4.0, z: 0.0 };
        let c = concentration(&src, &weather(0.0, 2.5, StabilityClass::C), &r).unwrap();
        let (sy, sz) = dispersion_coefficients(StabilityClass::C, 80.0).unwrap();
        let q = 2.0 * 1000.0 / 3600.0;
        let expect = q / (2.0 * PI * 2.5 * sy * sz)
            * (-16.0 / (2.0 * sy * sy)).exp()
            * 2.0
            * (-9.0 / (2.0 * sz * sz)).exp()
            * 1000.0
            * 24.45
            / 16.04;
        assert!((c - expect).abs() <= 1e-12 * expect);
    }

    fn arb_stab() -> impl Strategy<Value = StabilityClass> {
        prop::sample::select(StabilityClass::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn linear_in_rate(
            sx in -50.0f64..50.0, sy in -50.0f64..50.0, h in 0.0f64..6.0,
            rx in -200.0f64..200.0, ry in -200.0f64..200.0, rz in 0.0f64..5.0,
            dir in 0.0f64..360.0, spd in 0.1f64..12.0, q in 0.1f64..50.0, stab in arb_stab(),
        ) {
            let w = weather(dir, spd, stab);
            let r = Receptor { x: rx, y: ry, z: rz };
            let a = concentration(&PlumeSource { x: sx, y: sy, z: h, rate: q }, &w, &r).unwrap();
            let b = concentration(&PlumeSource { x: sx, y: sy, z: h, rate: 2.0 * q }, &w, &r).unwrap();
            prop_assert!((b - 2.0 * a).abs() <= 1e-12 * b.abs().max(1e-300));
            prop_assert!(a.is_finite() && a >= 0.0);
        }

        #[test]
        fn inverse_in_wind_speed(
            rx in 1.0f64..300.0, ry in -40.0f64..40.0, spd in 0.1f64..6.0, stab in arb_stab(),
        ) {
            let src = PlumeSource { x: 0.0, y: 0.0, z: 2.0, rate: 5.0 };
            let r = Receptor { x: rx, y: ry, z: 1.8 };
            let a = concentration(&src, &weather(0.0, spd, stab), &r).unwrap();
            let b = concentration(&src, &weather(0.0, 2.0 * spd, stab), &r).unwrap();
            prop_assert!((a - 2.0 * b).abs() <= 1e-12 * a.max(1e-300));
        }

        #[test]
        fn even_in_crosswind(
            rx in 1.0f64..300.0, ry in 0.0f64..60.0, rz in 0.0f64..5.0, stab in arb_stab(),
        ) {
            let src = PlumeSource { x: 0.0, y: 0.0, z: 2.0, rate: 5.0 };
            let w = weather(0.0, 3.0, stab);
            let a = concentration(&src, &w, &Receptor { x: rx, y: ry, z: rz }).unwrap();
            let b = concentration(&src, &w, &Receptor { x: rx, y: -ry, z: rz }).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn rotation_invariant(
            rx in 5.0f64..300.0, ry in -60.0f64..60.0, angle in 0.0f64..360.0, stab in arb_stab(),
        ) {
            let src = PlumeSource { x: 0.0, y: 0.0, z: 2.0, rate: 5.0 };
            let r = Receptor { x: rx, y: ry, z: 1.0 };
            let a = concentration(&src, &weather(0.0, 3.0, stab), &r).unwrap();
            let (s, c) = angle.to_radians().sin_cos();
            let rr = Receptor { x: rx * c - ry * s, y: rx * s + ry * c, z: 1.0 };
            let b = concentration(&src, &weather(angle, 3.0, stab), &rr).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-300,
                "{} vs {}", a, b);
        }
    }
}
