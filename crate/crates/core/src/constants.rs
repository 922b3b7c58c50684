//! Physical constants, the Rb D2 hyperfine catalog and frequency conventions.
//!
//! Internally every frequency is an angular frequency in rad/s. Files and the
//! command line use linear-frequency offsets in Hz from the reference
//! transition ⁸⁷Rb F=2 → F'=2 (`ω_ref`).

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Result};

/// CODATA 2018 values in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant (J·s).
    pub hbar: f64,
    /// Vacuum permittivity (F/m).
    pub epsilon0: f64,
    /// Boltzmann constant (J/K).
    pub k_boltzmann: f64,
    /// Speed of light (m/s).
    pub speed_of_light: f64,
    /// Bohr radius (m).
    pub bohr_radius: f64,
    /// Elementary charge (C).
    pub elementary_charge: f64,
}

pub const PHYSICAL: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    epsilon0: 8.854_187_812_8e-12,
    k_boltzmann: 1.380_649e-23,
    speed_of_light: 299_792_458.0,
    bohr_radius: 5.291_772_109_03e-11,
    elementary_charge: 1.602_176_634e-19,
};

/// Reference transition frequency ω_ref / 2π in Hz (exact as tabulated).
pub const REFERENCE_FREQUENCY_HZ: f64 = 384_227_848_551_000.0;

/// Natural linewidth of the 5P₃/₂ state, Γ_nat / 2π in Hz.
pub const NATURAL_LINEWIDTH_HZ: f64 = 6.065e6;

/// Reduced D2 dipole matrix element in units of e·a₀.
pub const DIPOLE_ELEMENT_EA0: f64 = 5.177;

/// Melting point of rubidium (K).
pub const RB_MELTING_POINT_K: f64 = 312.46;

/// Converts a linear frequency in GHz to an angular frequency in rad/s.
pub fn ghz_to_rad(ghz: f64) -> f64 {
    2.0 * PI * ghz * 1e9
}

pub fn rad_to_ghz(rad: f64) -> f64 {
    rad / (2.0 * PI * 1e9)
}

pub fn hz_to_rad(hz: f64) -> f64 {
    2.0 * PI * hz
}

pub fn rad_to_hz(rad: f64) -> f64 {
    rad / (2.0 * PI)
}

pub fn celsius_to_kelvin(c: f64) -> f64 {
    c + 273.15
}

pub fn kelvin_to_celsius(k: f64) -> f64 {
    k - 273.15
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Isotope {
    Rb85,
    Rb87,
}

impl Isotope {
    pub const ALL: [Isotope; 2] = [Isotope::Rb85, Isotope::Rb87];

    pub fn from_label(label: u32) -> Result<Self> {
        match label {
            85 => Ok(Isotope::Rb85),
            87 => Ok(Isotope::Rb87),
            other => Err(invalid(format!("unknown isotope label {other} (expected 85 or 87)"))),
        }
    }

    pub fn label(self) -> u32 {
        match self {
            Isotope::Rb85 => 85,
            Isotope::Rb87 => 87,
        }
    }

    pub fn data(self) -> &'static IsotopeData {
        match self {
            Isotope::Rb85 => &RB85,
            Isotope::Rb87 => &RB87,
        }
    }

    /// The six hyperfine lines of this isotope, ordered by frequency.
    pub fn lines(self) -> &'static [HyperfineLine] {
        match self {
            Isotope::Rb87 => &CATALOG[0..6],
            Isotope::Rb85 => &CATALOG[6..12],
        }
    }
}

impl fmt::Display for Isotope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Rb", self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotopeData {
    pub isotope: Isotope,
    /// Nuclear spin as twice its value (5 for I = 5/2), kept integral.
    pub twice_nuclear_spin: u32,
    /// Atomic mass (kg).
    pub mass: f64,
    /// Natural abundance (fraction).
    pub abundance: f64,
}

impl IsotopeData {
    pub fn nuclear_spin(&self) -> f64 {
        f64::from(self.twice_nuclear_spin) / 2.0
    }

    /// Number of ground-state Zeeman sublevels, 2(2I+1).
    pub fn sublevel_count(&self) -> u32 {
        2 * (self.twice_nuclear_spin + 1)
    }

    /// Natural linewidth Γ_nat (rad/s).
    pub fn natural_linewidth(&self) -> f64 {
        hz_to_rad(NATURAL_LINEWIDTH_HZ)
    }

    /// Reduced dipole matrix element d (C·m).
    pub fn dipole_element(&self) -> f64 {
        DIPOLE_ELEMENT_EA0 * PHYSICAL.elementary_charge * PHYSICAL.bohr_radius
    }
}

pub const RB85: IsotopeData = IsotopeData {
    isotope: Isotope::Rb85,
    twice_nuclear_spin: 5,
    mass: 1.409_993e-25,
    abundance: 0.7217,
};

pub const RB87: IsotopeData = IsotopeData {
    isotope: Isotope::Rb87,
    twice_nuclear_spin: 3,
    mass: 1.443_160e-25,
    abundance: 0.2783,
};

/// An exact non-negative rational number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub const fn new_raw(num: u64, den: u64) -> Self {
        Ratio { num, den }
    }

    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num, den);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::ops::Add for Ratio {
    type Output = Ratio;

    fn add(self, rhs: Ratio) -> Ratio {
        let l = self.den / gcd(self.den, rhs.den) * rhs.den;
        Ratio::new(self.num * (l / self.den) + rhs.num * (l / rhs.den), l)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// One degenerate hyperfine transition of the D2 line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperfineLine {
    pub isotope: Isotope,
    /// Transition index j, 1..=6.
    pub index: u8,
    /// (ω_j − ω_ref)/2π in Hz.
    pub detuning_hz: f64,
    /// Strength factor C_j² for linear polarisation.
    pub strength: Ratio,
}

impl HyperfineLine {
    /// Angular offset ω_j − ω_ref (rad/s).
    pub fn angular_offset(&self) -> f64 {
        hz_to_rad(self.detuning_hz)
    }
}

const fn line(isotope: Isotope, index: u8, detuning_mhz: f64, num: u64, den: u64) -> HyperfineLine {
    HyperfineLine {
        isotope,
        index,
        detuning_hz: detuning_mhz * 1e6,
        strength: Ratio::new_raw(num, den),
    }
}

/// The twelve D2 hyperfine transitions: ⁸⁷Rb j=1..6 followed by ⁸⁵Rb j=1..6.
pub static CATALOG: [HyperfineLine; 12] = [
    line(Isotope::Rb87, 1, -156.941, 1, 18),
    line(Isotope::Rb87, 2, 0.0, 5, 18),
    line(Isotope::Rb87, 3, 266.652, 7, 9),
    line(Isotope::Rb87, 4, 6605.520, 1, 9),
    line(Isotope::Rb87, 5, 6677.742, 5, 18),
    line(Isotope::Rb87, 6, 6834.683, 5, 18),
    line(Isotope::Rb85, 1, 1207.094, 10, 81),
    line(Isotope::Rb85, 2, 1270.494, 35, 81),
    line(Isotope::Rb85, 3, 1391.134, 1, 1),
    line(Isotope::Rb85, 4, 4213.453, 1, 3),
    line(Isotope::Rb85, 5, 4242.826, 35, 81),
    line(Isotope::Rb85, 6, 4306.226, 28, 81),
];

/// Looks up transition `index` (1..=6) of the isotope with mass label 85 or 87.
pub fn lookup_line(isotope_label: u32, index: u32) -> Result<HyperfineLine> {
    let isotope = Isotope::from_label(isotope_label)?;
    if !(1..=6).contains(&index) {
        return Err(invalid(format!("transition index {index} out of range 1..=6")));
    }
    Ok(isotope.lines()[(index - 1) as usize])
}

/// Σ_j C_j² for one isotope, exact.
pub fn total_strength(isotope: Isotope) -> Ratio {
    isotope
        .lines()
        .iter()
        .fold(Ratio::new(0, 1), |acc, l| acc + l.strength)
}

/// Row of the exported catalog document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub isotope: u32,
    pub j: u8,
    pub detuning_hz: f64,
    pub strength_num: u64,
    pub strength_den: u64,
}

pub fn catalog_entries() -> Vec<CatalogEntry> {
    CATALOG
        .iter()
        .map(|l| CatalogEntry {
            isotope: l.isotope.label(),
            j: l.index,
            detuning_hz: l.detuning_hz,
            strength_num: l.strength.num,
            strength_den: l.strength.den,
        })
        .collect()
}

pub fn catalog_json() -> String {
    serde_json::to_string_pretty(&catalog_entries()).expect("catalog serialises")
}

/// How frequencies are represented at the I/O boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum IoRepresentation {
    /// Linear-frequency offset from ω_ref in Hz.
    #[default]
    OffsetHz,
}

/// An absolute angular frequency held as an unevaluated sum `hi + lo`
/// (double-double), so offsets of a few µHz survive next to ω_ref ≈ 2.4e15 rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsoluteFrequency {
    hi: f64,
    lo: f64,
}

impl AbsoluteFrequency {
    /// Nearest f64 value in rad/s.
    pub fn rad_per_s(self) -> f64 {
        self.hi + self.lo
    }

    pub fn from_rad_per_s(value: f64) -> Self {
        AbsoluteFrequency { hi: value, lo: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyConvention {
    pub reference_hz: f64,
    pub io: IoRepresentation,
}

impl Default for FrequencyConvention {
    fn default() -> Self {
        FrequencyConvention {
            reference_hz: REFERENCE_FREQUENCY_HZ,
            io: IoRepresentation::OffsetHz,
        }
    }
}

// 2π split into a double-double.
const TWO_PI_HI: f64 = std::f64::consts::TAU;
const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

fn dd_mul_f64(hi: f64, lo: f64, b: f64) -> (f64, f64) {
    let (p, e) = two_prod(hi, b);
    let e = e + lo * b;
    two_sum(p, e)
}

fn dd_add(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (s, e) = two_sum(a.0, b.0);
    let e = e + a.1 + b.1;
    two_sum(s, e)
}

impl FrequencyConvention {
    /// ω_ref in rad/s.
    pub fn omega_ref(&self) -> AbsoluteFrequency {
        let (hi, lo) = dd_mul_f64(TWO_PI_HI, TWO_PI_LO, self.reference_hz);
        AbsoluteFrequency { hi, lo }
    }

    /// Offset in Hz → absolute angular frequency ω_ref + 2π·offset.
    pub fn to_absolute(&self, offset_hz: f64) -> Result<AbsoluteFrequency> {
        ensure_finite("frequency offset", offset_hz)?;
        let r = self.omega_ref();
        let d = dd_mul_f64(TWO_PI_HI, TWO_PI_LO, offset_hz);
        let (hi, lo) = dd_add((r.hi, r.lo), d);
        Ok(AbsoluteFrequency { hi, lo })
    }

    /// Absolute angular frequency → offset from ω_ref in Hz.
    pub fn to_offset(&self, omega: AbsoluteFrequency) -> Result<f64> {
        ensure_finite("angular frequency", omega.hi)?;
        ensure_finite("angular frequency", omega.lo)?;
        let r = self.omega_ref();
        let (dh, dl) = dd_add((omega.hi, omega.lo), (-r.hi, -r.lo));
        // divide the double-double difference by 2π
        let q = dh / TWO_PI_HI;
        let (p, e) = dd_mul_f64(TWO_PI_HI, TWO_PI_LO, q);
        let rem = ((dh - p) - e) + dl;
        Ok(q + rem / TWO_PI_HI)
    }
}
