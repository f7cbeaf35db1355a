//! Forward and reverse link models.
//!
//! Two channel modes are supported. [`ChannelMode::Physical`] evaluates the
//! Erceg suburban path-loss model with terrain-dependent constants, converts
//! the sampled loss into an SNR and then into a packet error probability for
//! the configured modulation. [`ChannelMode::Abstract`] is a bare Bernoulli
//! erasure channel with a fixed error probability.
//!
//! Every random operation takes an explicit RNG handle and consumes a fixed
//! sequence of draws, so trials replay bit-for-bit from a seed.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Default close-in reference distance, meters.
pub const DEFAULT_REFERENCE_DISTANCE: f64 = 100.0;
/// Default carrier frequency, Hz.
pub const DEFAULT_CARRIER_HZ: f64 = 1.9e9;
/// Default base-station antenna height, meters.
pub const DEFAULT_ANTENNA_HEIGHT: f64 = 30.0;

/// Validity range of the terrain model for the transmitter antenna height.
pub const ANTENNA_HEIGHT_RANGE: (f64, f64) = (10.0, 80.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("distance {distance} m is below the reference distance {reference} m")]
    BelowReference { distance: f64, reference: f64 },
    #[error("antenna height {0} m outside the valid range [10, 80] m")]
    AntennaHeight(f64),
    #[error("error probability {0} outside [0, 1)")]
    ErrorProbability(f64),
    #[error("payload must carry at least one bit")]
    EmptyPayload,
}

/// Terrain categories of the suburban path-loss model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TerrainCategory {
    /// Hilly, moderate-to-heavy tree density.
    Terrain1,
    /// Hilly with light trees, or flat with moderate-to-heavy trees.
    Terrain2,
    /// Flat, light tree density.
    Terrain3,
}

impl TerrainCategory {
    pub const ALL: [TerrainCategory; 3] = [Self::Terrain1, Self::Terrain2, Self::Terrain3];

    /// Small-integer code used in feature vectors and files (1, 2, 3).
    pub fn code(self) -> u8 {
        match self {
            Self::Terrain1 => 1,
            Self::Terrain2 => 2,
            Self::Terrain3 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Self::Terrain1),
            2 => Some(Self::Terrain2),
            3 => Some(Self::Terrain3),
            _ => None,
        }
    }
}

impl fmt::Display for TerrainCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// The six data-derived constants of one terrain category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerrainParams {
    pub a: f64,
    /// Per meter.
    pub b: f64,
    /// Meters.
    pub c: f64,
    pub sigma_gamma: f64,
    /// dB.
    pub mu_sigma: f64,
    /// dB.
    pub sigma_sigma: f64,
    pub category: TerrainCategory,
}

impl TerrainParams {
    pub fn new(
        category: TerrainCategory,
        a: f64,
        b: f64,
        c: f64,
        sigma_gamma: f64,
        mu_sigma: f64,
        sigma_sigma: f64,
    ) -> Result<Self, ChannelError> {
        for (name, value) in [
            ("a", a),
            ("b", b),
            ("c", c),
            ("sigma_gamma", sigma_gamma),
            ("mu_sigma", mu_sigma),
            ("sigma_sigma", sigma_sigma),
        ] {
            positive(name, value)?;
        }
        Ok(Self {
            a,
            b,
            c,
            sigma_gamma,
            mu_sigma,
            sigma_sigma,
            category,
        })
    }

    pub fn preset(category: TerrainCategory) -> Self {
        let (a, b, c, sigma_gamma, mu_sigma, sigma_sigma) = match category {
            TerrainCategory::Terrain1 => (4.6, 0.0075, 12.6, 0.57, 10.6, 2.3),
            TerrainCategory::Terrain2 => (4.0, 0.0065, 17.1, 0.75, 9.6, 3.0),
            TerrainCategory::Terrain3 => (3.6, 0.005, 20.0, 0.59, 8.2, 1.6),
        };
        Self {
            a,
            b,
            c,
            sigma_gamma,
            mu_sigma,
            sigma_sigma,
            category,
        }
    }

    /// Median path-loss exponent for a given antenna height.
    pub fn path_loss_exponent(&self, antenna_height: f64) -> f64 {
        self.a - self.b * antenna_height + self.c / antenna_height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// Transmitter to receiver distance, meters.
    pub distance: f64,
    /// Reference distance of the close-in free-space term, meters.
    pub reference_distance: f64,
    /// Carrier wavelength, meters.
    pub wavelength: f64,
    /// Transmitter antenna height, meters.
    pub antenna_height: f64,
}

impl LinkGeometry {
    pub fn new(
        distance: f64,
        reference_distance: f64,
        wavelength: f64,
        antenna_height: f64,
    ) -> Result<Self, ChannelError> {
        let geom = Self {
            distance,
            reference_distance,
            wavelength,
            antenna_height,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Geometry at `distance` with the default reference distance, carrier
    /// and antenna height.
    pub fn with_defaults(distance: f64) -> Result<Self, ChannelError> {
        Self::new(
            distance,
            DEFAULT_REFERENCE_DISTANCE,
            SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ,
            DEFAULT_ANTENNA_HEIGHT,
        )
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        positive("reference_distance", self.reference_distance)?;
        positive("wavelength", self.wavelength)?;
        positive("distance", self.distance)?;
        if self.distance < self.reference_distance {
            return Err(ChannelError::BelowReference {
                distance: self.distance,
                reference: self.reference_distance,
            });
        }
        let (lo, hi) = ANTENNA_HEIGHT_RANGE;
        if !(lo..=hi).contains(&self.antenna_height) {
            return Err(ChannelError::AntennaHeight(self.antenna_height));
        }
        Ok(())
    }

    fn log_distance_ratio(&self) -> f64 {
        (self.distance / self.reference_distance).log10()
    }
}

/// One realization of the three unit Gaussians driving the shadowing term.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShadowingDraw {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ShadowingDraw {
    pub const ZERO: ShadowingDraw = ShadowingDraw {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Draws `x`, `y`, `z` in that order from a standard normal.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let x = rng.sample(StandardNormal);
        let y = rng.sample(StandardNormal);
        let z = rng.sample(StandardNormal);
        Self { x, y, z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
}

impl Modulation {
    pub const ALL: [Modulation; 3] = [Self::Bpsk, Self::Qpsk, Self::Qam16];

    /// Small-integer code used in feature vectors and files (0, 1, 2).
    pub fn code(self) -> u8 {
        match self {
            Self::Bpsk => 0,
            Self::Qpsk => 1,
            Self::Qam16 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Bpsk => "bpsk",
            Self::Qpsk => "qpsk",
            Self::Qam16 => "qam16",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// dBm.
    pub tx_power: f64,
    /// dBm.
    pub noise_floor: f64,
    pub modulation: Modulation,
    pub payload_bits: u32,
}

impl LinkBudget {
    pub fn new(
        tx_power: f64,
        noise_floor: f64,
        modulation: Modulation,
        payload_bits: u32,
    ) -> Result<Self, ChannelError> {
        if payload_bits == 0 {
            return Err(ChannelError::EmptyPayload);
        }
        Ok(Self {
            tx_power,
            noise_floor,
            modulation,
            payload_bits,
        })
    }
}

/// A fully specified physical link: terrain, geometry and budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalLink {
    pub terrain: TerrainParams,
    pub geometry: LinkGeometry,
    pub budget: LinkBudget,
}

impl PhysicalLink {
    pub fn new(
        terrain: TerrainParams,
        geometry: LinkGeometry,
        budget: LinkBudget,
    ) -> Result<Self, ChannelError> {
        geometry.validate()?;
        if budget.payload_bits == 0 {
            return Err(ChannelError::EmptyPayload);
        }
        Ok(Self {
            terrain,
            geometry,
            budget,
        })
    }

    /// Sampled path loss in dB. Geometry was validated on construction.
    pub fn path_loss(&self, draw: &ShadowingDraw) -> f64 {
        sample_loss_unchecked(&self.geometry, &self.terrain, draw)
    }

    pub fn received_power(&self, draw: &ShadowingDraw) -> f64 {
        self.budget.tx_power - self.path_loss(draw)
    }

    pub fn snr(&self, draw: &ShadowingDraw) -> f64 {
        snr(&self.budget, self.path_loss(draw))
    }

    pub fn packet_error_prob(&self, draw: &ShadowingDraw) -> f64 {
        packet_error_prob(
            self.snr(draw),
            self.budget.modulation,
            self.budget.payload_bits,
        )
    }

    /// Same link carrying a payload of a different length.
    pub fn with_payload_bits(&self, payload_bits: u32) -> Result<Self, ChannelError> {
        let budget = LinkBudget::new(
            self.budget.tx_power,
            self.budget.noise_floor,
            self.budget.modulation,
            payload_bits,
        )?;
        Ok(Self { budget, ..*self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChannelMode {
    Physical(PhysicalLink),
    Abstract { error_prob: f64 },
}

impl ChannelMode {
    pub fn abstract_with(error_prob: f64) -> Result<Self, ChannelError> {
        if !(0.0..1.0).contains(&error_prob) {
            return Err(ChannelError::ErrorProbability(error_prob));
        }
        Ok(Self::Abstract { error_prob })
    }

    /// A channel that never loses a packet.
    pub fn perfect() -> Self {
        Self::Abstract { error_prob: 0.0 }
    }

    /// Packet error probability under the given shadowing realization. The
    /// draw is ignored in abstract mode.
    pub fn error_prob(&self, draw: &ShadowingDraw) -> f64 {
        match self {
            Self::Physical(link) => link.packet_error_prob(draw),
            Self::Abstract { error_prob } => *error_prob,
        }
    }
}

pub fn free_space_ref_loss(reference_distance: f64, wavelength: f64) -> Result<f64, ChannelError> {
    positive("reference_distance", reference_distance)?;
    positive("wavelength", wavelength)?;
    Ok(free_space_unchecked(reference_distance, wavelength))
}

/// Median (shadowing-free) path loss in dB.
pub fn median_path_loss(geom: &LinkGeometry, terrain: &TerrainParams) -> Result<f64, ChannelError> {
    geom.validate()?;
    Ok(median_loss_unchecked(geom, terrain))
}

/// Median path loss plus the zero-mean shadowing variation for one draw.
pub fn sample_path_loss(
    geom: &LinkGeometry,
    terrain: &TerrainParams,
    draw: &ShadowingDraw,
) -> Result<f64, ChannelError> {
    geom.validate()?;
    Ok(sample_loss_unchecked(geom, terrain, draw))
}

/// SNR in dB: received power `tx - path_loss` over the noise floor.
pub fn snr(budget: &LinkBudget, path_loss: f64) -> f64 {
    (budget.tx_power - path_loss) - budget.noise_floor
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Uncoded AWGN bit error probability. `snr_db` is the link SNR per symbol.
pub fn bit_error_prob(snr_db: f64, modulation: Modulation) -> f64 {
    let gamma = 10f64.powf(snr_db / 10.0);
    let ber = match modulation {
        Modulation::Bpsk => q_function((2.0 * gamma).sqrt()),
        // Gray-mapped QPSK: each bit sees half the symbol energy.
        Modulation::Qpsk => q_function(gamma.sqrt()),
        Modulation::Qam16 => 0.375 * libm::erfc((gamma / 10.0).sqrt()),
    };
    ber.clamp(0.0, 1.0)
}

/// Probability that at least one of `payload_bits` independent bits is in
/// error.
pub fn packet_error_prob(snr_db: f64, modulation: Modulation, payload_bits: u32) -> f64 {
    let ber = bit_error_prob(snr_db, modulation);
    if ber >= 1.0 {
        return 1.0;
    }
    let per = -(f64::from(payload_bits) * (-ber).ln_1p()).exp_m1();
    per.clamp(0.0, 1.0)
}

/// Bernoulli trial of a forward transmission.
///
/// Consumes three standard normals (the shadowing draw, used in both modes so
/// that the two modes stay draw-aligned) followed by one uniform.
pub fn forward_success<R: Rng + ?Sized>(mode: &ChannelMode, rng: &mut R) -> bool {
    let draw = ShadowingDraw::sample(rng);
    let u: f64 = rng.random();
    forward_success_with(mode, &draw, u)
}

/// Deterministic core of [`forward_success`]: succeeds iff `u < 1 - PER`.
pub fn forward_success_with(mode: &ChannelMode, draw: &ShadowingDraw, u: f64) -> bool {
    u < 1.0 - mode.error_prob(draw)
}

fn free_space_unchecked(reference_distance: f64, wavelength: f64) -> f64 {
    20.0 * (4.0 * PI * reference_distance / wavelength).log10()
}

fn median_loss_unchecked(geom: &LinkGeometry, terrain: &TerrainParams) -> f64 {
    free_space_unchecked(geom.reference_distance, geom.wavelength)
        + 10.0 * terrain.path_loss_exponent(geom.antenna_height) * geom.log_distance_ratio()
}

fn sample_loss_unchecked(geom: &LinkGeometry, terrain: &TerrainParams, draw: &ShadowingDraw) -> f64 {
    median_loss_unchecked(geom, terrain)
        + 10.0 * draw.x * terrain.sigma_gamma * geom.log_distance_ratio()
        + draw.y * terrain.mu_sigma
        + draw.y * draw.z * terrain.sigma_sigma
}

fn positive(name: &'static str, value: f64) -> Result<(), ChannelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ChannelError::NonPositive { name, value })
    }
}
