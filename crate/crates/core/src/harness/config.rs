//! Flat `key = value` scenario files.
//!
//! Blank lines are ignored and `#` starts a comment. Every key is optional;
//! missing keys keep their defaults. [`ScenarioConfig::to_config_string`]
//! writes every key, and parsing that output gives back an equal config.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::channel::{
    LinkGeometry, Modulation, TerrainCategory, ANTENNA_HEIGHT_RANGE, DEFAULT_ANTENNA_HEIGHT,
    DEFAULT_CARRIER_HZ, DEFAULT_REFERENCE_DISTANCE, SPEED_OF_LIGHT,
};
use crate::feedback::DEFAULT_FLIP_FRACTION;
use crate::learn::Family;
use crate::protocol::{
    FeedbackPolicy, LossScript, Scheme, DEFAULT_MAX_TRANSMISSIONS, DEFAULT_PACKETS,
    DEFAULT_PAYLOAD_BYTES,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value', got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key '{key}' given twice")]
    Duplicate { line: usize, key: String },
    #[error("invalid value for '{field}': {message}")]
    Field { field: &'static str, message: String },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn field_err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Physical,
    Abstract,
}

impl ChannelKind {
    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Physical => "physical",
            ChannelKind::Abstract => "abstract",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Distance,
    TxPower,
    ForwardErrorProb,
    Terrain,
    TrainingSize,
    ModelFamily,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 6] = [
        SweepAxis::Distance,
        SweepAxis::TxPower,
        SweepAxis::ForwardErrorProb,
        SweepAxis::Terrain,
        SweepAxis::TrainingSize,
        SweepAxis::ModelFamily,
    ];

    /// Also the config key this axis overrides.
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Distance => "distance",
            SweepAxis::TxPower => "tx_power_dbm",
            SweepAxis::ForwardErrorProb => "forward_p",
            SweepAxis::Terrain => "terrain",
            SweepAxis::TrainingSize => "train_size",
            SweepAxis::ModelFamily => "family",
        }
    }

    fn is_numeric(self) -> bool {
        !matches!(self, SweepAxis::Terrain | SweepAxis::ModelFamily)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let alias = match s.as_str() {
            "tx_power" | "power" => "tx_power_dbm",
            "forward_error_prob" | "p" => "forward_p",
            "training_size" => "train_size",
            "model_family" | "families" => "family",
            other => other,
        };
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == alias)
            .ok_or_else(|| format!("unknown sweep axis {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepValue {
    Number(f64),
    Terrain(TerrainCategory),
    Family(Family),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Number(v) => write!(f, "{v}"),
            SweepValue::Terrain(t) => write!(f, "{}", t.code()),
            SweepValue::Family(fam) => f.write_str(fam.name()),
        }
    }
}

impl SweepValue {
    fn parse(axis: SweepAxis, s: &str) -> Result<Self, String> {
        match axis {
            SweepAxis::Terrain => parse_terrain(s).map(SweepValue::Terrain),
            SweepAxis::ModelFamily => s.parse::<Family>().map(SweepValue::Family),
            _ => parse_f64(s).map(SweepValue::Number),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub terrain: TerrainCategory,
    /// One distance for every receiver, or one per receiver.
    pub distances: Vec<f64>,
    pub tx_power_dbm: f64,
    pub noise_floor_dbm: f64,
    pub modulation: Modulation,
    pub receivers: usize,
    pub packets: usize,
    pub payload_bytes: usize,
    pub feedback_bits: u32,
    pub channel: ChannelKind,
    pub forward_p: f64,
    pub reverse_p: f64,
    pub flip_fraction: f64,
    pub reference_distance_m: f64,
    pub carrier_hz: f64,
    pub antenna_height_m: f64,
    pub base_seed: u64,
    pub trials: usize,
    pub max_transmissions: u64,
    pub train_size: usize,
    pub train_fraction: f64,
    pub families: Vec<Family>,
    pub ml_policy: FeedbackPolicy,
    pub schemes: Vec<Scheme>,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_values: Vec<SweepValue>,
    pub loss_script: Option<LossScript>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            terrain: TerrainCategory::Terrain1,
            distances: vec![400.0],
            tx_power_dbm: 20.0,
            noise_floor_dbm: -100.0,
            modulation: Modulation::Bpsk,
            receivers: 2,
            packets: DEFAULT_PACKETS,
            payload_bytes: DEFAULT_PAYLOAD_BYTES,
            feedback_bits: 64,
            channel: ChannelKind::Physical,
            forward_p: 0.1,
            reverse_p: 0.1,
            flip_fraction: DEFAULT_FLIP_FRACTION,
            reference_distance_m: DEFAULT_REFERENCE_DISTANCE,
            carrier_hz: DEFAULT_CARRIER_HZ,
            antenna_height_m: DEFAULT_ANTENNA_HEIGHT,
            base_seed: 1,
            trials: 2000,
            max_transmissions: DEFAULT_MAX_TRANSMISSIONS,
            train_size: 5000,
            train_fraction: 0.8,
            families: Family::ALL.to_vec(),
            ml_policy: FeedbackPolicy::Predicted,
            schemes: Scheme::ALL.to_vec(),
            sweep_axis: None,
            sweep_values: Vec::new(),
            loss_script: None,
        }
    }
}

const KEYS: [&str; 27] = [
    "terrain",
    "distances",
    "tx_power_dbm",
    "noise_floor_dbm",
    "modulation",
    "receivers",
    "packets",
    "payload_bytes",
    "feedback_bits",
    "channel",
    "forward_p",
    "reverse_p",
    "flip_fraction",
    "reference_distance_m",
    "carrier_hz",
    "antenna_height_m",
    "base_seed",
    "trials",
    "max_transmissions",
    "train_size",
    "train_fraction",
    "families",
    "ml_policy",
    "schemes",
    "sweep_axis",
    "sweep_values",
    "loss_script",
];

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

fn parse_int<T: FromStr>(s: &str) -> Result<T, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("{s:?} is not a non-negative integer"))
}

fn parse_terrain(s: &str) -> Result<TerrainCategory, String> {
    let s = s.trim().to_ascii_lowercase();
    let code = s
        .strip_prefix("terrain")
        .or_else(|| s.strip_prefix('t'))
        .unwrap_or(&s);
    code.parse::<u8>()
        .ok()
        .and_then(TerrainCategory::from_code)
        .ok_or_else(|| format!("unknown terrain {s:?} (expected 1, 2 or 3)"))
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(item)
        .collect()
}

fn parse_script(s: &str) -> Result<Option<LossScript>, String> {
    let rows = parse_list(s, |row| {
        row.chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(format!("script cell {other:?} is not 0 or 1")),
            })
            .collect::<Result<Vec<bool>, String>>()
    })?;
    Ok((!rows.is_empty()).then_some(LossScript { first: rows }))
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses and validates a config text.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        let mut deferred_values: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: raw.to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })?;
            if seen.contains(known) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            seen.push(known);
            if *known == "sweep_values" {
                // Parsed once the axis is known.
                deferred_values = Some(value.to_string());
                continue;
            }
            cfg.set(known, value)?;
        }
        if let Some(values) = deferred_values {
            cfg.set("sweep_values", &values)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &'static str, v: &str) -> Result<(), ConfigError> {
        let err = |m: String| field_err(key, m);
        match key {
            "terrain" => self.terrain = parse_terrain(v).map_err(err)?,
            "distances" => self.distances = parse_list(v, parse_f64).map_err(err)?,
            "tx_power_dbm" => self.tx_power_dbm = parse_f64(v).map_err(err)?,
            "noise_floor_dbm" => self.noise_floor_dbm = parse_f64(v).map_err(err)?,
            "modulation" => {
                self.modulation = Modulation::from_name(v.trim())
                    .ok_or_else(|| err(format!("unknown modulation {v:?} (expected bpsk, qpsk or qam16)")))?
            }
            "receivers" => self.receivers = parse_int(v).map_err(err)?,
            "packets" => self.packets = parse_int(v).map_err(err)?,
            "payload_bytes" => self.payload_bytes = parse_int(v).map_err(err)?,
            "feedback_bits" => self.feedback_bits = parse_int(v).map_err(err)?,
            "channel" => {
                self.channel = match v.trim().to_ascii_lowercase().as_str() {
                    "physical" => ChannelKind::Physical,
                    "abstract" => ChannelKind::Abstract,
                    other => return Err(err(format!("unknown channel {other:?} (expected physical or abstract)"))),
                }
            }
            "forward_p" => self.forward_p = parse_f64(v).map_err(err)?,
            "reverse_p" => self.reverse_p = parse_f64(v).map_err(err)?,
            "flip_fraction" => self.flip_fraction = parse_f64(v).map_err(err)?,
            "reference_distance_m" => self.reference_distance_m = parse_f64(v).map_err(err)?,
            "carrier_hz" => self.carrier_hz = parse_f64(v).map_err(err)?,
            "antenna_height_m" => self.antenna_height_m = parse_f64(v).map_err(err)?,
            "base_seed" => self.base_seed = parse_int(v).map_err(err)?,
            "trials" => self.trials = parse_int(v).map_err(err)?,
            "max_transmissions" => self.max_transmissions = parse_int(v).map_err(err)?,
            "train_size" => self.train_size = parse_int(v).map_err(err)?,
            "train_fraction" => self.train_fraction = parse_f64(v).map_err(err)?,
            "families" => self.families = parse_list(v, |s| s.parse::<Family>()).map_err(err)?,
            "ml_policy" => self.ml_policy = v.parse().map_err(err)?,
            "schemes" => {
                self.schemes = parse_list(v, |s| s.parse::<Scheme>().map_err(|e| e.to_string())).map_err(err)?
            }
            "sweep_axis" => {
                self.sweep_axis = match v.trim() {
                    "" | "none" => None,
                    s => Some(s.parse().map_err(err)?),
                }
            }
            "sweep_values" => {
                self.sweep_values = match self.sweep_axis {
                    None if v.trim().is_empty() => Vec::new(),
                    None => return Err(err("values given without a sweep_axis".into())),
                    Some(axis) => parse_list(v, |s| SweepValue::parse(axis, s)).map_err(err)?,
                }
            }
            "loss_script" => self.loss_script = parse_script(v).map_err(err)?,
            _ => unreachable!("key list and setter disagree on {key}"),
        }
        Ok(())
    }

    /// Checks every cross-field invariant; the error names the first bad field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.receivers == 0 {
            return Err(field_err("receivers", "need at least one receiver"));
        }
        if self.packets == 0 {
            return Err(field_err("packets", "need at least one packet"));
        }
        if self.payload_bytes == 0 {
            return Err(field_err("payload_bytes", "must be positive"));
        }
        if u32::try_from(self.payload_bytes * 8).is_err() {
            return Err(field_err("payload_bytes", "too large"));
        }
        if self.feedback_bits == 0 {
            return Err(field_err("feedback_bits", "must be positive"));
        }
        if self.distances.is_empty() {
            return Err(field_err("distances", "need at least one distance"));
        }
        if self.distances.len() != 1 && self.distances.len() != self.receivers {
            return Err(field_err(
                "distances",
                format!(
                    "{} values for {} receivers (give one, or one per receiver)",
                    self.distances.len(),
                    self.receivers
                ),
            ));
        }
        if !(self.reference_distance_m > 0.0) {
            return Err(field_err("reference_distance_m", "must be positive"));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(field_err("carrier_hz", "must be positive"));
        }
        let (lo, hi) = ANTENNA_HEIGHT_RANGE;
        if !(lo..=hi).contains(&self.antenna_height_m) {
            return Err(field_err("antenna_height_m", format!("must lie in [{lo}, {hi}] m")));
        }
        for &d in &self.distances {
            if d < self.reference_distance_m {
                return Err(field_err(
                    "distances",
                    format!("{d} m is below the reference distance {} m", self.reference_distance_m),
                ));
            }
        }
        for (name, p) in [("forward_p", self.forward_p), ("reverse_p", self.reverse_p)] {
            if !(0.0..1.0).contains(&p) {
                return Err(field_err(name, format!("{p} outside [0, 1)")));
            }
        }
        if !(0.0..=1.0).contains(&self.flip_fraction) {
            return Err(field_err("flip_fraction", format!("{} outside [0, 1]", self.flip_fraction)));
        }
        if self.trials == 0 {
            return Err(field_err("trials", "need at least one trial"));
        }
        if self.max_transmissions < self.packets as u64 {
            return Err(field_err("max_transmissions", "smaller than the packet count"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(field_err("train_fraction", format!("{} outside (0, 1)", self.train_fraction)));
        }
        if self.families.is_empty() {
            return Err(field_err("families", "need at least one model family"));
        }
        if let Some(script) = &self.loss_script {
            if script.first.iter().any(|row| row.len() != self.receivers) {
                return Err(field_err("loss_script", "every row needs one cell per receiver"));
            }
        }
        match self.sweep_axis {
            None if !self.sweep_values.is_empty() => {
                return Err(field_err("sweep_values", "values given without a sweep_axis"));
            }
            Some(_) if self.sweep_values.is_empty() => {
                return Err(field_err("sweep_values", "sweep axis needs at least one value"));
            }
            Some(axis) => self.validate_sweep(axis)?,
            None => {}
        }
        Ok(())
    }

    fn validate_sweep(&self, axis: SweepAxis) -> Result<(), ConfigError> {
        let numbers: Vec<f64> = self
            .sweep_values
            .iter()
            .filter_map(|v| match v {
                SweepValue::Number(x) => Some(*x),
                _ => None,
            })
            .collect();
        if axis.is_numeric() {
            let up = numbers.windows(2).all(|w| w[0] < w[1]);
            let down = numbers.windows(2).all(|w| w[0] > w[1]);
            if !(up || down) {
                return Err(field_err("sweep_values", "numeric sweep values must be strictly ordered"));
            }
        } else {
            for (i, v) in self.sweep_values.iter().enumerate() {
                if self.sweep_values[..i].contains(v) {
                    return Err(field_err("sweep_values", format!("{v} listed twice")));
                }
            }
        }
        for &x in &numbers {
            let probe = self.at(axis, &SweepValue::Number(x));
            probe.validate().map_err(|e| match e {
                ConfigError::Field { message, .. } => field_err("sweep_values", format!("{axis}={x}: {message}")),
                other => other,
            })?;
        }
        if axis == SweepAxis::TrainingSize && numbers.iter().any(|&x| x < 2.0 || x.fract() != 0.0) {
            return Err(field_err("sweep_values", "training sizes must be integers of at least 2"));
        }
        if axis == SweepAxis::ForwardErrorProb && self.channel != ChannelKind::Abstract {
            return Err(field_err("sweep_axis", "forward_p sweeps need channel = abstract"));
        }
        Ok(())
    }

    /// This config with one sweep value applied; the sweep itself is cleared.
    pub fn at(&self, axis: SweepAxis, value: &SweepValue) -> ScenarioConfig {
        let mut cfg = self.clone();
        cfg.sweep_axis = None;
        cfg.sweep_values.clear();
        match (axis, *value) {
            (SweepAxis::Distance, SweepValue::Number(d)) => cfg.distances = vec![d],
            (SweepAxis::TxPower, SweepValue::Number(p)) => cfg.tx_power_dbm = p,
            (SweepAxis::ForwardErrorProb, SweepValue::Number(p)) => cfg.forward_p = p,
            (SweepAxis::TrainingSize, SweepValue::Number(n)) => cfg.train_size = n as usize,
            (SweepAxis::Terrain, SweepValue::Terrain(t)) => cfg.terrain = t,
            (SweepAxis::ModelFamily, SweepValue::Family(f)) => cfg.families = vec![f],
            (axis, value) => unreachable!("value {value} parsed for the wrong axis {axis}"),
        }
        cfg
    }

    pub fn distance_of(&self, receiver: usize) -> f64 {
        if self.distances.len() == 1 {
            self.distances[0]
        } else {
            self.distances[receiver]
        }
    }

    pub fn geometry(&self, receiver: usize) -> Result<LinkGeometry, crate::channel::ChannelError> {
        LinkGeometry::new(
            self.distance_of(receiver),
            self.reference_distance_m,
            SPEED_OF_LIGHT / self.carrier_hz,
            self.antenna_height_m,
        )
    }

    /// Serializes every key in a fixed order.
    pub fn to_config_string(&self) -> String {
        let script = self
            .loss_script
            .as_ref()
            .map(|s| {
                s.first
                    .iter()
                    .map(|row| row.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .unwrap_or_default();
        let lines = [
            ("terrain", self.terrain.code().to_string()),
            ("distances", join(&self.distances)),
            ("tx_power_dbm", self.tx_power_dbm.to_string()),
            ("noise_floor_dbm", self.noise_floor_dbm.to_string()),
            ("modulation", self.modulation.name().to_string()),
            ("receivers", self.receivers.to_string()),
            ("packets", self.packets.to_string()),
            ("payload_bytes", self.payload_bytes.to_string()),
            ("feedback_bits", self.feedback_bits.to_string()),
            ("channel", self.channel.name().to_string()),
            ("forward_p", self.forward_p.to_string()),
            ("reverse_p", self.reverse_p.to_string()),
            ("flip_fraction", self.flip_fraction.to_string()),
            ("reference_distance_m", self.reference_distance_m.to_string()),
            ("carrier_hz", self.carrier_hz.to_string()),
            ("antenna_height_m", self.antenna_height_m.to_string()),
            ("base_seed", self.base_seed.to_string()),
            ("trials", self.trials.to_string()),
            ("max_transmissions", self.max_transmissions.to_string()),
            ("train_size", self.train_size.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
            ("families", join(&self.families)),
            ("ml_policy", self.ml_policy.to_string()),
            ("schemes", join(&self.schemes)),
            ("sweep_axis", self.sweep_axis.map_or("none".to_string(), |a| a.to_string())),
            ("sweep_values", join(&self.sweep_values)),
            ("loss_script", script),
        ];
        debug_assert_eq!(lines.len(), KEYS.len());
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
