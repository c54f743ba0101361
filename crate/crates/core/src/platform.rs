//! Target platform description: off-chip memory channel classes, device
//! resource totals and the utilization limit used by the transforms.
//!
//! Platform files are TOML:
//!
//! ```toml
//! name = "xilinx_u280"
//! utilization_limit = 0.8      # optional, defaults to 0.8
//!
//! [memory.HBM]
//! count = 32
//! width_bits = 256
//! clock_mhz = 450
//! capacity_mb = 256
//!
//! [memory.DDR4]
//! count = 2
//! width_bits = 64
//! clock_mhz = 1200
//! capacity_mb = 16384
//! explicit_bandwidth_gbs = 38.0   # total over all channels of the class
//!
//! [resources]
//! ff = 2607360
//! lut = 1303680
//! bram = 2016
//! uram = 960
//! dsp = 9024
//! ```
//!
//! Bandwidths are decimal: 1 GB/s = 10^9 bytes/s.

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::resources::ResourceVector;

pub const DEFAULT_UTILIZATION_LIMIT: f64 = 0.80;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlatformError {
    #[error("platform file: {0}")]
    Parse(String),
    #[error("platform file: {0}")]
    Invalid(String),
    #[error("unknown memory class '{0}'")]
    UnknownClass(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryChannelClass {
    pub name: String,
    /// Number of independent (pseudo-)channels.
    pub count: u32,
    /// Data width of one channel in bits.
    pub width: u32,
    pub clock_mhz: f64,
    pub capacity_mb: u64,
    /// Total bandwidth of the class in GB/s, overriding width x clock.
    pub explicit_bandwidth_gbs: Option<f64>,
}

impl MemoryChannelClass {
    pub fn capacity_per_channel_bytes(&self) -> u64 {
        self.capacity_mb << 20
    }

    /// Bandwidth of one channel in GB/s.
    pub fn pc_bandwidth_gbs(&self) -> f64 {
        match self.explicit_bandwidth_gbs {
            Some(total) => total / self.count as f64,
            None => self.width as f64 * self.clock_mhz / 8.0 / 1000.0,
        }
    }

    pub fn total_bandwidth_gbs(&self) -> f64 {
        match self.explicit_bandwidth_gbs {
            Some(total) => total,
            None => self.count as f64 * self.pc_bandwidth_gbs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Platform {
    pub name: String,
    /// Memory classes in file order; the first one is the default target.
    pub memory: Vec<MemoryChannelClass>,
    pub resources: ResourceVector,
    pub utilization_limit: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PlatformFile {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    utilization_limit: Option<f64>,
    memory: IndexMap<String, ClassFile>,
    resources: ResourceVector,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ClassFile {
    count: u32,
    width_bits: u32,
    #[serde(deserialize_with = "number")]
    clock_mhz: f64,
    capacity_mb: u64,
    #[serde(
        default,
        deserialize_with = "opt_number",
        skip_serializing_if = "Option::is_none"
    )]
    explicit_bandwidth_gbs: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Float(f64),
}

impl From<Number> for f64 {
    fn from(n: Number) -> f64 {
        match n {
            Number::Int(i) => i as f64,
            Number::Float(f) => f,
        }
    }
}

fn number<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Number::deserialize(d).map(f64::from)
}

fn opt_number<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    Option::<Number>::deserialize(d).map(|n| n.map(f64::from))
}

impl Platform {
    pub fn load(text: &str) -> Result<Platform, PlatformError> {
        let file: PlatformFile =
            toml::from_str(text).map_err(|e| PlatformError::Parse(e.message().to_string()))?;
        let platform = Platform {
            name: file.name,
            memory: file
                .memory
                .into_iter()
                .map(|(name, c)| MemoryChannelClass {
                    name,
                    count: c.count,
                    width: c.width_bits,
                    clock_mhz: c.clock_mhz,
                    capacity_mb: c.capacity_mb,
                    explicit_bandwidth_gbs: c.explicit_bandwidth_gbs,
                })
                .collect(),
            resources: file.resources,
            utilization_limit: file.utilization_limit.unwrap_or(DEFAULT_UTILIZATION_LIMIT),
        };
        platform.validate()?;
        Ok(platform)
    }

    pub fn validate(&self) -> Result<(), PlatformError> {
        let invalid = |msg: String| Err(PlatformError::Invalid(msg));
        if self.memory.is_empty() {
            return invalid("at least one [memory.<class>] section is required".into());
        }
        if !(self.utilization_limit > 0.0 && self.utilization_limit <= 1.0) {
            return invalid(format!(
                "utilization_limit must be in (0, 1], got {}",
                self.utilization_limit
            ));
        }
        for c in &self.memory {
            if c.count == 0 {
                return invalid(format!("memory.{}: count must be positive", c.name));
            }
            if c.width == 0 {
                return invalid(format!("memory.{}: width_bits must be positive", c.name));
            }
            if !(c.clock_mhz > 0.0 && c.clock_mhz.is_finite()) {
                return invalid(format!("memory.{}: clock_mhz must be positive", c.name));
            }
            if let Some(bw) = c.explicit_bandwidth_gbs {
                if !(bw > 0.0 && bw.is_finite()) {
                    return invalid(format!(
                        "memory.{}: explicit_bandwidth_gbs must be positive",
                        c.name
                    ));
                }
            }
        }
        Ok(())
    }

    /// Serializes back to the platform file format.
    pub fn to_toml(&self) -> String {
        let file = PlatformFile {
            name: self.name.clone(),
            utilization_limit: Some(self.utilization_limit),
            memory: self
                .memory
                .iter()
                .map(|c| {
                    (
                        c.name.clone(),
                        ClassFile {
                            count: c.count,
                            width_bits: c.width,
                            clock_mhz: c.clock_mhz,
                            capacity_mb: c.capacity_mb,
                            explicit_bandwidth_gbs: c.explicit_bandwidth_gbs,
                        },
                    )
                })
                .collect(),
            resources: self.resources,
        };
        toml::to_string(&file).expect("platform serializes")
    }

    pub fn default_class(&self) -> &MemoryChannelClass {
        &self.memory[0]
    }

    pub fn class(&self, name: &str) -> Result<&MemoryChannelClass, PlatformError> {
        self.memory
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| PlatformError::UnknownClass(name.to_string()))
    }

    /// Class named by a PC op, or the default class.
    pub fn resolve_class(&self, name: Option<&str>) -> Result<&MemoryChannelClass, PlatformError> {
        match name {
            Some(n) => self.class(n),
            None => Ok(self.default_class()),
        }
    }

    pub fn pc_bandwidth(&self, class_name: &str) -> Result<f64, PlatformError> {
        self.class(class_name)
            .map(MemoryChannelClass::pc_bandwidth_gbs)
    }

    pub fn total_bandwidth(&self, class_name: &str) -> Result<f64, PlatformError> {
        self.class(class_name)
            .map(MemoryChannelClass::total_bandwidth_gbs)
    }

    /// `utilization_limit x available` for one resource.
    pub fn resource_budget(&self, r: crate::resources::Resource) -> f64 {
        self.utilization_limit * self.resources.get(r) as f64
    }
}
