//! Frequency/energy unit conversion. MHz is the canonical internal unit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::real::{c, Real};

/// MHz per neV (h = 4.135667696e-15 eV s).
pub const MHZ_PER_NEV: f64 = 0.241_799_0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnergyUnit {
    #[serde(rename = "MHz")]
    MHz,
    #[serde(rename = "neV")]
    NeV,
    #[serde(rename = "ueV")]
    MicroEv,
}

impl EnergyUnit {
    /// Number of MHz represented by one unit.
    pub fn mhz_per_unit<T: Real>(self) -> T {
        match self {
            EnergyUnit::MHz => T::one(),
            EnergyUnit::NeV => c(MHZ_PER_NEV),
            EnergyUnit::MicroEv => c(MHZ_PER_NEV * 1000.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EnergyUnit::MHz => "MHz",
            EnergyUnit::NeV => "neV",
            EnergyUnit::MicroEv => "ueV",
        }
    }
}

impl fmt::Display for EnergyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown energy unit `{0}` (expected MHz, neV or ueV)")]
pub struct UnknownUnit(pub String);

impl FromStr for EnergyUnit {
    type Err = UnknownUnit;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "MHz" | "mhz" => Ok(EnergyUnit::MHz),
            "neV" | "nev" => Ok(EnergyUnit::NeV),
            "ueV" | "uev" | "μeV" | "µeV" => Ok(EnergyUnit::MicroEv),
            other => Err(UnknownUnit(other.to_string())),
        }
    }
}

/// Linear conversion between energy units.
pub fn convert_units<T: Real>(value: T, from: EnergyUnit, to: EnergyUnit) -> T {
    if from == to {
        return value;
    }
    value * from.mhz_per_unit::<T>() / to.mhz_per_unit::<T>()
}
