use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Who is attacking, which determines the data sources they can read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackerTier {
    /// Device firmware: raw sensors, processed telemetry, device/host APIs.
    PrivilegedI,
    /// Client application: processed telemetry, device/host APIs, network.
    PrivilegedII,
    /// Multiplayer server: networked telemetry and presented streams.
    PrivilegedIII,
    /// Another user: presented telemetry only.
    NonPrivileged,
}

/// Classes of observable attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObservableClass {
    Device,
    Network,
    Geospatial,
    Audio,
    Behavior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Access {
    Full,
    /// Observable only in a filtered or preprocessed form.
    Degraded,
    None,
}

impl AttackerTier {
    pub const ALL: [AttackerTier; 4] = [
        AttackerTier::PrivilegedI,
        AttackerTier::PrivilegedII,
        AttackerTier::PrivilegedIII,
        AttackerTier::NonPrivileged,
    ];

    pub fn access(self, class: ObservableClass) -> Access {
        use Access::*;
        use ObservableClass as C;
        match (self, class) {
            (AttackerTier::PrivilegedI, C::Network) => None,
            (AttackerTier::PrivilegedI, _) => Full,

            (AttackerTier::PrivilegedII, C::Geospatial) => Degraded,
            (AttackerTier::PrivilegedII, _) => Full,

            (AttackerTier::PrivilegedIII, C::Device) => None,
            (AttackerTier::PrivilegedIII, C::Geospatial | C::Audio) => Degraded,
            (AttackerTier::PrivilegedIII, _) => Full,

            (AttackerTier::NonPrivileged, C::Device | C::Network) => None,
            (AttackerTier::NonPrivileged, C::Geospatial | C::Audio) => Degraded,
            (AttackerTier::NonPrivileged, C::Behavior) => Full,
        }
    }

    pub fn can_observe(self, class: ObservableClass) -> bool {
        self.access(class) != Access::None
    }

    /// Tiers I and II read the device's processed telemetry stream directly;
    /// the others only receive the networked re-broadcast.
    pub fn sees_processed_telemetry(self) -> bool {
        matches!(self, AttackerTier::PrivilegedI | AttackerTier::PrivilegedII)
    }

    pub fn name(self) -> &'static str {
        match self {
            AttackerTier::PrivilegedI => "PrivilegedI",
            AttackerTier::PrivilegedII => "PrivilegedII",
            AttackerTier::PrivilegedIII => "PrivilegedIII",
            AttackerTier::NonPrivileged => "NonPrivileged",
        }
    }
}

impl fmt::Display for AttackerTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackerTier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "privilegedi" | "p1" | "hardware" => Ok(AttackerTier::PrivilegedI),
            "privilegedii" | "p2" | "client" => Ok(AttackerTier::PrivilegedII),
            "privilegediii" | "p3" | "server" => Ok(AttackerTier::PrivilegedIII),
            "nonprivileged" | "np" | "user" => Ok(AttackerTier::NonPrivileged),
            _ => Err(format!("unknown attacker tier {s:?}")),
        }
    }
}
