use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The five observation platforms. Discriminants are the wire `platform_id`s;
/// id 0 is reserved for the ship's basestation modem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
#[repr(u8)]
pub enum Platform {
    Bigo = 1,
    Flux = 2,
    #[serde(rename = "CRAWLERSIM")]
    CrawlerSim = 3,
    Mansio = 4,
    Viator = 5,
}

impl Platform {
    pub const ALL: [Platform; 5] = [Platform::Bigo, Platform::Flux, Platform::CrawlerSim, Platform::Mansio, Platform::Viator];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Platform> {
        Platform::ALL.into_iter().find(|p| p.id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            Platform::Bigo => "BIGO",
            Platform::Flux => "FLUX",
            Platform::CrawlerSim => "CRAWLERSIM",
            Platform::Mansio => "MANSIO",
            Platform::Viator => "VIATOR",
        }
    }

    /// Lower-case name used as the topic root, e.g. `/flux/...`.
    pub fn slug(self) -> &'static str {
        match self {
            Platform::Bigo => "bigo",
            Platform::Flux => "flux",
            Platform::CrawlerSim => "crawlersim",
            Platform::Mansio => "mansio",
            Platform::Viator => "viator",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Platform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase().replace(['-', '_', ' '], "");
        Platform::ALL
            .into_iter()
            .find(|p| p.slug() == lower)
            .or_else(|| s.parse::<u8>().ok().and_then(Platform::from_id))
            .ok_or_else(|| format!("unknown platform `{s}`"))
    }
}
