use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Annotated driving maneuver. Discriminants are the symbol indices used by
/// the sequence decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Maneuver {
    /// Going straight.
    Background = 0,
    IntersectionPassing = 1,
    LeftTurn = 2,
    RightTurn = 3,
    LeftLaneChange = 4,
    RightLaneChange = 5,
    CrosswalkPassing = 6,
    UTurn = 7,
    LeftLaneBranch = 8,
    RightLaneBranch = 9,
    Merge = 10,
}

pub const NUM_MANEUVERS: usize = 11;
/// Start-of-sequence symbol, fed to the first decoder step.
pub const SOS: usize = 11;
/// End-of-sequence symbol, the final target of every sequence.
pub const EOS: usize = 12;
pub const VOCAB_SIZE: usize = 13;

/// Share of each maneuver (percent) in the 150-hour HDD recordings,
/// in [`Maneuver::ALL`] order.
pub const HDD_LABEL_PERCENT: [f64; NUM_MANEUVERS] = [
    87.15, 6.00, 2.58, 2.31, 0.54, 0.50, 0.27, 0.23, 0.20, 0.08, 0.14,
];

impl Maneuver {
    pub const ALL: [Maneuver; NUM_MANEUVERS] = [
        Maneuver::Background,
        Maneuver::IntersectionPassing,
        Maneuver::LeftTurn,
        Maneuver::RightTurn,
        Maneuver::LeftLaneChange,
        Maneuver::RightLaneChange,
        Maneuver::CrosswalkPassing,
        Maneuver::UTurn,
        Maneuver::LeftLaneBranch,
        Maneuver::RightLaneBranch,
        Maneuver::Merge,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Maneuver::Background => "background",
            Maneuver::IntersectionPassing => "intersection_passing",
            Maneuver::LeftTurn => "left_turn",
            Maneuver::RightTurn => "right_turn",
            Maneuver::LeftLaneChange => "left_lane_change",
            Maneuver::RightLaneChange => "right_lane_change",
            Maneuver::CrosswalkPassing => "crosswalk_passing",
            Maneuver::UTurn => "u_turn",
            Maneuver::LeftLaneBranch => "left_lane_branch",
            Maneuver::RightLaneBranch => "right_lane_branch",
            Maneuver::Merge => "merge",
        }
    }
}

impl fmt::Display for Maneuver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Maneuver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::data(format!("unknown maneuver label {s:?}")))
    }
}

/// Printable name of any decoder symbol.
pub fn symbol_name(symbol: usize) -> &'static str {
    match symbol {
        SOS => "<sos>",
        EOS => "<eos>",
        s => Maneuver::from_index(s).map_or("<invalid>", Maneuver::name),
    }
}
