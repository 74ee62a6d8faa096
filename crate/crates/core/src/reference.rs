//! Observed steady-state populations for each pumped line.

use serde::{Deserialize, Serialize};

/// Which pump position a row belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PumpPosition {
    /// On the peak of catalog line `n`.
    Line(usize),
    /// Half-height point on the high-energy side of line 6.
    Line6Detuned,
}

impl PumpPosition {
    pub fn label(self) -> String {
        match self {
            PumpPosition::Line(n) => n.to_string(),
            PumpPosition::Line6Detuned => "6'".to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedRow {
    pub pump: PumpPosition,
    /// Percent, canonical state order.
    pub populations: [f64; 4],
    /// (electron, nuclear) polarization, percent.
    pub polarization: (f64, f64),
}

const fn row(pump: PumpPosition, populations: [f64; 4], pe: f64, pn: f64) -> ObservedRow {
    ObservedRow {
        pump,
        populations,
        polarization: (pe, pn),
    }
}

pub const OBSERVED_ROWS: [ObservedRow; 9] = [
    row(PumpPosition::Line(3), [44.0, 38.0, 4.0, 14.0], 64.0, 16.0),
    row(PumpPosition::Line(4), [63.0, 22.0, 7.0, 8.0], 70.0, 42.0),
    row(PumpPosition::Line(5), [1.0, 8.0, 75.0, 16.0], -82.0, -66.0),
    row(PumpPosition::Line(6), [1.0, 4.0, 84.0, 11.0], -90.0, -76.0),
    row(PumpPosition::Line6Detuned, [2.0, 11.0, 64.0, 23.0], -74.0, -50.0),
    row(PumpPosition::Line(7), [64.0, 26.0, 1.0, 9.0], 80.0, 46.0),
    row(PumpPosition::Line(8), [76.0, 18.0, 2.0, 4.0], 88.0, 60.0),
    row(PumpPosition::Line(9), [3.0, 15.0, 43.0, 39.0], -64.0, -16.0),
    row(PumpPosition::Line(10), [4.0, 5.0, 70.0, 21.0], -82.0, -50.0),
];

pub fn observed_row(pump: PumpPosition) -> Option<&'static ObservedRow> {
    OBSERVED_ROWS.iter().find(|r| r.pump == pump)
}

/// The rows used to calibrate the shipped rate preset.
pub fn calibration_rows() -> Vec<ObservedRow> {
    (5..=8).map(|n| *observed_row(PumpPosition::Line(n)).unwrap()).collect()
}
