use serde::{Deserialize, Serialize};

use crate::geometry::OpticalLayout;
use crate::montecarlo::sampler::PhotonPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IdlerOutcome {
    DetABar,
    DetBBar,
    Miss,
}

impl IdlerOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            IdlerOutcome::DetABar => "DET_A_BAR",
            IdlerOutcome::DetBBar => "DET_B_BAR",
            IdlerOutcome::Miss => "MISS",
        }
    }
}

/// Transverse idler position at the detector plane, `y + d'·θ_i`.
pub fn idler_position(pair: &PhotonPair, layout: &OpticalLayout) -> f64 {
    pair.origin.transverse + layout.idler_distance * pair.idler_angle
}

/// Detector Ā sits opposite slit A, at `−(s/2d)·d'`; B̄ mirrors it. Each
/// accepts a transverse half-width `ρ·d'`, boundaries included.
pub fn propagate_idler(pair: &PhotonPair, layout: &OpticalLayout) -> IdlerOutcome {
    let y = idler_position(pair, layout);
    let center = layout.slit_separation / (2.0 * layout.slit_distance) * layout.idler_distance;
    let half = layout.detector_angular_radius * layout.idler_distance;
    let to_a = (y + center).abs();
    let to_b = (y - center).abs();
    if to_a <= half && to_a <= to_b {
        IdlerOutcome::DetABar
    } else if to_b <= half {
        IdlerOutcome::DetBBar
    } else {
        IdlerOutcome::Miss
    }
}
