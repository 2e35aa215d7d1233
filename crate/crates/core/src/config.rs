//! Routine configuration: the scene prior plus every tracking threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::{CascadeConfig, TrackingSpace};
use crate::geometry::{CameraId, PlaneSpec, Point3};
use crate::sv_track::{Frame, IouTrackerConfig, SegmentConfig};
use crate::target::TargetCriteria;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneConfig {
    pub n: [f64; 3],
    pub point: [f64; 3],
}

impl PlaneConfig {
    pub fn to_plane(&self) -> Result<PlaneSpec, ConfigError> {
        let [nx, ny, nz] = self.n;
        let [px, py, pz] = self.point;
        let plane = PlaneSpec::new(nalgebra::Vector3::new(nx, ny, nz), Point3::new(px, py, pz))
            .map_err(|e| ConfigError::Invalid(format!("plane: {e}")))?;
        if !plane.is_vertical() {
            log::warn!("configured plane is not vertical");
        }
        Ok(plane)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutineConfig {
    pub plane: PlaneConfig,
    pub perf_space: [f64; 6],
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_nu")]
    pub nu: f64,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_theta_opp")]
    pub theta_opp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opposite_pairs: Option<Vec<(CameraId, CameraId)>>,
    #[serde(default = "d_omega")]
    pub omega: Frame,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_unmatched")]
    pub unmatched_threshold: f64,
    #[serde(default = "d_iou")]
    pub iou_threshold: f64,
    #[serde(default = "d_max_age")]
    pub max_age: Frame,
    #[serde(default = "d_min_observed")]
    pub min_observed: usize,
    #[serde(default = "d_max_extrapolation")]
    pub max_extrapolation: Frame,
    #[serde(default = "d_h_top")]
    pub h_top: f64,
    #[serde(default = "d_h_bot")]
    pub h_bot: f64,
    #[serde(default = "d_delta")]
    pub delta: Frame,
    #[serde(default = "d_occupancy")]
    pub occupancy: f64,
    #[serde(default = "d_max_gap")]
    pub max_gap: Frame,
    #[serde(default = "d_smooth_taps")]
    pub smooth_taps: usize,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
}

fn d_beta() -> f64 {
    1.0
}
fn d_nu() -> f64 {
    1.0
}
fn d_tau() -> f64 {
    0.5
}
fn d_theta_opp() -> f64 {
    150.0
}
fn d_omega() -> Frame {
    10
}
fn d_lambda() -> f64 {
    0.3
}
fn d_unmatched() -> f64 {
    0.6
}
fn d_iou() -> f64 {
    0.1
}
fn d_max_age() -> Frame {
    2
}
fn d_min_observed() -> usize {
    5
}
fn d_max_extrapolation() -> Frame {
    2
}
fn d_h_top() -> f64 {
    1.5
}
fn d_h_bot() -> f64 {
    0.5
}
fn d_delta() -> Frame {
    30
}
fn d_occupancy() -> f64 {
    0.5
}
fn d_max_gap() -> Frame {
    7
}
fn d_smooth_taps() -> usize {
    5
}
fn d_alpha() -> f64 {
    1.3
}

impl RoutineConfig {
    /// Defaults for everything except the scene prior.
    pub fn new(plane: PlaneConfig, perf_space: [f64; 6]) -> Self {
        Self {
            plane,
            perf_space,
            beta: d_beta(),
            nu: d_nu(),
            tau: d_tau(),
            theta_opp: d_theta_opp(),
            opposite_pairs: None,
            omega: d_omega(),
            lambda: d_lambda(),
            unmatched_threshold: d_unmatched(),
            iou_threshold: d_iou(),
            max_age: d_max_age(),
            min_observed: d_min_observed(),
            max_extrapolation: d_max_extrapolation(),
            h_top: d_h_top(),
            h_bot: d_h_bot(),
            delta: d_delta(),
            occupancy: d_occupancy(),
            max_gap: d_max_gap(),
            smooth_taps: d_smooth_taps(),
            alpha: d_alpha(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        self.plane.to_plane()?;
        self.space()?;
        if self.omega < 2 || self.omega % 2 != 0 {
            return bad("omega must be even and at least 2");
        }
        let positive = [
            ("nu", self.nu),
            ("tau", self.tau),
            ("lambda", self.lambda),
            ("unmatched_threshold", self.unmatched_threshold),
            ("alpha", self.alpha),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return bad(&format!("{name} must be positive and finite"));
        }
        if !(self.theta_opp > 0.0 && self.theta_opp < 180.0) {
            return bad("theta_opp must lie in (0, 180) degrees");
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return bad("iou_threshold must lie in (0, 1]");
        }
        if self.max_age < 0 || self.max_gap < 0 || self.max_extrapolation < 0 {
            return bad("frame counts must be non-negative");
        }
        if self.min_observed == 0 || self.smooth_taps == 0 || self.smooth_taps.is_multiple_of(2) {
            return bad("min_observed must be positive and smooth_taps odd");
        }
        self.criteria().validate().map_err(ConfigError::Invalid)
    }

    pub fn plane(&self) -> Result<PlaneSpec, ConfigError> {
        self.plane.to_plane()
    }

    pub fn space(&self) -> Result<TrackingSpace, ConfigError> {
        TrackingSpace::new(self.perf_space, self.beta).map_err(ConfigError::Invalid)
    }

    pub fn cascade(&self) -> CascadeConfig {
        CascadeConfig {
            theta_opp_deg: self.theta_opp,
            opposite_pairs: self.opposite_pairs.clone(),
            tau: self.tau,
            nu: self.nu,
        }
    }

    pub fn tracker(&self) -> IouTrackerConfig {
        IouTrackerConfig {
            iou_threshold: self.iou_threshold,
            max_age: self.max_age,
        }
    }

    pub fn segments(&self) -> SegmentConfig {
        SegmentConfig {
            min_observed: self.min_observed,
            max_extrapolation: self.max_extrapolation,
        }
    }

    pub fn criteria(&self) -> TargetCriteria {
        TargetCriteria {
            h_top: self.h_top,
            h_bot: self.h_bot,
            delta: self.delta,
            occupancy: self.occupancy,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg = RoutineConfig::from_json(
            r#"{"plane": {"n": [0, 1, 0], "point": [0, 0, 0]}, "perf_space": [-3, -1, 0, 3, 1, 3.5]}"#,
        )
        .unwrap();
        assert_eq!(cfg, RoutineConfig::new(cfg.plane.clone(), cfg.perf_space));
        assert_eq!(
            (cfg.omega, cfg.lambda, cfg.tau, cfg.unmatched_threshold),
            (10, 0.3, 0.5, 0.6)
        );
        assert_eq!((cfg.nu, cfg.delta, cfg.alpha, cfg.iou_threshold), (1.0, 30, 1.3, 0.1));
        assert_eq!((cfg.max_age, cfg.max_gap), (2, 7));
    }

    #[test]
    fn rejects_bad_values() {
        let base = r#""plane": {"n": [0, 1, 0], "point": [0, 0, 0]}, "perf_space": [-3, -1, 0, 3, 1, 3.5]"#;
        for extra in [
            r#""omega": 9"#,
            r#""tau": -1"#,
            r#""h_top": 0.1"#,
            r#""theta_opp": 200"#,
            r#""bogus": 1"#,
        ] {
            let text = format!("{{{base}, {extra}}}");
            assert!(RoutineConfig::from_json(&text).is_err(), "{extra}");
        }
        assert!(RoutineConfig::from_json(
            r#"{"plane": {"n": [0, 0, 0], "point": [0, 0, 0]}, "perf_space": [0,0,0,1,1,1]}"#
        )
        .is_err());
        assert!(RoutineConfig::from_json(
            r#"{"plane": {"n": [0, 1, 0], "point": [0, 0, 0]}, "perf_space": [1,0,0,0,1,1]}"#
        )
        .is_err());
    }
}
