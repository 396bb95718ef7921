//! Pipeline configuration.
//!
//! Every tunable of the detection pipeline lives here, loadable from a TOML
//! file and overridable with dotted `key=value` pairs (CLI `--set`). Defaults
//! are the values the pipeline was calibrated with.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config value: {0}")]
    Invalid(String),
}

/// Multi-scale Haar search for the pupil region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoiConfig {
    /// Outer aperture sizes of the square Haar kernel, in pixels.
    pub scales: Vec<u32>,
    /// Coarse scan stride; a stride-1 refinement runs around the coarse argmax.
    pub stride: u32,
    /// Fractional expansion of the winning window before cropping.
    pub expand: f64,
}

impl Default for RoiConfig {
    fn default() -> Self {
        Self { scales: vec![150, 200, 250, 300, 350], stride: 4, expand: 0.10 }
    }
}

/// Edge segment extraction inside the ROI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeConfig {
    /// Gaussian smoothing sigma applied before gradients.
    pub sigma: f64,
    /// Permissive gradient magnitude floor (Sobel scale, 0..1020). Extraction
    /// stays permissive; the a-contrario validation does the real pruning.
    pub grad_threshold: f64,
    /// Anchor sampling interval in rows/columns.
    pub scan_interval: u32,
    /// Shortest chain worth emitting, in pixels.
    pub min_segment_length: usize,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self { sigma: 1.0, grad_threshold: 8.0, scan_interval: 2, min_segment_length: 10 }
    }
}

/// Gradient-entropy screening of segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeConfig {
    /// Entropy floor (bits) for the near-circular screen.
    pub entropy_near_circular: f64,
    /// Entropy floor (bits) for a segment to enter arc extraction.
    pub entropy_arc: f64,
    /// Largest start/end gap (px) still counted as a closed segment.
    pub max_closed_gap: f64,
    /// Fit error ceiling (px) for the near-circular screen.
    pub near_circular_rmse: f64,
    /// Shortest chain eligible for the near-circular screen. Glint rims are
    /// closed, high-entropy, and fit tiny ellipses tightly; only their
    /// length gives them away.
    pub min_near_circular_length: usize,
    /// Eccentricity ceiling for the near-circular fit. Thin closed hairpin
    /// contours (eyelash outlines) can pass the entropy and closedness
    /// criteria via degenerate sliver fits.
    pub max_eccentricity: f64,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        Self {
            entropy_near_circular: 2.8,
            entropy_arc: 2.0,
            max_closed_gap: 15.0,
            near_circular_rmse: 2.0,
            min_near_circular_length: 60,
            max_eccentricity: 0.98,
        }
    }
}

/// Corner splitting and per-span ellipse fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArcConfig {
    /// Shortest span fitted as an arc, in pixels.
    pub min_arc_length: usize,
    /// Half-window (chain pixels) for turning-angle curvature.
    pub curvature_window: usize,
    /// Sigma of the 1-D Gaussian applied to the curvature signal.
    pub css_sigma: f64,
    /// Corner response floor, degrees of turning angle.
    pub corner_angle_deg: f64,
    /// Fit error ceiling (px) for an emitted arc.
    pub arc_rmse: f64,
    /// Eccentricity ceiling for an emitted arc. Near-straight spans fit
    /// degenerate sliver ellipses with near-zero error; no plausible pupil
    /// projection comes close to that.
    pub max_eccentricity: f64,
}

impl Default for ArcConfig {
    fn default() -> Self {
        // Window and sigma calibrated so rasterized ellipses up to a/b = 3
        // at pupil scale stay below the corner threshold while occlusion
        // junctions of 40 degrees and more clear it.
        Self {
            min_arc_length: 25,
            curvature_window: 4,
            css_sigma: 1.0,
            corner_angle_deg: 30.0,
            arc_rmse: 2.0,
            max_eccentricity: 0.98,
        }
    }
}

/// Arc-subset candidate generation and final selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CandidateConfig {
    /// Fit error ceiling (px) for a fused candidate. Multi-arc point sets
    /// legitimately carry slightly higher residuals than single arcs.
    pub rmse_bound: f64,
    /// Eccentricity ceiling for a fused candidate, mirroring the arc gate.
    pub max_eccentricity: f64,
    /// Subset enumeration cap; only the longest arcs are kept beyond it.
    pub max_arcs: usize,
    /// Cost divergence threshold; above it the frame is declared pupil-free.
    pub cost_threshold: f64,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self { rmse_bound: 3.0, max_eccentricity: 0.98, max_arcs: 10, cost_threshold: 50.0 }
    }
}

/// Synthetic corpus generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Master seed for corpus generation.
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { seed: 7 }
    }
}

/// Full pipeline configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub roi: RoiConfig,
    pub edges: EdgeConfig,
    pub shape: ShapeConfig,
    pub arcs: ArcConfig,
    pub candidates: CandidateConfig,
    pub synth: SynthConfig,
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Apply a dotted-key override such as `roi.stride=2`. Flag overrides win
    /// over file values, so this is applied after loading.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let mut table = toml::Table::try_from(&*self)
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(ConfigError::Invalid(format!("bad override key `{key}`")));
        }
        let mut node = &mut table;
        for part in &parts[..parts.len() - 1] {
            node = node
                .get_mut(*part)
                .and_then(|v| v.as_table_mut())
                .ok_or_else(|| ConfigError::Invalid(format!("unknown config section `{part}`")))?;
        }
        let leaf = parts[parts.len() - 1];
        if !node.contains_key(leaf) {
            return Err(ConfigError::Invalid(format!("unknown config key `{key}`")));
        }
        let parsed: toml::Value = format!("v = {value}")
            .parse::<toml::Table>()
            .map_err(|e| ConfigError::Invalid(format!("bad value for `{key}`: {e}")))?
            .remove("v")
            .expect("wrapped value present");
        node.insert(leaf.to_string(), parsed);
        let cfg: Config = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")))
            }
        }
        if self.roi.scales.is_empty() {
            return Err(ConfigError::Invalid("roi.scales must be non-empty".into()));
        }
        if self.roi.stride == 0 {
            return Err(ConfigError::Invalid("roi.stride must be positive".into()));
        }
        if self.roi.expand < 0.0 {
            return Err(ConfigError::Invalid("roi.expand must be non-negative".into()));
        }
        positive("edges.sigma", self.edges.sigma)?;
        positive("edges.grad_threshold", self.edges.grad_threshold)?;
        if self.edges.scan_interval == 0 {
            return Err(ConfigError::Invalid("edges.scan_interval must be positive".into()));
        }
        positive("shape.entropy_near_circular", self.shape.entropy_near_circular)?;
        positive("shape.entropy_arc", self.shape.entropy_arc)?;
        positive("shape.max_closed_gap", self.shape.max_closed_gap)?;
        positive("shape.near_circular_rmse", self.shape.near_circular_rmse)?;
        positive("arcs.css_sigma", self.arcs.css_sigma)?;
        positive("arcs.corner_angle_deg", self.arcs.corner_angle_deg)?;
        positive("arcs.arc_rmse", self.arcs.arc_rmse)?;
        for (name, e) in [
            ("arcs.max_eccentricity", self.arcs.max_eccentricity),
            ("candidates.max_eccentricity", self.candidates.max_eccentricity),
            ("shape.max_eccentricity", self.shape.max_eccentricity),
        ] {
            if !(e > 0.0 && e <= 1.0) {
                return Err(ConfigError::Invalid(format!("{name} must be in (0, 1], got {e}")));
            }
        }
        if self.arcs.curvature_window == 0 {
            return Err(ConfigError::Invalid("arcs.curvature_window must be positive".into()));
        }
        positive("candidates.rmse_bound", self.candidates.rmse_bound)?;
        positive("candidates.cost_threshold", self.candidates.cost_threshold)?;
        if self.candidates.max_arcs == 0 {
            return Err(ConfigError::Invalid("candidates.max_arcs must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_calibrated_constants() {
        let cfg = Config::default();
        assert_eq!(cfg.roi.scales, vec![150, 200, 250, 300, 350]);
        assert_eq!(cfg.shape.entropy_near_circular, 2.8);
        assert_eq!(cfg.shape.entropy_arc, 2.0);
        assert_eq!(cfg.shape.max_closed_gap, 15.0);
        assert_eq!(cfg.arcs.min_arc_length, 25);
        assert_eq!(cfg.shape.near_circular_rmse, 2.0);
        assert_eq!(cfg.candidates.rmse_bound, 3.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_and_override() {
        let mut cfg = Config::from_toml_str("[roi]\nstride = 2\n").unwrap();
        assert_eq!(cfg.roi.stride, 2);
        assert_eq!(cfg.arcs.min_arc_length, 25);
        cfg.apply_override("roi.stride", "8").unwrap();
        assert_eq!(cfg.roi.stride, 8);
        cfg.apply_override("roi.scales", "[100, 200]").unwrap();
        assert_eq!(cfg.roi.scales, vec![100, 200]);
        assert!(cfg.apply_override("roi.nope", "3").is_err());
        assert!(cfg.apply_override("edges.sigma", "-1.0").is_err());
    }

    #[test]
    fn rejects_nonpositive_thresholds() {
        assert!(Config::from_toml_str("[shape]\nentropy_arc = 0.0\n").is_err());
        assert!(Config::from_toml_str("[candidates]\ncost_threshold = -5\n").is_err());
    }
}
