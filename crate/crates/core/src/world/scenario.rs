//! Ground-truth orchard scenarios on a planar fruiting wall.
//!
//! World frame: `x` runs along the row (platform travel), `y` is height
//! above ground, `z` points out of the trellis towards the platform. The
//! trellis is the plane `z = 0` and fruit hang on its outward side.

use std::collections::BTreeSet;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::geometry::{Plane, RigidTransform};
use crate::raster::Hsv;
use crate::rng::{self, Stream};

use super::WorldError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StemMode {
    Abscission,
    PullOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NearObstacle {
    None,
    Side,
    AboveBelow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fruit {
    pub id: u32,
    pub position: Vector3<f64>,
    pub diameter: f64,
    pub stem_mode: StemMode,
    pub near_obstacle: NearObstacle,
    pub color: Hsv,
}

impl Fruit {
    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }

    pub fn height_on_trellis(&self) -> f64 {
        self.position.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Trunk,
    Wire,
    Branch,
    Post,
}

/// A capsule: segment `a`-`b` swept by `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub kind: ObstacleKind,
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

impl Obstacle {
    pub fn new(kind: ObstacleKind, a: Vector3<f64>, b: Vector3<f64>, radius: f64) -> Result<Self, WorldError> {
        if !(radius > 0.0) {
            return Err(WorldError::InvalidConfig(format!("obstacle radius {radius} must be positive")));
        }
        Ok(Self { kind, a, b, radius })
    }

    pub fn color(&self) -> Hsv {
        match self.kind {
            ObstacleKind::Trunk | ObstacleKind::Branch => Hsv::new(30.0, 0.45, 0.30),
            ObstacleKind::Wire => Hsv::new(0.0, 0.02, 0.65),
            ObstacleKind::Post => Hsv::new(40.0, 0.15, 0.55),
        }
    }

    /// Distance from `p` to the capsule axis.
    pub fn axis_distance(&self, p: &Vector3<f64>) -> f64 {
        let ab = self.b - self.a;
        let len2 = ab.norm_squared();
        let t = if len2 > 0.0 { ((p - self.a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
        (p - (self.a + ab * t)).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldScenario {
    pub trellis_plane: Plane,
    pub fruits: Vec<Fruit>,
    pub obstacles: Vec<Obstacle>,
    pub platform_pose: RigidTransform,
    pub rng_seed: u64,
    /// Trellis extent along `x`, meters.
    pub trellis_length: f64,
}

impl WorldScenario {
    /// An empty wall at `z = 0` with no fruit or obstacles.
    pub fn empty(trellis_length: f64, seed: u64) -> Self {
        Self {
            trellis_plane: trellis_plane(),
            fruits: Vec::new(),
            obstacles: Vec::new(),
            platform_pose: RigidTransform::identity(),
            rng_seed: seed,
            trellis_length,
        }
    }

    pub fn fruit(&self, id: u32) -> Option<&Fruit> {
        self.fruits.iter().find(|f| f.id == id)
    }

    pub fn remove_fruit(&mut self, id: u32) -> Option<Fruit> {
        let idx = self.fruits.iter().position(|f| f.id == id)?;
        Some(self.fruits.remove(idx))
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let mut seen = BTreeSet::new();
        for f in &self.fruits {
            if !seen.insert(f.id) {
                return Err(WorldError::InvalidConfig(format!("duplicate fruit id {}", f.id)));
            }
            if !(f.diameter > 0.0) {
                return Err(WorldError::InvalidConfig(format!("fruit {} diameter {}", f.id, f.diameter)));
            }
        }
        Ok(())
    }
}

fn trellis_plane() -> Plane {
    Plane::new(Vector3::zeros(), Vector3::z()).expect("unit z normal")
}

/// Scenario generation parameters. Every field has a default so partial
/// JSON files are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Length of the wall along the row, meters.
    pub trellis_length: f64,
    /// Lowest and highest fruiting height, meters.
    pub fruit_band_bottom: f64,
    pub fruit_band_height: f64,
    /// Expected fruit per square meter of wall.
    pub fruit_density: f64,
    /// Fruit sit in `[0, canopy_depth)` in front of the trellis plane.
    pub canopy_depth: f64,
    pub diameter_mean: f64,
    pub diameter_sd: f64,
    pub diameter_min: f64,
    pub fruit_color: Hsv,
    /// Half-widths of the uniform colour jitter per fruit.
    pub hue_spread: f64,
    pub sat_spread: f64,
    pub val_spread: f64,
    pub abscission_fraction: f64,
    /// Fraction of fruit growing tight against hard obstacles.
    pub near_obstacle_fraction: f64,
    /// Of the near-obstacle fruit, fraction whose obstacle is beside them.
    pub side_obstacle_fraction: f64,
    pub trunk_spacing: f64,
    pub trunk_radius: f64,
    pub wire_heights: Vec<f64>,
    pub wire_radius: f64,
    pub post_radius: f64,
    pub branches_per_meter: f64,
    pub branch_radius: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            trellis_length: 2.0,
            fruit_band_bottom: 1.1,
            fruit_band_height: 0.8,
            fruit_density: 30.0,
            canopy_depth: 0.12,
            diameter_mean: 0.05,
            diameter_sd: 0.004,
            diameter_min: 0.03,
            fruit_color: Hsv::new(350.0, 0.75, 0.45),
            hue_spread: 8.0,
            sat_spread: 0.1,
            val_spread: 0.1,
            abscission_fraction: 0.6,
            near_obstacle_fraction: 0.25,
            side_obstacle_fraction: 0.65,
            trunk_spacing: 1.0,
            trunk_radius: 0.04,
            wire_heights: vec![0.9, 1.35, 1.85, 2.3],
            wire_radius: 0.002,
            post_radius: 0.06,
            branches_per_meter: 0.0,
            branch_radius: 0.015,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |msg: String| Err(WorldError::InvalidConfig(msg));
        let finite_nonneg = [
            ("fruit_density", self.fruit_density),
            ("canopy_depth", self.canopy_depth),
            ("diameter_sd", self.diameter_sd),
            ("trunk_spacing", self.trunk_spacing),
            ("branches_per_meter", self.branches_per_meter),
            ("hue_spread", self.hue_spread),
            ("sat_spread", self.sat_spread),
            ("val_spread", self.val_spread),
        ];
        for (name, v) in finite_nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        let area = self.trellis_length * self.fruit_band_height;
        if !(self.trellis_length > 0.0 && self.fruit_band_height > 0.0 && area.is_finite()) {
            return bad(format!(
                "trellis area {} x {} must be positive",
                self.trellis_length, self.fruit_band_height
            ));
        }
        if !(self.diameter_mean > 0.0 && self.diameter_min > 0.0) {
            return bad("fruit diameters must be positive".into());
        }
        for (name, v) in [
            ("abscission_fraction", self.abscission_fraction),
            ("near_obstacle_fraction", self.near_obstacle_fraction),
            ("side_obstacle_fraction", self.side_obstacle_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} must lie in [0, 1]"));
            }
        }
        for (name, r) in [
            ("trunk_radius", self.trunk_radius),
            ("wire_radius", self.wire_radius),
            ("post_radius", self.post_radius),
            ("branch_radius", self.branch_radius),
        ] {
            if !(r > 0.0) {
                return bad(format!("{name} = {r} must be positive"));
            }
        }
        Ok(())
    }
}

/// Samples a scenario. Deterministic in `(config, seed)`.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<WorldScenario, WorldError> {
    config.validate()?;
    let mut rng = rng::stream(seed, Stream::Scenario);
    let mut scenario = WorldScenario::empty(config.trellis_length, seed);

    let area = config.trellis_length * config.fruit_band_height;
    let expected = config.fruit_density * area;
    let count = if expected > 0.0 {
        Poisson::new(expected)
            .map_err(|e| WorldError::InvalidConfig(e.to_string()))?
            .sample(&mut rng) as u32
    } else {
        0
    };
    let diameter = Normal::new(config.diameter_mean, config.diameter_sd)
        .map_err(|e| WorldError::InvalidConfig(e.to_string()))?;

    for id in 0..count {
        let x = rng.random_range(0.0..config.trellis_length);
        let y = config.fruit_band_bottom + rng.random_range(0.0..config.fruit_band_height);
        let z = if config.canopy_depth > 0.0 { rng.random_range(0.0..config.canopy_depth) } else { 0.0 };
        let d = diameter.sample(&mut rng).max(config.diameter_min);
        let jitter = |rng: &mut rand_chacha::ChaCha8Rng, half: f64| {
            if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 }
        };
        let color = Hsv::new(
            config.fruit_color.h + jitter(&mut rng, config.hue_spread),
            config.fruit_color.s + jitter(&mut rng, config.sat_spread),
            config.fruit_color.v + jitter(&mut rng, config.val_spread),
        )
        .normalized();
        let stem_mode = if rng.random_bool(config.abscission_fraction) {
            StemMode::Abscission
        } else {
            StemMode::PullOut
        };
        let near_obstacle = if rng.random_bool(config.near_obstacle_fraction) {
            if rng.random_bool(config.side_obstacle_fraction) {
                NearObstacle::Side
            } else {
                NearObstacle::AboveBelow
            }
        } else {
            NearObstacle::None
        };
        scenario.fruits.push(Fruit {
            id,
            position: Vector3::new(x, y, z),
            diameter: d,
            stem_mode,
            near_obstacle,
            color,
        });
    }

    let top = config.fruit_band_bottom + config.fruit_band_height + 0.5;
    for x in [0.0, config.trellis_length] {
        scenario.obstacles.push(Obstacle::new(
            ObstacleKind::Post,
            Vector3::new(x, 0.0, -config.post_radius),
            Vector3::new(x, top, -config.post_radius),
            config.post_radius,
        )?);
    }
    if config.trunk_spacing > 0.0 {
        let mut x = 0.5 * config.trunk_spacing;
        while x < config.trellis_length {
            scenario.obstacles.push(Obstacle::new(
                ObstacleKind::Trunk,
                Vector3::new(x, 0.0, -config.trunk_radius),
                Vector3::new(x, top - 0.3, -config.trunk_radius),
                config.trunk_radius,
            )?);
            x += config.trunk_spacing;
        }
    }
    for &h in &config.wire_heights {
        scenario.obstacles.push(Obstacle::new(
            ObstacleKind::Wire,
            Vector3::new(0.0, h, 0.0),
            Vector3::new(config.trellis_length, h, 0.0),
            config.wire_radius,
        )?);
    }
    let branches = (config.branches_per_meter * config.trellis_length).round() as usize;
    for _ in 0..branches {
        let x = rng.random_range(0.0..config.trellis_length);
        let y = config.fruit_band_bottom + rng.random_range(0.0..config.fruit_band_height);
        let angle: f64 = rng.random_range(-1.2..1.2);
        let len = rng.random_range(0.15..0.4);
        let a = Vector3::new(x, y, 0.0);
        let b = a + Vector3::new(angle.cos() * len, angle.sin() * len, 0.5 * config.canopy_depth);
        scenario
            .obstacles
            .push(Obstacle::new(ObstacleKind::Branch, a, b, config.branch_radius)?);
    }

    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_density_gives_no_fruit() {
        let cfg = ScenarioConfig {
            fruit_density: 0.0,
            ..Default::default()
        };
        let s = generate_scenario(&cfg, 3).unwrap();
        assert!(s.fruits.is_empty());
        assert!(!s.obstacles.is_empty());
    }

    #[test]
    fn same_seed_same_scenario() {
        let cfg = ScenarioConfig {
            branches_per_meter: 2.0,
            ..Default::default()
        };
        let a = generate_scenario(&cfg, 99).unwrap();
        let b = generate_scenario(&cfg, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = generate_scenario(&cfg, 100).unwrap();
        assert_ne!(a.fruits, c.fruits);
    }

    #[test]
    fn mean_count_matches_density() {
        // 10 fruit/m^2 over a 2 m x 1 m panel
        let cfg = ScenarioConfig {
            trellis_length: 2.0,
            fruit_band_height: 1.0,
            fruit_density: 10.0,
            ..Default::default()
        };
        let total: usize = (0..1000).map(|s| generate_scenario(&cfg, s).unwrap().fruits.len()).sum();
        let mean = total as f64 / 1000.0;
        assert!((mean - 20.0).abs() < 1.0, "mean fruit count {mean}");
    }

    #[test]
    fn fruit_lie_in_band() {
        let cfg = ScenarioConfig::default();
        let s = generate_scenario(&cfg, 5).unwrap();
        s.validate().unwrap();
        assert!(s.fruits.len() > 10);
        for f in &s.fruits {
            let dist = s.trellis_plane.signed_distance(&f.position);
            assert!(dist.abs() < cfg.canopy_depth);
            assert!(f.diameter >= cfg.diameter_min);
            assert!((0.0..cfg.trellis_length).contains(&f.position.x));
        }
        let near = s.fruits.iter().filter(|f| f.near_obstacle != NearObstacle::None).count();
        assert!(near > 0 && near < s.fruits.len());
    }

    #[test]
    fn zero_area_rejected() {
        let cfg = ScenarioConfig {
            fruit_band_height: 0.0,
            ..Default::default()
        };
        assert!(matches!(generate_scenario(&cfg, 1), Err(WorldError::InvalidConfig(_))));
        let cfg = ScenarioConfig {
            fruit_density: -1.0,
            ..Default::default()
        };
        assert!(generate_scenario(&cfg, 1).is_err());
    }

    #[test]
    fn config_parses_partial_json() {
        let cfg: ScenarioConfig = serde_json::from_str(r#"{"fruit_density": 4.5}"#).unwrap();
        assert_eq!(cfg.fruit_density, 4.5);
        assert_eq!(cfg.trellis_length, ScenarioConfig::default().trellis_length);
    }
}
