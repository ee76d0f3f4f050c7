//! Closed-loop traffic. Actors circulate on closed waypoint polylines at
//! constant cruise speed, hold back behind a leader to keep a minimum
//! headway, and stop before signal-controlled stop nodes while the signal is
//! red. Loops are independent; there is no lane changing or routing and no
//! actor is ever despawned.

use std::collections::{BTreeMap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::rng::{keyed, Domain};

pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_MIN_GAP: f64 = 2.0;
pub const DEFAULT_STOP_DISTANCE: f64 = 3.0;
pub const DEFAULT_GREEN: f64 = 20.0;
pub const DEFAULT_RED: f64 = 20.0;
pub const DEFAULT_DEADLOCK_SECONDS: f64 = 60.0;

/// Two spawn points closer than this along the same loop count as identical.
const SPAWN_OVERLAP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("requested {requested} actors but only {available} spawn points exist")]
    TooManyActors { requested: usize, available: usize },
    #[error("class distribution needs at least one positive, finite weight")]
    InvalidDistribution,
    #[error("class '{0}' is not in the actor catalog")]
    UnknownClass(String),
    #[error("path '{0}' is not defined")]
    UnknownPath(String),
    #[error("duplicate path id '{0}'")]
    DuplicatePath(String),
    #[error("path '{id}': {reason}")]
    InvalidLoop { id: String, reason: String },
    #[error("catalog entry '{0}': dimensions and cruise speed must be positive")]
    InvalidCatalogEntry(String),
    #[error("signal on '{0}': green must be > 0, red >= 0 and the stop node on the loop")]
    InvalidSignal(String),
    #[error("spawn point {index} on '{path}' has arc offset outside [0, loop length)")]
    InvalidSpawnPoint { index: usize, path: String },
    #[error("time step must be positive and finite")]
    InvalidStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLoop {
    pub id: String,
    /// Closed polyline: the last waypoint repeats the first.
    pub waypoints: Vec<Vec3>,
    /// m/s
    pub speed_limit: f64,
}

impl PathLoop {
    /// Why the loop cannot be used, if anything.
    pub fn closure_problem(&self) -> Option<String> {
        if self.waypoints.len() < 3 {
            return Some(format!("needs at least 3 waypoints, has {}", self.waypoints.len()));
        }
        if self.waypoints.iter().any(|w| !w.is_finite()) {
            return Some("waypoint with non-finite coordinate".into());
        }
        if self.waypoints.first() != self.waypoints.last() {
            return Some("first and last waypoint differ (loop not closed)".into());
        }
        let length: f64 = self.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum();
        if !(length > 0.0) {
            return Some("loop has zero length".into());
        }
        None
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if let Some(reason) = self.closure_problem() {
            return Err(ScenarioError::InvalidLoop { id: self.id.clone(), reason });
        }
        if !(self.speed_limit > 0.0) || !self.speed_limit.is_finite() {
            return Err(ScenarioError::InvalidLoop { id: self.id.clone(), reason: "speed limit must be positive".into() });
        }
        Ok(())
    }
}

/// Arc-length parameterization of a validated loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopGeometry {
    waypoints: Vec<Vec3>,
    /// cumulative[i] = arc length at waypoints[i]
    cumulative: Vec<f64>,
    length: f64,
    speed_limit: f64,
}

impl LoopGeometry {
    fn new(path: &PathLoop) -> Self {
        let mut cumulative = Vec::with_capacity(path.waypoints.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in path.waypoints.windows(2) {
            acc += w[0].distance(w[1]);
            cumulative.push(acc);
        }
        LoopGeometry { waypoints: path.waypoints.clone(), cumulative, length: acc, speed_limit: path.speed_limit }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn wrap(&self, arc: f64) -> f64 {
        let a = arc.rem_euclid(self.length);
        // rem_euclid can return `length` itself for tiny negative inputs
        if a >= self.length { 0.0 } else { a }
    }

    /// Position and heading (radians, CCW from +x) at an arc position.
    pub fn pose_at(&self, arc: f64) -> (Vec3, f64) {
        let s = self.wrap(arc);
        let seg = match self.cumulative.partition_point(|&c| c <= s) {
            0 => 0,
            i => (i - 1).min(self.waypoints.len() - 2),
        };
        // skip zero-length segments for the tangent
        let mut k = seg;
        while self.waypoints[k] == self.waypoints[k + 1] {
            k = (k + 1) % (self.waypoints.len() - 1);
        }
        let (a, b) = (self.waypoints[seg], self.waypoints[seg + 1]);
        let seg_len = self.cumulative[seg + 1] - self.cumulative[seg];
        let f = if seg_len > 0.0 { (s - self.cumulative[seg]) / seg_len } else { 0.0 };
        let dir = self.waypoints[k + 1] - self.waypoints[k];
        (a + (b - a) * f, dir.y.atan2(dir.x))
    }

    /// Forward arc distance from `from` to `to`, in `[0, length)`.
    pub fn ahead(&self, from: f64, to: f64) -> f64 {
        self.wrap(to - from)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnPoint {
    pub path_id: String,
    /// meters along the loop
    pub arc_offset: f64,
}

/// Class weights plus how many actors to place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassDistribution {
    pub actors: usize,
    pub weights: BTreeMap<String, f64>,
}

impl ClassDistribution {
    /// Weights scaled to sum to one, in class-name order.
    pub fn normalized(&self) -> Result<Vec<(String, f64)>, ScenarioError> {
        if self.weights.values().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(ScenarioError::InvalidDistribution);
        }
        let total: f64 = self.weights.values().sum();
        if !(total > 0.0) {
            return Err(ScenarioError::InvalidDistribution);
        }
        Ok(self.weights.iter().map(|(k, &w)| (k.clone(), w / total)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorClass {
    pub class: String,
    /// length along heading, m
    pub dx: f64,
    /// width, m
    pub dy: f64,
    /// height, m
    pub dz: f64,
    /// m/s
    pub cruise_speed: f64,
    /// Explicit semantic id; otherwise taken from the palette by class name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_id: Option<u32>,
}

impl ActorClass {
    pub fn dims(&self) -> Vec3 {
        Vec3::new(self.dx, self.dy, self.dz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalController {
    pub path_id: String,
    /// arc position of the stop node, m
    pub stop_arc: f64,
    #[serde(default = "default_green")]
    pub green: f64,
    #[serde(default = "default_red")]
    pub red: f64,
    #[serde(default)]
    pub offset: f64,
}

fn default_green() -> f64 {
    DEFAULT_GREEN
}

fn default_red() -> f64 {
    DEFAULT_RED
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Green,
    Red,
}

/// Green iff `(t + offset) mod (green + red) < green`.
pub fn signal_phase(controller: &SignalController, t: f64) -> Phase {
    let cycle = controller.green + controller.red;
    if (t + controller.offset).rem_euclid(cycle) < controller.green {
        Phase::Green
    } else {
        Phase::Red
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorState {
    pub track_id: u32,
    pub class: String,
    pub path_id: String,
    /// meters along the loop, in `[0, length)`
    pub arc: f64,
    /// m/s over the last step
    pub speed: f64,
    pub position: Vec3,
    /// radians, CCW from +x
    pub heading: f64,
    /// continuous seconds at zero speed
    pub stalled_for: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub time: f64,
    pub step: u64,
    pub actors: Vec<ActorState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficParams {
    /// bumper-to-bumper clearance kept behind a leader, m
    pub min_gap: f64,
    /// an actor this close before a red stop node halts, m
    pub stop_distance: f64,
}

impl Default for TrafficParams {
    fn default() -> Self {
        TrafficParams { min_gap: DEFAULT_MIN_GAP, stop_distance: DEFAULT_STOP_DISTANCE }
    }
}

/// Validated static traffic layout.
#[derive(Debug, Clone)]
pub struct Scenario {
    loops: BTreeMap<String, LoopGeometry>,
    signals: Vec<SignalController>,
    catalog: BTreeMap<String, ActorClass>,
    params: TrafficParams,
}

impl Scenario {
    pub fn new(
        paths: &[PathLoop],
        signals: &[SignalController],
        catalog: &[ActorClass],
        params: TrafficParams,
    ) -> Result<Scenario, ScenarioError> {
        let mut loops = BTreeMap::new();
        for p in paths {
            p.validate()?;
            if loops.insert(p.id.clone(), LoopGeometry::new(p)).is_some() {
                return Err(ScenarioError::DuplicatePath(p.id.clone()));
            }
        }
        for s in signals {
            let geom = loops.get(&s.path_id).ok_or_else(|| ScenarioError::UnknownPath(s.path_id.clone()))?;
            let ok = s.green > 0.0
                && s.red >= 0.0
                && s.green.is_finite()
                && s.red.is_finite()
                && s.offset.is_finite()
                && (0.0..geom.length()).contains(&s.stop_arc);
            if !ok {
                return Err(ScenarioError::InvalidSignal(s.path_id.clone()));
            }
        }
        let mut classes = BTreeMap::new();
        for c in catalog {
            let ok = [c.dx, c.dy, c.dz, c.cruise_speed].iter().all(|v| *v > 0.0 && v.is_finite());
            if !ok {
                return Err(ScenarioError::InvalidCatalogEntry(c.class.clone()));
            }
            classes.insert(c.class.clone(), c.clone());
        }
        Ok(Scenario { loops, signals: signals.to_vec(), catalog: classes, params })
    }

    pub fn loop_geometry(&self, path_id: &str) -> Option<&LoopGeometry> {
        self.loops.get(path_id)
    }

    pub fn class(&self, name: &str) -> Option<&ActorClass> {
        self.catalog.get(name)
    }

    pub fn signals(&self) -> &[SignalController] {
        &self.signals
    }

    pub fn params(&self) -> TrafficParams {
        self.params
    }

    /// Required center-to-center spacing between a follower and its leader.
    pub fn headway(&self, follower: &str, leader: &str) -> f64 {
        let len = |c: &str| self.catalog.get(c).map_or(0.0, |a| a.dx);
        self.params.min_gap + 0.5 * (len(follower) + len(leader))
    }

    fn check_spawn_points(&self, spawn_points: &[SpawnPoint]) -> Result<(), ScenarioError> {
        for (index, sp) in spawn_points.iter().enumerate() {
            let geom = self.loops.get(&sp.path_id).ok_or_else(|| ScenarioError::UnknownPath(sp.path_id.clone()))?;
            if !(sp.arc_offset >= 0.0 && sp.arc_offset < geom.length()) {
                return Err(ScenarioError::InvalidSpawnPoint { index, path: sp.path_id.clone() });
            }
        }
        Ok(())
    }

    /// Places `distribution.actors` actors on distinct spawn points with
    /// classes drawn i.i.d. from the normalized weights. Track ids are 1..=n.
    pub fn spawn_actors(
        &self,
        spawn_points: &[SpawnPoint],
        distribution: &ClassDistribution,
        seed: u64,
    ) -> Result<WorldState, ScenarioError> {
        let n = distribution.actors;
        if n > spawn_points.len() {
            return Err(ScenarioError::TooManyActors { requested: n, available: spawn_points.len() });
        }
        let weights = distribution.normalized()?;
        for (class, w) in &weights {
            if *w > 0.0 && !self.catalog.contains_key(class) {
                return Err(ScenarioError::UnknownClass(class.clone()));
            }
        }
        self.check_spawn_points(spawn_points)?;

        let mut rng = keyed(seed, Domain::Spawn, 0);
        let picker = WeightedIndex::new(weights.iter().map(|(_, w)| *w)).map_err(|_| ScenarioError::InvalidDistribution)?;
        let mut chosen = sample(&mut rng, spawn_points.len(), n).into_vec();
        chosen.sort_unstable();
        let actors = chosen
            .into_iter()
            .enumerate()
            .map(|(i, sp_index)| {
                let sp = &spawn_points[sp_index];
                let class = weights[picker.sample(&mut rng)].0.clone();
                let (position, heading) = self.loops[&sp.path_id].pose_at(sp.arc_offset);
                ActorState {
                    track_id: i as u32 + 1,
                    class,
                    path_id: sp.path_id.clone(),
                    arc: sp.arc_offset,
                    speed: 0.0,
                    position,
                    heading,
                    stalled_for: 0.0,
                }
            })
            .collect();
        Ok(WorldState { time: 0.0, step: 0, actors })
    }

    /// Advances every actor by one step of `dt` seconds.
    ///
    /// Each actor's advance starts at `min(cruise, speed_limit)·dt`. A red
    /// signal ahead holds it `stop_distance` short of the stop node (zero if
    /// already inside that zone). Then, per loop, advances are lowered until
    /// every follower ends at least one headway behind its leader's new
    /// position.
    pub fn step(&self, world: &WorldState, dt: f64) -> Result<WorldState, ScenarioError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ScenarioError::InvalidStep);
        }
        let mut advance: Vec<f64> = Vec::with_capacity(world.actors.len());
        for actor in &world.actors {
            let geom = self.loops.get(&actor.path_id).ok_or_else(|| ScenarioError::UnknownPath(actor.path_id.clone()))?;
            let class = self.catalog.get(&actor.class).ok_or_else(|| ScenarioError::UnknownClass(actor.class.clone()))?;
            let mut a = class.cruise_speed.min(geom.speed_limit) * dt;
            for signal in self.signals.iter().filter(|s| s.path_id == actor.path_id) {
                if signal_phase(signal, world.time) == Phase::Red {
                    let d = geom.ahead(actor.arc, signal.stop_arc);
                    let stop = self.params.stop_distance;
                    a = if d > 0.0 && d <= stop { 0.0 } else if d > stop { a.min(d - stop) } else { a };
                }
            }
            advance.push(a);
        }

        // headway resolution, loop by loop
        let mut by_loop: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, actor) in world.actors.iter().enumerate() {
            by_loop.entry(actor.path_id.as_str()).or_default().push(i);
        }
        for (path, mut members) in by_loop {
            if members.len() < 2 {
                continue;
            }
            let geom = &self.loops[path];
            let actors = &world.actors;
            members.sort_by(|&a, &b| actors[a].arc.total_cmp(&actors[b].arc).then(actors[a].track_id.cmp(&actors[b].track_id)));
            let k = members.len();
            let leader_of = |j: usize| members[(j + 1) % k];
            let gaps: Vec<f64> = (0..k)
                .map(|j| {
                    let (f, l) = (members[j], leader_of(j));
                    let g = geom.ahead(actors[f].arc, actors[l].arc);
                    // the last actor in arc order wraps around to the first
                    if g == 0.0 && j == k - 1 { geom.length() } else { g }
                })
                .collect();
            let headways: Vec<f64> = (0..k).map(|j| self.headway(&actors[members[j]].class, &actors[leader_of(j)].class)).collect();
            let mut settled = false;
            for _ in 0..(4 * k + 8) {
                let mut changed = false;
                for j in (0..k).rev() {
                    let (f, l) = (members[j], leader_of(j));
                    let limit = (gaps[j] + advance[l] - headways[j]).max(0.0);
                    if advance[f] > limit {
                        advance[f] = limit;
                        changed = true;
                    }
                }
                if !changed {
                    settled = true;
                    break;
                }
            }
            if !settled {
                // overfull ring: nobody can move without closing a gap
                for &m in &members {
                    advance[m] = 0.0;
                }
            }
        }

        let actors = world
            .actors
            .iter()
            .zip(&advance)
            .map(|(actor, &a)| {
                let geom = &self.loops[&actor.path_id];
                let arc = geom.wrap(actor.arc + a);
                let (position, heading) = geom.pose_at(arc);
                ActorState {
                    arc,
                    speed: a / dt,
                    position,
                    heading,
                    stalled_for: if a > 0.0 { 0.0 } else { actor.stalled_for + dt },
                    ..actor.clone()
                }
            })
            .collect();
        Ok(WorldState { time: world.time + dt, step: world.step + 1, actors })
    }
}

/// Traffic part of the scene configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub paths: Vec<PathLoop>,
    pub spawn_points: Vec<SpawnPoint>,
    pub distribution: Option<ClassDistribution>,
    pub catalog: Vec<ActorClass>,
    pub signals: Vec<SignalController>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    LoopNotClosed { path_id: String, reason: String },
    OverlappingSpawnPoints { path_id: String, arc_offset: f64, indices: Vec<usize> },
    Deadlock { track_id: u32, path_id: String, stalled_seconds: f64 },
    InvalidScenario { message: String },
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Finding::LoopNotClosed { path_id, reason } => write!(f, "loop-closure violation on '{path_id}': {reason}"),
            Finding::OverlappingSpawnPoints { path_id, arc_offset, indices } => {
                write!(f, "overlapping spawn points {indices:?} on '{path_id}' at arc {arc_offset}")
            }
            Finding::Deadlock { track_id, path_id, stalled_seconds } => {
                write!(f, "deadlock: actor {track_id} on '{path_id}' stationary for {stalled_seconds:.1} s")
            }
            Finding::InvalidScenario { message } => write!(f, "invalid scenario: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub steps_run: usize,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationParams {
    pub steps: usize,
    pub dt: f64,
    /// an actor stationary for longer than this is reported as deadlocked
    pub deadlock_seconds: f64,
    pub traffic: TrafficParams,
}

impl Default for ValidationParams {
    fn default() -> Self {
        ValidationParams {
            steps: 1200,
            dt: DEFAULT_DT,
            deadlock_seconds: DEFAULT_DEADLOCK_SECONDS,
            traffic: TrafficParams::default(),
        }
    }
}

/// Headless warm-up run that looks for broken loops, stacked spawn points
/// and stalled traffic. Problems are returned as findings, not errors.
pub fn validate_scenario(config: &TrafficConfig, seed: u64, params: &ValidationParams) -> ValidationReport {
    let mut findings = Vec::new();
    let mut usable = Vec::new();
    for p in &config.paths {
        match p.closure_problem() {
            Some(reason) => findings.push(Finding::LoopNotClosed { path_id: p.id.clone(), reason }),
            None => usable.push(p.clone()),
        }
    }

    let mut groups: BTreeMap<(String, u64), Vec<usize>> = BTreeMap::new();
    for (i, sp) in config.spawn_points.iter().enumerate() {
        let bucket = (sp.arc_offset / SPAWN_OVERLAP_TOLERANCE).round() as u64;
        groups.entry((sp.path_id.clone(), bucket)).or_default().push(i);
    }
    for ((path_id, _), indices) in groups {
        if indices.len() > 1 {
            let arc_offset = config.spawn_points[indices[0]].arc_offset;
            findings.push(Finding::OverlappingSpawnPoints { path_id, arc_offset, indices });
        }
    }

    let usable_ids: Vec<&str> = usable.iter().map(|p| p.id.as_str()).collect();
    let signals: Vec<SignalController> =
        config.signals.iter().filter(|s| usable_ids.contains(&s.path_id.as_str())).cloned().collect();
    let spawn_points: Vec<SpawnPoint> =
        config.spawn_points.iter().filter(|s| usable_ids.contains(&s.path_id.as_str())).cloned().collect();

    let scenario = match Scenario::new(&usable, &signals, &config.catalog, params.traffic) {
        Ok(s) => s,
        Err(e) => {
            findings.push(Finding::InvalidScenario { message: e.to_string() });
            return ValidationReport { steps_run: 0, findings };
        }
    };
    let Some(distribution) = &config.distribution else {
        return ValidationReport { steps_run: 0, findings };
    };
    let mut world = match scenario.spawn_actors(&spawn_points, distribution, seed) {
        Ok(w) => w,
        Err(e) => {
            findings.push(Finding::InvalidScenario { message: e.to_string() });
            return ValidationReport { steps_run: 0, findings };
        }
    };

    let mut flagged: BTreeMap<u32, Finding> = BTreeMap::new();
    let mut steps_run = 0;
    for _ in 0..params.steps {
        world = match scenario.step(&world, params.dt) {
            Ok(w) => w,
            Err(e) => {
                findings.push(Finding::InvalidScenario { message: e.to_string() });
                break;
            }
        };
        steps_run += 1;
        for a in &world.actors {
            if a.stalled_for > params.deadlock_seconds {
                flagged.insert(
                    a.track_id,
                    Finding::Deadlock { track_id: a.track_id, path_id: a.path_id.clone(), stalled_seconds: a.stalled_for },
                );
            }
        }
    }
    findings.extend(flagged.into_values());
    ValidationReport { steps_run, findings }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn square_loop(id: &str, side: f64) -> PathLoop {
        PathLoop {
            id: id.into(),
            waypoints: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(side, 0.0, 0.0),
                Vec3::new(side, side, 0.0),
                Vec3::new(0.0, side, 0.0),
                Vec3::new(0.0, 0.0, 0.0),
            ],
            speed_limit: 15.0,
        }
    }

    fn car(speed: f64) -> ActorClass {
        ActorClass { class: "car".into(), dx: 4.0, dy: 2.0, dz: 1.5, cruise_speed: speed, semantic_id: None }
    }

    fn only_cars(n: usize) -> ClassDistribution {
        ClassDistribution { actors: n, weights: BTreeMap::from([("car".to_string(), 1.0)]) }
    }

    fn spawn(path: &str, arcs: &[f64]) -> Vec<SpawnPoint> {
        arcs.iter().map(|&a| SpawnPoint { path_id: path.into(), arc_offset: a }).collect()
    }

    #[test]
    fn signal_phase_examples() {
        let s = SignalController { path_id: "a".into(), stop_arc: 0.0, green: 10.0, red: 10.0, offset: 0.0 };
        assert_eq!(signal_phase(&s, 5.0), Phase::Green);
        assert_eq!(signal_phase(&s, 10.0), Phase::Red);
        assert_eq!(signal_phase(&s, 0.0), Phase::Green);
        let shifted = SignalController { offset: 10.0, ..s.clone() };
        for i in 0..400 {
            let t = i as f64 * 0.25;
            assert_eq!(signal_phase(&shifted, t), signal_phase(&s, t + 10.0));
        }
    }

    #[test]
    fn pose_follows_polyline() {
        let g = LoopGeometry::new(&square_loop("a", 10.0));
        assert_eq!(g.length(), 40.0);
        let (p, h) = g.pose_at(15.0);
        assert!(p.distance(Vec3::new(10.0, 5.0, 0.0)) < 1e-12);
        assert!((h - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let (p, _) = g.pose_at(41.0);
        assert!(p.distance(Vec3::new(1.0, 0.0, 0.0)) < 1e-12);
        assert_eq!(g.ahead(39.0, 1.0), 2.0);
    }

    #[test]
    fn open_loop_rejected() {
        let mut p = square_loop("a", 10.0);
        p.waypoints.pop();
        assert!(p.closure_problem().is_some());
        assert!(matches!(Scenario::new(&[p], &[], &[], TrafficParams::default()), Err(ScenarioError::InvalidLoop { .. })));
    }

    #[test]
    fn single_actor_kinematics() {
        let sc = Scenario::new(&[square_loop("a", 10.0)], &[], &[car(10.0)], TrafficParams::default()).unwrap();
        let w = sc.spawn_actors(&spawn("a", &[2.0]), &only_cars(1), 1).unwrap();
        let w = sc.step(&w, 0.1).unwrap();
        assert!((w.actors[0].arc - 3.0).abs() < 1e-12);
        assert!((w.actors[0].speed - 10.0).abs() < 1e-9);
    }

    #[test]
    fn speed_limit_caps_cruise() {
        let mut p = square_loop("a", 10.0);
        p.speed_limit = 5.0;
        let sc = Scenario::new(&[p], &[], &[car(10.0)], TrafficParams::default()).unwrap();
        let w = sc.spawn_actors(&spawn("a", &[0.0]), &only_cars(1), 1).unwrap();
        let w = sc.step(&w, 0.1).unwrap();
        assert!((w.actors[0].arc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn red_signal_holds_actor_until_green() {
        let signal = SignalController { path_id: "a".into(), stop_arc: 10.0, green: 5.0, red: 5.0, offset: 5.0 };
        let sc = Scenario::new(&[square_loop("a", 10.0)], std::slice::from_ref(&signal), &[car(10.0)], TrafficParams::default()).unwrap();
        let mut w = sc.spawn_actors(&spawn("a", &[9.0]), &only_cars(1), 1).unwrap();
        assert_eq!(signal_phase(&signal, 0.0), Phase::Red);
        while signal_phase(&signal, w.time) == Phase::Red {
            w = sc.step(&w, 0.1).unwrap();
            assert_eq!(w.actors[0].speed, 0.0);
            assert_eq!(w.actors[0].arc, 9.0);
        }
        w = sc.step(&w, 0.1).unwrap();
        assert!(w.actors[0].speed > 0.0);
    }

    #[test]
    fn approaching_actor_stops_short_of_red_node() {
        let signal = SignalController { path_id: "a".into(), stop_arc: 20.0, green: 1.0, red: 1000.0, offset: 1.0 };
        let sc = Scenario::new(&[square_loop("a", 10.0)], &[signal], &[car(10.0)], TrafficParams::default()).unwrap();
        let mut w = sc.spawn_actors(&spawn("a", &[0.0]), &only_cars(1), 1).unwrap();
        for _ in 0..100 {
            w = sc.step(&w, 0.1).unwrap();
        }
        assert!((w.actors[0].arc - 17.0).abs() < 1e-9);
    }

    #[test]
    fn spawn_errors() {
        let sc = Scenario::new(&[square_loop("a", 10.0)], &[], &[car(10.0)], TrafficParams::default()).unwrap();
        assert_eq!(
            sc.spawn_actors(&spawn("a", &[0.0]), &only_cars(2), 1).unwrap_err(),
            ScenarioError::TooManyActors { requested: 2, available: 1 }
        );
        let zero = ClassDistribution { actors: 1, weights: BTreeMap::from([("car".to_string(), 0.0)]) };
        assert_eq!(sc.spawn_actors(&spawn("a", &[0.0]), &zero, 1).unwrap_err(), ScenarioError::InvalidDistribution);
        let bus = ClassDistribution { actors: 1, weights: BTreeMap::from([("bus".to_string(), 1.0)]) };
        assert_eq!(sc.spawn_actors(&spawn("a", &[0.0]), &bus, 1).unwrap_err(), ScenarioError::UnknownClass("bus".into()));
        assert!(matches!(
            sc.spawn_actors(&spawn("a", &[40.0]), &only_cars(1), 1),
            Err(ScenarioError::InvalidSpawnPoint { index: 0, .. })
        ));
    }

    #[test]
    fn point_mass_distribution_and_determinism() {
        let sc = Scenario::new(&[square_loop("a", 100.0)], &[], &[car(10.0)], TrafficParams::default()).unwrap();
        let points = spawn("a", &(0..40).map(|i| i as f64 * 10.0).collect::<Vec<_>>());
        let a = sc.spawn_actors(&points, &only_cars(20), 42).unwrap();
        let b = sc.spawn_actors(&points, &only_cars(20), 42).unwrap();
        assert_eq!(a, b);
        assert!(a.actors.iter().all(|x| x.class == "car"));
        let mut arcs: Vec<f64> = a.actors.iter().map(|x| x.arc).collect();
        arcs.dedup();
        assert_eq!(arcs.len(), 20);
    }

    #[test]
    fn follower_keeps_headway() {
        let sc = Scenario::new(
            &[square_loop("a", 25.0)],
            &[],
            &[car(12.0), ActorClass { class: "truck".into(), dx: 8.0, dy: 2.5, dz: 3.0, cruise_speed: 4.0, semantic_id: None }],
            TrafficParams::default(),
        )
        .unwrap();
        let dist = ClassDistribution {
            actors: 2,
            weights: BTreeMap::from([("car".to_string(), 1.0), ("truck".to_string(), 1.0)]),
        };
        let mut w = sc.spawn_actors(&spawn("a", &[0.0, 20.0]), &dist, 3).unwrap();
        let g = sc.loop_geometry("a").unwrap();
        for _ in 0..2000 {
            w = sc.step(&w, 0.1).unwrap();
            let (a, b) = (&w.actors[0], &w.actors[1]);
            let h = sc.headway(&a.class, &b.class);
            let gap = g.ahead(a.arc, b.arc).min(g.ahead(b.arc, a.arc));
            assert!(gap >= h - 1e-9, "gap {gap} < headway {h}");
        }
    }

    #[test]
    fn validation_findings() {
        let cfg = TrafficConfig {
            paths: vec![square_loop("a", 50.0), square_loop("b", 30.0)],
            spawn_points: vec![
                SpawnPoint { path_id: "a".into(), arc_offset: 0.0 },
                SpawnPoint { path_id: "a".into(), arc_offset: 50.0 },
                SpawnPoint { path_id: "b".into(), arc_offset: 10.0 },
            ],
            distribution: Some(only_cars(3)),
            catalog: vec![car(8.0)],
            signals: vec![SignalController { path_id: "a".into(), stop_arc: 100.0, green: 20.0, red: 20.0, offset: 0.0 }],
        };
        let params = ValidationParams { steps: 600, ..Default::default() };
        let report = validate_scenario(&cfg, 1, &params);
        assert!(report.is_clean(), "{:?}", report.findings);

        let mut stacked = cfg.clone();
        stacked.spawn_points.push(SpawnPoint { path_id: "b".into(), arc_offset: 10.0 });
        let report = validate_scenario(&stacked, 1, &params);
        assert!(matches!(report.findings[..], [Finding::OverlappingSpawnPoints { .. }]), "{:?}", report.findings);

        let mut open = cfg.clone();
        open.paths[1].waypoints.pop();
        let report = validate_scenario(&open, 1, &params);
        assert!(report.findings.iter().any(|f| matches!(f, Finding::LoopNotClosed { path_id, .. } if path_id == "b")));
    }

    #[test]
    fn starved_signal_is_reported_as_deadlock() {
        let cfg = TrafficConfig {
            paths: vec![square_loop("a", 50.0)],
            spawn_points: (0..3).map(|i| SpawnPoint { path_id: "a".into(), arc_offset: 10.0 * i as f64 }).collect(),
            distribution: Some(only_cars(3)),
            catalog: vec![car(8.0)],
            signals: vec![SignalController { path_id: "a".into(), stop_arc: 100.0, green: 1e-3, red: 1e6, offset: 1e-3 }],
        };
        let report = validate_scenario(&cfg, 1, &ValidationParams { steps: 1200, ..Default::default() });
        let stalled = report.findings.iter().filter(|f| matches!(f, Finding::Deadlock { .. })).count();
        assert_eq!(stalled, 3, "{:?}", report.findings);
    }
}
