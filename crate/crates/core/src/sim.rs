//! Seeded agent-based flock simulator.
//!
//! Animals live in a `width × height` arena with a pen on the left
//! (`0.15·w, 0.5·h`) and a field to the right (`0.6·w, 0.5·h`). Time advances
//! in 1 s steps. Each step, every animal `i` first draws a desired speed
//!
//! ```text
//! z_c ← ρ z_c + √(1−ρ²) N(0,1)              shared by the flock
//! e_i ← ρ e_i + √(1−ρ²) N(0,1)              per animal
//! s_i = max(0, mean_speed + speed_std · (√c z_c + √(1−c) e_i))
//! ```
//!
//! with `ρ = 0.95` and common share `c = 0.5`, then steers by regime:
//!
//! * **NotActive**: anchors are drawn uniformly in a disc of radius
//!   `cohesion_radius` around the flock centroid when the block starts.
//!   `v_i = cohesion_weight · (anchor_i − p_i)` (capped at 1.5 m/s) plus a
//!   wander term `s_i · (cos θ_i, sin θ_i)` with `θ_i ← θ_i + N(0, 0.5²)`.
//! * **Active**: random waypoints uniform in a disc of radius
//!   `cohesion_radius` around the field. `v_i = s_i · unit(w_i − p_i)`; a new
//!   waypoint is drawn once the animal is within `max(1, s_i)` of it.
//! * **HerdMovement**: the flock is driven along a straight corridor from
//!   its starting centroid `c₀` towards the far site (pen or field). With `d`
//!   the corridor direction and `n` its normal, `a_i`, `l_i` the along and
//!   lateral coordinates relative to `c₀` and `ā` the flock mean of `a_i`:
//!   `v_i = d · (s_i + cohesion_weight · (ā − a_i))
//!        + n · (0.3 N(0,1) − 0.5 · (l_i − clamp(l_i, ±corridor_width/2)))`.
//!
//! Every regime then adds repulsion
//! `repulsion_weight · Σ_{j: r_ij < 2} (p_i − p_j)/r_ij · (2 − r_ij)/2` and
//! alignment `v_i ← (1 − alignment_weight) v_i + alignment_weight · v̄`.
//! Positions integrate as `p_i += v_i` and reflect off the arena walls.
//! Reported positions add independent `N(0, noise_std²)` jitter per axis,
//! reflected into the arena as well.

use crate::error::{Error, Result};
use crate::pipeline::{align_flock, ActivityLabel, FlockDataset, LabelInterval, Sample, Split, Trajectory};
use crate::rng::{derive_seed, Rng};

const SPEED_PERSISTENCE: f64 = 0.95;
const COMMON_SHARE: f64 = 0.5;
const CATCH_UP_SPEED: f64 = 1.5;
const HEADING_STEP: f64 = 0.5;
const REPULSION_RANGE: f64 = 2.0;
const LATERAL_JITTER: f64 = 0.3;
const WALL_GAIN: f64 = 0.5;
const SITE_MARGIN: f64 = 5.0;
/// Herding bouts per simulated day.
const HERD_BOUTS: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeParams {
    pub mean_speed: f64,
    pub speed_std: f64,
    pub cohesion_radius: f64,
    pub alignment_weight: f64,
    pub cohesion_weight: f64,
    pub repulsion_weight: f64,
    /// Herd regime only.
    pub corridor_width: f64,
}

impl RegimeParams {
    fn validate(&self, name: &str) -> Result<()> {
        let fields = [
            self.mean_speed,
            self.speed_std,
            self.cohesion_radius,
            self.alignment_weight,
            self.cohesion_weight,
            self.repulsion_weight,
            self.corridor_width,
        ];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(format!("{name} regime parameters must be finite and nonnegative")));
        }
        if self.alignment_weight > 1.0 {
            return Err(Error::Config(format!("{name} alignment_weight must be at most 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regimes {
    pub not_active: RegimeParams,
    pub active: RegimeParams,
    pub herd: RegimeParams,
}

impl Regimes {
    pub fn get(&self, label: ActivityLabel) -> &RegimeParams {
        match label {
            ActivityLabel::NotActive => &self.not_active,
            ActivityLabel::Active => &self.active,
            ActivityLabel::HerdMovement => &self.herd,
        }
    }

    pub fn get_mut(&mut self, label: ActivityLabel) -> &mut RegimeParams {
        match label {
            ActivityLabel::NotActive => &mut self.not_active,
            ActivityLabel::Active => &mut self.active,
            ActivityLabel::HerdMovement => &mut self.herd,
        }
    }
}

impl Default for Regimes {
    fn default() -> Self {
        Regimes {
            not_active: RegimeParams {
                mean_speed: 0.02,
                speed_std: 0.01,
                cohesion_radius: 15.0,
                alignment_weight: 0.0,
                cohesion_weight: 0.1,
                repulsion_weight: 0.0,
                corridor_width: 0.0,
            },
            active: RegimeParams {
                mean_speed: 1.0,
                speed_std: 0.5,
                cohesion_radius: 60.0,
                alignment_weight: 0.0,
                cohesion_weight: 0.0,
                repulsion_weight: 0.5,
                corridor_width: 0.0,
            },
            herd: RegimeParams {
                mean_speed: 1.2,
                speed_std: 0.5,
                cohesion_radius: 6.0,
                alignment_weight: 0.0,
                cohesion_weight: 0.1,
                repulsion_weight: 0.5,
                corridor_width: 8.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_animals: usize,
    /// Seconds; must equal the schedule total.
    pub duration: u64,
    pub seed: u64,
    /// `(width, height)` in meters.
    pub arena: (f64, f64),
    pub regime_schedule: Vec<(u64, ActivityLabel)>,
    /// Meters of positional jitter per axis.
    pub noise_std: f64,
    pub regimes: Regimes,
    pub start_time: i64,
}

/// Label shares of the training day: not active, active, herd.
pub const TRAIN_SHARES: [f64; 3] = [0.3755, 0.6168, 0.0078];
/// Label shares of the test day.
pub const TEST_SHARES: [f64; 3] = [0.4196, 0.5710, 0.0094];

pub const DEFAULT_DAY_STEPS: u64 = 20_000;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_animals: 36,
            duration: DEFAULT_DAY_STEPS,
            seed: 0,
            arena: (300.0, 200.0),
            regime_schedule: skewed_schedule(DEFAULT_DAY_STEPS, TRAIN_SHARES, 0),
            noise_std: 0.02,
            regimes: Regimes::default(),
            start_time: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_animals == 0 {
            return Err(Error::Config("n_animals must be positive".into()));
        }
        if self.duration == 0 {
            return Err(Error::Config("duration must be positive".into()));
        }
        let (w, h) = self.arena;
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(Error::Config(format!("arena must be positive, got {w} x {h}")));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Config("noise_std must be finite and nonnegative".into()));
        }
        if self.regime_schedule.is_empty() {
            return Err(Error::Config("regime schedule is empty".into()));
        }
        if self.regime_schedule.iter().any(|(d, _)| *d == 0) {
            return Err(Error::Config("regime schedule contains a zero-length block".into()));
        }
        let total: u64 = self.regime_schedule.iter().map(|(d, _)| d).sum();
        if total != self.duration {
            return Err(Error::Config(format!(
                "regime schedule sums to {total} s but duration is {} s",
                self.duration
            )));
        }
        self.regimes.not_active.validate("not_active")?;
        self.regimes.active.validate("active")?;
        self.regimes.herd.validate("herd")?;
        Ok(())
    }

    fn pen(&self) -> [f64; 2] {
        [0.15 * self.arena.0, 0.5 * self.arena.1]
    }

    fn field(&self) -> [f64; 2] {
        [0.6 * self.arena.0, 0.5 * self.arena.1]
    }
}

/// A day's schedule: rest, then grazing and resting in alternation, with
/// each herding bout entered from and left into grazing so that no rest
/// boundary singles it out. Block lengths jitter with `seed` while class
/// totals match `shares` (rounded, remainder to not active).
pub fn skewed_schedule(total: u64, shares: [f64; 3], seed: u64) -> Vec<(u64, ActivityLabel)> {
    use ActivityLabel::*;
    let herd = (total as f64 * shares[2]).round() as u64;
    let active = (total as f64 * shares[1]).round() as u64;
    let rest = total.saturating_sub(herd + active);
    let mut rng = Rng::new(seed);
    let herd_parts = split_evenly(herd, HERD_BOUTS);
    let active_parts = split_jittered(active, 2 * HERD_BOUTS as usize, &mut rng);
    let rest_parts = split_jittered(rest, HERD_BOUTS as usize, &mut rng);
    // repeated [rest, graze, herd, graze]
    let blocks = (0..HERD_BOUTS as usize).flat_map(|b| {
        [
            (rest_parts[b], NotActive),
            (active_parts[2 * b], Active),
            (herd_parts[b], HerdMovement),
            (active_parts[2 * b + 1], Active),
        ]
    });
    let mut out: Vec<(u64, ActivityLabel)> = Vec::new();
    for (d, l) in blocks {
        if d == 0 {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.1 == l => last.0 += d,
            _ => out.push((d, l)),
        }
    }
    out
}

fn split_evenly(total: u64, parts: u64) -> Vec<u64> {
    (0..parts).map(|i| total / parts + u64::from(i < total % parts)).collect()
}

fn split_jittered(total: u64, parts: usize, rng: &mut Rng) -> Vec<u64> {
    let weights: Vec<f64> = (0..parts).map(|_| 0.7 + 0.6 * rng.next_f64()).collect();
    let sum: f64 = weights.iter().sum();
    let mut out: Vec<u64> = weights.iter().map(|w| (total as f64 * w / sum).floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    out[parts - 1] += total - assigned;
    out
}

pub fn animal_ids(n: usize) -> Vec<String> {
    let width = n.to_string().len().max(2);
    (1..=n).map(|i| format!("sheep{i:0width$}")).collect()
}

struct Flock {
    pos: Vec<[f64; 2]>,
    vel: Vec<[f64; 2]>,
    speed_common: f64,
    speed_own: Vec<f64>,
    heading: Vec<f64>,
    targets: Vec<[f64; 2]>,
    corridor: Option<([f64; 2], [f64; 2])>,
}

fn reflect(v: f64, hi: f64) -> f64 {
    let period = 2.0 * hi;
    let mut r = v.rem_euclid(period);
    if r > hi {
        r = period - r;
    }
    r
}

fn centroid_of(pos: &[[f64; 2]]) -> [f64; 2] {
    let n = pos.len() as f64;
    let (sx, sy) = pos.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    [sx / n, sy / n]
}

fn point_in_disc(rng: &mut Rng, center: [f64; 2], radius: f64) -> [f64; 2] {
    let r = radius * rng.next_f64().sqrt();
    let th = std::f64::consts::TAU * rng.next_f64();
    [center[0] + r * th.cos(), center[1] + r * th.sin()]
}

impl Flock {
    fn start_block(&mut self, label: ActivityLabel, cfg: &SimConfig, rng: &mut Rng) {
        let params = cfg.regimes.get(label);
        let c = centroid_of(&self.pos);
        self.corridor = None;
        match label {
            ActivityLabel::NotActive => {
                for t in self.targets.iter_mut() {
                    *t = point_in_disc(rng, c, params.cohesion_radius);
                }
            }
            ActivityLabel::Active => {
                for t in self.targets.iter_mut() {
                    *t = self::waypoint(rng, cfg);
                }
            }
            ActivityLabel::HerdMovement => {
                let (pen, field) = (cfg.pen(), cfg.field());
                let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                let dest = if dist(c, pen) < dist(c, field) { field } else { pen };
                let (dx, dy) = (dest[0] - c[0], dest[1] - c[1]);
                let len = (dx * dx + dy * dy).sqrt();
                let d = if len > 1e-9 { [dx / len, dy / len] } else { [1.0, 0.0] };
                self.corridor = Some((c, d));
            }
        }
    }

    fn step(&mut self, label: ActivityLabel, cfg: &SimConfig, rng: &mut Rng) {
        let params = *cfg.regimes.get(label);
        let n = self.pos.len();
        let innov = (1.0 - SPEED_PERSISTENCE * SPEED_PERSISTENCE).sqrt();
        self.speed_common = SPEED_PERSISTENCE * self.speed_common + innov * rng.normal();
        let mut speeds = Vec::with_capacity(n);
        for e in self.speed_own.iter_mut() {
            *e = SPEED_PERSISTENCE * *e + innov * rng.normal();
            let z = COMMON_SHARE.sqrt() * self.speed_common + (1.0 - COMMON_SHARE).sqrt() * *e;
            speeds.push((params.mean_speed + params.speed_std * z).max(0.0));
        }

        let mut vel = vec![[0.0; 2]; n];
        match label {
            ActivityLabel::NotActive => {
                for i in 0..n {
                    let mut pull = [
                        params.cohesion_weight * (self.targets[i][0] - self.pos[i][0]),
                        params.cohesion_weight * (self.targets[i][1] - self.pos[i][1]),
                    ];
                    let mag = (pull[0] * pull[0] + pull[1] * pull[1]).sqrt();
                    if mag > CATCH_UP_SPEED {
                        pull = [pull[0] * CATCH_UP_SPEED / mag, pull[1] * CATCH_UP_SPEED / mag];
                    }
                    self.heading[i] += HEADING_STEP * rng.normal();
                    vel[i] = [
                        pull[0] + speeds[i] * self.heading[i].cos(),
                        pull[1] + speeds[i] * self.heading[i].sin(),
                    ];
                }
            }
            ActivityLabel::Active => {
                for i in 0..n {
                    let (dx, dy) = (self.targets[i][0] - self.pos[i][0], self.targets[i][1] - self.pos[i][1]);
                    let dist = (dx * dx + dy * dy).sqrt();
                    if dist < speeds[i].max(1.0) {
                        self.targets[i] = waypoint(rng, cfg);
                    }
                    let (dx, dy) = (self.targets[i][0] - self.pos[i][0], self.targets[i][1] - self.pos[i][1]);
                    let dist = (dx * dx + dy * dy).sqrt().max(1e-9);
                    vel[i] = [speeds[i] * dx / dist, speeds[i] * dy / dist];
                }
            }
            ActivityLabel::HerdMovement => {
                let (c0, d) = self.corridor.expect("corridor set at block start");
                let nrm = [-d[1], d[0]];
                let along: Vec<f64> = self
                    .pos
                    .iter()
                    .map(|p| (p[0] - c0[0]) * d[0] + (p[1] - c0[1]) * d[1])
                    .collect();
                let mean_along = along.iter().sum::<f64>() / n as f64;
                let half = 0.5 * params.corridor_width;
                for i in 0..n {
                    let lat = (self.pos[i][0] - c0[0]) * nrm[0] + (self.pos[i][1] - c0[1]) * nrm[1];
                    let fwd = speeds[i] + params.cohesion_weight * (mean_along - along[i]);
                    let side = LATERAL_JITTER * rng.normal() - WALL_GAIN * (lat - lat.clamp(-half, half));
                    vel[i] = [d[0] * fwd + nrm[0] * side, d[1] * fwd + nrm[1] * side];
                }
            }
        }

        if params.repulsion_weight > 0.0 {
            let mut push = vec![[0.0; 2]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let (dx, dy) = (self.pos[i][0] - self.pos[j][0], self.pos[i][1] - self.pos[j][1]);
                    let r = (dx * dx + dy * dy).sqrt();
                    if r < REPULSION_RANGE && r > 1e-9 {
                        let s = params.repulsion_weight * (REPULSION_RANGE - r) / REPULSION_RANGE / r;
                        push[i][0] += s * dx;
                        push[i][1] += s * dy;
                        push[j][0] -= s * dx;
                        push[j][1] -= s * dy;
                    }
                }
            }
            for (v, p) in vel.iter_mut().zip(&push) {
                v[0] += p[0];
                v[1] += p[1];
            }
        }
        if params.alignment_weight > 0.0 {
            let mean = centroid_of(&vel);
            let a = params.alignment_weight;
            for v in vel.iter_mut() {
                v[0] = (1.0 - a) * v[0] + a * mean[0];
                v[1] = (1.0 - a) * v[1] + a * mean[1];
            }
        }

        let (w, h) = cfg.arena;
        for i in 0..n {
            let nx = self.pos[i][0] + vel[i][0];
            let ny = self.pos[i][1] + vel[i][1];
            let (rx, ry) = (reflect(nx, w), reflect(ny, h));
            self.vel[i] = [rx - self.pos[i][0], ry - self.pos[i][1]];
            self.pos[i] = [rx, ry];
        }
    }
}

fn waypoint(rng: &mut Rng, cfg: &SimConfig) -> [f64; 2] {
    let (w, h) = cfg.arena;
    let radius = cfg.regimes.active.cohesion_radius;
    let p = point_in_disc(rng, cfg.field(), radius);
    let mx = SITE_MARGIN.min(0.5 * w);
    let my = SITE_MARGIN.min(0.5 * h);
    [p[0].clamp(mx, w - mx), p[1].clamp(my, h - my)]
}

/// Run the simulator. Returns one trajectory per animal (ids `sheep01`,
/// `sheep02`, …) and one label interval per schedule block.
pub fn simulate(cfg: &SimConfig) -> Result<(Vec<Trajectory>, Vec<LabelInterval>)> {
    cfg.validate()?;
    let n = cfg.n_animals;
    let mut init_rng = Rng::new(derive_seed(cfg.seed, 0));
    let mut dyn_rng = Rng::new(derive_seed(cfg.seed, 1));
    let mut obs_rng = Rng::new(derive_seed(cfg.seed, 2));

    let start_site = match cfg.regime_schedule[0].1 {
        ActivityLabel::Active => cfg.field(),
        _ => cfg.pen(),
    };
    let start_radius = cfg.regimes.not_active.cohesion_radius.max(1.0);
    let pos: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let p = point_in_disc(&mut init_rng, start_site, start_radius);
            [reflect(p[0], cfg.arena.0), reflect(p[1], cfg.arena.1)]
        })
        .collect();
    let mut flock = Flock {
        vel: vec![[0.0; 2]; n],
        speed_common: init_rng.normal(),
        speed_own: (0..n).map(|_| init_rng.normal()).collect(),
        heading: (0..n).map(|_| std::f64::consts::TAU * init_rng.next_f64()).collect(),
        targets: pos.clone(),
        corridor: None,
        pos,
    };

    let steps = cfg.duration as usize;
    let mut samples: Vec<Vec<Sample>> = vec![Vec::with_capacity(steps); n];
    let mut labels = Vec::with_capacity(cfg.regime_schedule.len());
    let mut t = cfg.start_time;
    let (w, h) = cfg.arena;
    for &(dur, label) in &cfg.regime_schedule {
        labels.push(LabelInterval {
            t_start: t,
            t_end: t + dur as i64,
            activity: label,
        });
        flock.start_block(label, cfg, &mut dyn_rng);
        for _ in 0..dur {
            for (i, p) in flock.pos.iter().enumerate() {
                let x = reflect(p[0] + cfg.noise_std * obs_rng.normal(), w);
                let y = reflect(p[1] + cfg.noise_std * obs_rng.normal(), h);
                samples[i].push(Sample { t, x, y, imputed: false });
            }
            flock.step(label, cfg, &mut dyn_rng);
            t += 1;
        }
    }

    let trajs = animal_ids(n)
        .into_iter()
        .zip(samples)
        .map(|(id, s)| Trajectory::new(id, s))
        .collect::<Result<Vec<_>>>()?;
    Ok((trajs, labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewedConfig {
    pub n_animals: usize,
    pub train_steps: u64,
    pub test_steps: u64,
    pub seed: u64,
    pub arena: (f64, f64),
    pub noise_std: f64,
    pub regimes: Regimes,
}

impl Default for SkewedConfig {
    fn default() -> Self {
        let base = SimConfig::default();
        SkewedConfig {
            n_animals: base.n_animals,
            train_steps: DEFAULT_DAY_STEPS,
            test_steps: DEFAULT_DAY_STEPS,
            seed: 0,
            arena: base.arena,
            noise_std: base.noise_std,
            regimes: base.regimes,
        }
    }
}

impl SkewedConfig {
    /// Simulator config for one day; the two days use independent seeds.
    pub fn day(&self, split: Split) -> SimConfig {
        let (index, steps, shares) = match split {
            Split::Train => (0, self.train_steps, TRAIN_SHARES),
            Split::Test => (1, self.test_steps, TEST_SHARES),
        };
        let seed = derive_seed(self.seed, index);
        SimConfig {
            n_animals: self.n_animals,
            duration: steps,
            seed,
            arena: self.arena,
            regime_schedule: skewed_schedule(steps, shares, derive_seed(seed, 100)),
            noise_std: self.noise_std,
            regimes: self.regimes,
            start_time: 0,
        }
    }
}

/// Simulate one day for a given split and align it into a dataset.
pub fn simulate_day(cfg: &SkewedConfig, split: Split) -> Result<(Vec<Trajectory>, Vec<LabelInterval>, FlockDataset)> {
    let (trajs, labels) = simulate(&cfg.day(split))?;
    let ds = align_flock(&trajs, &labels, split)?;
    Ok((trajs, labels, ds))
}

/// Training and test days with label shares close to the field data's.
pub fn make_skewed_dataset(cfg: &SkewedConfig) -> Result<(FlockDataset, FlockDataset)> {
    let (_, _, train) = simulate_day(cfg, Split::Train)?;
    let (_, _, test) = simulate_day(cfg, Split::Test)?;
    Ok((train, test))
}
