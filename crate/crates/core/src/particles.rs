//! Stochastic integrators for the first-order and kinetic particle systems,
//! plus long-run sampling of the Gibbs invariant measure.
//!
//! The first-order system moves by Euler-Maruyama on
//! `dX = -grad H_n dt + sqrt(2) dB`. The kinetic system moves by a symmetric
//! splitting: half-kick by the position force, half-drift, exact
//! Ornstein-Uhlenbeck velocity refresh at unit friction and temperature,
//! half-drift, half-kick.
//!
//! Reproducibility contract: every noise value is a pure function of
//! `(master_seed, stream_id, replica, particle, step)`; forces reduce power
//! sums in a canonical value order. Outputs are bit-identical for any
//! worker count, and permuting particles together with their noise stream
//! keys permutes trajectories exactly.

use crate::error::{Error, Result};
use crate::interaction::{hamiltonian, hamiltonian_gradient, kinetic_hamiltonian, ParticleEnsemble};
use crate::potentials::ModelSpec;
use crate::rng::{NoiseStreams, SeedLineage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Positions and velocities of n particles in d dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticEnsemble {
    pub n: usize,
    pub d: usize,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub seed_lineage: SeedLineage,
}

impl KineticEnsemble {
    pub fn new(
        n: usize,
        d: usize,
        positions: Vec<f64>,
        velocities: Vec<f64>,
        seed_lineage: SeedLineage,
    ) -> Result<Self> {
        if positions.len() != n * d || velocities.len() != n * d {
            return Err(Error::InvalidDomain(format!(
                "kinetic ensemble arrays must both be n x d = {}, got {} and {}",
                n * d,
                positions.len(),
                velocities.len()
            )));
        }
        if positions.iter().chain(&velocities).any(|x| !x.is_finite()) {
            return Err(Error::Numerical("kinetic ensemble has non-finite entries".into()));
        }
        Ok(KineticEnsemble {
            n,
            d,
            positions,
            velocities,
            seed_lineage,
        })
    }

    pub fn position_ensemble(&self) -> ParticleEnsemble {
        ParticleEnsemble {
            n: self.n,
            d: self.d,
            positions: self.positions.clone(),
            seed_lineage: self.seed_lineage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    KineticSplitting,
}

/// Simulation parameters; `record_every` thins the scalar series,
/// `snapshot_every` (optional) thins full-state snapshots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub record_every: usize,
    pub n: usize,
    pub replicas: usize,
    pub master_seed: u64,
    pub scheme: Scheme,
    #[serde(default)]
    pub snapshot_every: Option<usize>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.horizon.is_finite() || self.horizon < 0.0 {
            return Err(Error::InvalidDomain(format!(
                "need dt > 0 and horizon >= 0, got dt={}, horizon={}",
                self.dt, self.horizon
            )));
        }
        if self.horizon > 0.0 && self.dt > self.horizon {
            return Err(Error::InvalidDomain(format!(
                "dt={} exceeds horizon={}",
                self.dt, self.horizon
            )));
        }
        if self.record_every == 0 || self.n == 0 || self.replicas == 0 {
            return Err(Error::InvalidDomain(
                "record_every, n, replicas must all be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Initial condition samplers: point mass, iid Gaussian coordinates, or an
/// explicit (file-loaded) ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialCondition {
    Point { value: f64 },
    Gaussian { mean: f64, sd: f64 },
    Ensemble { positions: Vec<f64> },
}

impl InitialCondition {
    fn sample(&self, n: usize, d: usize, streams: &NoiseStreams) -> Result<Vec<f64>> {
        match self {
            InitialCondition::Point { value } => Ok(vec![*value; n * d]),
            InitialCondition::Gaussian { mean, sd } => {
                let mut out = vec![0.0; n * d];
                for i in 0..n {
                    streams.fill_standard_normals(i as u64, 0, &mut out[i * d..(i + 1) * d]);
                }
                for z in out.iter_mut() {
                    *z = mean + sd * *z;
                }
                Ok(out)
            }
            InitialCondition::Ensemble { positions } => {
                if positions.len() != n * d {
                    return Err(Error::InvalidDomain(format!(
                        "loaded ensemble has {} values, config wants n x d = {}",
                        positions.len(),
                        n * d
                    )));
                }
                Ok(positions.clone())
            }
        }
    }
}

/// Initial law for a simulation: first-order needs positions only.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimInitial {
    FirstOrder(InitialCondition),
    Kinetic {
        position: InitialCondition,
        velocity: InitialCondition,
    },
}

/// One recorded full state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub positions: Vec<f64>,
    pub velocities: Option<Vec<f64>>,
}

/// Pooled scalar statistics at one record time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarStats {
    pub t: f64,
    /// pooled position mean per coordinate
    pub mean: Vec<f64>,
    /// pooled position variance per coordinate
    pub var: Vec<f64>,
    /// pooled velocity stats (empty for first-order runs)
    pub vel_mean: Vec<f64>,
    pub vel_var: Vec<f64>,
    /// Hamiltonian averaged over replicas
    pub hamiltonian: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub n: usize,
    pub d: usize,
    pub kinetic: bool,
    pub scalar_series: Vec<ScalarStats>,
    pub snapshot_times: Vec<f64>,
    /// snapshots[time_index][replica]
    pub snapshots: Vec<Vec<Snapshot>>,
}

impl TrajectoryRecord {
    /// Pools one coordinate of every replica's positions at a snapshot row.
    pub fn pooled_coordinate(&self, time_index: usize, coord: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for snap in &self.snapshots[time_index] {
            for i in 0..self.n {
                out.push(snap.positions[i * self.d + coord]);
            }
        }
        out
    }

    pub fn scalar_csv(&self) -> String {
        let d = self.d;
        let mut s = String::from("t");
        for c in 0..d {
            s.push_str(&format!(",mean_{c}"));
        }
        for c in 0..d {
            s.push_str(&format!(",var_{c}"));
        }
        if self.kinetic {
            for c in 0..d {
                s.push_str(&format!(",vel_mean_{c}"));
            }
            for c in 0..d {
                s.push_str(&format!(",vel_var_{c}"));
            }
        }
        s.push_str(",hamiltonian\n");
        for row in &self.scalar_series {
            s.push_str(&format!("{:.16e}", row.t));
            for v in row.mean.iter().chain(&row.var) {
                s.push_str(&format!(",{v:.16e}"));
            }
            if self.kinetic {
                for v in row.vel_mean.iter().chain(&row.vel_var) {
                    s.push_str(&format!(",{v:.16e}"));
                }
            }
            s.push_str(&format!(",{:.16e}\n", row.hamiltonian));
        }
        s
    }

    pub fn snapshot_csv(&self, time_index: usize, replica: usize) -> String {
        let snap = &self.snapshots[time_index][replica];
        let d = self.d;
        let mut s = String::from("particle_index");
        for c in 0..d {
            s.push_str(&format!(",coord_{c}"));
        }
        if snap.velocities.is_some() {
            for c in 0..d {
                s.push_str(&format!(",vel_{c}"));
            }
        }
        s.push('\n');
        for i in 0..self.n {
            s.push_str(&format!("{i}"));
            for c in 0..d {
                s.push_str(&format!(",{:.16e}", snap.positions[i * d + c]));
            }
            if let Some(vel) = &snap.velocities {
                for c in 0..d {
                    s.push_str(&format!(",{:.16e}", vel[i * d + c]));
                }
            }
            s.push('\n');
        }
        s
    }
}

/// One Euler-Maruyama step `x' = x - grad H_n(x) dt + sqrt(2 dt) z`.
pub fn step_overdamped(
    ensemble: &ParticleEnsemble,
    model: &ModelSpec,
    dt: f64,
    noise: &[f64],
    t: f64,
) -> Result<ParticleEnsemble> {
    if !(dt > 0.0) {
        return Err(Error::InvalidDomain(format!("dt must be > 0, got {dt}")));
    }
    if noise.len() != ensemble.positions.len() {
        return Err(Error::InvalidDomain(format!(
            "noise has {} entries, ensemble {}",
            noise.len(),
            ensemble.positions.len()
        )));
    }
    let grad = hamiltonian_gradient(model, ensemble).map_err(|e| match e {
        Error::Numerical(_) => Error::BlowUp { dt, t },
        other => other,
    })?;
    let amp = (2.0 * dt).sqrt();
    let mut next = ensemble.clone();
    for (i, x) in next.positions.iter_mut().enumerate() {
        *x += -grad[i] * dt + amp * noise[i];
    }
    if next.positions.iter().any(|x| !x.is_finite()) {
        return Err(Error::BlowUp { dt, t });
    }
    Ok(next)
}

/// One symmetric kick-drift-OU-drift-kick step of the kinetic system.
///
/// The force is `-grad_x S_1,n`; friction and temperature are fixed to one,
/// so the velocity refresh `v <- e^{-dt} v + sqrt(1 - e^{-2 dt}) z` is exact
/// and the invariant velocity marginal is standard Gaussian.
pub fn step_kinetic(
    ensemble: &KineticEnsemble,
    model: &ModelSpec,
    dt: f64,
    noise: &[f64],
    t: f64,
) -> Result<KineticEnsemble> {
    if !(dt > 0.0) {
        return Err(Error::InvalidDomain(format!("dt must be > 0, got {dt}")));
    }
    if noise.len() != ensemble.velocities.len() {
        return Err(Error::InvalidDomain(format!(
            "noise has {} entries, ensemble {}",
            noise.len(),
            ensemble.velocities.len()
        )));
    }
    let mut state = ensemble.clone();
    let half = 0.5 * dt;
    let force = |s: &KineticEnsemble| {
        hamiltonian_gradient(model, &s.position_ensemble()).map_err(|e| match e {
            Error::Numerical(_) => Error::BlowUp { dt, t },
            other => other,
        })
    };

    // half-kick
    let grad = force(&state)?;
    for (v, g) in state.velocities.iter_mut().zip(&grad) {
        *v -= half * g;
    }
    // half-drift
    for (x, v) in state.positions.iter_mut().zip(&state.velocities) {
        *x += half * v;
    }
    // exact OU refresh
    let decay = (-dt).exp();
    let amp = (1.0 - decay * decay).sqrt();
    for (v, z) in state.velocities.iter_mut().zip(noise) {
        *v = decay * *v + amp * z;
    }
    // half-drift
    for (x, v) in state.positions.iter_mut().zip(&state.velocities) {
        *x += half * v;
    }
    // half-kick
    let grad = force(&state)?;
    for (v, g) in state.velocities.iter_mut().zip(&grad) {
        *v -= half * g;
    }

    if state
        .positions
        .iter()
        .chain(&state.velocities)
        .any(|x| !x.is_finite())
    {
        return Err(Error::BlowUp { dt, t });
    }
    Ok(state)
}

const CH_INIT_POS: u64 = 0;
const CH_INIT_VEL: u64 = 1;
const CH_DYN_POS: u64 = 2;
const CH_DYN_VEL: u64 = 3;

struct ReplicaTrack {
    /// per record time: position sums / square sums per coordinate,
    /// velocity likewise, and the Hamiltonian
    rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64)>,
    snapshots: Vec<Snapshot>,
}

fn coordinate_sums(xs: &[f64], n: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut s = vec![0.0; d];
    let mut s2 = vec![0.0; d];
    for i in 0..n {
        for c in 0..d {
            let x = xs[i * d + c];
            s[c] += x;
            s2[c] += x * x;
        }
    }
    (s, s2)
}

fn record_plan(config: &SimConfig) -> (Vec<usize>, Vec<usize>) {
    let steps = config.steps();
    let mut scalar_steps: Vec<usize> = (0..=steps)
        .filter(|s| s % config.record_every == 0 || *s == steps)
        .collect();
    scalar_steps.dedup();
    let snap_steps: Vec<usize> = match config.snapshot_every {
        Some(k) if k > 0 => {
            let mut v: Vec<usize> = (0..=steps).filter(|s| s % k == 0 || *s == steps).collect();
            v.dedup();
            v
        }
        _ => vec![steps],
    };
    (scalar_steps, snap_steps)
}

/// Runs `replicas` independent trajectories with per-replica derived seeds
/// and assembles pooled scalar series plus thinned snapshots.
/// Deterministic for a fixed `(model, config, initial)`.
pub fn simulate(
    model: &ModelSpec,
    config: &SimConfig,
    initial: &SimInitial,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let kinetic = matches!(config.scheme, Scheme::KineticSplitting);
    match (kinetic, initial) {
        (false, SimInitial::FirstOrder(_)) | (true, SimInitial::Kinetic { .. }) => {}
        _ => {
            return Err(Error::InvalidDomain(
                "initial condition shape does not match the scheme".into(),
            ))
        }
    }
    let (scalar_steps, snap_steps) = record_plan(config);

    let tracks: Vec<Result<ReplicaTrack>> = (0..config.replicas)
        .into_par_iter()
        .map(|r| run_replica(model, config, initial, r as u64, &scalar_steps, &snap_steps))
        .collect();

    let mut per_replica = Vec::with_capacity(config.replicas);
    for t in tracks {
        per_replica.push(t?);
    }

    let d = model.dimension;
    let pool = config.n as f64 * config.replicas as f64;
    let mut scalar_series = Vec::with_capacity(scalar_steps.len());
    for (row_idx, &step) in scalar_steps.iter().enumerate() {
        let mut mean = vec![0.0; d];
        let mut var = vec![0.0; d];
        let mut vel_mean = vec![0.0; d];
        let mut vel_var = vec![0.0; d];
        let mut ham = 0.0;
        for track in &per_replica {
            let (s, s2, vs, vs2, h) = &track.rows[row_idx];
            for c in 0..d {
                mean[c] += s[c];
                var[c] += s2[c];
                vel_mean[c] += vs[c];
                vel_var[c] += vs2[c];
            }
            ham += h;
        }
        for c in 0..d {
            mean[c] /= pool;
            var[c] = var[c] / pool - mean[c] * mean[c];
            vel_mean[c] /= pool;
            vel_var[c] = vel_var[c] / pool - vel_mean[c] * vel_mean[c];
        }
        scalar_series.push(ScalarStats {
            t: step as f64 * config.dt,
            mean,
            var,
            vel_mean: if kinetic { vel_mean } else { vec![] },
            vel_var: if kinetic { vel_var } else { vec![] },
            hamiltonian: ham / config.replicas as f64,
        });
    }

    let snapshot_times: Vec<f64> = snap_steps.iter().map(|s| *s as f64 * config.dt).collect();
    let mut snapshots: Vec<Vec<Snapshot>> = (0..snap_steps.len()).map(|_| Vec::new()).collect();
    for track in per_replica {
        for (i, snap) in track.snapshots.into_iter().enumerate() {
            snapshots[i].push(snap);
        }
    }

    Ok(TrajectoryRecord {
        n: config.n,
        d,
        kinetic,
        scalar_series,
        snapshot_times,
        snapshots,
    })
}

fn run_replica(
    model: &ModelSpec,
    config: &SimConfig,
    initial: &SimInitial,
    replica: u64,
    scalar_steps: &[usize],
    snap_steps: &[usize],
) -> Result<ReplicaTrack> {
    let (n, d) = (config.n, model.dimension);
    let lineage = SeedLineage::new(config.master_seed, replica);
    let streams = NoiseStreams::new(config.master_seed, 0).replica(replica);
    let steps = config.steps();

    let mut rows = Vec::with_capacity(scalar_steps.len());
    let mut snaps = Vec::with_capacity(snap_steps.len());

    let record = |state_pos: &ParticleEnsemble,
                      vel: Option<&[f64]>,
                      rows: &mut Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64)>,
                      snaps: &mut Vec<Snapshot>,
                      step: usize|
     -> Result<()> {
        if scalar_steps.contains(&step) {
            let (s, s2) = coordinate_sums(&state_pos.positions, n, d);
            let (vs, vs2) = match vel {
                Some(v) => coordinate_sums(v, n, d),
                None => (vec![0.0; d], vec![0.0; d]),
            };
            let h = match vel {
                Some(v) => kinetic_hamiltonian(model, state_pos, v)?,
                None => hamiltonian(model, state_pos)?,
            };
            rows.push((s, s2, vs, vs2, h));
        }
        if snap_steps.contains(&step) {
            snaps.push(Snapshot {
                positions: state_pos.positions.clone(),
                velocities: vel.map(|v| v.to_vec()),
            });
        }
        Ok(())
    };

    match initial {
        SimInitial::FirstOrder(init) => {
            let pos = init.sample(n, d, &streams.channel(CH_INIT_POS))?;
            let mut state = ParticleEnsemble::new(n, d, pos, lineage)?;
            let dyn_streams = streams.channel(CH_DYN_POS);
            let mut noise = vec![0.0; n * d];
            record(&state, None, &mut rows, &mut snaps, 0)?;
            for step in 1..=steps {
                for i in 0..n {
                    dyn_streams.fill_standard_normals(
                        i as u64,
                        step as u64,
                        &mut noise[i * d..(i + 1) * d],
                    );
                }
                state = step_overdamped(
                    &state,
                    model,
                    config.dt,
                    &noise,
                    step as f64 * config.dt,
                )?;
                record(&state, None, &mut rows, &mut snaps, step)?;
            }
        }
        SimInitial::Kinetic { position, velocity } => {
            let pos = position.sample(n, d, &streams.channel(CH_INIT_POS))?;
            let vel = velocity.sample(n, d, &streams.channel(CH_INIT_VEL))?;
            let mut state = KineticEnsemble::new(n, d, pos, vel, lineage)?;
            let dyn_streams = streams.channel(CH_DYN_VEL);
            let mut noise = vec![0.0; n * d];
            record(
                &state.position_ensemble(),
                Some(&state.velocities),
                &mut rows,
                &mut snaps,
                0,
            )?;
            for step in 1..=steps {
                for i in 0..n {
                    dyn_streams.fill_standard_normals(
                        i as u64,
                        step as u64,
                        &mut noise[i * d..(i + 1) * d],
                    );
                }
                state = step_kinetic(&state, model, config.dt, &noise, step as f64 * config.dt)?;
                record(
                    &state.position_ensemble(),
                    Some(&state.velocities),
                    &mut rows,
                    &mut snaps,
                    step,
                )?;
            }
        }
    }

    Ok(ReplicaTrack {
        rows,
        snapshots: snaps,
    })
}

/// Long-run overdamped snapshots after `burn_in`, spaced by `thin`, as
/// approximate draws from the Gibbs measure `mu_n ~ e^{-H_n}`.
pub fn sample_invariant(
    model: &ModelSpec,
    n: usize,
    burn_in: f64,
    n_samples: usize,
    thin: f64,
    dt: f64,
    seed: u64,
) -> Result<Vec<ParticleEnsemble>> {
    if !(burn_in > 0.0) || !(thin > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidDomain(
            "burn_in, thin, dt must all be > 0".into(),
        ));
    }
    let d = model.dimension;
    let streams = NoiseStreams::new(seed, 1);
    let lineage = SeedLineage::new(seed, 1);
    let init = InitialCondition::Gaussian { mean: 0.0, sd: 1.0 }
        .sample(n, d, &streams.channel(CH_INIT_POS))?;
    let mut state = ParticleEnsemble::new(n, d, init, lineage)?;
    let dyn_streams = streams.channel(CH_DYN_POS);
    let mut noise = vec![0.0; n * d];

    let burn_steps = (burn_in / dt).ceil() as usize;
    let thin_steps = ((thin / dt).round() as usize).max(1);
    let total = burn_steps + n_samples * thin_steps;
    let mut out = Vec::with_capacity(n_samples);
    for step in 1..=total {
        for i in 0..n {
            dyn_streams.fill_standard_normals(i as u64, step as u64, &mut noise[i * d..(i + 1) * d]);
        }
        state = step_overdamped(&state, model, dt, &noise, step as f64 * dt)?;
        if step > burn_steps && (step - burn_steps) % thin_steps == 0 {
            out.push(state.clone());
        }
    }
    Ok(out)
}
