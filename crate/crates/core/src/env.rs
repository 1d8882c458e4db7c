//! Frame-level decision process.
//!
//! Every frame consists of a nullspace-estimation phase of `N_e` samples
//! (jamming plus noise only), an optional monitoring phase, a preamble of
//! fixed length and a data phase of `N_d` samples carrying `N_d / 2` 16-QAM
//! symbols per stream. Channels are constant within a frame and evolve by the
//! frame length between frames; the jamming correlation follows its schedule
//! sample by sample.

use num_complex::Complex64;

use crate::agent::{Task, TaskStep};
use crate::beamform::{equalize_block, estimate_nullspace, qam16, sample_covariance, SINR_CAP_DB};
use crate::channel::{FadingParams, FadingState, Ula};
use crate::jamming::JammerModel;
use crate::numerics::{frobenius_sq, ComplexMatrix, Rng};
use crate::{Error, Result};

pub const PREAMBLE_SAMPLES: usize = 20;
pub const SAMPLES_PER_SYMBOL: usize = 2;
pub const OUTAGE_SINR_DB: f64 = 11.8;

/// SINR recorded for a stream whose equivalent channel could not be
/// inverted.
pub const SINR_FLOOR_DB: f64 = -SINR_CAP_DB;

/// Normalisation of the per-user SINR feature.
const SINR_FEATURE_SCALE_DB: f64 = 40.0;

const STREAM_CHANNELS: u64 = 1;
const STREAM_JAMMING: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_DATA: u64 = 4;
const STREAM_BEAMFORMER: u64 = 5;

/// Zero-based index into an [`ActionSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action(usize);

impl Action {
    pub fn index(self) -> usize {
        self.0
    }

    /// One-based action number as used in configuration files and reports.
    pub fn number(self) -> usize {
        self.0 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseDurations {
    pub estimation: usize,
    pub data: usize,
}

/// Cartesian grid of estimation and data durations, estimation index
/// varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    estimation: Vec<usize>,
    data: Vec<usize>,
}

impl ActionSpace {
    pub fn new(estimation: Vec<usize>, data: Vec<usize>) -> Result<Self> {
        if estimation.is_empty() || data.is_empty() {
            return Err(Error::Input(
                "action space needs candidate durations".into(),
            ));
        }
        if estimation.contains(&0) {
            return Err(Error::Input("estimation durations must be positive".into()));
        }
        if data.iter().any(|&n| n < SAMPLES_PER_SYMBOL) {
            return Err(Error::Input(
                "data durations must hold at least one symbol".into(),
            ));
        }
        Ok(ActionSpace { estimation, data })
    }

    pub fn size(&self) -> usize {
        self.estimation.len() * self.data.len()
    }

    pub fn estimation_candidates(&self) -> &[usize] {
        &self.estimation
    }

    pub fn data_candidates(&self) -> &[usize] {
        &self.data
    }

    pub fn max_data(&self) -> usize {
        *self.data.iter().max().expect("non-empty")
    }

    pub fn max_estimation(&self) -> usize {
        *self.estimation.iter().max().expect("non-empty")
    }

    pub fn from_index(&self, index: usize) -> Result<Action> {
        if index < self.size() {
            Ok(Action(index))
        } else {
            Err(Error::Input(format!(
                "action index {index} outside 0..{}",
                self.size()
            )))
        }
    }

    pub fn from_number(&self, number: usize) -> Result<Action> {
        if number == 0 {
            return Err(Error::Input("action numbers start at 1".into()));
        }
        self.from_index(number - 1)
    }

    pub fn decode(&self, a: Action) -> PhaseDurations {
        let le = self.estimation.len();
        PhaseDurations {
            estimation: self.estimation[a.0 % le],
            data: self.data[a.0 / le],
        }
    }

    pub fn find(&self, d: PhaseDurations) -> Option<Action> {
        let ie = self.estimation.iter().position(|&n| n == d.estimation)?;
        let id = self.data.iter().position(|&n| n == d.data)?;
        Some(Action(ie + id * self.estimation.len()))
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> {
        (0..self.size()).map(Action)
    }
}

/// How the receive beamformer is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Beamformer {
    /// From the sample covariance of the estimation phase.
    Estimated,
    /// From the true data-phase jamming covariance.
    Oracle,
    /// Random orthonormal rows, blind to the jamming. A worst case.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRequest {
    pub action: Option<Action>,
    pub durations: PhaseDurations,
    pub monitor_samples: usize,
    pub beamformer: Beamformer,
}

impl FrameRequest {
    pub fn for_action(space: &ActionSpace, a: Action) -> Self {
        FrameRequest {
            action: Some(a),
            durations: space.decode(a),
            monitor_samples: 0,
            beamformer: Beamformer::Estimated,
        }
    }
}

/// Link-level parameters of the downlink.
#[derive(Debug, Clone)]
pub struct EnvParams {
    pub n_users: usize,
    pub n_rx: usize,
    pub n_tx: usize,
    pub n_streams: usize,
    pub n_paths: usize,
    pub n_sinusoids: usize,
    pub doppler_hz: f64,
    pub sample_rate_hz: f64,
    /// Total transmit power, W.
    pub p_t: f64,
    pub noise_var: f64,
    /// Linear path loss from the base station, per user.
    pub eta: Vec<f64>,
    /// Linear path loss from each jammer, per user.
    pub jammer_eta: Vec<Vec<f64>>,
    pub jammers: JammerModel,
    pub actions: ActionSpace,
    pub preamble_samples: usize,
    pub outage_db: f64,
}

impl EnvParams {
    pub fn n_jammers(&self) -> usize {
        self.jammers.n_jammers()
    }

    fn validate(&self) -> Result<()> {
        let nj = self.n_jammers();
        if self.n_users == 0 || self.n_streams == 0 {
            return Err(Error::Input("need at least one user and one stream".into()));
        }
        if self.n_rx < nj + self.n_streams {
            return Err(Error::Input(format!(
                "{} receive antennas cannot null {} jammers and separate {} streams",
                self.n_rx, nj, self.n_streams
            )));
        }
        if self.n_tx < self.n_streams {
            return Err(Error::Input("fewer transmit antennas than streams".into()));
        }
        if self.eta.len() != self.n_users || self.jammer_eta.len() != self.n_users {
            return Err(Error::Input(
                "one path loss entry per user is required".into(),
            ));
        }
        if self.jammer_eta.iter().any(|v| v.len() != nj) {
            return Err(Error::Input(
                "one jammer path loss per jammer is required".into(),
            ));
        }
        if !(self.p_t > 0.0 && self.noise_var > 0.0) {
            return Err(Error::Input(
                "transmit power and noise must be positive".into(),
            ));
        }
        Ok(())
    }

    fn fading(&self, eta: f64) -> FadingParams {
        FadingParams {
            n_paths: self.n_paths,
            n_sinusoids: self.n_sinusoids,
            doppler_hz: self.doppler_hz,
            sample_rate_hz: self.sample_rate_hz,
            eta,
        }
    }

    /// Largest possible learning reward of one frame.
    pub fn reward_scale(&self) -> f64 {
        (self.n_users * self.n_streams * self.actions.max_data()) as f64 * (1.0 + 1e8f64).log2()
    }
}

/// What the defender sees after a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Per user, mean decision-directed SINR over its streams, dB.
    pub mean_sinr_db: Vec<f64>,
    /// Largest `N_J` singular values of the estimation-phase covariance,
    /// averaged over users.
    pub jamming_singular_values: Vec<f64>,
}

impl Observation {
    fn zeros(n_users: usize, n_jammers: usize) -> Self {
        Observation {
            mean_sinr_db: vec![0.0; n_users],
            jamming_singular_values: vec![0.0; n_jammers],
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame: u64,
    pub start_sample: u64,
    pub action: Option<Action>,
    pub durations: PhaseDurations,
    pub monitor_samples: usize,
    pub preamble_samples: usize,
    /// Fraction of the frame spent on data.
    pub mu: f64,
    pub rho_estimation: f64,
    pub rho_data: f64,
    /// `[user][stream]` SINR against the transmitted symbols, dB.
    pub sinr_db: Vec<Vec<f64>>,
    /// `[user][stream]` decision-directed SINR, dB.
    pub sinr_est_db: Vec<Vec<f64>>,
    /// `[user]` mean residual jamming power per data symbol after beamforming.
    pub residual_jamming: Vec<f64>,
    /// `[user]` residual power per nulled dimension during monitoring.
    pub monitor_residual: Option<Vec<f64>>,
    pub outage: bool,
    pub reward: f64,
    pub noise_var: f64,
    pub observation: Observation,
}

fn se_bits(sinr_db: f64) -> f64 {
    (1.0 + 10f64.powf(sinr_db / 10.0)).log2()
}

impl FrameResult {
    fn streams(&self) -> impl Iterator<Item = f64> + '_ {
        self.sinr_db.iter().flatten().copied()
    }

    pub fn n_streams(&self) -> usize {
        self.sinr_db.iter().map(Vec::len).sum()
    }

    /// Mean of `mu log2(1 + sinr)` over all streams.
    pub fn effective_se(&self) -> f64 {
        self.mu * self.streams().map(se_bits).sum::<f64>() / self.n_streams() as f64
    }

    /// Fraction of streams below the outage threshold.
    pub fn outage_fraction(&self, threshold_db: f64) -> f64 {
        self.streams().filter(|&s| s < threshold_db).count() as f64 / self.n_streams() as f64
    }
}

pub fn duty_cycle(d: PhaseDurations, monitor: usize, preamble: usize) -> f64 {
    d.data as f64 / (d.estimation + monitor + preamble + d.data) as f64
}

struct User {
    bs: FadingState,
    jammers: Vec<FadingState>,
    precoder: ComplexMatrix,
}

pub struct Environment {
    params: EnvParams,
    rx: Ula,
    tx: Ula,
    users: Vec<User>,
    jam_rng: Rng,
    noise_rng: Rng,
    data_rng: Rng,
    bf_rng: Rng,
    clock: u64,
    frame: u64,
    observation: Observation,
}

fn semi_unitary(rng: &mut Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_normal());
    g.qr().q()
}

impl Environment {
    pub fn new(params: EnvParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let rx = Ula::half_wavelength(params.n_rx);
        let tx = Ula::half_wavelength(params.n_tx);
        let mut ch_rng = Rng::stream(seed, STREAM_CHANNELS);
        let users = (0..params.n_users)
            .map(|k| {
                let bs = FadingState::draw(&mut ch_rng, params.fading(params.eta[k]))?;
                let jammers = params.jammer_eta[k]
                    .iter()
                    .map(|&e| FadingState::draw(&mut ch_rng, params.fading(e)))
                    .collect::<Result<Vec<_>>>()?;
                let precoder = semi_unitary(&mut ch_rng, params.n_tx, params.n_streams);
                Ok(User {
                    bs,
                    jammers,
                    precoder,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let observation = Observation::zeros(params.n_users, params.n_jammers());
        Ok(Environment {
            rx,
            tx,
            users,
            jam_rng: Rng::stream(seed, STREAM_JAMMING),
            noise_rng: Rng::stream(seed, STREAM_NOISE),
            data_rng: Rng::stream(seed, STREAM_DATA),
            bf_rng: Rng::stream(seed, STREAM_BEAMFORMER),
            clock: 0,
            frame: 0,
            observation,
            params,
        })
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.params.actions
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn frames_elapsed(&self) -> u64 {
        self.frame
    }

    /// Observation produced by the previous frame (zeros before the first).
    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    pub fn jammers_mut(&mut self) -> &mut JammerModel {
        &mut self.params.jammers
    }

    fn noise(&mut self, rows: usize, cols: usize) -> ComplexMatrix {
        let sd = self.params.noise_var.sqrt();
        let rng = &mut self.noise_rng;
        ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_normal() * sd)
    }

    fn jammer_channel(&self, user: &User) -> ComplexMatrix {
        let mut z = ComplexMatrix::zeros(self.params.n_rx, user.jammers.len());
        for (j, f) in user.jammers.iter().enumerate() {
            z.set_column(j, &f.channel_vector(&self.rx));
        }
        z
    }

    pub fn step_action(&mut self, a: Action) -> Result<FrameResult> {
        let req = FrameRequest::for_action(&self.params.actions, a);
        self.step(&req)
    }

    pub fn step(&mut self, req: &FrameRequest) -> Result<FrameResult> {
        let ne = req.durations.estimation;
        let nd = req.durations.data;
        let nm = req.monitor_samples;
        let np = self.params.preamble_samples;
        if ne == 0 || nd < SAMPLES_PER_SYMBOL {
            return Err(Error::Input(format!("invalid phase durations {ne}/{nd}")));
        }
        let n_sym = nd / SAMPLES_PER_SYMBOL;
        let nj = self.params.n_jammers();
        let p0 = self.clock;
        let p_mon = p0 + ne as u64;
        let p_data = p_mon + (nm + np) as u64;
        let stride = SAMPLES_PER_SYMBOL as u64;

        let jam = &self.params.jammers;
        let x_est = jam.sample_block(&mut self.jam_rng, p0, ne, 1)?;
        let x_mon = jam.sample_block(&mut self.jam_rng, p_mon, nm, 1)?;
        let x_data = jam.sample_block(&mut self.jam_rng, p_data, n_sym, stride)?;
        let sigma_data = match req.beamformer {
            Beamformer::Oracle => Some(jam.mean_sigma(p_data, n_sym, stride)?),
            Beamformer::Estimated | Beamformer::Random => None,
        };
        let rho_estimation = (0..ne)
            .map(|i| jam.effective_rho(p0 + i as u64))
            .sum::<f64>()
            / ne as f64;
        let rho_data = (0..n_sym)
            .map(|i| jam.effective_rho(p_data + i as u64 * stride))
            .sum::<f64>()
            / n_sym as f64;

        let n_rx = self.params.n_rx;
        let amp = Complex64::new(self.params.p_t.sqrt(), 0.0);
        let mut sinr_db = Vec::with_capacity(self.users.len());
        let mut sinr_est_db = Vec::with_capacity(self.users.len());
        let mut residual_jamming = Vec::with_capacity(self.users.len());
        let mut monitor_residual = Vec::with_capacity(self.users.len());
        let mut sv_sum = vec![0.0; nj];

        for k in 0..self.users.len() {
            let user = &self.users[k];
            let h = user.bs.channel_matrix(&self.rx, &self.tx);
            let z = self.jammer_channel(user);
            let hp = &h * &user.precoder;

            let y_est = &z * &x_est + self.noise(n_rx, ne);
            let estimate = match &sigma_data {
                None => {
                    let mut est = estimate_nullspace(&sample_covariance(&y_est)?, nj)?;
                    if req.beamformer == Beamformer::Random {
                        est.g = semi_unitary(&mut self.bf_rng, n_rx, n_rx - nj).adjoint();
                    }
                    est
                }
                Some(sigma) => {
                    let mut c = &z * sigma * z.adjoint();
                    for i in 0..n_rx {
                        c[(i, i)] += Complex64::new(self.params.noise_var, 0.0);
                    }
                    estimate_nullspace(&c, nj)?
                }
            };
            for (acc, s) in sv_sum.iter_mut().zip(&estimate.singular_values) {
                *acc += s;
            }
            let f = &estimate.g;

            if nm > 0 {
                let y_mon = &z * &x_mon + self.noise(n_rx, nm);
                monitor_residual.push(frobenius_sq(&(f * y_mon)) / (nm * f.nrows()) as f64);
            }

            let data_rng = &mut self.data_rng;
            let x = ComplexMatrix::from_fn(self.params.n_streams, n_sym, |_, _| {
                qam16::point(data_rng.index(16))
            });
            let jam_rx = &z * &x_data;
            let received = &hp * &x * amp + &jam_rx + self.noise(n_rx, n_sym);
            let effective = f * &hp;
            match equalize_block(&received, &jam_rx, f, &effective, &x, self.params.p_t) {
                Ok(block) => {
                    sinr_db.push(block.sinr_true_db);
                    sinr_est_db.push(block.sinr_est_db);
                    residual_jamming.push(block.residual_jamming);
                }
                Err(Error::IllConditioned(cond)) => {
                    log::debug!(
                        "frame {}: user {k} equivalent channel condition {cond:e}",
                        self.frame
                    );
                    sinr_db.push(vec![SINR_FLOOR_DB; self.params.n_streams]);
                    sinr_est_db.push(vec![SINR_FLOOR_DB; self.params.n_streams]);
                    residual_jamming.push(frobenius_sq(&(f * &jam_rx)) / n_sym as f64);
                }
                Err(e) => return Err(e),
            }
        }

        let outage = sinr_db.iter().flatten().any(|&s| s < self.params.outage_db);
        let reward = if outage {
            0.0
        } else {
            nd as f64 * sinr_db.iter().flatten().map(|&s| se_bits(s)).sum::<f64>()
        };
        let n_users = self.users.len() as f64;
        let observation = Observation {
            mean_sinr_db: sinr_est_db
                .iter()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                .collect(),
            jamming_singular_values: sv_sum.iter().map(|s| s / n_users).collect(),
        };

        let result = FrameResult {
            frame: self.frame,
            start_sample: p0,
            action: req.action,
            durations: req.durations,
            monitor_samples: nm,
            preamble_samples: np,
            mu: duty_cycle(req.durations, nm, np),
            rho_estimation,
            rho_data,
            sinr_db,
            sinr_est_db,
            residual_jamming,
            monitor_residual: (nm > 0).then_some(monitor_residual),
            outage,
            reward,
            noise_var: self.params.noise_var,
            observation: observation.clone(),
        };

        let len = (ne + nm + np + nd) as u64;
        self.clock += len;
        self.frame += 1;
        for u in &mut self.users {
            u.bs.evolve(len);
            for j in &mut u.jammers {
                j.evolve(len);
            }
        }
        self.observation = observation;
        Ok(result)
    }
}

/// Maps observations to features in roughly `[0, 1]`: SINR over 40 dB and
/// singular values over their running maximum.
#[derive(Debug, Clone, Default)]
pub struct ObservationScaler {
    sv_max: f64,
}

impl ObservationScaler {
    pub fn features(&mut self, obs: &Observation) -> Vec<f64> {
        for &s in &obs.jamming_singular_values {
            self.sv_max = self.sv_max.max(s);
        }
        let sv_max = self.sv_max;
        obs.mean_sinr_db
            .iter()
            .map(|s| s / SINR_FEATURE_SCALE_DB)
            .chain(obs.jamming_singular_values.iter().map(|&s| {
                if sv_max > 0.0 {
                    s / sv_max
                } else {
                    0.0
                }
            }))
            .collect()
    }
}

pub fn action_code(a: Action, n_actions: usize) -> f64 {
    a.number() as f64 / n_actions as f64
}

/// The jamming environment seen as a reinforcement-learning task.
pub struct AntiJamTask {
    env: Environment,
    scaler: ObservationScaler,
    reward_scale: f64,
}

impl AntiJamTask {
    pub fn new(env: Environment) -> Self {
        let reward_scale = env.params().reward_scale();
        AntiJamTask {
            env,
            scaler: ObservationScaler::default(),
            reward_scale,
        }
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn env_mut(&mut self) -> &mut Environment {
        &mut self.env
    }
}

impl Task for AntiJamTask {
    type Info = FrameResult;

    fn n_actions(&self) -> usize {
        self.env.actions().size()
    }

    fn feature_len(&self) -> usize {
        self.env.params().n_users + self.env.params().n_jammers()
    }

    fn action_code(&self, action: usize) -> f64 {
        (action + 1) as f64 / self.n_actions() as f64
    }

    fn step(&mut self, action: usize) -> Result<TaskStep<FrameResult>> {
        let a = self.env.actions().from_index(action)?;
        let frame = self.env.step_action(a)?;
        let features = self.scaler.features(&frame.observation);
        Ok(TaskStep {
            features,
            reward: frame.reward / self.reward_scale,
            info: frame,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jamming::CorrelationSchedule;

    pub(crate) fn small_params(jammer_var: f64) -> EnvParams {
        EnvParams {
            n_users: 2,
            n_rx: 8,
            n_tx: 8,
            n_streams: 3,
            n_paths: 8,
            n_sinusoids: 16,
            doppler_hz: 8.28,
            sample_rate_hz: 400e3,
            p_t: 1.0,
            noise_var: 1e-3,
            eta: vec![1.0, 1.0],
            jammer_eta: vec![vec![1.0, 1.0]; 2],
            jammers: JammerModel::new(
                vec![jammer_var; 2],
                CorrelationSchedule::constant(0.5).unwrap(),
            )
            .unwrap(),
            actions: ActionSpace::new(vec![10, 20, 30, 40], vec![200, 250, 300, 350]).unwrap(),
            preamble_samples: PREAMBLE_SAMPLES,
            outage_db: OUTAGE_SINR_DB,
        }
    }

    #[test]
    fn decode_order_has_estimation_fastest() {
        let s = ActionSpace::new(vec![10, 20, 30, 40], vec![200, 250, 300, 350]).unwrap();
        let d = |n| s.decode(s.from_number(n).unwrap());
        assert_eq!(
            d(1),
            PhaseDurations {
                estimation: 10,
                data: 200
            }
        );
        assert_eq!(
            d(5),
            PhaseDurations {
                estimation: 10,
                data: 250
            }
        );
        assert_eq!(
            d(16),
            PhaseDurations {
                estimation: 40,
                data: 350
            }
        );
        assert!(s.from_number(17).is_err());
        assert!(s.from_number(0).is_err());
    }

    #[test]
    fn duty_cycle_example() {
        let mu = duty_cycle(
            PhaseDurations {
                estimation: 10,
                data: 350,
            },
            0,
            20,
        );
        assert!((mu - 350.0 / 380.0).abs() < 1e-15);
    }

    #[test]
    fn jamming_free_frame_has_high_sinr_and_positive_reward() {
        let mut env = Environment::new(small_params(0.0), 1).unwrap();
        let a = env.actions().from_number(16).unwrap();
        let f = env.step_action(a).unwrap();
        assert!(!f.outage);
        assert!(f.reward > 0.0);
        assert!(f.sinr_db.iter().flatten().all(|&s| s > 20.0));
        assert_eq!(env.clock(), 40 + 20 + 350);
    }

    #[test]
    fn observation_comes_from_previous_frame() {
        let mut env = Environment::new(small_params(1.0), 2).unwrap();
        assert!(env.observation().mean_sinr_db.iter().all(|&s| s == 0.0));
        let a = env.actions().from_number(3).unwrap();
        let f = env.step_action(a).unwrap();
        assert_eq!(env.observation(), &f.observation);
    }

    #[test]
    fn identical_seeds_reproduce_frames() {
        let run = || {
            let mut env = Environment::new(small_params(1.0), 9).unwrap();
            (1..=4)
                .map(|n| {
                    let a = env.actions().from_number(n).unwrap();
                    env.step_action(a).unwrap().sinr_db
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
