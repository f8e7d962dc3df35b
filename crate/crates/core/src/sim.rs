//! Recurrent leaky integrate-and-fire simulation with a hub-structured
//! ground-truth adjacency.
//!
//! Membrane dynamics follow the Euler–Maruyama discretization
//!
//! ```text
//! V_i <- V_i + dt * (I - V_i) / tau + sigma * sqrt(2 * dt / tau) * xi_i
//! ```
//!
//! with `xi_i ~ N(0, 1)`. Recurrent coupling is an instantaneous delta
//! pulse: a spike of presynaptic neuron `j` at step `k` adds `A[i][j]`
//! directly to `V_i` at step `k + 1`. On `V_i >= v_thresh` the neuron
//! emits a spike, resets to `v_reset` and holds there for the absolute
//! refractory period; pulses arriving during the refractory hold are
//! discarded.
//!
//! Spike times are reported on the integration grid and quantized to
//! whole microseconds so that downstream interval arithmetic is exact.

use crate::error::{CoreError, Result};
use crate::rng::seeded_rng;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Signed directed adjacency with hub annotations.
///
/// `adjacency[[i, j]]` is the synaptic weight from presynaptic neuron `j`
/// (column) to postsynaptic neuron `i` (row), in units of membrane
/// voltage per spike. The diagonal is zero and every column carries the
/// constant Dale sign of its presynaptic neuron.
#[derive(Debug, Clone)]
pub struct GroundTruthNetwork {
    n: usize,
    adjacency: Array2<f64>,
    hub_ids: Vec<usize>,
    sign: Vec<i8>,
}

impl GroundTruthNetwork {
    /// Assemble a network from parts, validating every invariant.
    pub fn new(
        adjacency: Array2<f64>,
        hub_ids: Vec<usize>,
        sign: Vec<i8>,
    ) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(CoreError::ShapeMismatch(format!(
                "adjacency must be square, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        if sign.len() != n {
            return Err(CoreError::ShapeMismatch(format!(
                "sign vector length {} != n {}",
                sign.len(),
                n
            )));
        }
        for i in 0..n {
            if adjacency[[i, i]] != 0.0 {
                return Err(CoreError::InvalidParameter(format!(
                    "autapse at neuron {i}: diagonal must be zero"
                )));
            }
        }
        for j in 0..n {
            for i in 0..n {
                let w = adjacency[[i, j]];
                if !w.is_finite() {
                    return Err(CoreError::InvalidParameter(format!(
                        "non-finite weight at ({i}, {j})"
                    )));
                }
                if w != 0.0 && (w > 0.0) != (sign[j] > 0) {
                    return Err(CoreError::InvalidParameter(format!(
                        "column {j} violates Dale sign: weight {w} vs sign {}",
                        sign[j]
                    )));
                }
            }
        }
        for &h in &hub_ids {
            if h >= n {
                return Err(CoreError::InvalidParameter(format!(
                    "hub id {h} out of range for n = {n}"
                )));
            }
        }
        Ok(Self {
            n,
            adjacency,
            hub_ids,
            sign,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn hub_ids(&self) -> &[usize] {
        &self.hub_ids
    }

    pub fn sign(&self) -> &[i8] {
        &self.sign
    }

    /// Total outbound absolute weight of neuron `j` (its column mass).
    pub fn outbound_mass(&self, j: usize) -> f64 {
        self.adjacency.column(j).iter().map(|w| w.abs()).sum()
    }
}

/// Construction parameters for [`build_hub_adjacency`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HubConfig {
    /// Neuron count.
    pub n: usize,
    /// Number of hub neurons (assigned ids `0..n_hubs`).
    pub n_hubs: usize,
    /// Connection probability for non-hub columns; hubs connect densely.
    pub density: f64,
    /// Outbound-mass ratio of hubs over the median non-hub column.
    pub hub_ratio: f64,
    /// Fraction of excitatory neurons (Dale sign +1).
    pub dale_fraction: f64,
    /// Mean of the exponential magnitude distribution for non-hub weights.
    pub weight_mean: f64,
}

impl Default for HubConfig {
    fn default() -> Self {
        Self {
            n: 50,
            n_hubs: 3,
            density: 0.15,
            hub_ratio: 5.0,
            dale_fraction: 0.8,
            weight_mean: 0.02,
        }
    }
}

/// Build a signed hub adjacency: hub columns connect to every other
/// neuron with `hub_ratio`-scaled exponential magnitudes, non-hub
/// columns connect with probability `density`. Deterministic per seed.
pub fn build_hub_adjacency(cfg: &HubConfig, seed: u64) -> Result<GroundTruthNetwork> {
    if cfg.n < 2 {
        return Err(CoreError::InvalidParameter(format!(
            "n must be >= 2, got {}",
            cfg.n
        )));
    }
    if cfg.n_hubs >= cfg.n {
        return Err(CoreError::InvalidParameter(format!(
            "n_hubs {} must be < n {}",
            cfg.n_hubs, cfg.n
        )));
    }
    if !(cfg.density > 0.0 && cfg.density <= 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "density must be in (0, 1], got {} (0 would produce an empty graph)",
            cfg.density
        )));
    }
    if cfg.n_hubs > 0 && cfg.hub_ratio <= 1.0 {
        return Err(CoreError::InvalidParameter(format!(
            "hub_ratio must be > 1, got {}",
            cfg.hub_ratio
        )));
    }
    if !(0.0..=1.0).contains(&cfg.dale_fraction) {
        return Err(CoreError::InvalidParameter(format!(
            "dale_fraction must be in [0, 1], got {}",
            cfg.dale_fraction
        )));
    }
    if !(cfg.weight_mean > 0.0 && cfg.weight_mean.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "weight_mean must be positive, got {}",
            cfg.weight_mean
        )));
    }

    let mut rng = seeded_rng(seed);
    let n = cfg.n;
    let sign: Vec<i8> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < cfg.dale_fraction {
                1
            } else {
                -1
            }
        })
        .collect();

    // Exponential(mean w0) magnitude via inverse CDF on an open-interval
    // uniform draw.
    let mut draw_mag = |rng: &mut ChaCha8Rng, mean: f64| -> f64 {
        let u: f64 = rng.random();
        -mean * (1.0 - u).ln()
    };

    let hub_ids: Vec<usize> = (0..cfg.n_hubs).collect();
    let mut adjacency = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let is_hub = j < cfg.n_hubs;
        for i in 0..n {
            if i == j {
                continue;
            }
            let connected = if is_hub {
                true
            } else {
                rng.random::<f64>() < cfg.density
            };
            if connected {
                let mut mag = draw_mag(&mut rng, cfg.weight_mean);
                if is_hub {
                    mag *= cfg.hub_ratio;
                }
                adjacency[[i, j]] = f64::from(sign[j]) * mag;
            }
        }
    }

    // Guarantee the hub outbound-mass criterion even for unlucky draws:
    // scale any hub column that falls short of hub_ratio x the median
    // non-hub column mass.
    if cfg.n_hubs > 0 {
        let mut non_hub_mass: Vec<f64> = (cfg.n_hubs..n)
            .map(|j| adjacency.column(j).iter().map(|w| w.abs()).sum())
            .collect();
        non_hub_mass.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = median_of_sorted(&non_hub_mass);
        let target = cfg.hub_ratio * median;
        for &h in &hub_ids {
            let mass: f64 = adjacency.column(h).iter().map(|w| w.abs()).sum();
            if mass > 0.0 && mass < target {
                let scale = target / mass;
                for i in 0..n {
                    adjacency[[i, h]] *= scale;
                }
            }
        }
    }

    GroundTruthNetwork::new(adjacency, hub_ids, sign)
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

/// Integration and neuron parameters for the LIF simulation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LifParams {
    /// Membrane time constant (ms).
    pub tau_ms: f64,
    /// Stochastic drive scale.
    pub sigma_noise: f64,
    /// Constant input current.
    pub i_drive: f64,
    /// Spike threshold.
    pub v_thresh: f64,
    /// Reset potential.
    pub v_reset: f64,
    /// Absolute refractory period (ms).
    pub refractory_ms: f64,
    /// Integration step (ms).
    pub dt_ms: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            tau_ms: 10.0,
            sigma_noise: 0.5,
            i_drive: 0.9,
            v_thresh: 1.0,
            v_reset: 0.0,
            refractory_ms: 2.0,
            dt_ms: 0.1,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tau_ms", self.tau_ms),
            ("sigma_noise", self.sigma_noise),
            ("i_drive", self.i_drive),
            ("v_thresh", self.v_thresh),
            ("v_reset", self.v_reset),
            ("refractory_ms", self.refractory_ms),
            ("dt_ms", self.dt_ms),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(CoreError::InvalidParameter(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        if self.tau_ms <= 0.0 {
            return Err(CoreError::InvalidParameter("tau_ms must be > 0".into()));
        }
        if self.dt_ms <= 0.0 {
            return Err(CoreError::InvalidParameter("dt_ms must be > 0".into()));
        }
        if self.dt_ms > self.tau_ms / 5.0 {
            return Err(CoreError::InvalidParameter(format!(
                "dt_ms {} must be <= tau_ms / 5 = {}",
                self.dt_ms,
                self.tau_ms / 5.0
            )));
        }
        if self.v_reset >= self.v_thresh {
            return Err(CoreError::InvalidParameter(
                "v_reset must be < v_thresh".into(),
            ));
        }
        if self.sigma_noise < 0.0 {
            return Err(CoreError::InvalidParameter(
                "sigma_noise must be >= 0".into(),
            ));
        }
        if self.refractory_ms < 0.0 {
            return Err(CoreError::InvalidParameter(
                "refractory_ms must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// One spike event. `time_ms` is always a whole number of microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub time_ms: f64,
    pub neuron: usize,
}

/// Ordered spike events over a simulation of `duration_ms`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    pub events: Vec<SpikeEvent>,
    pub duration_ms: f64,
    pub n: usize,
}

impl SpikeTrain {
    /// Validate ordering and neuron-id invariants.
    pub fn new(events: Vec<SpikeEvent>, duration_ms: f64, n: usize) -> Result<Self> {
        if duration_ms < 0.0 || !duration_ms.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "duration_ms must be finite and >= 0, got {duration_ms}"
            )));
        }
        let mut prev = f64::NEG_INFINITY;
        for ev in &events {
            if ev.neuron >= n {
                return Err(CoreError::InvalidParameter(format!(
                    "neuron id {} out of range (n = {n})",
                    ev.neuron
                )));
            }
            if ev.time_ms < prev {
                return Err(CoreError::InvalidParameter(format!(
                    "event times must be non-decreasing: {} after {prev}",
                    ev.time_ms
                )));
            }
            prev = ev.time_ms;
        }
        Ok(Self {
            events,
            duration_ms,
            n,
        })
    }

    /// Spike count per neuron.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n];
        for ev in &self.events {
            counts[ev.neuron] += 1;
        }
        counts
    }

    /// Mean population firing rate in Hz.
    pub fn mean_rate_hz(&self) -> f64 {
        if self.duration_ms <= 0.0 || self.n == 0 {
            return 0.0;
        }
        self.events.len() as f64 / (self.n as f64 * self.duration_ms / 1000.0)
    }
}

const RUNAWAY_WINDOW_MS: f64 = 10.0;
const RUNAWAY_BASELINE_FACTOR: f64 = 50.0;
const RUNAWAY_WARMUP_WINDOWS: u64 = 10;
/// Per-neuron firing-rate floor (Hz) for the runaway baseline, so a few
/// stray spikes in a quiet network do not trip the guard.
const RUNAWAY_FLOOR_HZ: f64 = 1.0;
/// Fraction of the refractory-limited saturation rate that always aborts,
/// catching networks that explode before a baseline exists.
const RUNAWAY_SATURATION_FRACTION: f64 = 0.9;

/// Resumable simulation. `run` may be called repeatedly; the RNG stream,
/// membrane state and pending pulses carry over, so chunked runs are
/// bitwise identical to a single run of the total duration.
pub struct LifSimulator<'a> {
    net: &'a GroundTruthNetwork,
    params: LifParams,
    v: Vec<f64>,
    refr_left: Vec<u32>,
    pending: Vec<f64>,
    step: u64,
    rng: ChaCha8Rng,
    refr_steps: u32,
    noise_scale: f64,
    dt_us: i64,
    // runaway guard bookkeeping
    window_steps: u64,
    window_count: u64,
    windows_done: u64,
    windows_total_spikes: u64,
}

impl<'a> LifSimulator<'a> {
    pub fn new(net: &'a GroundTruthNetwork, params: LifParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let dt_us = (params.dt_ms * 1000.0).round() as i64;
        if dt_us <= 0 || ((dt_us as f64) / 1000.0 - params.dt_ms).abs() > 1e-9 {
            return Err(CoreError::InvalidParameter(format!(
                "dt_ms {} must be a whole number of microseconds",
                params.dt_ms
            )));
        }
        let refr_steps = (params.refractory_ms / params.dt_ms).round() as u32;
        let noise_scale = params.sigma_noise * (2.0 * params.dt_ms / params.tau_ms).sqrt();
        Ok(Self {
            net,
            params,
            v: vec![params.v_reset; net.n()],
            refr_left: vec![0; net.n()],
            pending: vec![0.0; net.n()],
            step: 0,
            rng: seeded_rng(seed),
            refr_steps,
            noise_scale,
            dt_us,
            window_steps: (RUNAWAY_WINDOW_MS / params.dt_ms).round().max(1.0) as u64,
            window_count: 0,
            windows_done: 0,
            windows_total_spikes: 0,
        })
    }

    /// Elapsed simulated time in ms.
    pub fn elapsed_ms(&self) -> f64 {
        (self.step as i64 * self.dt_us) as f64 / 1000.0
    }

    /// Advance by `chunk_ms` (must be a whole number of steps), appending
    /// emitted events to `events`.
    pub fn run(&mut self, chunk_ms: f64, events: &mut Vec<SpikeEvent>) -> Result<()> {
        if !(chunk_ms > 0.0) || !chunk_ms.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "chunk duration must be > 0, got {chunk_ms}"
            )));
        }
        let steps_f = chunk_ms / self.params.dt_ms;
        let steps = steps_f.round();
        if (steps_f - steps).abs() > 1e-6 {
            return Err(CoreError::InvalidParameter(format!(
                "chunk duration {chunk_ms} ms is not a whole number of {} ms steps",
                self.params.dt_ms
            )));
        }
        for _ in 0..steps as u64 {
            self.step(events)?;
        }
        Ok(())
    }

    fn step(&mut self, events: &mut Vec<SpikeEvent>) -> Result<()> {
        let n = self.net.n();
        let p = &self.params;
        self.step += 1;
        let time_ms = (self.step as i64 * self.dt_us) as f64 / 1000.0;

        // One normal draw per neuron per step, refractory or not, so the
        // stream position depends only on the step count.
        let leak = p.dt_ms / p.tau_ms;
        let mut spiked: Vec<usize> = Vec::new();
        for i in 0..n {
            let xi: f64 = self.rng.sample(StandardNormal);
            if self.refr_left[i] > 0 {
                self.refr_left[i] -= 1;
                self.v[i] = p.v_reset;
                continue;
            }
            self.v[i] += leak * (p.i_drive - self.v[i])
                + self.noise_scale * xi
                + self.pending[i];
            if self.v[i] >= p.v_thresh {
                spiked.push(i);
                self.v[i] = p.v_reset;
                self.refr_left[i] = self.refr_steps;
            }
        }
        self.pending.iter_mut().for_each(|x| *x = 0.0);
        for &j in &spiked {
            events.push(SpikeEvent {
                time_ms,
                neuron: j,
            });
            let col = self.net.adjacency().column(j);
            for (i, w) in col.iter().enumerate() {
                if *w != 0.0 {
                    self.pending[i] += *w;
                }
            }
        }

        // Runaway guard over completed 10 ms windows.
        self.window_count += spiked.len() as u64;
        if self.step % self.window_steps == 0 {
            let saturation = (n as f64) * (self.window_steps as f64)
                / f64::from(self.refr_steps.max(1));
            let sat_limit = (RUNAWAY_SATURATION_FRACTION * saturation).ceil() as u64;
            let mut limit = sat_limit;
            if self.windows_done >= RUNAWAY_WARMUP_WINDOWS {
                let baseline = (self.windows_total_spikes as f64
                    / self.windows_done as f64)
                    .max(n as f64 * RUNAWAY_WINDOW_MS / 1000.0 * RUNAWAY_FLOOR_HZ);
                limit = limit.min((RUNAWAY_BASELINE_FACTOR * baseline).ceil() as u64);
            }
            if self.window_count > limit {
                return Err(CoreError::Runaway {
                    window_start_ms: time_ms - RUNAWAY_WINDOW_MS,
                    window_ms: RUNAWAY_WINDOW_MS,
                    count: self.window_count,
                    limit,
                });
            }
            self.windows_done += 1;
            self.windows_total_spikes += self.window_count;
            self.window_count = 0;
        }
        Ok(())
    }
}

/// Simulate the network for `duration_ms`. Deterministic per seed.
pub fn simulate(
    net: &GroundTruthNetwork,
    params: &LifParams,
    duration_ms: f64,
    seed: u64,
) -> Result<SpikeTrain> {
    if !(duration_ms > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "duration_ms must be > 0, got {duration_ms}"
        )));
    }
    let mut sim = LifSimulator::new(net, *params, seed)?;
    let mut events = Vec::new();
    sim.run(duration_ms, &mut events)?;
    SpikeTrain::new(events, duration_ms, net.n())
}
