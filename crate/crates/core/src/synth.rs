//! Seeded synthetic load and PV profiles for tests and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::timegrid::TimeGrid;

/// Shape parameters of the synthetic site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    /// Mean load in kW.
    pub base_kw: f64,
    /// Amplitude of the daily load cycle in kW.
    pub daily_kw: f64,
    /// Amplitude of the seasonal load swing in kW.
    pub seasonal_kw: f64,
    /// Half-width of uniform per-step noise in kW.
    pub noise_kw: f64,
    pub pv_peak_kw: f64,
    /// Expected number of load spikes per day.
    pub spikes_per_day: f64,
    pub spike_kw: (f64, f64),
    /// Spike duration range in hours.
    pub spike_hours: (f64, f64),
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            base_kw: 450.0,
            daily_kw: 120.0,
            seasonal_kw: 80.0,
            noise_kw: 25.0,
            pv_peak_kw: 400.0,
            spikes_per_day: 0.6,
            spike_kw: (150.0, 550.0),
            spike_hours: (0.25, 2.0),
        }
    }
}

/// Load and PV series on `grid`. The same seed always gives the same series.
pub fn generate(grid: &TimeGrid, seed: u64, params: &SynthParams) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_steps();
    let spd = grid.steps_per_day();
    let dt = grid.dt_hours();
    let tau = std::f64::consts::TAU;

    let mut load = Vec::with_capacity(n);
    let mut pv = Vec::with_capacity(n);
    let mut cloud = 1.0;
    for t in 0..n {
        if t % spd == 0 {
            cloud = rng.random_range(0.35..1.0);
        }
        let hour = f64::from(grid.minute_of_day(t)) / 60.0;
        let doy = f64::from(chrono::Datelike::ordinal(&grid.timestamp(t).date()));
        let season = (tau * (doy - 200.0) / 365.0).cos();
        // evening-heavy daily cycle with a night-time shoulder
        let daily = (tau * (hour - 13.0) / 24.0).cos() + 0.35 * (2.0 * tau * (hour - 2.0) / 24.0).cos();
        let noise = rng.random_range(-1.0..=1.0) * params.noise_kw;
        let l = params.base_kw + params.daily_kw * daily + params.seasonal_kw * season + noise;
        load.push(l.max(0.0));

        let sun = (std::f64::consts::PI * (hour - 6.0) / 12.0).sin().max(0.0);
        let sunny_season = 0.8 + 0.2 * season;
        pv.push(params.pv_peak_kw * sun * sunny_season * cloud);
    }

    let p_spike = params.spikes_per_day / spd as f64;
    let mut t = 0;
    while t < n {
        if rng.random::<f64>() < p_spike {
            let kw = rng.random_range(params.spike_kw.0..=params.spike_kw.1);
            let hours = rng.random_range(params.spike_hours.0..=params.spike_hours.1);
            let len = ((hours / dt).round() as usize).max(1);
            for l in load.iter_mut().skip(t).take(len) {
                *l += kw;
            }
            t += len;
        } else {
            t += 1;
        }
    }
    (load, pv)
}
