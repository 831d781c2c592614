//! Synthetic monitoring traces with a diurnal Gaussian-mixture shape.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ResourceSample, Trace, TraceError};

/// One diurnal mixture component: a bump of activity centered at a
/// time of day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiurnalComponent {
    pub center_hour: f64,
    pub std_hours: f64,
    pub amplitude: f64,
}

impl DiurnalComponent {
    /// Mixture value at a time of day, hour distance wrapped on the 24h circle.
    pub fn eval(&self, hour_of_day: f64) -> f64 {
        let mut d = (hour_of_day - self.center_hour).abs() % 24.0;
        if d > 12.0 {
            d = 24.0 - d;
        }
        self.amplitude * (-d * d / (2.0 * self.std_hours * self.std_hours)).exp()
    }
}

/// Parameters of the synthetic workload behaviour reflected in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub interval_seconds: u64,
    pub cpu_base: f64,
    pub ram_base: f64,
    pub disk_base: f64,
    pub components: Vec<DiurnalComponent>,
    /// Gaussian noise std applied to cpu (ram/net get scaled copies).
    pub noise: f64,
    /// bytes per interval corresponding to 100% cpu activity
    pub net_scale: f64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        SynthProfile {
            interval_seconds: 60,
            cpu_base: 20.0,
            ram_base: 30.0,
            disk_base: 45.0,
            components: vec![
                DiurnalComponent {
                    center_hour: 12.0,
                    std_hours: 1.6,
                    amplitude: 55.0,
                },
                DiurnalComponent {
                    center_hour: 19.0,
                    std_hours: 1.2,
                    amplitude: 25.0,
                },
            ],
            noise: 3.0,
            net_scale: 100_000.0,
        }
    }
}

impl SynthProfile {
    pub fn validate(&self) -> Result<(), TraceError> {
        for c in &self.components {
            if c.std_hours <= 0.0 {
                return Err(TraceError::InvalidProfile(format!(
                    "non-positive std_hours: {}",
                    c.std_hours
                )));
            }
        }
        if self.noise < 0.0 {
            return Err(TraceError::InvalidProfile(format!(
                "negative noise: {}",
                self.noise
            )));
        }
        if self.interval_seconds == 0 {
            return Err(TraceError::InvalidProfile("zero interval".into()));
        }
        Ok(())
    }

    pub fn diurnal(&self, hour_of_day: f64) -> f64 {
        self.components.iter().map(|c| c.eval(hour_of_day)).sum()
    }
}

/// Generates `steps` samples for each of `node_count` nodes starting at
/// `start_timestamp`. Deterministic for a given seed.
pub fn synthesize_trace(
    profile: &SynthProfile,
    node_count: usize,
    steps: usize,
    start_timestamp: i64,
    seed: u64,
) -> Result<Trace, TraceError> {
    profile.validate()?;
    let mut trace = Trace::default();
    for node_idx in 0..node_count {
        let node_id = format!("n{node_idx}");
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64
            .wrapping_mul(node_idx as u64 + 1)));
        // small per-node phase shift so the fleet is not in lockstep
        let phase = (node_idx as f64) * 0.35;
        let noise = if profile.noise > 0.0 {
            Some(Normal::new(0.0, profile.noise).unwrap())
        } else {
            None
        };
        let mut series = Vec::with_capacity(steps);
        let mut ram_carry = 0.0;
        for step in 0..steps {
            let ts = start_timestamp + (step as u64 * profile.interval_seconds) as i64;
            let hour = (ts.rem_euclid(86_400)) as f64 / 3600.0 + phase;
            let level = profile.diurnal(hour);
            let draw = |rng: &mut ChaCha8Rng| noise.map(|n| n.sample(rng)).unwrap_or(0.0);

            let cpu = (profile.cpu_base + level + draw(&mut rng)).clamp(0.0, 100.0);
            // ram trails the diurnal level with a sluggish response
            ram_carry = 0.9 * ram_carry + 0.1 * (0.6 * level);
            let ram = (profile.ram_base + ram_carry + 0.3 * draw(&mut rng)).clamp(0.0, 100.0);
            let disk = (profile.disk_base + 0.05 * draw(&mut rng)).clamp(0.0, 100.0);
            let activity = (cpu / 100.0).max(0.0);
            let net_sent = (profile.net_scale * activity * (1.0 + 0.02 * draw(&mut rng))).max(0.0);
            let net_recv =
                (profile.net_scale * 2.0 * activity * (1.0 + 0.02 * draw(&mut rng))).max(0.0);

            series.push(ResourceSample {
                timestamp: ts,
                node_id: node_id.clone(),
                cpu,
                ram,
                disk,
                net_sent,
                net_recv,
            });
        }
        trace.nodes.insert(node_id, series);
    }
    Ok(trace)
}
