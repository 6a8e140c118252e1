use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dataset::AreaRecord;
use super::optimize::{multi_start, start_points, NelderMeadOptions};
use super::{simulate_submodel, SubModelParameters};

/// Names of the fitted parameters, in vector order. `theta_gap` is
/// `θ2 − θ1`, which keeps the trip band ordered for every trial point.
pub const FIT_PARAMETERS: [&str; 7] = ["f_m1", "f_m3", "r_stall", "x_stall", "t_th", "theta1", "theta_gap"];

/// Indices of the parameters that only matter once A/C stalls.
const STALL_PARAMETERS: [usize; 5] = [2, 3, 4, 5, 6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub starts: usize,
    pub seed: u64,
    pub bounds: [(f64, f64); 7],
    /// Parameters held at their prior value.
    pub fixed: [bool; 7],
    pub rel_tol: f64,
    pub stall_iterations: usize,
    pub max_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 0,
            bounds: [
                (0.0, 0.8),
                (0.0, 0.8),
                (0.02, 0.3),
                (0.02, 0.3),
                (5.0, 30.0),
                (0.2, 1.5),
                (0.3, 5.0),
            ],
            fixed: [false; 7],
            rel_tol: 1e-6,
            stall_iterations: 50,
            max_iterations: 1000,
        }
    }
}

/// One area's fitting problem: a prior parameter set (also the source of
/// every fixed value) and the measured records it should reproduce.
#[derive(Debug, Clone)]
pub struct FitProblem {
    pub prior: SubModelParameters,
    pub records: Vec<AreaRecord>,
    pub dt: f64,
    pub base_mva: f64,
    pub pq_low_voltage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelNrmse {
    pub p: f64,
    pub q: f64,
    /// Set when a channel has no range and the value is an absolute RMSE.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub absolute: bool,
}

impl ChannelNrmse {
    pub fn worst(&self) -> f64 {
        self.p.max(self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub eta_start: f64,
    pub eta_end: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: SubModelParameters,
    pub eta: f64,
    pub zip_baseline_eta: f64,
    /// Worst channel error over the training records.
    pub nrmse: ChannelNrmse,
    pub starts: Vec<StartSummary>,
    pub best_start: usize,
    /// False when no training record stalled; the stall parameters then
    /// keep their prior values.
    pub stall_identified: bool,
}

fn vector(p: &SubModelParameters) -> [f64; 7] {
    let m = &p.motor1;
    [p.f_m1, p.f_m3, m.r_stall, m.x_stall, m.t_th, m.theta1, m.theta2 - m.theta1]
}

/// Parameters for the vector `x`; the static share takes the remainder.
pub fn parameters_from_vector(prior: &SubModelParameters, x: &[f64; 7]) -> SubModelParameters {
    let mut p = prior.clone();
    let room = (1.0 - p.f_el).max(0.0);
    let (mut m1, mut m3) = (x[0].max(0.0), x[1].max(0.0));
    if m1 + m3 > room {
        let k = room / (m1 + m3);
        m1 *= k;
        m3 *= k;
    }
    p.f_m1 = m1;
    p.f_m3 = m3;
    p.f_s = (1.0 - p.f_el - m1 - m3).max(0.0);
    p.motor1.r_stall = x[2];
    p.motor1.x_stall = x[3];
    p.motor1.t_th = x[4];
    p.motor1.theta1 = x[5];
    p.motor1.theta2 = x[5] + x[6];
    p
}

/// Scales `p_load_kw` so the model draws the measured pre-disturbance
/// active power.
pub fn calibrate_load(p: &mut SubModelParameters, record: &AreaRecord, base_mva: f64, pq_low: f64) -> Result<()> {
    let (Some(&v0), Some(&s0)) = (record.v.first(), record.s.first()) else {
        return Err(Error::NotEnoughData(format!("area {}: empty record", record.area)));
    };
    for _ in 0..3 {
        let tr = simulate_submodel(p, &[v0], 1.0, base_mva, Some(pq_low))?;
        let drawn = tr.s[0].re;
        if !(drawn.abs() > 1e-12) {
            break;
        }
        p.p_load_kw *= s0.re / drawn;
    }
    Ok(())
}

struct Scales {
    p: f64,
    q: f64,
    samples: f64,
}

fn channel_scales(records: &[AreaRecord]) -> Scales {
    let range = |f: &dyn Fn(&num_complex::Complex64) -> f64| {
        let (lo, hi) = records
            .iter()
            .flat_map(|r| r.s.iter())
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if hi > lo {
            hi - lo
        } else {
            0.0
        }
    };
    Scales {
        p: range(&|s| s.re),
        q: range(&|s| s.im),
        samples: records.iter().map(|r| r.s.len()).sum::<usize>() as f64,
    }
}

/// Range-normalised squared error of the model over the records. With
/// one record this is `NRMSE_P² + NRMSE_Q²`.
pub fn objective(p: &SubModelParameters, problem: &FitProblem) -> Result<f64> {
    let sc = channel_scales(&problem.records);
    let wp = if sc.p > 0.0 { 1.0 / (sc.p * sc.p) } else { 1.0 };
    let wq = if sc.q > 0.0 { 1.0 / (sc.q * sc.q) } else { 1.0 };
    let mut sum = 0.0;
    for r in &problem.records {
        let tr = simulate_submodel(p, &r.v, problem.dt, problem.base_mva, Some(problem.pq_low_voltage))?;
        for (m, d) in tr.s.iter().zip(&r.s) {
            sum += wp * (m.re - d.re).powi(2) + wq * (m.im - d.im).powi(2);
        }
    }
    Ok(sum / sc.samples.max(1.0))
}

/// NRMSE of the model against each record, P and Q separately.
pub fn evaluate_fit(p: &SubModelParameters, records: &[AreaRecord], dt: f64, base_mva: f64, pq_low: f64) -> Result<Vec<ChannelNrmse>> {
    records
        .iter()
        .map(|r| {
            let tr = simulate_submodel(p, &r.v, dt, base_mva, Some(pq_low))?;
            let n = r.s.len().max(1) as f64;
            let rmse = |f: fn(&num_complex::Complex64) -> f64| {
                (tr.s.iter().zip(&r.s).map(|(m, d)| (f(m) - f(d)).powi(2)).sum::<f64>() / n).sqrt()
            };
            let sc = channel_scales(std::slice::from_ref(r));
            let (rp, rq) = (rmse(|s| s.re), rmse(|s| s.im));
            Ok(ChannelNrmse {
                p: if sc.p > 0.0 { rp / sc.p } else { rp },
                q: if sc.q > 0.0 { rq / sc.q } else { rq },
                absolute: sc.p == 0.0 || sc.q == 0.0,
            })
        })
        .collect()
}

/// Least-squares fit of one area's sub-model to its records by seeded
/// multi-start Nelder–Mead.
///
/// Fails when no start beats the static-only model, since the motor blocks
/// then explain nothing in the data.
pub fn fit_parameters(problem: &FitProblem, cfg: &FitConfig) -> Result<FitResult> {
    if problem.records.is_empty() {
        return Err(Error::NotEnoughData(format!("area {}: no records to fit", problem.prior.area)));
    }
    let mut prior = problem.prior.clone();
    calibrate_load(&mut prior, &problem.records[0], problem.base_mva, problem.pq_low_voltage)?;

    let stall_identified = problem.records.iter().any(|r| r.stalled);
    let mut fixed = cfg.fixed;
    if !stall_identified {
        for k in STALL_PARAMETERS {
            fixed[k] = true;
        }
    }
    let full0 = vector(&prior);
    let free: Vec<usize> = (0..7).filter(|&k| !fixed[k]).collect();
    let bounds: Vec<(f64, f64)> = free.iter().map(|&k| cfg.bounds[k]).collect();
    let expand = |x: &[f64]| {
        let mut full = full0;
        for (&k, &v) in free.iter().zip(x) {
            full[k] = v;
        }
        let mut p = parameters_from_vector(&prior, &full);
        if calibrate_load(&mut p, &problem.records[0], problem.base_mva, problem.pq_low_voltage).is_err() {
            return None;
        }
        Some(p)
    };
    let eta = |x: &[f64]| {
        expand(x)
            .and_then(|p| objective(&p, problem).ok())
            .unwrap_or(f64::INFINITY)
    };

    let x0: Vec<f64> = free.iter().map(|&k| full0[k].clamp(cfg.bounds[k].0, cfg.bounds[k].1)).collect();
    let starts = start_points(&x0, &bounds, cfg.starts, cfg.seed);
    let opts = NelderMeadOptions {
        rel_tol: cfg.rel_tol,
        stall_iterations: cfg.stall_iterations,
        max_iterations: cfg.max_iterations,
        ..NelderMeadOptions::default()
    };
    let minima = multi_start(eta, &starts, &bounds, &opts);
    let best_start = (0..minima.len())
        .min_by(|&a, &b| minima[a].value.total_cmp(&minima[b].value))
        .unwrap();
    let best = &minima[best_start];
    let params = expand(&best.x).ok_or_else(|| Error::FitFailed(format!("area {}: best point is not usable", prior.area)))?;

    let mut zip = prior.clone();
    zip.f_m1 = 0.0;
    zip.f_m3 = 0.0;
    zip.f_s = 1.0 - zip.f_el;
    calibrate_load(&mut zip, &problem.records[0], problem.base_mva, problem.pq_low_voltage)?;
    let zip_baseline_eta = objective(&zip, problem)?;
    // a static-only area fits the baseline exactly, which is not a failure
    if zip_baseline_eta > 1e-12 && !(best.value < zip_baseline_eta) {
        return Err(Error::FitFailed(format!(
            "area {}: best objective {:.4e} does not improve on the static-only model ({:.4e})",
            prior.area, best.value, zip_baseline_eta
        )));
    }

    let nrmse = evaluate_fit(&params, &problem.records, problem.dt, problem.base_mva, problem.pq_low_voltage)?
        .into_iter()
        .fold(ChannelNrmse { p: 0.0, q: 0.0, absolute: false }, |acc, c| ChannelNrmse {
            p: acc.p.max(c.p),
            q: acc.q.max(c.q),
            absolute: acc.absolute || c.absolute,
        });
    Ok(FitResult {
        params,
        eta: best.value,
        zip_baseline_eta,
        nrmse,
        starts: minima
            .iter()
            .map(|m| StartSummary {
                eta_start: m.trace.first().copied().unwrap_or(m.value),
                eta_end: m.value,
                iterations: m.iterations,
                evaluations: m.evaluations,
            })
            .collect(),
        best_start,
        stall_identified,
    })
}
