//! Measurement-side analytics: load-point voltage and area admittance from
//! the root measurements, stall detection from the susceptance jump, and
//! closed-form estimates of the thermal-trip recovery time.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::load::Motor1PhaseParameters;
use crate::grid::BusId;
use crate::pmu::{group_by_area, AreaStream, MuPmuFrame};

/// Below this root voltage the admittance estimate is meaningless.
pub const MIN_USABLE_VOLTAGE: f64 = 0.05;

/// `V_L = V − I z_f`: voltage behind the equivalent feeder.
pub fn compute_load_point_voltage(v: Complex64, i: Complex64, feeder_z: Complex64) -> Complex64 {
    v - i * feeder_z
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AreaAdmittanceSeries {
    pub area: String,
    pub t: Vec<f64>,
    /// `G − jB` per sample; zero where unusable.
    pub y: Vec<Complex64>,
    /// Root voltage magnitude.
    pub v_root: Vec<f64>,
    /// Load-point voltage magnitude behind the equivalent feeder.
    pub v_load: Vec<f64>,
    pub usable: Vec<bool>,
}

impl AreaAdmittanceSeries {
    /// Susceptance with inductive load positive.
    pub fn b(&self, k: usize) -> f64 {
        -self.y[k].im
    }
}

/// Admittance `i / v` per sample. Samples with `|v| ≤ 0.05` are flagged
/// unusable.
pub fn compute_area_admittance(stream: &AreaStream, feeder_z: Complex64) -> AreaAdmittanceSeries {
    let n = stream.len();
    let mut out = AreaAdmittanceSeries {
        area: stream.area.clone(),
        t: stream.t.clone(),
        y: Vec::with_capacity(n),
        v_root: Vec::with_capacity(n),
        v_load: Vec::with_capacity(n),
        usable: Vec::with_capacity(n),
    };
    for k in 0..n {
        let (v, i) = (stream.v[k], stream.i[k]);
        let ok = v.norm() > MIN_USABLE_VOLTAGE;
        out.y.push(if ok { i / v } else { Complex64::new(0.0, 0.0) });
        out.v_root.push(v.norm());
        out.v_load.push(compute_load_point_voltage(v, i, feeder_z).norm());
        out.usable.push(ok);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    pub pre_window_s: f64,
    pub post_window_s: f64,
    pub jump_ratio: f64,
    /// Detection requires the root voltage to be below this level.
    pub max_voltage: f64,
    /// Samples below this root voltage are treated as fault-on and never
    /// enter a detection window.
    pub fault_voltage: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            pre_window_s: 0.5,
            post_window_s: 0.1,
            jump_ratio: 2.0,
            max_voltage: 0.9,
            fault_voltage: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaEvent {
    pub area: String,
    pub t_detect: f64,
    pub pre_b: f64,
    pub post_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidvrEvent {
    pub t_detect: f64,
    pub areas: Vec<AreaEvent>,
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Looks for the stall signature in one area: the median susceptance over a
/// short trailing window jumps to at least `jump_ratio` times its pre-event
/// level while the voltage is depressed. Windows never reach back across a
/// fault-on sample.
pub fn detect_area(series: &AreaAdmittanceSeries, cfg: &DetectionConfig) -> Result<Option<AreaEvent>> {
    let n = series.t.len();
    if n == 0 || series.t[n - 1] - series.t[0] < cfg.pre_window_s {
        return Err(Error::NotEnoughData(format!(
            "area {}: need {} s of history",
            series.area, cfg.pre_window_s
        )));
    }
    let t0 = series.t[0];
    let mut pre: Vec<f64> = (0..n)
        .take_while(|&k| series.t[k] < t0 + cfg.pre_window_s - 1e-9)
        .filter(|&k| series.usable[k])
        .map(|k| series.b(k))
        .collect();
    if pre.is_empty() {
        return Err(Error::NotEnoughData(format!("area {}: no usable pre-event samples", series.area)));
    }
    let pre_b = median(&mut pre);
    let first = pre.len();

    let excluded = |k: usize| !series.usable[k] || series.v_root[k] < cfg.fault_voltage;
    let mut window_start = first;
    let mut last_excluded: Option<usize> = None;
    let mut buf = Vec::new();
    for k in first..n {
        if excluded(k) {
            last_excluded = Some(k);
            continue;
        }
        while series.t[window_start] <= series.t[k] - cfg.post_window_s + 1e-9 {
            window_start += 1;
        }
        let lo = match last_excluded {
            Some(e) => window_start.max(e + 1),
            None => window_start,
        };
        buf.clear();
        buf.extend((lo..=k).map(|j| series.b(j)));
        let post_b = median(&mut buf);
        if pre_b > 0.0 && post_b >= cfg.jump_ratio * pre_b && series.v_root[k] < cfg.max_voltage {
            return Ok(Some(AreaEvent {
                area: series.area.clone(),
                t_detect: series.t[k],
                pre_b,
                post_b,
            }));
        }
    }
    Ok(None)
}

/// Runs detection on every area; `None` when no area shows the signature.
pub fn detect_fidvr(series: &[AreaAdmittanceSeries], cfg: &DetectionConfig) -> Result<Option<FidvrEvent>> {
    let mut areas = Vec::new();
    for s in series {
        if let Some(e) = detect_area(s, cfg)? {
            areas.push(e);
        }
    }
    Ok(areas
        .iter()
        .map(|e| e.t_detect)
        .reduce(f64::min)
        .map(|t_detect| FidvrEvent { t_detect, areas }))
}

/// Time for a stalled motor to heat from cold to the first trip
/// temperature at constant voltage `v_l`.
pub fn estimate_t1(v_l: f64, p: &Motor1PhaseParameters) -> Result<f64> {
    let heat = v_l * v_l * p.g_stall();
    if heat <= p.theta1 {
        return Err(Error::NeverTrips(format!(
            "heating {heat:.4} does not exceed the trip temperature {:.4}",
            p.theta1
        )));
    }
    Ok(-p.t_th * (1.0 - p.theta1 / heat).ln())
}

/// Approximate time from the first to the last trip, with the voltage
/// rising linearly from `v_l` to `v_recovery` while the motors drop out.
pub fn estimate_t2(v_l: f64, v_recovery: f64, p: &Motor1PhaseParameters) -> Result<f64> {
    let den = (v_l * v_l + v_recovery * v_recovery) * p.g_stall() - p.theta1 - p.theta2;
    if den <= 0.0 {
        return Err(Error::NoRecoveryEstimate(format!(
            "trip band is not crossed at v_l = {v_l:.4}"
        )));
    }
    Ok(2.0 * p.t_th * (p.theta2 - p.theta1) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaEstimate {
    pub t1: f64,
    pub t2: f64,
    pub t_total: f64,
    pub v_l: f64,
    pub v_recovery: f64,
    /// Time from detection until the measured susceptance starts to fall,
    /// when visible in the data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knee_t1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryEstimate {
    pub areas: BTreeMap<String, AreaEstimate>,
    /// Largest per-area total, `None` when no area yields an estimate.
    pub t_total: Option<f64>,
    pub flags: Vec<String>,
}

/// Parameters of one area used by the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaModel {
    pub feeder_z: Complex64,
    pub motor1: Motor1PhaseParameters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationConfig {
    pub v_recovery: f64,
    /// Length of the flat post-stall window used for `v_l`.
    pub flat_window_s: f64,
    /// Relative susceptance drop that marks the knee.
    pub knee_drop: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            v_recovery: 0.95,
            flat_window_s: 0.5,
            knee_drop: 0.05,
        }
    }
}

/// Median load-point voltage over the flat window after detection.
pub fn flat_window_voltage(series: &AreaAdmittanceSeries, t_detect: f64, window: f64) -> Option<f64> {
    let mut vals: Vec<f64> = (0..series.t.len())
        .filter(|&k| series.usable[k] && series.t[k] >= t_detect - 1e-9 && series.t[k] < t_detect + window - 1e-9)
        .map(|k| series.v_load[k])
        .collect();
    (!vals.is_empty()).then(|| median(&mut vals))
}

/// Mean root voltage and area current phasors over the flat window.
pub fn flat_window_phasors(stream: &AreaStream, t_detect: f64, window: f64) -> Option<(Complex64, Complex64)> {
    let idx: Vec<usize> = (0..stream.len())
        .filter(|&k| {
            stream.t[k] >= t_detect - 1e-9 && stream.t[k] < t_detect + window - 1e-9 && stream.v[k].norm() > MIN_USABLE_VOLTAGE
        })
        .collect();
    if idx.is_empty() {
        return None;
    }
    let n = idx.len() as f64;
    let v = idx.iter().map(|&k| stream.v[k]).sum::<Complex64>() / n;
    let i = idx.iter().map(|&k| stream.i[k]).sum::<Complex64>() / n;
    Some((v, i))
}

/// First time after the flat window at which the susceptance has fallen by
/// `drop` relative to its flat-window median, measured from detection.
pub fn susceptance_knee(series: &AreaAdmittanceSeries, t_detect: f64, window: f64, drop: f64) -> Option<f64> {
    let idx: Vec<usize> = (0..series.t.len())
        .filter(|&k| series.usable[k] && series.t[k] >= t_detect - 1e-9)
        .collect();
    let mut flat: Vec<f64> = idx
        .iter()
        .filter(|&&k| series.t[k] < t_detect + window - 1e-9)
        .map(|&k| series.b(k))
        .collect();
    if flat.is_empty() {
        return None;
    }
    let level = median(&mut flat);
    idx.iter()
        .find(|&&k| series.t[k] >= t_detect + window - 1e-9 && series.b(k) < (1.0 - drop) * level)
        .map(|&k| series.t[k] - t_detect)
}

/// Per-area `t1 + t2` from the flat-window voltage, and their maximum.
pub fn estimate_recovery(
    event: &FidvrEvent,
    series: &[AreaAdmittanceSeries],
    models: &BTreeMap<String, AreaModel>,
    cfg: &EstimationConfig,
) -> Result<RecoveryEstimate> {
    let mut out = RecoveryEstimate {
        areas: BTreeMap::new(),
        t_total: None,
        flags: Vec::new(),
    };
    for ev in &event.areas {
        let s = series
            .iter()
            .find(|s| s.area == ev.area)
            .ok_or_else(|| Error::invalid(format!("no series for area {}", ev.area)))?;
        let model = models
            .get(&ev.area)
            .ok_or_else(|| Error::invalid(format!("no sub-model parameters for area {}", ev.area)))?;
        let Some(v_l) = flat_window_voltage(s, ev.t_detect, cfg.flat_window_s) else {
            out.flags.push(format!("{}: no usable samples after detection", ev.area));
            continue;
        };
        let t1 = match estimate_t1(v_l, &model.motor1) {
            Ok(t) => t,
            Err(e) => {
                out.flags.push(format!("{}: no thermal recovery predicted ({e})", ev.area));
                continue;
            }
        };
        let t2 = match estimate_t2(v_l, cfg.v_recovery, &model.motor1) {
            Ok(t) => t,
            Err(e) => {
                out.flags.push(format!("{}: no recovery estimate ({e})", ev.area));
                continue;
            }
        };
        let knee_t1 = susceptance_knee(s, ev.t_detect, cfg.flat_window_s, cfg.knee_drop);
        out.areas.insert(
            ev.area.clone(),
            AreaEstimate {
                t1,
                t2,
                t_total: t1 + t2,
                v_l,
                v_recovery: cfg.v_recovery,
                knee_t1,
            },
        );
    }
    out.t_total = out.areas.values().map(|e| e.t_total).reduce(f64::max);
    if out.t_total.is_none() {
        out.flags.push("alarm: stall detected but no area yields a recovery estimate".into());
    }
    Ok(out)
}
/// Mean root phasors of one area over the flat window, kept so the
/// mitigation step can rebuild the stalled operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredPhasors {
    pub node: BusId,
    pub v: Complex64,
    pub i: Complex64,
}

/// Everything the monitor learns from one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub event: Option<FidvrEvent>,
    pub estimates: BTreeMap<String, AreaEstimate>,
    pub t_total: Option<f64>,
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub operating_point: BTreeMap<String, MeasuredPhasors>,
}

impl MonitorReport {
    pub fn recovery_estimate(&self) -> RecoveryEstimate {
        RecoveryEstimate {
            areas: self.estimates.clone(),
            t_total: self.t_total,
            flags: self.flags.clone(),
        }
    }

    /// The same report with `t2` recomputed for another recovery voltage.
    /// Areas that no longer cross the trip band are dropped and flagged.
    pub fn with_recovery_voltage(&self, models: &BTreeMap<String, AreaModel>, v_recovery: f64) -> Result<Self> {
        let mut out = self.clone();
        out.estimates.clear();
        for (id, e) in &self.estimates {
            let model = models
                .get(id)
                .ok_or_else(|| Error::invalid(format!("no sub-model parameters for area {id}")))?;
            match estimate_t2(e.v_l, v_recovery, &model.motor1) {
                Ok(t2) => {
                    out.estimates.insert(
                        id.clone(),
                        AreaEstimate {
                            t2,
                            t_total: e.t1 + t2,
                            v_recovery,
                            ..*e
                        },
                    );
                }
                Err(err) => out.flags.push(format!("{id}: no recovery estimate ({err})")),
            }
        }
        out.t_total = out.estimates.values().map(|e| e.t_total).reduce(f64::max);
        Ok(out)
    }
}

/// Detection and recovery estimation on a frame stream. Areas without a
/// model are skipped and flagged.
pub fn monitor_frames(
    frames: &[MuPmuFrame],
    models: &BTreeMap<String, AreaModel>,
    detection: &DetectionConfig,
    estimation: &EstimationConfig,
) -> Result<MonitorReport> {
    let mut flags = Vec::new();
    let streams: Vec<AreaStream> = group_by_area(frames)
        .into_iter()
        .filter(|s| {
            let known = models.contains_key(&s.area);
            if !known {
                flags.push(format!("{}: no sub-model parameters, channel ignored", s.area));
            }
            known
        })
        .collect();
    let series: Vec<AreaAdmittanceSeries> = streams
        .iter()
        .map(|s| compute_area_admittance(s, models[&s.area].feeder_z))
        .collect();
    let unusable: usize = series.iter().map(|s| s.usable.iter().filter(|u| !**u).count()).sum();
    if unusable > 0 {
        flags.push(format!("{unusable} samples below {MIN_USABLE_VOLTAGE} p.u. marked unusable"));
    }
    let Some(event) = detect_fidvr(&series, detection)? else {
        return Ok(MonitorReport {
            event: None,
            estimates: BTreeMap::new(),
            t_total: None,
            flags,
            operating_point: BTreeMap::new(),
        });
    };
    let est = estimate_recovery(&event, &series, models, estimation)?;
    flags.extend(est.flags);
    let operating_point = streams
        .iter()
        .filter_map(|s| {
            flat_window_phasors(s, event.t_detect, estimation.flat_window_s)
                .map(|(v, i)| (s.area.clone(), MeasuredPhasors { node: s.node, v, i }))
        })
        .collect();
    Ok(MonitorReport {
        event: Some(event),
        estimates: est.areas,
        t_total: est.t_total,
        flags,
        operating_point,
    })
}
