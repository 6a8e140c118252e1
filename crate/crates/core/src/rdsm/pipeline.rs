use std::collections::BTreeMap;
use std::path::Path;

use log::{info, warn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FeederNetwork;
use crate::load::Motor1PhaseParameters;
use crate::monitor::AreaModel;
use crate::sim::{AreaSpec, SimConfig, Simulator};

use super::dataset::steady_records;
use super::{
    estimate_feeder_equivalent, fit_parameters, generate_surrogate_dataset, ChannelNrmse, EquivalentFeeder, FitConfig,
    FitDataset, FitProblem, FitResult, ScenarioSweepSpec, SteadyRecord, SubModelParameters,
};

pub const FITTED_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaFitSummary {
    pub eta: f64,
    pub nrmse: ChannelNrmse,
    pub stall_identified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitProvenance {
    pub toolkit_version: String,
    pub sweep: ScenarioSweepSpec,
    pub seed: u64,
    pub areas: BTreeMap<String, AreaFitSummary>,
}

/// Fitted sub-models of every area, as persisted on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FittedParamsFile {
    pub format_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<FitProvenance>,
    pub areas: Vec<SubModelParameters>,
}

impl FittedParamsFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text)?;
        if f.format_version != FITTED_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "fitted parameter format {} is not supported (expected {FITTED_FORMAT_VERSION})",
                f.format_version
            )));
        }
        for a in &f.areas {
            a.validate()?;
        }
        Ok(f)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn area(&self, id: &str) -> Option<&SubModelParameters> {
        self.areas.iter().find(|a| a.area == id)
    }

    /// Estimator inputs per area.
    pub fn models(&self) -> BTreeMap<String, AreaModel> {
        self.areas
            .iter()
            .map(|a| {
                (
                    a.area.clone(),
                    AreaModel {
                        feeder_z: a.feeder.impedance(),
                        motor1: a.motor1,
                    },
                )
            })
            .collect()
    }
}

/// Sub-model of an area with its census composition and relay settings
/// and a measured feeder equivalent.
pub fn census_parameters(spec: &AreaSpec, feeder_z: Complex64) -> SubModelParameters {
    let c = &spec.load.composition;
    SubModelParameters {
        area: spec.id.clone(),
        root: spec.root,
        p_load_kw: spec.total_kw(),
        f_s: c.f_s,
        f_el: c.f_el,
        f_m1: c.f_m1,
        f_m3: c.f_m3,
        f_pv: c.f_pv,
        feeder: EquivalentFeeder {
            r_f: feeder_z.re,
            x_f: feeder_z.im,
            b_f: 0.0,
            n_r: 1.0,
        },
        zip: spec.load.zip,
        motor1: spec.load.motor1,
        motor3: spec.load.motor3,
        pv: spec.load.pv,
    }
}

/// Starting point of a fit: the census static, PV and three-phase motor
/// data, generic motor shares and default relay settings.
pub fn fit_prior(spec: &AreaSpec, feeder_z: Complex64) -> SubModelParameters {
    let mut p = census_parameters(spec, feeder_z);
    p.f_m1 = 0.3;
    p.f_m3 = 0.1;
    p.f_s = 1.0 - p.f_el - p.f_m1 - p.f_m3;
    p.motor1 = Motor1PhaseParameters {
        v_stall: spec.load.motor1.v_stall,
        t_stall: spec.load.motor1.t_stall,
        ..Motor1PhaseParameters::default()
    };
    p
}

/// Feeder equivalent of every area from the dataset's steady records.
/// Areas whose measurement point is also their only load bus get zero.
pub fn feeder_equivalents(ds: &FitDataset) -> BTreeMap<String, Complex64> {
    equivalents(&ds.steady)
}

fn equivalents(steady: &BTreeMap<String, Vec<SteadyRecord>>) -> BTreeMap<String, Complex64> {
    steady
        .iter()
        .map(|(id, recs)| {
            let z = estimate_feeder_equivalent(recs).unwrap_or_else(|e| {
                warn!("area {id}: feeder equivalent not identifiable ({e}), using zero");
                Complex64::new(0.0, 0.0)
            });
            (id.clone(), z)
        })
        .collect()
}

/// Parameter file holding the census sub-model of every area behind its
/// measured feeder equivalent. No fitting is involved.
pub fn census_file(sim: &Simulator) -> Result<FittedParamsFile> {
    let z = equivalents(&steady_records(sim)?);
    Ok(FittedParamsFile {
        format_version: FITTED_FORMAT_VERSION,
        provenance: None,
        areas: sim
            .area_specs()
            .map(|spec| census_parameters(spec, z.get(&spec.id).copied().unwrap_or_default()))
            .collect(),
    })
}

/// Fits one area on every scenario of the dataset.
pub fn fit_area(ds: &FitDataset, prior: SubModelParameters, cfg: &FitConfig) -> Result<FitResult> {
    let records = ds
        .scenarios
        .iter()
        .filter(|s| s.fault.is_some())
        .filter_map(|s| s.area(&prior.area).cloned())
        .collect();
    let problem = FitProblem {
        prior,
        records,
        dt: ds.dt,
        base_mva: ds.base_mva,
        pq_low_voltage: ds.pq_low_voltage,
    };
    fit_parameters(&problem, cfg)
}

/// Surrogate generation and a fit per area.
///
/// Returns the parameter file together with the per-area results; areas
/// whose fit fails are reported as errors in the map and left out of the
/// file.
pub fn fit_rdsm(
    net: &FeederNetwork,
    areas: &[AreaSpec],
    sim: &SimConfig,
    sweep: &ScenarioSweepSpec,
    cfg: &FitConfig,
) -> Result<(FittedParamsFile, BTreeMap<String, Result<FitResult>>)> {
    let ds = generate_surrogate_dataset(net, areas, sim, sweep)?;
    if ds.scenarios.iter().filter(|s| s.fault.is_some()).count() == 0 {
        return Err(Error::NotEnoughData("sweep produced no usable fault scenario".into()));
    }
    let z = feeder_equivalents(&ds);
    let mut results = BTreeMap::new();
    for spec in areas {
        let prior = fit_prior(spec, z.get(&spec.id).copied().unwrap_or_default());
        let r = fit_area(&ds, prior, cfg);
        match &r {
            Ok(f) => info!("area {}: eta {:.3e}, worst NRMSE {:.4}", spec.id, f.eta, f.nrmse.worst()),
            Err(e) => warn!("area {}: {e}", spec.id),
        }
        results.insert(spec.id.clone(), r);
    }
    let mut file = FittedParamsFile {
        format_version: FITTED_FORMAT_VERSION,
        provenance: Some(FitProvenance {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            sweep: sweep.clone(),
            seed: cfg.seed,
            areas: BTreeMap::new(),
        }),
        areas: Vec::new(),
    };
    for spec in areas {
        if let Some(Ok(r)) = results.get(&spec.id) {
            file.areas.push(r.params.clone());
            if let Some(p) = file.provenance.as_mut() {
                p.areas.insert(
                    spec.id.clone(),
                    AreaFitSummary {
                        eta: r.eta,
                        nrmse: r.nrmse,
                        stall_identified: r.stall_identified,
                    },
                );
            }
        }
    }
    Ok((file, results))
}
