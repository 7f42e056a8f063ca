use rayon::prelude::*;
use serde_json::Value;

use super::config::{set_dotted, ScenarioConfig};
use super::world::{run_scenario, RunResult};
use super::HarnessError;

pub struct SweepRun {
    pub value: Value,
    pub result: Result<RunResult, HarnessError>,
}

/// Run one scenario per value of `key`, in parallel. Results keep the order
/// of `values`.
pub fn sweep(base: &Value, key: &str, values: &[Value]) -> Result<Vec<SweepRun>, HarnessError> {
    let configs = values
        .iter()
        .map(|v| {
            let mut doc = base.clone();
            set_dotted(&mut doc, key, v.clone())?;
            let cfg = ScenarioConfig::from_value(doc)?;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(cfg, v)| SweepRun {
            value: v.clone(),
            result: run_scenario(cfg),
        })
        .collect())
}
