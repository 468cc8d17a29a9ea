//! Instance and trace files.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Atom, DemandModel, InstanceSpec, Scenario};
use crate::seir::{SamplePathBank, DEFAULT_K};

fn default_k() -> usize {
    DEFAULT_K
}

/// Reference to a bank file on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankRef {
    /// Resolved relative to the instance file's directory.
    pub path: PathBuf,
    #[serde(default = "default_k")]
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFile {
    FiniteSupport(Vec<Scenario>),
    Independent(Vec<Vec<Atom>>),
    SampleBank(BankRef),
}

/// On-disk instance description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub agents: usize,
    pub supply: f64,
    pub model: ModelFile,
}

impl InstanceFile {
    /// Describes an in-memory finite or independent model. Banks have no
    /// inline representation and are rejected.
    pub fn from_model(model: &DemandModel, supply: f64) -> Result<Self> {
        let model = match model {
            DemandModel::FiniteSupport(f) => ModelFile::FiniteSupport(f.scenarios().to_vec()),
            DemandModel::Independent(m) => ModelFile::Independent(m.marginals().to_vec()),
            DemandModel::SampleBank(_) => {
                return Err(Error::InvalidArgument(
                    "sample banks are referenced by path, not inlined".into(),
                ))
            }
        };
        let agents = match &model {
            ModelFile::FiniteSupport(s) => s.first().map_or(0, |s| s.demands.len()),
            ModelFile::Independent(m) => m.len(),
            ModelFile::SampleBank(_) => unreachable!(),
        };
        Ok(Self { agents, supply, model })
    }

    /// Builds the instance; bank paths are resolved against `base`.
    pub fn into_instance(self, base: &Path) -> Result<InstanceSpec> {
        let model = match self.model {
            ModelFile::FiniteSupport(s) => DemandModel::finite(s)?,
            ModelFile::Independent(m) => DemandModel::independent(m)?,
            ModelFile::SampleBank(r) => {
                let path = if r.path.is_absolute() { r.path } else { base.join(r.path) };
                let f = File::open(&path).map_err(|e| {
                    Error::InvalidInstance(format!("cannot open bank {}: {e}", path.display()))
                })?;
                DemandModel::SampleBank(SamplePathBank::read_jsonl(BufReader::new(f), r.k)?)
            }
        };
        if model.n_agents() != self.agents {
            return Err(Error::InvalidInstance(format!(
                "\"agents\" is {} but the model has {} agents",
                self.agents,
                model.n_agents()
            )));
        }
        InstanceSpec::new(model, self.supply)
    }
}

/// Parses instance JSON; relative bank paths resolve against `base`.
pub fn parse_instance(json: &str, base: &Path) -> Result<InstanceSpec> {
    let file: InstanceFile = serde_json::from_str(json)?;
    file.into_instance(base)
}

pub fn load_instance(path: &Path) -> Result<InstanceSpec> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_instance(&text, base)
}

/// Demands and allocations of one path, as read for welfare evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub demands: Vec<f64>,
    pub allocations: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TraceFile {
    One(TraceRecord),
    Many(Vec<TraceRecord>),
}

/// Reads a single trace object, a JSON array of traces, or JSON lines.
pub fn parse_traces(text: &str) -> Result<Vec<TraceRecord>> {
    match serde_json::from_str::<TraceFile>(text) {
        Ok(TraceFile::One(t)) => Ok(vec![t]),
        Ok(TraceFile::Many(v)) => Ok(v),
        Err(first) => {
            let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
            if lines.len() < 2 {
                return Err(first.into());
            }
            lines
                .into_iter()
                .map(|l| serde_json::from_str(l).map_err(Error::from))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_finite_instance() {
        let json = r#"{"agents":2,"supply":2.0,"model":{"finite_support":[
            {"prob":0.5,"demands":[1.0,0.0]},{"prob":0.5,"demands":[1.0,2.0]}]}}"#;
        let inst = parse_instance(json, Path::new(".")).unwrap();
        assert_eq!(inst.n_agents, 2);
        assert!((inst.mu() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parses_independent_instance() {
        let json = r#"{"agents":1,"supply":1,"model":{"independent":[[{"value":0.5,"prob":1.0}]]}}"#;
        let inst = parse_instance(json, Path::new(".")).unwrap();
        assert!((inst.mu() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn agent_count_must_match() {
        let json = r#"{"agents":3,"supply":1,"model":{"independent":[[{"value":0.5,"prob":1.0}]]}}"#;
        assert!(matches!(
            parse_instance(json, Path::new(".")),
            Err(Error::InvalidInstance(_))
        ));
    }

    #[test]
    fn round_trips_generated_models() {
        let m = crate::instances::hard_instance_overdemanded(3, 2.0).unwrap();
        let file = InstanceFile::from_model(&m, 1.0).unwrap();
        let text = serde_json::to_string(&file).unwrap();
        let inst = parse_instance(&text, Path::new(".")).unwrap();
        assert!((inst.mu() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trace_formats() {
        let one = r#"{"demands":[1,1],"allocations":[1,0.5]}"#;
        assert_eq!(parse_traces(one).unwrap().len(), 1);
        assert_eq!(parse_traces(&format!("[{one},{one}]")).unwrap().len(), 2);
        assert_eq!(parse_traces(&format!("{one}\n{one}\n")).unwrap().len(), 2);
    }
}
