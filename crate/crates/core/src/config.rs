//! JSON configuration files for systems, connections and surfaces.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::connection::{ConnectionField, ExplicitConnection};
use crate::error::{Error, Result};
use crate::fields::parse_expression;
use crate::hypersurface::Hypersurface;
use crate::legendre::{build_modified_hamiltonian, build_riemannian_euclidean, SystemDefinition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKindName {
    Explicit,
    ModifiedHamiltonian,
    RiemannianEuclidean,
}

/// `{ "n", "kind", "V", "Theta", "H", "W", "h", "Gamma" }`; which expression
/// fields are required depends on `kind`. Without `Gamma` the canonical
/// connection is used.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n: usize,
    pub kind: SystemKindName,
    #[serde(rename = "V")]
    pub v: Option<Vec<String>>,
    #[serde(rename = "Theta")]
    pub theta: Option<Vec<String>>,
    #[serde(rename = "H")]
    pub hamiltonian: Option<String>,
    #[serde(rename = "W")]
    pub w: Option<String>,
    pub h: Option<String>,
    #[serde(rename = "Gamma")]
    pub gamma: Option<BTreeMap<String, String>>,
}

fn required<'a, T>(field: &'a Option<T>, name: &str, kind: SystemKindName) -> Result<&'a T> {
    field
        .as_ref()
        .ok_or_else(|| Error::Config(format!("kind {kind:?} requires field `{name}`")))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

impl SystemConfig {
    pub fn load(path: &Path) -> Result<SystemConfig> {
        Ok(serde_json::from_str(&read(path)?)?)
    }

    pub fn system(&self) -> Result<SystemDefinition> {
        let n = self.n;
        match self.kind {
            SystemKindName::Explicit => {
                let v = required(&self.v, "V", self.kind)?;
                let theta = required(&self.theta, "Theta", self.kind)?;
                let v: Vec<&str> = v.iter().map(String::as_str).collect();
                let theta: Vec<&str> = theta.iter().map(String::as_str).collect();
                SystemDefinition::explicit_from_str(n, &v, &theta)
            }
            SystemKindName::ModifiedHamiltonian => {
                let h = required(&self.hamiltonian, "H", self.kind)?;
                build_modified_hamiltonian(parse_expression(h, n)?, n)
            }
            SystemKindName::RiemannianEuclidean => {
                let w = parse_expression(required(&self.w, "W", self.kind)?, n)?;
                let h = parse_expression(required(&self.h, "h", self.kind)?, n)?;
                build_riemannian_euclidean(w, h, n)
            }
        }
    }

    pub fn connection(&self, sys: &SystemDefinition) -> Result<ConnectionField> {
        match &self.gamma {
            Some(map) => Ok(ConnectionField::Explicit(ExplicitConnection::from_strings(self.n, map)?)),
            None => Ok(ConnectionField::canonical(sys)),
        }
    }
}

/// `{ "params", "embedding", "domain", "grid" }`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub params: usize,
    pub embedding: Vec<String>,
    pub domain: Vec<[f64; 2]>,
    pub grid: Vec<usize>,
}

impl SurfaceConfig {
    pub fn load(path: &Path) -> Result<SurfaceConfig> {
        Ok(serde_json::from_str(&read(path)?)?)
    }

    pub fn surface(&self) -> Result<Hypersurface> {
        let n = self.params + 1;
        if self.embedding.len() != n {
            return Err(Error::Config(format!(
                "{} parameters need {n} embedding components, got {}",
                self.params,
                self.embedding.len()
            )));
        }
        let e: Vec<&str> = self.embedding.iter().map(String::as_str).collect();
        Hypersurface::from_strings(n, &e, self.domain.iter().map(|d| (d[0], d[1])).collect(), self.grid.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_kinds() {
        let c: SystemConfig = serde_json::from_str(r#"{"n":2,"kind":"modified_hamiltonian","H":"(p1^2+p2^2)/2"}"#).unwrap();
        assert_eq!(c.system().unwrap().dim(), 2);
        let c: SystemConfig = serde_json::from_str(r#"{"n":2,"kind":"explicit","V":["p1","p2"]}"#).unwrap();
        assert!(matches!(c.system(), Err(Error::Config(_))));
        assert!(serde_json::from_str::<SystemConfig>(r#"{"n":2,"kind":"other"}"#).is_err());
    }

    #[test]
    fn gamma_block() {
        let c: SystemConfig = serde_json::from_str(
            r#"{"n":2,"kind":"explicit","V":["p1","p2"],"Theta":["0","0"],"Gamma":{"1,1,2":"x1","1,2,1":"x2"}}"#,
        )
        .unwrap();
        let sys = c.system().unwrap();
        assert!(matches!(c.connection(&sys), Err(Error::Config(_))));
    }

    #[test]
    fn surface_config() {
        let c: SurfaceConfig =
            serde_json::from_str(r#"{"params":1,"embedding":["cos(y1)","sin(y1)"],"domain":[[-1,1]],"grid":[9]}"#).unwrap();
        let s = c.surface().unwrap();
        assert_eq!(s.grid_nodes().len(), 9);
    }
}
