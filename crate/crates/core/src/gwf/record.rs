//! Text record of an optimised guiding wave function.

use super::{BoltzmannGwf, SpinGwf, Urbm};
use crate::error::{Error, Result};
use crate::kv::{KvMap, KvWriter};
use crate::spin::SpinModel;

const HEADER: &str = "pqmc gwf record v1";

/// Model, wave function and its variational energy, stored as `key = value`
/// lines.
#[derive(Debug, Clone, PartialEq)]
pub struct GwfRecord {
    pub model: SpinModel,
    pub gwf: SpinGwf,
    pub energy: f64,
    pub stderr: f64,
}

impl GwfRecord {
    pub fn to_text(&self) -> Result<String> {
        let mut w = KvWriter::new(HEADER);
        match self.model {
            SpinModel::IsingChain { n, j, gamma } => {
                w.entry("model", "chain").entry("n", n).entry("j", j).entry("gamma", gamma);
            }
            SpinModel::Shamrock { k, j, epsilon, gamma } => {
                w.entry("model", "shamrock").entry("k", k).entry("j", j).entry("epsilon", epsilon).entry("gamma", gamma);
            }
        }
        match &self.gwf {
            SpinGwf::None => {
                w.entry("gwf", "none");
            }
            SpinGwf::Boltzmann(b) => {
                w.entry("gwf", "boltzmann").entry("beta", b.beta);
            }
            SpinGwf::Urbm(u) => {
                w.entry("gwf", "urbm").entry("k1", u.k1).entry("k2", u.k2).entry("k3", u.k3);
            }
            SpinGwf::Tabulated(_) => {
                return Err(Error::invalid("tabulated wave functions are not persisted; recompute them by exact diagonalisation"));
            }
        }
        w.entry("energy", self.energy).entry("stderr", self.stderr);
        Ok(w.finish())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        if text.lines().next().map(str::trim) != Some(&format!("# {HEADER}")) {
            return Err(Error::Parse { line: 1, message: format!("expected header `# {HEADER}`") });
        }
        let mut kv = KvMap::parse(text)?;
        let kind: String = kv.take_required("model")?;
        let model = match kind.as_str() {
            "chain" => SpinModel::ising_chain(kv.take_required("n")?, kv.take_required("j")?, kv.take_required("gamma")?)?,
            "shamrock" => SpinModel::shamrock(
                kv.take_required("k")?,
                kv.take_required("j")?,
                kv.take_required("epsilon")?,
                kv.take_required("gamma")?,
            )?,
            other => return Err(Error::invalid(format!("unknown model `{other}`"))),
        };
        let gwf_kind: String = kv.take_required("gwf")?;
        let gwf = match gwf_kind.as_str() {
            "none" => SpinGwf::None,
            "boltzmann" => SpinGwf::Boltzmann(BoltzmannGwf::new(kv.take_required("beta")?)?),
            "urbm" => SpinGwf::Urbm(Urbm::new(
                model.n(),
                kv.take_required("k1")?,
                kv.take_required("k2")?,
                kv.take_required("k3")?,
            )?),
            other => return Err(Error::invalid(format!("unknown gwf `{other}`"))),
        };
        let energy = kv.take_required("energy")?;
        let stderr = kv.take_required("stderr")?;
        kv.finish()?;
        gwf.validate_for(&model)?;
        Ok(GwfRecord { model, gwf, energy, stderr })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let records = [
            GwfRecord {
                model: SpinModel::ising_chain(8, 1.0, 0.6).unwrap(),
                gwf: SpinGwf::Urbm(Urbm::new(8, 0.149, 1.265, 0.656).unwrap()),
                energy: -8.7408,
                stderr: 0.0,
            },
            GwfRecord {
                model: SpinModel::shamrock(3, 6.0, 0.2, 0.5).unwrap(),
                gwf: SpinGwf::Boltzmann(BoltzmannGwf::new(0.1 + 0.2).unwrap()),
                energy: -19.123456789012345,
                stderr: 1.5e-3,
            },
        ];
        for r in records {
            let text = r.to_text().unwrap();
            assert_eq!(GwfRecord::from_text(&text).unwrap(), r);
        }
    }

    #[test]
    fn rejects_mismatch() {
        let text = "# pqmc gwf record v1\nmodel = shamrock\nk = 2\nj = 6\nepsilon = 0.2\ngamma = 0.5\ngwf = urbm\nk1 = 0\nk2 = 0\nk3 = 0\nenergy = 0\nstderr = 0\n";
        assert!(GwfRecord::from_text(text).is_err());
        assert!(GwfRecord::from_text("model = chain\n").is_err());
    }
}
