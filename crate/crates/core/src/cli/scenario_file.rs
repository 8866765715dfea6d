use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::ctmc::CtmcParams;
use crate::error::{Error, Result};
use crate::model::{ArrivalProcess, BlockIntervalModel, FeeDistribution, Scenario, TieRule};

/// Optional section describing the fee-bumping game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiStrategicSection {
    pub n: u32,
    pub gamma: f64,
    pub gamma_s: f64,
    pub v_hat: u32,
    /// Bump size in fee units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

/// On-disk scenario description (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub interval: Spanned<BlockIntervalModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrivals: Option<Spanned<ArrivalProcess>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fees: Option<Spanned<FeeDistribution>>,
    pub capacity: Spanned<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valuation: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_rule: Option<TieRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_strategic: Option<Spanned<SemiStrategicSection>>,
    /// Source text, kept for line numbers.
    #[serde(skip)]
    source: String,
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim_end().to_string()))?;
        file.source = text.to_string();
        file.check()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    fn at<T>(&self, item: &Spanned<T>, e: Error) -> Error {
        let line = line_of(&self.source, item.span().start);
        Error::Parse(format!("line {line}: {e}"))
    }

    /// Enforces every constraint of the underlying types.
    fn check(&self) -> Result<()> {
        self.interval.get_ref().validate().map_err(|e| self.at(&self.interval, e))?;
        if let Some(a) = &self.arrivals {
            a.get_ref().validate().map_err(|e| self.at(a, e))?;
        }
        if let Some(f) = &self.fees {
            f.get_ref().validate().map_err(|e| self.at(f, e))?;
        }
        if *self.capacity.get_ref() < 1 {
            return Err(self.at(&self.capacity, Error::config("capacity must be at least 1")));
        }
        if self.arrivals.is_some() || self.fees.is_some() || self.valuation.is_some() {
            let s = self.scenario_inner();
            if let Err(e) = s {
                let anchor = self.tick.as_ref().or(self.valuation.as_ref());
                return Err(match anchor {
                    Some(a) => self.at(a, e),
                    None => Error::Parse(e.to_string()),
                });
            }
        }
        if let Some(sec) = &self.semi_strategic {
            self.ctmc_params().map_err(|e| match e {
                Error::Parse(_) => e,
                other => self.at(sec, other),
            })?;
        }
        Ok(())
    }

    fn scenario_inner(&self) -> Result<Scenario> {
        let missing = |what: &str| Error::config(format!("scenario has no [{what}] section"));
        let arrivals = *self.arrivals.as_ref().ok_or_else(|| missing("arrivals"))?.get_ref();
        let fees = self.fees.as_ref().ok_or_else(|| missing("fees"))?.get_ref().clone();
        let valuation = *self.valuation.as_ref().ok_or_else(|| Error::config("scenario has no valuation"))?.get_ref();
        let mut s = Scenario::new(*self.interval.get_ref(), arrivals, fees, *self.capacity.get_ref(), valuation)?;
        if let Some(t) = &self.tick {
            s = s.with_tick(*t.get_ref())?;
        }
        if let Some(r) = self.tie_rule {
            s = s.with_tie_rule(r);
        }
        Ok(s)
    }

    /// Scenario for the oblivious strategies.
    pub fn scenario(&self) -> Result<Scenario> {
        self.scenario_inner()
    }

    /// Parameters of the fee-bumping chain; the block rate comes from the
    /// exponential interval and `m` from the capacity.
    pub fn ctmc_params(&self) -> Result<CtmcParams> {
        let sec = self
            .semi_strategic
            .as_ref()
            .ok_or_else(|| Error::config("scenario has no [semi_strategic] section"))?
            .get_ref();
        let lambda = match *self.interval.get_ref() {
            BlockIntervalModel::Exponential { rate } => rate,
            BlockIntervalModel::Fixed { .. } => {
                return Err(Error::config("the fee-bumping chain needs an exponential block interval"))
            }
        };
        let mut p = CtmcParams::new(sec.n, *self.capacity.get_ref(), sec.v_hat, sec.gamma, sec.gamma_s, lambda)?;
        if let Some(eta) = sec.eta {
            p.eta = eta;
            p.validate()?;
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ETH: &str = r#"
capacity = 200
valuation = 3.0

[interval]
kind = "fixed"
duration = 10.0

[arrivals]
kind = "linear"
rate = 40.0

[fees]
kind = "pareto"
min = 1.0
mean = 5.9512
"#;

    #[test]
    fn parses_and_round_trips() {
        let f = ScenarioFile::parse(ETH).unwrap();
        let s = f.scenario().unwrap();
        assert_eq!(s.capacity, 200);
        let again = ScenarioFile::parse(&f.to_toml()).unwrap();
        assert_eq!(again.scenario().unwrap(), s);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let text = ETH.replace("rate = 40.0", "rate = 40.0\nburst = 2");
        let err = ScenarioFile::parse(&text).unwrap_err();
        assert!(matches!(&err, Error::Parse(m) if m.contains("line")), "{err}");
        let err = ScenarioFile::parse(&format!("{ETH}\ncolour = 1\n")).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn constraint_violation_names_line() {
        let text = ETH.replace("mean = 5.9512", "mean = 0.5");
        match ScenarioFile::parse(&text).unwrap_err() {
            Error::Parse(m) => assert!(m.starts_with("line 13"), "{m}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn semi_section_needs_exponential_blocks() {
        let text = format!("{ETH}\n[semi_strategic]\nn = 10\ngamma = 1.0\ngamma_s = 4.0\nv_hat = 8\n");
        assert!(ScenarioFile::parse(&text).is_err());
        let pow = text
            .replace("kind = \"fixed\"\nduration = 10.0", "kind = \"exponential\"\nrate = 0.5")
            .replace("capacity = 200", "capacity = 3");
        let f = ScenarioFile::parse(&pow).unwrap();
        let p = f.ctmc_params().unwrap();
        assert_eq!((p.n, p.m, p.v_hat, p.lambda), (10, 3, 8, 0.5));
    }
}
