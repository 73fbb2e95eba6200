//! Typed access to `key=value` experiment parameters.
//!
//! Every lookup records the value actually used (given or default), so the
//! summary can list the complete effective configuration. Keys that no
//! lookup consumed are reported by [`Params::finish`].

use std::collections::BTreeMap;
use std::str::FromStr;

use stickysim_core::{SystemParams, Threshold};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default)]
pub struct Params {
    given: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Params {
    pub fn new(given: BTreeMap<String, String>) -> Self {
        Params {
            given,
            resolved: BTreeMap::new(),
        }
    }

    /// Parses `k=v` strings; later entries override earlier ones.
    pub fn from_pairs<I, S>(pairs: I) -> Result<BTreeMap<String, String>>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = BTreeMap::new();
        for pair in pairs {
            let pair = pair.as_ref();
            let (k, v) = pair.split_once('=').ok_or_else(|| {
                CliError::invalid(format!("parameter `{pair}` is not of the form k=v"))
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(CliError::invalid(format!(
                    "parameter `{pair}` has an empty key"
                )));
            }
            out.insert(k.to_string(), v.trim().to_string());
        }
        Ok(out)
    }

    /// Effective parameters after all lookups.
    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }

    fn raw(&mut self, key: &str, default: impl FnOnce() -> String) -> String {
        let v = self.given.get(key).cloned().unwrap_or_else(default);
        self.resolved.insert(key.to_string(), v.clone());
        v
    }

    fn parse<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T> {
        let raw = self.raw(key, || default.to_string());
        raw.parse()
            .map_err(|_| CliError::invalid(format!("parameter `{key}`: cannot parse `{raw}`")))
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.parse(key, default)?;
        finite(key, v)
    }

    pub fn u32(&mut self, key: &str, default: u32) -> Result<u32> {
        self.parse(key, default)
    }

    pub fn u64(&mut self, key: &str, default: u64) -> Result<u64> {
        self.parse(key, default)
    }

    pub fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        self.parse(key, default)
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        self.raw(key, || default.to_string())
    }

    /// A threshold: a non-negative integer or `inf`.
    pub fn threshold(&mut self, key: &str, default: Threshold) -> Result<Threshold> {
        let raw = self.raw(key, || threshold_str(default));
        parse_threshold(&raw).ok_or_else(|| {
            CliError::invalid(format!("parameter `{key}`: `{raw}` is not a threshold"))
        })
    }

    /// Integers given as `a,b,c`, `lo..=hi` or `lo..=hi:step`, or a mix.
    pub fn u32_list(&mut self, key: &str, default: &str) -> Result<Vec<u32>> {
        let raw = self.raw(key, || default.to_string());
        let mut out = Vec::new();
        for part in items(&raw) {
            match part.split_once("..=") {
                Some((lo, rest)) => {
                    let (hi, step) = rest.split_once(':').unwrap_or((rest, "1"));
                    let bad =
                        || CliError::invalid(format!("parameter `{key}`: bad range `{part}`"));
                    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
                    let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
                    let step: usize = step.trim().parse().map_err(|_| bad())?;
                    if step == 0 || lo > hi {
                        return Err(bad());
                    }
                    out.extend((lo..=hi).step_by(step));
                }
                None => out.push(part.parse().map_err(|_| {
                    CliError::invalid(format!("parameter `{key}`: `{part}` is not an integer"))
                })?),
            }
        }
        nonempty(key, out)
    }

    /// Reals given as `a,b,c` or `lo..=hi:step`.
    pub fn f64_list(&mut self, key: &str, default: &str) -> Result<Vec<f64>> {
        let raw = self.raw(key, || default.to_string());
        let mut out = Vec::new();
        for part in items(&raw) {
            let bad = || CliError::invalid(format!("parameter `{key}`: cannot parse `{part}`"));
            match part.split_once("..=") {
                Some((lo, rest)) => {
                    let (hi, step) = rest.split_once(':').ok_or_else(bad)?;
                    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
                    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
                    let step: f64 = step.trim().parse().map_err(|_| bad())?;
                    if !(step > 0.0) || !lo.is_finite() || !hi.is_finite() || lo > hi {
                        return Err(bad());
                    }
                    let count = ((hi - lo) / step + 1e-9).floor() as usize;
                    out.extend((0..=count).map(|k| lo + k as f64 * step));
                }
                None => out.push(finite(key, part.parse().map_err(|_| bad())?)?),
            }
        }
        nonempty(key, out)
    }

    /// Bin counts; `5n` means five bins per server.
    pub fn bins_list(&mut self, key: &str, default: &str, n: usize) -> Result<Vec<usize>> {
        let raw = self.raw(key, || default.to_string());
        let out = items(&raw)
            .map(|part| {
                let bad =
                    || CliError::invalid(format!("parameter `{key}`: `{part}` is not a bin count"));
                let m = match part.strip_suffix('n') {
                    Some(mult) => mult.trim().parse::<usize>().map_err(|_| bad())? * n,
                    None => part.parse().map_err(|_| bad())?,
                };
                if m == 0 {
                    return Err(bad());
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        nonempty(key, out)
    }

    /// Model rates. `rho` fixes λ = ρ/β.
    pub fn system(&mut self) -> Result<SystemParams> {
        let base = SystemParams::baseline();
        let n = self.usize("n", base.n)?;
        let rho = self.f64("rho", base.rho())?;
        let beta = self.f64("beta", base.beta)?;
        let nu = self.f64("nu", base.nu)?;
        let mu = self.f64("mu", base.mu)?;
        if !(beta > 0.0) {
            return Err(CliError::invalid("parameter `beta` must be positive"));
        }
        Ok(SystemParams::new(n, rho / beta, beta, nu, mu)?)
    }

    /// Fails on keys that no lookup consumed.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&str> = self
            .given
            .keys()
            .filter(|k| !self.resolved.contains_key(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::invalid(format!(
                "unknown parameter(s): {}",
                unknown.join(", ")
            )))
        }
    }
}

pub fn parse_threshold(s: &str) -> Option<Threshold> {
    match s.trim() {
        "inf" | "infinity" | "∞" => Some(Threshold::Infinite),
        v => v.parse().ok().map(Threshold::Finite),
    }
}

fn threshold_str(t: Threshold) -> String {
    match t {
        Threshold::Finite(h) => h.to_string(),
        Threshold::Infinite => "inf".to_string(),
    }
}

fn items(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::invalid(format!(
            "parameter `{key}` must be finite"
        )))
    }
}

fn nonempty<T>(key: &str, v: Vec<T>) -> Result<Vec<T>> {
    if v.is_empty() {
        Err(CliError::invalid(format!(
            "parameter `{key}` is an empty list"
        )))
    } else {
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[&str]) -> Params {
        Params::new(Params::from_pairs(pairs).unwrap())
    }

    #[test]
    fn ranges_and_lists() {
        let mut p = params(&["hs=150..=154,170", "ks=1..=9:4", "chis=0..=1:0.25"]);
        assert_eq!(
            p.u32_list("hs", "").unwrap(),
            vec![150, 151, 152, 153, 154, 170]
        );
        assert_eq!(p.u32_list("ks", "").unwrap(), vec![1, 5, 9]);
        assert_eq!(
            p.f64_list("chis", "").unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert!(p.finish().is_ok());
    }

    #[test]
    fn bins_scale_with_servers() {
        let mut p = params(&["bins=2n, 5n,1000"]);
        assert_eq!(
            p.bins_list("bins", "", 500).unwrap(),
            vec![1000, 2500, 1000]
        );
        assert!(p.bins_list("other", "0n", 500).is_err());
    }

    #[test]
    fn defaults_are_recorded() {
        let mut p = params(&[]);
        assert_eq!(
            p.threshold("h", Threshold::Infinite).unwrap(),
            Threshold::Infinite
        );
        assert_eq!(p.u32("l", 140).unwrap(), 140);
        assert_eq!(p.resolved()["h"], "inf");
        assert_eq!(p.resolved()["l"], "140");
    }

    #[test]
    fn unknown_and_malformed_keys_are_rejected() {
        let p = params(&["bogus=1"]);
        assert!(matches!(p.finish(), Err(CliError::Validation(_))));
        assert!(Params::from_pairs(["novalue"]).is_err());
        let mut p = params(&["rho=nan", "l=x"]);
        assert!(p.f64("rho", 1.0).is_err());
        assert!(p.u32("l", 1).is_err());
        assert!(params(&["hs=5..=1"]).u32_list("hs", "").is_err());
    }

    #[test]
    fn system_parameters_use_rho() {
        let mut p = params(&["rho=20", "n=10"]);
        let s = p.system().unwrap();
        assert_eq!(s.n, 10);
        assert!((s.rho() - 20.0).abs() < 1e-12);
    }
}
