//! Flat `key = value` experiment configs with per-command defaults.

use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    command: &'static str,
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn new(command: &'static str, defaults: &[(&str, &str)]) -> Self {
        Self {
            command,
            values: defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Set a known key; unknown keys are a usage error naming the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(CliError::Usage(format!("unknown key '{key}' for {}", self.command))),
        }
    }

    /// Lines of `key = value`; blank lines and `#` comments are skipped.
    pub fn merge_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{}:{}: expected 'key = value'", path.display(), n + 1))
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// `--key value` pairs.
    pub fn merge_overrides(&mut self, args: &[String]) -> Result<(), CliError> {
        let mut it = args.iter();
        while let Some(flag) = it.next() {
            let key = flag
                .strip_prefix("--")
                .ok_or_else(|| CliError::Usage(format!("expected '--key value', got '{flag}'")))?;
            let (key, value) = match key.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| CliError::Usage(format!("override '--{key}' has no value")))?;
                    (key.to_string(), v.clone())
                }
            };
            self.set(&key.replace('-', "_"), &value)?;
        }
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Sorted `key = value` lines; the hashed form of the config.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("{} reads undeclared key '{key}'", self.command))
    }

    fn bad(&self, key: &str, want: &str) -> CliError {
        CliError::Usage(format!("key '{key}': expected {want}, got '{}'", self.raw(key)))
    }

    pub fn str(&self, key: &str) -> &str {
        self.raw(key)
    }

    /// Accepts decimals, `inf`, and fractions such as `2/3`.
    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        parse_number(self.raw(key)).ok_or_else(|| self.bad(key, "a number"))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            "" | "auto" | "none" => Ok(None),
            _ => self.f64(key).map(Some),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.raw(key).parse().map_err(|_| self.bad(key, "a nonnegative integer"))
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        self.raw(key).parse().map_err(|_| self.bad(key, "a nonnegative integer"))
    }

    pub fn i32(&self, key: &str) -> Result<i32, CliError> {
        self.raw(key).parse().map_err(|_| self.bad(key, "an integer"))
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(self.bad(key, "true or false")),
        }
    }

    pub fn list_f64(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.raw(key)
            .split(',')
            .map(|s| parse_number(s.trim()))
            .collect::<Option<Vec<_>>>()
            .filter(|v| !v.is_empty())
            .ok_or_else(|| self.bad(key, "a comma-separated list of numbers"))
    }

    /// One of `choices`.
    pub fn choice(&self, key: &str, choices: &[&str]) -> Result<&str, CliError> {
        let v = self.raw(key);
        if choices.contains(&v) {
            Ok(v)
        } else {
            Err(self.bad(key, &format!("one of {}", choices.join("|"))))
        }
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s {
        "inf" | "infinity" => return Some(f64::INFINITY),
        "-inf" => return Some(f64::NEG_INFINITY),
        _ => {}
    }
    if let Some((a, b)) = s.split_once('/') {
        let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        return (b != 0.0).then(|| a / b);
    }
    s.parse().ok().filter(|v: &f64| !v.is_nan())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> Config {
        Config::new("demo", &[("n", "64"), ("beta", "1/3"), ("p", "inf"), ("eps", "0.5,0.25")])
    }

    #[test]
    fn numbers_fractions_and_lists() {
        let c = cfg();
        assert_eq!(c.f64("beta").unwrap(), 1.0 / 3.0);
        assert_eq!(c.f64("p").unwrap(), f64::INFINITY);
        assert_eq!(c.list_f64("eps").unwrap(), vec![0.5, 0.25]);
        assert_eq!(c.usize("n").unwrap(), 64);
    }

    #[test]
    fn unknown_keys_are_named() {
        let mut c = cfg();
        let err = c.set("bogus", "1").unwrap_err();
        assert!(err.to_string().contains("'bogus'"));
        let err = c.merge_overrides(&["--nope".into(), "3".into()]).unwrap_err();
        assert!(err.to_string().contains("'nope'"));
    }

    #[test]
    fn overrides_and_file() {
        let mut c = cfg();
        c.merge_overrides(&["--n".into(), "32".into(), "--beta=2/3".into()]).unwrap();
        assert_eq!(c.usize("n").unwrap(), 32);
        assert_eq!(c.f64("beta").unwrap(), 2.0 / 3.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        std::fs::write(&path, "# comment\nn = 16\n\np = 2 # trailing\n").unwrap();
        c.merge_file(&path).unwrap();
        assert_eq!(c.usize("n").unwrap(), 16);
        assert_eq!(c.f64("p").unwrap(), 2.0);
        assert!(c.set("n", "x").is_ok() && c.usize("n").is_err());
    }

    #[test]
    fn canonical_is_sorted() {
        assert_eq!(cfg().canonical(), "beta = 1/3\neps = 0.5,0.25\nn = 64\np = inf\n");
    }
}
