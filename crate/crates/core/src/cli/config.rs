//! `key=value` run configuration: flags override the config file, which
//! overrides built-in defaults. Every resolved value is recorded so the
//! manifest written after a run can be fed back as `--config`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Manifest keys with these prefixes describe a run rather than configure one.
const RECORD_PREFIXES: [&str; 3] = ["input.", "output.", "result."];

#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    file_path: Option<PathBuf>,
    used: BTreeSet<String>,
    resolved: Vec<(String, String)>,
}

fn parse_kv(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, n + 1, "expected key=value"))?;
        let k = k.trim().to_string();
        if map.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::parse(path, n + 1, format!("duplicate key `{k}`")));
        }
    }
    Ok(map)
}

impl Resolver {
    /// `command` is checked against the file's `command` key when present.
    pub fn new(config: Option<&Path>, command: &str) -> Result<Self> {
        let mut r = Resolver::default();
        if let Some(path) = config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            r.file = parse_kv(&text, path)?;
            r.file_path = Some(path.to_path_buf());
            if let Some(c) = r.file.get("command") {
                if c != command {
                    return Err(Error::Config(format!(
                        "{} configures `{c}`, not `{command}`",
                        path.display()
                    )));
                }
            }
        }
        r.used.insert("command".into());
        r.resolved.push(("command".into(), command.into()));
        Ok(r)
    }

    fn file_value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        match self.file.get(key) {
            // manifests record unset optional settings as `key=`
            None => Ok(None),
            Some(raw) if raw.is_empty() => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                Error::Config(format!(
                    "{}: bad value `{raw}` for `{key}`: {e}",
                    self.file_path.as_deref().unwrap_or(Path::new("config")).display()
                ))
            }),
        }
    }

    /// The flag if given, else the file's value, else `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let from_file = self.file_value::<T>(key)?;
        let v = flag.or(from_file).unwrap_or(default);
        self.resolved.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    /// Like [`get`](Self::get) for settings without a default; absent values
    /// are recorded as empty.
    pub fn opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let from_file = self.file_value::<T>(key)?;
        let v = flag.or(from_file);
        let shown = v.as_ref().map(|x| x.to_string()).unwrap_or_default();
        self.resolved.push((key.to_string(), shown));
        Ok(v)
    }

    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.opt(key, flag)?
            .ok_or_else(|| Error::Config(format!("missing required setting `{key}` (flag or config file)")))
    }

    /// Comma-separated list; a non-empty flag list wins over the file.
    pub fn list(&mut self, key: &str, flag: Vec<String>, default: &[&str]) -> Result<Vec<String>> {
        self.used.insert(key.to_string());
        let v: Vec<String> = if !flag.is_empty() {
            flag.iter()
                .flat_map(|s| s.split(','))
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        } else if let Some(raw) = self.file.get(key) {
            raw.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        } else {
            default.iter().map(|s| s.to_string()).collect()
        };
        self.resolved.push((key.to_string(), v.join(",")));
        Ok(v)
    }

    /// Errors on config-file keys nothing asked for, so typos do not pass silently.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&str> = self
            .file
            .keys()
            .filter(|k| !self.used.contains(*k) && !RECORD_PREFIXES.iter().any(|p| k.starts_with(p)))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            lines: self.resolved.clone(),
        }
    }
}

/// Resolved configuration plus input digests and run results.
#[derive(Clone, Debug, Default)]
pub struct Manifest {
    lines: Vec<(String, String)>,
}

impl Manifest {
    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        let key = key.into();
        let value = value.to_string();
        match self.lines.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.lines.push((key, value)),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.set(format!("input.sha256.{name}"), sha256_file(path)?);
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# kgretro run manifest; usable as --config\n");
        for (k, v) in &self.lines {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.txt");
        fs::write(&cfg, "# run\ncommand=retrofit\nalpha=2\nbeta_pos=3\ninput.sha256.graph=abc\n").unwrap();
        let mut r = Resolver::new(Some(&cfg), "retrofit").unwrap();
        assert_eq!(r.get("alpha", Some(5.0), 1.0).unwrap(), 5.0);
        assert_eq!(r.get("beta_pos", None, 1.0).unwrap(), 3.0);
        assert_eq!(r.get("lambda", None::<f64>, 0.25).unwrap(), 0.25);
        assert_eq!(r.opt::<String>("graph", None).unwrap(), None);
        r.finish().unwrap();
        let m = r.manifest().render();
        assert!(m.contains("\nalpha=5\nbeta_pos=3\nlambda=0.25\ngraph=\n"), "{m}");
    }

    #[test]
    fn unknown_and_bad_keys() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.txt");
        fs::write(&cfg, "alpah=2\n").unwrap();
        let r = Resolver::new(Some(&cfg), "retrofit").unwrap();
        assert!(r.finish().unwrap_err().to_string().contains("alpah"));
        fs::write(&cfg, "alpha=two\n").unwrap();
        let mut r = Resolver::new(Some(&cfg), "retrofit").unwrap();
        assert!(r.get("alpha", None, 1.0).is_err());
        fs::write(&cfg, "command=synth\n").unwrap();
        assert!(Resolver::new(Some(&cfg), "retrofit").is_err());
        fs::write(&cfg, "novalue\n").unwrap();
        assert!(Resolver::new(Some(&cfg), "retrofit").is_err());
    }

    #[test]
    fn lists() {
        let mut r = Resolver::new(None, "x").unwrap();
        assert_eq!(r.list("models", vec!["a,b".into(), "c".into()], &["z"]).unwrap(), ["a", "b", "c"]);
        assert_eq!(r.list("other", vec![], &["z"]).unwrap(), ["z"]);
    }

    #[test]
    fn floats_round_trip() {
        let x = 0.1f64 + 0.2;
        assert_eq!(x.to_string().parse::<f64>().unwrap(), x);
    }

    #[test]
    fn digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f");
        fs::write(&p, "abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
