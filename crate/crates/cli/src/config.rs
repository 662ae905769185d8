//! Line-oriented `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! [system]
//! direction = downlink
//! n_mobile = 2          # one value for every user, or one per user: 2, 4
//! [experiment]
//! trials = 100
//! [sweep]
//! snr1_db = 0, 10, 20, 30
//! ```
//!
//! Keys are unique across sections, so overrides may name a key bare
//! (`trials=7`) or qualified (`experiment.trials=7`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use afrelay::channel::{Direction, SystemDims, UserDims};
use afrelay::montecarlo::{Algorithm, ExperimentConfig};

use crate::error::CliError;

/// Every accepted key with its section.
pub const KEYS: &[(&str, &str)] = &[
    ("system", "direction"),
    ("system", "n_base"),
    ("system", "n_relay"),
    ("system", "users"),
    ("system", "n_mobile"),
    ("system", "streams"),
    ("system", "p_s"),
    ("system", "p_r"),
    ("experiment", "trials"),
    ("experiment", "symbols"),
    ("experiment", "seed"),
    ("experiment", "threshold"),
    ("experiment", "max_iter"),
    ("experiment", "algorithms"),
    ("sweep", "snr1_db"),
    ("sweep", "snr2_db"),
];

#[derive(Debug, Clone, PartialEq)]
enum Origin {
    Line(usize),
    Override(String),
}

impl Origin {
    fn error(&self, msg: impl Into<String>) -> CliError {
        match self {
            Origin::Line(line) => CliError::Config { line: *line, msg: msg.into() },
            Origin::Override(spec) => CliError::Override { spec: spec.clone(), msg: msg.into() },
        }
    }
}

fn section_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(_, k)| *k == key).map(|(s, _)| *s)
}

/// Raw settings before defaults are applied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, (String, Origin)>,
}

pub fn parse_settings(text: &str) -> Result<Settings, CliError> {
    let mut settings = Settings::default();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(CliError::Config { line, msg: format!("malformed section header {body:?}") })?.trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(CliError::Config { line, msg: format!("unknown section [{name}]") });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = body.split_once('=').ok_or(CliError::Config { line, msg: format!("expected key = value, got {body:?}") })?;
        let key = key.trim();
        let Some(sec) = &section else {
            return Err(CliError::Config { line, msg: format!("key {key:?} outside a section") });
        };
        match section_of(key) {
            Some(s) if s == sec => {}
            Some(s) => return Err(CliError::Config { line, msg: format!("key {key:?} belongs to [{s}], not [{sec}]") }),
            None => return Err(CliError::Config { line, msg: format!("unknown key {key:?} in [{sec}]") }),
        }
        if settings.values.contains_key(key) {
            return Err(CliError::Config { line, msg: format!("duplicate key {key:?}") });
        }
        settings.values.insert(key.to_string(), (value.trim().to_string(), Origin::Line(line)));
    }
    Ok(settings)
}

/// Parses a configuration and applies the defaults for its direction.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    parse_settings(text)?.resolve(None, Defaults::Sweep)
}

/// Which defaults fill omitted sweep and algorithm keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Defaults {
    /// The four-point sweep and every designer of the direction.
    Sweep,
    /// A single 20/20 dB point and the iterative designers.
    Convergence,
    /// The four-point sweep, the main designer and every baseline.
    Baselines,
}

fn parse_one<T: FromStr>(value: &str, what: &str, origin: &Origin) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| origin.error(format!("invalid {what} {value:?}: {e}")))
}

fn parse_list<T: FromStr>(value: &str, what: &str, origin: &Origin) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<&str> = value.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(origin.error(format!("empty item in {what} list {value:?}")));
    }
    items.iter().map(|s| parse_one(s, what, origin)).collect()
}

impl Settings {
    /// Applies one `key=value` override.
    pub fn set(&mut self, spec: &str) -> Result<(), CliError> {
        let origin = Origin::Override(spec.to_string());
        let (key, value) = spec.split_once('=').ok_or_else(|| origin.error("expected key=value"))?;
        let key = key.trim();
        let key = match key.split_once('.') {
            Some((sec, k)) if section_of(k) == Some(sec) => k,
            Some(_) => return Err(origin.error(format!("unknown key {key:?}"))),
            None if section_of(key).is_some() => key,
            None => return Err(origin.error(format!("unknown key {key:?}"))),
        };
        self.values.insert(key.to_string(), (value.trim().to_string(), origin));
        Ok(())
    }

    fn get(&self, key: &str) -> Option<(&str, &Origin)> {
        self.values.get(key).map(|(v, o)| (v.as_str(), o))
    }

    fn scalar<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            Some((v, o)) => parse_one(v, key, o),
            None => Ok(default),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key).map(|(v, o)| parse_list(v, key, o)).transpose()
    }

    fn origin(&self, key: &str) -> Origin {
        self.get(key).map(|(_, o)| o.clone()).unwrap_or(Origin::Override(key.to_string()))
    }

    /// `[system]` dimensions; per-user lists must match the user count.
    fn dims(&self, direction: Direction) -> Result<SystemDims, CliError> {
        let base = SystemDims::standard(direction);
        let n_mobile: Option<Vec<usize>> = self.list("n_mobile")?;
        let streams: Option<Vec<usize>> = self.list("streams")?;
        let listed = [&n_mobile, &streams].iter().filter_map(|l| l.as_ref().map(Vec::len)).find(|&n| n > 1);
        let users = match self.get("users") {
            Some((v, o)) => parse_one::<usize>(v, "users", o)?,
            None => listed.unwrap_or(base.num_users()),
        };
        let expand = |key: &str, list: Option<Vec<usize>>, default: usize| -> Result<Vec<usize>, CliError> {
            match list {
                None => Ok(vec![default; users]),
                Some(v) if v.len() == 1 => Ok(vec![v[0]; users]),
                Some(v) if v.len() == users => Ok(v),
                Some(v) => Err(self.origin(key).error(format!("{key} lists {} values for {users} users", v.len()))),
            }
        };
        let n_mobile = expand("n_mobile", n_mobile, base.users[0].n_mobile)?;
        let streams = expand("streams", streams, base.users[0].streams)?;
        let dims = SystemDims {
            n_base: self.scalar("n_base", base.n_base)?,
            n_relay: self.scalar("n_relay", base.n_relay)?,
            users: n_mobile.into_iter().zip(streams).map(|(n_mobile, streams)| UserDims { n_mobile, streams }).collect(),
            direction,
        };
        dims.validate()?;
        Ok(dims)
    }

    /// Fills every omitted field. A forced `direction` must agree with the
    /// config's own, if it names one.
    pub fn resolve(&self, direction: Option<Direction>, defaults: Defaults) -> Result<ExperimentConfig, CliError> {
        let configured = self.scalar("direction", direction.unwrap_or(Direction::Downlink))?;
        let direction = match direction {
            Some(d) if d != configured => {
                return Err(self.origin("direction").error(format!("this command runs the {} direction", d.as_str())));
            }
            _ => configured,
        };
        let base = ExperimentConfig::standard(direction);
        let dims = self.dims(direction)?;
        let (snr1, snr2) = match (defaults, direction) {
            (Defaults::Convergence, _) => (vec![20.0], vec![20.0]),
            (_, Direction::Downlink) => (vec![0.0, 10.0, 20.0, 30.0], vec![20.0]),
            (_, Direction::Uplink) => (vec![20.0], vec![0.0, 10.0, 20.0, 30.0]),
        };
        let snr1 = self.list("snr1_db")?.unwrap_or(snr1);
        let snr2 = self.list("snr2_db")?.unwrap_or(snr2);
        let sweep = snr1.iter().flat_map(|&a| snr2.iter().map(move |&b| (a, b))).collect();

        let main = match direction {
            Direction::Downlink => [Algorithm::Alg1, Algorithm::Alg1Separate],
            Direction::Uplink => [Algorithm::Alg2, Algorithm::Alg1Uplink],
        };
        let algorithms = match (self.get("algorithms"), defaults) {
            (Some(("all", _)), _) => Algorithm::all_for(direction),
            (Some((v, o)), _) => parse_list::<Algorithm>(v, "algorithm", o)?,
            (None, Defaults::Sweep) => Algorithm::all_for(direction),
            (None, Defaults::Convergence) => main.to_vec(),
            (None, Defaults::Baselines) => {
                let mut v = vec![main[0]];
                v.extend(Algorithm::all_for(direction).into_iter().filter(|a| matches!(a, Algorithm::Baseline(_))));
                v
            }
        };
        if let Some(a) = algorithms.iter().find(|a| !a.supports(direction)) {
            return Err(self.origin("algorithms").error(format!("{a} does not support the {} direction", direction.as_str())));
        }
        let cfg = ExperimentConfig {
            dims,
            sweep,
            symbols_per_stream: self.scalar("symbols", base.symbols_per_stream)?,
            trials: self.scalar("trials", base.trials)?,
            seed: self.scalar("seed", base.seed)?,
            algorithms,
            threshold: self.scalar("threshold", base.threshold)?,
            max_iter: self.scalar("max_iter", base.max_iter)?,
            p_s: self.scalar("p_s", base.p_s)?,
            p_r: self.scalar("p_r", base.p_r)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// The resolved configuration in the input format; parsing it back gives
/// the same configuration.
pub fn render(cfg: &ExperimentConfig) -> String {
    let mut snr1: Vec<f64> = vec![];
    let mut snr2: Vec<f64> = vec![];
    for &(a, b) in &cfg.sweep {
        if !snr1.contains(&a) {
            snr1.push(a);
        }
        if !snr2.contains(&b) {
            snr2.push(b);
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "[system]");
    let _ = writeln!(s, "direction = {}", cfg.dims.direction.as_str());
    let _ = writeln!(s, "n_base = {}", cfg.dims.n_base);
    let _ = writeln!(s, "n_relay = {}", cfg.dims.n_relay);
    let _ = writeln!(s, "users = {}", cfg.dims.num_users());
    let _ = writeln!(s, "n_mobile = {}", join(cfg.dims.users.iter().map(|u| u.n_mobile)));
    let _ = writeln!(s, "streams = {}", join(cfg.dims.users.iter().map(|u| u.streams)));
    let _ = writeln!(s, "p_s = {:?}", cfg.p_s);
    let _ = writeln!(s, "p_r = {:?}", cfg.p_r);
    let _ = writeln!(s, "\n[experiment]");
    let _ = writeln!(s, "trials = {}", cfg.trials);
    let _ = writeln!(s, "symbols = {}", cfg.symbols_per_stream);
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "threshold = {:?}", cfg.threshold);
    let _ = writeln!(s, "max_iter = {}", cfg.max_iter);
    let _ = writeln!(s, "algorithms = {}", join(&cfg.algorithms));
    let _ = writeln!(s, "\n[sweep]");
    let _ = writeln!(s, "snr1_db = {}", join(snr1.iter().map(|v| format!("{v:?}"))));
    let _ = writeln!(s, "snr2_db = {}", join(snr2.iter().map(|v| format!("{v:?}"))));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_standard() {
        assert_eq!(parse_config("").unwrap(), ExperimentConfig::standard(Direction::Downlink));
        let up = parse_settings("[system]\ndirection = uplink\n").unwrap().resolve(None, Defaults::Sweep).unwrap();
        assert_eq!(up, ExperimentConfig::standard(Direction::Uplink));
    }

    #[test]
    fn override_trials() {
        let mut s = parse_settings("[experiment]\ntrials = 3\n").unwrap();
        s.set("trials=7").unwrap();
        assert_eq!(s.resolve(None, Defaults::Sweep).unwrap().trials, 7);
        s.set("experiment.trials = 9").unwrap();
        assert_eq!(s.resolve(None, Defaults::Sweep).unwrap().trials, 9);
        assert!(s.set("sweep.trials=1").is_err());
        assert!(s.set("bogus=1").is_err());
    }

    #[test]
    fn zero_relay_antennas_rejected() {
        assert!(matches!(parse_config("[system]\nn_relay = 0\n"), Err(CliError::Core(_))));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("[system]\n\nfoo = 1\n", 3),
            ("trials = 1\n", 1),
            ("[experiment]\nn_base = 4\n", 2),
            ("[system]\nn_base 4\n", 2),
            ("# c\n[nope]\n", 2),
            ("[experiment]\ntrials = 1\ntrials = 2\n", 3),
            ("[experiment]\ntrials = many\n", 2),
        ];
        for (text, line) in cases {
            match parse_settings(text).and_then(|s| s.resolve(None, Defaults::Sweep)) {
                Err(CliError::Config { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn per_user_lists_and_sweep_product() {
        let text = "[system]\ndirection = uplink\nn_mobile = 2, 4\nstreams = 2\n[sweep]\nsnr1_db = 5, 15\nsnr2_db = 0, 10\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.dims.num_users(), 2);
        assert_eq!(cfg.dims.users[1].n_mobile, 4);
        assert_eq!(cfg.sweep, vec![(5.0, 0.0), (5.0, 10.0), (15.0, 0.0), (15.0, 10.0)]);
        assert!(parse_config("[system]\nusers = 3\nn_mobile = 2, 4\n").is_err());
    }

    #[test]
    fn algorithm_defaults_follow_the_command() {
        let s = Settings::default();
        let c = s.resolve(Some(Direction::Uplink), Defaults::Convergence).unwrap();
        assert_eq!(c.algorithms, vec![Algorithm::Alg2, Algorithm::Alg1Uplink]);
        assert_eq!(c.sweep, vec![(20.0, 20.0)]);
        let b = s.resolve(Some(Direction::Downlink), Defaults::Baselines).unwrap();
        assert_eq!(b.algorithms[0], Algorithm::Alg1);
        assert_eq!(b.algorithms.len(), 4);
        let mut bad = Settings::default();
        bad.set("algorithms=alg2").unwrap();
        assert!(bad.resolve(Some(Direction::Downlink), Defaults::Sweep).is_err());
    }

    #[test]
    fn render_round_trips() {
        let text = "[system]\ndirection = uplink\nn_mobile = 2, 4\np_r = 0.3\n[experiment]\nthreshold = 1e-5\nalgorithms = alg2, per_hop\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(parse_config(&render(&cfg)).unwrap(), cfg);
        let d = ExperimentConfig::standard(Direction::Downlink);
        assert_eq!(parse_config(&render(&d)).unwrap(), d);
    }
}
