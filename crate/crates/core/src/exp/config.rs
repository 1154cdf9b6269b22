use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;
use toml::Value;

use super::registry::{schema, ParamSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate key {key:?} on lines {first} and {second}")]
    DuplicateKey { key: String, first: usize, second: usize },

    #[error("line {line}: unknown key {key:?} in {section}")]
    UnknownKey { section: String, key: String, line: usize },

    #[error("line {line}: {key} {message}")]
    Range { key: String, line: usize, message: String },

    #[error("missing required key {0}")]
    Missing(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Module {
    Selmut,
    Dd,
    Moran,
    Ips,
    Perc,
    Pde,
}

impl Module {
    pub const ALL: [Module; 6] = [
        Module::Selmut,
        Module::Dd,
        Module::Moran,
        Module::Ips,
        Module::Perc,
        Module::Pde,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Module::Selmut => "selmut",
            Module::Dd => "dd",
            Module::Moran => "moran",
            Module::Ips => "ips",
            Module::Perc => "perc",
            Module::Pde => "pde",
        }
    }
}

impl FromStr for Module {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Module::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown module {s:?}"))
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub module: Module,
    pub action: String,
    pub seed: u64,
    pub repeat: usize,
    pub out: Option<PathBuf>,
    /// Parameters as written, in file order.
    pub params: Vec<(String, Value)>,
    /// Swept parameters with their value lists, in file order.
    pub sweep: Vec<(String, Vec<Value>)>,
}

impl ExperimentConfig {
    /// A configuration with every parameter at its default.
    pub fn defaults(module: Module, action: &str) -> Result<Self, ConfigError> {
        schema(module, action).ok_or_else(|| ConfigError::Range {
            key: "action".into(),
            line: 0,
            message: format!("{action:?} is not an action of {}", module.as_str()),
        })?;
        Ok(Self {
            id: format!("{}-{action}", module.as_str()),
            module,
            action: action.to_string(),
            seed: 0,
            repeat: 1,
            out: None,
            params: Vec::new(),
            sweep: Vec::new(),
        })
    }

    /// Canonical text form; parsing it gives back the same configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[experiment]");
        let _ = writeln!(out, "id = {}", Value::from(self.id.as_str()));
        let _ = writeln!(out, "module = {}", Value::from(self.module.as_str()));
        let _ = writeln!(out, "action = {}", Value::from(self.action.as_str()));
        let _ = writeln!(out, "\n[run]");
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "repeat = {}", self.repeat);
        if let Some(path) = &self.out {
            let _ = writeln!(out, "out = {}", Value::from(path.display().to_string()));
        }
        if !self.params.is_empty() {
            let _ = writeln!(out, "\n[params]");
            for (k, v) in &self.params {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        if !self.sweep.is_empty() {
            let _ = writeln!(out, "\n[sweep]");
            for (k, vs) in &self.sweep {
                let _ = writeln!(out, "{k} = {}", Value::Array(vs.clone()));
            }
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))[..16].to_string()
    }

    /// Applies a `key=value` override, validated like a `[params]` entry.
    /// The value is read as a TOML literal, falling back to a bare string.
    /// An override replaces any sweep over the same key.
    pub fn set_param(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, literal) = assignment.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: 0,
            message: format!("override {assignment:?} is not key=value"),
        })?;
        let (key, literal) = (key.trim(), literal.trim());
        let spec = self
            .schema()
            .iter()
            .find(|s| s.key == key)
            .ok_or_else(|| ConfigError::UnknownKey {
                section: format!("overrides of {} {}", self.module.as_str(), self.action),
                key: key.to_string(),
                line: 0,
            })?;
        let value = format!("v = {literal}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::from(literal));
        spec.check(&value).map_err(|message| ConfigError::Range {
            key: key.to_string(),
            line: 0,
            message,
        })?;
        self.sweep.retain(|(k, _)| k != key);
        match self.params.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.params.push((key.to_string(), value)),
        }
        Ok(())
    }

    pub fn schema(&self) -> &'static [ParamSpec] {
        schema(self.module, &self.action).expect("validated on construction")
    }

    /// Parameter sets of the sweep grid, last swept key varying fastest.
    /// Without a sweep this is the single written parameter set.
    pub fn grid(&self) -> Vec<Vec<(String, Value)>> {
        let mut points = vec![self.params.clone()];
        for (key, values) in &self.sweep {
            points = points
                .into_iter()
                .flat_map(|base| {
                    values.iter().map(move |v| {
                        let mut p: Vec<(String, Value)> = base.iter().filter(|(k, _)| k != key).cloned().collect();
                        p.push((key.clone(), v.clone()));
                        p
                    })
                })
                .collect();
        }
        points
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn translate_toml_error(text: &str, err: &toml::de::Error) -> ConfigError {
    let line = err.span().map_or(0, |s| line_of(text, s.start));
    let message = err.message().to_string();
    if message.contains("duplicate key") {
        if let Some(span) = err.span() {
            let key = text[span.clone()].trim().trim_matches('"').to_string();
            if let Some(first) = earlier_definition(text, line, &key) {
                return ConfigError::DuplicateKey {
                    key,
                    first,
                    second: line,
                };
            }
        }
    }
    ConfigError::Parse { line, message }
}

/// Line of the earlier `key = ...` in the same section as `line`, or of
/// the earlier `[key]` header.
fn earlier_definition(text: &str, line: usize, key: &str) -> Option<usize> {
    let lines: Vec<&str> = text.lines().take(line - 1).collect();
    let header = format!("[{key}]");
    if let Some(i) = lines.iter().position(|l| l.trim() == header) {
        return Some(i + 1);
    }
    for (i, l) in lines.iter().enumerate().rev() {
        let l = l.trim();
        if l.starts_with('[') {
            break;
        }
        if l.split_once('=')
            .is_some_and(|(k, _)| k.trim().trim_matches('"') == key)
        {
            return Some(i + 1);
        }
    }
    None
}

/// Line numbers of every `section.key`, and of every section header.
fn key_lines(text: &str) -> HashMap<(String, String), usize> {
    let mut lines = HashMap::new();
    let Ok(doc) = toml::de::DeTable::parse(text) else {
        return lines;
    };
    for (section, value) in doc.get_ref() {
        let name = section.get_ref().to_string();
        lines.insert((String::new(), name.clone()), line_of(text, section.span().start));
        if let toml::de::DeValue::Table(table) = value.get_ref() {
            for (key, _) in table {
                lines.insert(
                    (name.clone(), key.get_ref().to_string()),
                    line_of(text, key.span().start),
                );
            }
        }
    }
    lines
}

struct Lines(HashMap<(String, String), usize>);

impl Lines {
    fn get(&self, section: &str, key: &str) -> usize {
        self.0
            .get(&(section.to_string(), key.to_string()))
            .copied()
            .unwrap_or(0)
    }

    fn range(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Range {
            key: key.to_string(),
            line: self.get(section, key),
            message: message.into(),
        }
    }

    fn ordered<'a>(&self, section: &str, table: &'a toml::Table) -> Vec<(&'a String, &'a Value)> {
        let mut entries: Vec<_> = table.iter().collect();
        entries.sort_by_key(|(k, _)| self.get(section, k));
        entries
    }
}

fn table<'a>(doc: &'a toml::Table, name: &str, lines: &Lines) -> Result<Option<&'a toml::Table>, ConfigError> {
    match doc.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(lines.range("", name, "must be a section")),
    }
}

fn reject_unknown(section: &str, t: &toml::Table, allowed: &[&str], lines: &Lines) -> Result<(), ConfigError> {
    for key in t.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey {
                section: format!("[{section}]"),
                key: key.clone(),
                line: lines.get(section, key),
            });
        }
    }
    Ok(())
}

fn string_key(section: &str, t: &toml::Table, key: &str, lines: &Lines) -> Result<Option<String>, ConfigError> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(lines.range(section, key, "must be a string")),
    }
}

fn int_key(section: &str, t: &toml::Table, key: &str, min: i64, lines: &Lines) -> Result<Option<i64>, ConfigError> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Integer(i)) if *i >= min => Ok(Some(*i)),
        Some(Value::Integer(i)) => Err(lines.range(section, key, format!("must be at least {min}, got {i}"))),
        Some(_) => Err(lines.range(section, key, "must be an integer")),
    }
}

/// Parses and validates a configuration. `module` and `action` fill in a
/// missing `[experiment]` entry and must agree with a present one.
pub fn parse_config_for(
    text: &str,
    module: Option<Module>,
    action: Option<&str>,
) -> Result<ExperimentConfig, ConfigError> {
    let doc: toml::Table = text.parse().map_err(|e| translate_toml_error(text, &e))?;
    let lines = Lines(key_lines(text));
    for (key, value) in &doc {
        let known = ["experiment", "run", "params", "sweep"].contains(&key.as_str());
        if !known || !value.is_table() {
            return Err(ConfigError::UnknownKey {
                section: "the top level".into(),
                key: key.clone(),
                line: lines.get("", key),
            });
        }
    }

    let empty = toml::Table::new();
    let exp = table(&doc, "experiment", &lines)?.unwrap_or(&empty);
    reject_unknown("experiment", exp, &["id", "module", "action"], &lines)?;
    let written_module = match string_key("experiment", exp, "module", &lines)? {
        Some(m) => Some(
            m.parse::<Module>()
                .map_err(|e| lines.range("experiment", "module", e))?,
        ),
        None => None,
    };
    let module = match (written_module, module) {
        (Some(a), Some(b)) if a != b => {
            return Err(lines.range(
                "experiment",
                "module",
                format!("is {} but {} was requested", a.as_str(), b.as_str()),
            ))
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(ConfigError::Missing("experiment.module".into())),
    };
    let written_action = string_key("experiment", exp, "action", &lines)?;
    let action = match (written_action, action) {
        (Some(a), Some(b)) if a != b => {
            return Err(lines.range("experiment", "action", format!("is {a} but {b} was requested")))
        }
        (Some(a), _) => a,
        (None, Some(a)) => a.to_string(),
        (None, None) => return Err(ConfigError::Missing("experiment.action".into())),
    };
    let specs = schema(module, &action).ok_or_else(|| {
        lines.range(
            "experiment",
            "action",
            format!("{action:?} is not an action of {}", module.as_str()),
        )
    })?;
    let mut config = ExperimentConfig::defaults(module, &action)?;
    if let Some(id) = string_key("experiment", exp, "id", &lines)? {
        config.id = id;
    }

    if let Some(run) = table(&doc, "run", &lines)? {
        reject_unknown("run", run, &["seed", "repeat", "out"], &lines)?;
        if let Some(seed) = int_key("run", run, "seed", 0, &lines)? {
            config.seed = seed as u64;
        }
        if let Some(repeat) = int_key("run", run, "repeat", 1, &lines)? {
            config.repeat = repeat as usize;
        }
        config.out = string_key("run", run, "out", &lines)?.map(PathBuf::from);
    }

    let find = |section: &str, key: &str| {
        specs
            .iter()
            .find(|s| s.key == key)
            .ok_or_else(|| ConfigError::UnknownKey {
                section: format!("[{section}] of {} {action}", module.as_str()),
                key: key.to_string(),
                line: lines.get(section, key),
            })
    };
    if let Some(params) = table(&doc, "params", &lines)? {
        for (key, value) in lines.ordered("params", params) {
            let spec = find("params", key)?;
            spec.check(value).map_err(|m| lines.range("params", key, m))?;
            config.params.push((key.clone(), value.clone()));
        }
    }
    if let Some(sweep) = table(&doc, "sweep", &lines)? {
        for (key, value) in lines.ordered("sweep", sweep) {
            let spec = find("sweep", key)?;
            let Value::Array(values) = value else {
                return Err(lines.range("sweep", key, "must be a list of values"));
            };
            if values.is_empty() {
                return Err(lines.range("sweep", key, "must list at least one value"));
            }
            for v in values {
                spec.check(v).map_err(|m| lines.range("sweep", key, m))?;
            }
            config.sweep.push((key.clone(), values.clone()));
        }
    }
    for spec in specs {
        let given = config.params.iter().any(|(k, _)| k == spec.key) || config.sweep.iter().any(|(k, _)| k == spec.key);
        if spec.is_required() && !given {
            return Err(ConfigError::Missing(format!("params.{}", spec.key)));
        }
    }
    Ok(config)
}

/// Parses a configuration that names its module and action.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_for(text, None, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[experiment]
id = \"bistable\"
module = \"selmut\"
action = \"run\"

[run]
seed = 7
repeat = 1

[params]
b = 0.2
mu = 0.01
t_end = 50.0
";

    #[test]
    fn canonical_text_round_trips() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.to_text(), MINIMAL);
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
        assert_eq!(c.seed, 7);
        assert_eq!(c.hash().len(), 16);
    }

    #[test]
    fn negative_rate_names_the_key() {
        let text = "[experiment]\nmodule = \"ips\"\naction = \"run\"\n[params]\nlambda = -1.0\n";
        match parse_config(text).unwrap_err() {
            ConfigError::Range { key, line, .. } => assert_eq!((key.as_str(), line), ("lambda", 5)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_report_both_lines() {
        let text = "[experiment]\nmodule = \"selmut\"\naction = \"run\"\n[params]\nmu = 0.1\nb = 0.2\nmu = 0.3\n";
        assert_eq!(
            parse_config(text).unwrap_err(),
            ConfigError::DuplicateKey {
                key: "mu".into(),
                first: 5,
                second: 7
            }
        );
    }

    #[test]
    fn unknown_keys_are_rejected_with_lines() {
        let text = "[experiment]\nmodule = \"selmut\"\naction = \"run\"\n[params]\nmu = 0.1\nnu = 0.2\n";
        assert!(matches!(
            parse_config(text).unwrap_err(),
            ConfigError::UnknownKey { line: 6, .. }
        ));
        let text = "[experiment]\nmodule = \"selmut\"\naction = \"run\"\ncolour = 1\n";
        assert!(matches!(
            parse_config(text).unwrap_err(),
            ConfigError::UnknownKey { line: 4, .. }
        ));
        let text = "[run]\nseeds = 3\n";
        assert!(matches!(
            parse_config_for(text, Some(Module::Dd), Some("run")).unwrap_err(),
            ConfigError::UnknownKey { line: 2, .. }
        ));
    }

    #[test]
    fn module_and_action_resolution() {
        assert!(matches!(
            parse_config("[run]\nseed = 1\n"),
            Err(ConfigError::Missing(_))
        ));
        let c = parse_config_for("", Some(Module::Pde), Some("phase")).unwrap();
        assert_eq!((c.module, c.action.as_str()), (Module::Pde, "phase"));
        let text = "[experiment]\nmodule = \"dd\"\naction = \"run\"\n";
        assert!(parse_config_for(text, Some(Module::Pde), None).is_err());
        assert!(parse_config_for("", Some(Module::Pde), Some("dance")).is_err());
    }

    #[test]
    fn overrides_are_validated() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.set_param("mu=0.02").unwrap();
        c.set_param("method = rk45").unwrap();
        c.set_param("half_width=2").unwrap();
        assert_eq!(c.params[1], ("mu".to_string(), Value::Float(0.02)));
        assert_eq!(c.params.last().unwrap().1, Value::Integer(2));
        assert!(matches!(c.set_param("mu=-1"), Err(ConfigError::Range { .. })));
        assert!(matches!(c.set_param("nu=1"), Err(ConfigError::UnknownKey { .. })));
        assert!(matches!(c.set_param("method=rk5"), Err(ConfigError::Range { .. })));
        assert!(c.set_param("mu").is_err());
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let err = parse_config("[experiment]\nmodule = \"dd\"\naction = \n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn sweep_grid_expands_in_order() {
        let text = "[experiment]\nmodule = \"dd\"\naction = \"stationary\"\n[params]\nmu = 0.1\n[sweep]\nmu = [0.01, 0.001]\nhalf_width = [6, 7]\n";
        let c = parse_config(text).unwrap();
        let grid = c.grid();
        assert_eq!(grid.len(), 4);
        assert_eq!(
            grid[1],
            vec![
                ("mu".to_string(), Value::Float(0.01)),
                ("half_width".to_string(), Value::Integer(7))
            ]
        );
        let bad = "[experiment]\nmodule = \"dd\"\naction = \"run\"\n[sweep]\nmu = 0.1\n";
        assert!(matches!(parse_config(bad), Err(ConfigError::Range { line: 5, .. })));
    }
}
