use std::collections::HashMap;

use toml::Value;

use super::config::Module;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Float { lo: f64, hi: f64, lo_open: bool },
    Int { lo: i64, hi: i64 },
    Choice(&'static [&'static str]),
    FloatList { lo: f64, hi: f64, lo_open: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fallback {
    Required,
    /// Left unset; the runner picks a value from the others.
    Derived,
    /// A TOML literal.
    Literal(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub key: &'static str,
    pub kind: Kind,
    pub fallback: Fallback,
}

impl ParamSpec {
    pub fn is_required(&self) -> bool {
        self.fallback == Fallback::Required
    }

    fn check_float(x: f64, lo: f64, hi: f64, lo_open: bool) -> Result<(), String> {
        let above = if lo_open { x > lo } else { x >= lo };
        if x.is_finite() && above && x <= hi {
            Ok(())
        } else {
            let open = if lo_open { "(" } else { "[" };
            Err(format!("must lie in {open}{lo}, {hi}], got {x}"))
        }
    }

    /// Checks a written value against the kind, returning a reason.
    pub fn check(&self, v: &Value) -> Result<(), String> {
        match self.kind {
            Kind::Float { lo, hi, lo_open } => {
                let x = as_f64(v).ok_or("must be a number")?;
                Self::check_float(x, lo, hi, lo_open)
            }
            Kind::Int { lo, hi } => match v {
                Value::Integer(i) if (lo..=hi).contains(i) => Ok(()),
                Value::Integer(i) => Err(format!("must lie in [{lo}, {hi}], got {i}")),
                _ => Err("must be an integer".into()),
            },
            Kind::Choice(options) => match v {
                Value::String(s) if options.contains(&s.as_str()) => Ok(()),
                _ => Err(format!("must be one of {}", options.join(", "))),
            },
            Kind::FloatList { lo, hi, lo_open } => {
                let Value::Array(items) = v else {
                    return Err("must be a list of numbers".into());
                };
                if items.is_empty() {
                    return Err("must not be empty".into());
                }
                items.iter().try_for_each(|x| {
                    let x = as_f64(x).ok_or("must list numbers only")?;
                    Self::check_float(x, lo, hi, lo_open)
                })
            }
        }
    }

    fn default_value(&self) -> Option<Value> {
        match self.fallback {
            Fallback::Literal(lit) => {
                let table: toml::Table = format!("v = {lit}").parse().expect("schema literals are valid TOML");
                table.get("v").cloned()
            }
            _ => None,
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

const INF: f64 = f64::INFINITY;

const fn float(key: &'static str, lo: f64, hi: f64, lit: &'static str) -> ParamSpec {
    ParamSpec {
        key,
        kind: Kind::Float { lo, hi, lo_open: false },
        fallback: Fallback::Literal(lit),
    }
}

const fn positive(key: &'static str, lit: &'static str) -> ParamSpec {
    ParamSpec {
        key,
        kind: Kind::Float {
            lo: 0.0,
            hi: INF,
            lo_open: true,
        },
        fallback: Fallback::Literal(lit),
    }
}

const fn positive_derived(key: &'static str) -> ParamSpec {
    ParamSpec {
        key,
        kind: Kind::Float {
            lo: 0.0,
            hi: INF,
            lo_open: true,
        },
        fallback: Fallback::Derived,
    }
}

const fn int(key: &'static str, lo: i64, hi: i64, lit: &'static str) -> ParamSpec {
    ParamSpec {
        key,
        kind: Kind::Int { lo, hi },
        fallback: Fallback::Literal(lit),
    }
}

const fn choice(key: &'static str, options: &'static [&'static str], lit: &'static str) -> ParamSpec {
    ParamSpec {
        key,
        kind: Kind::Choice(options),
        fallback: Fallback::Literal(lit),
    }
}

const fn list(key: &'static str, lo: f64, hi: f64, lo_open: bool, fallback: Fallback) -> ParamSpec {
    ParamSpec {
        key,
        kind: Kind::FloatList { lo, hi, lo_open },
        fallback,
    }
}

const FITNESS: [ParamSpec; 5] = [
    int("half_width", 1, 40, "1"),
    float("b", 0.0, 1.0, "0.2"),
    ParamSpec {
        key: "m",
        kind: Kind::Int { lo: 2, hi: 80 },
        fallback: Fallback::Derived,
    },
    float("mu", 0.0, 1.0, "0.01"),
    list("capacity", 0.0, 1.0, true, Fallback::Derived),
];
const CENTER: ParamSpec = ParamSpec {
    key: "init_center",
    kind: Kind::Float {
        lo: 0.0,
        hi: 1.0,
        lo_open: true,
    },
    fallback: Fallback::Derived,
};

const SELMUT_RUN: [ParamSpec; 11] = [
    FITNESS[0],
    FITNESS[1],
    FITNESS[2],
    FITNESS[3],
    FITNESS[4],
    CENTER,
    float("t_end", 0.0, 1e7, "100.0"),
    positive("dt", "0.001"),
    choice("method", &["rk4", "rk45"], "\"rk4\""),
    positive("tol", "1e-9"),
    int("record_every", 1, i64::MAX, "100"),
];
const SELMUT_STATIONARY: [ParamSpec; 7] = [
    FITNESS[0],
    FITNESS[1],
    FITNESS[2],
    FITNESS[3],
    FITNESS[4],
    CENTER,
    positive("tol", "1e-10"),
];
const SELMUT_CUBIC: [ParamSpec; 3] = [
    float("b", 0.0, 1.0, "0.2"),
    float("mu", 0.0, 1.0, "0.006666666666666667"),
    int("points", 2, 1_000_000, "201"),
];

const DD_BASE: [ParamSpec; 3] = [
    int("half_width", 2, 200, "6"),
    int("m", 0, 400, "6"),
    float("mu", 0.0, 0.5, "0.001"),
];
const DD_RUN: [ParamSpec; 5] = [
    DD_BASE[0],
    DD_BASE[1],
    DD_BASE[2],
    int("iters", 1, i64::MAX, "1000"),
    int("record_every", 1, i64::MAX, "100"),
];
const DD_STATIONARY: [ParamSpec; 5] = [
    DD_BASE[0],
    DD_BASE[1],
    DD_BASE[2],
    positive("tol", "1e-12"),
    int("max_iter", 1, i64::MAX, "20000000"),
];
const DD_SWEEP: [ParamSpec; 5] = [
    DD_BASE[0],
    DD_BASE[1],
    list("mus", 0.0, 0.5, false, Fallback::Literal("[0.01, 0.001, 0.0001]")),
    positive("tol", "1e-12"),
    int("max_iter", 1, i64::MAX, "20000000"),
];

const MORAN_RUN: [ParamSpec; 10] = [
    FITNESS[0],
    FITNESS[1],
    FITNESS[2],
    FITNESS[3],
    FITNESS[4],
    CENTER,
    choice("mode", &["strong", "weak"], "\"strong\""),
    int("size", 2, 100_000_000, "1000"),
    float("t_end", 0.0, 1e6, "10.0"),
    positive("mesh", "0.1"),
];

const IPS_BASE: [ParamSpec; 7] = [
    float("lambda", 0.0, 1e6, "2.0"),
    float("delta", 0.0, 1e6, "1.0"),
    choice("rule", &["paired_anywhere", "same_site"], "\"paired_anywhere\""),
    choice("stirring", &["none", "lily_pad", "individual"], "\"none\""),
    positive("epsilon", "0.5"),
    int("dims", 1, 3, "1"),
    int("sides", 3, 1_000_000, "101"),
];
const IPS_RUN: [ParamSpec; 11] = [
    IPS_BASE[0],
    IPS_BASE[1],
    IPS_BASE[2],
    IPS_BASE[3],
    IPS_BASE[4],
    IPS_BASE[5],
    IPS_BASE[6],
    choice("init", &["single_pair", "full"], "\"single_pair\""),
    float("t_end", 0.0, 1e6, "20.0"),
    positive("mesh", "1.0"),
    int("trials", 1, 10_000_000, "1"),
];
const IPS_COUPLE: [ParamSpec; 10] = [
    IPS_BASE[0],
    IPS_BASE[1],
    IPS_BASE[2],
    IPS_BASE[3],
    IPS_BASE[4],
    IPS_BASE[5],
    IPS_BASE[6],
    list("lambdas", 0.0, 1e6, false, Fallback::Derived),
    float("t_end", 0.0, 1e6, "20.0"),
    int("trials", 1, 10_000_000, "10"),
];
const IPS_DUAL: [ParamSpec; 10] = [
    float("lambda", 0.0, 1e6, "0.05"),
    float("delta", 0.0, 1e6, "0.1"),
    choice("rule", &["paired_anywhere", "same_site"], "\"same_site\""),
    choice("stirring", &["individual"], "\"individual\""),
    positive("epsilon", "0.0625"),
    IPS_BASE[5],
    int("sides", 3, 1_000_000_000, "100001"),
    positive("t", "1.0"),
    int("trials", 1, 100_000_000, "1000"),
    int("max_size", 1, 100_000_000, "1000000"),
];
const GOOD_EVENTS: [ParamSpec; 8] = [
    IPS_BASE[0],
    IPS_BASE[1],
    IPS_BASE[2],
    int("sides", 3, 1_000_000, "101"),
    choice("init", &["full", "single_pair"], "\"full\""),
    positive("block_t", "1.0"),
    int("half_width", 0, 10_000, "20"),
    int("levels", 0, 10_000, "20"),
];

const PERC_EXACT: [ParamSpec; 6] = [
    float("gamma", 0.0, 1.0, "0.2"),
    int("half_width", 0, 100_000, "2"),
    int("levels", 0, 100_000, "4"),
    choice("init", &["origin", "bernoulli"], "\"origin\""),
    float("density", 0.0, 1.0, "1.0"),
    choice("target", &["nonempty", "origin"], "\"nonempty\""),
];
const PERC_SURVIVE: [ParamSpec; 7] = [
    PERC_EXACT[0],
    PERC_EXACT[1],
    PERC_EXACT[2],
    PERC_EXACT[3],
    PERC_EXACT[4],
    PERC_EXACT[5],
    int("trials", 1, 1_000_000_000, "10000"),
];

const PDE_RUN: [ParamSpec; 10] = [
    choice(
        "system",
        &["four_state", "three_state", "uv", "ind_pair", "scalar_sex"],
        "\"uv\"",
    ),
    positive("c", "25.0"),
    positive("half_width", "3.0"),
    positive("ramp", "0.18257418583505536"),
    list("amplitudes", 0.0, 1.0, false, Fallback::Derived),
    positive("h", "0.01"),
    positive_derived("x_max"),
    float("t_end", 0.0, 1e6, "1.0"),
    positive("s", "0.001"),
    int("record_every", 1, i64::MAX, "100"),
];
const PDE_STAR: [ParamSpec; 11] = [
    positive("c", "200.0"),
    float("d_low", 0.0, 1.0, "0.55"),
    float("d_high", 0.0, 1.0, "0.7"),
    positive("half_width", "3.0"),
    positive("ramp", "0.18257418583505536"),
    float("t_end", 0.0, 1e6, "2.0"),
    positive("s", "0.001"),
    positive("h", "0.01"),
    ParamSpec {
        key: "a0",
        kind: Kind::Float {
            lo: 0.0,
            hi: 1.0,
            lo_open: false,
        },
        fallback: Fallback::Derived,
    },
    float("b0", 0.0, 1.0, "0.6"),
    int("record_every", 1, i64::MAX, "1"),
];
const PDE_PHASE: [ParamSpec; 1] = [list("cs", 4.0, INF, true, Fallback::Literal("[5.0, 25.0, 100.0]"))];

/// Actions offered by each module.
pub fn actions(module: Module) -> &'static [&'static str] {
    match module {
        Module::Selmut => &["run", "stationary", "cubic"],
        Module::Dd => &["run", "stationary", "sweep"],
        Module::Moran => &["run"],
        Module::Ips => &["run", "couple", "dual", "goodevents"],
        Module::Perc => &["survive", "exact", "fromips"],
        Module::Pde => &["run", "star", "phase"],
    }
}

/// Parameter schema of one action.
pub fn schema(module: Module, action: &str) -> Option<&'static [ParamSpec]> {
    Some(match (module, action) {
        (Module::Selmut, "run") => &SELMUT_RUN,
        (Module::Selmut, "stationary") => &SELMUT_STATIONARY,
        (Module::Selmut, "cubic") => &SELMUT_CUBIC,
        (Module::Dd, "run") => &DD_RUN,
        (Module::Dd, "stationary") => &DD_STATIONARY,
        (Module::Dd, "sweep") => &DD_SWEEP,
        (Module::Moran, "run") => &MORAN_RUN,
        (Module::Ips, "run") => &IPS_RUN,
        (Module::Ips, "couple") => &IPS_COUPLE,
        (Module::Ips, "dual") => &IPS_DUAL,
        (Module::Ips, "goodevents") | (Module::Perc, "fromips") => &GOOD_EVENTS,
        (Module::Perc, "survive") => &PERC_SURVIVE,
        (Module::Perc, "exact") => &PERC_EXACT,
        (Module::Pde, "run") => &PDE_RUN,
        (Module::Pde, "star") => &PDE_STAR,
        (Module::Pde, "phase") => &PDE_PHASE,
        _ => return None,
    })
}

/// Parameters of one grid point with schema defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    values: HashMap<&'static str, Value>,
}

impl Params {
    pub fn resolve(specs: &'static [ParamSpec], given: &[(String, Value)]) -> Self {
        let values = specs
            .iter()
            .filter_map(|s| {
                let written = given.iter().find(|(k, _)| k == s.key).map(|(_, v)| v.clone());
                written.or_else(|| s.default_value()).map(|v| (s.key, v))
            })
            .collect();
        Self { values }
    }

    pub fn value(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn opt_f64(&self, key: &str) -> Option<f64> {
        self.value(key).and_then(as_f64)
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.opt_f64(key)
            .unwrap_or_else(|| panic!("parameter {key} has no value"))
    }

    pub fn opt_usize(&self, key: &str) -> Option<usize> {
        match self.value(key) {
            Some(Value::Integer(i)) => Some(*i as usize),
            _ => None,
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        self.opt_usize(key)
            .unwrap_or_else(|| panic!("parameter {key} has no value"))
    }

    pub fn opt_str(&self, key: &str) -> Option<&str> {
        match self.value(key) {
            Some(Value::String(s)) => Some(s),
            _ => None,
        }
    }

    pub fn str(&self, key: &str) -> &str {
        self.opt_str(key)
            .unwrap_or_else(|| panic!("parameter {key} has no value"))
    }

    pub fn opt_list(&self, key: &str) -> Option<Vec<f64>> {
        match self.value(key) {
            Some(Value::Array(items)) => Some(items.iter().filter_map(as_f64).collect()),
            _ => None,
        }
    }

    pub fn list(&self, key: &str) -> Vec<f64> {
        self.opt_list(key)
            .unwrap_or_else(|| panic!("parameter {key} has no value"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_default_satisfies_its_own_kind() {
        for module in Module::ALL {
            for action in actions(module) {
                let specs = schema(module, action).unwrap();
                for s in specs {
                    if let Some(v) = s.default_value() {
                        assert!(s.check(&v).is_ok(), "{} {action} {}", module.as_str(), s.key);
                    }
                }
                let mut keys: Vec<_> = specs.iter().map(|s| s.key).collect();
                keys.sort();
                keys.dedup();
                assert_eq!(keys.len(), specs.len());
            }
        }
    }

    #[test]
    fn resolution_prefers_written_values() {
        let p = Params::resolve(&SELMUT_CUBIC, &[("b".into(), Value::Float(0.1))]);
        assert_eq!(p.f64("b"), 0.1);
        assert_eq!(p.usize("points"), 201);
        assert!(!Params::resolve(&SELMUT_RUN, &[]).has("capacity"));
    }

    #[test]
    fn kinds_reject_bad_values() {
        assert!(float("x", 0.0, 1.0, "0").check(&Value::Float(1.5)).is_err());
        assert!(positive("x", "1").check(&Value::Float(0.0)).is_err());
        assert!(positive("x", "1").check(&Value::Integer(2)).is_ok());
        assert!(int("n", 1, 3, "1").check(&Value::Float(2.0)).is_err());
        assert!(choice("c", &["a"], "\"a\"").check(&Value::from("b")).is_err());
        let l = list("l", 0.0, 1.0, true, Fallback::Required);
        assert!(l.check(&Value::Array(vec![])).is_err());
        assert!(l.check(&Value::Array(vec![Value::Float(0.0)])).is_err());
        assert!(l.is_required());
    }
}
