//! The workbench config and the `contain` target file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use unirep::config::{ComplexLiteral, GroupSpec, RepSpec, VectorLiteral};
use unirep::Caps;

use crate::args::Common;

/// One JSON document per run; see `docs/config-schema.md`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct WorkbenchConfig {
    pub group: GroupSpec,
    /// The ambient representation `π` (`η` for `transfer`). Defaults to the regular representation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<RepSpec>,
    /// `σ` for `transfer`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complement: Option<RepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<RepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<RepSpec>,
    /// Named vector tuples; which names a subcommand reads is listed in the schema document.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vectors: BTreeMap<String, Vec<VectorLiteral>>,
    /// Split targets for `transfer`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<SplitLiteral>>,
    /// Inline target for `contain`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    /// The finite set `F`; defaults to the identity and the generators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<String>>,
    #[serde(default)]
    pub task: TaskSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitLiteral {
    pub eta: VectorLiteral,
    pub complement: VectorLiteral,
}

/// Gram target of `contain`.
///
/// With `matrices` the target is explicit; with `vectors` it is their Gram
/// data in `representation` (default: the config's); with neither it is a
/// single invariant unit vector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<RepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<VectorLiteral>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<Vec<Vec<ComplexLiteral>>>>,
}

/// Subcommand parameters. Unset values take the subcommand's defaults and
/// are written back, so the echoed config in a report is fully explicit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TaskSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmax: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_radius: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_radius: Option<usize>,
    /// Blocks spanned by the `contain` search basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copies: Option<Vec<usize>>,
    #[serde(default)]
    pub caps: Caps,
}

impl TaskSpec {
    pub fn apply_flags(&mut self, c: &Common) {
        fn set<T: Copy>(slot: &mut Option<T>, v: Option<T>) {
            if v.is_some() {
                *slot = v;
            }
        }
        set(&mut self.radius, c.radius);
        set(&mut self.tol, c.tol);
        set(&mut self.eps, c.eps);
        set(&mut self.nmax, c.nmax);
        set(&mut self.exact_steps, c.exact_steps);
        set(&mut self.restarts, c.restarts);
        set(&mut self.budget, c.budget);
        if let Some(s) = c.seed {
            self.seed = s;
        }
        if let Some(v) = c.cap_ball {
            self.caps.ball = v;
        }
        if let Some(v) = c.cap_closure_dim {
            self.caps.closure_dim = v;
        }
        if let Some(v) = c.cap_support {
            self.caps.support = v;
        }
        if let Some(v) = c.cap_copies {
            self.caps.copies = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn common(args: &[&str]) -> Common {
        let mut argv = vec!["unirep", "probe-amenability", "--config", "x.json"];
        argv.extend_from_slice(args);
        match crate::args::Cli::parse_from(argv).command {
            crate::args::Command::ProbeAmenability(c) => c,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_task_block() {
        let mut t: TaskSpec = unirep::config::from_json(r#"{"radius": 3, "seed": 4, "caps": {"ball": 10}}"#).unwrap();
        t.apply_flags(&common(&["--radius", "5", "--cap-support", "7"]));
        assert_eq!(t.radius, Some(5));
        assert_eq!(t.seed, 4);
        assert_eq!(t.caps.ball, 10);
        assert_eq!(t.caps.support, 7);
    }

    #[test]
    fn unknown_task_key_names_path() {
        let err = unirep::config::from_json::<WorkbenchConfig>(r#"{"group": {"kind": "free", "rank": 2}, "task": {"radious": 3}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("$.task"), "{err}");
    }

    #[test]
    fn config_round_trips() {
        let text = r#"{"group": {"kind": "free", "rank": 2}, "vectors": {"a": [[[0, "1,2", 1.0, 0.5]]]}, "task": {"eps": 0.1}}"#;
        let cfg: WorkbenchConfig = unirep::config::from_json(text).unwrap();
        let again: WorkbenchConfig = unirep::config::from_json(&unirep::config::to_json(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
