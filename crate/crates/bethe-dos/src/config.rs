//! JSON schemas for every artifact the tool reads or writes: single-site
//! laws, analytic windows, coefficient tables, Monte Carlo result records,
//! and full run configurations.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::oracle::MCEstimate;
use crate::stieltjes::{AnalyticWindow, Density, OutsideMass, SingleSiteLaw};
use crate::treewalk::{CoefficientTable, CountPolynomial, OccupationProfile};
use crate::{Error, Result};

/// Serialized single-site law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase", deny_unknown_fields)]
pub enum LawSpec {
    /// `{"law": "uniform", "a": 1.0}`
    Uniform { a: f64 },
    /// ```json
    /// {"law": "generic",
    ///  "support": [-1.0, 1.0],
    ///  "density": {"kind": "chebyshev", "coeffs": [0.5], "interval": [-1.0, 1.0]},
    ///  "outside_masses": [[0.9, 0.05]],
    ///  "density_bound_on_eta": 0.6}
    /// ```
    Generic {
        support: [f64; 2],
        density: DensitySpec,
        #[serde(default)]
        outside_masses: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        density_bound_on_eta: Option<f64>,
    },
}

/// Serialized analytic density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DensitySpec {
    Constant { value: f64 },
    Chebyshev { coeffs: Vec<f64>, interval: [f64; 2] },
}

impl DensitySpec {
    pub fn to_density(&self) -> Density {
        match self {
            DensitySpec::Constant { value } => Density::Constant(*value),
            DensitySpec::Chebyshev { coeffs, interval } => Density::Chebyshev {
                coeffs: coeffs.clone(),
                lo: interval[0],
                hi: interval[1],
            },
        }
    }

    pub fn from_density(density: &Density) -> Self {
        match density {
            Density::Constant(c) => DensitySpec::Constant { value: *c },
            Density::Chebyshev { coeffs, lo, hi } => DensitySpec::Chebyshev {
                coeffs: coeffs.clone(),
                interval: [*lo, *hi],
            },
        }
    }
}

impl LawSpec {
    pub fn to_law(&self) -> Result<SingleSiteLaw> {
        match self {
            LawSpec::Uniform { a } => SingleSiteLaw::uniform(*a),
            LawSpec::Generic {
                support,
                density,
                outside_masses,
                density_bound_on_eta,
            } => {
                if !(support[0] < support[1]) {
                    return Err(Error::Law(format!(
                        "support must be an interval, got [{}, {}]",
                        support[0], support[1]
                    )));
                }
                Ok(SingleSiteLaw::Generic {
                    density: density.to_density(),
                    outside: outside_masses
                        .iter()
                        .map(|m| OutsideMass { t: m[0], w: m[1] })
                        .collect(),
                    support: (support[0], support[1]),
                    density_bound_on_eta: *density_bound_on_eta,
                })
            }
        }
    }

    pub fn from_law(law: &SingleSiteLaw) -> Self {
        match law {
            SingleSiteLaw::Uniform { half_width } => LawSpec::Uniform { a: *half_width },
            SingleSiteLaw::Generic {
                density,
                outside,
                support,
                density_bound_on_eta,
            } => LawSpec::Generic {
                support: [support.0, support.1],
                density: DensitySpec::from_density(density),
                outside_masses: outside.iter().map(|m| [m.t, m.w]).collect(),
                density_bound_on_eta: *density_bound_on_eta,
            },
        }
    }
}

/// Serialized analytic window: `{"I": [-0.5, 0.5], "delta0": 0.3, "delta": 0.15}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    #[serde(rename = "I")]
    pub i: [f64; 2],
    pub delta0: f64,
    pub delta: f64,
}

impl WindowSpec {
    pub fn to_window(&self) -> Result<AnalyticWindow> {
        AnalyticWindow::new(self.i[0], self.i[1], self.delta0, self.delta)
    }

    pub fn from_window(window: &AnalyticWindow) -> Self {
        let (lo, hi) = window.i();
        WindowSpec {
            i: [lo, hi],
            delta0: window.delta0(),
            delta: window.delta(),
        }
    }
}

/// One walk class in a serialized coefficient table: the occupation profile
/// as a multiplicity map and the count polynomial by ascending powers of `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassRecord {
    pub profile: BTreeMap<u32, u32>,
    pub count_poly: Vec<i64>,
}

/// One order of the table: `{"n": 4, "classes": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    pub n: usize,
    pub classes: Vec<ClassRecord>,
}

/// Full serialized coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFile {
    pub max_order: usize,
    pub rows: Vec<TableRow>,
}

impl TableFile {
    pub fn from_table(table: &CoefficientTable) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, classes) in table.rows() {
            let mut out = Vec::with_capacity(classes.len());
            for (profile, poly) in classes {
                let coeffs: Result<Vec<i64>> = poly
                    .coeffs()
                    .iter()
                    .map(|c| {
                        i64::try_from(c.clone()).map_err(|_| {
                            Error::Config(format!("count coefficient {c} exceeds i64 range"))
                        })
                    })
                    .collect();
                out.push(ClassRecord {
                    profile: profile.iter().collect(),
                    count_poly: coeffs?,
                });
            }
            rows.push(TableRow { n, classes: out });
        }
        Ok(TableFile {
            max_order: table.max_order(),
            rows,
        })
    }

    pub fn to_table(&self) -> CoefficientTable {
        let mut rows = BTreeMap::new();
        for row in &self.rows {
            let classes = row
                .classes
                .iter()
                .map(|c| {
                    (
                        OccupationProfile::from_multiplicities(c.profile.clone()),
                        CountPolynomial::from_i64_coeffs(&c.count_poly),
                    )
                })
                .collect();
            rows.insert(row.n, classes);
        }
        CoefficientTable::from_rows(rows)
    }
}

/// Serialized Monte Carlo result:
/// `{"mean": [re, im], "stderr": s, "samples": M, "depth": R, "gap": g, "seed": n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McResultRecord {
    pub mean: [f64; 2],
    pub stderr: f64,
    pub samples: u64,
    pub depth: u32,
    pub gap: f64,
    pub seed: u64,
}

impl McResultRecord {
    pub fn from_estimate(estimate: &MCEstimate, depth: u32, seed: u64) -> Self {
        McResultRecord {
            mean: [estimate.mean.re, estimate.mean.im],
            stderr: estimate.stderr,
            samples: estimate.samples_used,
            depth,
            gap: estimate.depth_pair_gap,
            seed,
        }
    }

    pub fn mean_complex(&self) -> Complex64 {
        Complex64::new(self.mean[0], self.mean[1])
    }
}

/// Full run configuration. Every field is optional so a file can be partial;
/// command-line flags overlay file values, and remaining holes are filled
/// with the documented defaults at resolution time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub q: Option<u64>,
    pub lambda: Option<f64>,
    pub order: Option<usize>,
    pub law: Option<LawSpec>,
    pub window: Option<WindowSpec>,
    pub grid: Option<usize>,
    pub depth: Option<u32>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Overlay `other` on top of `self`: any field set in `other` wins.
    pub fn overlay(mut self, other: RunConfig) -> RunConfig {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(q, lambda, order, law, window, grid, depth, samples, seed);
        self
    }

    /// Fill unset fields with defaults and produce concrete values.
    pub fn resolve(self) -> Result<ResolvedConfig> {
        let law_spec = self.law.unwrap_or(LawSpec::Uniform { a: 1.0 });
        let window_spec = self.window.unwrap_or(WindowSpec {
            i: [-0.5, 0.5],
            delta0: 0.3,
            delta: 0.15,
        });
        Ok(ResolvedConfig {
            q: self.q.unwrap_or(2),
            lambda: self.lambda.unwrap_or(100.0),
            order: self.order.unwrap_or(8),
            law: law_spec.to_law()?,
            window: window_spec.to_window()?,
            grid: self.grid.unwrap_or(101),
            depth: self.depth.unwrap_or(20),
            samples: self.samples.unwrap_or(100_000),
            seed: self.seed.unwrap_or(42),
        })
    }
}

/// A [`RunConfig`] with every hole filled and domain objects constructed.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub q: u64,
    pub lambda: f64,
    pub order: usize,
    pub law: SingleSiteLaw,
    pub window: AnalyticWindow,
    pub grid: usize,
    pub depth: u32,
    pub samples: u64,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_law_round_trips() {
        let json = r#"{"law":"uniform","a":1.0}"#;
        let spec: LawSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec, LawSpec::Uniform { a: 1.0 });
        let law = spec.to_law().unwrap();
        assert_eq!(law, SingleSiteLaw::Uniform { half_width: 1.0 });
        let back = serde_json::to_string(&LawSpec::from_law(&law)).unwrap();
        assert_eq!(back, json);
    }

    #[test]
    fn generic_law_round_trips() {
        let json = r#"{"law":"generic","support":[-1.0,1.0],"density":{"kind":"chebyshev","coeffs":[0.5,0.0,-0.1],"interval":[-1.0,1.0]},"outside_masses":[[0.9,0.05]],"density_bound_on_eta":0.6}"#;
        let spec: LawSpec = serde_json::from_str(json).unwrap();
        let law = spec.to_law().unwrap();
        assert_eq!(law.support(), (-1.0, 1.0));
        assert_eq!(law.outside(), &[OutsideMass { t: 0.9, w: 0.05 }]);
        let round = LawSpec::from_law(&law);
        assert_eq!(round, spec);
    }

    #[test]
    fn window_round_trips() {
        let json = r#"{"I":[-0.5,0.5],"delta0":0.3,"delta":0.15}"#;
        let spec: WindowSpec = serde_json::from_str(json).unwrap();
        let window = spec.to_window().unwrap();
        assert_eq!(window.i(), (-0.5, 0.5));
        assert_eq!(window.delta0(), 0.3);
        assert_eq!(serde_json::to_string(&WindowSpec::from_window(&window)).unwrap(), json);
    }

    #[test]
    fn invalid_window_is_rejected_at_conversion() {
        let spec = WindowSpec {
            i: [-0.5, 0.5],
            delta0: 0.1,
            delta: 0.2,
        };
        assert!(spec.to_window().is_err());
    }

    #[test]
    fn table_round_trips_through_json() {
        let table = CoefficientTable::build(6).unwrap();
        let file = TableFile::from_table(&table).unwrap();
        let json = serde_json::to_string_pretty(&file).unwrap();
        let parsed: TableFile = serde_json::from_str(&json).unwrap();
        let back = parsed.to_table();
        assert_eq!(back.max_order(), table.max_order());
        for (n, classes) in table.rows() {
            assert_eq!(back.row(n), classes, "order {n}");
        }
    }

    #[test]
    fn order_four_row_serializes_as_documented() {
        let table = CoefficientTable::build(4).unwrap();
        let file = TableFile::from_table(&table).unwrap();
        let row = file.rows.iter().find(|r| r.n == 4).unwrap();
        let json = serde_json::to_string(row).unwrap();
        assert_eq!(
            json,
            r#"{"n":4,"classes":[{"profile":{"2":1,"3":1},"count_poly":[1,1]},{"profile":{"1":2,"3":1},"count_poly":[0,1,1]},{"profile":{"1":1,"2":2},"count_poly":[0,1,1]}]}"#
        );
    }

    #[test]
    fn mc_record_round_trips() {
        let record = McResultRecord {
            mean: [0.01, 0.12],
            stderr: 3e-4,
            samples: 100_000,
            depth: 20,
            gap: 1e-9,
            seed: 42,
        };
        let json = serde_json::to_string(&record).unwrap();
        let parsed: McResultRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, record);
        assert_eq!(parsed.mean_complex(), Complex64::new(0.01, 0.12));
    }

    #[test]
    fn run_config_overlay_and_defaults() {
        let file: RunConfig =
            serde_json::from_str(r#"{"q": 3, "lambda": 50.0, "seed": 7}"#).unwrap();
        let flags = RunConfig {
            lambda: Some(80.0),
            order: Some(6),
            ..RunConfig::default()
        };
        let resolved = file.overlay(flags).resolve().unwrap();
        assert_eq!(resolved.q, 3);
        assert_eq!(resolved.lambda, 80.0);
        assert_eq!(resolved.order, 6);
        assert_eq!(resolved.seed, 7);
        assert_eq!(resolved.grid, 101);
        assert_eq!(resolved.samples, 100_000);
        assert_eq!(resolved.law, SingleSiteLaw::Uniform { half_width: 1.0 });
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<LawSpec>(r#"{"law":"uniform","a":1.0,"b":2}"#).is_err());
        assert!(serde_json::from_str::<WindowSpec>(r#"{"I":[0,1],"delta0":0.1,"delta":0.05,"x":1}"#)
            .is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"qq": 3}"#).is_err());
    }
}
