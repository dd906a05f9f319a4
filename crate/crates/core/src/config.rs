//! TOML run configuration.
//!
//! Only `[machine]` is required; every other section falls back to the
//! reference scenario. Unknown keys are rejected. See the README for the
//! full schema, or print the defaults with `pmsm-obs simulate --print-config`.

use std::f64::consts::FRAC_PI_4;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::control::{ControlConfig, InjectionSchedule};
use crate::error::{Error, Result};
use crate::machine::{MachineParams, MachineState};
use crate::simulation::{default_paper_scenario, EstimatorConfig, MachineKind, ObservabilityTarget, Scenario, SpeedProfile};

/// Machine constants. Give either `ld`/`lq` or `l0`/`l2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSection {
    pub resistance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ld: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    pub psi_r: f64,
    pub pole_pairs: u32,
    #[serde(default = "default_inertia")]
    pub inertia: f64,
}

fn default_inertia() -> f64 {
    MachineParams::DEFAULT_INERTIA
}

impl MachineSection {
    pub fn from_params(p: &MachineParams) -> Self {
        Self {
            resistance: p.resistance,
            ld: None,
            lq: None,
            l0: Some(p.l0),
            l2: Some(p.l2),
            psi_r: p.psi_r,
            pole_pairs: p.pole_pairs,
            inertia: p.inertia,
        }
    }

    fn params(&self, errors: &mut Vec<String>) -> Option<MachineParams> {
        let (l0, l2) = match (self.ld, self.lq, self.l0, self.l2) {
            (Some(ld), Some(lq), None, None) => (0.5 * (ld + lq), 0.5 * (ld - lq)),
            (None, None, Some(l0), Some(l2)) => (l0, l2),
            _ => {
                errors.push("machine: give exactly one of the pairs (ld, lq) or (l0, l2)".into());
                return None;
            }
        };
        Some(MachineParams {
            resistance: self.resistance,
            l0,
            l2,
            psi_r: self.psi_r,
            pole_pairs: self.pole_pairs,
            inertia: self.inertia,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub t_end: f64,
    pub ts: f64,
    pub ode_substeps: u32,
    pub theta_hat_error0: f64,
    pub seed: u64,
    pub noise_std: f64,
    /// `[i_d*, i_q*]`
    pub setpoints: [f64; 2],
    pub start_at_setpoint: bool,
    pub observability_on: ObservabilityTarget,
    pub profile: SpeedProfile,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = default_paper_scenario(MachineKind::Ipmsm);
        Self {
            t_end: s.t_end,
            ts: s.ts,
            ode_substeps: s.ode_substeps,
            theta_hat_error0: s.theta_hat_error0,
            seed: s.seed,
            noise_std: s.noise_std,
            setpoints: [s.setpoints.0, s.setpoints.1],
            start_at_setpoint: s.start_at_setpoint,
            observability_on: s.observability_on,
            profile: s.profile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Directory for every file written; created if missing.
    pub dir: Option<PathBuf>,
    pub csv: Option<String>,
    pub summary: Option<String>,
}

impl OutputSection {
    pub fn dir(&self) -> PathBuf {
        self.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
    pub fn csv_name(&self) -> String {
        self.csv.clone().unwrap_or_else(|| "trajectory.csv".into())
    }
    pub fn summary_name(&self) -> String {
        self.summary.clone().unwrap_or_else(|| "summary.txt".into())
    }
}

/// What `analyze` evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AnalyzeSource {
    /// The scenario's plant and controller, without the filter.
    #[default]
    Scenario,
    /// One fixed state with a held input.
    State,
    /// A trajectory read from `input` (CSV with `t, i_alpha, i_beta, omega,
    /// theta, v_alpha, v_beta` and optionally `acceleration`).
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeSection {
    pub source: AnalyzeSource,
    pub state: MachineState,
    pub voltage: [f64; 2],
    pub acceleration: f64,
    pub input: Option<PathBuf>,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            source: AnalyzeSource::Scenario,
            state: MachineState { i_alpha: 0.0, i_beta: 15.0, ..MachineState::default() },
            voltage: [0.0, 0.15],
            acceleration: 0.0,
            input: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    #[default]
    InjectionAmplitude,
    ThetaHatError0,
    NoiseStd,
    /// d̂-axis injection voltage in the closed-form determinant; no simulation.
    HfiVoltage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Operating point of the `hfi_voltage` sweep.
    pub omega: f64,
    pub theta_err: f64,
    pub times: Vec<f64>,
    pub hf_frequency: f64,
    /// Worker threads for simulated sweeps; rows are always in grid order.
    pub threads: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            parameter: SweepParameter::InjectionAmplitude,
            values: vec![0.0, 0.25, 0.5, 1.0],
            omega: 0.0,
            theta_err: -FRAC_PI_4,
            times: vec![0.0, 1e-4, 2e-4],
            hf_frequency: 2.0 * std::f64::consts::PI * 1000.0,
            threads: 1,
        }
    }
}

/// The file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub machine: MachineSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default = "InjectionSchedule::reference_current")]
    pub injection: InjectionSchedule,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub output: OutputSection,
    pub analyze: AnalyzeSection,
    pub sweep: SweepSection,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Parses and validates a configuration, reporting every semantic problem at once.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::ConfigSyntax { line, column, message: e.message().to_string() }
    })?;
    raw.into_run_config()
}

impl RawConfig {
    pub fn from_run_config(cfg: &RunConfig) -> Self {
        let s = &cfg.scenario;
        Self {
            machine: MachineSection::from_params(&s.params),
            scenario: ScenarioSection {
                t_end: s.t_end,
                ts: s.ts,
                ode_substeps: s.ode_substeps,
                theta_hat_error0: s.theta_hat_error0,
                seed: s.seed,
                noise_std: s.noise_std,
                setpoints: [s.setpoints.0, s.setpoints.1],
                start_at_setpoint: s.start_at_setpoint,
                observability_on: s.observability_on,
                profile: s.profile.clone(),
            },
            injection: s.injection,
            estimator: s.estimator,
            control: s.control,
            output: cfg.output.clone(),
            analyze: cfg.analyze.clone(),
            sweep: cfg.sweep.clone(),
        }
    }

    pub fn into_run_config(self) -> Result<RunConfig> {
        let mut errors = Vec::new();
        let params = self.machine.params(&mut errors);
        let sc = self.scenario;
        let scenario = params.map(|params| Scenario {
            params,
            profile: sc.profile,
            setpoints: (sc.setpoints[0], sc.setpoints[1]),
            injection: self.injection,
            t_end: sc.t_end,
            ts: sc.ts,
            ode_substeps: sc.ode_substeps,
            theta_hat_error0: sc.theta_hat_error0,
            seed: sc.seed,
            noise_std: sc.noise_std,
            estimator: self.estimator,
            control: self.control,
            observability_on: sc.observability_on,
            start_at_setpoint: sc.start_at_setpoint,
        });
        if let Some(s) = &scenario {
            errors.extend(s.violations());
        }
        if self.analyze.source == AnalyzeSource::Csv && self.analyze.input.is_none() {
            errors.push("analyze: source = \"csv\" needs an input path".into());
        }
        if !self.analyze.state.is_finite() || !self.analyze.voltage.iter().all(|v| v.is_finite()) {
            errors.push("analyze: state and voltage must be finite".into());
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            errors.push("sweep: values must be finite".into());
        }
        if self.sweep.threads == 0 {
            errors.push("sweep: threads must be at least 1".into());
        }
        match scenario {
            Some(scenario) if errors.is_empty() => {
                Ok(RunConfig { scenario, output: self.output, analyze: self.analyze, sweep: self.sweep })
            }
            _ => Err(Error::InvalidConfig(errors)),
        }
    }
}

impl RunConfig {
    pub fn from_scenario(scenario: Scenario) -> Self {
        Self {
            scenario,
            output: OutputSection::default(),
            analyze: AnalyzeSection::default(),
            sweep: SweepSection::default(),
        }
    }

    /// Every setting, defaults included, as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(&RawConfig::from_run_config(self)).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[machine]\nresistance = 0.01\nld = 0.5e-3\nlq = 0.8e-3\npsi_r = 0.0225\npole_pairs = 2\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.scenario, default_paper_scenario(MachineKind::Ipmsm));
    }

    #[test]
    fn print_config_roundtrips() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_config("[machine]\nresistance = = 1\n").unwrap_err();
        match err {
            Error::ConfigSyntax { line, .. } => assert_eq!(line, 2),
            e => panic!("{e:?}"),
        }
        let err = parse_config(&format!("{MINIMAL}bogus = 1\n")).unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 7, .. }), "{err:?}");
    }

    #[test]
    fn semantic_errors_are_exhaustive() {
        let text = "[machine]\nresistance = -1.0\nl0 = 1e-3\nl2 = 2e-3\npsi_r = 0.0225\npole_pairs = 2\n\
                    [scenario]\nts = 0.0\n[sweep]\nthreads = 0\n";
        match parse_config(text).unwrap_err() {
            Error::InvalidConfig(v) => {
                assert!(v.len() >= 4, "{v:?}");
                assert!(v.iter().any(|m| m.contains("L2") || m.contains("l2")), "{v:?}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn inductance_pairs_are_exclusive() {
        let text = MINIMAL.replace("lq = 0.8e-3", "l2 = 0.1e-3");
        assert!(matches!(parse_config(&text).unwrap_err(), Error::InvalidConfig(_)));
    }
}
