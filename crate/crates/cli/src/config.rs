//! Run configuration: one TOML file with a closed-world schema. Unknown keys
//! are rejected with a nearest-key suggestion, every physical parameter is
//! range-checked, and all defaults are filled in so a minimal (even empty)
//! file is valid. Command-line flags override individual keys after parsing.

use std::path::Path;

use disloc_core::{Error, PotentialSpec, Result, StressField};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub potential: PotentialSection,
    pub operator: OperatorSection,
    pub layer: LayerSection,
    pub corrector: CorrectorSection,
    pub particles: ParticlesSection,
    pub evolution: EvolutionSection,
    pub harness: HarnessSection,
    pub stress: StressSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    /// "builtin-cosine" or "cosine-series" (with `coefficients`)
    pub kind: String,
    pub coefficients: Vec<f64>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection { kind: "builtin-cosine".into(), coefficients: Vec::new() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorSection {
    pub s: f64,
}

impl Default for OperatorSection {
    fn default() -> Self {
        OperatorSection { s: 0.25 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayerSection {
    pub x_half: f64,
    pub dx: f64,
    pub tol: f64,
    /// decay fit window; defaults to [x_half/8, x_half/2]
    pub fit_lo: Option<f64>,
    pub fit_hi: Option<f64>,
}

impl Default for LayerSection {
    fn default() -> Self {
        LayerSection { x_half: 60.0, dx: 0.1, tol: 1e-7, fit_lo: None, fit_hi: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectorSection {
    pub tol: f64,
}

impl Default for CorrectorSection {
    fn default() -> Self {
        CorrectorSection { tol: 1e-4 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParticlesSection {
    /// strictly increasing initial dislocation positions
    pub positions: Vec<f64>,
    /// interaction strength; defaults to the solved layer's gamma
    pub gamma: Option<f64>,
    pub rtol: f64,
    pub t_end: f64,
    /// number of equispaced sample times in (0, t_end]
    pub n_samples: usize,
}

impl Default for ParticlesSection {
    fn default() -> Self {
        ParticlesSection {
            positions: vec![-2.0, 2.0],
            gamma: None,
            rtol: 1e-8,
            t_end: 1.0,
            n_samples: 10,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSection {
    pub epsilon: f64,
    /// "explicit" or "imex-reaction"
    pub scheme: String,
    pub dt_safety: f64,
    /// window; defaults to the particle positions padded by `padding`
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub padding: f64,
    /// grid spacing; defaults to epsilon / 8
    pub dx: Option<f64>,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        EvolutionSection {
            epsilon: 0.1,
            scheme: "explicit".into(),
            dt_safety: 0.9,
            x_min: None,
            x_max: None,
            padding: 22.0,
            dx: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessSection {
    /// collar half-width multiplier for bulk error windows
    pub kappa: f64,
    /// supersolution shift
    pub delta: f64,
    /// epsilon sweep, largest first
    pub epsilons: Vec<f64>,
    /// acceptance predicate: crossing errors must decrease along the sweep
    pub require_monotone: bool,
    /// acceptance predicate: final-time crossing error bound at the smallest epsilon
    pub max_final_crossing_error: Option<f64>,
    /// acceptance predicate: grid minimum of the supersolution discrepancy
    /// must stay above this fraction of delta
    pub barrier_min_fraction: Option<f64>,
}

impl Default for HarnessSection {
    fn default() -> Self {
        HarnessSection {
            kappa: 0.5,
            delta: 0.1,
            epsilons: vec![0.2, 0.1, 0.05],
            require_monotone: false,
            max_final_crossing_error: None,
            barrier_min_fraction: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StressSection {
    /// "zero", "constant", or "smooth"
    pub kind: String,
    pub amplitude: f64,
    pub k_x: f64,
    pub omega_t: f64,
    pub phase: f64,
}

impl Default for StressSection {
    fn default() -> Self {
        StressSection { kind: "zero".into(), amplitude: 0.0, k_x: 1.0, omega_t: 0.0, phase: 0.0 }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let s = self.operator.s;
        if !(s > 0.0 && s < 0.5) {
            return Err(Error::Config(format!("operator.s = {s} outside the model range (0, 1/2)")));
        }
        if !(self.layer.x_half > 0.0 && self.layer.dx > 0.0 && self.layer.tol > 0.0) {
            return Err(Error::Config("layer.x_half, layer.dx, layer.tol must be positive".into()));
        }
        if !(self.corrector.tol > 0.0) {
            return Err(Error::Config("corrector.tol must be positive".into()));
        }
        let pos = &self.particles.positions;
        if pos.is_empty() || pos.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(
                "particles.positions must be nonempty and strictly increasing".into(),
            ));
        }
        if let Some(g) = self.particles.gamma {
            if !(g > 0.0) {
                return Err(Error::Config(format!("particles.gamma = {g} must be positive")));
            }
        }
        if !(self.particles.rtol > 0.0 && self.particles.rtol < 1.0) {
            return Err(Error::Config(format!(
                "particles.rtol = {} outside (0, 1)",
                self.particles.rtol
            )));
        }
        if !(self.particles.t_end > 0.0) || self.particles.n_samples == 0 {
            return Err(Error::Config("particles.t_end and particles.n_samples must be positive".into()));
        }
        if !(self.evolution.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "evolution.epsilon = {} must be positive",
                self.evolution.epsilon
            )));
        }
        if !matches!(self.evolution.scheme.as_str(), "explicit" | "imex-reaction") {
            return Err(Error::Config(format!(
                "evolution.scheme = {:?} (expected \"explicit\" or \"imex-reaction\")",
                self.evolution.scheme
            )));
        }
        if !(self.harness.delta >= 0.0) {
            return Err(Error::Config(format!("harness.delta = {} must be >= 0", self.harness.delta)));
        }
        if self.harness.epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config("harness.epsilons must all be positive".into()));
        }
        if !matches!(self.stress.kind.as_str(), "zero" | "constant" | "smooth") {
            return Err(Error::Config(format!(
                "stress.kind = {:?} (expected \"zero\", \"constant\", or \"smooth\")",
                self.stress.kind
            )));
        }
        Ok(())
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        match self.potential.kind.as_str() {
            "builtin-cosine" => Ok(PotentialSpec::builtin_cosine()),
            "cosine-series" => PotentialSpec::user_cosine_series(self.potential.coefficients.clone()),
            other => Err(Error::Config(format!(
                "potential.kind = {other:?} (expected \"builtin-cosine\" or \"cosine-series\")"
            ))),
        }
    }

    pub fn stress_field(&self) -> Result<StressField> {
        let st = &self.stress;
        match st.kind.as_str() {
            "zero" => Ok(StressField::zero()),
            "constant" => StressField::constant(st.amplitude),
            "smooth" => StressField::smooth_builtin(st.amplitude, st.k_x, st.omega_t, st.phase),
            other => Err(Error::Config(format!("stress.kind = {other:?} not recognized"))),
        }
    }
}

/// Parse and validate a TOML configuration string.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        Error::Config(with_suggestion(&msg))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parse and validate a TOML configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// For "unknown field" schema errors, append the nearest valid key. The
/// deserializer's message already lists the expected keys in backticks.
fn with_suggestion(msg: &str) -> String {
    let Some(rest) = msg.strip_prefix("unknown field `") else {
        return msg.to_string();
    };
    let Some(end) = rest.find('`') else {
        return msg.to_string();
    };
    let unknown = &rest[..end];
    let candidates: Vec<&str> = rest[end + 1..]
        .split('`')
        .skip(1)
        .step_by(2)
        .collect();
    let best = candidates
        .iter()
        .map(|c| (edit_distance(unknown, c), *c))
        .min_by_key(|&(d, _)| d);
    match best {
        Some((d, key)) if d <= 1 + unknown.len() / 3 => {
            format!("{msg}; did you mean `{key}`?")
        }
        _ => msg.to_string(),
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config_str("").unwrap();
        assert_eq!(cfg.operator.s, 0.25);
        assert_eq!(cfg.particles.positions, vec![-2.0, 2.0]);
        assert_eq!(cfg.harness.epsilons, vec![0.2, 0.1, 0.05]);
    }

    #[test]
    fn out_of_range_s_rejected() {
        let err = parse_config_str("[operator]\ns = 0.7\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("operator.s") && msg.contains("(0, 1/2)"), "{msg}");
    }

    #[test]
    fn unknown_section_suggests_nearest() {
        let err = parse_config_str("[potentail]\nkind = \"builtin-cosine\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("potentail"), "{msg}");
        assert!(msg.contains("did you mean `potential`?"), "{msg}");
    }

    #[test]
    fn unknown_key_within_section_rejected() {
        let err = parse_config_str("[layer]\nxhalf = 30.0\n").unwrap_err();
        assert!(err.to_string().contains("did you mean `x_half`?"), "{err}");
    }

    #[test]
    fn unsorted_positions_rejected() {
        let err = parse_config_str("[particles]\npositions = [2.0, -2.0]\n").unwrap_err();
        assert!(err.to_string().contains("strictly increasing"));
    }
}
