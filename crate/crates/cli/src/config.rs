use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use updoubling::dominating::{fit_power_law, minimal_envelope, DominatingFunction, DoublingParams};
use updoubling::{Ball, CanonicalBallFamily, Generator, Space, SpaceFunction};

/// Solving the RBMO problem enumerates every pair of balls, so larger spaces need `--force`.
pub const SCALE_CAP: usize = 20;

/// Settings shared by every command. A JSON config file supplies defaults and flags override it.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub space: Option<PathBuf>,
    pub generate: Option<String>,
    pub lambda: Option<String>,
    pub function: Option<FunctionSource>,
    pub rho: Option<f64>,
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub ball: Option<String>,
    pub t_grid: Option<String>,
    pub out: Option<PathBuf>,
    pub force: bool,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FunctionSource {
    Values(Vec<f64>),
    Spec(String),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields set in `other` replace ours.
    pub fn overlay(mut self, other: RunConfig) -> Self {
        macro_rules! take {
            ($($field:ident),*) => { $( if other.$field.is_some() { self.$field = other.$field; } )* };
        }
        take!(space, generate, lambda, function, rho, sigma, alpha, beta, ball, t_grid, out, seed);
        self.force |= other.force;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(rho) = self.rho {
            ensure!(rho.is_finite() && rho > 1.0, "--rho must exceed 1, got {rho}");
        }
        if let Some(sigma) = self.sigma {
            ensure!(sigma.is_finite() && sigma > 1.0, "--sigma must exceed 1, got {sigma}");
            ensure!(
                self.rho() > sigma,
                "need rho > sigma, got rho = {}, sigma = {sigma}",
                self.rho()
            );
        }
        if self.space.is_some() && self.generate.is_some() {
            bail!("give either --space or --generate, not both");
        }
        Ok(())
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or(2.0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    pub fn load_space(&self) -> Result<Space> {
        match (&self.space, &self.generate) {
            (Some(path), _) => Space::load(path).with_context(|| format!("loading space {}", path.display())),
            (None, Some(spec)) => Ok(spec.parse::<Generator>()?.build()?),
            (None, None) => bail!("no space given: use --space FILE or --generate SPEC"),
        }
    }

    /// Refuses spaces above [`SCALE_CAP`] points unless `--force` was given.
    pub fn check_scale(&self, space: &Space) -> Result<()> {
        if space.len() > SCALE_CAP && !self.force {
            bail!(
                "space has {} points; solving enumerates all ball pairs and is limited to {SCALE_CAP} points (pass --force to run anyway)",
                space.len()
            );
        }
        Ok(())
    }

    /// `ball`, `power(C,d)`, `fit(d)` or `envelope(C)`.
    pub fn lambda(&self, space: &Space) -> Result<DominatingFunction> {
        let spec = self.lambda.as_deref().unwrap_or("ball");
        let (name, args) = split_call(spec)?;
        let lambda = match (name, args.as_slice()) {
            ("ball" | "ballmeasure", []) => DominatingFunction::ball_measure(space),
            ("power", [c, d]) => DominatingFunction::power_law(*c, *d)?,
            ("fit", [d]) => fit_power_law(space, *d)?,
            ("envelope", [c]) => minimal_envelope(*c)?,
            _ => bail!("unknown lambda `{spec}`; expected ball, power(C,d), fit(d) or envelope(C)"),
        };
        Ok(lambda)
    }

    /// A literal list, or `spike(i)`, `constant(c)`, `sawtooth(p)`, `random`, or a JSON file of values.
    pub fn function(&self, space: &Space) -> Result<SpaceFunction> {
        let n = space.len();
        let values = match &self.function {
            Some(FunctionSource::Values(v)) => v.clone(),
            None => random_values(n, self.seed()),
            Some(FunctionSource::Spec(spec)) if spec.trim_start().starts_with('[') => {
                serde_json::from_str(spec).with_context(|| format!("parsing function list `{spec}`"))?
            }
            Some(FunctionSource::Spec(spec)) => {
                match split_call(spec).ok().as_ref().map(|(name, a)| (*name, a.as_slice())) {
                    Some(("spike", [i])) => {
                        let at = *i as usize;
                        ensure!(*i >= 0.0 && at < n && at as f64 == *i, "spike index {i} outside 0..{n}");
                        SpaceFunction::spike(n, at).values().to_vec()
                    }
                    Some(("constant", [c])) => vec![*c; n],
                    Some(("sawtooth", [p])) => {
                        ensure!(*p >= 1.0, "sawtooth period must be at least 1");
                        (0..n).map(|i| (i % *p as usize) as f64).collect()
                    }
                    Some(("random", [])) => random_values(n, self.seed()),
                    _ => read_values(Path::new(spec))?,
                }
            }
        };
        let f = SpaceFunction::new(values)?;
        space.check_function(&f)?;
        Ok(f)
    }

    /// `--alpha/--beta` when both are set, else the standard pair for `rho`.
    pub fn params(&self, lambda: &DominatingFunction, n_exponent: f64) -> Result<DoublingParams> {
        Ok(match (self.alpha, self.beta) {
            (Some(alpha), Some(beta)) => DoublingParams::new(alpha, beta)?,
            (None, None) => DoublingParams::standard(self.rho(), lambda.c_lambda(), n_exponent)?,
            _ => bail!("--alpha and --beta go together"),
        })
    }

    /// `--ball center,radius` with the centre by name or index; defaults to the largest ball at the first point.
    pub fn ball(&self, space: &Space) -> Result<Ball> {
        let Some(spec) = &self.ball else {
            let family = CanonicalBallFamily::new(space);
            return Ok(*family.around(0).last().expect("every point has a ball"));
        };
        let (center, radius) = spec
            .split_once(',')
            .with_context(|| format!("--ball expects center,radius, got `{spec}`"))?;
        let center = center.trim();
        let c = space
            .index_of(center)
            .or_else(|| center.parse().ok().filter(|&i: &usize| i < space.len()))
            .with_context(|| format!("unknown point `{center}`"))?;
        let radius: f64 = radius
            .trim()
            .parse()
            .with_context(|| format!("bad radius `{radius}`"))?;
        Ok(Ball::new(c, radius)?)
    }

    /// `min:max:steps` as `steps` evenly spaced values, or `None` if unset.
    pub fn t_grid(&self) -> Result<Option<Vec<f64>>> {
        let Some(spec) = &self.t_grid else { return Ok(None) };
        let parts: Vec<&str> = spec.split(':').collect();
        let [lo, hi, steps] = parts.as_slice() else {
            bail!("--t-grid expects min:max:steps, got `{spec}`");
        };
        let lo: f64 = lo.parse().context("--t-grid min")?;
        let hi: f64 = hi.parse().context("--t-grid max")?;
        let steps: usize = steps.parse().context("--t-grid steps")?;
        ensure!(
            lo >= 0.0 && hi >= lo && hi.is_finite(),
            "--t-grid needs 0 <= min <= max"
        );
        ensure!(steps >= 1, "--t-grid needs at least one step");
        Ok(Some(linspace(lo, hi, steps)))
    }
}

pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

fn random_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Doc {
        Bare(Vec<f64>),
        Wrapped { values: Vec<f64> },
    }
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("`{}` is neither a function spec nor a readable file", path.display()))?;
    let doc: Doc = serde_json::from_str(&text).with_context(|| format!("parsing function {}", path.display()))?;
    Ok(match doc {
        Doc::Bare(v) | Doc::Wrapped { values: v } => v,
    })
}

/// `name(a,b)` into the name and numeric arguments; a bare name has none.
fn split_call(spec: &str) -> Result<(&str, Vec<f64>)> {
    let spec = spec.trim();
    let Some(open) = spec.find('(') else {
        return Ok((spec, Vec::new()));
    };
    let inner = spec[open + 1..]
        .strip_suffix(')')
        .with_context(|| format!("unbalanced parentheses in `{spec}`"))?;
    let args = inner
        .split(',')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(|a| {
            a.parse::<f64>()
                .with_context(|| format!("bad number `{a}` in `{spec}`"))
        })
        .collect::<Result<_>>()?;
    Ok((&spec[..open], args))
}
